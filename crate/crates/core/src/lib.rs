//! Learned indexes for the rank (predecessor) problem on sorted arrays
//! drawn i.i.d. from a distribution.
//!
//! Three constructions are provided, each answering `rank(q)` = number of
//! keys `<= q` exactly, with query cost measured in memory operations:
//!
//! - [`pca::PcaIndex`]: one piecewise-constant model over the whole domain
//!   with near-linear pieces; constant expected query cost.
//! - [`rds::rds_search`]: recursive search driven by an exactly evaluable
//!   CDF; no index storage, `O(log log n)` expected cost.
//! - [`rda::RdaIndex`]: a tree of piecewise-constant models whose coverage
//!   shrinks by roughly a square root per level; `O(log log n)` expected
//!   cost with quasi-linear storage.
//!
//! [`subexp::SubExpComposite`] lifts any of them to unbounded domains, and
//! [`bench`] reproduces the operation-count experiments.

pub mod bench;
pub mod distributions;
pub mod error;
pub mod instrument;
pub mod keyfile;
pub mod keys;
pub mod pca;
pub mod rda;
pub mod rds;
pub mod subexp;

use std::sync::Arc;

pub use error::{Error, Result};
pub use instrument::OpContext;
pub use keys::{Rank, SortedKeyArray};

/// A structure answering exact rank queries with counted memory operations.
pub trait RankIndex: Send + Sync {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank;

    /// Number of integers the index stores beyond the key array itself.
    fn size_ints(&self) -> u64;

    fn len(&self) -> usize;
}

/// Plain binary search over the whole array; the baseline.
#[derive(Debug, Clone)]
pub struct BinaryIndex {
    array: Arc<SortedKeyArray>,
}

impl BinaryIndex {
    pub fn new(array: Arc<SortedKeyArray>) -> Self {
        BinaryIndex { array }
    }
}

impl RankIndex for BinaryIndex {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank {
        Rank(keys::search_window(self.array.keys(), q, 1, self.array.len(), ctx))
    }

    fn size_ints(&self) -> u64 {
        0
    }

    fn len(&self) -> usize {
        self.array.len()
    }
}
