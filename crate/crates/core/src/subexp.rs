//! Composite index for centered data on an unbounded domain.
//!
//! With sub-exponential tails, all `n` samples land in `[-l, l]` for
//! `l = ceil(ln(2 n ln n))` with probability at least `1 - 1/n`. The range is
//! cut into `2l` unit slices, each with its own index, plus the rank offset
//! of every slice. If any key falls outside `[-l, l]`, the composite gives
//! up on slicing and binary searches the whole array.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::instrument::OpContext;
use crate::keys::{Rank, SortedKeyArray};
use crate::{BinaryIndex, RankIndex};

/// `max(1, ceil(ln(2 n ln n)))`.
pub fn half_width(n: usize) -> usize {
    let n = n as f64;
    let l = (2.0 * n * n.ln()).ln().ceil();
    if l.is_finite() && l >= 1.0 {
        l as usize
    } else {
        1
    }
}

pub struct SubExpComposite {
    half_width: usize,
    /// `None` for empty slices.
    slices: Vec<Option<Box<dyn RankIndex>>>,
    /// `offsets[z]` = keys in slices before `z`.
    offsets: Vec<usize>,
    fallback: Option<BinaryIndex>,
    len: usize,
}

impl std::fmt::Debug for SubExpComposite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubExpComposite")
            .field("half_width", &self.half_width)
            .field("offsets", &self.offsets)
            .field("fallback", &self.fallback.is_some())
            .field("len", &self.len)
            .finish()
    }
}

/// Builds the composite over `raw`, calling `builder` once per nonempty
/// slice. Slice `z` is handed its keys with domain `[-l + z, -l + z + 1]`.
pub fn build_subexp<F>(mut builder: F, raw: Arc<SortedKeyArray>) -> Result<SubExpComposite>
where
    F: FnMut(Arc<SortedKeyArray>) -> Result<Box<dyn RankIndex>>,
{
    let n = raw.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let l = half_width(n);
    let keys = raw.keys();
    let bound = l as f64;
    if keys[0] < -bound || keys[n - 1] > bound {
        return Ok(SubExpComposite {
            half_width: l,
            slices: Vec::new(),
            offsets: Vec::new(),
            fallback: Some(BinaryIndex::new(raw)),
            len: n,
        });
    }
    let mut slices = Vec::with_capacity(2 * l);
    let mut offsets = Vec::with_capacity(2 * l + 1);
    let mut pos = 0;
    for z in 0..2 * l {
        offsets.push(pos);
        let end = pos + keys[pos..].partition_point(|&x| route(x, l) == z);
        if end == pos {
            slices.push(None);
            continue;
        }
        let lo = z as f64 - bound;
        let slice = SortedKeyArray::new(keys[pos..end].to_vec(), lo, lo + 1.0)?;
        slices.push(Some(builder(Arc::new(slice))?));
        pos = end;
    }
    offsets.push(pos);
    debug_assert_eq!(pos, n);
    Ok(SubExpComposite {
        half_width: l,
        slices,
        offsets,
        fallback: None,
        len: n,
    })
}

/// Slice of `x`: `floor(x) + l` clamped to `[0, 2l - 1]`.
#[inline]
fn route(x: f64, l: usize) -> usize {
    let z = x.floor() + l as f64;
    if z <= 0.0 {
        0
    } else {
        (z as usize).min(2 * l - 1)
    }
}

impl SubExpComposite {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    /// Number of slices holding at least one key.
    pub fn nonempty_slices(&self) -> usize {
        self.slices.iter().filter(|s| s.is_some()).count()
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn query(&self, q: f64, ctx: &mut OpContext) -> Rank {
        if let Some(b) = &self.fallback {
            return b.rank(q, ctx);
        }
        let z = route(q, self.half_width);
        ctx.model_read();
        let inner = match &self.slices[z] {
            Some(idx) => idx.rank(q, ctx).0,
            None => 0,
        };
        Rank(self.offsets[z] + inner)
    }
}

impl RankIndex for SubExpComposite {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank {
        self.query(q, ctx)
    }

    /// Slice indexes plus the offsets table.
    fn size_ints(&self) -> u64 {
        let inner: u64 = self.slices.iter().flatten().map(|s| s.size_ints()).sum();
        inner + self.offsets.len() as u64
    }

    fn len(&self) -> usize {
        self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::rank_oracle;
    use crate::pca::build_pca;
    use crate::rda::rda_build;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rda_builder(a: Arc<SortedKeyArray>) -> Result<Box<dyn RankIndex>> {
        Ok(Box::new(rda_build(a, 1.0)?))
    }

    fn pca_builder(a: Arc<SortedKeyArray>) -> Result<Box<dyn RankIndex>> {
        Ok(Box::new(build_pca(a, 0.2, 1.0)?))
    }

    fn gaussian(n: usize, seed: u64) -> Arc<SortedKeyArray> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Arc::new(SortedKeyArray::from_unsorted(keys).unwrap())
    }

    #[test]
    fn half_width_values() {
        // ln(2000 ln 1000) = 9.534
        assert_eq!(half_width(1000), 10);
        assert_eq!(half_width(1), 1);
        assert_eq!(half_width(2), 2);
        assert_eq!(half_width(3), 2);
        let c = build_subexp(rda_builder, gaussian(1000, 1)).unwrap();
        assert_eq!(c.slice_count(), 20);
        assert!(!c.is_fallback());
    }

    #[test]
    fn only_one_slice_for_keys_in_a_unit_cell() {
        let keys: Vec<f64> = (0..100).map(|i| -1.0 + i as f64 / 101.0).collect();
        let a = Arc::new(SortedKeyArray::from_unsorted(keys).unwrap());
        let c = build_subexp(pca_builder, a.clone()).unwrap();
        assert_eq!(c.nonempty_slices(), 1);
        assert!(c.slices[c.half_width() - 1].is_some());
        for q in [-20.0, -1.5, -1.0, -0.5, 0.0, 3.0, 20.0] {
            assert_eq!(c.query(q, &mut OpContext::new()), rank_oracle(&a, q));
        }
    }

    #[test]
    fn far_key_forces_fallback() {
        let mut keys: Vec<f64> = (0..99).map(|i| i as f64 / 99.0).collect();
        keys.push(1e6);
        let a = Arc::new(SortedKeyArray::from_unsorted(keys).unwrap());
        let c = build_subexp(rda_builder, a.clone()).unwrap();
        assert!(c.is_fallback());
        assert_eq!(c.size_ints(), 0);
        for q in [-1.0, 0.5, 10.0, 1e6, 2e6] {
            assert_eq!(c.query(q, &mut OpContext::new()), rank_oracle(&a, q));
        }
    }

    #[test]
    fn tails_answer_from_offsets() {
        let a = gaussian(500, 2);
        let c = build_subexp(rda_builder, a).unwrap();
        let l = c.half_width() as f64;
        let mut ctx = OpContext::new();
        assert_eq!(c.query(-l - 0.5, &mut ctx), Rank(0));
        assert_eq!(c.query(l + 0.5, &mut ctx), Rank(500));
        assert!(matches!(
            build_subexp(rda_builder, Arc::new(SortedKeyArray::from_unsorted(vec![]).unwrap())),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn matches_oracle_on_gaussian_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5 {
            let a = gaussian(10_000, seed);
            let c = build_subexp(rda_builder, a.clone()).unwrap();
            assert!(!c.is_fallback());
            for _ in 0..1000 {
                let q = rng.random_range(-6.0..6.0);
                assert_eq!(c.query(q, &mut OpContext::new()), rank_oracle(&a, q));
            }
        }
    }

    #[test]
    fn exhaustive_on_small_arrays() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=64 {
            for _ in 0..5 {
                // integer-valued keys sit exactly on slice boundaries
                let keys: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            rng.random_range(-3i32..=3) as f64
                        } else {
                            rng.sample::<f64, _>(StandardNormal)
                        }
                    })
                    .collect();
                let a = Arc::new(SortedKeyArray::from_unsorted(keys).unwrap());
                for c in [build_subexp(rda_builder, a.clone()).unwrap(), build_subexp(pca_builder, a.clone()).unwrap()] {
                    let mut qs: Vec<f64> = a.keys().to_vec();
                    qs.extend((-40..=40).map(|g| g as f64 / 8.0));
                    for q in qs {
                        assert_eq!(c.query(q, &mut OpContext::new()), rank_oracle(&a, q));
                    }
                }
            }
        }
    }
}
