//! Sorted key arrays and ground-truth rank semantics.
//!
//! Positions in every search contract are 1-based and windows are
//! inclusive, `[lo, hi]`. A windowed search returns the rank *relative to*
//! position `lo - 1`: the number of keys in `lo..=hi` that are `<= q`.

use std::fmt;

use crate::error::{Error, Result};
use crate::instrument::OpContext;

/// Number of keys `<= q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rank(pub usize);

impl Rank {
    pub fn get(self) -> usize {
        self.0
    }
}

impl From<Rank> for usize {
    fn from(r: Rank) -> usize {
        r.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An immutable ascending array of keys inside a closed domain.
///
/// Ties are allowed. NaN keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedKeyArray {
    keys: Vec<f64>,
    domain_lo: f64,
    domain_hi: f64,
}

impl SortedKeyArray {
    pub fn new(keys: Vec<f64>, domain_lo: f64, domain_hi: f64) -> Result<Self> {
        if !(domain_lo < domain_hi) {
            return Err(Error::InvalidDomain {
                lo: domain_lo,
                hi: domain_hi,
            });
        }
        for (pos, &key) in keys.iter().enumerate() {
            if key.is_nan() {
                return Err(Error::NanKey(pos));
            }
            if key < domain_lo || key > domain_hi {
                return Err(Error::KeyOutsideDomain {
                    pos,
                    key,
                    lo: domain_lo,
                    hi: domain_hi,
                });
            }
        }
        if let Some(pos) = keys.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::UnsortedKeys(pos + 1));
        }
        Ok(SortedKeyArray {
            keys,
            domain_lo,
            domain_hi,
        })
    }

    /// Keys on the unit domain `[0, 1]`.
    pub fn unit(keys: Vec<f64>) -> Result<Self> {
        Self::new(keys, 0.0, 1.0)
    }

    /// Sorts `keys` and uses their own extent as the domain.
    ///
    /// A single distinct value gets a unit-width domain around it.
    pub fn from_unsorted(mut keys: Vec<f64>) -> Result<Self> {
        if let Some(pos) = keys.iter().position(|k| k.is_nan()) {
            return Err(Error::NanKey(pos));
        }
        keys.sort_unstable_by(f64::total_cmp);
        let (lo, hi) = match (keys.first(), keys.last()) {
            (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
            (Some(&lo), Some(_)) => (lo, lo + 1.0),
            _ => (0.0, 1.0),
        };
        Self::new(keys, lo, hi)
    }

    pub(crate) fn from_sorted_unchecked(keys: Vec<f64>, domain_lo: f64, domain_hi: f64) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        SortedKeyArray {
            keys,
            domain_lo,
            domain_hi,
        }
    }

    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn into_keys(self) -> Vec<f64> {
        self.keys
    }
}

/// Exact rank of `q` by linear scan. This is the testing oracle.
pub fn rank_oracle(a: &SortedKeyArray, q: f64) -> Rank {
    Rank(a.keys().iter().filter(|&&k| k <= q).count())
}

/// Exact ranks of many queries in one linear merge over the array.
///
/// Equivalent to calling [`rank_oracle`] per query, in `O(n + m log m)`.
pub fn rank_oracle_batch(a: &SortedKeyArray, queries: &[f64]) -> Vec<Rank> {
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_unstable_by(|&x, &y| queries[x].total_cmp(&queries[y]));
    let keys = a.keys();
    let mut out = vec![Rank(0); queries.len()];
    let mut count = 0;
    for idx in order {
        let q = queries[idx];
        while count < keys.len() && keys[count] <= q {
            count += 1;
        }
        out[idx] = Rank(count);
    }
    out
}

/// Counts the keys at 1-based positions `first..=last` that are `<= q`.
///
/// An empty window (`first == last + 1`) returns 0 without touching memory.
/// Each probe is one counted read; a window of `m` keys costs at most
/// `floor(log2 m) + 1` probes.
#[inline]
pub(crate) fn search_window(
    keys: &[f64],
    q: f64,
    first: usize,
    last: usize,
    ctx: &mut OpContext,
) -> usize {
    let mut base = first;
    let mut len = (last + 1).saturating_sub(first);
    while len > 0 {
        let half = len / 2;
        let mid = base + half;
        if ctx.read(keys, mid) <= q {
            base = mid + 1;
            len -= half + 1;
        } else {
            len = half;
        }
    }
    base - first
}

/// Rank of `q` relative to position `lo - 1`, searching the 1-based window
/// `[lo, hi]`.
///
/// The caller guarantees that every key before `lo` is `<= q`; under that
/// guarantee `lo - 1 + result` is the global rank when the answer lies in
/// the window. If `q` is below `keys[lo]` the result is simply 0.
pub fn binary_search_rank(
    a: &SortedKeyArray,
    q: f64,
    lo: usize,
    hi: usize,
    ctx: &mut OpContext,
) -> Result<Rank> {
    let n = a.len();
    if lo == 0 || lo > hi || hi > n {
        return Err(Error::WindowViolation { lo, hi, n });
    }
    Ok(Rank(search_window(a.keys(), q, lo, hi, ctx)))
}

/// Raw key types accepted by [`normalize`].
pub trait RawKey: Copy + PartialOrd {
    /// `self - base` as a real, for `self >= base`.
    fn offset_from(self, base: Self) -> f64;
    fn is_nan_key(self) -> bool {
        false
    }
}

impl RawKey for f64 {
    fn offset_from(self, base: f64) -> f64 {
        self - base
    }
    fn is_nan_key(self) -> bool {
        self.is_nan()
    }
}

impl RawKey for u64 {
    fn offset_from(self, base: u64) -> f64 {
        // exact in integers, rounded once on conversion
        (self - base) as f64
    }
}

/// Sorts raw keys and maps them affinely onto `[0, 1]` using their own
/// minimum and maximum.
pub fn normalize<K: RawKey>(raw: &[K]) -> Result<SortedKeyArray> {
    let mut sorted = raw.to_vec();
    if let Some(pos) = sorted.iter().position(|k| k.is_nan_key()) {
        return Err(Error::NanKey(pos));
    }
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    let (Some(&r), Some(&s)) = (sorted.first(), sorted.last()) else {
        return Err(Error::DegenerateData);
    };
    if !(r < s) {
        return Err(Error::DegenerateData);
    }
    Ok(map_sorted(&sorted, r, s))
}

/// Maps keys onto `[0, 1]` with the fixed affine map `x -> (x - r) / (s - r)`.
///
/// Used when a subsample must share the normalization of its parent
/// dataset. Every key must lie in `[r, s]`.
pub fn normalize_with_range<K: RawKey>(raw: &[K], r: K, s: K) -> Result<SortedKeyArray> {
    if !(r < s) {
        return Err(Error::DegenerateData);
    }
    let mut sorted = raw.to_vec();
    if let Some(pos) = sorted.iter().position(|k| k.is_nan_key() || *k < r || *k > s) {
        return Err(Error::KeyOutsideDomain {
            pos,
            key: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        });
    }
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    Ok(map_sorted(&sorted, r, s))
}

fn map_sorted<K: RawKey>(sorted: &[K], r: K, s: K) -> SortedKeyArray {
    let span = s.offset_from(r);
    let keys = sorted
        .iter()
        .map(|&x| (x.offset_from(r) / span).clamp(0.0, 1.0))
        .collect();
    SortedKeyArray::from_sorted_unchecked(keys, 0.0, 1.0)
}
