//! Piecewise-constant approximation of the rank function.
//!
//! A [`PcfModel`] splits `[lo, hi]` into `k` equal-width pieces and stores,
//! for each piece, the constant that minimizes the worst-case error against
//! the true rank over that piece: the midpoint of the smallest and largest
//! rank a query routed to the piece can have. Those midpoints are
//! half-integers, so pieces are stored doubled.
//!
//! The maximum error `max_err` is measured at build time, which makes the
//! error-correction window `[estimate - max_err, estimate + max_err]`
//! always contain the answer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::instrument::OpContext;
use crate::keys::{search_window, Rank, SortedKeyArray};
use crate::RankIndex;

/// Largest piece count the harness will allocate.
pub const MAX_PIECES: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct PcfModel {
    pieces: Vec<u32>,
    lo: f64,
    hi: f64,
    scale: f64,
    max_err: u32,
}

impl PcfModel {
    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// Stored values; each is twice the piece's rank estimate.
    pub fn doubled_pieces(&self) -> &[u32] {
        &self.pieces
    }

    pub fn max_err(&self) -> u32 {
        self.max_err
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Piece responsible for `x`; values outside the domain map to the
    /// boundary pieces. Monotone nondecreasing in `x`.
    #[inline]
    pub fn piece_of(&self, x: f64) -> usize {
        // saturating cast: negatives and NaN go to 0
        (((x - self.lo) * self.scale) as usize).min(self.pieces.len() - 1)
    }

    #[inline]
    pub fn estimate_doubled(&self, x: f64) -> u32 {
        self.pieces[self.piece_of(x)]
    }

    pub fn estimate(&self, x: f64) -> f64 {
        self.estimate_doubled(x) as f64 / 2.0
    }

    /// Relative ranks `[first, last]` that can hold the answer for an
    /// estimate stored as `doubled`, clipped to `[0, total]`.
    #[inline]
    pub(crate) fn rank_window(&self, doubled: u32, total: usize) -> (usize, usize) {
        let spread = 2 * self.max_err as i64;
        let low = (doubled as i64 - spread).max(0);
        let first = ((low + 1) / 2) as usize;
        let last = (((doubled as i64 + spread) / 2) as usize).min(total);
        (first, last)
    }

    /// Pieces plus the error bound.
    pub fn size_ints(&self) -> u64 {
        self.pieces.len() as u64 + 1
    }

    /// Header `(k, max_err, lo, hi)` then `k` pieces, all 8-byte little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.pieces.len());
        self.write_to(&mut out);
        out
    }

    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.pieces.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.max_err as u64).to_le_bytes());
        out.extend_from_slice(&self.lo.to_le_bytes());
        out.extend_from_slice(&self.hi.to_le_bytes());
        for &p in &self.pieces {
            out.extend_from_slice(&(p as u64).to_le_bytes());
        }
    }

    /// Decodes a model whose pieces estimate ranks in `[0, total]`.
    pub fn from_bytes(bytes: &[u8], total: usize) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes);
        let model = Self::read_from(&mut cur, total)?;
        if !cur.is_empty() {
            return Err(Error::CorruptIndex("trailing bytes after model".into()));
        }
        Ok(model)
    }

    pub(crate) fn read_from(cur: &mut ByteCursor<'_>, total: usize) -> Result<Self> {
        let k = cur.u64()?;
        let max_err = cur.u64()?;
        let lo = cur.f64()?;
        let hi = cur.f64()?;
        if k == 0 || k > MAX_PIECES {
            return Err(Error::CorruptIndex(format!("piece count {k}")));
        }
        if !(lo < hi) {
            return Err(Error::CorruptIndex(format!("domain [{lo}, {hi}]")));
        }
        if max_err > total as u64 {
            return Err(Error::CorruptIndex(format!("error bound {max_err} exceeds {total}")));
        }
        let mut pieces = Vec::with_capacity(k as usize);
        for _ in 0..k {
            let p = cur.u64()?;
            if p > 2 * total as u64 {
                return Err(Error::CorruptIndex(format!("piece value {p} exceeds 2n")));
            }
            pieces.push(p as u32);
        }
        Ok(PcfModel {
            scale: k as f64 / (hi - lo),
            pieces,
            lo,
            hi,
            max_err: max_err as u32,
        })
    }
}

pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteCursor { bytes }
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        let Some((head, rest)) = self.bytes.split_first_chunk::<8>() else {
            return Err(Error::CorruptIndex("unexpected end of data".into()));
        };
        self.bytes = rest;
        Ok(u64::from_le_bytes(*head))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        self.u64().map(f64::from_bits)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Builds a `k`-piece model of the rank function of the 1-based subarray
/// `first..=last` over `[lo, hi]`.
///
/// Ranks are relative to the subarray. Each key is routed with the same
/// [`PcfModel::piece_of`] used at query time, so the measured error is a
/// bound for every query, including those outside `[lo, hi]`. An empty
/// subarray (`first == last + 1`) yields an all-zero model.
pub fn build_pcf(
    a: &SortedKeyArray,
    first: usize,
    last: usize,
    k: usize,
    lo: f64,
    hi: f64,
) -> Result<PcfModel> {
    if !(lo < hi) {
        return Err(Error::InvalidDomain { lo, hi });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("piece count must be at least 1".into()));
    }
    if k as u64 > MAX_PIECES {
        return Err(Error::PieceCapExceeded {
            requested: k as u64,
            cap: MAX_PIECES,
        });
    }
    if first == 0 || last > a.len() || first > last + 1 {
        return Err(Error::WindowViolation {
            lo: first,
            hi: last,
            n: a.len(),
        });
    }
    let keys = &a.keys()[first - 1..last];
    if keys.len() >= (u32::MAX / 2) as usize {
        return Err(Error::InvalidConfig(format!(
            "subarray of {} keys is too large for 32-bit pieces",
            keys.len()
        )));
    }

    let mut model = PcfModel {
        pieces: vec![0; k],
        lo,
        hi,
        scale: k as f64 / (hi - lo),
        max_err: 0,
    };

    // Keys are sorted, so their pieces are nondecreasing: walk piece groups.
    let mut below: u32 = 0;
    let mut filled = 0;
    let mut i = 0;
    while i < keys.len() {
        let p = model.piece_of(keys[i]);
        let mut j = i;
        while j < keys.len() && model.piece_of(keys[j]) == p {
            j += 1;
        }
        let count = (j - i) as u32;
        // Keys sitting on the smallest value routed to piece p are <= every
        // query routed there, so they raise the piece's minimum rank.
        let edge = if p > 0 && model.piece_of(keys[i].next_down()) < p {
            keys[i..j].iter().take_while(|&&x| x == keys[i]).count() as u32
        } else {
            0
        };
        model.pieces[filled..p].fill(2 * below);
        model.pieces[p] = 2 * below + edge + count;
        model.max_err = model.max_err.max((count - edge).div_ceil(2));
        below += count;
        filled = p + 1;
        i = j;
    }
    model.pieces[filled..].fill(2 * below);
    Ok(model)
}

/// `ceil(n^(1 + eps/2) * rho^(1 + eps/4))`, at least 1.
pub fn pca_piece_count(n: usize, eps: f64, rho: f64) -> u64 {
    let k = (n as f64).powf(1.0 + eps / 2.0) * rho.powf(1.0 + eps / 4.0);
    (k.ceil() as u64).max(1)
}

/// Single-model index over the array's domain.
#[derive(Debug, Clone)]
pub struct PcaIndex {
    model: PcfModel,
    eps: f64,
    rho: f64,
    array: Arc<SortedKeyArray>,
}

pub fn build_pca(a: Arc<SortedKeyArray>, eps: f64, rho: f64) -> Result<PcaIndex> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    let k = pca_piece_count(a.len(), eps, rho);
    if k > MAX_PIECES {
        return Err(Error::PieceCapExceeded {
            requested: k,
            cap: MAX_PIECES,
        });
    }
    let (lo, hi) = a.domain();
    let model = build_pcf(&a, 1, a.len(), k as usize, lo, hi)?;
    Ok(PcaIndex {
        model,
        eps,
        rho,
        array: a,
    })
}

impl PcaIndex {
    pub fn model(&self) -> &PcfModel {
        &self.model
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn array(&self) -> &Arc<SortedKeyArray> {
        &self.array
    }

    pub fn query(&self, q: f64, ctx: &mut OpContext) -> Rank {
        let n = self.array.len();
        ctx.model_read();
        let doubled = self.model.estimate_doubled(q);
        let (first, last) = self.model.rank_window(doubled, n);
        Rank(first + search_window(self.array.keys(), q, first + 1, last, ctx))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.model.to_bytes()
    }

    /// Reattaches a serialized model to its key array.
    pub fn from_bytes(bytes: &[u8], array: Arc<SortedKeyArray>) -> Result<Self> {
        let model = PcfModel::from_bytes(bytes, array.len())?;
        Ok(PcaIndex {
            model,
            eps: f64::NAN,
            rho: f64::NAN,
            array,
        })
    }
}

impl RankIndex for PcaIndex {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank {
        self.query(q, ctx)
    }

    fn size_ints(&self) -> u64 {
        self.model.size_ints()
    }

    fn len(&self) -> usize {
        self.array.len()
    }
}
