//! Recursive distribution approximator: a tree of piecewise-constant models.
//!
//! A node covering `k` keys holds a `ceil(ratio * sqrt(k))`-piece model of
//! its node-relative rank function. The model pins the answer to a window
//! of roughly `2 sqrt(k ln ln k)` ranks, and children with overlapping
//! coverage of twice that width take over from there. Small nodes, nodes
//! whose measured error is too large, and nodes that would not shrink are
//! leaves, answered by binary search over their coverage.
//!
//! Nodes live in a flat arena; the children of a node are contiguous.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::instrument::OpContext;
use crate::keys::{search_window, Rank, SortedKeyArray};
use crate::pca::{build_pcf, ByteCursor, PcfModel};
use crate::RankIndex;

/// Nodes with at most this many keys are leaves.
pub const LEAF_SIZE: usize = 61;

const MAGIC: &[u8; 8] = b"SLRDA\0\0\0";
const VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum RdaNode {
    /// Binary search over global 1-based positions `start..=end`.
    Leaf { start: usize, end: usize },
    Internal {
        start: usize,
        end: usize,
        /// Half the width of the window the model pins the answer to.
        max_err: u32,
        /// Error measured when the model was built; `<= max_err`.
        eps: u32,
        model: PcfModel,
        first_child: u32,
        num_children: u32,
    },
}

impl RdaNode {
    pub fn coverage(&self) -> (usize, usize) {
        match *self {
            RdaNode::Leaf { start, end } | RdaNode::Internal { start, end, .. } => (start, end),
        }
    }
}

/// `ceil(2 sqrt(k) (1 + sqrt(0.5 ln ln k)) + 2)`.
pub fn coverage_width(k: usize) -> usize {
    let k = k as f64;
    (2.0 * k.sqrt() * (1.0 + (0.5 * k.ln().ln()).sqrt()) + 2.0).ceil() as usize
}

/// Pieces given to a node covering `k` keys.
pub fn node_pieces(k: usize, ratio: f64) -> usize {
    ((ratio * (k as f64).sqrt()).ceil() as usize).max(1)
}

/// Child `z` of a node that starts at `start`, covers `k` keys and uses
/// `stride`: global positions `start + z*stride ..= start - 1 + min((z+2)*stride, k)`.
pub fn child_range(start: usize, k: usize, stride: usize, z: usize) -> (usize, usize) {
    (start + z * stride, start - 1 + ((z + 2) * stride).min(k))
}

#[derive(Debug, Clone)]
pub struct RdaIndex {
    nodes: Vec<RdaNode>,
    array: Arc<SortedKeyArray>,
    ratio: f64,
}

pub fn rda_build(a: Arc<SortedKeyArray>, ratio: f64) -> Result<RdaIndex> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::InvalidConfig(format!("ratio must be at least 1, got {ratio}")));
    }
    let mut nodes = vec![RdaNode::Leaf { start: 1, end: 0 }];
    build_node(&a, ratio, 1, a.len(), 0, &mut nodes)?;
    Ok(RdaIndex {
        nodes,
        array: a,
        ratio,
    })
}

fn build_node(
    a: &SortedKeyArray,
    ratio: f64,
    start: usize,
    end: usize,
    slot: usize,
    nodes: &mut Vec<RdaNode>,
) -> Result<()> {
    let leaf = RdaNode::Leaf { start, end };
    let k = end + 1 - start;
    let keys = a.keys();
    if k <= LEAF_SIZE || keys[start - 1] == keys[end - 1] {
        nodes[slot] = leaf;
        return Ok(());
    }
    let (lo, hi) = (keys[start - 1], keys[end - 1]);
    let model = build_pcf(a, start, end, node_pieces(k, ratio), lo, hi)?;
    let width = coverage_width(k);
    let eps = model.max_err();
    let max_err = width.div_ceil(2);
    let stride = 2 * max_err;
    // 2 eps > k' is the demotion rule; a stride this wide would not shrink
    if 2 * eps as usize > width || 2 * stride >= k {
        nodes[slot] = leaf;
        return Ok(());
    }
    let num_children = k.div_ceil(stride);
    let first_child = nodes.len();
    nodes.resize(first_child + num_children, RdaNode::Leaf { start: 1, end: 0 });
    nodes[slot] = RdaNode::Internal {
        start,
        end,
        max_err: max_err as u32,
        eps,
        model,
        first_child: first_child as u32,
        num_children: num_children as u32,
    };
    for z in 0..num_children {
        let (s, e) = child_range(start, k, stride, z);
        build_node(a, ratio, s, e, first_child + z, nodes)?;
    }
    Ok(())
}

/// Child picked for a doubled estimate with error bound `max_err`:
/// `floor((est - max_err) / (2 max_err))` clamped to `[0, num_children - 1]`.
#[inline]
pub fn child_index(doubled_est: u32, max_err: u32, num_children: u32) -> u32 {
    let shifted = doubled_est as i64 - 2 * max_err as i64;
    if shifted < 0 {
        return 0;
    }
    ((shifted / (4 * max_err as i64)) as u32).min(num_children - 1)
}

impl RdaIndex {
    pub fn nodes(&self) -> &[RdaNode] {
        &self.nodes
    }

    pub fn root(&self) -> &RdaNode {
        &self.nodes[0]
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn array(&self) -> &Arc<SortedKeyArray> {
        &self.array
    }

    /// Children of node `id`, empty for leaves.
    pub fn children(&self, id: usize) -> std::ops::Range<usize> {
        match self.nodes[id] {
            RdaNode::Leaf { .. } => 0..0,
            RdaNode::Internal {
                first_child,
                num_children,
                ..
            } => first_child as usize..(first_child + num_children) as usize,
        }
    }

    /// Number of levels below the root on the longest path.
    pub fn height(&self) -> usize {
        fn walk(idx: &RdaIndex, id: usize) -> usize {
            idx.children(id).map(|c| 1 + walk(idx, c)).max().unwrap_or(0)
        }
        walk(self, 0)
    }

    pub fn query(&self, q: f64, ctx: &mut OpContext) -> Rank {
        let keys = self.array.keys();
        let mut id = 0;
        let mut depth = 0;
        loop {
            ctx.enter(depth);
            match &self.nodes[id] {
                &RdaNode::Leaf { start, end } => {
                    return Rank(start - 1 + search_window(keys, q, start, end, ctx));
                }
                RdaNode::Internal {
                    max_err,
                    model,
                    first_child,
                    num_children,
                    ..
                } => {
                    ctx.model_read();
                    let z = child_index(model.estimate_doubled(q), *max_err, *num_children);
                    id = (first_child + z) as usize;
                    depth += 1;
                }
            }
        }
    }

    /// Leaves store their two offsets; internal nodes their pieces plus
    /// `max_err` and their two offsets.
    pub fn size_ints(&self) -> u64 {
        self.nodes
            .iter()
            .map(|n| match n {
                RdaNode::Leaf { .. } => 2,
                RdaNode::Internal { model, .. } => model.piece_count() as u64 + 3,
            })
            .sum()
    }

    /// Versioned preorder node stream of little-endian 8-byte fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.array.len() as u64, self.ratio.to_bits(), self.nodes.len() as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        self.write_node(0, &mut out);
        out
    }

    fn write_node(&self, id: usize, out: &mut Vec<u8>) {
        let mut put = |v: u64| out.extend_from_slice(&v.to_le_bytes());
        match &self.nodes[id] {
            &RdaNode::Leaf { start, end } => {
                put(0);
                put(start as u64);
                put(end as u64);
            }
            RdaNode::Internal {
                start,
                end,
                max_err,
                eps,
                model,
                num_children,
                ..
            } => {
                put(1);
                put(*start as u64);
                put(*end as u64);
                put(*max_err as u64);
                put(*eps as u64);
                put(*num_children as u64);
                model.write_to(out);
                for c in self.children(id) {
                    self.write_node(c, out);
                }
            }
        }
    }

    /// Decodes an index serialized by [`RdaIndex::to_bytes`] for `array`.
    pub fn from_bytes(bytes: &[u8], array: Arc<SortedKeyArray>) -> Result<Self> {
        let Some((magic, rest)) = bytes.split_first_chunk::<8>() else {
            return Err(Error::CorruptIndex("missing header".into()));
        };
        if magic != MAGIC {
            return Err(Error::CorruptIndex("not an RDA index file".into()));
        }
        let mut cur = ByteCursor::new(rest);
        let version = cur.u64()?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let n = cur.u64()?;
        if n != array.len() as u64 {
            return Err(Error::CorruptIndex(format!(
                "index built for {n} keys, array has {}",
                array.len()
            )));
        }
        let ratio = cur.f64()?;
        let count = cur.u64()?;
        if count == 0 || count > bytes.len() as u64 {
            return Err(Error::CorruptIndex(format!("node count {count}")));
        }
        let mut nodes = vec![RdaNode::Leaf { start: 1, end: 0 }];
        read_node(&mut cur, 0, &mut nodes, (1, array.len()))?;
        if nodes.len() as u64 != count || !cur.is_empty() {
            return Err(Error::CorruptIndex("node stream does not match header".into()));
        }
        Ok(RdaIndex {
            nodes,
            array,
            ratio,
        })
    }
}

fn read_node(
    cur: &mut ByteCursor<'_>,
    slot: usize,
    nodes: &mut Vec<RdaNode>,
    expect: (usize, usize),
) -> Result<()> {
    let tag = cur.u64()?;
    let start = cur.u64()? as usize;
    let end = cur.u64()? as usize;
    if (start, end) != expect {
        return Err(Error::CorruptIndex(format!(
            "node covers [{start}, {end}], expected [{}, {}]",
            expect.0, expect.1
        )));
    }
    match tag {
        0 => nodes[slot] = RdaNode::Leaf { start, end },
        1 => {
            let max_err = cur.u64()? as usize;
            let eps = cur.u64()? as u32;
            let num_children = cur.u64()? as usize;
            let k = end + 1 - start;
            let stride = 2 * max_err;
            if max_err == 0 || 2 * stride >= k || num_children != k.div_ceil(stride) {
                return Err(Error::CorruptIndex(format!("bad internal node at [{start}, {end}]")));
            }
            let model = PcfModel::read_from(cur, k)?;
            let first_child = nodes.len();
            nodes.resize(first_child + num_children, RdaNode::Leaf { start: 1, end: 0 });
            nodes[slot] = RdaNode::Internal {
                start,
                end,
                max_err: max_err as u32,
                eps,
                model,
                first_child: first_child as u32,
                num_children: num_children as u32,
            };
            for z in 0..num_children {
                read_node(cur, first_child + z, nodes, child_range(start, k, stride, z))?;
            }
        }
        t => return Err(Error::CorruptIndex(format!("unknown node tag {t}"))),
    }
    Ok(())
}

impl RankIndex for RdaIndex {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank {
        self.query(q, ctx)
    }

    fn size_ints(&self) -> u64 {
        RdaIndex::size_ints(self)
    }

    fn len(&self) -> usize {
        self.array.len()
    }
}
