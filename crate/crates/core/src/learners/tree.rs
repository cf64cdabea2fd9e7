//! Exact-split regression tree growth on per-sample first/second-order
//! statistics.
//!
//! Both ensemble flavours use this grower. Boosting passes loss derivatives
//! with `lambda > 0`. The forest passes `g = -w·y`, `h = w`, `lambda = 0`:
//! the leaf value `-G/H` is then the weighted mean target and the gain equals
//! the weighted variance reduction (twice the weighted Gini decrease for 0/1
//! targets).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::rng::substream;

/// Relative gain below which a split is treated as no improvement.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub split: Option<Split>,
    /// Leaf output (also filled in for internal nodes).
    pub value: f64,
    /// Training samples reaching the node, counting bootstrap multiplicity.
    pub cover: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![TreeNode {
                split: None,
                value,
                cover,
            }],
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut n = 0;
        while let Some(s) = &self.nodes[n].split {
            n = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        n
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, n: usize) -> usize {
            match &t.nodes[n].split {
                None => 0,
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Breadth-first to a depth limit.
    LevelWise { max_depth: usize },
    /// Best-gain leaf first until the leaf budget is spent.
    LeafWise { max_leaves: usize, max_depth: Option<usize> },
}

/// Outcome of a single-column split search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    pub threshold: f64,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d <= f64::MIN_POSITIVE {
        0.0
    } else {
        g * g / d
    }
}

#[inline]
pub(crate) fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d <= f64::MIN_POSITIVE {
        0.0
    } else {
        -g / d
    }
}

/// Midpoint between two distinct consecutive values that still sends `lo`
/// left and `hi` right after rounding.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= hi {
        lo
    } else {
        m
    }
}

struct Totals {
    g: f64,
    h: f64,
    c: f64,
}

struct Best {
    threshold: f64,
    gain: f64,
    left_positions: usize,
}

/// Scans samples already sorted by the column value. `item(k)` yields
/// `(x, g, h, count)` for sorted position `k`.
fn scan_sorted(
    len: usize,
    item: impl Fn(usize) -> (f64, f64, f64, f64),
    totals: &Totals,
    min_leaf: f64,
    lambda: f64,
) -> Option<Best> {
    if len < 2 {
        return None;
    }
    let parent = score(totals.g, totals.h, lambda);
    let floor = GAIN_EPS * parent.abs().max(1.0);
    let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0.0);
    let mut best: Option<Best> = None;
    let mut cur = item(0);
    for k in 0..len - 1 {
        gl += cur.1;
        hl += cur.2;
        cl += cur.3;
        let next = item(k + 1);
        if next.0 > cur.0 && cl >= min_leaf && totals.c - cl >= min_leaf {
            let gain = score(gl, hl, lambda) + score(totals.g - gl, totals.h - hl, lambda) - parent;
            if gain > floor && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Best {
                    threshold: midpoint(cur.0, next.0),
                    gain,
                    left_positions: k + 1,
                });
            }
        }
        if totals.c - cl < min_leaf {
            break;
        }
        cur = next;
    }
    best
}

/// Best threshold on one column for the given samples:
/// `gain = G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)` over midpoints between
/// sorted distinct values. `None` when no split has positive gain.
pub fn best_split(
    values: &[f64],
    gradients: &[f64],
    hessians: &[f64],
    min_leaf_samples: usize,
    lambda: f64,
) -> Option<SplitDecision> {
    let n = values.len();
    assert!(gradients.len() == n && hessians.len() == n, "column/statistic length mismatch");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let totals = Totals {
        g: gradients.iter().sum(),
        h: hessians.iter().sum(),
        c: n as f64,
    };
    let best = scan_sorted(
        n,
        |k| {
            let i = order[k];
            (values[i], gradients[i], hessians[i], 1.0)
        },
        &totals,
        min_leaf_samples as f64,
        lambda,
    )?;
    Some(SplitDecision {
        threshold: best.threshold,
        gain: best.gain,
        left_count: best.left_positions,
        right_count: n - best.left_positions,
    })
}

/// Column-major copy of a matrix with every column's row order presorted.
pub(crate) struct Presorted {
    pub cols: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &FeatureMatrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.n_cols()).map(|j| x.column(j)).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..c.len() as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Presorted { cols, order }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }
}

pub(crate) struct GrowParams {
    pub growth: Growth,
    pub min_leaf_samples: usize,
    pub lambda: f64,
    /// Candidate columns in tie-break order.
    pub features: Vec<usize>,
    /// Forest-style per-node column subsample size.
    pub features_per_node: Option<usize>,
    pub seed: u64,
}

/// Per-row statistics; rows with `count == 0` are out of the tree.
pub(crate) struct RowStats<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub count: &'a [f64],
}

struct Pending {
    node: usize,
    lo: usize,
    hi: usize,
    depth: usize,
    best: Option<(usize, Best)>,
}

struct HeapEntry {
    gain: f64,
    node: usize,
    slot: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Max-heap on gain; earlier node wins ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then(other.node.cmp(&self.node))
    }
}

struct Grower<'a> {
    data: &'a Presorted,
    stats: &'a RowStats<'a>,
    params: &'a GrowParams,
    /// Per feature, row ids of the tree's samples; every node owns the same
    /// `[lo, hi)` range in all of them.
    buf: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn totals(&self, lo: usize, hi: usize) -> Totals {
        let ids = &self.buf[0][lo..hi];
        let mut t = Totals { g: 0.0, h: 0.0, c: 0.0 };
        for &i in ids {
            let i = i as usize;
            t.g += self.stats.grad[i];
            t.h += self.stats.hess[i];
            t.c += self.stats.count[i];
        }
        t
    }

    fn candidate_features(&self, node: usize) -> Vec<usize> {
        match self.params.features_per_node {
            Some(m) if m < self.params.features.len() => {
                let mut rng = substream(self.params.seed, node as u64);
                let mut picked: Vec<usize> = sample(&mut rng, self.params.features.len(), m)
                    .into_iter()
                    .map(|k| self.params.features[k])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => self.params.features.clone(),
        }
    }

    fn find_best(&self, node: usize, lo: usize, hi: usize, totals: &Totals) -> Option<(usize, Best)> {
        let min_leaf = self.params.min_leaf_samples as f64;
        if totals.c < 2.0 * min_leaf {
            return None;
        }
        let mut best: Option<(usize, Best)> = None;
        for f in self.candidate_features(node) {
            let ids = &self.buf[f][lo..hi];
            let col = &self.data.cols[f];
            let s = self.stats;
            let found = scan_sorted(
                ids.len(),
                |k| {
                    let i = ids[k] as usize;
                    (col[i], s.grad[i], s.hess[i], s.count[i])
                },
                totals,
                min_leaf,
                self.params.lambda,
            );
            if let Some(b) = found {
                if best.as_ref().is_none_or(|(_, cur)| b.gain > cur.gain) {
                    best = Some((f, b));
                }
            }
        }
        best
    }

    fn new_node(&mut self, lo: usize, hi: usize, depth: usize) -> Pending {
        let t = self.totals(lo, hi);
        let node = self.nodes.len();
        self.nodes.push(TreeNode {
            split: None,
            value: leaf_value(t.g, t.h, self.params.lambda),
            cover: t.c,
        });
        let depth_ok = match self.params.growth {
            Growth::LevelWise { max_depth } => depth < max_depth,
            Growth::LeafWise { max_depth, .. } => max_depth.is_none_or(|d| depth < d),
        };
        let best = if depth_ok { self.find_best(node, lo, hi, &t) } else { None };
        Pending {
            node,
            lo,
            hi,
            depth,
            best,
        }
    }

    /// Applies the pending split and returns the two children.
    fn split(&mut self, p: Pending) -> (Pending, Pending) {
        let (feature, best) = p.best.expect("split requires a candidate");
        let col = &self.data.cols[feature];
        for &i in &self.buf[feature][p.lo..p.hi] {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let n_left = best.left_positions;
        for f in 0..self.buf.len() {
            let seg = &mut self.buf[f][p.lo..p.hi];
            self.scratch.clear();
            let mut w = 0;
            for k in 0..seg.len() {
                let i = seg[k];
                if self.goes_left[i as usize] {
                    seg[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            debug_assert_eq!(w, n_left);
            seg[w..].copy_from_slice(&self.scratch);
        }
        let mid = p.lo + n_left;
        let left = self.new_node(p.lo, mid, p.depth + 1);
        let right = self.new_node(mid, p.hi, p.depth + 1);
        self.nodes[p.node].split = Some(Split {
            feature,
            threshold: best.threshold,
            left: left.node,
            right: right.node,
            gain: best.gain,
        });
        (left, right)
    }
}

/// Grows one tree over the rows with non-zero `count`.
pub(crate) fn grow_tree(data: &Presorted, stats: &RowStats<'_>, params: &GrowParams) -> Tree {
    let n = data.n_rows();
    let n_feat = data.cols.len();
    let buf: Vec<Vec<u32>> = (0..n_feat)
        .map(|f| {
            data.order[f]
                .iter()
                .copied()
                .filter(|&i| stats.count[i as usize] > 0.0)
                .collect()
        })
        .collect();
    let len = buf.first().map_or(0, Vec::len);
    let mut g = Grower {
        data,
        stats,
        params,
        buf,
        scratch: Vec::with_capacity(len),
        goes_left: vec![false; n],
        nodes: Vec::new(),
    };
    if n_feat == 0 || len == 0 {
        let t = Totals { g: 0.0, h: 0.0, c: 0.0 };
        return Tree::leaf(leaf_value(t.g, t.h, params.lambda), 0.0);
    }
    let root = g.new_node(0, len, 0);
    match params.growth {
        Growth::LevelWise { .. } => {
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(p) = queue.pop_front() {
                if p.best.is_some() {
                    let (l, r) = g.split(p);
                    queue.push_back(l);
                    queue.push_back(r);
                }
            }
        }
        Growth::LeafWise { max_leaves, .. } => {
            let mut slots: Vec<Option<Pending>> = Vec::new();
            let mut heap = BinaryHeap::new();
            let push = |p: Pending, slots: &mut Vec<Option<Pending>>, heap: &mut BinaryHeap<HeapEntry>| {
                if let Some((_, b)) = &p.best {
                    heap.push(HeapEntry {
                        gain: b.gain,
                        node: p.node,
                        slot: slots.len(),
                    });
                    slots.push(Some(p));
                }
            };
            push(root, &mut slots, &mut heap);
            let mut leaves = 1;
            while leaves < max_leaves {
                let Some(top) = heap.pop() else { break };
                let p = slots[top.slot].take().expect("pending node");
                let (l, r) = g.split(p);
                leaves += 1;
                push(l, &mut slots, &mut heap);
                push(r, &mut slots, &mut heap);
            }
        }
    }
    Tree { nodes: g.nodes }
}
