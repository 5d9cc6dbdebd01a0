//! A single randomized decision tree: greedy impurity-driven growth over
//! a bootstrap sample, with a per-node random column subset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forest::DataMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        counts: Vec<u32>,
    },
    Split {
        column: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

pub struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub n_classes: usize,
}

fn gini(counts: &[u32], total: usize) -> f64 {
    let t = total as f64;
    let mut acc = 1.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / t;
            acc -= p * p;
        }
    }
    acc
}

fn class_counts(labels: &[usize], rows: &[u32], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &r in rows {
        counts[labels[r as usize]] += 1;
    }
    counts
}

struct Builder<'a> {
    matrix: &'a DataMatrix,
    labels: &'a [usize],
    params: &'a GrowParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// raw impurity-decrease mass per column, weighted by node size
    importance: Vec<f64>,
    n_total: usize,
}

struct BestSplit {
    column: usize,
    threshold: f64,
    decrease: f64,
}

impl Builder<'_> {
    /// Weighted best threshold over a random subset of columns; `None`
    /// when every candidate column is constant on this node.
    fn best_split(&mut self, rows: &[u32], counts: &[u32], node_gini: f64) -> Option<BestSplit> {
        let dim = self.matrix.n_cols();
        let m = self.params.features_per_split.min(dim);
        let candidates = rand::seq::index::sample(&mut self.rng, dim, m);

        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for col in candidates {
            sorted.clear();
            sorted.extend(
                rows.iter()
                    .map(|&r| (self.matrix.get(r as usize, col), self.labels[r as usize])),
            );
            sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue; // column constant on this node
            }
            let mut left_counts = vec![0u32; self.params.n_classes];
            for i in 0..n - 1 {
                left_counts[sorted[i].1] += 1;
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.params.min_leaf || n_right < self.params.min_leaf {
                    continue;
                }
                let mut right_counts = counts.to_vec();
                for (rc, lc) in right_counts.iter_mut().zip(&left_counts) {
                    *rc -= lc;
                }
                let decrease = node_gini
                    - (n_left as f64 / n as f64) * gini(&left_counts, n_left)
                    - (n_right as f64 / n as f64) * gini(&right_counts, n_right);
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    best = Some(BestSplit {
                        column: col,
                        threshold: (sorted[i].0 + sorted[i + 1].0) / 2.0,
                        decrease,
                    });
                }
            }
        }
        best.filter(|b| b.decrease > 1e-12)
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> u32 {
        let counts = class_counts(self.labels, &rows, self.params.n_classes);
        let node_gini = gini(&counts, rows.len());
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let splittable =
            rows.len() >= 2 * self.params.min_leaf && node_gini > 0.0 && !depth_capped;

        let split = if splittable {
            self.best_split(&rows, &counts, node_gini)
        } else {
            None
        };

        let Some(split) = split else {
            let idx = self.nodes.len() as u32;
            self.nodes.push(Node::Leaf { counts });
            return idx;
        };

        self.importance[split.column] +=
            (rows.len() as f64 / self.n_total as f64) * split.decrease;

        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .into_iter()
            .partition(|&r| self.matrix.get(r as usize, split.column) <= split.threshold);

        let idx = self.nodes.len() as u32;
        self.nodes.push(Node::Split {
            column: split.column as u32,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        let Node::Split { left: l, right: r, .. } = &mut self.nodes[idx as usize] else {
            unreachable!()
        };
        *l = left;
        *r = right;
        idx
    }
}

pub struct GrownTree {
    pub tree: Tree,
    /// per-column raw impurity decrease, not yet normalized
    pub importance: Vec<f64>,
    /// which rows the bootstrap drew (for out-of-bag checks)
    pub inbag: Vec<bool>,
}

/// Grow one tree on a bootstrap sample drawn with the given seed.
pub fn grow_tree(
    matrix: &DataMatrix,
    labels: &[usize],
    params: &GrowParams,
    seed: u64,
) -> GrownTree {
    let n = matrix.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inbag = vec![false; n];
    let rows: Vec<u32> = (0..n)
        .map(|_| {
            let r = rng.gen_range(0..n);
            inbag[r] = true;
            r as u32
        })
        .collect();

    let mut builder = Builder {
        matrix,
        labels,
        params,
        rng,
        nodes: Vec::new(),
        importance: vec![0.0; matrix.n_cols()],
        n_total: n,
    };
    builder.grow(rows, 0);
    GrownTree {
        tree: Tree { nodes: builder.nodes },
        importance: builder.importance,
        inbag,
    }
}

impl Tree {
    /// Leaf class-count vector for one feature row.
    pub fn leaf_counts(&self, row: impl Fn(usize) -> f64) -> &[u32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { column, threshold, left, right } => {
                    at = if row(*column as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Add this tree's normalized leaf distribution for `row` into `acc`.
    pub fn accumulate_distribution(&self, row: impl Fn(usize) -> f64, acc: &mut [f64]) {
        let counts = self.leaf_counts(row);
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return;
        }
        for (a, &c) in acc.iter_mut().zip(counts) {
            *a += c as f64 / total as f64;
        }
    }

    /// Pre-order binary encoding (little-endian), prefixed by node count.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.nodes.len() as u32).to_le_bytes());
        self.encode_node(0, out);
    }

    fn encode_node(&self, at: usize, out: &mut Vec<u8>) {
        match &self.nodes[at] {
            Node::Leaf { counts } => {
                out.push(0);
                for &c in counts {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            Node::Split { column, threshold, left, right } => {
                out.push(1);
                out.extend_from_slice(&column.to_le_bytes());
                out.extend_from_slice(&threshold.to_le_bytes());
                self.encode_node(*left as usize, out);
                self.encode_node(*right as usize, out);
            }
        }
    }

    /// Decode a tree written by `encode_into`. Returns the tree and the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8], n_classes: usize) -> Result<(Tree, usize), String> {
        let mut pos = 0usize;
        let node_count = read_u32(bytes, &mut pos)? as usize;
        let mut nodes = Vec::with_capacity(node_count);
        decode_node(bytes, &mut pos, n_classes, &mut nodes)?;
        if nodes.len() != node_count {
            return Err(format!(
                "tree node count mismatch: header {node_count}, decoded {}",
                nodes.len()
            ));
        }
        Ok((Tree { nodes }, pos))
    }
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32, String> {
    let end = *pos + 4;
    let chunk = bytes.get(*pos..end).ok_or("truncated tree data")?;
    *pos = end;
    Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
}

fn decode_node(
    bytes: &[u8],
    pos: &mut usize,
    n_classes: usize,
    nodes: &mut Vec<Node>,
) -> Result<u32, String> {
    let tag = *bytes.get(*pos).ok_or("truncated tree data")?;
    *pos += 1;
    match tag {
        0 => {
            let mut counts = Vec::with_capacity(n_classes);
            for _ in 0..n_classes {
                counts.push(read_u32(bytes, pos)?);
            }
            let idx = nodes.len() as u32;
            nodes.push(Node::Leaf { counts });
            Ok(idx)
        }
        1 => {
            let column = read_u32(bytes, pos)?;
            let end = *pos + 8;
            let chunk = bytes.get(*pos..end).ok_or("truncated tree data")?;
            *pos = end;
            let threshold = f64::from_le_bytes(chunk.try_into().unwrap());
            let idx = nodes.len() as u32;
            nodes.push(Node::Split { column, threshold, left: 0, right: 0 });
            let left = decode_node(bytes, pos, n_classes, nodes)?;
            let right = decode_node(bytes, pos, n_classes, nodes)?;
            let Node::Split { left: l, right: r, .. } = &mut nodes[idx as usize] else {
                unreachable!()
            };
            *l = left;
            *r = right;
            Ok(idx)
        }
        other => Err(format!("unknown tree node tag {other}")),
    }
}
