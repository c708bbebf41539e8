//! Random forest of Gini-split classification trees.
//!
//! Split search runs over per-feature bins. A feature with at most
//! `max_bins` distinct training values gets one bin per value, so splits are
//! exact midpoints; otherwise bin edges are training quantiles. Features are
//! drawn without replacement at each node and the search continues past
//! `mtry` features until a valid split is found, if one exists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::seed::mix;

/// Rows used to pick quantile edges when a feature has many distinct values.
const EDGE_SAMPLE_ROWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: u8,
    },
    Split {
        feature: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f32]) -> u8 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if row[feature as usize] < threshold {
                        left
                    } else {
                        right
                    } as usize
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, left as usize).max(go(t, right as usize))
                }
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

/// Training matrix reduced to per-feature bin indices, column-major.
struct Binned {
    n: usize,
    bins: Vec<u8>,
    edges: Vec<Vec<f32>>,
}

fn feature_edges(mut values: Vec<f32>, max_bins: usize) -> Vec<f32> {
    values.sort_by(f32::total_cmp);
    values.dedup();
    let midpoint = |a: f32, b: f32| {
        let m = a + (b - a) / 2.0;
        if m > a {
            m
        } else {
            b
        }
    };
    if values.len() <= max_bins {
        values.windows(2).map(|w| midpoint(w[0], w[1])).collect()
    } else {
        let mut edges: Vec<f32> = (1..max_bins)
            .map(|q| {
                let i = q * values.len() / max_bins;
                midpoint(values[i - 1], values[i])
            })
            .collect();
        edges.dedup();
        edges
    }
}

fn bin_of(edges: &[f32], x: f32) -> u8 {
    edges.partition_point(|&e| e <= x) as u8
}

impl Binned {
    fn new(m: &FeatureMatrix, max_bins: usize) -> Self {
        let n = m.n_rows();
        let f = m.n_cols();
        let stride = n.div_ceil(EDGE_SAMPLE_ROWS).max(1);
        let edges: Vec<Vec<f32>> = (0..f)
            .into_par_iter()
            .map(|c| {
                let sample = (0..n).step_by(stride).map(|r| m.value(r, c)).collect();
                feature_edges(sample, max_bins)
            })
            .collect();
        let cols: Vec<Vec<u8>> = (0..f)
            .into_par_iter()
            .map(|c| (0..n).map(|r| bin_of(&edges[c], m.value(r, c))).collect())
            .collect();
        Self {
            n,
            bins: cols.concat(),
            edges,
        }
    }

    fn bin(&self, feature: usize, row: u32) -> usize {
        self.bins[feature * self.n + row as usize] as usize
    }
}

struct Grower<'a> {
    data: &'a Binned,
    y: &'a [u8],
    mtry: usize,
    params: ForestParams,
}

fn gini_score(c0: u64, c1: u64) -> f64 {
    // Sum of squared class counts over the node size; larger is purer.
    let n = c0 + c1;
    if n == 0 {
        0.0
    } else {
        (c0 * c0 + c1 * c1) as f64 / n as f64
    }
}

impl Grower<'_> {
    fn grow(&self, rng: &mut ChaCha8Rng) -> Tree {
        let n = self.data.n;
        let mut idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let n_feat = self.data.edges.len();
        let mut order: Vec<u32> = (0..n_feat as u32).collect();
        let mut nodes = vec![Node::Leaf { class: 0 }];
        // (node slot, range in idx, depth)
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        let mut hist = vec![[0u64; 2]; 256];
        while let Some((slot, lo, hi, depth)) = stack.pop() {
            let part = &mut idx[lo..hi];
            let c1 = part.iter().filter(|&&i| self.y[i as usize] == 1).count() as u64;
            let c0 = part.len() as u64 - c1;
            let class = u8::from(c1 > c0);
            let leaf_only = c0 == 0
                || c1 == 0
                || self.params.max_depth.is_some_and(|d| depth >= d)
                || part.len() < 2 * self.params.min_samples_leaf;
            if leaf_only {
                nodes[slot] = Node::Leaf { class };
                continue;
            }
            let min_leaf = self.params.min_samples_leaf as u64;
            let mut best: Option<(f64, usize, usize)> = None;
            let mut inspected = 0;
            for k in 0..n_feat {
                let j = rng.random_range(k..n_feat);
                order.swap(k, j);
                let f = order[k] as usize;
                let nb = self.data.edges[f].len() + 1;
                hist[..nb].fill([0, 0]);
                for &i in part.iter() {
                    hist[self.data.bin(f, i)][self.y[i as usize] as usize] += 1;
                }
                let (mut l0, mut l1) = (0u64, 0u64);
                for (b, h) in hist[..nb - 1].iter().enumerate() {
                    l0 += h[0];
                    l1 += h[1];
                    let (r0, r1) = (c0 - l0, c1 - l1);
                    if l0 + l1 < min_leaf || r0 + r1 < min_leaf {
                        continue;
                    }
                    let score = gini_score(l0, l1) + gini_score(r0, r1);
                    if best.is_none_or(|(s, _, _)| score > s + 1e-9) {
                        best = Some((score, f, b));
                    }
                }
                inspected += 1;
                if inspected >= self.mtry && best.is_some() {
                    break;
                }
            }
            let Some((_, f, b)) = best else {
                nodes[slot] = Node::Leaf { class };
                continue;
            };
            // In-place partition: bin <= b goes left.
            let mut split = 0;
            for k in 0..part.len() {
                if self.data.bin(f, part[k]) <= b {
                    part.swap(k, split);
                    split += 1;
                }
            }
            let left = nodes.len();
            nodes.push(Node::Leaf { class: 0 });
            nodes.push(Node::Leaf { class: 0 });
            nodes[slot] = Node::Split {
                feature: f as u32,
                threshold: self.data.edges[f][b],
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, lo + split, hi, depth + 1));
            stack.push((left, lo, lo + split, depth + 1));
        }
        Tree { nodes }
    }
}

impl Forest {
    /// Fits on `train` with labels `train.labels`; both classes must be present.
    pub fn fit(train: &FeatureMatrix, params: ForestParams) -> Forest {
        let data = Binned::new(train, params.max_bins.clamp(2, 256));
        let mtry = ((train.n_cols() as f64).sqrt().floor() as usize).max(1);
        let grower = Grower {
            data: &data,
            y: &train.labels,
            mtry,
            params,
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[params.seed, 7, t as u64]));
                grower.grow(&mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Number of trees voting for class 1 on each row.
    pub fn votes(&self, m: &FeatureMatrix) -> Vec<u32> {
        (0..m.n_rows())
            .into_par_iter()
            .map(|r| {
                let row = m.row(r);
                self.trees
                    .iter()
                    .map(|t| u32::from(t.predict_row(row)))
                    .sum()
            })
            .collect()
    }

    /// Strict-majority vote; ties go to class 0.
    pub fn predict(&self, m: &FeatureMatrix) -> Vec<u8> {
        let n = self.trees.len() as u32;
        self.votes(m)
            .into_iter()
            .map(|v| u8::from(2 * v > n))
            .collect()
    }
}
