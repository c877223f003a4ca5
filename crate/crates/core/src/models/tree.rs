use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{check_width, Classifier};
use crate::numkit::{sigmoid, DenseMatrix, Scalar};
use crate::Real;

/// Order in which tree nodes are considered for splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Breadth-first: every node of the current depth is examined before
    /// any child, until the leaf budget runs out.
    LevelWise,
    /// Best-first: the pending node with the highest split gain is always
    /// expanded next.
    LeafWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<S: Scalar> {
    Split {
        feature: usize,
        threshold: S,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: S,
    },
}

/// One regression tree over node indices into a flat arena; node 0 is the
/// root. Rows route left when `row[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<S: Scalar> {
    pub nodes: Vec<TreeNode<S>>,
}

impl<S: Scalar> Tree<S> {
    pub fn leaf_value(&self, row: &[S]) -> S {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Boosted ensemble of second-order regression trees on logistic loss.
/// Probability is `sigmoid(base_score + sum of shrinkage * tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble<S: Scalar> {
    pub trees: Vec<Tree<S>>,
    pub shrinkage: S,
    pub lambda_reg: S,
    pub base_score: S,
    pub growth: Growth,
    pub n_features: usize,
}

impl<S: Scalar> TreeEnsemble<S> {
    fn margin(&self, row: &[S]) -> S {
        let mut total = self.base_score;
        for tree in &self.trees {
            total += self.shrinkage * tree.leaf_value(row);
        }
        total
    }
}

impl<S: Scalar> Classifier<S> for TreeEnsemble<S> {
    fn family(&self) -> &'static str {
        match self.growth {
            Growth::LevelWise => "boosted_level_wise",
            Growth::LeafWise => "boosted_leaf_wise",
        }
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        check_width(self.family(), self.n_features, x)?;
        Ok((0..x.rows())
            .map(|r| sigmoid(self.margin(x.row(r))))
            .collect())
    }
}

/// Training knobs for both boosted variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_leaves: usize,
    pub lambda_reg: f64,
    pub shrinkage: f64,
    pub growth: Growth,
    /// Bin count for histogram split finding; `None` scans exact sorted
    /// values. Only coarsens candidate thresholds, not the statistics.
    pub histogram_bins: Option<usize>,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 50,
            max_leaves: 31,
            lambda_reg: 1.0,
            shrinkage: 0.1,
            growth: Growth::LevelWise,
            histogram_bins: None,
        }
    }
}

impl GbtConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".to_owned()));
        }
        if self.max_leaves < 2 {
            return Err(Error::Config(format!(
                "max_leaves must be at least 2, got {}",
                self.max_leaves
            )));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_reg must be non-negative, got {}",
                self.lambda_reg
            )));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return Err(Error::Config(format!(
                "shrinkage must be positive, got {}",
                self.shrinkage
            )));
        }
        if let Some(bins) = self.histogram_bins {
            if bins < 2 {
                return Err(Error::Config(format!(
                    "histogram_bins must be at least 2, got {bins}"
                )));
            }
        }
        Ok(())
    }
}

/// A committed split decision for one node.
struct SplitChoice<S: Scalar> {
    gain: S,
    feature: usize,
    threshold: S,
    left_rows: Vec<usize>,
    right_rows: Vec<usize>,
}

/// Second-order statistics of the logistic loss at the current margins.
struct GradPair<S: Scalar> {
    g: Vec<S>,
    h: Vec<S>,
}

impl<S: Scalar> GradPair<S> {
    fn at_margins(margins: &[S], labels: &[u8]) -> Self {
        let mut g = Vec::with_capacity(margins.len());
        let mut h = Vec::with_capacity(margins.len());
        for (&m, &y) in margins.iter().zip(labels) {
            let p = sigmoid(m);
            g.push(p - S::from_f64_lossy(y as f64));
            h.push(p * (S::one() - p));
        }
        GradPair { g, h }
    }

    fn sums(&self, rows: &[usize]) -> (S, S) {
        rows.iter().fold((S::zero(), S::zero()), |(g, h), &i| {
            (g + self.g[i], h + self.h[i])
        })
    }
}

fn leaf_weight<S: Scalar>(g: S, h: S, lambda: S) -> S {
    -g / (h + lambda)
}

/// Standard second-order split gain against keeping the node whole.
fn split_gain<S: Scalar>(gl: S, hl: S, gr: S, hr: S, lambda: S) -> S {
    let half = S::from_f64_lossy(0.5);
    half * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
}

/// Best split of `rows`, or `None` when no candidate has positive gain.
/// Features are scanned in index order and thresholds ascending, and only
/// strictly better gains replace the incumbent, so the choice is
/// deterministic.
fn best_split<S: Scalar>(
    x: &DenseMatrix<S>,
    rows: &[usize],
    stats: &GradPair<S>,
    lambda: S,
    histogram_bins: Option<usize>,
) -> Option<SplitChoice<S>> {
    if rows.len() < 2 {
        return None;
    }
    let (g_total, h_total) = stats.sums(rows);
    let mut best: Option<(S, usize, S)> = None;

    for feature in 0..x.cols() {
        match histogram_bins {
            None => {
                let mut ordered: Vec<(S, S, S)> = rows
                    .iter()
                    .map(|&i| (x.get(i, feature), stats.g[i], stats.h[i]))
                    .collect();
                ordered.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature"));
                let mut gl = S::zero();
                let mut hl = S::zero();
                for w in 0..ordered.len() - 1 {
                    gl += ordered[w].1;
                    hl += ordered[w].2;
                    if ordered[w].0 == ordered[w + 1].0 {
                        continue;
                    }
                    let threshold =
                        (ordered[w].0 + ordered[w + 1].0) * S::from_f64_lossy(0.5);
                    let gain = split_gain(gl, hl, g_total - gl, h_total - hl, lambda);
                    if gain > S::zero() && best.map_or(true, |(incumbent, _, _)| gain > incumbent)
                    {
                        best = Some((gain, feature, threshold));
                    }
                }
            }
            Some(bins) => {
                // Encoded features live in [0,1]; value v falls in bin
                // floor(v*bins), with v = 1 clamped into the last bin.
                let mut g_bin = vec![S::zero(); bins];
                let mut h_bin = vec![S::zero(); bins];
                let mut n_bin = vec![0usize; bins];
                for &i in rows {
                    let v = x.get(i, feature).to_f64_lossy();
                    let b = ((v * bins as f64) as usize).min(bins - 1);
                    g_bin[b] += stats.g[i];
                    h_bin[b] += stats.h[i];
                    n_bin[b] += 1;
                }
                let mut gl = S::zero();
                let mut hl = S::zero();
                let mut nl = 0usize;
                for b in 0..bins - 1 {
                    gl += g_bin[b];
                    hl += h_bin[b];
                    nl += n_bin[b];
                    if nl == 0 || nl == rows.len() {
                        continue;
                    }
                    let threshold = S::from_f64_lossy((b + 1) as f64 / bins as f64);
                    let gain = split_gain(gl, hl, g_total - gl, h_total - hl, lambda);
                    if gain > S::zero() && best.map_or(true, |(incumbent, _, _)| gain > incumbent)
                    {
                        best = Some((gain, feature, threshold));
                    }
                }
            }
        }
    }

    best.map(|(gain, feature, threshold)| {
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .copied()
            .partition(|&i| x.get(i, feature) <= threshold);
        SplitChoice {
            gain,
            feature,
            threshold,
            left_rows,
            right_rows,
        }
    })
}

/// Grows one tree on the given statistics under the leaf budget.
fn grow_tree<S: Scalar>(
    x: &DenseMatrix<S>,
    rows: Vec<usize>,
    stats: &GradPair<S>,
    cfg: &GbtConfig,
) -> Tree<S> {
    let lambda = S::from_f64_lossy(cfg.lambda_reg);
    let mut nodes: Vec<TreeNode<S>> = Vec::new();
    let make_leaf = |nodes: &mut Vec<TreeNode<S>>, idx: usize, rows: &[usize]| {
        let (g, h) = stats.sums(rows);
        nodes[idx] = TreeNode::Leaf {
            weight: leaf_weight(g, h, lambda),
        };
    };

    nodes.push(TreeNode::Leaf { weight: S::zero() });
    let mut leaves = 1usize;

    match cfg.growth {
        Growth::LevelWise => {
            let mut queue: VecDeque<(usize, Vec<usize>)> = VecDeque::new();
            queue.push_back((0, rows));
            while let Some((idx, node_rows)) = queue.pop_front() {
                let choice = if leaves < cfg.max_leaves {
                    best_split(x, &node_rows, stats, lambda, cfg.histogram_bins)
                } else {
                    None
                };
                match choice {
                    Some(split) => {
                        let left = nodes.len();
                        nodes.push(TreeNode::Leaf { weight: S::zero() });
                        let right = nodes.len();
                        nodes.push(TreeNode::Leaf { weight: S::zero() });
                        nodes[idx] = TreeNode::Split {
                            feature: split.feature,
                            threshold: split.threshold,
                            left,
                            right,
                        };
                        leaves += 1;
                        queue.push_back((left, split.left_rows));
                        queue.push_back((right, split.right_rows));
                    }
                    None => make_leaf(&mut nodes, idx, &node_rows),
                }
            }
        }
        Growth::LeafWise => {
            // Candidates ordered by gain; insertion order breaks ties so
            // repeated runs expand identically.
            let mut candidates: Vec<(usize, SplitChoice<S>)> = Vec::new();
            let consider = |candidates: &mut Vec<(usize, SplitChoice<S>)>,
                                nodes: &mut Vec<TreeNode<S>>,
                                idx: usize,
                                node_rows: Vec<usize>| {
                match best_split(x, &node_rows, stats, lambda, cfg.histogram_bins) {
                    Some(split) => candidates.push((idx, split)),
                    None => make_leaf(nodes, idx, &node_rows),
                }
            };
            consider(&mut candidates, &mut nodes, 0, rows);
            while leaves < cfg.max_leaves && !candidates.is_empty() {
                let best_at = candidates
                    .iter()
                    .enumerate()
                    .max_by(|(ai, (_, a)), (bi, (_, b))| {
                        a.gain
                            .partial_cmp(&b.gain)
                            .expect("finite gain")
                            .then(bi.cmp(ai))
                    })
                    .map(|(i, _)| i)
                    .expect("non-empty candidates");
                let (idx, split) = candidates.swap_remove(best_at);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { weight: S::zero() });
                let right = nodes.len();
                nodes.push(TreeNode::Leaf { weight: S::zero() });
                nodes[idx] = TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                leaves += 1;
                consider(&mut candidates, &mut nodes, left, split.left_rows);
                consider(&mut candidates, &mut nodes, right, split.right_rows);
            }
            for (idx, split) in candidates {
                let mut all_rows = split.left_rows;
                all_rows.extend(split.right_rows);
                make_leaf(&mut nodes, idx, &all_rows);
            }
        }
    }

    Tree { nodes }
}

/// Boosts `cfg.n_trees` trees on the dataset's train split.
pub fn train_gbt(dataset: &Dataset, cfg: &GbtConfig) -> Result<TreeEnsemble<Real>> {
    cfg.validate()?;
    let (x, y) = dataset.train_xy();
    if x.rows() == 0 {
        return Err(Error::Training("empty train split".to_owned()));
    }

    let mut ensemble = TreeEnsemble {
        trees: Vec::with_capacity(cfg.n_trees),
        shrinkage: cfg.shrinkage,
        lambda_reg: cfg.lambda_reg,
        base_score: 0.0,
        growth: cfg.growth,
        n_features: x.cols(),
    };

    let mut margins = vec![ensemble.base_score; x.rows()];
    for _ in 0..cfg.n_trees {
        let stats = GradPair::at_margins(&margins, &y);
        let tree = grow_tree(&x, (0..x.rows()).collect(), &stats, cfg);
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += cfg.shrinkage * tree.leaf_value(x.row(i));
        }
        ensemble.trees.push(tree);
    }
    Ok(ensemble)
}
