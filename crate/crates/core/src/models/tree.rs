//! Binary recursive partitioning on Gini impurity.
//!
//! The grower is shared by CART and the random forest. CART additionally
//! prunes with weakest-link cost complexity on misclassification risk
//! relative to the root, so a split survives only when it lowers the
//! relative error by more than `cp` per extra leaf.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{wrap, FittedModel, ImportanceRanking, Model, ModelSpec};
use crate::error::Result;
use crate::preprocess::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Weighted Gini decrease: n·G(node) − n_L·G(left) − n_R·G(right).
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Training rows reaching the node: (Stayed, Left).
    pub counts: [u32; 2],
    pub depth: u32,
    pub split: Option<SplitRule>,
}

impl TreeNode {
    pub fn score(&self) -> f64 {
        let n = self.counts[0] + self.counts[1];
        if n == 0 {
            0.5
        } else {
            self.counts[1] as f64 / n as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub feature_names: Vec<String>,
    /// Node 0 is the root. Pruned subtrees stay in the vector but are
    /// unreachable.
    pub nodes: Vec<TreeNode>,
}

#[derive(Clone, Copy, Debug)]
pub struct GrowParams {
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Candidate features per node; `None` means all.
    pub max_features: Option<usize>,
}

impl DecisionTree {
    /// Leaf reached by a row whose values are supplied by `value(feature)`.
    pub fn leaf_with(&self, value: impl Fn(usize) -> f64) -> &TreeNode {
        let mut node = &self.nodes[0];
        while let Some(s) = &node.split {
            node = if value(s.feature) <= s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node
    }

    pub fn leaf(&self, row: &[f64]) -> &TreeNode {
        self.leaf_with(|f| row[f])
    }

    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        (0..table.n_rows()).map(|i| self.leaf(table.row(i)).score()).collect()
    }

    /// Indices of nodes reachable from the root.
    pub fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some(s) = &self.nodes[i].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.reachable()
            .into_iter()
            .filter(|&i| self.nodes[i].split.is_none())
            .count()
    }

    pub fn depth(&self) -> u32 {
        self.reachable().into_iter().map(|i| self.nodes[i].depth).max().unwrap_or(0)
    }

    /// Sum of split gains per feature over reachable splits.
    pub fn gain_by_feature(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.feature_names.len()];
        for i in self.reachable() {
            if let Some(s) = &self.nodes[i].split {
                g[s.feature] += s.gain;
            }
        }
        g
    }

    /// Indented text rendering of the reachable tree.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, "root", &mut out);
        out
    }

    fn dump_node(&self, i: usize, condition: &str, out: &mut String) {
        let node = &self.nodes[i];
        let indent = "  ".repeat(node.depth as usize);
        let label = if node.score() >= 0.5 { "Left" } else { "Stayed" };
        out.push_str(&format!(
            "{indent}{condition}: n={} Stayed={} Left={} -> {label} ({:.3}){}\n",
            node.counts[0] + node.counts[1],
            node.counts[0],
            node.counts[1],
            node.score(),
            if node.split.is_none() { " *" } else { "" }
        ));
        if let Some(s) = &node.split {
            let name = &self.feature_names[s.feature];
            self.dump_node(s.left, &format!("{name} <= {}", s.threshold), out);
            self.dump_node(s.right, &format!("{name} > {}", s.threshold), out);
        }
    }
}

fn sum_sq_over_n(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        0.0
    } else {
        (c[0] as f64).powi(2) / n + (c[1] as f64).powi(2) / n
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Best split of `rows` on feature `f`; ties keep the lowest threshold.
fn best_split_on(
    table: &FeatureTable,
    rows: &[u32],
    f: usize,
    counts: [u32; 2],
    min_leaf: usize,
    scratch: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(rows.iter().map(|&r| {
        let r = r as usize;
        (table.value(r, f), table.labels()[r].code())
    }));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    let parent = sum_sq_over_n(counts);
    let mut left = [0u32; 2];
    let mut best: Option<Candidate> = None;
    for k in 0..n - 1 {
        left[scratch[k].1 as usize] += 1;
        let (v, next) = (scratch[k].0, scratch[k + 1].0);
        if v == next || k + 1 < min_leaf || n - k - 1 < min_leaf {
            continue;
        }
        let right = [counts[0] - left[0], counts[1] - left[1]];
        let gain = sum_sq_over_n(left) + sum_sq_over_n(right) - parent;
        if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
            best = Some(Candidate {
                feature: f,
                threshold: v + (next - v) / 2.0,
                gain,
            });
        }
    }
    best
}

/// Grow a tree on `rows` (duplicates allowed, as in a bootstrap sample).
pub fn grow<R: Rng>(
    table: &FeatureTable,
    rows: Vec<u32>,
    params: &GrowParams,
    rng: &mut R,
) -> DecisionTree {
    let d = table.n_cols();
    let count = |rows: &[u32]| {
        let mut c = [0u32; 2];
        for &r in rows {
            c[table.labels()[r as usize].code() as usize] += 1;
        }
        c
    };
    let mut nodes = vec![TreeNode {
        counts: count(&rows),
        depth: 0,
        split: None,
    }];
    let mut stack = vec![(0usize, rows)];
    let mut scratch = Vec::new();
    let mut features: Vec<usize> = (0..d).collect();

    while let Some((id, rows)) = stack.pop() {
        let counts = nodes[id].counts;
        let depth = nodes[id].depth as usize;
        if rows.len() < params.min_split
            || depth >= params.max_depth
            || counts[0] == 0
            || counts[1] == 0
        {
            continue;
        }

        let mut best: Option<Candidate> = None;
        let consider = |f: usize, best: &mut Option<Candidate>, scratch: &mut Vec<(f64, u8)>| {
            if let Some(c) = best_split_on(table, &rows, f, counts, params.min_leaf, scratch) {
                let better = match best {
                    None => true,
                    Some(b) => c.gain > b.gain + 1e-12 || ((c.gain - b.gain).abs() <= 1e-12 && c.feature < b.feature),
                };
                if better {
                    *best = Some(c);
                }
            }
        };
        match params.max_features {
            Some(m) if m < d => {
                // draw m candidates; keep drawing while none yields a split
                features.shuffle(rng);
                for chunk_start in (0..d).step_by(m) {
                    let mut chunk: Vec<usize> = features[chunk_start..(chunk_start + m).min(d)].to_vec();
                    chunk.sort_unstable();
                    for f in chunk {
                        consider(f, &mut best, &mut scratch);
                    }
                    if best.is_some() {
                        break;
                    }
                }
            }
            _ => {
                for f in 0..d {
                    consider(f, &mut best, &mut scratch);
                }
            }
        }

        let Some(best) = best else { continue };
        let (l_rows, r_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| table.value(r as usize, best.feature) <= best.threshold);
        let left = nodes.len();
        let right = left + 1;
        for child_rows in [&l_rows, &r_rows] {
            nodes.push(TreeNode {
                counts: count(child_rows),
                depth: depth as u32 + 1,
                split: None,
            });
        }
        nodes[id].split = Some(SplitRule {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            gain: best.gain,
        });
        stack.push((right, r_rows));
        stack.push((left, l_rows));
    }

    DecisionTree {
        feature_names: table.names().to_vec(),
        nodes,
    }
}

/// Weakest-link pruning: repeatedly collapse the internal nodes whose
/// complexity α = ΔR / (leaves − 1), with R relative to the root's risk,
/// is smallest, while that α is at most `cp`.
pub fn prune(tree: &mut DecisionTree, cp: f64) {
    let risk = |n: &TreeNode| n.counts[0].min(n.counts[1]) as f64;
    let root_risk = risk(&tree.nodes[0]);
    if root_risk == 0.0 {
        tree.nodes[0].split = None;
        return;
    }
    loop {
        // bottom-up subtree risk and leaf counts over reachable nodes
        let order = tree.reachable();
        let mut sub_risk = vec![0.0; tree.nodes.len()];
        let mut leaves = vec![0usize; tree.nodes.len()];
        for &i in order.iter().rev() {
            match &tree.nodes[i].split {
                None => {
                    sub_risk[i] = risk(&tree.nodes[i]);
                    leaves[i] = 1;
                }
                Some(s) => {
                    sub_risk[i] = sub_risk[s.left] + sub_risk[s.right];
                    leaves[i] = leaves[s.left] + leaves[s.right];
                }
            }
        }
        let alphas: Vec<(usize, f64)> = order
            .iter()
            .filter(|&&i| tree.nodes[i].split.is_some())
            .map(|&i| {
                let a = (risk(&tree.nodes[i]) - sub_risk[i]) / (root_risk * (leaves[i] - 1) as f64);
                (i, a)
            })
            .collect();
        let Some(min_alpha) = alphas.iter().map(|a| a.1).min_by(f64::total_cmp) else {
            return;
        };
        if min_alpha > cp {
            return;
        }
        for (i, a) in alphas {
            if a <= min_alpha + 1e-12 {
                tree.nodes[i].split = None;
            }
        }
    }
}

/// CART with cost-complexity pruning.
pub fn fit_cart(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let cp = spec.non_negative("cp")?;
    let params = GrowParams {
        min_split: spec.count("min_split", 2)?,
        min_leaf: spec.count("min_leaf", 1)?,
        max_depth: spec.count("max_depth", 1)?,
        max_features: None,
    };
    let rows: Vec<u32> = (0..train.n_rows() as u32).collect();
    let mut rng = crate::seed::rng(spec.seed);
    let mut tree = grow(train, rows, &params, &mut rng);
    prune(&mut tree, cp);
    Ok(wrap(spec, train, Model::Cart(tree)))
}

/// Impurity-decrease importance over the (pruned) tree's primary splits.
pub fn tree_importance(tree: &DecisionTree) -> ImportanceRanking {
    ImportanceRanking::from_raw("gini_decrease", &tree.feature_names, &tree.gain_by_feature())
}
