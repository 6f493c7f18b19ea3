//! C-SVM with an RBF kernel, solved by SMO with second-order working set
//! selection. The solver follows libsvm's update and bias rules without
//! shrinking.

use std::collections::HashMap;
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wrap, FittedModel, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::preprocess::FeatureTable;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub gamma: f64,
    pub rho: f64,
    pub n_cols: usize,
    /// Row-major support vectors.
    pub support: Vec<f64>,
    /// αᵢ·yᵢ per support vector, y = +1 for `Left`.
    pub coef: Vec<f64>,
    pub iterations: u64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

impl Svm {
    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn decision_values(&self, table: &FeatureTable) -> Vec<f64> {
        let d = self.n_cols;
        (0..table.n_rows())
            .into_par_iter()
            .map(|i| {
                let x = table.row(i);
                self.coef
                    .iter()
                    .enumerate()
                    .map(|(s, c)| c * rbf(&self.support[s * d..(s + 1) * d], x, self.gamma))
                    .sum::<f64>()
                    - self.rho
            })
            .collect()
    }

    /// Logistic squash of the decision value, so 0.5 sits on the margin.
    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        self.decision_values(table)
            .into_iter()
            .map(|f| 1.0 / (1.0 + (-f).exp()))
            .collect()
    }
}

/// Kernel columns with least-recently-used eviction under a byte budget.
struct KernelCache<'a> {
    table: &'a FeatureTable,
    gamma: f64,
    capacity: usize,
    clock: u64,
    columns: HashMap<usize, (Rc<[f64]>, u64)>,
}

impl<'a> KernelCache<'a> {
    fn new(table: &'a FeatureTable, gamma: f64, budget_bytes: usize) -> Self {
        let col_bytes = table.n_rows() * std::mem::size_of::<f64>();
        KernelCache {
            table,
            gamma,
            capacity: (budget_bytes / col_bytes.max(1)).max(2),
            clock: 0,
            columns: HashMap::new(),
        }
    }

    fn column(&mut self, i: usize) -> Rc<[f64]> {
        self.clock += 1;
        if let Some(entry) = self.columns.get_mut(&i) {
            entry.1 = self.clock;
            return entry.0.clone();
        }
        if self.columns.len() >= self.capacity {
            let oldest = *self.columns.iter().min_by_key(|(_, e)| e.1).unwrap().0;
            self.columns.remove(&oldest);
        }
        let xi = self.table.row(i);
        let col: Rc<[f64]> = (0..self.table.n_rows())
            .map(|k| rbf(xi, self.table.row(k), self.gamma))
            .collect();
        self.columns.insert(i, (col.clone(), self.clock));
        col
    }
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub grad: Vec<f64>,
    pub rho: f64,
    pub iterations: u64,
}

pub(crate) fn solve(
    table: &FeatureTable,
    y: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    max_iter: u64,
    cache_bytes: usize,
) -> Result<Solution> {
    let n = y.len();
    let mut cache = KernelCache::new(table, gamma, cache_bytes);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0u64;

    loop {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                if upper(alpha[t]) { continue } else { -grad[t] }
            } else if lower(alpha[t]) {
                continue;
            } else {
                grad[t]
            };
            if v >= gmax {
                gmax = v;
                i = t;
            }
        }
        // second index: largest second-order decrease
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let ki = if i != usize::MAX { Some(cache.column(i)) } else { None };
        if let Some(ki) = &ki {
            for t in 0..n {
                let (grad_diff, v, quad) = if y[t] > 0.0 {
                    if lower(alpha[t]) {
                        continue;
                    }
                    (gmax + grad[t], grad[t], 2.0 - 2.0 * y[i] * y[t] * ki[t])
                } else {
                    if upper(alpha[t]) {
                        continue;
                    }
                    (gmax - grad[t], -grad[t], 2.0 + 2.0 * y[i] * y[t] * ki[t])
                };
                if v >= gmax2 {
                    gmax2 = v;
                }
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                iterations: iterations as usize,
                residual: gmax + gmax2,
            });
        }
        iterations += 1;

        let ki = ki.unwrap();
        let kj = cache.column(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // bias: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb, mut free, mut sum_free) = (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    Ok(Solution {
        alpha,
        grad,
        rho,
        iterations,
    })
}

pub fn fit_svm(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let c = spec.positive("c")?;
    let gamma = match spec.get("gamma") {
        g if g.is_nan() => 1.0 / train.n_cols() as f64,
        _ => spec.positive("gamma")?,
    };
    let tol = spec.positive("tol")?;
    let max_iter = spec.count("max_iter", 1)? as u64;
    let cache_bytes = (spec.positive("cache_mb")? * 1024.0 * 1024.0) as usize;
    let y: Vec<f64> = train
        .labels()
        .iter()
        .map(|l| if l.is_left() { 1.0 } else { -1.0 })
        .collect();
    let sol = solve(train, &y, c, gamma, tol, max_iter, cache_bytes)?;
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.extend_from_slice(train.row(t));
            coef.push(a * y[t]);
        }
    }
    let model = Svm {
        gamma,
        rho: sol.rho,
        n_cols: train.n_cols(),
        support,
        coef,
        iterations: sol.iterations,
    };
    Ok(wrap(spec, train, Model::Svm(model)))
}
