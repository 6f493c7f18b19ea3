//! Single-hidden-layer logistic network fitted by L-BFGS on summed
//! cross-entropy plus weight decay.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{wrap, FittedModel, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::preprocess::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub n_inputs: usize,
    pub size: usize,
    /// Hidden unit h owns `[bias, w_1..w_d]`; the output unit follows as
    /// `[bias, v_1..v_size]`.
    pub weights: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn n_weights(n_inputs: usize, size: usize) -> usize {
    size * (n_inputs + 1) + size + 1
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Output pre-activation for one row; fills `hidden` with unit activations.
fn forward(n_inputs: usize, size: usize, w: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
    let stride = n_inputs + 1;
    for (h, a) in hidden.iter_mut().enumerate() {
        let u = &w[h * stride..(h + 1) * stride];
        let z = u[0] + u[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        *a = sigmoid(z);
    }
    let v = &w[size * stride..];
    v[0] + v[1..].iter().zip(hidden.iter()).map(|(a, b)| a * b).sum::<f64>()
}

impl Network {
    /// Layer sizes followed by each unit's incoming weights, bias first.
    pub fn dump(&self, input_names: &[String]) -> String {
        let stride = self.n_inputs + 1;
        let fmt = |w: &[f64]| w.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ");
        let mut out = format!("{}-{}-1 network, {} weights\n", self.n_inputs, self.size, self.weights.len());
        out.push_str(&format!("inputs: {}\n", input_names.join(", ")));
        for h in 0..self.size {
            out.push_str(&format!("h{} <- [b {}]\n", h + 1, fmt(&self.weights[h * stride..(h + 1) * stride])));
        }
        out.push_str(&format!("o <- [b {}]\n", fmt(&self.weights[self.size * stride..])));
        out
    }

    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        let mut hidden = vec![0.0; self.size];
        (0..table.n_rows())
            .map(|i| sigmoid(forward(self.n_inputs, self.size, &self.weights, table.row(i), &mut hidden)))
            .collect()
    }
}

/// Objective Σ CE + decay·Σw² and its exact gradient.
pub fn ann_loss_gradient(
    n_inputs: usize,
    size: usize,
    weights: &[f64],
    table: &FeatureTable,
    decay: f64,
) -> (f64, Vec<f64>) {
    let stride = n_inputs + 1;
    let out = size * stride;
    let mut grad: Vec<f64> = weights.iter().map(|w| 2.0 * decay * w).collect();
    let mut loss: f64 = decay * weights.iter().map(|w| w * w).sum::<f64>();
    let mut hidden = vec![0.0; size];
    for (i, label) in table.labels().iter().enumerate() {
        let x = table.row(i);
        let z = forward(n_inputs, size, weights, x, &mut hidden);
        let y = label.code() as f64;
        loss += softplus(z) - y * z;
        let delta = sigmoid(z) - y;
        grad[out] += delta;
        for h in 0..size {
            grad[out + 1 + h] += delta * hidden[h];
            let dh = delta * weights[out + 1 + h] * hidden[h] * (1.0 - hidden[h]);
            let g = &mut grad[h * stride..(h + 1) * stride];
            g[0] += dh;
            for (gj, xj) in g[1..].iter_mut().zip(x) {
                *gj += dh * xj;
            }
        }
    }
    (loss, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Limited-memory BFGS with a backtracking Armijo line search.
pub(crate) fn lbfgs(
    mut x: Vec<f64>,
    max_iter: usize,
    grad_tol: f64,
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
) -> Result<Minimum> {
    const MEMORY: usize = 10;
    let (mut f, mut g) = eval(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        if dot(&g, &g).sqrt() <= grad_tol {
            return Ok(Minimum { x, f, iterations, converged: true });
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut coeffs = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            coeffs.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(coeffs.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if history.is_empty() { 1.0 / dot(&g, &g).sqrt().max(1.0) } else { 1.0 };
        let (x_new, f_new, g_new) = loop {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (fc, gc) = eval(&cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                break (cand, fc, gc);
            }
            step *= 0.5;
            if step < 1e-20 {
                // no further progress possible along any direction we can find
                return Ok(Minimum { x, f, iterations, converged: false });
            }
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
    }
    let converged = dot(&g, &g).sqrt() <= grad_tol;
    Ok(Minimum { x, f, iterations, converged })
}

pub fn fit_ann(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let size = spec.count("size", 1)?;
    let decay = spec.non_negative("decay")?;
    let max_iter = spec.count("max_iter", 0)?;
    let d = train.n_cols();
    let mut rng = crate::seed::rng(spec.seed);
    let init: Vec<f64> = (0..n_weights(d, size)).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let min = lbfgs(init, max_iter, 1e-5, |w| ann_loss_gradient(d, size, w, train, decay))?;
    if !min.f.is_finite() || min.x.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite);
    }
    let net = Network {
        n_inputs: d,
        size,
        weights: min.x,
        loss: min.f,
        iterations: min.iterations,
        converged: min.converged,
    };
    Ok(wrap(spec, train, Model::Ann(net)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::models::{fit_model, Family};

    fn table(seed: u64, n: usize, balanced: bool) -> FeatureTable {
        let mut rng = crate::seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let labels = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let left = if balanced { i % 2 == 0 } else { r[0] + r[1] > 1.2 };
                if left { Label::Left } else { Label::Stayed }
            })
            .collect();
        FeatureTable::from_rows(&["a", "b"], &rows, labels).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = table(1, 40, false);
        let mut rng = crate::seed::rng(9);
        let w: Vec<f64> = (0..n_weights(2, 3)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = ann_loss_gradient(2, 3, &w, &t, 0.3);
        for k in 0..w.len() {
            let h = 1e-6;
            let mut up = w.clone();
            let mut down = w.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (ann_loss_gradient(2, 3, &up, &t, 0.3).0 - ann_loss_gradient(2, 3, &down, &t, 0.3).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-5 * fd.abs().max(1.0), "weight {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn decay_only_gradient_with_no_rows() {
        let t = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec!["a".into(), "b".into()],
            vec![crate::preprocess::FeatureKind::Continuous; 2],
            vec![],
            vec![],
        )
        .unwrap();
        let w: Vec<f64> = (0..n_weights(2, 2)).map(|i| i as f64 * 0.1 - 0.4).collect();
        let (loss, g) = ann_loss_gradient(2, 2, &w, &t, 0.7);
        assert!((loss - 0.7 * w.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-15);
        for (gi, wi) in g.iter().zip(&w) {
            assert!((gi - 1.4 * wi).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weights_give_identical_hidden_gradients() {
        let t = table(5, 30, true);
        let (_, g) = ann_loss_gradient(2, 3, &vec![0.0; n_weights(2, 3)], &t, 0.1);
        for h in 1..3 {
            assert_eq!(g[..3], g[h * 3..h * 3 + 3]);
            assert_eq!(g[9 + 1], g[9 + 1 + h]);
        }
    }

    #[test]
    fn learns_and() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = vec![Label::Stayed, Label::Stayed, Label::Stayed, Label::Left];
        let t = FeatureTable::from_rows(&["a", "b"], &rows, labels).unwrap();
        let spec = ModelSpec::new(Family::Ann, 1).with("decay", 0.0);
        let m = fit_model(&spec, &t).unwrap();
        assert_eq!(m.predict_labels(&t).unwrap(), t.labels());
        let Model::Ann(net) = m.model else { unreachable!() };
        let dump = net.dump(&["a".into(), "b".into()]);
        assert!(dump.starts_with("2-5-1 network, 21 weights"));
        assert_eq!(dump.lines().count(), 8);
    }

    #[test]
    fn large_decay_flattens_output() {
        let t = table(2, 60, true);
        let m = fit_model(&ModelSpec::new(Family::Ann, 1).with("decay", 1e6), &t).unwrap();
        assert!(m.predict_scores(&t).unwrap().iter().all(|s| (s - 0.5).abs() < 1e-3));
    }

    #[test]
    fn learns_xor() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = vec![Label::Stayed, Label::Left, Label::Left, Label::Stayed];
        let t = FeatureTable::from_rows(&["a", "b"], &rows, labels).unwrap();
        let solved = (0..10)
            .filter(|&seed| {
                let spec = ModelSpec::new(Family::Ann, seed).with("size", 3.0).with("decay", 0.0).with("max_iter", 2000.0);
                fit_model(&spec, &t).unwrap().predict_labels(&t).unwrap() == t.labels()
            })
            .count();
        assert!(solved >= 5, "xor solved from {solved} of 10 starts");
    }

    #[test]
    fn decay_shrinks_weights() {
        let t = table(3, 100, false);
        let norm = |decay: f64| {
            let spec = ModelSpec::new(Family::Ann, 4).with("decay", decay);
            let Model::Ann(n) = fit_model(&spec, &t).unwrap().model else { unreachable!() };
            n.weights.iter().map(|w| w * w).sum::<f64>()
        };
        assert!(norm(1.0) < norm(0.01));
    }

    #[test]
    fn deterministic_given_seed() {
        let t = table(4, 80, false);
        let spec = ModelSpec::new(Family::Ann, 7);
        assert_eq!(fit_model(&spec, &t).unwrap(), fit_model(&spec, &t).unwrap());
    }

    #[test]
    fn lbfgs_finds_quadratic_minimum() {
        let min = lbfgs(vec![3.0, -2.0], 100, 1e-10, |x| {
            let f = (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2);
            (f, vec![2.0 * (x[0] - 1.0), 20.0 * (x[1] + 0.5)])
        })
        .unwrap();
        assert!(min.converged);
        assert!((min.x[0] - 1.0).abs() < 1e-8 && (min.x[1] + 0.5).abs() < 1e-8);
    }
}
