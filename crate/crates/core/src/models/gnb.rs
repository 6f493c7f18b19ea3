//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::{wrap, FittedModel, Model, ModelSpec};
use crate::error::Result;
use crate::preprocess::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class code (Stayed, Left).
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub sds: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        (0..table.n_rows())
            .map(|i| {
                let row = table.row(i);
                let ll: Vec<f64> = (0..2)
                    .map(|c| {
                        let mut s = self.priors[c].ln();
                        for (j, &x) in row.iter().enumerate() {
                            let z = (x - self.means[c][j]) / self.sds[c][j];
                            s += -0.5 * z * z - self.sds[c][j].ln();
                        }
                        s
                    })
                    .collect();
                // P(Left) = 1 / (1 + exp(ll0 - ll1))
                1.0 / (1.0 + (ll[0] - ll[1]).exp())
            })
            .collect()
    }
}

pub fn fit_gnb(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let floor = spec.positive("sd_floor")?;
    let d = train.n_cols();
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    for (i, label) in train.labels().iter().enumerate() {
        let c = label.code() as usize;
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(train.row(i)) {
            *s += x;
        }
    }
    let means = [0, 1].map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>());
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (i, label) in train.labels().iter().enumerate() {
        let c = label.code() as usize;
        for (j, x) in train.row(i).iter().enumerate() {
            sq[c][j] += (x - means[c][j]).powi(2);
        }
    }
    let sds = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| {
                let var = if counts[c] > 1 { s / (counts[c] - 1) as f64 } else { 0.0 };
                var.sqrt().max(floor)
            })
            .collect::<Vec<_>>()
    });
    let n = train.n_rows() as f64;
    let model = GaussianNb {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        sds,
    };
    Ok(wrap(spec, train, Model::Gnb(model)))
}
