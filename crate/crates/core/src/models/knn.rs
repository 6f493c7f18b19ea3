//! Brute-force k nearest neighbours on Euclidean distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wrap, FittedModel, Model, ModelSpec};
use crate::data::Label;
use crate::error::Result;
use crate::preprocess::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_cols: usize,
    /// Row-major training features.
    pub data: Vec<f64>,
    pub labels: Vec<Label>,
}

impl Knn {
    pub fn predict_scores(&self, table: &FeatureTable) -> Vec<f64> {
        knn_predict(self, table.data(), table.n_cols())
    }
}

pub fn fit_knn(train: &FeatureTable, spec: &ModelSpec) -> Result<FittedModel> {
    let k = spec.count("k", 1)?.min(train.n_rows());
    let model = Knn {
        k,
        n_cols: train.n_cols(),
        data: train.data().to_vec(),
        labels: train.labels().to_vec(),
    };
    Ok(wrap(spec, train, Model::Knn(model)))
}

/// Share of `Left` among the k nearest training rows. Equal distances are
/// broken by training row order.
pub fn knn_predict(model: &Knn, queries: &[f64], n_cols: usize) -> Vec<f64> {
    assert_eq!(n_cols, model.n_cols, "query width differs from training width");
    let n_train = model.labels.len();
    queries
        .par_chunks(n_cols.max(1))
        .map(|q| {
            let mut dist: Vec<(f64, usize)> = (0..n_train)
                .map(|i| {
                    let row = &model.data[i * n_cols..(i + 1) * n_cols];
                    (row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
                })
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if model.k < n_train {
                dist.select_nth_unstable_by(model.k - 1, cmp);
            }
            let left = dist[..model.k]
                .iter()
                .filter(|(_, i)| model.labels[*i].is_left())
                .count();
            left as f64 / model.k as f64
        })
        .collect()
}
