//! Class balancing for training partitions: random under-sampling of the
//! majority class and SMOTE oversampling of the minority class.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::preprocess::{FeatureKind, FeatureTable};
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleKind {
    #[default]
    None,
    Under,
    Smote,
}

impl ResampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResampleKind::None => "none",
            ResampleKind::Under => "under",
            ResampleKind::Smote => "smote",
        }
    }
}

impl std::str::FromStr for ResampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ResampleKind::None),
            "under" => Ok(ResampleKind::Under),
            "smote" => Ok(ResampleKind::Smote),
            _ => Err(Error::InvalidInput(format!("unknown resampling mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub kind: ResampleKind,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl ResamplePlan {
    pub fn new(kind: ResampleKind, seed: u64) -> Self {
        ResamplePlan {
            kind,
            k_neighbors: 5,
            seed,
        }
    }
}

/// Row indices of the (minority, majority) classes.
fn split_classes(train: &FeatureTable) -> (Vec<usize>, Vec<usize>) {
    let (stayed, left): (Vec<usize>, Vec<usize>) =
        (0..train.n_rows()).partition(|&i| train.labels()[i] == Label::Stayed);
    if left.len() <= stayed.len() {
        (left, stayed)
    } else {
        (stayed, left)
    }
}

pub fn resample(train: &FeatureTable, plan: &ResamplePlan) -> Result<FeatureTable> {
    match plan.kind {
        ResampleKind::None => Ok(train.clone()),
        ResampleKind::Under => undersample(train, plan),
        ResampleKind::Smote => smote(train, plan),
    }
}

/// All minority rows plus an equally sized uniform sample of majority rows,
/// in original row order.
pub fn undersample(train: &FeatureTable, plan: &ResamplePlan) -> Result<FeatureTable> {
    let (minority, mut majority) = split_classes(train);
    if minority.is_empty() {
        return Err(Error::Degenerate("under-sampling needs at least one minority row".into()));
    }
    let mut rng = seed::rng(seed::derive(plan.seed, "resample/under", 0));
    majority.shuffle(&mut rng);
    let mut keep: Vec<usize> = minority;
    keep.extend_from_slice(&majority[..keep.len()]);
    keep.sort_unstable();
    Ok(train.select_rows(&keep))
}

/// Appends synthetic minority rows until both classes are the same size.
///
/// Neighbours are found on features rescaled by their training range so a
/// single wide column cannot dominate; interpolation happens in the original
/// units. Binary columns are rounded back to 0 or 1.
pub fn smote(train: &FeatureTable, plan: &ResamplePlan) -> Result<FeatureTable> {
    let (mut minority, majority) = split_classes(train);
    let k = plan.k_neighbors;
    if k == 0 || minority.len() <= k {
        return Err(Error::Degenerate(format!(
            "SMOTE with k={k} needs more than {k} minority rows, found {}",
            minority.len()
        )));
    }
    let needed = majority.len() - minority.len();
    if needed == 0 {
        return Ok(train.clone());
    }
    let d = train.n_cols();
    let ranges: Vec<f64> = (0..d)
        .map(|j| {
            let col = train.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo { hi - lo } else { 1.0 }
        })
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (train.row(a), train.row(b));
        (0..d).map(|j| ((ra[j] - rb[j]) / ranges[j]).powi(2)).sum()
    };

    let mut rng = seed::rng(seed::derive(plan.seed, "resample/smote", 0));
    // visiting seeds in a shuffled order spreads the remainder evenly
    minority.shuffle(&mut rng);
    let m = minority.len();
    let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; m];
    let label = train.labels()[minority[0]];
    let mut rows = Vec::with_capacity(needed);
    for s in 0..needed {
        let pos = s % m;
        let base = minority[pos];
        let nn = neighbours[pos].get_or_insert_with(|| {
            let mut cand: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&o| o != base)
                .map(|&o| (dist(base, o), o))
                .collect();
            cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|c| c.1).collect()
        });
        let other = nn[rng.gen_range(0..nn.len())];
        let u: f64 = rng.gen_range(0.0..1.0);
        let (xa, xb) = (train.row(base), train.row(other));
        let row: Vec<f64> = (0..d)
            .map(|j| {
                let v = xa[j] + u * (xb[j] - xa[j]);
                match train.kinds()[j] {
                    FeatureKind::Binary => v.round(),
                    FeatureKind::Continuous => v,
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(train.append_rows(&rows, &vec![label; needed]))
}
