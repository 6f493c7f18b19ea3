//! Feature encoding, scaling, power transforms and data partitioning.
//!
//! Every `fit_*` function looks only at the table it is handed; callers pass
//! training partitions so nothing learned here depends on test rows.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, Role};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    /// Values in {0, 1}: binary predictors and dummy columns.
    Binary,
}

/// Column names plus the preprocessing applied; models refuse tables whose
/// fingerprint differs from the one they were trained on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub columns: Vec<String>,
    pub transform: String,
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} | {}", self.columns.join(","), self.transform)
    }
}

/// Dense row-major design matrix with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    /// Source predictor of each column (a dummy maps to its factor).
    sources: Vec<String>,
    kinds: Vec<FeatureKind>,
    data: Vec<f64>,
    labels: Vec<Label>,
    transform: String,
}

impl FeatureTable {
    pub fn new(
        names: Vec<String>,
        sources: Vec<String>,
        kinds: Vec<FeatureKind>,
        data: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let d = names.len();
        if sources.len() != d || kinds.len() != d {
            return Err(Error::InvalidInput("column metadata lengths differ".into()));
        }
        if d == 0 {
            return Err(Error::InvalidInput("feature table needs at least one column".into()));
        }
        if data.len() != d * labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} rows x {d} columns",
                data.len(),
                labels.len()
            )));
        }
        Ok(FeatureTable {
            names,
            sources,
            kinds,
            data,
            labels,
            transform: "raw".into(),
        })
    }

    /// Convenience constructor: all columns continuous, sources = names.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput("row and label counts differ".into()));
        }
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        FeatureTable::new(
            names.clone(),
            names.clone(),
            vec![FeatureKind::Continuous; names.len()],
            data,
            labels,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn transform(&self) -> &str {
        &self.transform
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            columns: self.names.clone(),
            transform: self.transform.clone(),
        }
    }

    /// (Stayed, Left) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let left = self.labels.iter().filter(|l| l.is_left()).count();
        (self.labels.len() - left, left)
    }

    pub fn with_transform(mut self, transform: impl Into<String>) -> Self {
        self.transform = transform.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(Error::InvalidInput("label count differs from row count".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub(crate) fn with_data(&self, data: Vec<f64>, transform: String) -> FeatureTable {
        debug_assert_eq!(data.len(), self.data.len());
        FeatureTable {
            names: self.names.clone(),
            sources: self.sources.clone(),
            kinds: self.kinds.clone(),
            data,
            labels: self.labels.clone(),
            transform,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let d = self.n_cols();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureTable {
            names: self.names.clone(),
            sources: self.sources.clone(),
            kinds: self.kinds.clone(),
            data,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            transform: self.transform.clone(),
        }
    }

    /// Keep the named columns, in the table's own order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureTable> {
        for n in names {
            self.column_index(n)?;
        }
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| names.contains(&self.names[j])).collect();
        self.select_column_indices(&keep)
    }

    /// Keep every column derived from one of the named source predictors.
    pub fn select_sources(&self, sources: &[String]) -> Result<FeatureTable> {
        for s in sources {
            if !self.sources.contains(s) {
                return Err(Error::UnknownColumn(s.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| sources.contains(&self.sources[j])).collect();
        self.select_column_indices(&keep)
    }

    fn select_column_indices(&self, keep: &[usize]) -> Result<FeatureTable> {
        if keep.is_empty() {
            return Err(Error::InvalidInput("column selection is empty".into()));
        }
        let data = (0..self.n_rows())
            .flat_map(|i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.value(i, j))
            .collect();
        Ok(FeatureTable {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            sources: keep.iter().map(|&j| self.sources[j].clone()).collect(),
            kinds: keep.iter().map(|&j| self.kinds[j]).collect(),
            data,
            labels: self.labels.clone(),
            transform: self.transform.clone(),
        })
    }

    /// Append rows (e.g. synthetic samples) with their labels.
    pub fn append_rows(&self, rows: &[Vec<f64>], labels: &[Label]) -> FeatureTable {
        let mut out = self.clone();
        for (r, &l) in rows.iter().zip(labels) {
            out.data.extend_from_slice(r);
            out.labels.push(l);
        }
        out
    }

    /// Distinct source predictors in column order.
    pub fn source_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.sources {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// dummy encoding

/// Levels per categorical column and the level dropped as reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub levels: BTreeMap<String, Vec<String>>,
    pub reference_levels: BTreeMap<String, String>,
}

impl EncoderSpec {
    /// Geography (reference France) and Gender (reference Female).
    pub fn churn() -> Self {
        let mut levels = BTreeMap::new();
        levels.insert("Geography".into(), vec!["France".into(), "Germany".into(), "Spain".into()]);
        levels.insert("Gender".into(), vec!["Female".into(), "Male".into()]);
        let mut reference_levels = BTreeMap::new();
        reference_levels.insert("Geography".into(), "France".into());
        reference_levels.insert("Gender".into(), "Female".into());
        EncoderSpec {
            levels,
            reference_levels,
        }
    }

    /// Non-reference levels of `column`, in level order.
    pub fn dummy_levels(&self, column: &str) -> Vec<&str> {
        let reference = self.reference_levels.get(column);
        self.levels
            .get(column)
            .map(|ls| {
                ls.iter()
                    .filter(|l| Some(*l) != reference)
                    .map(String::as_str)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn dummy_names(&self, column: &str) -> Vec<String> {
        self.dummy_levels(column)
            .into_iter()
            .map(|l| format!("{column}{l}"))
            .collect()
    }

    /// Recover the original level from a dummy pattern.
    pub fn decode(&self, column: &str, dummies: &[f64]) -> Option<String> {
        let levels = self.dummy_levels(column);
        if dummies.len() != levels.len() {
            return None;
        }
        match dummies.iter().filter(|&&x| x == 1.0).count() {
            0 => self.reference_levels.get(column).cloned(),
            1 => dummies
                .iter()
                .position(|&x| x == 1.0)
                .map(|i| levels[i].to_string()),
            _ => None,
        }
    }
}

/// Expand categorical predictors into k-1 dummies; numeric and binary
/// predictors pass through unchanged.
pub fn dummy_encode(ds: &Dataset, spec: &EncoderSpec) -> Result<FeatureTable> {
    let labels = ds.labels()?.to_vec();
    let n = ds.n();
    let mut names = Vec::new();
    let mut sources = Vec::new();
    let mut kinds = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for col in ds.predictors() {
        match col.role {
            Role::Numeric | Role::Binary => {
                names.push(col.name.clone());
                sources.push(col.name.clone());
                kinds.push(if col.role == Role::Binary {
                    FeatureKind::Binary
                } else {
                    FeatureKind::Continuous
                });
                columns.push(ds.numeric(&col.name)?.to_vec());
            }
            Role::Categorical => {
                let levels = spec.levels.get(&col.name).ok_or_else(|| {
                    Error::InvalidInput(format!("encoder has no levels for {}", col.name))
                })?;
                if !spec.reference_levels.contains_key(&col.name) {
                    return Err(Error::InvalidInput(format!(
                        "encoder has no reference level for {}",
                        col.name
                    )));
                }
                let values = ds.text(&col.name)?;
                if let Some((row, bad)) = values
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !levels.contains(v))
                {
                    return Err(Error::InvalidValue {
                        row: row + 1,
                        message: format!("{}: unseen level {bad:?}", col.name),
                    });
                }
                for level in spec.dummy_levels(&col.name) {
                    names.push(format!("{}{}", col.name, level));
                    sources.push(col.name.clone());
                    kinds.push(FeatureKind::Binary);
                    columns.push(values.iter().map(|v| (v == level) as u8 as f64).collect());
                }
            }
            Role::Outcome | Role::Ignored => unreachable!("predictors() filters these"),
        }
    }

    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i]));
    }
    FeatureTable::new(names, sources, kinds, data, labels)
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    ZScore,
    MinMax,
}

/// Per-column affine parameters: `(x - offset) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerSpec {
    pub kind: ScaleKind,
    pub columns: Vec<String>,
    /// zscore: (mean, sd); minmax: (min, max - min)
    pub params: Vec<(f64, f64)>,
}

pub fn fit_scaler(train: &FeatureTable, kind: ScaleKind) -> Result<ScalerSpec> {
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput("scaler needs at least two rows".into()));
    }
    let mut params = Vec::with_capacity(train.n_cols());
    for j in 0..train.n_cols() {
        let col = train.column(j);
        let p = match kind {
            ScaleKind::ZScore => {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (mean, var.sqrt())
            }
            ScaleKind::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        if !(p.1 > 0.0) {
            return Err(Error::Degenerate(format!(
                "column {} has zero {} in the fitting rows",
                train.names()[j],
                if kind == ScaleKind::ZScore { "variance" } else { "range" }
            )));
        }
        params.push(p);
    }
    Ok(ScalerSpec {
        kind,
        columns: train.names().to_vec(),
        params,
    })
}

pub fn apply_scaler(spec: &ScalerSpec, table: &FeatureTable) -> Result<FeatureTable> {
    if spec.columns != table.names() {
        return Err(Error::Fingerprint {
            expected: spec.columns.join(","),
            found: table.names().join(","),
        });
    }
    let d = table.n_cols();
    let data = table
        .data()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let (offset, scale) = spec.params[k % d];
            let z = (x - offset) / scale;
            match spec.kind {
                ScaleKind::ZScore => z,
                ScaleKind::MinMax => z.clamp(0.0, 1.0),
            }
        })
        .collect();
    let tag = match spec.kind {
        ScaleKind::ZScore => "zscore",
        ScaleKind::MinMax => "minmax",
    };
    Ok(table.with_data(data, format!("{}+{tag}", table.transform())))
}

// ---------------------------------------------------------------------------
// Yeo-Johnson power transform

/// Yeo-Johnson transform of one value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-10;
    if x >= 0.0 {
        if lambda.abs() < EPS {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Profile log-likelihood of λ under a normal model for the transformed data.
pub fn yeo_johnson_log_likelihood(x: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let t: Vec<f64> = x.iter().map(|&v| yeo_johnson(v, lambda)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let jacobian: f64 = x.iter().map(|&v| v.signum() * v.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTransformSpec {
    pub columns: Vec<String>,
    pub lambdas: Vec<f64>,
}

const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);

/// Maximum-likelihood λ per named column.
pub fn fit_power_transform(train: &FeatureTable, columns: &[String]) -> Result<PowerTransformSpec> {
    let mut lambdas = Vec::with_capacity(columns.len());
    for name in columns {
        let x = train.column(train.column_index(name)?);
        let (lambda, llf) = brent_maximize(
            |l| yeo_johnson_log_likelihood(&x, l),
            LAMBDA_BOUNDS.0,
            LAMBDA_BOUNDS.1,
        );
        if !llf.is_finite() {
            return Err(Error::Degenerate(format!(
                "power transform likelihood for {name} is not finite"
            )));
        }
        lambdas.push(lambda);
    }
    Ok(PowerTransformSpec {
        columns: columns.to_vec(),
        lambdas,
    })
}

pub fn apply_power_transform(spec: &PowerTransformSpec, table: &FeatureTable) -> Result<FeatureTable> {
    let idx: Vec<usize> = spec
        .columns
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_>>()?;
    let d = table.n_cols();
    let mut lambda_of = vec![None; d];
    for (&j, &l) in idx.iter().zip(&spec.lambdas) {
        lambda_of[j] = Some(l);
    }
    let data = table
        .data()
        .iter()
        .enumerate()
        .map(|(k, &x)| match lambda_of[k % d] {
            Some(l) => yeo_johnson(x, l),
            None => x,
        })
        .collect();
    Ok(table.with_data(data, format!("{}+yeojohnson", table.transform())))
}

/// Bounded Brent maximization; returns (argmax, max).
fn brent_maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    const TOL: f64 = 1e-9;
    let g = |x: f64| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = TOL * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1 * d.signum() };
        let fu = g(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

// ---------------------------------------------------------------------------
// splitting

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed,
            stratified: true,
        }
    }
}

/// Sorted row indices of the two partitions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition rows; per-class quotas use largest-remainder rounding so the
/// training size is exactly round(fraction · n).
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<Split> {
    let n = labels.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!("split needs at least 10 rows, got {n}")));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidInput("train fraction must lie in (0, 1)".into()));
    }
    let mut rng = seed::rng(spec.seed);
    let target = (spec.train_fraction * n as f64).round() as usize;
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);

    if !spec.stratified {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..target]);
        test.extend_from_slice(&idx[target..]);
    } else {
        let groups: Vec<Vec<usize>> = [Label::Stayed, Label::Left]
            .iter()
            .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect();
        if let Some(g) = groups.iter().find(|g| g.len() < 2) {
            return Err(Error::Degenerate(format!(
                "class {} has {} row(s); stratification needs at least 2",
                labels[g[0]],
                g.len()
            )));
        }
        let quotas = largest_remainder(
            &groups.iter().map(|g| g.len()).collect::<Vec<_>>(),
            spec.train_fraction,
            target,
        );
        for (mut g, q) in groups.into_iter().zip(quotas) {
            g.shuffle(&mut rng);
            train.extend_from_slice(&g[..q]);
            test.extend_from_slice(&g[q..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

fn largest_remainder(sizes: &[usize], fraction: f64, target: usize) -> Vec<usize> {
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * fraction).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    for &i in order.iter().cycle().take(sizes.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[i] < sizes[i] - 1 {
            quotas[i] += 1;
            assigned += 1;
        }
    }
    // keep at least one row of every class on each side
    for (q, &s) in quotas.iter_mut().zip(sizes) {
        *q = (*q).clamp(1, s - 1);
    }
    quotas
}

/// Split a labeled dataset into (train, test).
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let s = split_indices(ds.labels()?, spec)?;
    Ok((ds.subset(&s.train)?, ds.subset(&s.test)?))
}

/// Dataset without the given rows.
pub fn remove_rows(ds: &Dataset, indices: &[usize]) -> Result<Dataset> {
    let mut drop = vec![false; ds.n()];
    for &i in indices {
        if i >= ds.n() {
            return Err(Error::InvalidInput(format!(
                "row index {i} out of range for {} rows",
                ds.n()
            )));
        }
        drop[i] = true;
    }
    let keep: Vec<usize> = (0..ds.n()).filter(|&i| !drop[i]).collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput("removing every row leaves an empty dataset".into()));
    }
    ds.subset(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{churn_schema, map_outcome_labels, read_dataset};

    fn small_dataset() -> Dataset {
        let csv = "CustomerId,Surname,CreditScore,Geography,Gender,Age,Tenure,Balance,NumOfProducts,HasCrCard,IsActiveMember,EstimatedSalary,Exited\n\
            1,A,600,France,Female,40,3,0,1,1,1,5000,0\n\
            2,B,700,Germany,Male,50,4,100,2,0,0,6000,1\n\
            3,C,650,Spain,Male,30,5,200,1,1,1,7000,0\n";
        map_outcome_labels(&read_dataset(csv.as_bytes(), &churn_schema()).unwrap()).unwrap()
    }

    #[test]
    fn dummy_encoding_rules() {
        let t = dummy_encode(&small_dataset(), &EncoderSpec::churn()).unwrap();
        assert_eq!(t.n_cols(), 11);
        assert_eq!(
            t.names(),
            &[
                "CreditScore", "GeographyGermany", "GeographySpain", "GenderMale", "Age", "Tenure",
                "Balance", "NumOfProducts", "HasCrCard", "IsActiveMember", "EstimatedSalary"
            ]
        );
        let g = t.column_index("GeographyGermany").unwrap();
        // France/Female → all reference
        assert_eq!(&t.row(0)[g..g + 3], &[0.0, 0.0, 0.0]);
        // Germany/Male → (1, 0, 1)
        assert_eq!(&t.row(1)[g..g + 3], &[1.0, 0.0, 1.0]);
        assert_eq!(t.sources()[1], "Geography");
        assert_eq!(t.source_names().len(), 10);
    }

    #[test]
    fn dummy_round_trip() {
        let ds = small_dataset();
        let spec = EncoderSpec::churn();
        let t = dummy_encode(&ds, &spec).unwrap();
        let g = t.column_index("GeographyGermany").unwrap();
        for i in 0..ds.n() {
            let level = spec.decode("Geography", &t.row(i)[g..g + 2]).unwrap();
            assert_eq!(level, ds.text("Geography").unwrap()[i]);
        }
    }

    #[test]
    fn unseen_level_fails() {
        let ds = small_dataset();
        let mut spec = EncoderSpec::churn();
        spec.levels.insert("Geography".into(), vec!["France".into(), "Spain".into()]);
        assert!(matches!(dummy_encode(&ds, &spec), Err(Error::InvalidValue { row: 2, .. })));
    }

    fn table(col: &[f64]) -> FeatureTable {
        FeatureTable::from_rows(
            &["x"],
            &col.iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            vec![Label::Stayed; col.len()],
        )
        .unwrap()
    }

    #[test]
    fn zscore_on_fit_data() {
        let t = table(&[3.0, 7.0, 1.0, 9.0, 4.5, 6.25]);
        let s = fit_scaler(&t, ScaleKind::ZScore).unwrap();
        let z = apply_scaler(&s, &t).unwrap().column(0);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((sd - 1.0).abs() < 1e-9);
    }

    #[test]
    fn minmax_and_clipping() {
        let t = table(&[2.0, 4.0, 6.0]);
        let s = fit_scaler(&t, ScaleKind::MinMax).unwrap();
        assert_eq!(apply_scaler(&s, &t).unwrap().column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(apply_scaler(&s, &table(&[1.0, 9.0])).unwrap().column(0), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_range_rejected() {
        assert!(matches!(fit_scaler(&table(&[1.0, 1.0, 1.0]), ScaleKind::MinMax), Err(Error::Degenerate(_))));
        assert!(matches!(fit_scaler(&table(&[1.0, 1.0, 1.0]), ScaleKind::ZScore), Err(Error::Degenerate(_))));
    }

    #[test]
    fn yeo_johnson_continuity_and_identity() {
        for x in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            assert!((yeo_johnson(x, 1.0) - x).abs() < 1e-12);
            assert!((yeo_johnson(x, 1e-12) - yeo_johnson(x, 1e-7)).abs() < 1e-6);
            assert!((yeo_johnson(x, 2.0) - yeo_johnson(x, 2.0 - 1e-7)).abs() < 1e-6);
        }
        assert_eq!(yeo_johnson(0.0, 0.37), 0.0);
    }

    #[test]
    fn normal_column_gives_lambda_near_one() {
        use rand_distr::{Distribution, Normal};
        let mut rng = seed::rng(7);
        let dist = Normal::new(50.0, 10.0).unwrap();
        let col: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        let t = table(&col);
        let spec = fit_power_transform(&t, &["x".to_string()]).unwrap();
        assert!((spec.lambdas[0] - 1.0).abs() < 0.2, "lambda {}", spec.lambdas[0]);
    }

    #[test]
    fn lambda_maximizes_likelihood() {
        let col: Vec<f64> = (1..400).map(|i| (i as f64 / 40.0).exp()).collect();
        let t = table(&col);
        let spec = fit_power_transform(&t, &["x".to_string()]).unwrap();
        let best = yeo_johnson_log_likelihood(&col, spec.lambdas[0]);
        // coarse grid oracle
        for k in -500..=500 {
            let l = k as f64 / 100.0;
            assert!(yeo_johnson_log_likelihood(&col, l) <= best + 1e-6);
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let labels: Vec<Label> = (0..10)
            .map(|i| if i < 8 { Label::Stayed } else { Label::Left })
            .collect();
        let spec = SplitSpec::new(3);
        let s = split_indices(&labels, &spec).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 2);
        let left_train = s.train.iter().filter(|&&i| labels[i].is_left()).count();
        // ideal: 1.6 Left rows in train → 1 or 2
        assert!((1..=2).contains(&left_train));
        assert_eq!(s, split_indices(&labels, &spec).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_tiny_class() {
        let mut labels = vec![Label::Stayed; 12];
        labels[0] = Label::Left;
        assert!(split_indices(&labels, &SplitSpec::new(1)).is_err());
        assert!(split_indices(&labels[..5], &SplitSpec::new(1)).is_err());
    }

    #[test]
    fn remove_rows_cases() {
        let ds = small_dataset();
        assert_eq!(remove_rows(&ds, &[]).unwrap(), ds);
        assert_eq!(remove_rows(&ds, &[1]).unwrap().n(), 2);
        assert!(remove_rows(&ds, &[0, 1, 2]).is_err());
        assert!(remove_rows(&ds, &[3]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn stratified_split_partitions(n_stay in 2usize..200, n_left in 2usize..60, seed in 0u64..1000) {
            let mut labels = vec![Label::Stayed; n_stay];
            labels.extend(vec![Label::Left; n_left]);
            proptest::prop_assume!(labels.len() >= 10);
            let s = split_indices(&labels, &SplitSpec::new(seed)).unwrap();
            let n = labels.len();
            proptest::prop_assert_eq!(s.train.len() + s.test.len(), n);
            let mut seen = vec![false; n];
            for &i in s.train.iter().chain(&s.test) {
                proptest::prop_assert!(!seen[i]);
                seen[i] = true;
            }
            let left_train = s.train.iter().filter(|&&i| labels[i].is_left()).count() as f64;
            proptest::prop_assert!((left_train - 0.8 * n_left as f64).abs() <= 1.0);
        }

        #[test]
        fn yeo_johnson_is_increasing(lambda in -3.0f64..3.0, a in -100.0f64..100.0, b in -100.0f64..100.0) {
            proptest::prop_assume!(a < b);
            proptest::prop_assert!(yeo_johnson(a, lambda) < yeo_johnson(b, lambda));
        }
    }
}
