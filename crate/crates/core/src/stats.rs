//! Exploratory statistics: correlations, chi-square independence tests,
//! IQR outliers, and the tabular data behind the distribution figures.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, Dataset, Label, Role};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// special functions

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Regularized upper incomplete gamma function Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_survival(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// correlation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major `labels.len()` square matrix.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

/// Column as reals; the outcome maps to 0/1 (Left = 1).
pub fn numeric_view(ds: &Dataset, name: &str) -> Result<Vec<f64>> {
    match ds.column(name)? {
        ColumnData::Numeric(v) => Ok(v.clone()),
        ColumnData::Labels(v) => Ok(v.iter().map(|l| l.code() as f64).collect()),
        ColumnData::Text(_) => Err(Error::InvalidInput(format!(
            "column {name} is categorical; correlation needs numeric or binary data"
        ))),
    }
}

/// Pearson correlation for every pair of `columns`.
pub fn pearson_correlation_matrix(ds: &Dataset, columns: &[&str]) -> Result<CorrelationMatrix> {
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|&name| {
            let v = numeric_view(ds, name)?;
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let ss = c.iter().map(|x| x * x).sum::<f64>();
            Ok((c, ss))
        })
        .collect::<Result<_>>()?;

    let k = columns.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (ci, si) = &centered[i];
            let (cj, sj) = &centered[j];
            if *si == 0.0 || *sj == 0.0 {
                return Err(Error::Degenerate(format!(
                    "correlation of {} and {} is undefined (zero variance)",
                    columns[i], columns[j]
                )));
            }
            let r = if i == j {
                1.0
            } else {
                let cov: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                (cov / (si.sqrt() * sj.sqrt())).clamp(-1.0, 1.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: columns.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

// ---------------------------------------------------------------------------
// chi-square

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Pearson chi-square test on an r×c table of observed counts, without
/// continuity correction.
pub fn chi_square_from_table(observed: &[Vec<f64>]) -> Result<ChiSquareResult> {
    let rows = observed.len();
    let cols = observed.first().map(Vec::len).unwrap_or(0);
    if rows < 2 || cols < 2 {
        return Err(Error::Degenerate(format!(
            "contingency table is {rows}x{cols}; both margins need at least two levels"
        )));
    }
    if observed.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput("ragged contingency table".into()));
    }
    let row_sums: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| observed.iter().map(|r| r[j]).sum())
        .collect();
    let total: f64 = row_sums.iter().sum();
    let mut statistic = 0.0;
    for (i, r) in observed.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / total;
            if e <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "expected count in cell ({i}, {j}) is zero"
                )));
            }
            statistic += (o - e) * (o - e) / e;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as u32;
    Ok(ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_survival(statistic, df),
    })
}

/// Per-row level strings of a discrete column; numeric values print without
/// a fractional part when integral.
pub fn factor_levels(ds: &Dataset, name: &str) -> Result<Vec<String>> {
    match ds.column(name)? {
        ColumnData::Text(v) => Ok(v.clone()),
        ColumnData::Labels(v) => Ok(v.iter().map(|l| l.to_string()).collect()),
        ColumnData::Numeric(v) => Ok(v.iter().map(|x| format!("{x}")).collect()),
    }
}

fn sorted_levels(ds: &Dataset, name: &str, levels: impl Iterator<Item = String>) -> Result<Vec<String>> {
    let mut uniq: Vec<String> = levels.collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if matches!(ds.column(name)?, ColumnData::Numeric(_)) {
        uniq.sort_by(|a, b| {
            let fa: f64 = a.parse().unwrap_or(f64::NAN);
            let fb: f64 = b.parse().unwrap_or(f64::NAN);
            fa.total_cmp(&fb)
        });
    }
    Ok(uniq)
}

/// Level → (Stayed count, Left count), with levels in natural order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub factor: String,
    pub levels: Vec<String>,
    pub counts: Vec<(usize, usize)>,
}

impl ClassDistribution {
    pub fn get(&self, level: &str) -> Option<(usize, usize)> {
        self.levels.iter().position(|l| l == level).map(|i| self.counts[i])
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|(s, l)| s + l).sum()
    }
}

pub fn class_distribution_by_level(ds: &Dataset, factor: &str) -> Result<ClassDistribution> {
    let labels = ds.labels()?;
    let per_row = factor_levels(ds, factor)?;
    let levels = sorted_levels(ds, factor, per_row.iter().cloned())?;
    let index: BTreeMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut counts = vec![(0usize, 0usize); levels.len()];
    for (lvl, label) in per_row.iter().zip(labels) {
        let c = &mut counts[index[lvl.as_str()]];
        match label {
            Label::Stayed => c.0 += 1,
            Label::Left => c.1 += 1,
        }
    }
    Ok(ClassDistribution {
        factor: factor.to_string(),
        levels,
        counts,
    })
}

/// Chi-square test of independence between a discrete column and the
/// outcome labels.
pub fn chi_square_independence(ds: &Dataset, factor: &str, outcome: &str) -> Result<ChiSquareResult> {
    if outcome != ds.outcome_name() {
        return Err(Error::InvalidInput(format!(
            "{outcome} is not the outcome column"
        )));
    }
    let dist = class_distribution_by_level(ds, factor)?;
    let table: Vec<Vec<f64>> = dist
        .counts
        .iter()
        .map(|&(s, l)| vec![s as f64, l as f64])
        .collect();
    chi_square_from_table(&table)
}

// ---------------------------------------------------------------------------
// quartiles and outliers

/// Quartile convention used for IQR fences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuartileMethod {
    /// Linear interpolation between order statistics at h = (n-1)p.
    Linear,
    /// Tukey's hinges: medians of the lower and upper halves
    /// (the median is included in both halves when n is odd).
    TukeyHinges,
}

/// Quantile of an ascending slice by linear interpolation.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_sorted(sorted: &[f64]) -> f64 {
    quantile_linear(sorted, 0.5)
}

/// (Q1, Q3) of an ascending slice.
pub fn quartiles(sorted: &[f64], method: QuartileMethod) -> (f64, f64) {
    match method {
        QuartileMethod::Linear => (quantile_linear(sorted, 0.25), quantile_linear(sorted, 0.75)),
        QuartileMethod::TukeyHinges => {
            let n = sorted.len();
            let half = n.div_ceil(2);
            (median_sorted(&sorted[..half]), median_sorted(&sorted[n - half..]))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub column: String,
    /// `None` when computed over all rows.
    pub class_label: Option<Label>,
    pub method: QuartileMethod,
    pub fences: (f64, f64),
    /// Dataset row indices whose value lies strictly outside the fences.
    pub outlier_row_indices: Vec<usize>,
}

/// Tukey fences at 1.5 IQR, per outcome class when `by_class` is set
/// (Stayed first, then Left).
pub fn iqr_outliers(
    ds: &Dataset,
    column: &str,
    by_class: bool,
    method: QuartileMethod,
) -> Result<Vec<OutlierReport>> {
    let schema = ds.column_schema(column)?;
    if !matches!(schema.role, Role::Numeric | Role::Binary) {
        return Err(Error::InvalidInput(format!("column {column} is not numeric")));
    }
    let values = ds.numeric(column)?;
    let groups: Vec<(Option<Label>, Vec<usize>)> = if by_class {
        let labels = ds.labels()?;
        [Label::Stayed, Label::Left]
            .into_iter()
            .map(|c| {
                (
                    Some(c),
                    (0..ds.n()).filter(|&i| labels[i] == c).collect(),
                )
            })
            .collect()
    } else {
        vec![(None, (0..ds.n()).collect())]
    };

    groups
        .into_iter()
        .map(|(class_label, rows)| {
            if rows.len() < 4 {
                return Err(Error::Degenerate(format!(
                    "{} rows in class {:?}; quartiles need at least 4",
                    rows.len(),
                    class_label
                )));
            }
            let mut sorted: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
            sorted.sort_by(f64::total_cmp);
            let (q1, q3) = quartiles(&sorted, method);
            let iqr = q3 - q1;
            let fences = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            let outlier_row_indices = rows
                .into_iter()
                .filter(|&i| values[i] < fences.0 || values[i] > fences.1)
                .collect();
            Ok(OutlierReport {
                column: column.to_string(),
                class_label,
                method,
                fences,
                outlier_row_indices,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// moments

/// Moment skewness g1.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Excess kurtosis g2.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Jarque-Bera normality statistic; zero for a perfectly normal shape.
pub fn jarque_bera(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let s = skewness(x);
    let k = excess_kurtosis(x);
    n / 6.0 * (s * s + k * k / 4.0)
}

// ---------------------------------------------------------------------------
// figure data

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FigureKind {
    /// Equal-width histogram of a numeric column.
    Histogram { bins: usize },
    /// Count per level of a discrete column.
    Bar,
    /// Count per level and outcome class.
    StackedBar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FigureKind,
    pub columns: Vec<String>,
}

/// A small CSV-shaped table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl FigureData {
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Compute the data behind one distribution figure.
pub fn figure_data(ds: &Dataset, spec: &FigureSpec) -> Result<FigureData> {
    let column = match spec.columns.as_slice() {
        [] => return Err(Error::InvalidInput(format!("figure {} selects no column", spec.name))),
        [c] => c.as_str(),
        _ => {
            return Err(Error::InvalidInput(format!(
                "figure {} selects {} columns; exactly one is supported",
                spec.name,
                spec.columns.len()
            )))
        }
    };
    let role = ds.column_schema(column)?.role;
    match spec.kind {
        FigureKind::Histogram { bins } => {
            if role != Role::Numeric {
                return Err(Error::InvalidInput(format!("histogram needs a numeric column, {column} is {role:?}")));
            }
            if bins == 0 {
                return Err(Error::InvalidInput("histogram needs at least one bin".into()));
            }
            let v = ds.numeric(column)?;
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
            let mut counts = vec![0usize; bins];
            for &x in v {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            Ok(FigureData {
                header: vec!["bin_lower".into(), "bin_upper".into(), "count".into()],
                rows: counts
                    .iter()
                    .enumerate()
                    .map(|(b, c)| {
                        vec![
                            format!("{}", lo + b as f64 * width),
                            format!("{}", lo + (b + 1) as f64 * width),
                            c.to_string(),
                        ]
                    })
                    .collect(),
            })
        }
        FigureKind::Bar => {
            if role == Role::Ignored {
                return Err(Error::UnknownColumn(column.to_string()));
            }
            let per_row = factor_levels(ds, column)?;
            let levels = sorted_levels(ds, column, per_row.iter().cloned())?;
            Ok(FigureData {
                header: vec!["level".into(), "count".into()],
                rows: levels
                    .iter()
                    .map(|l| vec![l.clone(), per_row.iter().filter(|r| *r == l).count().to_string()])
                    .collect(),
            })
        }
        FigureKind::StackedBar => {
            if role == Role::Outcome {
                return Err(Error::InvalidInput("stacked bar needs a factor other than the outcome".into()));
            }
            let dist = class_distribution_by_level(ds, column)?;
            Ok(FigureData {
                header: vec!["level".into(), "Stayed".into(), "Left".into(), "total".into()],
                rows: dist
                    .levels
                    .iter()
                    .zip(&dist.counts)
                    .map(|(l, &(s, f))| vec![l.clone(), s.to_string(), f.to_string(), (s + f).to_string()])
                    .collect(),
            })
        }
    }
}

/// The figure set for the churn data: four histograms, two bar charts, and
/// five class-by-level breakdowns.
pub fn churn_figures() -> Vec<FigureSpec> {
    let hist = |name: &str, col: &str| FigureSpec {
        name: name.into(),
        kind: FigureKind::Histogram { bins: 20 },
        columns: vec![col.into()],
    };
    let bar = |name: &str, col: &str, kind| FigureSpec {
        name: name.into(),
        kind,
        columns: vec![col.into()],
    };
    vec![
        hist("fig01_credit_score", "CreditScore"),
        hist("fig02_age", "Age"),
        hist("fig03_balance", "Balance"),
        hist("fig04_estimated_salary", "EstimatedSalary"),
        bar("fig05_tenure", "Tenure", FigureKind::Bar),
        bar("fig06_num_of_products", "NumOfProducts", FigureKind::Bar),
        bar("fig07_gender_by_class", "Gender", FigureKind::StackedBar),
        bar("fig08_geography_by_class", "Geography", FigureKind::StackedBar),
        bar("fig09_has_cr_card_by_class", "HasCrCard", FigureKind::StackedBar),
        bar("fig10_is_active_member_by_class", "IsActiveMember", FigureKind::StackedBar),
        bar("fig11_num_of_products_by_class", "NumOfProducts", FigureKind::StackedBar),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSchema, Dataset};

    /// Composite Simpson integration of the chi-square(1) density on
    /// [x, upper] after the substitution t = u², which removes the 1/sqrt(t)
    /// singularity: ∫ f(t) dt = ∫ 2u f(u²) du = ∫ sqrt(2/π) exp(-u²/2) du.
    fn chi1_tail_by_quadrature(x: f64) -> f64 {
        let a = x.sqrt();
        let b = 40.0;
        let n = 200_000;
        let h = (b - a) / n as f64;
        let f = |u: f64| (2.0 / std::f64::consts::PI).sqrt() * (-u * u / 2.0).exp();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let u = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        s * h / 3.0
    }

    #[test]
    fn survival_matches_quadrature_oracle() {
        let oracle = chi1_tail_by_quadrature(3.841459);
        assert!((oracle - 0.05).abs() < 1e-4);
        let s = chi_square_survival(3.841459, 1);
        assert!((s - 0.05).abs() < 1e-4);
        assert!((s - oracle).abs() < 1e-10, "{s} vs {oracle}");
        for x in [0.1, 0.47134, 1.0, 2.5, 7.0, 15.0] {
            let q = chi1_tail_by_quadrature(x);
            assert!((chi_square_survival(x, 1) - q).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn survival_closed_forms() {
        // df = 2: exp(-x/2); df = 4: exp(-x/2)(1 + x/2)
        for x in [0.01, 0.5, 1.0, 3.0, 10.0, 30.0, 80.0] {
            let e: f64 = (-x / 2.0_f64).exp();
            assert!((chi_square_survival(x, 2) - e).abs() < 1e-12);
            assert!((chi_square_survival(x, 4) - e * (1.0 + x / 2.0)).abs() < 1e-12);
        }
        for k in 1..=10 {
            assert_eq!(chi_square_survival(0.0, k), 1.0);
        }
    }

    #[test]
    fn survival_reported_p_value() {
        assert!((chi_square_survival(0.47134, 1) - 0.4924).abs() < 5e-4);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn proportional_table_is_independent() {
        let r = chi_square_from_table(&[vec![10.0, 20.0], vec![30.0, 60.0]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.df, 1);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_level_table_is_degenerate() {
        assert!(matches!(
            chi_square_from_table(&[vec![10.0, 20.0]]),
            Err(Error::Degenerate(_))
        ));
    }

    fn toy() -> Dataset {
        let schema = vec![
            ColumnSchema::categorical("g", &["a", "b"]),
            ColumnSchema::new("x", Role::Numeric),
            ColumnSchema::new("y", Role::Outcome),
        ];
        let ds = Dataset::from_columns(
            schema,
            vec![
                ColumnData::Text(["a", "a", "b", "b", "b", "a"].map(String::from).to_vec()),
                ColumnData::Numeric(vec![1.0, 2.0, 2.0, 3.0, 1.0, 1.0]),
                ColumnData::Numeric(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
            ],
        )
        .unwrap();
        crate::data::map_outcome_labels(&ds).unwrap()
    }

    #[test]
    fn class_distribution_hand_tally() {
        let d = class_distribution_by_level(&toy(), "g").unwrap();
        assert_eq!(d.levels, vec!["a", "b"]);
        // a: rows 0(L),1(S),5(S); b: rows 2(S),3(L),4(L)
        assert_eq!(d.get("a"), Some((2, 1)));
        assert_eq!(d.get("b"), Some((1, 2)));
        assert_eq!(d.total(), 6);
        let x = class_distribution_by_level(&toy(), "x").unwrap();
        assert_eq!(x.levels, vec!["1", "2", "3"]);
        assert!(class_distribution_by_level(&toy(), "nope").is_err());
    }

    #[test]
    fn correlation_self_is_one() {
        let m = pearson_correlation_matrix(&toy(), &["x", "y"]).unwrap();
        assert_eq!(m.get("x", "x"), Some(1.0));
        assert_eq!(m.values[0][1], m.values[1][0]);
    }

    #[test]
    fn correlation_zero_variance_errors() {
        let schema = vec![ColumnSchema::new("c", Role::Numeric), ColumnSchema::new("y", Role::Outcome)];
        let ds = Dataset::from_columns(
            schema,
            vec![ColumnData::Numeric(vec![2.0; 4]), ColumnData::Numeric(vec![0.0, 1.0, 0.0, 1.0])],
        )
        .unwrap();
        assert!(matches!(
            pearson_correlation_matrix(&ds, &["c", "y"]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn quartile_conventions() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quartiles(&s, QuartileMethod::Linear), (1.75, 3.25));
        assert_eq!(quartiles(&s, QuartileMethod::TukeyHinges), (1.5, 3.5));
        let s5 = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quartiles(&s5, QuartileMethod::Linear), (2.0, 4.0));
        assert_eq!(quartiles(&s5, QuartileMethod::TukeyHinges), (2.0, 4.0));
    }

    #[test]
    fn no_outliers_in_one_to_four() {
        let schema = vec![ColumnSchema::new("x", Role::Numeric), ColumnSchema::new("y", Role::Outcome)];
        let ds = Dataset::from_columns(
            schema,
            vec![ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0]), ColumnData::Numeric(vec![0.0; 4])],
        )
        .unwrap();
        let r = iqr_outliers(&ds, "x", false, QuartileMethod::Linear).unwrap();
        assert!(r[0].outlier_row_indices.is_empty());
        // by class needs labels and ≥ 4 rows per class
        let ds = crate::data::map_outcome_labels(&ds).unwrap();
        assert!(matches!(
            iqr_outliers(&ds, "x", true, QuartileMethod::Linear),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn figure_kind_mismatch_and_empty_selection() {
        let ds = toy();
        let spec = FigureSpec { name: "f".into(), kind: FigureKind::Histogram { bins: 3 }, columns: vec!["g".into()] };
        assert!(figure_data(&ds, &spec).is_err());
        let spec = FigureSpec { name: "f".into(), kind: FigureKind::Bar, columns: vec![] };
        assert!(figure_data(&ds, &spec).is_err());
    }

    #[test]
    fn stacked_bar_sums_to_level_totals() {
        let ds = toy();
        let spec = FigureSpec { name: "f".into(), kind: FigureKind::StackedBar, columns: vec!["g".into()] };
        let f = figure_data(&ds, &spec).unwrap();
        for r in &f.rows {
            let s: usize = r[1].parse().unwrap();
            let l: usize = r[2].parse().unwrap();
            assert_eq!(s + l, r[3].parse::<usize>().unwrap());
        }
        let hist = FigureSpec { name: "h".into(), kind: FigureKind::Histogram { bins: 2 }, columns: vec!["x".into()] };
        let h = figure_data(&ds, &hist).unwrap();
        let total: usize = h.rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
        assert_eq!(total, 6);
    }
}
