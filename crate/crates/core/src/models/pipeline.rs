//! Per-family preprocessing fitted on training rows, bundled with the model.

use serde::{Deserialize, Serialize};

use super::{fit_model, Family, FittedModel, ModelSpec};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::label_for_score;
use crate::preprocess::{
    apply_power_transform, apply_scaler, fit_power_transform, fit_scaler, FeatureKind, FeatureTable,
    Fingerprint, PowerTransformSpec, ScaleKind, ScalerSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    /// Encoded values as they are.
    Raw,
    /// Yeo-Johnson on continuous columns.
    YeoJohnson,
    ZScore,
    MinMax,
}

impl Preprocessing {
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Gnb => Preprocessing::YeoJohnson,
            Family::Knn | Family::Svm => Preprocessing::ZScore,
            Family::Ann => Preprocessing::MinMax,
            Family::Cart | Family::Rf => Preprocessing::Raw,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum FittedStep {
    Power(PowerTransformSpec),
    Scale(ScalerSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub input: Fingerprint,
    pub preprocessing: Preprocessing,
    pub steps: Vec<FittedStep>,
    pub model: FittedModel,
}

impl FittedPipeline {
    /// Fit preprocessing on `train` (encoded, untransformed) and then the model.
    pub fn fit(spec: &ModelSpec, train: &FeatureTable) -> Result<Self> {
        Self::fit_with(spec, train, Preprocessing::for_family(spec.family))
    }

    pub fn fit_with(spec: &ModelSpec, train: &FeatureTable, preprocessing: Preprocessing) -> Result<Self> {
        if train.transform() != "raw" {
            return Err(Error::InvalidInput(format!(
                "pipeline expects untransformed features, got {}",
                train.transform()
            )));
        }
        let steps = match preprocessing {
            Preprocessing::Raw => vec![],
            Preprocessing::YeoJohnson => {
                let cols: Vec<String> = train
                    .names()
                    .iter()
                    .zip(train.kinds())
                    .filter(|(_, k)| **k == FeatureKind::Continuous)
                    .map(|(n, _)| n.clone())
                    .collect();
                vec![FittedStep::Power(fit_power_transform(train, &cols)?)]
            }
            Preprocessing::ZScore => vec![FittedStep::Scale(fit_scaler(train, ScaleKind::ZScore)?)],
            Preprocessing::MinMax => vec![FittedStep::Scale(fit_scaler(train, ScaleKind::MinMax)?)],
        };
        let transformed = apply_steps(&steps, train)?;
        let model = fit_model(spec, &transformed)?;
        Ok(FittedPipeline {
            input: train.fingerprint(),
            preprocessing,
            steps,
            model,
        })
    }

    /// Apply the fitted preprocessing to an encoded table.
    pub fn transform(&self, table: &FeatureTable) -> Result<FeatureTable> {
        let found = table.fingerprint();
        if found != self.input {
            return Err(Error::Fingerprint {
                expected: self.input.to_string(),
                found: found.to_string(),
            });
        }
        apply_steps(&self.steps, table)
    }

    pub fn predict_scores(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        self.model.predict_scores(&self.transform(table)?)
    }

    pub fn predict_labels(&self, table: &FeatureTable) -> Result<Vec<Label>> {
        Ok(self.predict_scores(table)?.into_iter().map(label_for_score).collect())
    }

    pub fn family(&self) -> Family {
        self.model.family()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FittedPipeline = serde_json::from_str(s)?;
        if p.model.version != super::MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "model format version {} is not supported",
                p.model.version
            )));
        }
        Ok(p)
    }
}

fn apply_steps(steps: &[FittedStep], table: &FeatureTable) -> Result<FeatureTable> {
    let mut t = table.clone();
    for step in steps {
        t = match step {
            FittedStep::Power(p) => apply_power_transform(p, &t)?,
            FittedStep::Scale(s) => apply_scaler(s, &t)?,
        };
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;
    use rand::Rng;

    fn table(seed: u64) -> FeatureTable {
        let mut rng = crate::seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![rng.gen_range(300.0..900.0), rng.gen_range(0.0..250_000.0)])
            .collect();
        let labels = rows
            .iter()
            .map(|r| if r[0] < 500.0 { crate::data::Label::Left } else { crate::data::Label::Stayed })
            .collect();
        FeatureTable::from_rows(&["score", "balance"], &rows, labels).unwrap()
    }

    #[test]
    fn every_family_round_trips_through_json() {
        let train = table(1);
        let test = table(2);
        for family in Family::ALL {
            let spec = ModelSpec::new(family, 5).with_defaults_for_tests();
            let p = FittedPipeline::fit(&spec, &train).unwrap();
            let back = FittedPipeline::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(p.predict_scores(&test).unwrap(), back.predict_scores(&test).unwrap(), "{family}");
            let s = p.predict_scores(&test).unwrap();
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)), "{family}");
        }
    }

    #[test]
    fn scaling_matters_for_knn_only_through_pipeline() {
        let train = table(3);
        let p = FittedPipeline::fit(&ModelSpec::new(Family::Knn, 0), &train).unwrap();
        assert_eq!(p.model.fingerprint.transform, "raw+zscore");
        // the raw-trained model rejects a scaled table and vice versa
        assert!(p.model.predict_scores(&train).is_err());
        assert!(p.predict_scores(&train).is_ok());
    }

    #[test]
    fn rejects_other_columns() {
        let train = table(4);
        let p = FittedPipeline::fit(&ModelSpec::new(Family::Cart, 0), &train).unwrap();
        let other = train.select_columns(&["score".to_string()]).unwrap();
        assert!(matches!(p.predict_scores(&other), Err(Error::Fingerprint { .. })));
    }

    impl ModelSpec {
        fn with_defaults_for_tests(self) -> Self {
            match self.family {
                Family::Rf => self.with("n_trees", 25.0),
                _ => self,
            }
        }
    }
}
