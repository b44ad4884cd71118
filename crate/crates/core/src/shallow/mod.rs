//! Shallow learners on tabular features.
//!
//! Every model applies the same training-time chain: drop near-constant
//! features, standardize, then balance classes with SMOTE. The fitted mask
//! and statistics travel with the model and are reapplied at prediction.

mod kernel;
mod linear;
mod prep;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kernel::{gamma_scale, RbfSvm};
pub use linear::{fit_linear_svm, fit_logistic, Linear, Platt};
pub use prep::{
    select_columns, smote, variance_filter, FeaturePrep, Standardizer, SMOTE_NEIGHBORS,
    VARIANCE_THRESHOLD,
};
pub use tree::{AdaBoost, Criterion, GradientBoosting, RandomForest, Tree, TreeParams};

/// Labeled design matrix. Label 1 means slowing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(x: Array2<f64>, y: Vec<u8>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if !names.is_empty() && names.len() != x.ncols() {
            return Err(Error::invalid(format!("{} columns but {} names", x.ncols(), names.len())));
        }
        if let Some(l) = y.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {l} is not binary")));
        }
        Ok(FeatureMatrix { x, y, names })
    }

    /// Builds from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>, names: Vec<String>) -> Result<Self> {
        let d = rows.first().map_or(names.len(), Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let x = Array2::from_shape_vec((rows.len(), d), rows.concat())
            .map_err(|e| Error::invalid(e.to_string()))?;
        FeatureMatrix::new(x, y, names)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShallowKind {
    Lr,
    SvmLinear,
    SvmRbf,
    Gb,
    AdaBoost,
    Rf,
}

impl ShallowKind {
    pub const ALL: [ShallowKind; 6] = [
        ShallowKind::Lr,
        ShallowKind::SvmLinear,
        ShallowKind::SvmRbf,
        ShallowKind::Gb,
        ShallowKind::AdaBoost,
        ShallowKind::Rf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShallowKind::Lr => "lr",
            ShallowKind::SvmLinear => "svm_linear",
            ShallowKind::SvmRbf => "svm_rbf",
            ShallowKind::Gb => "gb",
            ShallowKind::AdaBoost => "adaboost",
            ShallowKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ShallowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShallowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        Ok(match key.as_str() {
            "lr" | "logistic" | "logisticregression" => ShallowKind::Lr,
            "svmlinear" | "linearsvm" => ShallowKind::SvmLinear,
            "svmrbf" | "svm" | "rbfsvm" => ShallowKind::SvmRbf,
            "gb" | "gradientboosting" => ShallowKind::Gb,
            "adaboost" | "ada" => ShallowKind::AdaBoost,
            "rf" | "randomforest" => ShallowKind::Rf,
            _ => return Err(Error::invalid(format!("unknown shallow learner {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Learner {
    Lr { model: Linear },
    SvmLinear { model: Linear, platt: Platt },
    SvmRbf { model: RbfSvm, platt: Platt },
    Gb { model: GradientBoosting },
    AdaBoost { model: AdaBoost },
    Rf { model: RandomForest },
}

impl Learner {
    fn score(&self, z: &[f64]) -> f64 {
        match self {
            Learner::Lr { model } => linear::sigmoid(model.margin(z)),
            Learner::SvmLinear { model, platt } => platt.apply(model.margin(z)),
            Learner::SvmRbf { model, platt } => platt.apply(model.decision(z)),
            Learner::Gb { model } => model.score(z),
            Learner::AdaBoost { model } => model.score(z),
            Learner::Rf { model } => model.score(z),
        }
    }
}

/// Training data after the full chain, kept for inspection.
#[derive(Debug, Clone)]
pub struct PreparedTraining {
    pub prep: FeaturePrep,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

fn check_finite(x: impl IntoIterator<Item = f64>) -> Result<()> {
    if x.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite feature value"))
    }
}

fn check_classes(y: &[u8]) -> Result<()> {
    for class in [0u8, 1] {
        if !y.contains(&class) {
            return Err(Error::SingleClass(class));
        }
    }
    Ok(())
}

/// Variance filter, standardization and SMOTE, in that order.
pub fn prepare_training(data: &FeatureMatrix, seed: u64) -> Result<PreparedTraining> {
    check_classes(&data.y)?;
    check_finite(data.x.iter().copied())?;
    let prep = FeaturePrep::fit(&data.x)?;
    let z = prep.transform(&data.x);
    let (x, y) = smote(&z, &data.y, SMOTE_NEIGHBORS, seed)?;
    Ok(PreparedTraining { prep, x, y })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowModel {
    pub kind: ShallowKind,
    pub feature_names: Vec<String>,
    pub prep: FeaturePrep,
    pub learner: Learner,
}

impl ShallowModel {
    pub fn fit(kind: ShallowKind, data: &FeatureMatrix, seed: u64) -> Result<ShallowModel> {
        let t = prepare_training(data, seed)?;
        let learner_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let learner = match kind {
            ShallowKind::Lr => Learner::Lr { model: fit_logistic(&t.x, &t.y) },
            ShallowKind::SvmLinear => {
                let model = fit_linear_svm(&t.x, &t.y, learner_seed);
                let platt = Platt::fit(&linear::row_margins(&model, &t.x), &t.y);
                Learner::SvmLinear { model, platt }
            }
            ShallowKind::SvmRbf => {
                let model = RbfSvm::fit(&t.x, &t.y, learner_seed);
                let margins: Vec<f64> =
                    t.x.rows().into_iter().map(|r| model.decision(r.as_slice().expect("contiguous"))).collect();
                let platt = Platt::fit(&margins, &t.y);
                Learner::SvmRbf { model, platt }
            }
            ShallowKind::Gb => Learner::Gb { model: GradientBoosting::fit(&t.x, &t.y, learner_seed) },
            ShallowKind::AdaBoost => Learner::AdaBoost { model: AdaBoost::fit(&t.x, &t.y, learner_seed) },
            ShallowKind::Rf => Learner::Rf { model: RandomForest::fit(&t.x, &t.y, learner_seed) },
        };
        Ok(ShallowModel { kind, feature_names: data.names.clone(), prep: t.prep, learner })
    }

    pub fn n_inputs(&self) -> usize {
        self.prep.n_inputs()
    }

    /// Probability-like score of class 1, in [0, 1].
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_inputs() {
            return Err(Error::ModelInputMismatch {
                expected: format!("{} features", self.n_inputs()),
                found: format!("{} features", x.len()),
            });
        }
        check_finite(x.iter().copied())?;
        let z = self.prep.transform_row(x);
        Ok(self.learner.score(&z).clamp(0.0, 1.0))
    }

    pub fn predict_scores(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict_score(&r.to_vec())).collect()
    }
}
