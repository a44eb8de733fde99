//! Secondary classifiers over feature rows.

mod adaboost;
mod forest;
mod metrics;
mod svm;
mod tree;

pub use adaboost::{ada_fit, ada_fit_traced, ada_predict, AdaBoostModel, AdaParams, Round, Stump};
pub use forest::{rf_fit, rf_predict, ForestParams, RandomForest};
pub use metrics::{accuracy, log_loss};
pub use svm::{platt_fit, svm_fit, svm_predict, SvmModel, SvmParams};
pub use tree::{fit_tree, DecisionTree, Node, TreeParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Rf,
    Ada,
    Svm,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Rf => "rf",
            ClassifierKind::Ada => "ada",
            ClassifierKind::Svm => "svm",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ClassifierKind::Rf),
            "ada" => Ok(ClassifierKind::Ada),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(Error::Config(format!(
                "unknown classifier kind {other:?} (expected rf, ada or svm)"
            ))),
        }
    }
}

/// Hyperparameters for every classifier kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub forest: ForestParams,
    pub ada: AdaParams,
    pub svm: SvmParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SecondaryModel {
    Forest(RandomForest),
    Ada(AdaBoostModel),
    Svm(SvmModel),
}

impl SecondaryModel {
    pub fn fit(kind: ClassifierKind, x: &[Vec<f64>], y: &[u8], params: &ClassifierParams) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Rf => SecondaryModel::Forest(rf_fit(x, y, &params.forest)?),
            ClassifierKind::Ada => SecondaryModel::Ada(ada_fit(x, y, &params.ada)?),
            ClassifierKind::Svm => SecondaryModel::Svm(svm_fit(x, y, &params.svm)?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            SecondaryModel::Forest(_) => ClassifierKind::Rf,
            SecondaryModel::Ada(_) => ClassifierKind::Ada,
            SecondaryModel::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        match self {
            SecondaryModel::Forest(m) => m.predict_proba(row),
            SecondaryModel::Ada(m) => m.predict_proba(row),
            SecondaryModel::Svm(m) => m.predict_proba(row),
        }
    }
}
