//! Local regressors trained on one division each.

pub mod linear;
pub mod net;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cart::{CartParams, CartTree};
use crate::{Error, Result};

pub use linear::LinearModel;
pub use net::{NetModel, NetParams};

/// Hidden-layer sizes and L1 strengths tried when an rnet learner is tuned.
pub const RNET_HIDDEN_GRID: [usize; 2] = [8, 16];
pub const RNET_LAMBDA_GRID: [f64; 3] = [0.0, 0.01, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Linear {
        /// Ridge strength used only when the plain fit is singular.
        ridge: f64,
    },
    Cart {
        min_leaf: usize,
        max_depth: usize,
    },
    Rnet {
        #[serde(flatten)]
        params: NetParams,
        /// Pick `hidden_units` and `l1_lambda` from the fixed grid by
        /// lowest training error.
        tune: bool,
    },
}

impl LearnerSpec {
    pub fn linear() -> Self {
        LearnerSpec::Linear {
            ridge: linear::FALLBACK_RIDGE,
        }
    }

    pub fn cart() -> Self {
        let p = CartParams::default();
        LearnerSpec::Cart {
            min_leaf: p.min_leaf,
            max_depth: p.max_depth,
        }
    }

    pub fn rnet() -> Self {
        LearnerSpec::Rnet {
            params: NetParams::default(),
            tune: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Linear { .. } => "linear",
            LearnerSpec::Cart { .. } => "cart",
            LearnerSpec::Rnet { .. } => "rnet",
        }
    }

    /// Same spec with the network seed replaced; other kinds are unchanged.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            LearnerSpec::Rnet { mut params, tune } => {
                params.seed = seed;
                LearnerSpec::Rnet { params, tune }
            }
            other => other,
        }
    }

    /// Fewest rows a division needs for this learner on `width` features.
    pub fn min_samples(&self, width: usize) -> usize {
        match self {
            LearnerSpec::Linear { .. } => width + 1,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearnerSpec::Linear { ridge } => ridge > 0.0 && ridge.is_finite(),
            LearnerSpec::Cart { min_leaf, max_depth } => min_leaf >= 1 && max_depth >= 1,
            LearnerSpec::Rnet { params, .. } => {
                params.hidden_units >= 1
                    && params.epochs >= 1
                    && params.learning_rate > 0.0
                    && params.learning_rate.is_finite()
                    && params.l1_lambda >= 0.0
                    && params.l1_lambda.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid {} hyperparameters: {self:?}", self.name())))
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LearnerSpec::linear()),
            "cart" => Ok(LearnerSpec::cart()),
            "rnet" => Ok(LearnerSpec::rnet()),
            other => Err(Error::invalid(format!("unknown learner `{other}`"))),
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalKind {
    Constant { value: f64 },
    Linear(LinearModel),
    Cart { tree: CartTree },
    Rnet(NetModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub width: usize,
    pub model: LocalKind,
}

impl LocalModel {
    pub fn fit(spec: &LearnerSpec, x: &[Vec<f64>], y: &[f64]) -> Result<LocalModel> {
        spec.validate()?;
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid(format!(
                "local model needs matching non-empty inputs, got {} rows and {} targets",
                x.len(),
                y.len()
            )));
        }
        let width = x[0].len();
        if width == 0 {
            return Err(Error::invalid("local model needs at least one feature"));
        }
        if let Some(r) = x.iter().find(|r| r.len() != width) {
            return Err(Error::Width {
                expected: width,
                actual: r.len(),
            });
        }
        let model = match *spec {
            LearnerSpec::Linear { .. } | LearnerSpec::Rnet { .. } if x.len() == 1 => {
                log::debug!("single-sample {} fit degenerates to a constant", spec.name());
                LocalKind::Constant { value: y[0] }
            }
            LearnerSpec::Linear { ridge } => LocalKind::Linear(LinearModel::fit(x, y, ridge)),
            LearnerSpec::Cart { min_leaf, max_depth } => LocalKind::Cart {
                tree: CartTree::fit(x, y, CartParams { min_leaf, max_depth })?,
            },
            LearnerSpec::Rnet { params, tune: false } => LocalKind::Rnet(NetModel::fit(x, y, params)),
            LearnerSpec::Rnet { params, tune: true } => LocalKind::Rnet(fit_tuned(x, y, params)),
        };
        Ok(LocalModel { width, model })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width {
            return Err(Error::Width {
                expected: self.width,
                actual: x.len(),
            });
        }
        Ok(match &self.model {
            LocalKind::Constant { value } => *value,
            LocalKind::Linear(m) => m.predict(x),
            LocalKind::Cart { tree } => tree.predict(x)?,
            LocalKind::Rnet(m) => m.predict(x),
        })
    }
}

fn fit_tuned(x: &[Vec<f64>], y: &[f64], base: NetParams) -> NetModel {
    let mut best: Option<(f64, NetModel)> = None;
    for &hidden_units in &RNET_HIDDEN_GRID {
        for &l1_lambda in &RNET_LAMBDA_GRID {
            let m = NetModel::fit(
                x,
                y,
                NetParams {
                    hidden_units,
                    l1_lambda,
                    ..base
                },
            );
            let err = m.training_mse(x, y);
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, m));
            }
        }
    }
    best.expect("grid is non-empty").1
}
