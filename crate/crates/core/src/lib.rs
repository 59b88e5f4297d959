//! Divide-and-learn performance modelling for configurable software.
//!
//! Training samples are split into locally smooth divisions by a regression
//! tree, the division depth is picked with the averaging hypervolume (μHV) of
//! each candidate depth, one isolated local regressor is fitted per division,
//! and new configurations are routed to a division by a SMOTE-balanced random
//! forest. The [`eval`] module carries the evaluation protocol: MRE/RMSE,
//! repeated out-of-sample bootstrap runs and Scott-Knott ranking with Â12.

pub mod assignment;
pub mod cart;
pub mod dataset;
pub mod depth;
pub mod encoding;
mod error;
pub mod eval;
pub mod learners;
pub mod model;
pub mod seed;

pub use error::{Error, Result};

pub use assignment::{PseudoLabeledSet, RfClassifier, RfParams};
pub use cart::{CartParams, CartTree, Division};
pub use dataset::{Dataset, OptionKind, OptionSpec, Sample};
pub use depth::{DepthCandidate, DepthSelection, ReferencePoint};
pub use encoding::{Encoder, Scheme};
pub use eval::{EvalReport, Recipe, SkRanking};
pub use learners::{LearnerSpec, LocalModel, NetParams};
pub use model::{DalConfig, DalModel, DepthMode, Predictor};
