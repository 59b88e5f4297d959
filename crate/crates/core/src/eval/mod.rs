//! Accuracy metrics, the repeated bootstrap evaluation protocol and
//! Scott-Knott ranking.

mod harness;
pub mod metrics;
pub mod stats;

pub use harness::{compare, evaluate, run_seed, Comparison, EvalReport, Recipe, RecipeKind, RunResult};
pub use metrics::{mre, rmse, Mre};
pub use stats::{a12, scott_knott, SkGroup, SkParams, SkRanking, TreatmentSummary};
