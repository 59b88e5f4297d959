use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mre, rmse};
use super::stats::{iqr, median, scott_knott, SkParams, SkRanking};
use crate::dataset::Dataset;
use crate::encoding::Scheme;
use crate::learners::LearnerSpec;
use crate::model::{DalConfig, DalModel, GlobalModel, Predictor};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RecipeKind {
    Dal(DalConfig),
    Global { scheme: Scheme, learner: LearnerSpec },
}

/// A named way of turning a training set into a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub kind: RecipeKind,
}

impl Recipe {
    pub fn dal(cfg: DalConfig) -> Self {
        Recipe {
            name: format!("dal-{}", cfg.learner),
            kind: RecipeKind::Dal(cfg),
        }
    }

    pub fn global(scheme: Scheme, learner: LearnerSpec) -> Self {
        Recipe {
            name: format!("global-{learner}"),
            kind: RecipeKind::Global { scheme, learner },
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn train(&self, data: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(match &self.kind {
            RecipeKind::Dal(cfg) => {
                let cfg = DalConfig { seed, ..cfg.clone() };
                Box::new(DalModel::train(data, &cfg)?)
            }
            RecipeKind::Global { scheme, learner } => Box::new(GlobalModel::train(data, *scheme, learner, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    /// Percent; `None` if every held-out actual value was zero.
    pub mre: Option<f64>,
    pub rmse: f64,
    pub skipped_zero_actual: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recipe: String,
    pub train_size: usize,
    pub seed: u64,
    pub runs: Vec<RunResult>,
}

impl EvalReport {
    pub fn mres(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.mre).collect()
    }

    pub fn rmses(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.rmse).collect()
    }

    pub fn mean_mre(&self) -> Option<f64> {
        let v = self.mres();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("recipe {}  train_size {}  seed {}\n", self.recipe, self.train_size, self.seed);
        s.push_str(&format!("{:>4}  {:>12}  {:>12}  {:>7}\n", "run", "mre%", "rmse", "skipped"));
        for r in &self.runs {
            let m = r.mre.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            s.push_str(&format!("{:>4}  {:>12}  {:>12.4}  {:>7}\n", r.run, m, r.rmse, r.skipped_zero_actual));
        }
        let mres = self.mres();
        if !mres.is_empty() {
            s.push_str(&format!(
                "mean {:.4}  median {:.4}  iqr {:.4}\n",
                self.mean_mre().unwrap_or(f64::NAN),
                median(&mres),
                iqr(&mres)
            ));
        }
        s
    }
}

/// Seed of run `run` under `master`; shared by every recipe so that runs
/// are paired.
pub fn run_seed(master: u64, run: usize) -> u64 {
    seed::derive(master, "run", run as u64)
}

/// Repeats `runs` times: out-of-sample bootstrap split, train on the sample,
/// score MRE and RMSE on the remainder. Runs execute in parallel and are
/// reported in run order.
pub fn evaluate(recipe: &Recipe, data: &Dataset, train_size: usize, runs: usize, master_seed: u64) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::invalid("at least one run is required"));
    }
    if train_size == 0 || train_size >= data.len() {
        return Err(Error::invalid(format!(
            "train size {train_size} must be in [1, {}) for {} rows",
            data.len(),
            data.len()
        )));
    }
    let results: Vec<RunResult> = (0..runs)
        .into_par_iter()
        .map(|run| one_run(recipe, data, train_size, run, run_seed(master_seed, run)).map_err(|e| Error::Run {
            run,
            source: Box::new(e),
        }))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        recipe: recipe.name.clone(),
        train_size,
        seed: master_seed,
        runs: results,
    })
}

fn one_run(recipe: &Recipe, data: &Dataset, train_size: usize, run: usize, seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let (train, test) = data.bootstrap_split(train_size, seed::derive(seed, "split", 0))?;
    let model = recipe.train(&train, seed::derive(seed, "model", 0))?;
    let actual = test.performances();
    let predicted: Vec<f64> = test
        .rows()
        .iter()
        .map(|r| model.predict(&r.config))
        .collect::<Result<_>>()?;
    let m = mre(&actual, &predicted)?;
    Ok(RunResult {
        run,
        seed,
        mre: m.value,
        rmse: rmse(&actual, &predicted)?,
        skipped_zero_actual: m.skipped,
        n_train: train.len(),
        n_test: test.len(),
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    pub ranking: SkRanking,
}

/// Evaluates every recipe on the same paired runs and ranks them by MRE.
pub fn compare(
    recipes: &[Recipe],
    data: &Dataset,
    train_size: usize,
    runs: usize,
    master_seed: u64,
    sk: SkParams,
) -> Result<Comparison> {
    if recipes.len() < 2 {
        return Err(Error::invalid("comparison needs at least two recipes"));
    }
    let reports: Vec<EvalReport> = recipes
        .iter()
        .map(|r| evaluate(r, data, train_size, runs, master_seed))
        .collect::<Result<_>>()?;
    let treatments: Vec<(String, Vec<f64>)> = reports.iter().map(|r| (r.recipe.clone(), r.mres())).collect();
    let ranking = scott_knott(&treatments, sk)?;
    Ok(Comparison { reports, ranking })
}
