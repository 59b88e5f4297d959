//! End-to-end divide-and-learn model: divide the training rows with a
//! regression tree, fit one local model per division, and route new
//! configurations to a division with a random forest.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{self, PseudoLabeledSet, RfClassifier, RfParams};
use crate::cart::{CartParams, CartTree, Division};
use crate::dataset::{self, Dataset, OptionSpec};
use crate::depth::{self, DepthSelection};
use crate::encoding::{Encoder, Scheme};
use crate::learners::{LearnerSpec, LocalModel};
use crate::{seed, Error, Result};

pub const MODEL_FORMAT: &str = "dal-model/1";

/// Smallest division kept after merging, before learner-specific minimums.
pub const MIN_DIVISION_SIZE: usize = 4;

/// Anything that maps a raw configuration to a performance estimate.
pub trait Predictor: Send + Sync {
    fn predict(&self, config: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthMode {
    Auto,
    Forced(usize),
}

impl FromStr for DepthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(DepthMode::Auto);
        }
        match s.parse::<usize>() {
            Ok(d) if d >= 1 => Ok(DepthMode::Forced(d)),
            _ => Err(Error::invalid(format!("depth must be `auto` or a positive integer, got `{s}`"))),
        }
    }
}

impl fmt::Display for DepthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthMode::Auto => f.write_str("auto"),
            DepthMode::Forced(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DalConfig {
    pub scheme: Scheme,
    pub learner: LearnerSpec,
    pub depth: DepthMode,
    pub cart: CartParams,
    pub rf: RfParams,
    pub smote_k: usize,
    /// Overrides `max(4, learner minimum)` when set.
    pub merge_min_size: Option<usize>,
    pub seed: u64,
}

impl Default for DalConfig {
    fn default() -> Self {
        DalConfig {
            scheme: Scheme::Label,
            learner: LearnerSpec::rnet(),
            depth: DepthMode::Auto,
            cart: CartParams::default(),
            rf: RfParams::default(),
            smote_k: assignment::DEFAULT_K,
            merge_min_size: None,
            seed: 0,
        }
    }
}

impl DalConfig {
    pub fn with_learner(learner: LearnerSpec) -> Self {
        DalConfig {
            learner,
            ..DalConfig::default()
        }
    }

    pub fn merge_min_size(&self, width: usize) -> usize {
        self.merge_min_size
            .unwrap_or_else(|| MIN_DIVISION_SIZE.max(self.learner.min_samples(width)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: DalConfig,
    /// Depth the divisions were cut at; `None` for a single-leaf tree.
    pub depth_used: Option<usize>,
    /// Depth chosen before clamping to the tree depth (forced mode).
    pub depth_requested: Option<usize>,
    /// True when the tree never split and one global local model is used.
    pub degenerate: bool,
    pub dataset_fingerprint: String,
    pub n_train: usize,
    pub schema: Vec<OptionSpec>,
    pub performance_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DalModel {
    pub format: String,
    pub meta: ModelMeta,
    pub encoder: Encoder,
    pub tree: CartTree,
    pub divisions: Vec<Division>,
    /// Indexed by division id.
    pub locals: Vec<LocalModel>,
    pub forest: Option<RfClassifier>,
}

/// Fits one local model per division; division `i` uses rows
/// `divisions[i].samples` and a learner seed derived from `seed` and `i`.
pub fn train_locals(
    x: &[Vec<f64>],
    y: &[f64],
    divisions: &[Division],
    learner: &LearnerSpec,
    seed: u64,
) -> Result<Vec<LocalModel>> {
    divisions
        .par_iter()
        .map(|d| {
            let xs: Vec<Vec<f64>> = d.samples.iter().map(|&i| x[i].clone()).collect();
            let ys: Vec<f64> = d.samples.iter().map(|&i| y[i]).collect();
            let spec = learner.with_seed(seed::derive(seed, "local", d.id as u64));
            LocalModel::fit(&spec, &xs, &ys)
        })
        .collect()
}

impl DalModel {
    pub fn train(train: &Dataset, cfg: &DalConfig) -> Result<DalModel> {
        cfg.learner.validate()?;
        if cfg.smote_k == 0 {
            return Err(Error::invalid("SMOTE neighbour count must be at least 1"));
        }
        let encoder = Encoder::fit(train, cfg.scheme)?;
        let x = encoder.encode_dataset(train)?;
        let y = train.performances();
        let tree = CartTree::fit(&x, &y, cfg.cart)?;

        let (depth_requested, depth_used) = match cfg.depth {
            DepthMode::Forced(d) => {
                let used = d.min(tree.depth());
                if used < d {
                    log::warn!("forced depth {d} exceeds tree depth {}; using {used}", tree.depth());
                }
                (Some(d), (used > 0).then_some(used))
            }
            DepthMode::Auto => {
                let sel = depth::adapt_depth(&tree)?;
                (sel.depth, sel.depth)
            }
        };

        let meta = ModelMeta {
            config: cfg.clone(),
            depth_used,
            depth_requested,
            degenerate: depth_used.is_none(),
            dataset_fingerprint: train.fingerprint(),
            n_train: train.len(),
            schema: train.schema().to_vec(),
            performance_name: train.performance_name().to_string(),
        };

        let Some(d) = depth_used else {
            log::info!("tree has a single leaf; falling back to one global model");
            let divisions = tree.extract_divisions(1)?;
            let locals = train_locals(&x, &y, &divisions, &cfg.learner, cfg.seed)?;
            return Ok(DalModel {
                format: MODEL_FORMAT.into(),
                meta,
                encoder,
                tree,
                divisions,
                locals,
                forest: None,
            });
        };

        let raw = tree.extract_divisions(d)?;
        let divisions = tree.merge_small_divisions(&raw, cfg.merge_min_size(encoder.output_width()))?;
        let locals = train_locals(&x, &y, &divisions, &cfg.learner, cfg.seed)?;

        let mut labels = vec![0; x.len()];
        for div in &divisions {
            for &i in &div.samples {
                labels[i] = div.id;
            }
        }
        let pseudo = PseudoLabeledSet::new(x, labels)?;
        let balanced = assignment::smote_oversample(&pseudo, cfg.smote_k, seed::derive(cfg.seed, "smote", 0));
        let forest = RfClassifier::fit(&balanced, cfg.rf, seed::derive(cfg.seed, "forest", 0))?;

        Ok(DalModel {
            format: MODEL_FORMAT.into(),
            meta,
            encoder,
            tree,
            divisions,
            locals,
            forest: Some(forest),
        })
    }

    /// Division id a configuration is routed to.
    pub fn route(&self, config: &[f64]) -> Result<usize> {
        let x = self.encode(config)?;
        self.route_encoded(&x)
    }

    fn route_encoded(&self, x: &[f64]) -> Result<usize> {
        match &self.forest {
            Some(f) => f.classify(x),
            None => Ok(0),
        }
    }

    fn encode(&self, config: &[f64]) -> Result<Vec<f64>> {
        if config.len() != self.meta.schema.len() {
            return Err(Error::Width {
                expected: self.meta.schema.len(),
                actual: config.len(),
            });
        }
        self.encoder.encode(config)
    }

    pub fn predict(&self, config: &[f64]) -> Result<f64> {
        let x = self.encode(config)?;
        let id = self.route_encoded(&x)?;
        let local = self
            .locals
            .get(id)
            .ok_or_else(|| Error::invalid(format!("classifier produced unknown division {id}")))?;
        local.predict(&x)
    }

    pub fn depth_used(&self) -> Option<usize> {
        self.meta.depth_used
    }

    pub fn is_degenerate(&self) -> bool {
        self.meta.degenerate
    }

    /// Per-depth μHV audit of the fitted tree.
    pub fn depth_selection(&self) -> Result<DepthSelection> {
        depth::adapt_depth(&self.tree)
    }

    /// Parses configurations in CSV form against the training schema.
    pub fn parse_configs(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        dataset::parse_configs(&self.meta.schema, &self.meta.performance_name, text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<DalModel> {
        let model: DalModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Dataset(format!(
                "unsupported model format `{}`, expected `{MODEL_FORMAT}`",
                model.format
            )));
        }
        if model.locals.len() != model.divisions.len() {
            return Err(Error::Dataset("model has a local model count that differs from its divisions".into()));
        }
        Ok(model)
    }
}

impl Predictor for DalModel {
    fn predict(&self, config: &[f64]) -> Result<f64> {
        DalModel::predict(self, config)
    }
}

/// A single local learner trained on every row, the baseline DaL is
/// compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub encoder: Encoder,
    pub model: LocalModel,
}

impl GlobalModel {
    pub fn train(train: &Dataset, scheme: Scheme, learner: &LearnerSpec, seed: u64) -> Result<Self> {
        let encoder = Encoder::fit(train, scheme)?;
        let x = encoder.encode_dataset(train)?;
        let spec = learner.with_seed(seed::derive(seed, "local", 0));
        let model = LocalModel::fit(&spec, &x, &train.performances())?;
        Ok(GlobalModel { encoder, model })
    }
}

impl Predictor for GlobalModel {
    fn predict(&self, config: &[f64]) -> Result<f64> {
        self.model.predict(&self.encoder.encode(config)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data() -> Dataset {
        let configs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 2) as f64, (i % 5) as f64]).collect();
        let perfs = configs.iter().map(|c| if c[0] == 0.0 { 100.0 } else { 1.0 }).collect();
        Dataset::from_numeric(&["a", "b"], configs, perfs).unwrap()
    }

    #[test]
    fn step_function_is_learned_exactly() {
        let ds = step_data();
        let m = DalModel::train(&ds, &DalConfig::with_learner(LearnerSpec::linear())).unwrap();
        assert_eq!(m.depth_used(), Some(1));
        assert_eq!(m.divisions.len(), 2);
        for r in ds.rows() {
            assert!((m.predict(&r.config).unwrap() - r.performance).abs() < 1e-6);
        }
        assert!((m.predict(&[0.0, 3.0]).unwrap() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn constant_data_degenerates() {
        let ds = Dataset::from_numeric(&["a"], (0..6).map(|i| vec![i as f64]).collect(), vec![42.0; 6]).unwrap();
        let m = DalModel::train(&ds, &DalConfig::with_learner(LearnerSpec::linear())).unwrap();
        assert!(m.is_degenerate());
        assert!(m.forest.is_none());
        assert!((m.predict(&[17.0]).unwrap() - 42.0).abs() < 1e-9);
    }

    #[test]
    fn forced_depth_is_respected() {
        let configs: Vec<Vec<f64>> = (0..32).map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64, (i / 4) as f64]).collect();
        let perfs = configs.iter().map(|c| 1.0 + 10.0 * c[0] + 100.0 * c[1] + c[2] * c[2]).collect();
        let ds = Dataset::from_numeric(&["a", "b", "c"], configs, perfs).unwrap();
        let cfg = DalConfig {
            depth: DepthMode::Forced(3),
            merge_min_size: Some(1),
            ..DalConfig::with_learner(LearnerSpec::cart())
        };
        let m = DalModel::train(&ds, &cfg).unwrap();
        assert_eq!(m.depth_used(), Some(3));
        assert!(m.divisions.len() >= 4 && m.divisions.len() <= 8);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let m = DalModel::train(&step_data(), &DalConfig::with_learner(LearnerSpec::linear())).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(Error::Width { .. })));
    }

    #[test]
    fn json_round_trip() {
        let ds = step_data();
        let m = DalModel::train(&ds, &DalConfig::with_learner(LearnerSpec::linear())).unwrap();
        let back = DalModel::from_json(&m.to_json().unwrap()).unwrap();
        for r in ds.rows() {
            assert_eq!(back.predict(&r.config).unwrap(), m.predict(&r.config).unwrap());
        }
        let tampered = m.to_json().unwrap().replace(MODEL_FORMAT, "dal-model/0");
        assert!(DalModel::from_json(&tampered).is_err());
    }

    #[test]
    fn depth_mode_parsing() {
        assert_eq!("auto".parse::<DepthMode>().unwrap(), DepthMode::Auto);
        assert_eq!("3".parse::<DepthMode>().unwrap(), DepthMode::Forced(3));
        assert!("0".parse::<DepthMode>().is_err());
        assert!("deep".parse::<DepthMode>().is_err());
    }
}
