use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dal_core::dataset::KindOverrides;
use dal_core::depth::adapt_depth;
use dal_core::eval::{compare, evaluate, SkParams};
use dal_core::learners::NetParams;
use dal_core::{
    CartParams, CartTree, DalConfig, DalModel, Dataset, DepthMode, Encoder, Error, LearnerSpec, Recipe, Scheme,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dal", version, about = "Divide-and-learn performance models for configurable software")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Predict performance for a CSV of configurations.
    Predict(PredictArgs),
    /// Repeated bootstrap evaluation of one recipe.
    Evaluate(EvalArgs),
    /// Evaluate several recipes on paired runs and rank them with Scott-Knott.
    Compare(CompareArgs),
    /// Dump (h, z, μHV) of the divisions at every candidate depth.
    InspectDivisions(InspectArgs),
    /// Write the encoded feature matrix of a dataset.
    Encode(EncodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerKind {
    Linear,
    Cart,
    Rnet,
}

#[derive(Args)]
struct DataArgs {
    /// Measurements CSV: option columns, performance last.
    #[arg(long)]
    data: PathBuf,
    /// JSON file forcing option kinds: {"kinds": {"name": "categorical"}}.
    #[arg(long)]
    kinds: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Master seed; every random draw is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "label", value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long, value_enum, default_value = "rnet")]
    learner: LearnerKind,
    /// `auto` or a fixed division depth.
    #[arg(long, default_value = "auto", value_parser = parse_depth)]
    depth: DepthMode,
    /// Minimum rows per leaf of the dividing tree.
    #[arg(long, default_value_t = CartParams::default().min_leaf)]
    min_leaf: usize,
    /// Maximum depth of the dividing tree.
    #[arg(long, default_value_t = CartParams::default().max_depth)]
    max_depth: usize,
    /// Divisions smaller than this are merged into their parent.
    #[arg(long)]
    merge_min_size: Option<usize>,
    /// Trees in the assignment forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Neighbours used by SMOTE.
    #[arg(long, default_value_t = dal_core::assignment::DEFAULT_K)]
    smote_k: usize,
    /// rnet hidden units (disables tuning when set).
    #[arg(long)]
    hidden: Option<usize>,
    /// rnet L1 strength (disables tuning when set).
    #[arg(long)]
    l1: Option<f64>,
    /// rnet learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// rnet training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Configurations CSV with the training header; a performance column is ignored.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalOpts {
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long)]
    train_size: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    eval: EvalOpts,
    /// Evaluate a single global learner instead of DaL.
    #[arg(long)]
    global: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    eval: EvalOpts,
    /// `dal:<learner>` or `global:<learner>`; repeat for each recipe.
    #[arg(long = "recipe", required = true, num_args = 1)]
    recipes: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "label", value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long, default_value_t = CartParams::default().min_leaf)]
    min_leaf: usize,
    #[arg(long, default_value_t = CartParams::default().max_depth)]
    max_depth: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "label", value_parser = parse_scheme)]
    scheme: Scheme,
    /// Encode these configurations with the encoder fitted on `--data`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_depth(s: &str) -> Result<DepthMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                e if e.is_data_error() => EXIT_DATA,
                Error::InvalidArgument(_) => EXIT_USAGE,
                Error::Run { source, .. } if matches!(**source, Error::InvalidArgument(_)) => EXIT_USAGE,
                _ => EXIT_INTERNAL,
            })
        }
    }
}

fn run(cli: Cli) -> dal_core::Result<()> {
    let jobs = match &cli.command {
        Command::Train(a) => a.common.jobs,
        Command::Predict(a) => a.common.jobs,
        Command::Evaluate(a) => a.common.jobs,
        Command::Compare(a) => a.common.jobs,
        Command::InspectDivisions(a) => a.common.jobs,
        Command::Encode(a) => a.common.jobs,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> dal_core::Result<()> {
    match command {
        Command::Train(a) => {
            let ds = load(&a.data)?;
            let cfg = a.model.config(a.common.seed)?;
            let model = DalModel::train(&ds, &cfg)?;
            log::info!("trained {} divisions at depth {:?}", model.divisions.len(), model.depth_used());
            emit(&a.common.out, &model.to_json()?)
        }
        Command::Predict(a) => {
            let text = read(&a.model)?;
            let model = DalModel::from_json(&text)?;
            let configs = model.parse_configs(&read(&a.input)?)?;
            let mut s = format!("{}\n", model.meta.performance_name);
            for c in &configs {
                s.push_str(&format!("{}\n", model.predict(c)?));
            }
            emit(&a.common.out, &s)
        }
        Command::Evaluate(a) => {
            let ds = load(&a.data)?;
            let recipe = if a.global {
                Recipe::global(a.model.scheme, a.model.learner_spec()?)
            } else {
                Recipe::dal(a.model.config(a.common.seed)?)
            };
            let report = evaluate(&recipe, &ds, a.eval.train_size, a.eval.runs, a.common.seed)?;
            let text = match a.eval.format {
                Format::Json => to_json(&report)?,
                Format::Table => report.to_table(),
            };
            emit(&a.common.out, &text)
        }
        Command::Compare(a) => {
            let ds = load(&a.data)?;
            let recipes = a
                .recipes
                .iter()
                .map(|r| recipe_from(r, &a.model, a.common.seed))
                .collect::<dal_core::Result<Vec<_>>>()?;
            let sk = SkParams {
                seed: dal_core::seed::derive(a.common.seed, "scott-knott", 0),
                ..SkParams::default()
            };
            let c = compare(&recipes, &ds, a.eval.train_size, a.eval.runs, a.common.seed, sk)?;
            let text = match a.eval.format {
                Format::Json => to_json(&c)?,
                Format::Table => c.ranking.to_table(),
            };
            emit(&a.common.out, &text)
        }
        Command::InspectDivisions(a) => {
            let ds = load(&a.data)?;
            let enc = Encoder::fit(&ds, a.scheme)?;
            let params = CartParams {
                min_leaf: a.min_leaf,
                max_depth: a.max_depth,
            };
            let tree = CartTree::fit_dataset(&ds, &enc, params)?;
            let sel = adapt_depth(&tree)?;
            let text = match a.format {
                Format::Json => to_json(&json!({
                    "tree_depth": tree.depth(),
                    "selected": sel.depth,
                    "reference": sel.reference,
                    "candidates": sel.candidates.iter().map(|c| json!({
                        "d": c.d,
                        "mu_hv": c.mu_hv,
                        "divisions": c.divisions.iter().map(|d| json!({
                            "id": d.id, "n": d.n, "h": d.h, "z": d.z,
                        })).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                }))?,
                Format::Table => {
                    let mut s = format!("{:>3}  {:>8}  {:>6}  {:>14}  {:>8}  {:>14}\n", "d", "division", "n", "h", "z", "mu_hv");
                    for c in &sel.candidates {
                        for d in &c.divisions {
                            s.push_str(&format!(
                                "{:>3}  {:>8}  {:>6}  {:>14.4}  {:>8}  {:>14.4}\n",
                                c.d, d.id, d.n, d.h, d.z, c.mu_hv
                            ));
                        }
                    }
                    match sel.depth {
                        Some(d) => s.push_str(&format!("selected depth {d}\n")),
                        None => s.push_str("tree has no split\n"),
                    }
                    s
                }
            };
            emit(&a.common.out, &text)
        }
        Command::Encode(a) => {
            let ds = load(&a.data)?;
            let enc = Encoder::fit(&ds, a.scheme)?;
            let rows = match &a.input {
                Some(p) => enc.encode_all(&ds.parse_configs(&read(p)?)?)?,
                None => enc.encode_dataset(&ds)?,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(enc.feature_names())?;
            for r in &rows {
                w.write_record(r.iter().map(|v| v.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
            emit(&a.common.out, &String::from_utf8_lossy(&bytes))
        }
    }
}

impl ModelArgs {
    fn learner_spec(&self) -> dal_core::Result<LearnerSpec> {
        self.spec_for(self.learner)
    }

    fn spec_for(&self, kind: LearnerKind) -> dal_core::Result<LearnerSpec> {
        let spec = match kind {
            LearnerKind::Linear => LearnerSpec::linear(),
            LearnerKind::Cart => LearnerSpec::cart(),
            LearnerKind::Rnet => {
                let d = NetParams::default();
                LearnerSpec::Rnet {
                    params: NetParams {
                        hidden_units: self.hidden.unwrap_or(d.hidden_units),
                        l1_lambda: self.l1.unwrap_or(d.l1_lambda),
                        learning_rate: self.lr.unwrap_or(d.learning_rate),
                        epochs: self.epochs.unwrap_or(d.epochs),
                        ..d
                    },
                    tune: self.hidden.is_none() && self.l1.is_none(),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    fn config_for(&self, kind: LearnerKind, seed: u64) -> dal_core::Result<DalConfig> {
        if self.min_leaf == 0 || self.max_depth == 0 {
            return Err(Error::invalid("--min-leaf and --max-depth must be at least 1"));
        }
        if self.trees == 0 || self.smote_k == 0 || self.merge_min_size == Some(0) {
            return Err(Error::invalid("--trees, --smote-k and --merge-min-size must be at least 1"));
        }
        let defaults = DalConfig::default();
        Ok(DalConfig {
            scheme: self.scheme,
            learner: self.spec_for(kind)?,
            depth: self.depth,
            cart: CartParams {
                min_leaf: self.min_leaf,
                max_depth: self.max_depth,
            },
            rf: dal_core::RfParams {
                n_trees: self.trees,
                ..defaults.rf
            },
            smote_k: self.smote_k,
            merge_min_size: self.merge_min_size,
            seed,
        })
    }

    fn config(&self, seed: u64) -> dal_core::Result<DalConfig> {
        self.config_for(self.learner, seed)
    }
}

fn recipe_from(text: &str, model: &ModelArgs, seed: u64) -> dal_core::Result<Recipe> {
    let (kind, learner) = text
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("recipe `{text}` must look like dal:<learner> or global:<learner>")))?;
    let learner = LearnerKind::from_str(learner, true)
        .map_err(|_| Error::invalid(format!("unknown learner `{learner}` in recipe `{text}`")))?;
    match kind {
        "dal" => Ok(Recipe::dal(model.config_for(learner, seed)?)),
        "global" => Ok(Recipe::global(model.scheme, model.spec_for(learner)?)),
        _ => Err(Error::invalid(format!("unknown recipe kind `{kind}` in `{text}`"))),
    }
}

fn load(args: &DataArgs) -> dal_core::Result<Dataset> {
    let overrides = match &args.kinds {
        Some(p) => KindOverrides::from_path(p)?,
        None => KindOverrides::default(),
    };
    Dataset::load_csv_with(&args.data, &overrides)
}

fn read(path: &Path) -> dal_core::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> dal_core::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn emit(out: &Option<PathBuf>, text: &str) -> dal_core::Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}
