use dal_core::eval::{compare, evaluate, run_seed, SkParams};
use dal_core::model::train_locals;
use dal_core::{CartParams, CartTree, DalConfig, DalModel, Dataset, DepthMode, Encoder, LearnerSpec, Recipe, Scheme};

fn sparse_data(n: usize) -> Dataset {
    let configs: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![(i % 2) as f64, ((i / 2) % 3) as f64, ((i * 7) % 5) as f64])
        .collect();
    let perfs = configs
        .iter()
        .map(|c| if c[0] == 1.0 { 100.0 + 2.0 * c[1] } else { 1.0 + 0.1 * c[2] })
        .collect();
    Dataset::from_numeric(&["key", "a", "b"], configs, perfs).unwrap()
}

#[test]
fn local_models_only_see_their_division() {
    let ds = sparse_data(40);
    let enc = Encoder::fit(&ds, Scheme::Label).unwrap();
    let x = enc.encode_dataset(&ds).unwrap();
    let y = ds.performances();
    let tree = CartTree::fit(&x, &y, CartParams::default()).unwrap();
    let divs = tree.extract_divisions(1).unwrap();
    assert_eq!(divs.len(), 2);
    let spec = LearnerSpec::linear();
    let base = train_locals(&x, &y, &divs, &spec, 5).unwrap();
    let mut y2 = y.clone();
    for &i in &divs[1].samples {
        y2[i] *= 3.0;
    }
    let perturbed = train_locals(&x, &y2, &divs, &spec, 5).unwrap();
    assert_eq!(base[0], perturbed[0]);
    assert_ne!(base[1], perturbed[1]);
}

#[test]
fn every_query_routes_to_a_division() {
    let ds = sparse_data(60);
    let m = DalModel::train(&ds, &DalConfig::with_learner(LearnerSpec::cart())).unwrap();
    for k in 0..2 {
        for a in 0..3 {
            for b in 0..7 {
                let id = m.route(&[k as f64, a as f64, b as f64]).unwrap();
                assert!(id < m.divisions.len());
            }
        }
    }
}

#[test]
fn training_is_independent_of_thread_count() {
    let ds = sparse_data(80);
    let cfg = DalConfig { seed: 9, ..DalConfig::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| DalModel::train(&ds, &cfg).unwrap().to_json().unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn forced_depth_skips_selection() {
    let ds = sparse_data(64);
    let cfg = DalConfig {
        depth: DepthMode::Forced(2),
        ..DalConfig::with_learner(LearnerSpec::linear())
    };
    let m = DalModel::train(&ds, &cfg).unwrap();
    assert_eq!(m.depth_used(), Some(2));
}

#[test]
fn thirty_paired_runs() {
    let ds = sparse_data(100);
    let dal = Recipe::dal(DalConfig::with_learner(LearnerSpec::linear()));
    let global = Recipe::global(Scheme::Label, LearnerSpec::linear());
    let a = evaluate(&dal, &ds, 30, 30, 4).unwrap();
    let b = evaluate(&global, &ds, 30, 30, 4).unwrap();
    assert_eq!(a.runs.len(), 30);
    for (i, (ra, rb)) in a.runs.iter().zip(&b.runs).enumerate() {
        assert_eq!(ra.run, i);
        assert_eq!(ra.seed, run_seed(4, i));
        assert_eq!((ra.seed, ra.n_train, ra.n_test), (rb.seed, rb.n_train, rb.n_test));
    }
    let again = evaluate(&dal, &ds, 30, 30, 4).unwrap();
    assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&a).unwrap());
}

#[test]
fn perfect_learner_scores_zero() {
    let configs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
    let perfs = configs.iter().map(|c| 5.0 + 2.0 * c[0] - c[1]).collect();
    let ds = Dataset::from_numeric(&["a", "b"], configs, perfs).unwrap();
    let r = evaluate(&Recipe::global(Scheme::Label, LearnerSpec::linear()), &ds, 10, 5, 1).unwrap();
    for run in &r.runs {
        assert!(run.mre.unwrap() < 1e-8);
        assert!(run.rmse < 1e-8);
    }
}

#[test]
fn compare_ranks_recipes() {
    let ds = sparse_data(100);
    let recipes = [
        Recipe::dal(DalConfig::with_learner(LearnerSpec::linear())),
        Recipe::global(Scheme::Label, LearnerSpec::linear()),
    ];
    let c = compare(&recipes, &ds, 30, 10, 2, SkParams::default()).unwrap();
    assert_eq!(c.reports.len(), 2);
    assert_eq!(c.ranking.rank_of("dal-linear"), Some(1));
    assert!(c.ranking.to_table().contains("global-linear"));
}

#[test]
fn bad_train_size_is_rejected() {
    let ds = sparse_data(10);
    let r = Recipe::global(Scheme::Label, LearnerSpec::linear());
    assert!(evaluate(&r, &ds, 10, 3, 0).is_err());
    assert!(evaluate(&r, &ds, 0, 3, 0).is_err());
    assert!(evaluate(&r, &ds, 5, 0, 0).is_err());
}
