use dal_core::assignment::{smote_oversample, DEFAULT_K};
use dal_core::{PseudoLabeledSet, RfClassifier, RfParams};
use proptest::prelude::*;

fn labelled() -> impl Strategy<Value = PseudoLabeledSet> {
    (1usize..4, 2usize..30).prop_flat_map(|(w, n)| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, w), n),
            prop::collection::vec(0usize..3, n),
        )
            .prop_map(|(f, l)| PseudoLabeledSet::new(f, l).unwrap())
    })
}

fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return p.iter().zip(a).all(|(x, y)| (x - y).abs() < 1e-9);
    }
    let t: f64 = p.iter().zip(a).zip(&ab).map(|((x, y), d)| (x - y) * d).sum::<f64>() / len2;
    (-1e-9..=1.0 + 1e-9).contains(&t) && p.iter().zip(a).zip(&ab).all(|((x, y), d)| (x - (y + t * d)).abs() < 1e-9)
}

proptest! {
    #[test]
    fn smote_balances_and_interpolates(u in labelled(), seed in any::<u64>()) {
        let out = smote_oversample(&u, DEFAULT_K, seed);
        let counts = out.class_counts();
        let majority = *u.class_counts().values().max().unwrap();
        prop_assert!(counts.values().all(|&c| c == majority));
        prop_assert_eq!(&out.features[..u.len()], &u.features[..]);
        prop_assert_eq!(&out.labels[..u.len()], &u.labels[..]);
        for (p, &l) in out.features.iter().zip(&out.labels).skip(u.len()) {
            let members: Vec<&Vec<f64>> = u.features.iter().zip(&u.labels).filter(|(_, &c)| c == l).map(|(f, _)| f).collect();
            let ok = members.iter().any(|a| members.iter().any(|b| on_segment(p, a, b)));
            prop_assert!(ok, "{p:?} not between class {l} rows");
        }
        prop_assert_eq!(smote_oversample(&u, DEFAULT_K, seed), out);
    }

    #[test]
    fn forest_outputs_known_labels(u in labelled(), seed in any::<u64>()) {
        let rf = RfClassifier::fit(&u, RfParams { n_trees: 15, ..RfParams::default() }, seed).unwrap();
        let known = u.class_counts();
        for row in &u.features {
            prop_assert!(known.contains_key(&rf.classify(row).unwrap()));
        }
    }
}
