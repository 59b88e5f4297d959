use dal_core::learners::linear::{LinearModel, FALLBACK_RIDGE};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..5).prop_flat_map(|w| {
        (w + 2..w + 20).prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, w), n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    })
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len() + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

proptest! {
    #[test]
    fn matches_pseudo_inverse((x, y) in problem()) {
        let a = design(&x);
        let svd = a.clone().svd(true, true);
        let s = &svd.singular_values;
        prop_assume!(s.min() > 1e-3 * s.max());
        let beta = svd.solve(&DVector::from_vec(y.clone()), 1e-12).unwrap();
        let m = LinearModel::fit(&x, &y, FALLBACK_RIDGE);
        prop_assert_eq!(m.ridge, 0.0);
        prop_assert!((m.intercept - beta[0]).abs() < 1e-6 * beta[0].abs().max(1.0));
        for (j, c) in m.coefficients.iter().enumerate() {
            prop_assert!((c - beta[j + 1]).abs() < 1e-6 * beta[j + 1].abs().max(1.0));
        }
    }

    #[test]
    fn residuals_are_orthogonal((x, y) in problem()) {
        let m = LinearModel::fit(&x, &y, FALLBACK_RIDGE);
        prop_assume!(m.ridge == 0.0);
        let r: Vec<f64> = x.iter().zip(&y).map(|(row, t)| t - m.predict(row)).collect();
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0) * 10.0;
        prop_assert!(r.iter().sum::<f64>().abs() < 1e-7 * scale);
        for j in 0..x[0].len() {
            let dot: f64 = x.iter().zip(&r).map(|(row, e)| row[j] * e).sum();
            prop_assert!(dot.abs() < 1e-7 * scale * 10.0, "{dot}");
        }
    }
}

#[test]
fn rank_deficient_input_still_fits() {
    let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
    let y: Vec<f64> = (0..6).map(|i| 3.0 + i as f64).collect();
    let m = LinearModel::fit(&x, &y, FALLBACK_RIDGE);
    assert_eq!(m.ridge, FALLBACK_RIDGE);
    for (row, t) in x.iter().zip(&y) {
        assert!((m.predict(row) - t).abs() < 1e-3);
    }
}
