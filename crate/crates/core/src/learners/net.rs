//! One-hidden-layer ReLU regression network with L1 weight penalty, trained
//! by full-batch gradient descent.
//!
//! Inputs and targets are min-max scaled internally. The training objective
//! on the scaled data is `(1/m) Σ (f(c) - y')² + λ Σ |w|` over both weight
//! matrices; biases are not penalised.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub hidden_units: usize,
    pub l1_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            hidden_units: 16,
            l1_lambda: 0.01,
            learning_rate: 0.05,
            epochs: 1500,
            seed: 0,
        }
    }
}

/// Per-column affine map onto [0, 1]; constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let w = rows[0].len();
        let mut min = vec![f64::INFINITY; w];
        let mut max = vec![f64::NEG_INFINITY; w];
        for r in rows {
            for j in 0..w {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        MinMax { min, max }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| scale(v, self.min[j], self.max[j]))
            .collect()
    }
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Raw network weights. `w1` is `hidden × input` row-major, `w2` has one
/// entry per hidden unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub input_width: usize,
    pub hidden_units: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Weights {
    pub fn init(input_width: usize, hidden_units: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let a1 = (6.0 / input_width.max(1) as f64).sqrt();
        let a2 = (6.0 / hidden_units as f64).sqrt();
        Weights {
            input_width,
            hidden_units,
            w1: (0..input_width * hidden_units).map(|_| rng.gen_range(-a1..a1)).collect(),
            b1: vec![0.0; hidden_units],
            w2: (0..hidden_units).map(|_| rng.gen_range(-a2..a2)).collect(),
            b2: 0.0,
        }
    }

    pub fn zeros(input_width: usize, hidden_units: usize) -> Self {
        Weights {
            input_width,
            hidden_units,
            w1: vec![0.0; input_width * hidden_units],
            b1: vec![0.0; hidden_units],
            w2: vec![0.0; hidden_units],
            b2: 0.0,
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut out = self.b2;
        for h in 0..self.hidden_units {
            let row = &self.w1[h * self.input_width..(h + 1) * self.input_width];
            let a = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out += self.w2[h] * a.max(0.0);
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Flattened view in the order w1, b1, w2, b2.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_flat(&self, flat: &[f64]) -> Weights {
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, rest) = rest.split_at(self.w2.len());
        Weights {
            input_width: self.input_width,
            hidden_units: self.hidden_units,
            w1: a.to_vec(),
            b1: b.to_vec(),
            w2: c.to_vec(),
            b2: rest[0],
        }
    }

    /// Mask of penalised entries in the flattened order.
    fn penalised(&self) -> Vec<bool> {
        let mut m = vec![true; self.w1.len()];
        m.extend(std::iter::repeat_n(false, self.b1.len()));
        m.extend(std::iter::repeat_n(true, self.w2.len()));
        m.push(false);
        m
    }

    pub fn l1_norm(&self) -> f64 {
        self.w1.iter().chain(&self.w2).map(|w| w.abs()).sum()
    }
}

/// Mean squared error plus `lambda` times the L1 norm of the weights.
pub fn loss(w: &Weights, x: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let m = x.len() as f64;
    let mse = x.iter().zip(y).map(|(xi, yi)| (w.forward(xi) - yi).powi(2)).sum::<f64>() / m;
    mse + lambda * w.l1_norm()
}

pub fn data_loss(w: &Weights, x: &[Vec<f64>], y: &[f64]) -> f64 {
    loss(w, x, y, 0.0)
}

/// Analytic gradient of [`loss`] by backpropagation, in the flattened order.
/// The L1 subgradient at exactly zero is taken as zero.
pub fn gradient(w: &Weights, x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let (iw, hu) = (w.input_width, w.hidden_units);
    let m = x.len() as f64;
    let mut g = Weights::zeros(iw, hu);
    let mut act = vec![0.0; hu];
    for (xi, &yi) in x.iter().zip(y) {
        let mut out = w.b2;
        for h in 0..hu {
            let row = &w.w1[h * iw..(h + 1) * iw];
            act[h] = w.b1[h] + row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            out += w.w2[h] * act[h].max(0.0);
        }
        let d_out = 2.0 * (out - yi) / m;
        g.b2 += d_out;
        for h in 0..hu {
            let r = act[h].max(0.0);
            g.w2[h] += d_out * r;
            if act[h] > 0.0 {
                let d_a = d_out * w.w2[h];
                g.b1[h] += d_a;
                for (j, &v) in xi.iter().enumerate() {
                    g.w1[h * iw + j] += d_a * v;
                }
            }
        }
    }
    let mut flat = g.to_flat();
    if lambda != 0.0 {
        for ((gi, wi), pen) in flat.iter_mut().zip(w.to_flat()).zip(w.penalised()) {
            if pen && wi != 0.0 {
                *gi += lambda * wi.signum();
            }
        }
    }
    flat
}

/// Largest relative difference between [`gradient`] and central finite
/// differences of [`loss`] with step `eps`. The denominator is floored at
/// 1e-6 so entries that are both ~0 do not blow up.
pub fn grad_check(w: &Weights, x: &[Vec<f64>], y: &[f64], lambda: f64, eps: f64) -> f64 {
    let analytic = gradient(w, x, y, lambda);
    let base = w.to_flat();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += eps;
        minus[i] -= eps;
        let numeric = (loss(&w.from_flat(&plus), x, y, lambda) - loss(&w.from_flat(&minus), x, y, lambda)) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Fitted network with its input and target scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetModel {
    pub params: NetParams,
    pub weights: Weights,
    pub input_scale: MinMax,
    pub target_min: f64,
    pub target_max: f64,
    /// Objective value after the last epoch, on scaled data.
    pub final_loss: f64,
}

impl NetModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: NetParams) -> NetModel {
        Self::fit_traced(x, y, params).0
    }

    /// Fits and also returns the objective value before every epoch.
    pub fn fit_traced(x: &[Vec<f64>], y: &[f64], params: NetParams) -> (NetModel, Vec<f64>) {
        let input_scale = MinMax::fit(x);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| input_scale.apply(r)).collect();
        let target_min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let target_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ys: Vec<f64> = y.iter().map(|&v| scale(v, target_min, target_max)).collect();

        let mut w = Weights::init(x[0].len(), params.hidden_units, params.seed);
        let mask = w.penalised();
        let mut flat = w.to_flat();
        let mut trace = Vec::with_capacity(params.epochs);
        for _ in 0..params.epochs {
            trace.push(loss(&w, &xs, &ys, params.l1_lambda));
            let g = gradient(&w, &xs, &ys, params.l1_lambda);
            for ((p, gi), &pen) in flat.iter_mut().zip(&g).zip(&mask) {
                let next = *p - params.learning_rate * gi;
                // a penalised weight whose step crosses zero stops at zero
                *p = if pen && params.l1_lambda > 0.0 && *p != 0.0 && next.signum() != p.signum() {
                    0.0
                } else {
                    next
                };
            }
            w = w.from_flat(&flat);
        }
        let final_loss = loss(&w, &xs, &ys, params.l1_lambda);
        (
            NetModel {
                params,
                weights: w,
                input_scale,
                target_min,
                target_max,
                final_loss,
            },
            trace,
        )
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let s = self.weights.forward(&self.input_scale.apply(x));
        if self.target_max > self.target_min {
            self.target_min + s * (self.target_max - self.target_min)
        } else {
            self.target_min
        }
    }

    /// Mean squared error on the scaled training data.
    pub fn training_mse(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let xs: Vec<Vec<f64>> = x.iter().map(|r| self.input_scale.apply(r)).collect();
        let ys: Vec<f64> = y.iter().map(|&v| scale(v, self.target_min, self.target_max)).collect();
        data_loss(&self.weights, &xs, &ys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_problem(seed: u64, n: usize, width: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for s in 0..5 {
            let (x, y) = random_problem(s, 5, 3);
            let w = Weights::init(3, 4, s + 100);
            let err = grad_check(&w, &x, &y, 0.01, 1e-5);
            assert!(err <= 1e-4, "seed {s}: {err}");
        }
    }

    #[test]
    fn zero_net_zero_targets_has_zero_gradient() {
        let (x, _) = random_problem(1, 5, 3);
        let w = Weights::zeros(3, 4);
        let g = gradient(&w, &x, &[0.0; 5], 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarse_step_still_close() {
        let (x, y) = random_problem(3, 5, 3);
        let w = Weights::init(3, 4, 7);
        let fine = grad_check(&w, &x, &y, 0.0, 1e-5);
        let coarse = grad_check(&w, &x, &y, 0.0, 1e-2);
        assert!(fine <= 1e-4, "{fine}");
        assert!(coarse <= 1e-2, "{coarse}");
    }

    #[test]
    fn fits_a_smooth_function() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let m = NetModel::fit(&x, &y, NetParams { l1_lambda: 0.0, epochs: 3000, ..NetParams::default() });
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict(r) - t).abs() < 0.1, "{} vs {t}", m.predict(r));
        }
    }

    #[test]
    fn huge_penalty_predicts_the_mean() {
        let (x, y) = random_problem(4, 12, 3);
        let m = NetModel::fit(&x, &y, NetParams { l1_lambda: 1e6, ..NetParams::default() });
        assert!(m.weights.w2.iter().all(|&w| w.abs() < 1e-9));
        assert!(m.weights.w1.iter().all(|&w| w.abs() < 1e-9));
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for r in &x {
            assert!((m.predict(r) - mean).abs() < 1e-6, "{} vs {mean}", m.predict(r));
        }
    }

    #[test]
    fn small_steps_do_not_increase_loss() {
        let (x, y) = random_problem(9, 16, 4);
        let params = NetParams {
            learning_rate: 1e-3,
            epochs: 400,
            l1_lambda: 0.001,
            ..NetParams::default()
        };
        let (_, trace) = NetModel::fit_traced(&x, &y, params);
        let smooth: Vec<f64> = trace.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        for pair in smooth.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn deterministic() {
        let (x, y) = random_problem(2, 10, 2);
        let p = NetParams { epochs: 200, ..NetParams::default() };
        let a = NetModel::fit(&x, &y, p);
        let b = NetModel::fit(&x, &y, p);
        assert_eq!(a, b);
        assert_eq!(a.predict(&x[0]).to_bits(), b.predict(&x[0]).to_bits());
    }
}
