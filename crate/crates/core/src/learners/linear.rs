use serde::{Deserialize, Serialize};

/// Ridge strength used when the normal equations are singular.
pub const FALLBACK_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Ridge strength actually applied; 0 when the plain solve succeeded.
    pub ridge: f64,
}

impl LinearModel {
    /// Least squares with an intercept, solved on centred data so the
    /// intercept is never penalised. Tries the plain normal equations first
    /// and falls back to ridge `ridge` on the slopes when they are singular.
    pub fn fit(x: &[Vec<f64>], y: &[f64], ridge: f64) -> LinearModel {
        let n = x.len() as f64;
        let p = x[0].len();
        let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let y_mean = y.iter().sum::<f64>() / n;
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        for (row, &t) in x.iter().zip(y) {
            let c: Vec<f64> = row.iter().zip(&x_mean).map(|(v, m)| v - m).collect();
            for i in 0..p {
                xty[i] += c[i] * (t - y_mean);
                for j in 0..=i {
                    xtx[i * p + j] += c[i] * c[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                xtx[j * p + i] = xtx[i * p + j];
            }
        }

        let (beta, applied) = match cholesky_solve(&xtx, &xty, p) {
            Some(b) => (b, 0.0),
            None => {
                let mut reg = xtx.clone();
                for i in 0..p {
                    reg[i * p + i] += ridge;
                }
                let b = cholesky_solve(&reg, &xty, p).unwrap_or_else(|| vec![0.0; p]);
                (b, ridge)
            }
        };
        let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        LinearModel {
            intercept,
            coefficients: beta,
            ridge: applied,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Solves `a x = b` for symmetric `a`; `None` if `a` is not numerically
/// positive definite.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let m = LinearModel::fit(&x, &[2.0, 4.0, 6.0], FALLBACK_RIDGE);
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.intercept, 0.0, epsilon = 1e-9);
        assert_eq!(m.ridge, 0.0);
        assert_abs_diff_eq!(m.predict(&[10.0]), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_falls_back_to_ridge() {
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let m = LinearModel::fit(&x, &[1.0, 2.0, 3.0], FALLBACK_RIDGE);
        assert_eq!(m.ridge, FALLBACK_RIDGE);
        assert_abs_diff_eq!(m.coefficients[0], m.coefficients[1], epsilon = 1e-9);
        assert_abs_diff_eq!(m.predict(&[4.0, 4.0]), 4.0, epsilon = 1e-4);
    }

    #[test]
    fn constant_target_is_exact_under_fallback() {
        let x = vec![vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 3.0]];
        let m = LinearModel::fit(&x, &[100.0; 3], FALLBACK_RIDGE);
        assert_eq!(m.ridge, FALLBACK_RIDGE);
        assert_abs_diff_eq!(m.predict(&[0.0, 7.0]), 100.0, epsilon = 1e-12);
    }
}
