use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mre {
    /// Percent; `None` when every actual value is zero.
    pub value: Option<f64>,
    /// Points skipped because their actual value is zero.
    pub skipped: usize,
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("no points to score"));
    }
    Ok(())
}

/// Mean relative error in percent over points with a non-zero actual value.
pub fn mre(actual: &[f64], predicted: &[f64]) -> Result<Mre> {
    check(actual, predicted)?;
    let (mut sum, mut k, mut skipped) = (0.0, 0usize, 0usize);
    for (&a, &p) in actual.iter().zip(predicted) {
        if a == 0.0 {
            skipped += 1;
            continue;
        }
        sum += ((a - p) / a).abs();
        k += 1;
    }
    Ok(Mre {
        value: (k > 0).then(|| sum / k as f64 * 100.0),
        skipped,
    })
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check(actual, predicted)?;
    let sq: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((sq / actual.len() as f64).sqrt())
}
