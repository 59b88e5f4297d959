//! Vargha-Delaney Â12 and the Scott-Knott ranking of treatments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Probability that a draw from `a` is lower than a draw from `b`, counting
/// ties as half. With lower-is-better metrics this is the probability that
/// `a` wins.
pub fn a12(a: &[f64], b: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &x in a {
        for &y in b {
            if x < y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    wins / (a.len() * b.len()) as f64
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile(&sorted(values), 0.5)
}

pub fn iqr(values: &[f64]) -> f64 {
    let s = sorted(values);
    quantile(&s, 0.75) - quantile(&s, 0.25)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkParams {
    pub confidence: f64,
    pub a12_min: f64,
    pub boot_iters: usize,
    pub seed: u64,
}

impl Default for SkParams {
    fn default() -> Self {
        SkParams {
            confidence: 0.99,
            a12_min: 0.6,
            boot_iters: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSummary {
    pub name: String,
    pub rank: usize,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkGroup {
    pub rank: usize,
    pub treatments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkRanking {
    pub params: SkParams,
    /// Rank 1 first (lowest mean).
    pub groups: Vec<SkGroup>,
    /// Every treatment in ascending mean order.
    pub treatments: Vec<TreatmentSummary>,
}

impl SkRanking {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.treatments.iter().find(|t| t.name == name).map(|t| t.rank)
    }

    /// Aligned plain-text table: treatment, rank, median, IQR, mean.
    pub fn to_table(&self) -> String {
        let w = self.treatments.iter().map(|t| t.name.len()).max().unwrap_or(0).max(9);
        let mut s = format!("{:<w$}  {:>4}  {:>12}  {:>12}  {:>12}\n", "treatment", "rank", "median", "iqr", "mean");
        for t in &self.treatments {
            s.push_str(&format!(
                "{:<w$}  {:>4}  {:>12.4}  {:>12.4}  {:>12.4}\n",
                t.name, t.rank, t.median, t.iqr, t.mean
            ));
        }
        s
    }
}

/// Expected-difference score of cutting `groups` (in order) before index
/// `cut`, computed over the pooled observations of each side.
pub fn delta(groups: &[&[f64]], cut: usize) -> f64 {
    let pooled = |gs: &[&[f64]]| -> (f64, f64) {
        let n: usize = gs.iter().map(|g| g.len()).sum();
        let s: f64 = gs.iter().flat_map(|g| g.iter()).sum();
        (n as f64, s / n as f64)
    };
    let (n, m) = pooled(groups);
    let (n1, m1) = pooled(&groups[..cut]);
    let (n2, m2) = pooled(&groups[cut..]);
    n1 / n * (m1 - m).powi(2) + n2 / n * (m2 - m).powi(2)
}

/// Cut in `1..groups.len()` with the largest [`delta`]; the first wins ties.
pub fn best_cut(groups: &[&[f64]]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for cut in 1..groups.len() {
        let d = delta(groups, cut);
        if best.is_none_or(|b| d > b.1) {
            best = Some((cut, d));
        }
    }
    best
}

/// Two-sided percentile bootstrap on the difference of means: significant
/// when the `confidence` interval of `mean(b*) - mean(a*)` excludes zero.
pub fn bootstrap_differs(a: &[f64], b: &[f64], confidence: f64, iters: usize, rng: &mut ChaCha8Rng) -> bool {
    let mut resample_mean = |v: &[f64]| -> f64 { (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).sum::<f64>() / v.len() as f64 };
    let mut diffs: Vec<f64> = (0..iters).map(|_| resample_mean(b) - resample_mean(a)).collect();
    diffs.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    let lo = quantile(&diffs, alpha / 2.0);
    let hi = quantile(&diffs, 1.0 - alpha / 2.0);
    lo > 0.0 || hi < 0.0
}

struct Treatment<'a> {
    name: &'a str,
    values: &'a [f64],
    mean: f64,
}

/// Recursively splits the mean-sorted treatments at the cut maximising
/// [`delta`], keeping a split only if the bootstrap test is significant and
/// Â12 of the lower side against the upper side reaches `a12_min`.
pub fn scott_knott(treatments: &[(String, Vec<f64>)], params: SkParams) -> Result<SkRanking> {
    if treatments.is_empty() {
        return Err(Error::invalid("Scott-Knott needs at least one treatment"));
    }
    if !(0.0..1.0).contains(&params.confidence) || params.boot_iters == 0 {
        return Err(Error::invalid(format!("invalid Scott-Knott parameters {params:?}")));
    }
    for (name, v) in treatments {
        if v.len() < 2 {
            return Err(Error::invalid(format!("treatment `{name}` needs at least two observations")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("treatment `{name}` has non-finite values")));
        }
    }
    let mut names: Vec<&str> = treatments.iter().map(|t| t.0.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate treatment names"));
    }

    let mut ts: Vec<Treatment> = treatments
        .iter()
        .map(|(n, v)| Treatment {
            name: n,
            values: v,
            mean: mean(v),
        })
        .collect();
    ts.sort_by(|a, b| a.mean.total_cmp(&b.mean).then(a.name.cmp(b.name)));

    let mut rng = seed::rng(params.seed);
    let mut bounds = Vec::new();
    split(&ts, 0, &params, &mut rng, &mut bounds);

    let mut groups = Vec::new();
    let mut summaries = Vec::new();
    for (rank0, &(start, end)) in bounds.iter().enumerate() {
        let rank = rank0 + 1;
        groups.push(SkGroup {
            rank,
            treatments: ts[start..end].iter().map(|t| t.name.to_string()).collect(),
        });
        for t in &ts[start..end] {
            summaries.push(TreatmentSummary {
                name: t.name.to_string(),
                rank,
                n: t.values.len(),
                mean: t.mean,
                median: median(t.values),
                iqr: iqr(t.values),
            });
        }
    }
    Ok(SkRanking {
        params,
        groups,
        treatments: summaries,
    })
}

fn split(ts: &[Treatment], offset: usize, p: &SkParams, rng: &mut ChaCha8Rng, out: &mut Vec<(usize, usize)>) {
    let whole = (offset, offset + ts.len());
    let values: Vec<&[f64]> = ts.iter().map(|t| t.values).collect();
    let Some((cut, _)) = best_cut(&values) else {
        out.push(whole);
        return;
    };
    let lower: Vec<f64> = values[..cut].iter().flat_map(|v| v.iter().copied()).collect();
    let upper: Vec<f64> = values[cut..].iter().flat_map(|v| v.iter().copied()).collect();
    let significant = bootstrap_differs(&lower, &upper, p.confidence, p.boot_iters, rng);
    if significant && a12(&lower, &upper) >= p.a12_min {
        split(&ts[..cut], offset, p, rng, out);
        split(&ts[cut..], offset + cut, p, rng, out);
    } else {
        out.push(whole);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a12_examples() {
        assert_eq!(a12(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.5);
        assert_eq!(a12(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(a12(&[1.0, 3.0], &[2.0, 4.0]), 0.75);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
    }

    #[test]
    fn identical_share_rank() {
        let t = vec![("A".to_string(), vec![1.0; 5]), ("B".to_string(), vec![1.0; 5])];
        let r = scott_knott(&t, SkParams::default()).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.rank_of("A"), Some(1));
        assert_eq!(r.rank_of("B"), Some(1));
    }

    #[test]
    fn separated_split() {
        let t = vec![
            ("B".to_string(), vec![10.0, 10.2, 9.8, 10.0, 10.0]),
            ("A".to_string(), vec![1.0, 1.1, 0.9, 1.0, 1.0]),
        ];
        let r = scott_knott(&t, SkParams { boot_iters: 10_000, ..SkParams::default() }).unwrap();
        assert_eq!(r.rank_of("A"), Some(1));
        assert_eq!(r.rank_of("B"), Some(2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(scott_knott(&[], SkParams::default()).is_err());
        assert!(scott_knott(&[("A".into(), vec![1.0])], SkParams::default()).is_err());
        let dup = vec![("A".to_string(), vec![1.0, 2.0]), ("A".to_string(), vec![1.0, 2.0])];
        assert!(scott_knott(&dup, SkParams::default()).is_err());
    }

    #[test]
    fn single_treatment() {
        let r = scott_knott(&[("only".into(), vec![1.0, 2.0, 3.0])], SkParams::default()).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert!(r.to_table().contains("only"));
    }
}
