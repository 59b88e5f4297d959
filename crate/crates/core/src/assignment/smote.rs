use rand::Rng;

use super::PseudoLabeledSet;
use crate::seed;

pub const DEFAULT_K: usize = 5;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Upsamples every minority class to the majority count. Each synthetic row
/// is `x + t (nb - x)` for a base row `x` of the class (taken round-robin),
/// one of its `k` nearest same-class neighbours `nb` (Euclidean, ties by
/// position) and `t ~ U[0, 1]`. `k` is capped at class size - 1; singleton
/// classes are duplicated. Original rows come first, unchanged.
pub fn smote_oversample(u: &PseudoLabeledSet, k: usize, seed: u64) -> PseudoLabeledSet {
    let k = k.max(1);
    let counts = u.class_counts();
    let Some(&majority) = counts.values().max() else {
        return u.clone();
    };
    let mut out = u.clone();
    let mut rng = seed::rng(seed);
    for (&class, &count) in &counts {
        if count == majority {
            continue;
        }
        let members: Vec<usize> = (0..u.len()).filter(|&i| u.labels[i] == class).collect();
        let k_eff = k.min(members.len() - 1);
        let neighbours: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (dist2(&u.features[i], &u.features[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k_eff).map(|p| p.1).collect()
            })
            .collect();
        for s in 0..majority - count {
            let pos = s % members.len();
            let base = &u.features[members[pos]];
            let row = if k_eff == 0 {
                base.clone()
            } else {
                let nb = &u.features[neighbours[pos][rng.gen_range(0..k_eff)]];
                let t: f64 = rng.gen_range(0.0..=1.0);
                base.iter().zip(nb).map(|(a, b)| a + t * (b - a)).collect()
            };
            out.features.push(row);
            out.labels.push(class);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&[f64], usize)]) -> PseudoLabeledSet {
        PseudoLabeledSet::new(rows.iter().map(|r| r.0.to_vec()).collect(), rows.iter().map(|r| r.1).collect()).unwrap()
    }

    #[test]
    fn fourteen_and_four() {
        let mut rows: Vec<(Vec<f64>, usize)> = (0..14).map(|i| (vec![i as f64, 0.0], 0)).collect();
        rows.extend((0..4).map(|i| (vec![100.0 + i as f64, 1.0], 1)));
        let u = PseudoLabeledSet::new(rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect())
            .unwrap();
        let out = smote_oversample(&u, DEFAULT_K, 1);
        let counts = out.class_counts();
        assert_eq!(counts[&0], 14);
        assert_eq!(counts[&1], 14);
        for (f, &l) in out.features.iter().zip(&out.labels).skip(18) {
            assert_eq!(l, 1);
            assert!((100.0..=103.0).contains(&f[0]));
            assert_eq!(f[1], 1.0);
        }
    }

    #[test]
    fn balanced_is_identity() {
        let u = set(&[(&[0.0], 0), (&[1.0], 1)]);
        assert_eq!(smote_oversample(&u, 5, 3), u);
    }

    #[test]
    fn synthetic_on_segment() {
        let mut rows: Vec<(&[f64], usize)> = vec![(&[0.0, 0.0], 1), (&[1.0, 1.0], 1)];
        let maj = [5.0, 5.0];
        for _ in 0..20 {
            rows.push((&maj, 0));
        }
        let out = smote_oversample(&set(&rows), 1, 9);
        for (f, &l) in out.features.iter().zip(&out.labels).skip(22) {
            assert_eq!(l, 1);
            assert_eq!(f[0], f[1]);
            assert!((0.0..=1.0).contains(&f[0]));
        }
        assert_eq!(out.class_counts()[&1], 20);
    }

    #[test]
    fn singleton_class_duplicates() {
        let out = smote_oversample(&set(&[(&[3.0], 1), (&[0.0], 0), (&[0.5], 0), (&[0.7], 0)]), 5, 0);
        assert_eq!(out.class_counts()[&1], 3);
        assert!(out.features[4..].iter().all(|f| f == &[3.0]));
    }

    #[test]
    fn deterministic() {
        let u = set(&[(&[0.0], 0), (&[1.0], 0), (&[2.0], 0), (&[9.0], 1), (&[8.0], 1)]);
        assert_eq!(smote_oversample(&u, 5, 4), smote_oversample(&u, 5, 4));
    }
}
