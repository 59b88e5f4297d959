//! Depth selection with the averaging hypervolume (μHV).
//!
//! Each division is a point `(h, z)` in a two-objective minimisation space:
//! `h` is the performance variance inside the division and `z = -n` rewards
//! larger divisions. μHV averages, over all divisions of a candidate depth,
//! the rectangle spanned between the division and a nadir reference point
//! shared by every candidate. The depth with the largest μHV wins.

use serde::{Deserialize, Serialize};

use crate::cart::{self, CartTree, Division};
use crate::{Error, Result};

/// Nadir corner `(h_r, z_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub h: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthCandidate {
    pub d: usize,
    pub divisions: Vec<Division>,
    pub mu_hv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSelection {
    /// `None` when the tree is a single leaf.
    pub depth: Option<usize>,
    pub reference: Option<ReferencePoint>,
    pub candidates: Vec<DepthCandidate>,
}

/// `(h, z)` of a division from its raw performances.
pub fn division_objectives(perfs: &[f64]) -> Result<(f64, f64)> {
    if perfs.is_empty() {
        return Err(Error::invalid("division has no samples"));
    }
    let n = perfs.len() as f64;
    Ok((cart::sse(perfs) / n, -n))
}

/// 1.1 × the worst `h` and 0.9 × the worst (least negative) `z`.
pub fn reference_point(points: &[(f64, f64)]) -> Result<ReferencePoint> {
    if points.is_empty() {
        return Err(Error::invalid("reference point of an empty set"));
    }
    let h = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let z = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ReferencePoint { h: 1.1 * h, z: 0.9 * z })
}

fn points(divs: &[Division]) -> Vec<(f64, f64)> {
    divs.iter().map(|d| (d.h, d.z)).collect()
}

/// Area dominated by the non-dominated subset of `points` up to `r`.
pub fn standard_hv(points: &[(f64, f64)], r: ReferencePoint) -> Result<f64> {
    if let Some(p) = points.iter().find(|p| !(p.0 < r.h && p.1 < r.z)) {
        return Err(Error::invalid(format!(
            "point ({}, {}) is not strictly inside the reference box ({}, {})",
            p.0, p.1, r.h, r.z
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // sweep in increasing h; a point adds area only if it improves z
    let mut area = 0.0;
    let mut z_best = r.z;
    let mut front: Vec<(f64, f64)> = Vec::new();
    for p in sorted {
        if p.1 < z_best {
            front.push(p);
            z_best = p.1;
        }
    }
    for (i, p) in front.iter().enumerate() {
        let h_next = front.get(i + 1).map_or(r.h, |q| q.0);
        area += (h_next - p.0) * (r.z - p.1);
    }
    Ok(area)
}

/// Mean of per-division rectangle areas.
pub fn mean_area(areas: &[f64]) -> f64 {
    if areas.is_empty() {
        return 0.0;
    }
    areas.iter().sum::<f64>() / areas.len() as f64
}

/// μHV of a set of `(h, z)` points. When `h_r` is zero (every division has
/// zero variance) the `h` factor is replaced by 1 so `z` still orders the
/// candidates.
pub fn mu_hv(points: &[(f64, f64)], r: ReferencePoint) -> f64 {
    let areas: Vec<f64> = points
        .iter()
        .map(|&(h, z)| {
            let dh = if r.h == 0.0 { 1.0 } else { (r.h - h).abs() };
            dh * (r.z - z).abs()
        })
        .collect();
    mean_area(&areas)
}

/// Depth with the largest score; ties go to the smaller depth.
pub fn select_depth(scored: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(d, v) in scored {
        match best {
            Some((bd, bv)) if v < bv || (v == bv && d > bd) => {}
            _ => best = Some((d, v)),
        }
    }
    best.map(|b| b.0)
}

/// Scores every depth `1..=tree.depth()` and returns the one with the
/// largest μHV (smaller depth on ties).
pub fn adapt_depth(tree: &CartTree) -> Result<DepthSelection> {
    let d_max = tree.depth();
    if d_max == 0 {
        return Ok(DepthSelection {
            depth: None,
            reference: None,
            candidates: Vec::new(),
        });
    }
    let per_depth: Vec<Vec<Division>> = (1..=d_max)
        .map(|d| tree.extract_divisions(d))
        .collect::<Result<_>>()?;
    let all: Vec<(f64, f64)> = per_depth.iter().flat_map(|divs| points(divs)).collect();
    let reference = reference_point(&all)?;
    let candidates: Vec<DepthCandidate> = per_depth
        .into_iter()
        .enumerate()
        .map(|(i, divisions)| {
            let mu_hv = mu_hv(&points(&divisions), reference);
            DepthCandidate {
                d: i + 1,
                divisions,
                mu_hv,
            }
        })
        .collect();
    let scored: Vec<(usize, f64)> = candidates.iter().map(|c| (c.d, c.mu_hv)).collect();
    Ok(DepthSelection {
        depth: select_depth(&scored),
        reference: Some(reference),
        candidates,
    })
}
