//! Routing new configurations to divisions: SMOTE balancing of the
//! pseudo-labelled training rows and a random forest classifier.

mod forest;
mod smote;

use std::collections::BTreeMap;

pub use forest::{ClassTree, RfClassifier, RfParams};
pub use smote::{smote_oversample, DEFAULT_K};

use crate::{Error, Result};

/// Encoded configurations labelled with the id of their division.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl PseudoLabeledSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid("features and labels differ in length"));
        }
        if let Some(w) = features.first().map(Vec::len) {
            if let Some(r) = features.iter().find(|r| r.len() != w) {
                return Err(Error::Width {
                    expected: w,
                    actual: r.len(),
                });
            }
        }
        Ok(PseudoLabeledSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }
}
