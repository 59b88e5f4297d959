//! Label, scaled-label and one-hot encodings of configurations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, OptionKind, OptionSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "label")]
    Label,
    #[serde(rename = "scaled")]
    ScaledLabel,
    #[serde(rename = "onehot")]
    OneHot,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(Scheme::Label),
            "scaled" | "scaled_label" => Ok(Scheme::ScaledLabel),
            "onehot" | "one_hot" => Ok(Scheme::OneHot),
            other => Err(Error::invalid(format!("unknown encoding scheme `{other}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Label => "label",
            Scheme::ScaledLabel => "scaled",
            Scheme::OneHot => "onehot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum OptionState {
    Label,
    Scaled { min: f64, max: f64 },
    OneHot { categories: Vec<f64> },
}

/// A value seen at encode time that the encoder was not fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct UnseenValue {
    pub option: String,
    pub value: f64,
}

impl fmt::Display for UnseenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "option `{}`: value {} unseen in training, encoded as all zeros", self.option, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    scheme: Scheme,
    option_names: Vec<String>,
    states: Vec<OptionState>,
    feature_names: Vec<String>,
}

impl Encoder {
    /// Fits the per-option state on the training rows only.
    pub fn fit(train: &Dataset, scheme: Scheme) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot fit an encoder on an empty dataset"));
        }
        let schema = train.schema();
        let mut states = Vec::with_capacity(schema.len());
        let mut feature_names = Vec::new();
        for spec in schema {
            let values = &spec.observed_values;
            let state = match scheme {
                Scheme::Label => {
                    feature_names.push(spec.name.clone());
                    OptionState::Label
                }
                Scheme::ScaledLabel => {
                    feature_names.push(spec.name.clone());
                    OptionState::Scaled {
                        min: values[0],
                        max: values[values.len() - 1],
                    }
                }
                Scheme::OneHot => {
                    feature_names.extend(values.iter().map(|&v| format!("{}_{}", spec.name, label_of(spec, v))));
                    OptionState::OneHot {
                        categories: values.clone(),
                    }
                }
            };
            states.push(state);
        }
        Ok(Encoder {
            scheme,
            option_names: schema.iter().map(|s| s.name.clone()).collect(),
            states,
            feature_names,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn input_width(&self) -> usize {
        self.states.len()
    }

    pub fn output_width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Per-option `(min, max)` for the scaled scheme.
    pub fn ranges(&self) -> Option<Vec<(f64, f64)>> {
        self.states
            .iter()
            .map(|s| match s {
                OptionState::Scaled { min, max } => Some((*min, *max)),
                _ => None,
            })
            .collect()
    }

    /// Encodes one configuration; unseen one-hot values are logged.
    pub fn encode(&self, config: &[f64]) -> Result<Vec<f64>> {
        let (out, unseen) = self.encode_checked(config)?;
        for u in unseen {
            log::warn!("{u}");
        }
        Ok(out)
    }

    /// Encodes one configuration, returning unseen one-hot values alongside.
    pub fn encode_checked(&self, config: &[f64]) -> Result<(Vec<f64>, Vec<UnseenValue>)> {
        if config.len() != self.states.len() {
            return Err(Error::Width {
                expected: self.states.len(),
                actual: config.len(),
            });
        }
        let mut out = Vec::with_capacity(self.output_width());
        let mut unseen = Vec::new();
        for ((state, &v), name) in self.states.iter().zip(config).zip(&self.option_names) {
            match state {
                OptionState::Label => out.push(v),
                OptionState::Scaled { min, max } => {
                    out.push(if max > min { (v - min) / (max - min) } else { 0.0 });
                }
                OptionState::OneHot { categories } => {
                    let hit = categories.iter().position(|&c| c == v);
                    out.extend((0..categories.len()).map(|i| if Some(i) == hit { 1.0 } else { 0.0 }));
                    if hit.is_none() {
                        unseen.push(UnseenValue {
                            option: name.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok((out, unseen))
    }

    pub fn encode_all(&self, configs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        configs.iter().map(|c| self.encode(c)).collect()
    }

    pub fn encode_dataset(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        data.rows().iter().map(|r| self.encode(&r.config)).collect()
    }
}

fn label_of(spec: &OptionSpec, v: f64) -> String {
    match spec.kind {
        OptionKind::Categorical => spec.format_value(v),
        _ => v.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::KindOverrides;

    const MONGO: &str = "cache_size,interval,ssl,data_strategy,time\n\
                         1,1,0,str_l1,3\n10,2,1,str_l2,4\n10000,3,0,str_l3,5\n1,4,1,str_l2,6\n10000,2,1,str_l2,7\n";

    fn mongo() -> Dataset {
        Dataset::parse_csv(MONGO, &KindOverrides::default()).unwrap()
    }

    fn query(ds: &Dataset) -> Vec<f64> {
        ds.parse_configs("cache_size,interval,ssl,data_strategy\n10000,2,1,str_l2\n").unwrap().remove(0)
    }

    #[test]
    fn mongodb_label() {
        let ds = mongo();
        let e = Encoder::fit(&ds, Scheme::Label).unwrap();
        assert_eq!(e.output_width(), 4);
        assert_eq!(e.encode(&query(&ds)).unwrap(), [10000.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn mongodb_scaled() {
        let ds = mongo();
        let e = Encoder::fit(&ds, Scheme::ScaledLabel).unwrap();
        assert_eq!(e.encode(&query(&ds)).unwrap(), [1.0, 1.0 / 3.0, 1.0, 0.5]);
        assert_eq!(e.ranges().unwrap()[0], (1.0, 10000.0));
    }

    #[test]
    fn mongodb_one_hot() {
        let ds = mongo();
        let e = Encoder::fit(&ds, Scheme::OneHot).unwrap();
        assert_eq!(e.output_width(), 12);
        assert_eq!(
            e.encode(&query(&ds)).unwrap(),
            [0., 0., 1., 0., 1., 0., 0., 0., 1., 0., 1., 0.]
        );
        assert_eq!(e.feature_names()[11], "data_strategy_str_l3");
    }

    #[test]
    fn scaled_min_max_and_constant() {
        let ds = Dataset::from_numeric(&["a", "b"], vec![vec![0.0, 3.0], vec![10.0, 3.0]], vec![1.0, 2.0]).unwrap();
        let e = Encoder::fit(&ds, Scheme::ScaledLabel).unwrap();
        assert_eq!(e.ranges().unwrap(), [(0.0, 10.0), (3.0, 3.0)]);
        assert_eq!(e.encode(&[5.0, 3.0]).unwrap(), [0.5, 0.0]);
        // no clamping outside the training range
        assert_eq!(e.encode(&[20.0, 4.0]).unwrap(), [2.0, 0.0]);
    }

    #[test]
    fn unseen_one_hot_value_is_zero_block() {
        let ds = Dataset::from_numeric(&["a", "b"], vec![vec![0.0, 1.0], vec![1.0, 2.0]], vec![1.0, 2.0]).unwrap();
        let e = Encoder::fit(&ds, Scheme::OneHot).unwrap();
        let (v, unseen) = e.encode_checked(&[1.0, 7.0]).unwrap();
        assert_eq!(v, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(unseen.len(), 1);
        assert_eq!(unseen[0].option, "b");
    }

    #[test]
    fn width_mismatch() {
        let ds = mongo();
        let e = Encoder::fit(&ds, Scheme::Label).unwrap();
        assert!(matches!(e.encode(&[1.0]), Err(Error::Width { expected: 4, actual: 1 })));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Label, Scheme::ScaledLabel, Scheme::OneHot] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("binary".parse::<Scheme>().is_err());
    }
}
