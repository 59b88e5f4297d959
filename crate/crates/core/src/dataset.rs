//! Configuration/performance datasets.
//!
//! A dataset is a CSV file with a header row whose last column is the
//! measured performance and whose other columns are configuration options.
//! Option kinds are inferred in the order binary → numeric → categorical and
//! may be forced through a JSON sidecar of the form
//! `{"kinds": {"option_name": "categorical"}}`.
//!
//! Categorical values are stored as integer codes into the option's level
//! list, which is sorted lexicographically, so every configuration is a plain
//! `f64` vector aligned to the schema.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Binary,
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub name: String,
    pub kind: OptionKind,
    /// Sorted distinct values present in the rows (codes for categoricals).
    pub observed_values: Vec<f64>,
    /// Level names for categorical options, indexed by code.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

impl OptionSpec {
    /// Parses one cell of this option into its stored numeric form.
    pub fn parse_value(&self, cell: &str) -> Option<f64> {
        let cell = cell.trim();
        match self.kind {
            OptionKind::Categorical => self
                .levels
                .iter()
                .position(|l| l == cell)
                .map(|i| i as f64),
            OptionKind::Binary | OptionKind::Numeric => cell.parse::<f64>().ok().filter(|v| v.is_finite()),
        }
    }

    /// Renders a stored value the way it appears in a CSV file.
    pub fn format_value(&self, value: f64) -> String {
        match self.kind {
            OptionKind::Categorical => self
                .levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| value.to_string()),
            _ => value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub config: Vec<f64>,
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Vec<OptionSpec>,
    rows: Vec<Sample>,
    performance_name: String,
}

/// Optional JSON sidecar forcing option kinds.
#[derive(Debug, Default, Deserialize)]
pub struct KindOverrides {
    #[serde(default)]
    pub kinds: BTreeMap<String, OptionKind>,
}

impl KindOverrides {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Dataset {
    /// Builds a dataset from already-numeric rows, validating the invariants.
    pub fn new(schema: Vec<OptionSpec>, rows: Vec<Sample>, performance_name: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("no rows".into()));
        }
        let mut names = HashSet::new();
        for spec in &schema {
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Dataset(format!("duplicate option name `{}`", spec.name)));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.config.len() != schema.len() {
                return Err(Error::Data {
                    row: i + 2,
                    column: String::new(),
                    message: format!("expected {} option values, got {}", schema.len(), row.config.len()),
                });
            }
            if !row.performance.is_finite() || row.config.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data {
                    row: i + 2,
                    column: String::new(),
                    message: "non-finite value".into(),
                });
            }
        }
        let mut ds = Dataset {
            schema,
            rows,
            performance_name: performance_name.into(),
        };
        ds.refresh_observed();
        for spec in &ds.schema {
            if spec.kind == OptionKind::Binary && spec.observed_values.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Dataset(format!("binary option `{}` has values outside {{0,1}}", spec.name)));
            }
        }
        Ok(ds)
    }

    /// Convenience constructor for all-numeric data; kinds are inferred.
    pub fn from_numeric(names: &[&str], configs: Vec<Vec<f64>>, perfs: Vec<f64>) -> Result<Self> {
        if configs.len() != perfs.len() {
            return Err(Error::invalid("configs and performances differ in length"));
        }
        let schema = names
            .iter()
            .enumerate()
            .map(|(j, n)| {
                let binary = configs.iter().all(|c| c.get(j).is_some_and(|&v| v == 0.0 || v == 1.0));
                OptionSpec {
                    name: n.to_string(),
                    kind: if binary { OptionKind::Binary } else { OptionKind::Numeric },
                    observed_values: Vec::new(),
                    levels: Vec::new(),
                }
            })
            .collect();
        let rows = configs
            .into_iter()
            .zip(perfs)
            .map(|(config, performance)| Sample { config, performance })
            .collect();
        Dataset::new(schema, rows, "performance")
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_csv_with(path, &KindOverrides::default())
    }

    pub fn load_csv_with(path: impl AsRef<Path>, overrides: &KindOverrides) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, overrides)
    }

    pub fn parse_csv(text: &str, overrides: &KindOverrides) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::Dataset("empty file".into()));
        }
        if header.len() < 2 {
            return Err(Error::Dataset("need at least one option column and a performance column".into()));
        }
        for name in overrides.kinds.keys() {
            if !header[..header.len() - 1].contains(name) {
                return Err(Error::Dataset(format!("kind override for unknown option `{name}`")));
            }
        }

        let n_opts = header.len() - 1;
        let mut cells: Vec<Vec<String>> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 2;
            if record.len() != header.len() {
                return Err(Error::Data {
                    row,
                    column: String::new(),
                    message: format!("expected {} cells, got {}", header.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::Data {
                        row,
                        column: header[j].clone(),
                        message: "missing value".into(),
                    });
                }
            }
            cells.push(record.iter().map(str::to_owned).collect());
        }
        if cells.is_empty() {
            return Err(Error::Dataset("empty file: header but no rows".into()));
        }

        let mut schema = Vec::with_capacity(n_opts);
        for (j, name) in header[..n_opts].iter().enumerate() {
            let column: Vec<&str> = cells.iter().map(|r| r[j].as_str()).collect();
            schema.push(infer_option(name, &column, overrides.kinds.get(name).copied())?);
        }

        let perf_col = n_opts;
        let mut rows = Vec::with_capacity(cells.len());
        for (i, record) in cells.iter().enumerate() {
            let performance = record[perf_col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data {
                    row: i + 2,
                    column: header[perf_col].clone(),
                    message: format!("non-numeric performance `{}`", record[perf_col]),
                })?;
            let config = schema
                .iter()
                .zip(record)
                .map(|(spec, cell)| spec.parse_value(cell).expect("validated during inference"))
                .collect();
            rows.push(Sample { config, performance });
        }
        Dataset::new(schema, rows, header[perf_col].clone())
    }

    /// Parses a CSV of configurations against this dataset's schema. Columns
    /// must start with the option names in schema order; a trailing
    /// performance column is accepted and ignored.
    pub fn parse_configs(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        parse_configs(&self.schema, &self.performance_name, text)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.schema.iter().map(|s| s.name.as_str()).collect();
        header.push(&self.performance_name);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = self
                .schema
                .iter()
                .zip(&row.config)
                .map(|(s, &v)| s.format_value(v))
                .collect();
            rec.push(row.performance.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn schema(&self) -> &[OptionSpec] {
        &self.schema
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn performance_name(&self) -> &str {
        &self.performance_name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn performances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.performance).collect()
    }

    /// Rows at `indices`, keeping the schema (kinds and levels) but
    /// recomputing the observed values.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Dataset::new(self.schema.clone(), rows, self.performance_name.clone())
    }

    /// Out-of-sample bootstrap: `train_size` distinct rows drawn without
    /// replacement, the rest become the test set. Both keep file order.
    pub fn bootstrap_split(&self, train_size: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let (train, test) = self.bootstrap_indices(train_size, seed)?;
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    pub fn bootstrap_indices(&self, train_size: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.len();
        if train_size == 0 || train_size >= n {
            return Err(Error::invalid(format!(
                "train size {train_size} must be in [1, {}) for {n} rows",
                n
            )));
        }
        let mut rng = seed::rng(seed);
        let mut train = index::sample(&mut rng, n, train_size).into_vec();
        train.sort_unstable();
        let chosen: HashSet<usize> = train.iter().copied().collect();
        let test = (0..n).filter(|i| !chosen.contains(i)).collect();
        Ok((train, test))
    }

    /// SHA-256 over the schema and rows, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.schema {
            h.update(s.name.as_bytes());
            h.update([0u8]);
        }
        h.update(self.performance_name.as_bytes());
        for r in &self.rows {
            for v in &r.config {
                h.update(v.to_le_bytes());
            }
            h.update(r.performance.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn refresh_observed(&mut self) {
        for (j, spec) in self.schema.iter_mut().enumerate() {
            let mut vals: Vec<f64> = self.rows.iter().map(|r| r.config[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            spec.observed_values = vals;
        }
    }
}

pub(crate) fn parse_configs(schema: &[OptionSpec], perf_name: &str, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let names: Vec<&str> = schema.iter().map(|s| s.name.as_str()).collect();
    let ok_header = header.len() >= names.len()
        && header[..names.len()] == names[..]
        && (header.len() == names.len() || (header.len() == names.len() + 1 && header[names.len()] == perf_name));
    if !ok_header {
        return Err(Error::Dataset(format!(
            "configuration header {:?} does not match options {:?}",
            header, names
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let mut config = Vec::with_capacity(schema.len());
        for (spec, cell) in schema.iter().zip(record.iter()) {
            if cell.is_empty() {
                return Err(Error::Data {
                    row,
                    column: spec.name.clone(),
                    message: "missing value".into(),
                });
            }
            let v = spec.parse_value(cell).ok_or_else(|| Error::Data {
                row,
                column: spec.name.clone(),
                message: format!("cannot parse `{cell}` as a {:?} value", spec.kind),
            })?;
            config.push(v);
        }
        if config.len() != schema.len() {
            return Err(Error::Data {
                row,
                column: String::new(),
                message: format!("expected {} cells, got {}", schema.len(), record.len()),
            });
        }
        out.push(config);
    }
    Ok(out)
}

fn infer_option(name: &str, column: &[&str], forced: Option<OptionKind>) -> Result<OptionSpec> {
    let numbers: Option<Vec<f64>> = column
        .iter()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let inferred = match &numbers {
        Some(vs) if vs.iter().all(|&v| v == 0.0 || v == 1.0) => OptionKind::Binary,
        Some(_) => OptionKind::Numeric,
        None => OptionKind::Categorical,
    };
    let kind = forced.unwrap_or(inferred);
    match kind {
        OptionKind::Binary if inferred != OptionKind::Binary => {
            Err(Error::Dataset(format!("option `{name}` forced binary but has values outside {{0,1}}")))
        }
        OptionKind::Numeric if numbers.is_none() => {
            Err(Error::Dataset(format!("option `{name}` forced numeric but has non-numeric values")))
        }
        OptionKind::Categorical => {
            let levels: Vec<String> = column
                .iter()
                .map(|c| c.to_string())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            Ok(OptionSpec {
                name: name.to_string(),
                kind,
                observed_values: Vec::new(),
                levels,
            })
        }
        _ => Ok(OptionSpec {
            name: name.to_string(),
            kind,
            observed_values: Vec::new(),
            levels: Vec::new(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::parse_csv(text, &KindOverrides::default())
    }

    #[test]
    fn three_row_file() {
        let ds = parse("a,b,perf\n0,1,3.5\n1,0,4\n1,5,2\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.schema()[0].kind, OptionKind::Binary);
        assert_eq!(ds.schema()[1].kind, OptionKind::Numeric);
        assert_eq!(ds.performance_name(), "perf");
        assert_eq!(ds.rows()[2].config, vec![1.0, 5.0]);
    }

    #[test]
    fn mongodb_style_kinds() {
        let text = "cache_size,interval,ssl,data_strategy,time\n\
                    1,1,0,str_l1,3\n10,2,1,str_l2,4\n10000,3,0,str_l3,5\n1,4,1,str_l2,6\n";
        let ds = parse(text).unwrap();
        let kinds: Vec<_> = ds.schema().iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [OptionKind::Numeric, OptionKind::Numeric, OptionKind::Binary, OptionKind::Categorical]
        );
        assert_eq!(ds.schema()[3].levels, ["str_l1", "str_l2", "str_l3"]);
        assert_eq!(ds.rows()[1].config[3], 1.0);
        assert_eq!(ds.schema()[0].observed_values, [1.0, 10.0, 10000.0]);
    }

    #[test]
    fn blank_performance_names_row() {
        let err = parse("a,perf\n0,1\n1,\n").unwrap_err();
        match err {
            Error::Data { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "perf");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_performance_rejected() {
        let err = parse("a,perf\n0,fast\n").unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, .. }), "{err}");
    }

    #[test]
    fn empty_file_rejected() {
        assert!(parse("").is_err());
        assert!(parse("a,perf\n").is_err());
    }

    #[test]
    fn forced_kind() {
        let mut ov = KindOverrides::default();
        ov.kinds.insert("a".into(), OptionKind::Categorical);
        let ds = Dataset::parse_csv("a,perf\n0,1\n1,2\n", &ov).unwrap();
        assert_eq!(ds.schema()[0].kind, OptionKind::Categorical);
        assert_eq!(ds.schema()[0].levels, ["0", "1"]);

        ov.kinds.insert("a".into(), OptionKind::Binary);
        assert!(Dataset::parse_csv("a,perf\n0,1\n2,2\n", &ov).is_err());
    }

    #[test]
    fn duplicate_configs_kept() {
        let ds = parse("a,perf\n1,1\n1,2\n").unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn split_contract() {
        let ds = Dataset::from_numeric(&["x"], (0..10).map(|i| vec![i as f64]).collect(), (0..10).map(f64::from).collect())
            .unwrap();
        let (train, test) = ds.bootstrap_indices(9, 7).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(ds.bootstrap_indices(9, 7).unwrap(), (train, test));
        assert!(ds.bootstrap_split(0, 1).is_err());
        assert!(ds.bootstrap_split(10, 1).is_err());
    }

    #[test]
    fn x264_scale_split() {
        let n = 1152;
        let ds = Dataset::from_numeric(&["x"], (0..n).map(|i| vec![i as f64]).collect(), vec![1.0; n]).unwrap();
        let (train, test) = ds.bootstrap_split(5 * 16, 3).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 1072);
    }

    #[test]
    fn parse_query_configs() {
        let ds = parse("opt,mode,perf\n1,a,3\n2,b,4\n").unwrap();
        let cfgs = ds.parse_configs("opt,mode\n3,b\n").unwrap();
        assert_eq!(cfgs, vec![vec![3.0, 1.0]]);
        let cfgs = ds.parse_configs("opt,mode,perf\n3,a,0\n").unwrap();
        assert_eq!(cfgs, vec![vec![3.0, 0.0]]);
        assert!(ds.parse_configs("mode,opt\nb,3\n").is_err());
        assert!(ds.parse_configs("opt,mode\n3,zzz\n").is_err());
    }
}
