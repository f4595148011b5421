//! CSV ingestion: binary features to 0/1, categoricals one-hot, continuous
//! columns and the target standardized (population variance), then a seeded
//! train/test split.
//!
//! Statistics are computed over the whole file before splitting.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::seeds::{SeedSplitter, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Columns forced to be treated as categorical even if they parse as numbers.
    pub categorical: Vec<String>,
    /// Fraction of rows held out, in `[0, 1)`.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            categorical: Vec::new(),
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Mean and population standard deviation of a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

impl ColumnStats {
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            name: name.to_string(),
            mean,
            sd: var.sqrt(),
        }
    }

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn de_standardize(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

/// How one output feature was derived from the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "kebab-case")]
pub enum FeatureColumn {
    Standardized(ColumnStats),
    /// `1` for `one`, `0` for the other level.
    Binary {
        column: String,
        one: String,
    },
    OneHot {
        column: String,
        level: String,
    },
}

impl FeatureColumn {
    pub fn name(&self) -> String {
        match self {
            FeatureColumn::Standardized(s) => s.name.clone(),
            FeatureColumn::Binary { column, one } => format!("{column}={one}"),
            FeatureColumn::OneHot { column, level } => format!("{column}={level}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedData {
    pub train: Dataset,
    pub test: Dataset,
    pub features: Vec<FeatureColumn>,
    pub target: ColumnStats,
    /// Constant columns that were removed.
    pub dropped: Vec<String>,
}

enum Kind {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

fn parse_num(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn classify(name: &str, cells: &[String], forced_categorical: bool) -> Result<Kind> {
    for (i, c) in cells.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::Ingest {
                row: i + 1,
                column: name.to_string(),
                message: "empty cell".into(),
            });
        }
    }
    if forced_categorical {
        return Ok(Kind::Categorical(cells.to_vec()));
    }
    let parsed: Vec<Option<f64>> = cells.iter().map(|c| parse_num(c)).collect();
    let numeric = parsed.iter().filter(|p| p.is_some()).count();
    if numeric == cells.len() {
        return Ok(Kind::Numeric(parsed.into_iter().map(|p| p.unwrap()).collect()));
    }
    if numeric == 0 {
        return Ok(Kind::Categorical(cells.to_vec()));
    }
    // Mixed column: report the first cell disagreeing with the first row.
    let first_is_num = parsed[0].is_some();
    let row = parsed.iter().position(|p| p.is_some() != first_is_num).unwrap();
    Err(Error::Ingest {
        row: row + 1,
        column: name.to_string(),
        message: format!("cell '{}' does not match the column type", cells[row]),
    })
}

/// Reads `path`, encodes features, standardizes, splits.
pub fn load_csv_dataset(path: impl AsRef<Path>, target_column: &str, config: &IngestConfig) -> Result<IngestedData> {
    if !(0.0..1.0).contains(&config.test_fraction) {
        return Err(Error::config("test_fraction must lie in [0, 1)"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::Ingest {
            row: 0,
            column: target_column.to_string(),
            message: "target column not found in header".into(),
        })?;
    for c in &config.categorical {
        if !headers.contains(c) {
            return Err(Error::Ingest {
                row: 0,
                column: c.clone(),
                message: "declared categorical column not found in header".into(),
            });
        }
    }

    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingest {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (j, cell) in rec.iter().enumerate() {
            columns[j].push(cell.to_string());
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(Error::Ingest {
            row: 1,
            column: String::new(),
            message: "file has no data rows".into(),
        });
    }

    let target = match classify(&headers[target_idx], &columns[target_idx], false)? {
        Kind::Numeric(v) => v,
        Kind::Categorical(cells) => {
            return Err(Error::Ingest {
                row: 1,
                column: headers[target_idx].clone(),
                message: format!("target must be numeric, found '{}'", cells[0]),
            })
        }
    };
    let target_stats = ColumnStats::from_values(&headers[target_idx], &target);
    if target_stats.sd == 0.0 {
        return Err(Error::Ingest {
            row: 1,
            column: headers[target_idx].clone(),
            message: "target column is constant".into(),
        });
    }

    let mut features = Vec::new();
    let mut encoded: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let forced = config.categorical.contains(name);
        match classify(name, &columns[j], forced)? {
            Kind::Numeric(v) => {
                let levels: BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
                if levels.len() == 1 {
                    log::warn!("dropping constant column '{name}'");
                    dropped.push(name.clone());
                } else if levels.len() == 2 {
                    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    encoded.push(v.iter().map(|x| (*x == hi) as u8 as f64).collect());
                    features.push(FeatureColumn::Binary {
                        column: name.clone(),
                        one: hi.to_string(),
                    });
                } else {
                    let stats = ColumnStats::from_values(name, &v);
                    encoded.push(v.iter().map(|x| stats.standardize(*x)).collect());
                    features.push(FeatureColumn::Standardized(stats));
                }
            }
            Kind::Categorical(cells) => {
                let levels: BTreeSet<&String> = cells.iter().collect();
                match levels.len() {
                    1 => {
                        log::warn!("dropping constant column '{name}'");
                        dropped.push(name.clone());
                    }
                    2 => {
                        let one = (*levels.iter().next_back().unwrap()).clone();
                        encoded.push(cells.iter().map(|c| (*c == one) as u8 as f64).collect());
                        features.push(FeatureColumn::Binary {
                            column: name.clone(),
                            one,
                        });
                    }
                    _ => {
                        for level in levels {
                            encoded.push(cells.iter().map(|c| (c == level) as u8 as f64).collect());
                            features.push(FeatureColumn::OneHot {
                                column: name.clone(),
                                level: level.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    let dim = encoded.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedSplitter::new(config.seed).rng(Stream::Split, 0));
    let n_test = ((config.test_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    let (test_idx, train_idx) = order.split_at(n_test);
    let build = |idx: &[usize]| -> Result<Dataset> {
        let mut xs = Vec::with_capacity(idx.len() * dim);
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            xs.extend(encoded.iter().map(|col| col[i]));
            ys.push(target_stats.standardize(target[i]));
        }
        Dataset::from_flat(dim, xs, ys)
    };
    Ok(IngestedData {
        train: build(train_idx)?,
        test: build(test_idx)?,
        features,
        target: target_stats,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn no_split() -> IngestConfig {
        IngestConfig {
            test_fraction: 0.0,
            ..IngestConfig::default()
        }
    }

    #[test]
    fn two_row_numeric_toy_standardizes() {
        let f = write("a,b,y\n1.0,10,3\n3.0,20,5\n4.0,60,7\n");
        let d = load_csv_dataset(f.path(), "y", &no_split()).unwrap();
        assert_eq!(d.train.len(), 3);
        for j in 0..2 {
            let col: Vec<f64> = (0..3).map(|i| d.train.x(i)[j]).collect();
            let mean = col.iter().sum::<f64>() / 3.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        let t = d.train.targets();
        assert!((t.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn encodings() {
        let f = write("color,flag,sex,k,y\nred,0,m,1,1\ngreen,1,f,1,2\nblue,0,m,1,3\nred,1,f,1,5\n");
        let d = load_csv_dataset(f.path(), "y", &no_split()).unwrap();
        assert_eq!(d.dropped, vec!["k".to_string()]);
        let names: Vec<String> = d.features.iter().map(|c| c.name()).collect();
        assert_eq!(names, ["color=blue", "color=green", "color=red", "flag=1", "sex=m"]);
        assert_eq!(d.train.x(0), &[0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn ingestion_errors_carry_location() {
        let f = write("a,y\n1,2\nx,3\n4,5\n");
        match load_csv_dataset(f.path(), "y", &no_split()) {
            Err(Error::Ingest { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "a")),
            other => panic!("{other:?}"),
        }
        let f = write("a,y\n1,2\n3,4\n");
        assert!(matches!(
            load_csv_dataset(f.path(), "target", &no_split()),
            Err(Error::Ingest { row: 0, .. })
        ));
        let f = write("a,y\n1,2\n,4\n");
        assert!(matches!(
            load_csv_dataset(f.path(), "y", &no_split()),
            Err(Error::Ingest { row: 2, .. })
        ));
    }

    #[test]
    fn round_trip_and_split() {
        let mut s = String::from("a,y\n");
        for i in 0..40 {
            s.push_str(&format!(
                "{},{}\n",
                (i as f64 * 0.37).sin() * 5.0 + 1e3,
                i as f64 * 1.5 - 7.0
            ));
        }
        let f = write(&s);
        let cfg = IngestConfig {
            test_fraction: 0.25,
            seed: 9,
            ..IngestConfig::default()
        };
        let d = load_csv_dataset(f.path(), "y", &cfg).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (30, 10));
        let FeatureColumn::Standardized(sa) = &d.features[0] else {
            panic!()
        };
        for i in 0..40 {
            let raw = (i as f64 * 0.37).sin() * 5.0 + 1e3;
            assert!((sa.de_standardize(sa.standardize(raw)) - raw).abs() < 1e-12);
            let y = i as f64 * 1.5 - 7.0;
            assert!((d.target.de_standardize(d.target.standardize(y)) - y).abs() < 1e-12);
        }
        assert_eq!(load_csv_dataset(f.path(), "y", &cfg).unwrap(), d);
    }
}
