//! Loading, writing, and splitting collections of labeled series.
//!
//! The on-disk format is one series per line: a label field first, then
//! the values, separated by commas or tabs (auto-detected). Trailing
//! missing values pad out variable-length series and are trimmed from the
//! end; a missing value anywhere else is a parse error. Labels may be
//! integers, integer-valued floats, or arbitrary strings; string labels
//! are mapped to dense integers through a first-appearance dictionary.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::series::TimeSeries;

/// A named collection of series, optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    series: Vec<TimeSeries>,
    labels: Option<Vec<i64>>,
    label_dictionary: Option<Vec<String>>,
}

impl Dataset {
    pub fn unlabeled(name: impl Into<String>, series: Vec<TimeSeries>) -> Result<Dataset> {
        if series.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        Ok(Dataset {
            name: name.into(),
            series,
            labels: None,
            label_dictionary: None,
        })
    }

    pub fn labeled(
        name: impl Into<String>,
        series: Vec<TimeSeries>,
        labels: Vec<i64>,
    ) -> Result<Dataset> {
        if series.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        if labels.len() != series.len() {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} series",
                labels.len(),
                series.len()
            )));
        }
        Ok(Dataset {
            name: name.into(),
            series,
            labels: Some(labels),
            label_dictionary: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Original string labels when the file needed a dictionary; index `i`
    /// holds the string behind integer label `i`.
    pub fn label_dictionary(&self) -> Option<&[String]> {
        self.label_dictionary.as_deref()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Distinct labels in ascending order; empty when unlabeled.
    pub fn classes(&self) -> Vec<i64> {
        match &self.labels {
            Some(labels) => {
                let mut classes = labels.clone();
                classes.sort_unstable();
                classes.dedup();
                classes
            }
            None => Vec::new(),
        }
    }

    /// The display form of a label: its dictionary entry when one exists,
    /// the number otherwise.
    pub fn label_name(&self, label: i64) -> String {
        match &self.label_dictionary {
            Some(dictionary) => usize::try_from(label)
                .ok()
                .and_then(|i| dictionary.get(i))
                .cloned()
                .unwrap_or_else(|| label.to_string()),
            None => label.to_string(),
        }
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("nan")
}

/// Parses the one-series-per-line text format. Lines may use commas or
/// tabs; the delimiter is taken from the first non-empty line.
pub fn parse_ucr(text: &str, name: impl Into<String>) -> Result<Dataset> {
    let delimiter = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| if l.contains('\t') { '\t' } else { ',' })
        .ok_or(Error::EmptyInput("dataset text"))?;

    let mut raw_labels: Vec<String> = Vec::new();
    let mut series: Vec<TimeSeries> = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        while fields.len() > 1 && is_missing(fields.last().expect("nonempty fields")) {
            fields.pop();
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_number,
                message: "a series needs a label and at least one value".into(),
            });
        }
        let mut values = Vec::with_capacity(fields.len() - 1);
        for field in &fields[1..] {
            if is_missing(field) {
                return Err(Error::Parse {
                    line: line_number,
                    message: "missing value before the end of the series".into(),
                });
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_number,
                message: format!("cannot read {field:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_number,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(value);
        }
        raw_labels.push(fields[0].to_string());
        series.push(TimeSeries::univariate(values)?);
    }
    if series.is_empty() {
        return Err(Error::EmptyInput("dataset text"));
    }

    let (labels, label_dictionary) = resolve_labels(&raw_labels);
    Ok(Dataset {
        name: name.into(),
        series,
        labels: Some(labels),
        label_dictionary,
    })
}

/// Integer labels pass through, integer-valued floats are converted, and
/// anything else switches every label to a first-appearance dictionary.
fn resolve_labels(raw: &[String]) -> (Vec<i64>, Option<Vec<String>>) {
    let as_integers: Option<Vec<i64>> = raw.iter().map(|s| s.parse().ok()).collect();
    if let Some(labels) = as_integers {
        return (labels, None);
    }
    let as_floats: Option<Vec<i64>> = raw
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && v.fract() == 0.0 && v.abs() < 2f64.powi(53))
                .map(|v| v as i64)
        })
        .collect();
    if let Some(labels) = as_floats {
        return (labels, None);
    }
    let mut dictionary: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            match dictionary.iter().position(|d| d == s) {
                Some(i) => i as i64,
                None => {
                    dictionary.push(s.clone());
                    (dictionary.len() - 1) as i64
                }
            }
        })
        .collect();
    (labels, Some(dictionary))
}

/// Reads a file in the one-series-per-line format; the dataset is named
/// after the file stem.
pub fn load_ucr(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_ucr(&text, name)
}

/// Writes the comma-delimited form read back by [`parse_ucr`]. Unlabeled
/// datasets get a constant `0` label column; dictionary labels are written
/// as their original strings.
pub fn write_ucr(dataset: &Dataset, path: &Path) -> Result<()> {
    if dataset.series.iter().any(|s| s.num_features() != 1) {
        return Err(Error::InvalidConfig(
            "the line format stores univariate series only".into(),
        ));
    }
    let mut file = fs::File::create(path)?;
    for (i, series) in dataset.series.iter().enumerate() {
        let label = match &dataset.labels {
            Some(labels) => dataset.label_name(labels[i]),
            None => "0".to_string(),
        };
        write!(file, "{label}")?;
        for value in series.values().row(0) {
            write!(file, ",{value}")?;
        }
        writeln!(file)?;
    }
    Ok(())
}

/// Splits a dataset into shuffled parts with the given size fractions,
/// stratified by class when labels are present. Within each part the
/// original order is kept. Fractions must be positive and sum to one;
/// a part that would come out empty is an error.
pub fn split_dataset(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    if fractions.is_empty() {
        return Err(Error::EmptyInput("split fractions"));
    }
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }

    let mut rng = stream_rng(seed, "dataset-split");
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    let groups: Vec<Vec<usize>> = match &dataset.labels {
        Some(labels) => dataset
            .classes()
            .into_iter()
            .map(|class| {
                (0..dataset.len())
                    .filter(|&i| labels[i] == class)
                    .collect()
            })
            .collect(),
        None => vec![(0..dataset.len()).collect()],
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        let count = group.len();
        let mut cumulative = 0.0;
        let mut start = 0;
        for (part, fraction) in parts.iter_mut().zip(fractions) {
            cumulative += fraction;
            let end = ((cumulative * count as f64).round() as usize).min(count);
            part.extend_from_slice(&group[start..end]);
            start = end;
        }
        parts.last_mut().expect("nonempty parts").extend_from_slice(&group[start..]);
    }

    parts
        .into_iter()
        .enumerate()
        .map(|(index, mut indices)| {
            if indices.is_empty() {
                return Err(Error::EmptySplit {
                    index,
                    fraction: fractions[index],
                    total: dataset.len(),
                });
            }
            indices.sort_unstable();
            let series = indices.iter().map(|&i| dataset.series[i].clone()).collect();
            let labels = dataset
                .labels
                .as_ref()
                .map(|labels| indices.iter().map(|&i| labels[i]).collect());
            Ok(Dataset {
                name: format!("{}[{index}]", dataset.name),
                series,
                labels,
                label_dictionary: dataset.label_dictionary.clone(),
            })
        })
        .collect()
}
