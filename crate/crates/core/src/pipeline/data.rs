//! CSV ingestion and output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DVector<f64>>,
    /// Ground-truth labels in `1..=L`.
    pub labels: Option<Vec<usize>>,
    pub feature_names: Option<Vec<String>>,
    /// Original label strings, indexed by `label − 1`.
    pub label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let ds = Self {
            points,
            labels: None,
            feature_names: None,
            label_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        self.labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    pub fn num_labels(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().copied().max().unwrap_or(0))
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Data("no data rows".into()));
        }
        let n = self.dim();
        for (row, p) in self.points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::Data(format!("row {} has {} values, expected {n}", row + 1, p.len())));
            }
            if let Some(col) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: row + 1,
                    column: col + 1,
                    message: "non-finite value".into(),
                });
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.len() {
                return Err(Error::Data(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    self.points.len()
                )));
            }
            if let Some(row) = labels.iter().position(|&l| l == 0) {
                return Err(Error::Data(format!("label at row {} is 0; labels start at 1", row + 1)));
            }
        }
        Ok(())
    }
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

/// Reads a numeric CSV. A first row containing any non-numeric cell is
/// treated as a header. `label_column` names a column (by header name, or
/// by 1-based index when there is no header) whose values become labels
/// `1..=L` in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(Error::Data("empty file".into()));
    }
    let width = rows[0].1.len();
    let has_header = rows[0].1.iter().any(|c| !is_number(c));
    let header: Option<Vec<String>> = has_header.then(|| rows[0].1.iter().map(str::to_string).collect());
    let body = if has_header { &rows[1..] } else { &rows[..] };
    if body.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let label_idx = match label_column {
        None => None,
        Some(name) => Some(match &header {
            Some(h) => h
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Data(format!("label column '{name}' not found in header")))?,
            None => match name.parse::<usize>() {
                Ok(i) if (1..=width).contains(&i) => i - 1,
                _ => return Err(Error::Data(format!("label column '{name}' not found (file has no header)"))),
            },
        }),
    };

    let mut points = Vec::with_capacity(body.len());
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::Parse {
                row: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let mut values = Vec::with_capacity(width);
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == label_idx {
                let next = label_names.len() + 1;
                let id = *label_ids.entry(cell.to_string()).or_insert_with(|| {
                    label_names.push(cell.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: *line,
                column: col + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: *line,
                    column: col + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        points.push(DVector::from_vec(values));
    }
    if points[0].is_empty() {
        return Err(Error::Data("no feature columns".into()));
    }
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, s)| s)
            .collect()
    });
    let ds = Dataset {
        points,
        labels: label_idx.map(|_| labels),
        feature_names,
        label_names: label_idx.map(|_| label_names),
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes rows of numbers under `header`, with an optional trailing
/// integer column.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    header: &[String],
    rows: &[DVector<f64>],
    extra: Option<(&str, &[usize])>,
) -> Result<()> {
    let mut out = String::new();
    let mut cols: Vec<&str> = header.iter().map(String::as_str).collect();
    if let Some((name, _)) = extra {
        cols.push(name);
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some((_, values)) = extra {
            cells.push(values[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    File::create(path.as_ref())?.write_all(out.as_bytes())?;
    Ok(())
}

/// Column names `prefix1..prefixN`.
pub fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}
