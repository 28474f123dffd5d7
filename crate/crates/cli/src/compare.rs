//! The `compare` verb: join summaries on their shared sweep axes and tabulate
//! measured-versus-bound margins.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::run::SUMMARY_COLUMNS;

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("compare needs at least one summary file")]
    Empty,
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("schema mismatch: {a} has version {va}, {b} has version {vb}")]
    Schema {
        a: PathBuf,
        va: String,
        b: PathBuf,
        vb: String,
    },
    #[error("{path}: join key {key} appears more than once")]
    Ambiguous { path: PathBuf, key: String },
}

/// A parsed `summary.csv`.
#[derive(Debug, Clone)]
pub struct Summary {
    pub path: PathBuf,
    pub schema_version: String,
    pub axes: Vec<String>,
    pub rows: Vec<HashMap<String, String>>,
}

pub fn read_summary(path: &Path) -> Result<Summary, CompareError> {
    let fail = |message: String| CompareError::Read {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| fail(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let (Some(id_at), Some(law_at)) = (
        header.iter().position(|h| h == "id"),
        header.iter().position(|h| h == "law"),
    ) else {
        return Err(fail("not a summary file: missing 'id' or 'law' column".into()));
    };
    if header.first().map(String::as_str) != Some("schema_version") || law_at < id_at {
        return Err(fail("not a summary file: unexpected column layout".into()));
    }
    for col in SUMMARY_COLUMNS {
        if !header.iter().any(|h| h == col) {
            return Err(fail(format!("missing column '{col}'")));
        }
    }
    let axes = header[id_at + 1..law_at].to_vec();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        rows.push(header.iter().cloned().zip(rec.iter().map(str::to_string)).collect::<HashMap<_, _>>());
    }
    let schema_version = rows
        .first()
        .and_then(|r| r.get("schema_version").cloned())
        .unwrap_or_default();
    if let Some(r) = rows.iter().find(|r| r.get("schema_version") != Some(&schema_version)) {
        return Err(fail(format!(
            "mixed schema versions {schema_version} and {}",
            r["schema_version"]
        )));
    }
    Ok(Summary {
        path: path.to_path_buf(),
        schema_version,
        axes,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub law: String,
    pub status: String,
    pub tail_sup_q: Option<f64>,
    pub primary_bound: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub key: Vec<(String, String)>,
    pub entries: Vec<Entry>,
}

impl ComparisonRow {
    /// `tail_sup_q` of input `i` minus that of the first input.
    pub fn tail_difference(&self, i: usize) -> Option<f64> {
        Some(self.entries[i].tail_sup_q? - self.entries[0].tail_sup_q?)
    }

    pub fn margin_difference(&self, i: usize) -> Option<f64> {
        Some(self.entries[i].margin? - self.entries[0].margin?)
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub inputs: Vec<PathBuf>,
    /// Axes joined on; empty means rows were matched by sweep index.
    pub key_axes: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// Rows of the first input without a partner in some other input.
    pub unmatched: usize,
}

fn parse(v: Option<&String>) -> Option<f64> {
    v.filter(|s| !s.is_empty()).and_then(|s| s.parse().ok())
}

fn entry(row: &HashMap<String, String>) -> Entry {
    Entry {
        law: row.get("law").cloned().unwrap_or_default(),
        status: row.get("status").cloned().unwrap_or_default(),
        tail_sup_q: parse(row.get("tail_sup_q")),
        primary_bound: parse(row.get("primary_bound")),
        margin: parse(row.get("margin")),
    }
}

pub fn compare(paths: &[PathBuf]) -> Result<Comparison, CompareError> {
    if paths.is_empty() {
        return Err(CompareError::Empty);
    }
    let summaries = paths.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    let first = &summaries[0];
    for s in &summaries[1..] {
        if s.schema_version != first.schema_version {
            return Err(CompareError::Schema {
                a: first.path.clone(),
                va: first.schema_version.clone(),
                b: s.path.clone(),
                vb: s.schema_version.clone(),
            });
        }
    }
    let key_axes: Vec<String> = first
        .axes
        .iter()
        .filter(|a| summaries.iter().all(|s| s.axes.contains(a)))
        .cloned()
        .collect();
    let key_cols: Vec<String> = if key_axes.is_empty() {
        vec!["index".into()]
    } else {
        key_axes.clone()
    };
    let key_of = |row: &HashMap<String, String>| -> Vec<(String, String)> {
        key_cols
            .iter()
            .map(|c| (c.clone(), row.get(c).cloned().unwrap_or_default()))
            .collect()
    };

    let mut indices = Vec::new();
    for s in &summaries {
        let mut map: HashMap<Vec<(String, String)>, usize> = HashMap::new();
        for (i, row) in s.rows.iter().enumerate() {
            let k = key_of(row);
            if map.insert(k.clone(), i).is_some() {
                let key = k.iter().map(|(a, v)| format!("{a}={v}")).collect::<Vec<_>>().join(",");
                return Err(CompareError::Ambiguous {
                    path: s.path.clone(),
                    key,
                });
            }
        }
        indices.push(map);
    }

    let mut rows = Vec::new();
    let mut unmatched = 0;
    for row in &first.rows {
        let key = key_of(row);
        let found: Option<Vec<Entry>> = summaries
            .iter()
            .zip(&indices)
            .map(|(s, idx)| idx.get(&key).map(|&i| entry(&s.rows[i])))
            .collect();
        match found {
            Some(entries) => rows.push(ComparisonRow { key, entries }),
            None => unmatched += 1,
        }
    }
    Ok(Comparison {
        inputs: paths.to_vec(),
        key_axes,
        rows,
        unmatched,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.inputs.iter().enumerate() {
            writeln!(f, "[{i}] {}", p.display())?;
        }
        let mut header: Vec<String> = if self.key_axes.is_empty() {
            vec!["index".into()]
        } else {
            self.key_axes.clone()
        };
        for i in 0..self.inputs.len() {
            header.extend([
                format!("law[{i}]"),
                format!("status[{i}]"),
                format!("tail_sup_q[{i}]"),
                format!("bound[{i}]"),
                format!("margin[{i}]"),
            ]);
            if i > 0 {
                header.extend([format!("d_tail[{i}]"), format!("d_margin[{i}]")]);
            }
        }
        let mut table = vec![header];
        for row in &self.rows {
            let mut line: Vec<String> = row.key.iter().map(|(_, v)| v.clone()).collect();
            for (i, e) in row.entries.iter().enumerate() {
                line.extend([
                    e.law.clone(),
                    e.status.clone(),
                    cell(e.tail_sup_q),
                    cell(e.primary_bound),
                    cell(e.margin),
                ]);
                if i > 0 {
                    line.extend([cell(row.tail_difference(i)), cell(row.margin_difference(i))]);
                }
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for r in &table {
            let padded: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            writeln!(f, "{}", padded.join("  ").trim_end())?;
        }
        if self.unmatched > 0 {
            writeln!(f, "{} row(s) of [0] had no partner in every input", self.unmatched)?;
        }
        Ok(())
    }
}
