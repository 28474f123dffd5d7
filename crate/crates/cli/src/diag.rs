//! Line-anchored diagnostics for scenario and manifest files.

use std::fmt;
use std::path::{Path, PathBuf};

/// `path:line:column: message`, with 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: error: {}",
            self.path.display(),
            self.line,
            self.column,
            self.message
        )
    }
}

impl std::error::Error for Diagnostic {}

/// A loaded text file, kept around so later semantic errors can point at a line.
#[derive(Debug, Clone)]
pub struct Source {
    pub path: PathBuf,
    pub text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self, Diagnostic> {
        let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: format!("cannot read file: {e}"),
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
        })
    }

    pub fn dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }

    /// Parses the text as TOML, turning syntax and schema errors into diagnostics.
    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T, Diagnostic> {
        toml::from_str(&self.text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| self.position(s.start))
                .unwrap_or((1, 1));
            Diagnostic {
                path: self.path.clone(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        (line, column)
    }

    /// Diagnostic at `key` inside `[table]`, falling back to the table header
    /// and then to the first line.
    pub fn at(&self, table: &str, key: &str, message: impl Into<String>) -> Diagnostic {
        let (line, column) = self.locate(table, key).unwrap_or((1, 1));
        Diagnostic {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    fn locate(&self, table: &str, key: &str) -> Option<(usize, usize)> {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim_start();
            let indent = raw.len() - line.len();
            if let Some(rest) = line.strip_prefix('[') {
                if let Some(end) = rest.find(']') {
                    current = rest[..end].trim_matches(|c| c == '[' || c == ' ').to_string();
                    if current == table && header.is_none() {
                        header = Some((i + 1, indent + 1));
                    }
                    continue;
                }
            }
            if current != table || key.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some((i + 1, indent + 1));
                }
            }
        }
        header
    }
}
