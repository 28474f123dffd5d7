//! Run manifests: a scenario file plus sweep axes.
//!
//! ```toml
//! version = 1
//! scenario = "scalar_sigma.toml"   # relative to the manifest
//! out = "runs/scalar"              # optional; --out takes precedence
//! max_points = 10000               # optional grid-size cap
//!
//! [sweep]
//! kappa = [24.0, 48.0, 96.0]
//! seed = [1, 2]
//! ```
//!
//! Sweep points enumerate the Cartesian product in the canonical axis order
//! of [`SWEEP_AXES`], last axis fastest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::diag::{Diagnostic, Source};
use crate::scenario::SWEEP_AXES;

/// Version of the manifest, report and summary formats.
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    version: u32,
    scenario: String,
    out: Option<String>,
    max_points: Option<usize>,
    #[serde(default)]
    sweep: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub path: PathBuf,
    /// Manifest text, kept for line-anchored diagnostics about sweep values.
    pub source: Source,
    pub scenario: PathBuf,
    pub out: Option<PathBuf>,
    /// Axes in canonical order, each with its values.
    pub axes: Vec<(String, Vec<f64>)>,
    pub max_points: usize,
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, f64)>,
}

impl SweepPoint {
    pub fn id(&self) -> String {
        format!("{:04}", self.index)
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, Diagnostic> {
        let src = Source::read(path)?;
        let file: ManifestFile = src.parse()?;
        if file.version != FORMAT_VERSION {
            return Err(src.at(
                "",
                "version",
                format!("unsupported manifest version {}; this build reads version {FORMAT_VERSION}", file.version),
            ));
        }
        let max_points = file.max_points.unwrap_or(DEFAULT_MAX_POINTS);
        for (name, values) in &file.sweep {
            if !SWEEP_AXES.contains(&name.as_str()) {
                return Err(src.at(
                    "sweep",
                    name,
                    format!("'{name}' is not a sweep axis; allowed: {}", SWEEP_AXES.join(", ")),
                ));
            }
            if values.is_empty() {
                return Err(src.at("sweep", name, format!("axis '{name}' has no values")));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(src.at("sweep", name, format!("axis '{name}' has non-finite value {v}")));
            }
        }
        let axes: Vec<(String, Vec<f64>)> = SWEEP_AXES
            .iter()
            .filter_map(|a| file.sweep.get(*a).map(|v| (a.to_string(), v.clone())))
            .collect();
        let total = axes
            .iter()
            .try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()))
            .unwrap_or(usize::MAX);
        if total > max_points {
            return Err(src.at(
                "sweep",
                "",
                format!("sweep grid has {total} points, above the cap of {max_points}"),
            ));
        }
        let dir = src.dir().to_path_buf();
        Ok(Self {
            path: path.to_path_buf(),
            source: src.clone(),
            scenario: dir.join(&file.scenario),
            out: file.out.map(|o| dir.join(o)),
            axes,
            max_points,
        })
    }

    pub fn axis_names(&self) -> Vec<String> {
        self.axes.iter().map(|(n, _)| n.clone()).collect()
    }

    /// All grid points, last axis varying fastest. A manifest without axes has one point.
    pub fn points(&self) -> Vec<SweepPoint> {
        let total: usize = self.axes.iter().map(|(_, v)| v.len()).product();
        (0..total)
            .map(|index| {
                let mut rest = index;
                let mut values = vec![(String::new(), 0.0); self.axes.len()];
                for (slot, (name, vals)) in values.iter_mut().zip(&self.axes).rev() {
                    *slot = (name.clone(), vals[rest % vals.len()]);
                    rest /= vals.len();
                }
                SweepPoint { index, values }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn grid_order_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.toml",
            "version = 1\nscenario = \"s.toml\"\n[sweep]\nseed = [1, 2]\nkappa = [5.0, 10.0, 20.0]\n",
        );
        let m = RunManifest::load(&p).unwrap();
        assert_eq!(m.axis_names(), vec!["kappa", "seed"]);
        let pts = m.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].values, vec![("kappa".into(), 5.0), ("seed".into(), 2.0)]);
        assert_eq!(pts[5].id(), "0005");
        assert_eq!(m.scenario, dir.path().join("s.toml"));
    }

    #[test]
    fn rejects_unknown_axis_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.toml", "version = 1\nscenario = \"s.toml\"\n[sweep]\nomega = [1.0]\n");
        let d = RunManifest::load(&p).unwrap_err();
        assert_eq!(d.line, 4);
        assert!(d.message.contains("omega"));
    }

    #[test]
    fn rejects_oversized_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.toml",
            "version = 1\nscenario = \"s.toml\"\nmax_points = 3\n[sweep]\nkappa = [1.0, 2.0]\nseed = [1, 2]\n",
        );
        assert!(RunManifest::load(&p).unwrap_err().message.contains("cap"));
    }

    #[test]
    fn single_point_without_axes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.toml", "version = 1\nscenario = \"s.toml\"\n");
        let m = RunManifest::load(&p).unwrap();
        assert_eq!(m.points().len(), 1);
        assert!(m.points()[0].values.is_empty());
    }

    #[test]
    fn rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.toml", "version = 9\nscenario = \"s.toml\"\n");
        assert_eq!(RunManifest::load(&p).unwrap_err().line, 1);
    }
}
