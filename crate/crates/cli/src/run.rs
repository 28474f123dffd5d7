//! The `run` verb: build every sweep point, integrate in a worker pool and
//! write per-point artifacts plus an index-ordered summary.
//!
//! Artifacts in the output directory:
//!
//! - `traj_<id>.csv`: recorded trajectory (absent when the point blew up).
//! - `report_<id>.toml`: the point's bound report and class constants.
//! - `summary.csv`: one row per point, ordered by sweep index.
//! - `timing.csv`: wall time per point. Kept apart so the other files are
//!   reproducible byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sgrobust::bounds::{evaluate, BoundReport};
use sgrobust::plants::ClassConstants;
use sgrobust::speedgrad::LawFamily;

use crate::diag::Diagnostic;
use crate::manifest::{RunManifest, SweepPoint, FORMAT_VERSION};
use crate::scenario::{self, Built};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub tail_fraction: Option<f64>,
    pub strict: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Pool(String),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Pass,
    Warn,
    Fail,
    Blowup,
    Error,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Warn => "warn",
            Self::Fail => "fail",
            Self::Blowup => "blowup",
            Self::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub point: SweepPoint,
    pub status: PointStatus,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub axes: Vec<String>,
    pub points: Vec<PointOutcome>,
    pub strict: bool,
}

impl RunOutcome {
    /// True iff every certificate of every point passed (warnings fail in strict mode).
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| match p.status {
            PointStatus::Pass => true,
            PointStatus::Warn => !self.strict,
            _ => false,
        })
    }
}

#[derive(Serialize)]
struct PointReport<'a> {
    schema_version: u32,
    scenario: &'a str,
    index: usize,
    id: String,
    status: &'static str,
    axes: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    class: &'a ClassConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a BoundReport>,
}

/// Builds all sweep points, stopping at nothing: every bad point yields a diagnostic.
fn build_points(manifest: &RunManifest, tail: Option<f64>) -> Result<Vec<(SweepPoint, Built)>, RunError> {
    let (base, src) = scenario::load(&manifest.scenario).map_err(|d| RunError::Invalid(vec![d]))?;
    let mut built = Vec::new();
    let mut diags = Vec::new();
    for point in manifest.points() {
        let mut file = base.clone();
        let mut ok = true;
        for (axis, value) in &point.values {
            if let Err(msg) = file.apply_override(axis, *value) {
                diags.push(manifest.source.at("sweep", axis, msg));
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        match scenario::build(&file, &src, tail) {
            Ok(b) => built.push((point, b)),
            Err(mut d) => {
                if !point.values.is_empty() {
                    let at: Vec<String> = point.values.iter().map(|(a, v)| format!("{a} = {v}")).collect();
                    d.message = format!("{} (sweep point {}: {})", d.message, point.id(), at.join(", "));
                }
                diags.push(d);
            }
        }
    }
    diags.dedup();
    if diags.is_empty() {
        Ok(built)
    } else {
        Err(RunError::Invalid(diags))
    }
}

fn run_point(point: &SweepPoint, built: &Built, out: &Path) -> Result<PointOutcome, RunError> {
    let start = Instant::now();
    let id = point.id();
    let (status, report, error, trajectory) = match evaluate(&built.scenario, &built.context) {
        Ok(a) => {
            let status = if a.report.blowup_time.is_some() {
                PointStatus::Blowup
            } else if !a.report.passed(false) {
                PointStatus::Fail
            } else if !a.report.passed(true) {
                PointStatus::Warn
            } else {
                PointStatus::Pass
            };
            (status, Some(a.report), None, a.trajectory)
        }
        Err(e) => (PointStatus::Error, None, Some(e.to_string()), None),
    };
    if let Some(traj) = &trajectory {
        let path = out.join(format!("traj_{id}.csv"));
        let f = File::create(&path).map_err(io_err(path.display().to_string()))?;
        let mut w = BufWriter::new(f);
        traj.write_csv(&mut w).map_err(io_err(path.display().to_string()))?;
        w.flush().map_err(io_err(path.display().to_string()))?;
    }
    let doc = PointReport {
        schema_version: FORMAT_VERSION,
        scenario: &built.name,
        index: point.index,
        id: id.clone(),
        status: status.as_str(),
        axes: point.values.iter().cloned().collect(),
        error: error.as_deref(),
        class: &built.class,
        report: report.as_ref(),
    };
    let text = toml::to_string(&doc).map_err(|e| RunError::Io {
        context: format!("serializing report {id}"),
        source: std::io::Error::other(e),
    })?;
    let path = out.join(format!("report_{id}.toml"));
    std::fs::write(&path, text).map_err(io_err(path.display().to_string()))?;
    Ok(PointOutcome {
        point: point.clone(),
        status,
        report,
        error,
        wall: start.elapsed(),
    })
}

/// Column names of `summary.csv` after the sweep axes.
pub const SUMMARY_COLUMNS: [&str; 14] = [
    "law",
    "status",
    "delta_star",
    "k0",
    "corollary_bound",
    "error_bound_x",
    "primary_bound",
    "tail_sup_q",
    "tail_sup_x_norm",
    "margin",
    "margin_x",
    "certificates_passed",
    "certificates_total",
    "blowup_time",
];

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// The bound the tail supremum of `Q` is compared with: the corollary bound for
/// σ-modified and combined laws, `Δ*` for frozen parameters, `Δ` for an
/// applicable deadzone.
fn primary_bound(r: &BoundReport) -> Option<f64> {
    match r.law.as_str() {
        "sigma" | "combined" => r.corollary_bound,
        "frozen" => Some(r.delta_star),
        "deadzone" => r.deadzone_level.filter(|l| r.delta_star < *l),
        _ => None,
    }
}

fn summary_row(p: &PointOutcome) -> Vec<String> {
    let mut row = vec![FORMAT_VERSION.to_string(), p.point.index.to_string(), p.point.id()];
    row.extend(p.point.values.iter().map(|(_, v)| format!("{v}")));
    let r = p.report.as_ref();
    let meas = r.and_then(|r| r.measured);
    let primary = r.and_then(primary_bound);
    let eb = r.and_then(|r| r.error_bound_x).filter(|e| !e.degenerate).map(|e| e.value);
    row.extend([
        r.map_or_else(String::new, |r| r.law.clone()),
        p.status.as_str().to_string(),
        num(r.map(|r| r.delta_star)),
        num(r.and_then(|r| r.k0)),
        num(r.and_then(|r| r.corollary_bound)),
        num(eb),
        num(primary),
        num(meas.map(|m| m.tail_sup_q)),
        num(meas.map(|m| m.tail_sup_x_norm)),
        num(primary.zip(meas).map(|(b, m)| b - m.tail_sup_q)),
        num(eb.zip(meas).map(|(b, m)| b - m.tail_sup_x_norm)),
        r.map_or_else(|| "0".into(), |r| r.certificates_passed().to_string()),
        r.map_or_else(|| "0".into(), |r| r.certificates_total().to_string()),
        num(r.and_then(|r| r.blowup_time)),
    ]);
    row
}

fn write_summary(path: &Path, axes: &[String], points: &[PointOutcome]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Io {
        context: path.display().to_string(),
        source: e.into(),
    })?;
    let mut header = vec!["schema_version".to_string(), "index".into(), "id".into()];
    header.extend(axes.iter().cloned());
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    let csv_err = |e: csv::Error| RunError::Io {
        context: path.display().to_string(),
        source: e.into(),
    };
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        w.write_record(summary_row(p)).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path.display().to_string()))
}

fn write_timing(path: &Path, points: &[PointOutcome]) -> Result<(), RunError> {
    let mut text = String::from("index,id,wall_seconds\n");
    for p in points {
        text.push_str(&format!("{},{},{:.6}\n", p.point.index, p.point.id(), p.wall.as_secs_f64()));
    }
    std::fs::write(path, text).map_err(io_err(path.display().to_string()))
}

/// Runs a manifest. Validation failures return [`RunError::Invalid`] before
/// anything is written.
pub fn run(manifest_path: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let manifest = RunManifest::load(manifest_path).map_err(|d| RunError::Invalid(vec![d]))?;
    if let Some(t) = opts.tail_fraction {
        if !(t > 0.0 && t <= 1.0) {
            return Err(RunError::Invalid(vec![Diagnostic {
                path: PathBuf::from("--tail-fraction"),
                line: 1,
                column: 1,
                message: format!("tail fraction must lie in (0, 1], got {t}"),
            }]));
        }
    }
    let points = build_points(&manifest, opts.tail_fraction)?;
    let out = opts
        .out
        .clone()
        .or_else(|| manifest.out.clone())
        .unwrap_or_else(|| manifest.path.parent().unwrap_or(Path::new(".")).join("out"));
    std::fs::create_dir_all(&out).map_err(io_err(out.display().to_string()))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<Result<PointOutcome, RunError>> = pool.install(|| {
        points
            .par_iter()
            .map(|(point, built)| run_point(point, built, &out))
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let axes = manifest.axis_names();
    write_summary(&out.join("summary.csv"), &axes, &outcomes)?;
    write_timing(&out.join("timing.csv"), &outcomes)?;
    Ok(RunOutcome {
        out_dir: out,
        axes,
        points: outcomes,
        strict: opts.strict,
    })
}

/// Closed-form values of a scenario without integrating it, for `validate`.
#[derive(Debug, Clone)]
pub struct ValidationSummary {
    pub built: Built,
    pub lines: Vec<String>,
}

pub fn validate(path: &Path) -> Result<ValidationSummary, Diagnostic> {
    let built = scenario::load_and_build(path, None)?;
    let c = &built.class;
    let sc = &built.scenario;
    let mut lines = vec![
        format!("scenario {}: ok", built.name),
        format!(
            "  n = {}, m = {}, law = {}, disturbance amplitude = {}",
            sc.plant.state_dim(),
            sc.plant.param_dim(),
            sc.law.name(),
            sc.disturbance.amplitude()
        ),
        format!(
            "  alpha0 = {} (sampled {}), alpha1 = {}, sigma = {}",
            c.alpha0, c.alpha0_sampled, c.alpha1, c.sigma
        ),
        format!(
            "  attainability certificate {}, growth certificate {}",
            pass(c.attainability.passed),
            pass(c.growth.passed)
        ),
    ];
    if let Ok(ds) = sgrobust::bounds::optimum_estimate(c.alpha0, c.alpha1, c.sigma, sc.disturbance.amplitude()) {
        lines.push(format!("  delta_star = {ds}"));
    }
    if let LawFamily::Sigma { kappa, feedback } | LawFamily::Combined { kappa, feedback, .. } = &sc.law.family {
        let radius = built.context.nf_radius.unwrap_or(4.0);
        match feedback.nf_constants(&built.context.theta_star, radius) {
            Ok(nf) => {
                lines.push(format!("  rho = {}, rho' = {}", nf.rho, nf.rho_prime));
                if let Ok(gc) = sgrobust::bounds::check_gain_conditions(
                    feedback,
                    sc.law.gain.lambda_min(),
                    *kappa,
                    nf,
                    c.alpha0,
                    c.sigma,
                    built.context.epsilon,
                    &built.context.theta_star,
                ) {
                    lines.push(format!("  k0 = {}, kappa = {kappa}", gc.k0));
                    for cond in [Some(&gc.gain), Some(&gc.kappa), gc.surrogate.as_ref()].into_iter().flatten() {
                        lines.push(format!("  {}: {}", cond.name, pass(cond.passed())));
                    }
                }
            }
            Err(e) => lines.push(format!("  NF constants unavailable: {e}")),
        }
    }
    Ok(ValidationSummary { built, lines })
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}
