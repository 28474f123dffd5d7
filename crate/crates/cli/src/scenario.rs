//! Scenario files: TOML schema, sweep overrides and construction of the
//! closed-loop experiment.
//!
//! ```toml
//! [plant]
//! kind = "linear_output"          # or "scalar" with a = …, b = …
//! A = [[0.0, 1.0], [-2.0, -2.0]]  # or A = { csv = "A.csv" }
//! B = [0.0, 1.0]
//! L = [[1.0, 0.0], [0.0, 1.0]]
//! g = [1.0, 1.0]
//!
//! [ideal]
//! mu = 5.0                        # θ* = -μg; or theta_star = [...]; scalar: pole = -1
//!
//! [goal]
//! kind = "lyapunov"               # or "quadratic" with H = [[...]]
//! shift_factor = 0.9
//! ```
//!
//! The remaining tables are `[disturbance]`, `[law]` (with an optional
//! `[law.feedback]` and `[law.psi]`), `[initial]`, `[sim]` and `[bounds]`.
//! See the shipped files under `scenarios/` for complete examples.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sgrobust::bounds::{BoundContext, ClassData, LinearData};
use sgrobust::model::{Disturbance, Goal, Plant, QuadraticGoal, ScenarioSpec};
use sgrobust::plants::{
    class_constants, ClassConstants, LinearOutputPlant, OutputDesign, ScalarAffinePlant, ScalarForm,
};
use sgrobust::sim::SimConfig;
use sgrobust::speedgrad::{AdaptLaw, Feedback, GainMatrix, GradientSource, PseudoGradient};
use sgrobust::Error as CoreError;

use crate::diag::{Diagnostic, Source};

/// Matrix given inline as rows or read from a headerless CSV file.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixCfg {
    Rows(Vec<Vec<f64>>),
    Csv { csv: String },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum VectorCfg {
    Values(Vec<f64>),
    Csv { csv: String },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GainCfg {
    Scalar(f64),
    Matrix(MatrixCfg),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantCfg {
    pub kind: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "A")]
    pub a_matrix: Option<MatrixCfg>,
    #[serde(rename = "B")]
    pub b_vector: Option<VectorCfg>,
    #[serde(rename = "L")]
    pub l_matrix: Option<MatrixCfg>,
    pub g: Option<VectorCfg>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealCfg {
    pub theta_star: Option<Vec<f64>>,
    pub mu: Option<f64>,
    pub pole: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalCfg {
    pub kind: String,
    #[serde(rename = "H")]
    pub h: Option<MatrixCfg>,
    pub shift_factor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceCfg {
    pub kind: String,
    pub amplitude: Option<f64>,
    pub direction: Option<Vec<f64>>,
    pub omega: Option<f64>,
    pub phase: Option<f64>,
    pub seed: Option<u64>,
    pub hold: Option<f64>,
}

impl Default for DisturbanceCfg {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            amplitude: None,
            direction: None,
            omega: None,
            phase: None,
            seed: None,
            hold: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackCfg {
    pub kind: String,
    pub alpha: Option<f64>,
    pub amplitude: Option<f64>,
    pub prior: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiCfg {
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub scale: f64,
    pub reference: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawCfg {
    pub family: String,
    pub gamma: Option<GainCfg>,
    /// Multiplies `gamma`; set by the `gamma_scale` sweep axis.
    pub gamma_scale: Option<f64>,
    pub kappa: Option<f64>,
    pub level: Option<f64>,
    pub gradient: Option<String>,
    pub feedback: Option<FeedbackCfg>,
    pub psi: Option<PsiCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCfg {
    pub x0: Vec<f64>,
    pub theta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCfg {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub record_stride: Option<i64>,
    pub tail_fraction: Option<f64>,
    pub max_step_discontinuous: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsCfg {
    pub epsilon: Option<f64>,
    pub nf_radius: Option<f64>,
    pub seed: Option<u64>,
}

/// Parsed scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub plant: PlantCfg,
    #[serde(default)]
    pub ideal: IdealCfg,
    pub goal: Option<GoalCfg>,
    #[serde(default)]
    pub disturbance: DisturbanceCfg,
    pub law: LawCfg,
    pub initial: InitialCfg,
    #[serde(default)]
    pub sim: SimCfg,
    #[serde(default)]
    pub bounds: BoundsCfg,
}

/// Default `ε` when `[bounds]` does not give one.
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Default `σ̂/σ*` for the Lyapunov-equation goal.
pub const DEFAULT_SHIFT_FACTOR: f64 = 0.9;

/// Parameters that a manifest may sweep, in canonical order.
pub const SWEEP_AXES: [&str; 7] = ["kappa", "alpha", "delta_f", "gamma_scale", "deadzone", "epsilon", "seed"];

impl ScenarioFile {
    /// Applies one sweep-axis value. The error names what is missing.
    pub fn apply_override(&mut self, axis: &str, value: f64) -> Result<(), String> {
        match axis {
            "kappa" => match self.law.family.as_str() {
                "sigma" | "combined" => self.law.kappa = Some(value),
                f => return Err(format!("axis 'kappa' needs a sigma or combined law, scenario has '{f}'")),
            },
            "alpha" => match self.law.feedback.as_mut() {
                Some(fb) if fb.kind == "linear" || fb.kind == "ball_deadzone" => fb.alpha = Some(value),
                Some(fb) if fb.kind == "relay" => fb.amplitude = Some(value),
                _ => return Err("axis 'alpha' needs a linear, ball_deadzone or relay feedback".into()),
            },
            "delta_f" => {
                if self.disturbance.kind == "zero" {
                    return Err("axis 'delta_f' needs a nonzero disturbance kind".into());
                }
                self.disturbance.amplitude = Some(value);
            }
            "gamma_scale" => self.law.gamma_scale = Some(value),
            "deadzone" => {
                if self.law.family != "deadzone" {
                    return Err(format!("axis 'deadzone' needs a deadzone law, scenario has '{}'", self.law.family));
                }
                self.law.level = Some(value);
            }
            "epsilon" => self.bounds.epsilon = Some(value),
            "seed" => {
                if !(value >= 0.0 && value.fract() == 0.0 && value < 2f64.powi(53)) {
                    return Err(format!("seed must be a nonnegative integer, got {value}"));
                }
                let seed = value as u64;
                self.disturbance.seed = Some(seed);
                self.bounds.seed = Some(seed);
            }
            other => return Err(format!("unknown sweep axis '{other}'; allowed: {}", SWEEP_AXES.join(", "))),
        }
        Ok(())
    }
}

/// A fully constructed scenario with its bound context.
#[derive(Debug, Clone)]
pub struct Built {
    pub name: String,
    pub scenario: ScenarioSpec,
    pub context: BoundContext,
    pub design: OutputDesign,
    pub class: ClassConstants,
}

/// Reads and parses a scenario file.
pub fn load(path: &Path) -> Result<(ScenarioFile, Source), Diagnostic> {
    let src = Source::read(path)?;
    let file = src.parse::<ScenarioFile>()?;
    Ok((file, src))
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn read_csv(src: &Source, rel: &str) -> Result<Vec<Vec<f64>>, String> {
    let path = src.dir().join(rel);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

fn matrix(src: &Source, cfg: &MatrixCfg) -> Result<DMatrix<f64>, String> {
    let rows = match cfg {
        MatrixCfg::Rows(r) => r.clone(),
        MatrixCfg::Csv { csv } => read_csv(src, csv)?,
    };
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err("matrix must be nonempty".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!("row {} has {} entries, expected {ncols}", bad + 1, rows[bad].len()));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

fn vector_cfg(src: &Source, cfg: &VectorCfg) -> Result<DVector<f64>, String> {
    match cfg {
        VectorCfg::Values(v) => Ok(vector(v)),
        VectorCfg::Csv { csv } => {
            let flat: Vec<f64> = read_csv(src, csv)?.into_iter().flatten().collect();
            Ok(vector(&flat))
        }
    }
}

fn core<'a>(src: &'a Source, table: &str, key: &str) -> impl Fn(CoreError) -> Diagnostic + 'a {
    let (table, key) = (table.to_string(), key.to_string());
    move |e| src.at(&table, &key, e.to_string())
}

fn require<T: Copy>(src: &Source, v: Option<T>, table: &str, key: &str) -> Result<T, Diagnostic> {
    v.ok_or_else(|| src.at(table, "", format!("missing key '{key}' in [{table}]")))
}

fn positive(src: &Source, v: f64, table: &str, key: &str) -> Result<f64, Diagnostic> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(src.at(table, key, format!("'{key}' must be positive and finite, got {v}")))
    }
}

/// Builds the scenario. `tail_override` replaces `[sim] tail_fraction`.
pub fn build(file: &ScenarioFile, src: &Source, tail_override: Option<f64>) -> Result<Built, Diagnostic> {
    // Plant and linear-output view.
    let p = &file.plant;
    let (plant, linear, g): (Arc<dyn Plant>, LinearOutputPlant, Option<DVector<f64>>) = match p.kind.as_str() {
        "scalar" => {
            let a = require(src, p.a, "plant", "a")?;
            let b = require(src, p.b, "plant", "b")?;
            let sp = ScalarAffinePlant::new(a, b, ScalarForm::StateFeedback);
            let g = match &p.g {
                Some(cfg) => vector_cfg(src, cfg).map_err(|e| src.at("plant", "g", e))?,
                None => DVector::from_element(1, 1.0),
            };
            let lin = sp.to_linear_output().map_err(core(src, "plant", "kind"))?;
            (Arc::new(sp), lin, Some(g))
        }
        "linear_output" => {
            let get_m = |c: &Option<MatrixCfg>, key: &str| -> Result<DMatrix<f64>, Diagnostic> {
                let c = c
                    .as_ref()
                    .ok_or_else(|| src.at("plant", "", format!("missing key '{key}' in [plant]")))?;
                matrix(src, c).map_err(|e| src.at("plant", key, e))
            };
            let a = get_m(&p.a_matrix, "A")?;
            let l = get_m(&p.l_matrix, "L")?;
            let b = match &p.b_vector {
                Some(c) => vector_cfg(src, c).map_err(|e| src.at("plant", "B", e))?,
                None => return Err(src.at("plant", "", "missing key 'B' in [plant]")),
            };
            let lin = LinearOutputPlant::new(a, b, l).map_err(core(src, "plant", "A"))?;
            let g = match &p.g {
                Some(cfg) => Some(vector_cfg(src, cfg).map_err(|e| src.at("plant", "g", e))?),
                None => None,
            };
            (Arc::new(lin.clone()), lin, g)
        }
        other => {
            return Err(src.at(
                "plant",
                "kind",
                format!("unknown plant kind '{other}'; expected 'scalar' or 'linear_output'"),
            ))
        }
    };
    let (n, m) = (plant.state_dim(), plant.param_dim());
    if let Some(g) = &g {
        if g.len() != m {
            return Err(src.at("plant", "g", format!("g must have length {m}, got {}", g.len())));
        }
    }

    // Ideal parameters.
    let id = &file.ideal;
    let given = [id.theta_star.is_some(), id.mu.is_some(), id.pole.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given > 1 {
        return Err(src.at("ideal", "", "give only one of 'theta_star', 'mu', 'pole'"));
    }
    let theta_star = if let Some(ts) = &id.theta_star {
        if ts.len() != m {
            return Err(src.at("ideal", "theta_star", format!("theta_star must have length {m}, got {}", ts.len())));
        }
        vector(ts)
    } else if let Some(mu) = id.mu {
        let g = g
            .as_ref()
            .ok_or_else(|| src.at("ideal", "mu", "'mu' needs the passification vector 'g' in [plant]"))?;
        sgrobust::plants::ideal_gain_high_gain(g, mu).map_err(core(src, "ideal", "mu"))?
    } else if p.kind == "scalar" {
        let pole = id.pole.unwrap_or(-1.0);
        if !(pole < 0.0) {
            return Err(src.at("ideal", "pole", format!("pole must be negative, got {pole}")));
        }
        let (a, b) = (p.a.unwrap_or(0.0), p.b.unwrap_or(0.0));
        if b == 0.0 {
            return Err(src.at("plant", "b", "b must be nonzero"));
        }
        DVector::from_element(1, (pole - a) / b)
    } else if id.pole.is_some() {
        return Err(src.at("ideal", "pole", "'pole' applies to scalar plants only"));
    } else {
        return Err(src.at("ideal", "", "linear plants need 'theta_star' or 'mu' in [ideal]"));
    };

    // Prior of the feedback, if any; the design uses it as θ̄.
    let prior = match &file.law.feedback {
        Some(FeedbackCfg { prior: Some(pr), .. }) => {
            if pr.len() != m {
                return Err(src.at("law.feedback", "prior", format!("prior must have length {m}, got {}", pr.len())));
            }
            vector(pr)
        }
        _ => DVector::zeros(m),
    };

    // Goal and design.
    let g_design = g.clone().unwrap_or_else(|| DVector::zeros(m));
    let goal_kind = file.goal.as_ref().map_or("quadratic", |g| g.kind.as_str());
    let design = match goal_kind {
        "quadratic" => {
            let h = match file.goal.as_ref().and_then(|g| g.h.as_ref()) {
                Some(c) => matrix(src, c).map_err(|e| src.at("goal", "H", e))?,
                None => DMatrix::identity(n, n),
            };
            if file.goal.as_ref().is_some_and(|g| g.shift_factor.is_some()) {
                return Err(src.at("goal", "shift_factor", "'shift_factor' applies to the lyapunov goal only"));
            }
            let goal = QuadraticGoal::new(h).map_err(core(src, "goal", "H"))?;
            OutputDesign::new(linear, g_design, theta_star.clone(), prior.clone(), goal).map_err(core(src, "ideal", ""))?
        }
        "lyapunov" => {
            let gcfg = file.goal.as_ref().expect("kind came from the table");
            if gcfg.h.is_some() {
                return Err(src.at("goal", "H", "the lyapunov goal computes H; remove 'H'"));
            }
            let factor = gcfg.shift_factor.unwrap_or(DEFAULT_SHIFT_FACTOR);
            OutputDesign::with_lyapunov_goal(linear, g_design, theta_star.clone(), prior.clone(), factor)
                .map_err(core(src, "goal", "shift_factor"))?
        }
        other => {
            return Err(src.at("goal", "kind", format!("unknown goal kind '{other}'; expected 'quadratic' or 'lyapunov'")))
        }
    };
    let seed = file.bounds.seed.unwrap_or(0);
    let class = class_constants(&design, seed).map_err(|e| match e {
        CoreError::Unattainable(a) => src.at(
            "goal",
            "",
            format!("goal is not attainable at theta_star: smallest decay rate alpha0 = {a}"),
        ),
        e => src.at("ideal", "", e.to_string()),
    })?;

    // Disturbance.
    let d = &file.disturbance;
    let amp = |d: &DisturbanceCfg| require(src, d.amplitude, "disturbance", "amplitude");
    let direction = |d: &DisturbanceCfg| -> Vec<f64> {
        d.direction.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        })
    };
    let dist_err = core(src, "disturbance", "kind");
    let disturbance = match d.kind.as_str() {
        "zero" => Disturbance::Zero,
        "constant" => Disturbance::constant(amp(d)?, &direction(d)).map_err(&dist_err)?,
        "sinusoid" => Disturbance::sinusoid(
            amp(d)?,
            &direction(d),
            require(src, d.omega, "disturbance", "omega")?,
            d.phase.unwrap_or(0.0),
        )
        .map_err(&dist_err)?,
        "uniform_random" => Disturbance::uniform_random(
            amp(d)?,
            d.seed.unwrap_or(0),
            require(src, d.hold, "disturbance", "hold")?,
        )
        .map_err(&dist_err)?,
        "adversarial_sign" => Disturbance::adversarial_sign(amp(d)?).map_err(&dist_err)?,
        other => {
            return Err(src.at(
                "disturbance",
                "kind",
                format!("unknown disturbance kind '{other}'; expected zero, constant, sinusoid, uniform_random or adversarial_sign"),
            ))
        }
    };
    disturbance.validate(n).map_err(core(src, "disturbance", "direction"))?;

    // Law.
    let law_cfg = &file.law;
    let mut gain = match &law_cfg.gamma {
        None => GainMatrix::identity(m),
        Some(GainCfg::Scalar(v)) => GainMatrix::scalar(m, *v).map_err(core(src, "law", "gamma"))?,
        Some(GainCfg::Matrix(c)) => {
            let mat = matrix(src, c).map_err(|e| src.at("law", "gamma", e))?;
            GainMatrix::new(mat).map_err(core(src, "law", "gamma"))?
        }
    };
    if gain.dim() != m {
        return Err(src.at("law", "gamma", format!("gamma must be {m}x{m}")));
    }
    if let Some(s) = law_cfg.gamma_scale {
        gain = gain.scaled(positive(src, s, "law", "gamma_scale")?).map_err(core(src, "law", "gamma"))?;
    }
    let feedback = || -> Result<Feedback, Diagnostic> {
        let Some(fb) = &law_cfg.feedback else {
            return Err(src.at("law", "family", "this law needs a [law.feedback] table"));
        };
        let t = "law.feedback";
        let out = match fb.kind.as_str() {
            "zero" => Feedback::Zero,
            "linear" => Feedback::Linear {
                alpha: require(src, fb.alpha, t, "alpha")?,
                prior: prior.clone(),
            },
            "ball_deadzone" => Feedback::BallDeadzone {
                alpha: require(src, fb.alpha, t, "alpha")?,
                prior: prior.clone(),
                radius: require(src, fb.radius, t, "radius")?,
            },
            "relay" => Feedback::Relay {
                amplitude: require(src, fb.amplitude, t, "amplitude")?,
                prior: prior.clone(),
                radius: require(src, fb.radius, t, "radius")?,
            },
            other => {
                return Err(src.at(
                    t,
                    "kind",
                    format!("unknown feedback kind '{other}'; expected zero, linear, ball_deadzone or relay"),
                ))
            }
        };
        out.validate(m).map_err(core(src, t, "kind"))?;
        Ok(out)
    };
    let kappa = || require(src, law_cfg.kappa, "law", "kappa").and_then(|k| positive(src, k, "law", "kappa"));
    let law = match law_cfg.family.as_str() {
        "frozen" => AdaptLaw::frozen(m),
        "basic" => AdaptLaw::basic(gain),
        "sigma" => AdaptLaw::sigma(gain, kappa()?, feedback()?),
        "combined" => {
            let psi = match &law_cfg.psi {
                Some(ps) => {
                    let reference = match &ps.reference {
                        Some(r) if r.len() == m => vector(r),
                        Some(r) => {
                            return Err(src.at("law.psi", "reference", format!("reference must have length {m}, got {}", r.len())))
                        }
                        None => DVector::zeros(m),
                    };
                    PseudoGradient::speed_gradient(reference, ps.scale, ps.gamma)
                }
                None => PseudoGradient::zero(),
            };
            AdaptLaw::combined(gain, kappa()?, feedback()?, psi)
        }
        "deadzone" => {
            let level = require(src, law_cfg.level, "law", "level")?;
            AdaptLaw::deadzone(gain, positive(src, level, "law", "level")?)
        }
        other => {
            return Err(src.at(
                "law",
                "family",
                format!("unknown law family '{other}'; expected frozen, basic, sigma, combined or deadzone"),
            ))
        }
    };
    law.validate(m).map_err(core(src, "law", "family"))?;
    let gradient = match law_cfg.gradient.as_deref().unwrap_or("speed_gradient") {
        "speed_gradient" => GradientSource::SpeedGradient,
        "output_surrogate" => {
            let g = g.clone().ok_or_else(|| {
                src.at("law", "gradient", "'output_surrogate' needs the passification vector 'g' in [plant]")
            })?;
            GradientSource::OutputSurrogate {
                g,
                l: design.plant.l.clone(),
            }
        }
        other => {
            return Err(src.at(
                "law",
                "gradient",
                format!("unknown gradient '{other}'; expected 'speed_gradient' or 'output_surrogate'"),
            ))
        }
    };

    // Initial state.
    let init = &file.initial;
    if init.x0.len() != n {
        return Err(src.at("initial", "x0", format!("x0 must have length {n}, got {}", init.x0.len())));
    }
    let theta0 = match &init.theta0 {
        Some(t) if t.len() == m => vector(t),
        Some(t) => return Err(src.at("initial", "theta0", format!("theta0 must have length {m}, got {}", t.len()))),
        None if law_cfg.family == "frozen" => theta_star.clone(),
        None => DVector::zeros(m),
    };

    // Integration settings.
    let s = &file.sim;
    let mut sim = SimConfig::default();
    if let Some(h) = s.step {
        sim.step = positive(src, h, "sim", "step")?;
    }
    if let Some(t) = s.horizon {
        sim.horizon = positive(src, t, "sim", "horizon")?;
    }
    if let Some(k) = s.record_stride {
        if k < 1 {
            return Err(src.at("sim", "record_stride", format!("record_stride must be ≥ 1, got {k}")));
        }
        sim.record_stride = k as usize;
    }
    if let Some(h) = s.max_step_discontinuous {
        sim.max_step_discontinuous = positive(src, h, "sim", "max_step_discontinuous")?;
    }
    let tail = tail_override.or(s.tail_fraction).unwrap_or(sim.tail_fraction);
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(src.at("sim", "tail_fraction", format!("tail_fraction must lie in (0, 1], got {tail}")));
    }
    sim.tail_fraction = tail;
    sim.validate().map_err(core(src, "sim", "step"))?;

    let goal: Arc<dyn Goal> = Arc::new(design.goal.clone());
    let scenario = ScenarioSpec {
        plant,
        goal,
        disturbance,
        law,
        gradient: gradient.clone(),
        x0: vector(&init.x0),
        theta0,
        sim,
    };
    scenario.validate().map_err(|e| match &e {
        CoreError::InvalidParameter { name: "step", .. } => src.at("sim", "step", e.to_string()),
        _ => src.at("law", "", e.to_string()),
    })?;

    // Bound context.
    let epsilon = file.bounds.epsilon.unwrap_or(DEFAULT_EPSILON);
    let epsilon = positive(src, epsilon, "bounds", "epsilon")?;
    let mut context = BoundContext::new(ClassData::from(&class), theta_star, epsilon)
        .with_tail_fraction(tail)
        .with_seed(seed);
    if let Some(r) = file.bounds.nf_radius {
        context = context.with_nf_radius(positive(src, r, "bounds", "nf_radius")?);
    }
    if let Some(shift) = design.shift {
        if shift > 0.0 {
            context = context.with_linear(LinearData {
                lambda_max: class.lambda_max,
                lambda_min: class.lambda_min,
                sigma_hat: shift,
            });
        }
    }
    if matches!(gradient, GradientSource::OutputSurrogate { .. }) {
        context = context.with_alignment(design.alignment());
    }

    Ok(Built {
        name: file.name.clone().unwrap_or_else(|| {
            src.path
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
        }),
        scenario,
        context,
        design,
        class,
    })
}

/// Loads and builds a scenario file in one step.
pub fn load_and_build(path: &Path, tail_override: Option<f64>) -> Result<Built, Diagnostic> {
    let (file, src) = load(path)?;
    build(&file, &src, tail_override)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn source(text: &str) -> Source {
        Source {
            path: PathBuf::from("t.toml"),
            text: text.into(),
        }
    }

    const SCALAR: &str = r#"
[plant]
kind = "scalar"
a = 1.0
b = 1.0

[disturbance]
kind = "constant"
amplitude = 0.5

[law]
family = "sigma"
kappa = 24.0

[law.feedback]
kind = "linear"
alpha = 2.0

[initial]
x0 = [1.0]

[sim]
step = 1e-3
horizon = 20.0
"#;

    fn built(text: &str) -> Result<Built, Diagnostic> {
        let src = source(text);
        let file: ScenarioFile = src.parse()?;
        build(&file, &src, None)
    }

    #[test]
    fn scalar_scenario_builds() {
        let b = built(SCALAR).unwrap();
        assert_eq!(b.context.theta_star[0], -2.0);
        assert_eq!(b.scenario.disturbance.amplitude(), 0.5);
        assert!((b.class.alpha0 - 2.0).abs() < 1e-12);
        assert_eq!(b.scenario.sim.tail_fraction, 0.2);
        assert!(b.context.linear.is_none());
    }

    #[test]
    fn negative_step_is_line_anchored() {
        let text = SCALAR.replace("step = 1e-3", "step = -1e-3");
        let d = built(&text).unwrap_err();
        let line = text.lines().position(|l| l.starts_with("step")).unwrap() + 1;
        assert_eq!(d.line, line);
        assert!(d.message.contains("step"));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = SCALAR.replace("alpha = 2.0", "alpha = 2.0\nbeta = 1.0");
        let d = built(&text).unwrap_err();
        assert!(d.message.contains("beta"), "{d}");
        assert!(d.line > 1);
    }

    #[test]
    fn missing_kappa_points_at_law() {
        let text = SCALAR.replace("kappa = 24.0\n", "");
        let d = built(&text).unwrap_err();
        assert!(d.message.contains("kappa"));
        assert_eq!(d.line, text.lines().position(|l| l == "[law]").unwrap() + 1);
    }

    #[test]
    fn overrides_apply() {
        let src = source(SCALAR);
        let mut f: ScenarioFile = src.parse().unwrap();
        f.apply_override("kappa", 48.0).unwrap();
        f.apply_override("delta_f", 0.25).unwrap();
        f.apply_override("alpha", 3.0).unwrap();
        f.apply_override("gamma_scale", 2.0).unwrap();
        f.apply_override("epsilon", 0.1).unwrap();
        f.apply_override("seed", 7.0).unwrap();
        assert!(f.apply_override("deadzone", 0.1).is_err());
        assert!(f.apply_override("seed", 1.5).is_err());
        assert!(f.apply_override("omega", 1.0).is_err());
        let b = build(&f, &src, Some(0.3)).unwrap();
        assert_eq!(b.scenario.law.kappa(), Some(48.0));
        assert_eq!(b.scenario.disturbance.amplitude(), 0.25);
        assert_eq!(b.scenario.law.gain.lambda_min(), 2.0);
        assert_eq!(b.context.epsilon, 0.1);
        assert_eq!(b.context.seed, 7);
        assert_eq!(b.context.tail_fraction, 0.3);
    }

    #[test]
    fn linear_lyapunov_scenario_builds() {
        let text = r#"
[plant]
kind = "linear_output"
A = [[0.0, 1.0], [-2.0, -2.0]]
B = [0.0, 1.0]
L = [[1.0, 0.0], [0.0, 1.0]]
g = [1.0, 1.0]

[ideal]
mu = 5.0

[goal]
kind = "lyapunov"

[law]
family = "sigma"
kappa = 2.0
gradient = "output_surrogate"

[law.feedback]
kind = "linear"
alpha = 1.0
prior = [-4.5, -5.5]

[initial]
x0 = [1.0, 0.0]
"#;
        let b = built(text).unwrap();
        assert_eq!(b.context.theta_star, DVector::from_column_slice(&[-5.0, -5.0]));
        let lin = b.context.linear.unwrap();
        assert!(lin.sigma_hat > 0.0 && lin.lambda_max >= lin.lambda_min);
        assert!(!b.context.alignment.unwrap().aligned);
    }

    #[test]
    fn unattainable_goal_is_reported() {
        let text = SCALAR.replace("a = 1.0\nb = 1.0", "a = 1.0\nb = 1.0\n\n[ideal]\ntheta_star = [0.5]");
        let d = built(&text).unwrap_err();
        assert!(d.message.contains("Hurwitz") || d.message.contains("attainable"), "{d}");
    }
}
