//! Closed-form performance bounds and the per-scenario [`BoundReport`].
//!
//! The free functions are plain algebra. [`evaluate`] integrates a scenario,
//! compares the measured tail supremum against every bound that applies to
//! its adaptation law and collects the outcome as named [`Condition`]s.
//!
//! Conditions come in two roles. A *hypothesis* is a precondition of a bound
//! (for instance `κ > k₀`); when it fails, the certificates that depend on it
//! are reported as not applicable rather than failed. A *certificate* compares
//! a measurement or a sampled inequality against a bound. A certificate is
//! *advisory* when the scenario only approximately satisfies the structure the
//! bound assumes; an advisory failure is a warning, and `strict` mode counts
//! warnings as failures.

use nalgebra::DVector;
use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{invalid, Error, Result};
use crate::model::ScenarioSpec;
use crate::plants::{Alignment, ClassConstants};
use crate::sim::{check_lyapunov_decay, integrate, LyapunovSpec, TrajectoryRecord};
use crate::speedgrad::{verify_nf, Feedback, GradientSource, LawFamily, NfConstants};

/// Relative tolerance on measured-versus-bound comparisons.
pub const ESTIMATOR_TOLERANCE: f64 = 0.02;
/// Trajectories whose `‖x‖ + ‖θ‖` exceeds this are treated as unbounded when no
/// analytic bound is available.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
const PROPOSITION_GRID: usize = 1000;
const PROPOSITION_GRID_TOL: f64 = 1e-12;
const NF_SAMPLES: usize = 2000;
const LYAPUNOV_SLACK: f64 = 1e-6;

fn check_class(alpha0: f64, sigma: f64) -> Result<()> {
    if !(alpha0 > 0.0) {
        return Err(invalid("alpha0", format!("must be > 0, got {alpha0}")));
    }
    if !(0.0..1.0).contains(&sigma) {
        return Err(invalid("sigma", format!("must lie in [0, 1), got {sigma}")));
    }
    Ok(())
}

/// `Δ* = (Δf α₁ / α₀)^{1/(1-σ)}`.
pub fn optimum_estimate(alpha0: f64, alpha1: f64, sigma: f64, delta_f: f64) -> Result<f64> {
    check_class(alpha0, sigma)?;
    if !(alpha1 > 0.0) {
        return Err(invalid("alpha1", format!("must be > 0, got {alpha1}")));
    }
    if !(delta_f >= 0.0) {
        return Err(invalid("delta_f", format!("must be ≥ 0, got {delta_f}")));
    }
    Ok((delta_f * alpha1 / alpha0).powf(1.0 / (1.0 - sigma)))
}

/// `k₀ = 2ρ′ / (ε α₀ (1-σ))`.
pub fn min_gain_k0(rho_prime: f64, epsilon: f64, alpha0: f64, sigma: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    check_class(alpha0, sigma)?;
    if !(rho_prime >= 0.0) {
        return Err(invalid("rho_prime", format!("must be ≥ 0, got {rho_prime}")));
    }
    Ok(2.0 * rho_prime / (epsilon * alpha0 * (1.0 - sigma)))
}

/// `Δ* + 2ρ′ / (k α₀ (1-σ))`.
pub fn corollary_bound(delta_star: f64, rho_prime: f64, k: f64, alpha0: f64, sigma: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(invalid("k", format!("must be > 0, got {k}")));
    }
    check_class(alpha0, sigma)?;
    Ok(delta_star + 2.0 * rho_prime / (k * alpha0 * (1.0 - sigma)))
}

/// Value of the linear state-error bound, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearErrorBound {
    pub value: f64,
    /// `√(λ⁺/λ⁻) Δf / (2σ*)`.
    pub disturbance_term: f64,
    /// `ε σ* / (Δf √(λ⁺λ⁻))`, or 0 when dropped.
    pub epsilon_term: f64,
    /// Set when `Δf = 0` and `ε > 0`: the second term is singular and has been
    /// dropped, so `value` is not a valid bound.
    pub degenerate: bool,
}

/// `√(λ⁺/λ⁻) Δf/(2σ*) + ε σ*/(Δf √(λ⁺λ⁻))`.
pub fn error_bound_linear(
    lambda_max: f64,
    lambda_min: f64,
    delta_f: f64,
    sigma_star: f64,
    epsilon: f64,
) -> Result<LinearErrorBound> {
    if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
        return Err(invalid(
            "lambda",
            format!("need λ⁺ ≥ λ⁻ > 0, got λ⁺ = {lambda_max}, λ⁻ = {lambda_min}"),
        ));
    }
    if !(sigma_star > 0.0) {
        return Err(invalid("sigma_star", format!("must be > 0, got {sigma_star}")));
    }
    if !(delta_f >= 0.0) || !(epsilon >= 0.0) {
        return Err(invalid("delta_f/epsilon", "must be ≥ 0"));
    }
    let disturbance_term = (lambda_max / lambda_min).sqrt() * delta_f / (2.0 * sigma_star);
    if delta_f == 0.0 {
        return Ok(LinearErrorBound {
            value: disturbance_term,
            disturbance_term,
            epsilon_term: 0.0,
            degenerate: epsilon > 0.0,
        });
    }
    let epsilon_term = epsilon * sigma_star / (delta_f * (lambda_max * lambda_min).sqrt());
    Ok(LinearErrorBound {
        value: disturbance_term + epsilon_term,
        disturbance_term,
        epsilon_term,
        degenerate: false,
    })
}

/// Output-feedback surrogate of `k₀` for linear `ζ = α(θ - θ̄)`:
/// `α‖θ̄ - θ*‖² / (ε α₀ (1-σ))`.
pub fn surrogate_threshold(alpha: f64, prior_gap_sq: f64, epsilon: f64, alpha0: f64, sigma: f64) -> Result<f64> {
    min_gain_k0(alpha * prior_gap_sq / 2.0, epsilon, alpha0, sigma)
}

/// True iff `Δ* < Δ`.
pub fn deadzone_applicability(level: f64, delta_star: f64) -> Result<bool> {
    if !(level > 0.0) {
        return Err(invalid("deadzone", format!("Δ must be > 0, got {level}")));
    }
    Ok(delta_star < level)
}

/// Role of a [`Condition`] in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Hypothesis,
    Certificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Failed advisory certificate.
    Warn,
    NotApplicable,
}

/// One named check `lhs ⋈ rhs` with its margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub role: Role,
    pub status: Status,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack; nonnegative means satisfied.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Condition {
    fn hypothesis(name: &str, lhs: f64, rhs: f64, strict: bool) -> Self {
        let ok = if strict { lhs > rhs } else { lhs >= rhs };
        Self {
            name: name.into(),
            role: Role::Hypothesis,
            status: if ok { Status::Pass } else { Status::Fail },
            lhs,
            rhs,
            margin: lhs - rhs,
            note: None,
        }
    }

    /// Certificate `measured ≤ bound · (1 + rel) + abs`.
    fn upper(name: &str, measured: f64, bound: f64, rel: f64, abs: f64, advisory: bool) -> Self {
        let limit = bound * (1.0 + rel) + abs;
        let ok = measured <= limit;
        Self {
            name: name.into(),
            role: Role::Certificate,
            status: match (ok, advisory) {
                (true, _) => Status::Pass,
                (false, true) => Status::Warn,
                (false, false) => Status::Fail,
            },
            lhs: measured,
            rhs: bound,
            margin: limit - measured,
            note: None,
        }
    }

    fn from_certificate(cert: &Certificate, advisory: bool) -> Self {
        Self {
            name: cert.name.clone(),
            role: Role::Certificate,
            status: match (cert.passed, advisory) {
                (true, _) => Status::Pass,
                (false, true) => Status::Warn,
                (false, false) => Status::Fail,
            },
            lhs: cert.worst_margin,
            rhs: -cert.tolerance,
            margin: cert.worst_margin + cert.tolerance,
            note: Some(format!("{} samples", cert.samples)),
        }
    }

    fn not_applicable(name: &str, why: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role: Role::Certificate,
            status: Status::NotApplicable,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            note: Some(why.into()),
        }
    }

    fn failed(name: &str, role: Role, why: impl Into<String>) -> Self {
        Self {
            status: Status::Fail,
            role,
            ..Self::not_applicable(name, why)
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.status, Status::Pass)
    }
}

/// Named results of the gain conditions for a σ-modified or combined law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainConditions {
    pub k0: f64,
    /// `2ρ λ_min(Γ) ≥ α₀(1-σ)`.
    pub gain: Condition,
    /// `κ > k₀`.
    pub kappa: Condition,
    /// `κ > α‖θ̄ - θ*‖²/(εα₀(1-σ))`, only for linear feedback.
    pub surrogate: Option<Condition>,
}

/// Evaluates the gain conditions of a σ-modified or combined law.
///
/// `kappa` is the effective internal gain (the law's `κ` unless the gradient
/// source rescales it).
pub fn check_gain_conditions(
    feedback: &Feedback,
    gain_lambda_min: f64,
    kappa: f64,
    nf: NfConstants,
    alpha0: f64,
    sigma: f64,
    epsilon: f64,
    theta_star: &DVector<f64>,
) -> Result<GainConditions> {
    let k0 = min_gain_k0(nf.rho_prime, epsilon, alpha0, sigma)?;
    let gain = Condition::hypothesis(
        "gain_condition",
        2.0 * nf.rho * gain_lambda_min,
        alpha0 * (1.0 - sigma),
        false,
    );
    let kappa_cond = Condition::hypothesis("kappa_above_k0", kappa, k0, true);
    let surrogate = match feedback {
        Feedback::Linear { alpha, prior } => {
            let th = surrogate_threshold(*alpha, (prior - theta_star).norm_squared(), epsilon, alpha0, sigma)?;
            Some(
                Condition::hypothesis("surrogate_parameter_condition", kappa, th, true)
                    .with_note("threshold obtained by substituting the linear-feedback rho' into k0"),
            )
        }
        _ => None,
    };
    Ok(GainConditions {
        k0,
        gain,
        kappa: kappa_cond,
        surrogate,
    })
}

/// Checks `-α₀Q + Δfα₁Q^σ ≤ -α₀(1-σ)(Q - Δ*)` on an evenly spaced grid of
/// `[0, 10Δ*]` (or `[0, 1]` when `Δ* = 0`).
pub fn proposition1_inequality(alpha0: f64, alpha1: f64, sigma: f64, delta_f: f64) -> Result<Certificate> {
    let delta_star = optimum_estimate(alpha0, alpha1, sigma, delta_f)?;
    let top = if delta_star > 0.0 { 10.0 * delta_star } else { 1.0 };
    let mut cert = Certificate::new("proposition1_inequality", PROPOSITION_GRID_TOL);
    for i in 0..PROPOSITION_GRID {
        let q = top * i as f64 / (PROPOSITION_GRID - 1) as f64;
        let lhs = -alpha0 * q + delta_f * alpha1 * q.powf(sigma);
        let rhs = -alpha0 * (1.0 - sigma) * (q - delta_star);
        let scale = 1.0 + (alpha0 * q).abs() + (alpha0 * delta_star).abs();
        cert.observe((rhs - lhs) / scale, || vec![q]);
    }
    Ok(cert.finish())
}

/// Outcome of the frozen-parameter check: grid inequality plus the measured tail.
#[derive(Debug, Clone, Serialize)]
pub struct Proposition1Report {
    pub delta_star: f64,
    pub grid: Certificate,
    pub tail_sup_q: f64,
    pub tail: Condition,
}

impl Proposition1Report {
    pub fn passed(&self) -> bool {
        self.grid.passed && self.tail.passed()
    }
}

/// Runs a frozen-θ scenario and checks `tail-sup Q ≤ Δ* (1.02) + 1e-9`.
pub fn proposition1_certificate(scenario: &ScenarioSpec, class: ClassData, tail_fraction: f64) -> Result<Proposition1Report> {
    if !matches!(scenario.law.family, LawFamily::Frozen) {
        return Err(invalid("law", "the frozen-parameter check needs a frozen law"));
    }
    let delta_f = scenario.disturbance.amplitude();
    let delta_star = optimum_estimate(class.alpha0, class.alpha1, class.sigma, delta_f)?;
    let grid = proposition1_inequality(class.alpha0, class.alpha1, class.sigma, delta_f)?;
    let traj = integrate(scenario)?;
    let tail_sup_q = traj.tail_sup(tail_fraction);
    Ok(Proposition1Report {
        delta_star,
        grid,
        tail_sup_q,
        tail: Condition::upper("proposition1_tail", tail_sup_q, delta_star, ESTIMATOR_TOLERANCE, 1e-9, false),
    })
}

/// `(α₀, α₁, σ)` of the goal/plant class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassData {
    pub alpha0: f64,
    pub alpha1: f64,
    pub sigma: f64,
}

impl From<&ClassConstants> for ClassData {
    fn from(c: &ClassConstants) -> Self {
        Self {
            alpha0: c.alpha0,
            alpha1: c.alpha1,
            sigma: c.sigma,
        }
    }
}

/// Data for the linear state-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearData {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Decay margin `σ̂` used to build `H`.
    pub sigma_hat: f64,
}

/// Everything [`evaluate`] needs beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct BoundContext {
    pub class: ClassData,
    pub theta_star: DVector<f64>,
    pub epsilon: f64,
    /// Radius for NF verification; also the fitting radius of relay feedback.
    pub nf_radius: Option<f64>,
    pub linear: Option<LinearData>,
    /// Alignment of the output surrogate with the literal speed gradient.
    pub alignment: Option<Alignment>,
    pub tail_fraction: f64,
    pub seed: u64,
}

impl BoundContext {
    pub fn new(class: ClassData, theta_star: DVector<f64>, epsilon: f64) -> Self {
        Self {
            class,
            theta_star,
            epsilon,
            nf_radius: None,
            linear: None,
            alignment: None,
            tail_fraction: 0.2,
            seed: 0,
        }
    }

    pub fn with_linear(mut self, data: LinearData) -> Self {
        self.linear = Some(data);
        self
    }

    pub fn with_alignment(mut self, a: Alignment) -> Self {
        self.alignment = Some(a);
        self
    }

    pub fn with_nf_radius(mut self, r: f64) -> Self {
        self.nf_radius = Some(r);
        self
    }

    pub fn with_tail_fraction(mut self, tau: f64) -> Self {
        self.tail_fraction = tau;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub tail_sup_q: f64,
    pub tail_sup_x_norm: f64,
    pub final_q: f64,
    pub peak_magnitude: f64,
    pub horizon: f64,
}

/// Closed-form bounds, conditions and measurements for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub law: String,
    pub delta_f: f64,
    pub class: ClassData,
    pub delta_star: f64,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_effective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nf: Option<NfConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bound_x: Option<LinearErrorBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deadzone_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Alignment>,
    pub conditions: Vec<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<Measured>,
    /// Time at which the integration produced a non-finite value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_time: Option<f64>,
}

impl BoundReport {
    /// True iff no certificate failed; in strict mode warnings count as failures.
    pub fn passed(&self, strict: bool) -> bool {
        self.conditions.iter().filter(|c| c.role == Role::Certificate).all(|c| match c.status {
            Status::Pass | Status::NotApplicable => true,
            Status::Warn => !strict,
            Status::Fail => false,
        })
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn certificates_passed(&self) -> usize {
        self.conditions
            .iter()
            .filter(|c| c.role == Role::Certificate && c.status == Status::Pass)
            .count()
    }

    pub fn certificates_total(&self) -> usize {
        self.conditions
            .iter()
            .filter(|c| c.role == Role::Certificate && c.status != Status::NotApplicable)
            .count()
    }
}

/// Report together with the trajectory it was measured on.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub report: BoundReport,
    pub trajectory: Option<TrajectoryRecord>,
}

/// How the law's analysis applies to this scenario.
struct Structure {
    /// Factor `c` with surrogate gradient = literal gradient / c; 1 for the literal gradient.
    gradient_scale: f64,
    /// Whether the bounds derived for the literal gradient hold exactly.
    exact: bool,
}

fn structure(scenario: &ScenarioSpec, ctx: &BoundContext) -> Structure {
    match (&scenario.gradient, ctx.alignment) {
        (GradientSource::SpeedGradient, _) => Structure {
            gradient_scale: 1.0,
            exact: true,
        },
        (GradientSource::OutputSurrogate { .. }, Some(a)) if a.aligned => Structure {
            gradient_scale: a.scale,
            exact: true,
        },
        (GradientSource::OutputSurrogate { .. }, _) => Structure {
            gradient_scale: 1.0,
            exact: false,
        },
    }
}

/// Integrates the scenario and assembles its [`BoundReport`].
///
/// A blow-up during integration is recorded in the report (with a failed
/// `bounded` certificate) instead of being returned as an error.
pub fn evaluate(scenario: &ScenarioSpec, ctx: &BoundContext) -> Result<Assessment> {
    scenario.validate()?;
    let m = scenario.plant.param_dim();
    if ctx.theta_star.len() != m {
        return Err(Error::Dimension(format!("θ* must have length {m}")));
    }
    if !(ctx.tail_fraction > 0.0 && ctx.tail_fraction <= 1.0) {
        return Err(invalid("tail_fraction", format!("must lie in (0, 1], got {}", ctx.tail_fraction)));
    }
    let class = ctx.class;
    let delta_f = scenario.disturbance.amplitude();
    let delta_star = optimum_estimate(class.alpha0, class.alpha1, class.sigma, delta_f)?;
    let alpha = class.alpha0 * (1.0 - class.sigma);
    let shape = structure(scenario, ctx);
    let advisory = !shape.exact;

    let mut report = BoundReport {
        law: scenario.law.name().to_string(),
        delta_f,
        class,
        delta_star,
        epsilon: ctx.epsilon,
        kappa_effective: None,
        nf: None,
        k0: None,
        corollary_bound: None,
        error_bound_x: None,
        deadzone_level: None,
        alignment: ctx.alignment,
        conditions: Vec::new(),
        measured: None,
        blowup_time: None,
    };
    let conds = &mut report.conditions;

    let horizon = scenario.sim.horizon;
    conds.push(
        Condition::hypothesis("transient_horizon", horizon, 10.0 / alpha, false)
            .with_note("tail estimates assume T ≥ 10/(α₀(1-σ))"),
    );
    if advisory {
        conds.push(
            Condition::hypothesis(
                "surrogate_alignment",
                -ctx.alignment.map_or(f64::INFINITY, |a| a.residual),
                -1e-6,
                false,
            )
            .with_note("HB is not parallel to Lg; bounds derived for the literal speed gradient are advisory"),
        );
    }

    // Trajectory and blow-up handling.
    let traj = match integrate(scenario) {
        Ok(t) => Some(t),
        Err(Error::NonFinite { time, .. }) => {
            report.blowup_time = Some(time);
            None
        }
        Err(e) => return Err(e),
    };
    let measured = traj.as_ref().map(|t| Measured {
        tail_sup_q: t.tail_sup(ctx.tail_fraction),
        tail_sup_x_norm: t.tail_sup_state_norm(ctx.tail_fraction),
        final_q: *t.goal.last().unwrap_or(&f64::NAN),
        peak_magnitude: t.peak_magnitude(),
        horizon: t.final_time(),
    });
    report.measured = measured;
    let mut traj = traj;

    let plant = scenario.plant.as_ref();
    let goal = scenario.goal.as_ref();
    let gain = &scenario.law.gain;
    let theta0_gap = gain.inv_weighted_norm_sq(&(&scenario.theta0 - &ctx.theta_star));
    let q0 = goal.value(&scenario.x0);

    let unbounded = |conds: &mut Vec<Condition>, time: f64| {
        conds.push(Condition::failed(
            "bounded",
            Role::Certificate,
            format!("integration produced a non-finite value at t = {time}"),
        ));
    };

    match &scenario.law.family {
        LawFamily::Frozen => {
            let grid = proposition1_inequality(class.alpha0, class.alpha1, class.sigma, delta_f)?;
            conds.push(Condition::from_certificate(&grid, false));
            match (&measured, report.blowup_time) {
                (Some(meas), _) => {
                    let peak_q = traj.as_ref().map_or(f64::NAN, |t| t.goal.iter().cloned().fold(0.0, f64::max));
                    conds.push(
                        Condition::upper("bounded", peak_q, q0.max(delta_star), LYAPUNOV_SLACK, 1e-9, advisory)
                            .with_note("sup Q ≤ max(Q(0), Δ*)"),
                    );
                    conds.push(Condition::upper(
                        "proposition1_tail",
                        meas.tail_sup_q,
                        delta_star,
                        ESTIMATOR_TOLERANCE,
                        1e-9,
                        advisory,
                    ));
                }
                (None, Some(t)) => unbounded(conds, t),
                (None, None) => {}
            }
        }
        LawFamily::Basic => {
            match (&measured, report.blowup_time) {
                (Some(meas), _) => {
                    if delta_f == 0.0 && shape.exact {
                        // V = Q + ½‖θ - θ*‖²_{Γ⁻¹} is nonincreasing without disturbance.
                        let spec = LyapunovSpec {
                            theta_star: ctx.theta_star.clone(),
                            kappa: shape.gradient_scale,
                            gain: gain.clone(),
                            psi: None,
                        };
                        let t = traj.as_mut().expect("measured implies trajectory");
                        spec.attach(t, plant, goal)?;
                        let v = t.lyapunov.as_ref().expect("attached");
                        let v0 = v[0];
                        let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        conds.push(
                            Condition::upper("lyapunov_nonincreasing", vmax, v0, 0.0, LYAPUNOV_SLACK * (1.0 + v0), false)
                                .with_note("sup V ≤ V(0)"),
                        );
                        conds.push(
                            Condition::upper("bounded", meas.peak_magnitude, DIVERGENCE_THRESHOLD, 0.0, 0.0, false)
                                .with_note("implied by the nonincreasing V; checked against the divergence threshold"),
                        );
                    } else {
                        conds.push(
                            Condition::upper("bounded", meas.peak_magnitude, DIVERGENCE_THRESHOLD, 0.0, 0.0, true)
                                .with_note("no robustness guarantee for the basic law under disturbance"),
                        );
                    }
                }
                (None, Some(t)) => {
                    let advisory_blowup = delta_f > 0.0 || !shape.exact;
                    conds.push(Condition {
                        status: if advisory_blowup { Status::Warn } else { Status::Fail },
                        ..Condition::failed("bounded", Role::Certificate, format!("non-finite value at t = {t}"))
                    });
                }
                (None, None) => {}
            }
        }
        LawFamily::Deadzone { level } => {
            report.deadzone_level = Some(*level);
            let applicable = deadzone_applicability(*level, delta_star)?;
            conds.push(
                Condition::hypothesis("deadzone_applicable", *level, delta_star, true).with_note("requires Δ* < Δ"),
            );
            match (&measured, report.blowup_time) {
                (Some(meas), _) if applicable => {
                    // While adapting V decreases; while frozen the parameter term is
                    // constant, so sup Q ≤ V(0) + Δ.
                    let peak_q = traj.as_ref().map_or(f64::NAN, |t| t.goal.iter().cloned().fold(0.0, f64::max));
                    let v0 = q0 + shape.gradient_scale * theta0_gap / 2.0;
                    conds.push(
                        Condition::upper("bounded", peak_q, v0 + level, LYAPUNOV_SLACK, 1e-9, advisory)
                            .with_note("sup Q ≤ V(0) + Δ"),
                    );
                    conds.push(Condition::upper(
                        "deadzone_goal",
                        meas.tail_sup_q,
                        *level,
                        ESTIMATOR_TOLERANCE,
                        0.0,
                        advisory,
                    ));
                }
                (Some(meas), _) => {
                    conds.push(
                        Condition::upper("bounded", meas.peak_magnitude, DIVERGENCE_THRESHOLD, 0.0, 0.0, true)
                            .with_note("deadzone below Δ*: only the divergence threshold is checked"),
                    );
                    conds.push(Condition::not_applicable("deadzone_goal", "Δ ≤ Δ*"));
                }
                (None, Some(t)) => {
                    if applicable {
                        unbounded(conds, t);
                    } else {
                        conds.push(Condition {
                            status: Status::Warn,
                            ..Condition::failed("bounded", Role::Certificate, format!("non-finite value at t = {t}"))
                        });
                    }
                }
                (None, None) => {}
            }
        }
        LawFamily::Sigma { kappa, feedback } | LawFamily::Combined { kappa, feedback, .. } => {
            let kappa_eff = kappa / shape.gradient_scale;
            report.kappa_effective = Some(kappa_eff);
            let radius = ctx.nf_radius.unwrap_or_else(|| default_nf_radius(scenario, ctx, feedback));
            let nf = match feedback.nf_constants(&ctx.theta_star, radius) {
                Ok(nf) => nf,
                Err(e) => {
                    conds.push(Condition::failed("nf_constants", Role::Hypothesis, e.to_string()));
                    if let (None, Some(t)) = (&measured, report.blowup_time) {
                        unbounded(conds, t);
                    }
                    return Ok(Assessment { report, trajectory: traj });
                }
            };
            report.nf = Some(nf);
            let nf_cert = verify_nf(feedback, &ctx.theta_star, nf.rho, nf.rho_prime, radius, NF_SAMPLES, ctx.seed);
            conds.push(Condition::from_certificate(&nf_cert, false).with_note(format!("radius {radius}")));

            let gc = check_gain_conditions(
                feedback,
                gain.lambda_min(),
                kappa_eff,
                nf,
                class.alpha0,
                class.sigma,
                ctx.epsilon,
                &ctx.theta_star,
            )?;
            report.k0 = Some(gc.k0);
            let gain_ok = gc.gain.passed();
            let kappa_ok = gc.kappa.passed();
            let surrogate_ok = gc.surrogate.as_ref().map_or(kappa_ok, Condition::passed);
            conds.push(gc.gain.clone());
            conds.push(gc.kappa.clone());
            if let Some(s) = gc.surrogate.clone() {
                conds.push(s);
            }
            let corollary = corollary_bound(delta_star, nf.rho_prime, kappa_eff, class.alpha0, class.sigma)?;
            report.corollary_bound = Some(corollary);
            let beta = nf.rho_prime / kappa_eff + alpha * delta_star;

            let error_bound = match ctx.linear {
                Some(lin) => Some(error_bound_linear(
                    lin.lambda_max,
                    lin.lambda_min,
                    delta_f,
                    lin.sigma_hat,
                    ctx.epsilon,
                )?),
                None => None,
            };
            report.error_bound_x = error_bound;

            let Some(meas) = measured else {
                if let Some(t) = report.blowup_time {
                    unbounded(conds, t);
                }
                return Ok(Assessment { report, trajectory: traj });
            };

            if let Some(r) = nf.fit_radius {
                let t = traj.as_ref().expect("measured implies trajectory");
                let reach = t
                    .params
                    .iter()
                    .map(|p| (p - &ctx.theta_star).norm())
                    .fold(0.0, f64::max);
                conds.push(
                    Condition::upper("nf_fit_region", reach, r, 0.0, 0.0, false)
                        .with_note("sup ‖θ - θ*‖ must stay inside the fitting radius"),
                );
            }

            if gain_ok {
                let spec = LyapunovSpec {
                    theta_star: ctx.theta_star.clone(),
                    kappa: kappa_eff,
                    gain: gain.clone(),
                    psi: scenario.law.psi().cloned(),
                };
                let t = traj.as_mut().expect("measured implies trajectory");
                spec.attach(t, plant, goal)?;
                let decay = check_lyapunov_decay(t, alpha, beta)?;
                conds.push(Condition::from_certificate(&decay, advisory).with_note(format!("α = {alpha}, β = {beta}")));
                let v0 = t.lyapunov.as_ref().expect("attached")[0];
                let peak_q = t.goal.iter().cloned().fold(0.0, f64::max);
                conds.push(
                    Condition::upper(
                        "bounded",
                        peak_q,
                        v0.max(beta / alpha),
                        LYAPUNOV_SLACK,
                        1e-9,
                        advisory,
                    )
                    .with_note("sup Q ≤ max(V(0), β/α)"),
                );
                conds.push(Condition::upper(
                    "corollary_tail",
                    meas.tail_sup_q,
                    corollary,
                    ESTIMATOR_TOLERANCE,
                    0.0,
                    advisory,
                ));
                if kappa_ok {
                    conds.push(Condition::upper(
                        "epsilon_optimality",
                        meas.tail_sup_q,
                        delta_star + ctx.epsilon,
                        ESTIMATOR_TOLERANCE,
                        0.0,
                        advisory,
                    ));
                } else {
                    conds.push(Condition::not_applicable("epsilon_optimality", "κ ≤ k₀"));
                }
            } else {
                conds.push(
                    Condition::upper("bounded", meas.peak_magnitude, DIVERGENCE_THRESHOLD, 0.0, 0.0, true)
                        .with_note("gain condition fails: only the divergence threshold is checked"),
                );
                for name in ["lyapunov_decay", "corollary_tail", "epsilon_optimality"] {
                    conds.push(Condition::not_applicable(name, "gain condition fails"));
                }
            }

            if let Some(eb) = error_bound {
                if eb.degenerate {
                    conds.push(Condition::not_applicable("error_bound_x", "Δf = 0 with ε > 0"));
                } else if gain_ok && surrogate_ok {
                    conds.push(Condition::upper(
                        "error_bound_x",
                        meas.tail_sup_x_norm,
                        eb.value,
                        ESTIMATOR_TOLERANCE,
                        0.0,
                        false,
                    ));
                } else {
                    conds.push(Condition::not_applicable("error_bound_x", "gain conditions fail"));
                }
            }
        }
    }

    Ok(Assessment { report, trajectory: traj })
}

/// Verification radius when none is given: four times the larger of the
/// initial parameter error and the prior error, and at least 4.
fn default_nf_radius(scenario: &ScenarioSpec, ctx: &BoundContext, feedback: &Feedback) -> f64 {
    let init = (&scenario.theta0 - &ctx.theta_star).norm();
    let prior = feedback.prior().map_or(0.0, |p| (p - &ctx.theta_star).norm());
    (4.0 * init.max(prior)).max(4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Disturbance;
    use crate::plants::{class_constants, make_scalar_example};
    use crate::sim::SimConfig;
    use crate::speedgrad::{AdaptLaw, GainMatrix};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn optimum_estimate_examples() {
        assert_relative_eq!(optimum_estimate(2.0, 1.0, 0.5, 1.0).unwrap(), 0.25);
        assert_eq!(optimum_estimate(2.0, 1.0, 0.5, 0.0).unwrap(), 0.0);
        assert_relative_eq!(optimum_estimate(1.0, 2.0, 0.5, 3.0).unwrap(), 36.0, max_relative = 1e-14);
        assert!(optimum_estimate(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(optimum_estimate(0.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn k0_examples() {
        assert_relative_eq!(min_gain_k0(1.0, 0.1, 2.0, 0.5).unwrap(), 20.0, max_relative = 1e-14);
        assert_eq!(min_gain_k0(0.0, 0.1, 2.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(min_gain_k0(4.0, 0.5, 1.0, 0.0).unwrap(), 16.0);
        assert!(min_gain_k0(1.0, 0.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn corollary_examples() {
        assert_relative_eq!(corollary_bound(0.25, 1.0, 20.0, 2.0, 0.5).unwrap(), 0.35, max_relative = 1e-14);
        assert!((corollary_bound(0.25, 1.0, 1e9, 2.0, 0.5).unwrap() - 0.25).abs() < 1e-8);
        assert_eq!(corollary_bound(0.25, 0.0, 3.0, 2.0, 0.5).unwrap(), 0.25);
        assert!(corollary_bound(0.25, 1.0, 0.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert_relative_eq!(error_bound_linear(1.0, 1.0, 1.0, 1.0, 0.0).unwrap().value, 0.5);
        assert_relative_eq!(error_bound_linear(1.0, 1.0, 1.0, 1.0, 0.2).unwrap().value, 0.7);
        assert_relative_eq!(error_bound_linear(4.0, 1.0, 1.0, 1.0, 0.0).unwrap().value, 1.0);
        let flagged = error_bound_linear(4.0, 1.0, 0.0, 1.0, 0.3).unwrap();
        assert!(flagged.degenerate);
        assert_eq!(flagged.value, 0.0);
        let calm = error_bound_linear(4.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(!calm.degenerate && calm.value == 0.0);
        assert!(error_bound_linear(1.0, 2.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gain_condition_examples() {
        let theta_star = DVector::from_element(1, -1.0);
        let fb = Feedback::linear(2.0, DVector::zeros(1));
        let nf = fb.nf_constants(&theta_star, 1.0).unwrap();
        assert_eq!((nf.rho, nf.rho_prime), (1.0, 1.0));

        let gc = check_gain_conditions(&fb, 1.0, 25.0, nf, 2.0, 0.5, 0.1, &theta_star).unwrap();
        assert!(gc.gain.passed());
        assert_eq!((gc.gain.lhs, gc.gain.rhs), (2.0, 1.0));
        assert_relative_eq!(gc.k0, 20.0, max_relative = 1e-14);
        let s = gc.surrogate.unwrap();
        assert_relative_eq!(s.rhs, 20.0, max_relative = 1e-14);
        assert!(s.passed());

        let boundary = check_gain_conditions(&fb, 1.0, gc.k0, nf, 2.0, 0.5, 0.1, &theta_star).unwrap();
        assert!(!boundary.kappa.passed());
    }

    #[test]
    fn deadzone_examples() {
        assert!(deadzone_applicability(0.3, 0.25).unwrap());
        assert!(!deadzone_applicability(0.25, 0.25).unwrap());
        assert!(deadzone_applicability(1e-9, 0.0).unwrap());
        assert!(deadzone_applicability(0.0, 0.0).is_err());
    }

    #[test]
    fn proposition1_grid_examples() {
        for df in [0.0, 0.1, 0.5, 3.0] {
            let c = proposition1_inequality(2.0, 2f64.sqrt(), 0.5, df).unwrap();
            assert!(c.passed, "Δf = {df}: {c:?}");
            assert_eq!(c.samples, 1000);
        }
    }

    #[test]
    fn proposition1_scalar_scenario() {
        let ex = make_scalar_example(1.0, 1.0, 0.5).unwrap();
        let class = ClassData::from(&class_constants(&ex.design, 0).unwrap());
        let rep = proposition1_certificate(&ex.frozen_scenario(SimConfig::new(1e-2, 40.0)), class, 0.2).unwrap();
        assert_relative_eq!(rep.delta_star, 0.125, max_relative = 1e-12);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.tail_sup_q >= 0.98 * 0.125);
    }

    #[test]
    fn report_for_sigma_law() {
        let ex = make_scalar_example(1.0, 1.0, 0.5).unwrap();
        let cc = class_constants(&ex.design, 0).unwrap();
        let law = AdaptLaw::sigma(GainMatrix::identity(1), 24.0, Feedback::linear(2.0, DVector::zeros(1)));
        let sc = ex.scenario(law, SimConfig::new(1e-3, 20.0));
        let ctx = BoundContext::new(ClassData::from(&cc), ex.theta_star().clone(), 0.5);
        let a = evaluate(&sc, &ctx).unwrap();
        let r = &a.report;
        assert_relative_eq!(r.k0.unwrap(), 16.0, max_relative = 1e-12);
        assert!(r.corollary_bound.unwrap() >= r.delta_star);
        assert!(r.passed(true), "{:#?}", r.conditions);
        assert!(r.condition("lyapunov_decay").unwrap().passed());
        assert!(r.condition("epsilon_optimality").unwrap().passed());
    }

    #[test]
    fn report_flags_inapplicable_deadzone() {
        let ex = make_scalar_example(1.0, 1.0, 0.5).unwrap();
        let cc = class_constants(&ex.design, 0).unwrap();
        let ctx = BoundContext::new(ClassData::from(&cc), ex.theta_star().clone(), 0.5);
        let sc = ex.scenario(AdaptLaw::deadzone(GainMatrix::identity(1), 0.1), SimConfig::new(1e-3, 20.0));
        let r = evaluate(&sc, &ctx).unwrap().report;
        assert!(!r.condition("deadzone_applicable").unwrap().passed());
        assert_eq!(r.condition("deadzone_goal").unwrap().status, Status::NotApplicable);
    }

    #[test]
    fn blowup_is_recorded() {
        let ex = make_scalar_example(1.0, 1.0, 0.0).unwrap();
        let cc = class_constants(&ex.design, 0).unwrap();
        let ctx = BoundContext::new(ClassData::from(&cc), ex.theta_star().clone(), 0.5);
        // θ frozen at 0 leaves ẋ = x
        let mut sc = ex.scenario(AdaptLaw::frozen(1), SimConfig::new(0.1, 1000.0));
        sc.disturbance = Disturbance::Zero;
        let r = evaluate(&sc, &ctx).unwrap().report;
        assert!(r.blowup_time.is_some());
        assert!(!r.passed(false));
        assert_eq!(r.condition("bounded").unwrap().status, Status::Fail);
    }

    proptest! {
        #[test]
        fn optimum_estimate_monotone(a0 in 0.1f64..10.0, a1 in 0.1f64..10.0, s in 0.0f64..0.9, df in 0.0f64..5.0, d in 0.01f64..1.0) {
            let base = optimum_estimate(a0, a1, s, df).unwrap();
            prop_assert!(optimum_estimate(a0, a1, s, df + d).unwrap() >= base);
            prop_assert!(optimum_estimate(a0, a1 + d, s, df).unwrap() >= base);
            prop_assert!(optimum_estimate(a0 + d, a1, s, df).unwrap() <= base);
            prop_assert!(base >= 0.0);
        }

        #[test]
        fn corollary_decreasing_in_gain(ds in 0.0f64..2.0, rp in 0.01f64..10.0, k in 0.1f64..100.0, a0 in 0.1f64..5.0, s in 0.0f64..0.9) {
            let lo = corollary_bound(ds, rp, k, a0, s).unwrap();
            let hi = corollary_bound(ds, rp, 2.0 * k, a0, s).unwrap();
            prop_assert!(hi < lo);
            prop_assert!(hi >= ds);
        }

        #[test]
        fn k0_nonnegative(rp in 0.0f64..10.0, e in 0.01f64..5.0, a0 in 0.1f64..5.0, s in 0.0f64..0.9) {
            prop_assert!(min_gain_k0(rp, e, a0, s).unwrap() >= 0.0);
        }

        #[test]
        fn proposition1_grid_always_holds(a0 in 0.1f64..5.0, a1 in 0.1f64..5.0, s in 0.0f64..0.9, df in 0.0f64..3.0) {
            prop_assert!(proposition1_inequality(a0, a1, s, df).unwrap().passed);
        }
    }
}
