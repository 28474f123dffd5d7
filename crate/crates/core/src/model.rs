//! Plants, goal functions, disturbances and the speed function.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{invalid, Error, Result};
use crate::sampling;
use crate::sim::SimConfig;
use crate::speedgrad::{AdaptLaw, GradientSource};

/// Controlled dynamics `ẋ = F(x, θ, t)`.
pub trait Plant: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn dynamics(&self, x: &DVector<f64>, theta: &DVector<f64>, t: f64) -> DVector<f64>;

    /// Analytic `∂F/∂θ` (n × m), when the plant knows it.
    fn param_jacobian(
        &self,
        _x: &DVector<f64>,
        _theta: &DVector<f64>,
        _t: f64,
    ) -> Option<DMatrix<f64>> {
        None
    }

    /// True when `F` is affine in θ, which makes `w` convex in θ.
    fn linear_in_params(&self) -> bool {
        false
    }
}

type DynamicsFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync;

/// Plant defined by a closure. No analytic Jacobian: the speed gradient falls
/// back to central differences.
#[derive(Clone)]
pub struct FnPlant {
    n: usize,
    m: usize,
    linear: bool,
    f: Arc<DynamicsFn>,
}

impl FnPlant {
    pub fn new<F>(state_dim: usize, param_dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            n: state_dim,
            m: param_dim,
            linear: false,
            f: Arc::new(f),
        }
    }

    /// Declares the closure affine in θ.
    pub fn affine_in_params(mut self) -> Self {
        self.linear = true;
        self
    }
}

impl fmt::Debug for FnPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPlant")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl Plant for FnPlant {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn param_dim(&self) -> usize {
        self.m
    }
    fn dynamics(&self, x: &DVector<f64>, theta: &DVector<f64>, t: f64) -> DVector<f64> {
        (self.f)(x, theta, t)
    }
    fn linear_in_params(&self) -> bool {
        self.linear
    }
}

/// Analytic class constants a goal may carry: `‖∇Q‖ ≤ α₁ Q^σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthConstants {
    pub alpha1: f64,
    pub sigma: f64,
}

/// Nonnegative goal function `Q(x)` with its gradient.
pub trait Goal: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn growth_constants(&self) -> Option<GrowthConstants> {
        None
    }
}

/// `Q(x) = ½ xᵀHx` with `H` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGoal {
    h: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticGoal {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Dimension(format!(
                "goal matrix must be square, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-9 * (1.0 + h.amax()) {
            return Err(Error::NotPositiveDefinite(format!(
                "goal matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        let h = (&h + h.transpose()) * 0.5;
        let eig = h.clone().symmetric_eigen().eigenvalues;
        let lambda_min = eig.min();
        let lambda_max = eig.max();
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "goal matrix has smallest eigenvalue {lambda_min:e}"
            )));
        }
        Ok(Self {
            h,
            lambda_min,
            lambda_max,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            h: DMatrix::identity(n, n),
            lambda_min: 1.0,
            lambda_max: 1.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `λ⁻ = λ_min(H)`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `λ⁺ = λ_max(H)`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

impl Goal for QuadraticGoal {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }

    // ‖Hx‖² ≤ λ⁺ xᵀHx = 2λ⁺ Q
    fn growth_constants(&self) -> Option<GrowthConstants> {
        Some(GrowthConstants {
            alpha1: (2.0 * self.lambda_max).sqrt(),
            sigma: 0.5,
        })
    }
}

/// Bounded additive disturbance `f(t)` with `‖f‖ ≤ Δf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disturbance {
    Zero,
    /// `Δf · u` for a fixed unit direction `u`.
    Constant {
        amplitude: f64,
        direction: Vec<f64>,
    },
    /// `Δf · sin(ωt + φ) · u`.
    Sinusoid {
        amplitude: f64,
        direction: Vec<f64>,
        omega: f64,
        phase: f64,
    },
    /// Piecewise-constant on intervals of length `hold`, each value drawn
    /// uniformly from the ball of radius `Δf`. Stateless per `(seed, interval)`.
    UniformRandom { amplitude: f64, seed: u64, hold: f64 },
    /// `Δf · ∇Q/‖∇Q‖`, pushing `Q` uphill; zero where `‖∇Q‖ < 1e-12`.
    AdversarialSign { amplitude: f64 },
}

fn unit(direction: &[f64], name: &'static str) -> Result<Vec<f64>> {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(invalid(name, "direction must be a nonzero finite vector"));
    }
    Ok(direction.iter().map(|v| v / norm).collect())
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(invalid("amplitude", format!("must be finite and ≥ 0, got {amplitude}")));
    }
    Ok(())
}

/// Scales `v` so that its Euclidean norm does not exceed `bound` in floating point.
fn clamp_norm(mut v: DVector<f64>, bound: f64) -> DVector<f64> {
    for _ in 0..4 {
        let norm = v.norm();
        if norm <= bound {
            return v;
        }
        v *= bound / norm * (1.0 - 4.0 * f64::EPSILON);
    }
    v
}

impl Disturbance {
    pub fn constant(amplitude: f64, direction: &[f64]) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(Self::Constant {
            amplitude,
            direction: unit(direction, "direction")?,
        })
    }

    pub fn sinusoid(amplitude: f64, direction: &[f64], omega: f64, phase: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        if !omega.is_finite() || !phase.is_finite() {
            return Err(invalid("omega", "frequency and phase must be finite"));
        }
        Ok(Self::Sinusoid {
            amplitude,
            direction: unit(direction, "direction")?,
            omega,
            phase,
        })
    }

    pub fn uniform_random(amplitude: f64, seed: u64, hold: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        if !(hold > 0.0) || !hold.is_finite() {
            return Err(invalid("hold", format!("must be > 0, got {hold}")));
        }
        Ok(Self::UniformRandom {
            amplitude,
            seed,
            hold,
        })
    }

    pub fn adversarial_sign(amplitude: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(Self::AdversarialSign { amplitude })
    }

    /// The bound `Δf`.
    pub fn amplitude(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { amplitude, .. }
            | Self::Sinusoid { amplitude, .. }
            | Self::UniformRandom { amplitude, .. }
            | Self::AdversarialSign { amplitude } => *amplitude,
        }
    }

    /// Same disturbance with a different bound `Δf`.
    pub fn with_amplitude(&self, value: f64) -> Result<Self> {
        check_amplitude(value)?;
        let mut out = self.clone();
        match &mut out {
            Self::Zero => {}
            Self::Constant { amplitude, .. }
            | Self::Sinusoid { amplitude, .. }
            | Self::UniformRandom { amplitude, .. }
            | Self::AdversarialSign { amplitude } => *amplitude = value,
        }
        Ok(out)
    }

    /// Same disturbance with a different seed; non-random kinds are unchanged.
    pub fn with_seed(&self, value: u64) -> Self {
        let mut out = self.clone();
        if let Self::UniformRandom { seed, .. } = &mut out {
            *seed = value;
        }
        out
    }

    /// Checks the direction length against the state dimension.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Constant { direction, .. } | Self::Sinusoid { direction, .. }
                if direction.len() != n =>
            {
                Err(Error::Dimension(format!(
                    "disturbance direction has length {}, state dimension is {n}",
                    direction.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Discontinuous in `t` or `x`; the integrator then needs a small step.
    pub fn is_discontinuous(&self) -> bool {
        matches!(self, Self::UniformRandom { .. } | Self::AdversarialSign { .. })
    }
}

/// `f(t, x)`. `‖f‖ ≤ Δf` holds exactly in floating point.
pub fn eval_disturbance(
    spec: &Disturbance,
    t: f64,
    x: &DVector<f64>,
    goal: &dyn Goal,
) -> DVector<f64> {
    let n = x.len();
    match spec {
        Disturbance::Zero => DVector::zeros(n),
        Disturbance::Constant {
            amplitude,
            direction,
        } => clamp_norm(DVector::from_column_slice(direction) * *amplitude, *amplitude),
        Disturbance::Sinusoid {
            amplitude,
            direction,
            omega,
            phase,
        } => {
            let s = (omega * t + phase).sin();
            clamp_norm(DVector::from_column_slice(direction) * (amplitude * s), *amplitude)
        }
        Disturbance::UniformRandom {
            amplitude,
            seed,
            hold,
        } => {
            let index = (t / hold).floor().max(0.0) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(index);
            let v = loop {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
                if v.norm_squared() <= 1.0 {
                    break v;
                }
            };
            clamp_norm(v * *amplitude, *amplitude)
        }
        Disturbance::AdversarialSign { amplitude } => {
            let g = goal.gradient(x);
            let norm = g.norm();
            if norm < 1e-12 {
                DVector::zeros(n)
            } else {
                clamp_norm(g * (amplitude / norm), *amplitude)
            }
        }
    }
}

fn check_dims(plant: &dyn Plant, x: &DVector<f64>, theta: &DVector<f64>) -> Result<()> {
    if x.len() != plant.state_dim() || theta.len() != plant.param_dim() {
        return Err(Error::Dimension(format!(
            "plant expects x ∈ ℝ^{} and θ ∈ ℝ^{}, got {} and {}",
            plant.state_dim(),
            plant.param_dim(),
            x.len(),
            theta.len()
        )));
    }
    Ok(())
}

fn finite(v: DVector<f64>, what: &'static str, t: f64) -> Result<DVector<f64>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, time: t })
    }
}

/// `ẋ = F(x, θ, t) + f`.
pub fn eval_dynamics(
    plant: &dyn Plant,
    x: &DVector<f64>,
    theta: &DVector<f64>,
    t: f64,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(plant, x, theta)?;
    if f.len() != x.len() {
        return Err(Error::Dimension(format!(
            "disturbance has length {}, state has {}",
            f.len(),
            x.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("time must be ≥ 0, got {t}")));
    }
    finite(plant.dynamics(x, theta, t) + f, "dynamics", t)
}

/// `w = ∇Q(x)ᵀ F(x, θ, t)`, the disturbance excluded.
pub fn eval_speed(
    plant: &dyn Plant,
    goal: &dyn Goal,
    x: &DVector<f64>,
    theta: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    check_dims(plant, x, theta)?;
    let w = goal.gradient(x).dot(&plant.dynamics(x, theta, t));
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::NonFinite { what: "speed", time: t })
    }
}

/// `∇θ w` by central differences with step `1e-6 · (1 + ‖θ‖)`.
pub fn fd_speed_gradient(
    plant: &dyn Plant,
    goal: &dyn Goal,
    x: &DVector<f64>,
    theta: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let grad_q = goal.gradient(x);
    let step = 1e-6 * (1.0 + theta.norm());
    let mut probe = theta.clone();
    DVector::from_fn(theta.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = grad_q.dot(&plant.dynamics(x, &probe, t));
        probe[i] = orig - step;
        let down = grad_q.dot(&plant.dynamics(x, &probe, t));
        probe[i] = orig;
        (up - down) / (2.0 * step)
    })
}

/// `∇θ w`: analytic when the plant has a Jacobian, central differences otherwise.
pub fn eval_speed_gradient(
    plant: &dyn Plant,
    goal: &dyn Goal,
    x: &DVector<f64>,
    theta: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    check_dims(plant, x, theta)?;
    let g = match plant.param_jacobian(x, theta, t) {
        Some(jac) => jac.transpose() * goal.gradient(x),
        None => fd_speed_gradient(plant, goal, x, theta, t),
    };
    finite(g, "speed gradient", t)
}

/// Central-difference gradient of `Q`, step `1e-5 · (1 + ‖x‖)`.
pub fn fd_goal_gradient(goal: &dyn Goal, x: &DVector<f64>) -> DVector<f64> {
    let step = 1e-5 * (1.0 + x.norm());
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = goal.value(&probe);
        probe[i] = orig - step;
        let down = goal.value(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * step)
    })
}

/// Gradient and nonnegativity check of `Q` at random points of `‖x‖ ≤ radius`.
///
/// Margin per sample is `rel_tol · max(‖∇Q‖, 1e-8) - ‖∇Q - ∇Q_fd‖`, and
/// `Q(x) ≥ 0` is folded in as a further margin.
pub fn check_goal_gradient(
    goal: &dyn Goal,
    n: usize,
    samples: usize,
    radius: f64,
    rel_tol: f64,
    seed: u64,
) -> Certificate {
    let mut cert = Certificate::new("goal_gradient", 0.0);
    let mut rng = sampling::rng(seed);
    for _ in 0..samples {
        let x = sampling::in_ball(&mut rng, n, radius);
        let analytic = goal.gradient(&x);
        let numeric = fd_goal_gradient(goal, &x);
        let scale = analytic.norm().max(1e-8);
        let margin = rel_tol * scale - (&analytic - &numeric).norm();
        let q = goal.value(&x);
        cert.observe(margin.min(q.max(-1.0)), || x.as_slice().to_vec());
    }
    cert.finish()
}

/// Radial unboundedness: `Q(r·u)` grows without bound along sampled rays.
///
/// Each ray is probed at radii `10^k`, k = 0..=6; margin is the smallest
/// increment between consecutive radii, and the last value must exceed
/// `1e3 ·` the first.
pub fn check_radial_growth(goal: &dyn Goal, n: usize, rays: usize, seed: u64) -> Certificate {
    let mut cert = Certificate::new("goal_radial_growth", 0.0);
    let mut rng = sampling::rng(seed);
    for _ in 0..rays {
        let u = sampling::unit_vector(&mut rng, n);
        let values: Vec<f64> = (0..=6)
            .map(|k| goal.value(&(&u * 10f64.powi(k))))
            .collect();
        let mut margin = values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if !(values[6] > 1e3 * values[0]) {
            margin = margin.min(-1.0);
        }
        cert.observe(margin, || u.as_slice().to_vec());
    }
    cert.finish()
}

/// Convexity of `w` in θ: `w(x, θ′) - w(x, θ) ≥ (θ′ - θ)ᵀ∇θw(x, θ)` up to `1e-9`.
pub fn check_convexity(
    plant: &dyn Plant,
    goal: &dyn Goal,
    samples: usize,
    x_radius: f64,
    theta_radius: f64,
    seed: u64,
) -> Result<Certificate> {
    let (n, m) = (plant.state_dim(), plant.param_dim());
    let mut cert = Certificate::new("speed_convexity", 1e-9);
    let mut rng = sampling::rng(seed);
    for _ in 0..samples {
        let x = sampling::in_ball(&mut rng, n, x_radius);
        let th = sampling::in_ball(&mut rng, m, theta_radius);
        let th2 = sampling::in_ball(&mut rng, m, theta_radius);
        let t = rng.random_range(0.0..10.0);
        let w1 = eval_speed(plant, goal, &x, &th, t)?;
        let w2 = eval_speed(plant, goal, &x, &th2, t)?;
        let g = eval_speed_gradient(plant, goal, &x, &th, t)?;
        let margin = w2 - w1 - (&th2 - &th).dot(&g);
        // rounding in w scales with its magnitude
        let scale = 1.0 + w1.abs().max(w2.abs());
        cert.observe(margin / scale, || {
            x.iter().chain(th.iter()).chain(th2.iter()).copied().collect()
        });
    }
    Ok(cert.finish())
}

/// Analytic vs finite-difference `∇θw` at random points (relative tolerance).
pub fn check_speed_gradient(
    plant: &dyn Plant,
    goal: &dyn Goal,
    samples: usize,
    x_radius: f64,
    theta_radius: f64,
    rel_tol: f64,
    seed: u64,
) -> Result<Certificate> {
    let (n, m) = (plant.state_dim(), plant.param_dim());
    let mut cert = Certificate::new("speed_gradient", 0.0);
    let mut rng = sampling::rng(seed);
    for _ in 0..samples {
        let x = sampling::in_ball(&mut rng, n, x_radius);
        let th = sampling::in_ball(&mut rng, m, theta_radius);
        let t = rng.random_range(0.0..10.0);
        let analytic = eval_speed_gradient(plant, goal, &x, &th, t)?;
        let numeric = fd_speed_gradient(plant, goal, &x, &th, t);
        let margin = rel_tol * analytic.norm().max(1e-8) - (&analytic - &numeric).norm();
        cert.observe(margin, || x.iter().chain(th.iter()).copied().collect());
    }
    Ok(cert.finish())
}

/// One closed-loop experiment.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub plant: Arc<dyn Plant>,
    pub goal: Arc<dyn Goal>,
    pub disturbance: Disturbance,
    pub law: AdaptLaw,
    pub gradient: GradientSource,
    pub x0: DVector<f64>,
    pub theta0: DVector<f64>,
    pub sim: SimConfig,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.plant.state_dim(), self.plant.param_dim());
        if self.x0.len() != n {
            return Err(Error::Dimension(format!(
                "x0 has length {}, plant state dimension is {n}",
                self.x0.len()
            )));
        }
        if self.theta0.len() != m {
            return Err(Error::Dimension(format!(
                "theta0 has length {}, plant parameter dimension is {m}",
                self.theta0.len()
            )));
        }
        self.law.validate(m)?;
        self.gradient.validate(n, m)?;
        self.disturbance.validate(n)?;
        self.sim.validate()?;
        let discontinuous = self.law.is_discontinuous() || self.disturbance.is_discontinuous();
        if discontinuous && self.sim.step > self.sim.max_step_discontinuous {
            return Err(invalid(
                "step",
                format!(
                    "discontinuous right-hand side requires step ≤ {}, got {}",
                    self.sim.max_step_discontinuous, self.sim.step
                ),
            ));
        }
        Ok(())
    }
}
