//! Adaptation laws and parametric feedback.
//!
//! All four families share the driving term `∇θw`; they differ in how the
//! parametric feedback `ζ` and the deadzone enter:
//!
//! | family   | rate                                          |
//! |----------|-----------------------------------------------|
//! | basic    | `θ̇ = -Γ ∇θw`                                  |
//! | sigma    | `θ̇ = -Γ [κ ∇θw + ζ(θ)]`                       |
//! | combined | `ż = -Γ [κ ∇θw + ζ(z)]`, `θ = z - γψ(x, t)`    |
//! | deadzone | `θ̇ = -Γ ∇θw` if `Q ≥ Δ`, else `0`             |
//!
//! A fifth, [`LawFamily::Frozen`], keeps θ constant and serves as the
//! comparison algorithm with ideal parameters.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{invalid, Error, Result};
use crate::model::{eval_speed_gradient, Goal, Plant};
use crate::sampling;

/// Parametric feedback `ζ(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    /// `ζ ≡ 0`.
    Zero,
    /// `α (θ - θ̄)`.
    Linear { alpha: f64, prior: DVector<f64> },
    /// `α (θ - θ̄)` outside the ball `‖θ - θ̄‖ < d`, zero inside.
    BallDeadzone {
        alpha: f64,
        prior: DVector<f64>,
        radius: f64,
    },
    /// `A · sign(θ - θ̄)` (componentwise) outside the ball, zero inside.
    Relay {
        amplitude: f64,
        prior: DVector<f64>,
        radius: f64,
    },
}

/// Constants of the coercivity inequality `ζ(θ)ᵀ(θ - θ*) ≥ ρ‖θ - θ*‖² - ρ′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NfConstants {
    pub rho: f64,
    pub rho_prime: f64,
    /// Radius `R` on which the constants were fitted; `None` when they hold globally.
    pub fit_radius: Option<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Feedback {
    pub fn linear(alpha: f64, prior: DVector<f64>) -> Self {
        Self::Linear { alpha, prior }
    }

    pub fn prior(&self) -> Option<&DVector<f64>> {
        match self {
            Self::Zero => None,
            Self::Linear { prior, .. }
            | Self::BallDeadzone { prior, .. }
            | Self::Relay { prior, .. } => Some(prior),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let check_prior = |prior: &DVector<f64>| {
            if prior.len() != m {
                Err(Error::Dimension(format!(
                    "feedback prior has length {}, parameter dimension is {m}",
                    prior.len()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Zero => Ok(()),
            Self::Linear { alpha, prior } => {
                if !(*alpha > 0.0) {
                    return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
                }
                check_prior(prior)
            }
            Self::BallDeadzone {
                alpha,
                prior,
                radius,
            } => {
                if !(*alpha > 0.0) {
                    return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
                }
                if !(*radius >= 0.0) {
                    return Err(invalid("radius", format!("must be ≥ 0, got {radius}")));
                }
                check_prior(prior)
            }
            Self::Relay {
                amplitude,
                prior,
                radius,
            } => {
                if !(*amplitude > 0.0) {
                    return Err(invalid("amplitude", format!("must be > 0, got {amplitude}")));
                }
                if !(*radius >= 0.0) {
                    return Err(invalid("radius", format!("must be ≥ 0, got {radius}")));
                }
                check_prior(prior)
            }
        }
    }

    pub fn is_discontinuous(&self) -> bool {
        match self {
            Self::Zero | Self::Linear { .. } => false,
            Self::BallDeadzone { radius, .. } => *radius > 0.0,
            Self::Relay { .. } => true,
        }
    }

    /// Multiplies the feedback gain (`α` or the relay amplitude) by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Zero => {}
            Self::Linear { alpha, .. } | Self::BallDeadzone { alpha, .. } => *alpha *= c,
            Self::Relay { amplitude, .. } => *amplitude *= c,
        }
        out
    }

    /// `ζ(θ)`. The ball boundary `‖θ - θ̄‖ = d` belongs to the outer branch.
    pub fn eval(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Zero => DVector::zeros(theta.len()),
            Self::Linear { alpha, prior } => (theta - prior) * *alpha,
            Self::BallDeadzone {
                alpha,
                prior,
                radius,
            } => {
                let v = theta - prior;
                if v.norm() >= *radius {
                    v * *alpha
                } else {
                    DVector::zeros(theta.len())
                }
            }
            Self::Relay {
                amplitude,
                prior,
                radius,
            } => {
                let v = theta - prior;
                if v.norm() >= *radius {
                    v.map(|c| amplitude * sign(c))
                } else {
                    DVector::zeros(theta.len())
                }
            }
        }
    }

    /// NF constants for ideal parameters `θ*`.
    ///
    /// Linear and ball-deadzone variants have closed forms valid on all of ℝᵐ.
    /// The relay grows only linearly, so its constants are fitted on the ball
    /// `‖θ - θ*‖ ≤ fit_radius` (see [`relay_nf_constants`]).
    pub fn nf_constants(&self, theta_star: &DVector<f64>, fit_radius: f64) -> Result<NfConstants> {
        match self {
            Self::Zero => Err(Error::NfFitInfeasible(
                "zero feedback has no positive rho".into(),
            )),
            Self::Linear { alpha, prior } => Ok(NfConstants {
                rho: alpha / 2.0,
                rho_prime: alpha * (prior - theta_star).norm_squared() / 2.0,
                fit_radius: None,
            }),
            Self::BallDeadzone {
                alpha,
                prior,
                radius,
            } => {
                let offset = (prior - theta_star).norm() + radius;
                Ok(NfConstants {
                    rho: alpha / 2.0,
                    rho_prime: alpha * offset * offset / 2.0,
                    fit_radius: None,
                })
            }
            Self::Relay {
                amplitude,
                prior,
                radius,
            } => relay_nf_constants(*amplitude, prior, *radius, theta_star, fit_radius),
        }
    }
}

/// NF constants of the relay feedback on `‖θ - θ*‖ ≤ R`.
///
/// Uses `ρ = A / (2R)`. With `v = θ - θ̄`, `δ = θ* - θ̄` and `r = ‖θ - θ*‖`,
/// outside the ball `ζᵀ(θ - θ*) = A‖v‖₁ - A sign(v)ᵀδ ≥ A max(d, r - ‖δ‖) - A‖δ‖₁`,
/// and inside it `ζ = 0` with `r ≤ d + ‖δ‖`. The resulting upper bound on
/// `ρr² - ζᵀ(θ - θ*)` is convex piecewise in `r`, so its maximum sits at
/// `r ∈ {0, d + ‖δ‖, R}`. The fit is infeasible when `ρ′ ≥ ρR²`, i.e. when the
/// inequality carries no coercivity on the ball.
pub fn relay_nf_constants(
    amplitude: f64,
    prior: &DVector<f64>,
    dead_radius: f64,
    theta_star: &DVector<f64>,
    fit_radius: f64,
) -> Result<NfConstants> {
    if !(fit_radius > 0.0) || !fit_radius.is_finite() {
        return Err(Error::NfFitInfeasible(format!(
            "fit radius must be positive and finite, got {fit_radius}"
        )));
    }
    let delta = theta_star - prior;
    let dn = delta.norm();
    let d1 = delta.iter().map(|c| c.abs()).sum::<f64>();
    let rho = amplitude / (2.0 * fit_radius);
    let switch = (dead_radius + dn).min(fit_radius);
    let outer = |r: f64| rho * r * r - amplitude * dead_radius.max(r - dn) + amplitude * d1;
    let rho_prime = [rho * switch * switch, outer(0.0), outer(switch), outer(fit_radius), 0.0]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if rho_prime >= rho * fit_radius * fit_radius {
        return Err(Error::NfFitInfeasible(format!(
            "rho' = {rho_prime} ≥ rho·R² = {} on radius {fit_radius}",
            rho * fit_radius * fit_radius
        )));
    }
    Ok(NfConstants {
        rho,
        rho_prime,
        fit_radius: Some(fit_radius),
    })
}

/// Checks `ζ(θ)ᵀ(θ - θ*) ≥ ρ‖θ - θ*‖² - ρ′` on `‖θ - θ*‖ ≤ R`.
///
/// Besides `n_samples` uniform points, the prior `θ̄` (where the linear
/// variant attains equality), `θ*` itself and the points at radius `R` along
/// each axis and along `θ̄ - θ*` are always included.
pub fn verify_nf(
    feedback: &Feedback,
    theta_star: &DVector<f64>,
    rho: f64,
    rho_prime: f64,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Certificate {
    let m = theta_star.len();
    let mut cert = Certificate::new("nf_condition", 1e-9);
    let mut probe = |e: DVector<f64>| {
        let theta = theta_star + &e;
        let lhs = feedback.eval(&theta).dot(&e);
        let margin = lhs - rho * e.norm_squared() + rho_prime;
        // relative to the size of the terms involved
        let scale = 1.0 + lhs.abs().max(rho * e.norm_squared());
        cert.observe(margin / scale, || theta.as_slice().to_vec());
    };
    probe(DVector::zeros(m));
    if let Some(prior) = feedback.prior() {
        let toward = prior - theta_star;
        let n = toward.norm();
        if n <= radius {
            probe(toward.clone());
        }
        if n > 0.0 {
            probe(&toward * (radius / n));
            probe(&toward * (-radius / n));
        }
    }
    for i in 0..m {
        for s in [-1.0, 1.0] {
            let mut e = DVector::zeros(m);
            e[i] = s * radius;
            probe(e);
        }
    }
    let mut rng = sampling::rng(seed);
    for _ in 0..n_samples {
        probe(sampling::in_ball(&mut rng, m, radius));
    }
    cert.finish()
}

/// Symmetric positive-definite gain matrix `Γ` with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GainMatrix {
    gamma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lambda_min: f64,
    lambda_max: f64,
}

impl PartialEq for GainMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma
    }
}

impl GainMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(Error::Dimension(format!(
                "gain matrix must be square, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let asym = (&gamma - gamma.transpose()).amax();
        if asym > 1e-12 * (1.0 + gamma.amax()) {
            return Err(Error::NotPositiveDefinite(format!(
                "gain matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        let eig = gamma.clone().symmetric_eigen().eigenvalues;
        let lambda_min = eig.min();
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "gain matrix has smallest eigenvalue {lambda_min:e}"
            )));
        }
        let chol = Cholesky::new(gamma.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(Self {
            lambda_max: eig.max(),
            gamma,
            chol,
            lambda_min,
        })
    }

    pub fn identity(m: usize) -> Self {
        Self::scalar(m, 1.0).expect("identity is positive definite")
    }

    pub fn scalar(m: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::identity(m, m) * value)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    /// `λ = λ_min(Γ)`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `‖v‖²_{Γ⁻¹} = vᵀΓ⁻¹v`, computed as `‖L⁻¹v‖²` with `Γ = LLᵀ`.
    pub fn inv_weighted_norm_sq(&self, v: &DVector<f64>) -> f64 {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.gamma * c)
    }
}

type PsiFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;

/// The pseudogradient map `ψ(x, t)`.
#[derive(Clone)]
pub enum PsiMap {
    Zero,
    /// `scale · ∇θw(x, θ_ref, t)`. For plants affine in θ, `∇θw` does not
    /// depend on θ and a nonnegative scale satisfies the pseudogradient condition.
    SpeedGradient {
        reference: DVector<f64>,
        scale: f64,
    },
    Custom(Arc<PsiFn>),
}

impl fmt::Debug for PsiMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::SpeedGradient { reference, scale } => f
                .debug_struct("SpeedGradient")
                .field("reference", &reference.as_slice())
                .field("scale", scale)
                .finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `ψ(x, t)` together with the scale `γ ≥ 0` used by the combined law.
#[derive(Debug, Clone)]
pub struct PseudoGradient {
    pub map: PsiMap,
    pub gamma: f64,
}

impl PseudoGradient {
    pub fn zero() -> Self {
        Self {
            map: PsiMap::Zero,
            gamma: 1.0,
        }
    }

    pub fn speed_gradient(reference: DVector<f64>, scale: f64, gamma: f64) -> Self {
        Self {
            map: PsiMap::SpeedGradient { reference, scale },
            gamma,
        }
    }

    /// `ψ(x, t)` without the `γ` factor.
    pub fn eval(
        &self,
        plant: &dyn Plant,
        goal: &dyn Goal,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        match &self.map {
            PsiMap::Zero => Ok(DVector::zeros(plant.param_dim())),
            PsiMap::SpeedGradient { reference, scale } => {
                Ok(eval_speed_gradient(plant, goal, x, reference, t)? * *scale)
            }
            PsiMap::Custom(f) => {
                let out = f(x, t);
                if out.len() != plant.param_dim() {
                    return Err(Error::Dimension(format!(
                        "psi returned length {}, parameter dimension is {}",
                        out.len(),
                        plant.param_dim()
                    )));
                }
                Ok(out)
            }
        }
    }

    /// `γ ψ(x, t)`.
    pub fn offset(
        &self,
        plant: &dyn Plant,
        goal: &dyn Goal,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        if self.gamma == 0.0 || matches!(self.map, PsiMap::Zero) {
            return Ok(DVector::zeros(plant.param_dim()));
        }
        Ok(self.eval(plant, goal, x, t)? * self.gamma)
    }
}

/// Which vector drives the adaptation.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientSource {
    /// The literal `∇θw` of the plant and goal.
    SpeedGradient,
    /// `(gᵀy) y` with `y = Lᵀx`, the passification-based output law.
    OutputSurrogate { g: DVector<f64>, l: DMatrix<f64> },
}

impl GradientSource {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            Self::SpeedGradient => Ok(()),
            Self::OutputSurrogate { g, l } => {
                if l.nrows() != n || l.ncols() != m || g.len() != m {
                    return Err(Error::Dimension(format!(
                        "surrogate needs L ∈ ℝ^{n}x{m} and g ∈ ℝ^{m}, got {}x{} and {}",
                        l.nrows(),
                        l.ncols(),
                        g.len()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn eval(
        &self,
        plant: &dyn Plant,
        goal: &dyn Goal,
        x: &DVector<f64>,
        theta: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        match self {
            Self::SpeedGradient => eval_speed_gradient(plant, goal, x, theta, t),
            Self::OutputSurrogate { g, l } => {
                let y = l.transpose() * x;
                Ok(&y * g.dot(&y))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum LawFamily {
    /// `θ̇ = 0`.
    Frozen,
    Basic,
    Sigma {
        kappa: f64,
        feedback: Feedback,
    },
    Combined {
        kappa: f64,
        feedback: Feedback,
        psi: PseudoGradient,
    },
    Deadzone {
        level: f64,
    },
}

/// An adaptation law: family plus gain matrix `Γ`.
#[derive(Debug, Clone)]
pub struct AdaptLaw {
    pub gain: GainMatrix,
    pub family: LawFamily,
}

impl AdaptLaw {
    pub fn frozen(m: usize) -> Self {
        Self {
            gain: GainMatrix::identity(m),
            family: LawFamily::Frozen,
        }
    }

    pub fn basic(gain: GainMatrix) -> Self {
        Self {
            gain,
            family: LawFamily::Basic,
        }
    }

    pub fn sigma(gain: GainMatrix, kappa: f64, feedback: Feedback) -> Self {
        Self {
            gain,
            family: LawFamily::Sigma { kappa, feedback },
        }
    }

    pub fn combined(gain: GainMatrix, kappa: f64, feedback: Feedback, psi: PseudoGradient) -> Self {
        Self {
            gain,
            family: LawFamily::Combined {
                kappa,
                feedback,
                psi,
            },
        }
    }

    pub fn deadzone(gain: GainMatrix, level: f64) -> Self {
        Self {
            gain,
            family: LawFamily::Deadzone { level },
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            LawFamily::Frozen => "frozen",
            LawFamily::Basic => "basic",
            LawFamily::Sigma { .. } => "sigma",
            LawFamily::Combined { .. } => "combined",
            LawFamily::Deadzone { .. } => "deadzone",
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match &self.family {
            LawFamily::Sigma { kappa, .. } | LawFamily::Combined { kappa, .. } => Some(*kappa),
            _ => None,
        }
    }

    pub fn feedback(&self) -> Option<&Feedback> {
        match &self.family {
            LawFamily::Sigma { feedback, .. } | LawFamily::Combined { feedback, .. } => {
                Some(feedback)
            }
            _ => None,
        }
    }

    pub fn psi(&self) -> Option<&PseudoGradient> {
        match &self.family {
            LawFamily::Combined { psi, .. } => Some(psi),
            _ => None,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.gain.dim() != m {
            return Err(Error::Dimension(format!(
                "gain matrix is {0}x{0}, parameter dimension is {m}",
                self.gain.dim()
            )));
        }
        match &self.family {
            LawFamily::Frozen | LawFamily::Basic => Ok(()),
            LawFamily::Sigma { kappa, feedback } => {
                if !(*kappa > 0.0) {
                    return Err(invalid("kappa", format!("must be > 0, got {kappa}")));
                }
                feedback.validate(m)
            }
            LawFamily::Combined {
                kappa,
                feedback,
                psi,
            } => {
                if !(*kappa > 0.0) {
                    return Err(invalid("kappa", format!("must be > 0, got {kappa}")));
                }
                if !(psi.gamma >= 0.0) {
                    return Err(invalid("gamma", format!("must be ≥ 0, got {}", psi.gamma)));
                }
                if let PsiMap::SpeedGradient { reference, .. } = &psi.map {
                    if reference.len() != m {
                        return Err(Error::Dimension(format!(
                            "psi reference has length {}, parameter dimension is {m}",
                            reference.len()
                        )));
                    }
                }
                feedback.validate(m)
            }
            LawFamily::Deadzone { level } => {
                if !(*level > 0.0) {
                    return Err(invalid("level", format!("deadzone level must be > 0, got {level}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_discontinuous(&self) -> bool {
        match &self.family {
            LawFamily::Deadzone { .. } => true,
            LawFamily::Sigma { feedback, .. } | LawFamily::Combined { feedback, .. } => {
                feedback.is_discontinuous()
            }
            _ => false,
        }
    }

    /// Rate of the adapted state: θ for most families, `z = θ + γψ` for the combined one.
    ///
    /// `param` is θ or z accordingly; `q` is the current goal value (read by
    /// the deadzone family only).
    pub fn adapt_rate(&self, grad: &DVector<f64>, param: &DVector<f64>, q: f64) -> DVector<f64> {
        let gamma = self.gain.matrix();
        match &self.family {
            LawFamily::Frozen => DVector::zeros(param.len()),
            LawFamily::Basic => -(gamma * grad),
            LawFamily::Sigma { kappa, feedback } | LawFamily::Combined { kappa, feedback, .. } => {
                -(gamma * (grad * *kappa + feedback.eval(param)))
            }
            LawFamily::Deadzone { level } => {
                if q >= *level {
                    -(gamma * grad)
                } else {
                    DVector::zeros(param.len())
                }
            }
        }
    }
}

/// Checks `ψ(x, t)ᵀ ∇θw(x, θ, t) ≥ -1e-9` at the given `(x, θ, t)` samples.
pub fn verify_pseudogradient(
    psi: &PseudoGradient,
    plant: &dyn Plant,
    goal: &dyn Goal,
    samples: &[(DVector<f64>, DVector<f64>, f64)],
) -> Result<Certificate> {
    let mut cert = Certificate::new("pseudogradient", 1e-9);
    for (x, theta, t) in samples {
        let p = psi.eval(plant, goal, x, *t)?;
        let g = eval_speed_gradient(plant, goal, x, theta, *t)?;
        cert.observe(p.dot(&g), || x.iter().chain(theta.iter()).copied().collect());
    }
    Ok(cert.finish())
}

/// Random `(x, θ, t)` with `‖x‖ ≤ x_radius`, `‖θ‖ ≤ theta_radius`, `t ∈ [0, 10)`.
pub fn sample_points(
    n: usize,
    m: usize,
    count: usize,
    x_radius: f64,
    theta_radius: f64,
    seed: u64,
) -> Vec<(DVector<f64>, DVector<f64>, f64)> {
    let mut rng = sampling::rng(seed);
    (0..count)
        .map(|_| {
            let x = sampling::in_ball(&mut rng, n, x_radius);
            let th = sampling::in_ball(&mut rng, m, theta_radius);
            (x, th, rng.random_range(0.0..10.0))
        })
        .collect()
}
