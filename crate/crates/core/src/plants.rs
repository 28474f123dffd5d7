//! Concrete plants and the linear-algebra support behind their class constants.

use std::sync::Arc;

use nalgebra::{Cholesky, Complex, DMatrix, DVector};
use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{invalid, Error, Result};
use crate::model::{Disturbance, Goal, Plant, QuadraticGoal, ScenarioSpec};
use crate::sampling;
use crate::sim::SimConfig;
use crate::speedgrad::{AdaptLaw, Feedback, GainMatrix, GradientSource};

/// How θ enters the scalar plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarForm {
    /// `F = a x + b θ`.
    Additive,
    /// `F = (a + b θ) x`, i.e. `u = θ x`.
    StateFeedback,
}

/// Scalar plant with `n = m = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAffinePlant {
    pub a: f64,
    pub b: f64,
    pub form: ScalarForm,
}

impl ScalarAffinePlant {
    pub fn new(a: f64, b: f64, form: ScalarForm) -> Self {
        Self { a, b, form }
    }

    /// Linear-output view (`A = a`, `B = b`, `L = 1`) of the state-feedback form.
    pub fn to_linear_output(&self) -> Result<LinearOutputPlant> {
        if self.form != ScalarForm::StateFeedback {
            return Err(invalid("form", "only the state-feedback form is a linear output plant"));
        }
        LinearOutputPlant::new(
            DMatrix::from_element(1, 1, self.a),
            DVector::from_element(1, self.b),
            DMatrix::identity(1, 1),
        )
    }
}

impl Plant for ScalarAffinePlant {
    fn state_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &DVector<f64>, theta: &DVector<f64>, _t: f64) -> DVector<f64> {
        let v = match self.form {
            ScalarForm::Additive => self.a * x[0] + self.b * theta[0],
            ScalarForm::StateFeedback => (self.a + self.b * theta[0]) * x[0],
        };
        DVector::from_element(1, v)
    }
    fn param_jacobian(&self, x: &DVector<f64>, _theta: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        let d = match self.form {
            ScalarForm::Additive => self.b,
            ScalarForm::StateFeedback => self.b * x[0],
        };
        Some(DMatrix::from_element(1, 1, d))
    }
    fn linear_in_params(&self) -> bool {
        true
    }
}

/// `ẋ = Ax + Bu`, `y = Lᵀx`, `u = θᵀy` (single input).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutputPlant {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub l: DMatrix<f64>,
}

impl LinearOutputPlant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, l: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.len() != n || l.nrows() != n || l.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "need A n×n, B n-vector, L n×l; got A {}x{}, B {}, L {}x{}",
                a.nrows(),
                a.ncols(),
                b.len(),
                l.nrows(),
                l.ncols()
            )));
        }
        Ok(Self { a, b, l })
    }

    pub fn output_dim(&self) -> usize {
        self.l.ncols()
    }

    /// `A* = A + Bθ*ᵀLᵀ`.
    pub fn closed_loop(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        &self.a + &self.b * (theta.transpose() * self.l.transpose())
    }

    /// Numerator polynomials `a(s) = Lᵀ adj(sI - A) B` of `W(s) = a(s)/det(sI - A)`,
    /// one per output, coefficients in ascending powers of `s`.
    ///
    /// Uses the Faddeev–LeVerrier recursion `M₁ = I`, `Mₖ = A Mₖ₋₁ + cₖ₋₁ I`,
    /// `adj(sI - A) = Σ Mₖ s^{n-k}`.
    pub fn transfer_numerators(&self) -> Vec<Vec<f64>> {
        let n = self.a.nrows();
        let mut mk = DMatrix::<f64>::identity(n, n);
        // adj_b[k-1] = Mₖ B multiplies s^{n-k}
        let mut adj_b = Vec::with_capacity(n);
        for k in 1..=n {
            adj_b.push(&mk * &self.b);
            let ck = -(&self.a * &mk).trace() / k as f64;
            mk = &self.a * &mk + DMatrix::identity(n, n) * ck;
        }
        (0..self.output_dim())
            .map(|j| {
                let lj = self.l.column(j);
                let mut coeffs = vec![0.0; n];
                for (k, mb) in adj_b.iter().enumerate() {
                    coeffs[n - 1 - k] = lj.dot(mb);
                }
                coeffs
            })
            .collect()
    }
}

impl Plant for LinearOutputPlant {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn param_dim(&self) -> usize {
        self.l.ncols()
    }
    fn dynamics(&self, x: &DVector<f64>, theta: &DVector<f64>, _t: f64) -> DVector<f64> {
        let y = self.l.transpose() * x;
        &self.a * x + &self.b * theta.dot(&y)
    }
    // ∂F/∂θ = B yᵀ
    fn param_jacobian(&self, x: &DVector<f64>, _theta: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        let y = self.l.transpose() * x;
        Some(&self.b * y.transpose())
    }
    fn linear_in_params(&self) -> bool {
        true
    }
}

/// `σ* = -max Re λᵢ(M)`; positive iff `M` is Hurwitz.
pub fn stability_degree(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min)
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Solves `(A + σ̂I)ᵀH + H(A + σ̂I) = -I` through the `n²` vectorized system
/// `(I ⊗ Mᵀ + Mᵀ ⊗ I) vec(H) = -vec(I)`.
pub fn solve_lyapunov(a_cl: &DMatrix<f64>, shift: f64) -> Result<DMatrix<f64>> {
    if !a_cl.is_square() {
        return Err(Error::Dimension("Lyapunov matrix must be square".into()));
    }
    if !(shift >= 0.0) {
        return Err(invalid("shift", format!("must be ≥ 0, got {shift}")));
    }
    let n = a_cl.nrows();
    let m = a_cl + DMatrix::identity(n, n) * shift;
    let degree = stability_degree(&m);
    if !(degree > 0.0) {
        return Err(Error::NotHurwitz { degree });
    }
    let mt = m.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = -DVector::from_column_slice(eye.as_slice());
    let lu = op.lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("vectorized Lyapunov operator".into()))?;
    // one step of iterative refinement
    let r = &rhs - &op_apply(&m, &sol, n);
    if let Some(corr) = lu.solve(&r) {
        sol += corr;
    }
    let h = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&h + h.transpose()) * 0.5)
}

fn op_apply(m: &DMatrix<f64>, vec_h: &DVector<f64>, n: usize) -> DVector<f64> {
    let h = DMatrix::from_column_slice(n, n, vec_h.as_slice());
    let out = m.transpose() * &h + &h * m;
    DVector::from_column_slice(out.as_slice())
}

/// Frobenius norm of `(A + σ̂I)ᵀH + H(A + σ̂I) + I`.
pub fn lyapunov_residual(a_cl: &DMatrix<f64>, shift: f64, h: &DMatrix<f64>) -> f64 {
    let n = a_cl.nrows();
    let m = a_cl + DMatrix::identity(n, n) * shift;
    (m.transpose() * h + h * &m + DMatrix::identity(n, n)).norm()
}

/// Roots of `Σ cᵢ sⁱ` (ascending coefficients) via companion-matrix eigenvalues.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut deg = coeffs.len();
    while deg > 0 && coeffs[deg - 1].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg <= 1 {
        return Vec::new();
    }
    let d = deg - 1;
    let lead = coeffs[d];
    let mut comp = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    eigenvalues(&comp)
}

/// Stability degree of `G(s) = gᵀa(s)` (`-max Re` of its roots).
///
/// `numerators[i]` holds the ascending coefficients of `aᵢ(s)`. For a
/// nonzero constant `G` there are no roots and `f64::INFINITY` is returned.
/// Approximates `σ*(A*)` for the high-gain choice `θ* = -μg`.
pub fn numerator_stability_degree(g: &DVector<f64>, numerators: &[Vec<f64>]) -> Result<f64> {
    if g.len() != numerators.len() {
        return Err(Error::Dimension(format!(
            "g has length {}, got {} numerator polynomials",
            g.len(),
            numerators.len()
        )));
    }
    let len = numerators.iter().map(Vec::len).max().unwrap_or(0);
    let mut poly = vec![0.0; len];
    for (gi, ai) in g.iter().zip(numerators) {
        for (k, c) in ai.iter().enumerate() {
            poly[k] += gi * c;
        }
    }
    if poly.iter().all(|c| *c == 0.0) {
        return Err(invalid("g", "G(s) = gᵀa(s) is identically zero"));
    }
    let roots = polynomial_roots(&poly);
    Ok(roots.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min))
}

/// `θ* = -μg`.
pub fn ideal_gain_high_gain(g: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    if !(mu >= 0.0) {
        return Err(invalid("mu", format!("must be ≥ 0, got {mu}")));
    }
    Ok(g * -mu)
}

/// Linear output plant together with the passification data and the goal matrix.
#[derive(Debug, Clone)]
pub struct OutputDesign {
    pub plant: LinearOutputPlant,
    /// Passification vector `g ∈ ℝˡ`.
    pub g: DVector<f64>,
    pub theta_star: DVector<f64>,
    /// Prior estimate `θ̄`.
    pub theta_bar: DVector<f64>,
    pub goal: QuadraticGoal,
    /// Shift `σ̂` when `H` came from [`solve_lyapunov`].
    pub shift: Option<f64>,
}

impl OutputDesign {
    pub fn new(
        plant: LinearOutputPlant,
        g: DVector<f64>,
        theta_star: DVector<f64>,
        theta_bar: DVector<f64>,
        goal: QuadraticGoal,
    ) -> Result<Self> {
        let (n, l) = (plant.state_dim(), plant.output_dim());
        if g.len() != l || theta_star.len() != l || theta_bar.len() != l {
            return Err(Error::Dimension(format!(
                "g, θ*, θ̄ must have length {l}, got {}, {}, {}",
                g.len(),
                theta_star.len(),
                theta_bar.len()
            )));
        }
        if goal.matrix().nrows() != n {
            return Err(Error::Dimension(format!("H must be {n}x{n}")));
        }
        let degree = stability_degree(&plant.closed_loop(&theta_star));
        if !(degree > 0.0) {
            return Err(Error::NotHurwitz { degree });
        }
        Ok(Self {
            plant,
            g,
            theta_star,
            theta_bar,
            goal,
            shift: None,
        })
    }

    /// Builds `H` from `solve_lyapunov(A*, σ̂)` with `σ̂ = shift_factor · σ*(A*)`.
    pub fn with_lyapunov_goal(
        plant: LinearOutputPlant,
        g: DVector<f64>,
        theta_star: DVector<f64>,
        theta_bar: DVector<f64>,
        shift_factor: f64,
    ) -> Result<Self> {
        if !(shift_factor >= 0.0 && shift_factor < 1.0) {
            return Err(invalid("shift_factor", format!("must lie in [0, 1), got {shift_factor}")));
        }
        let a_star = plant.closed_loop(&theta_star);
        let degree = stability_degree(&a_star);
        if !(degree > 0.0) {
            return Err(Error::NotHurwitz { degree });
        }
        let shift = shift_factor * degree;
        let goal = QuadraticGoal::new(solve_lyapunov(&a_star, shift)?)?;
        let mut design = Self::new(plant, g, theta_star, theta_bar, goal)?;
        design.shift = Some(shift);
        Ok(design)
    }

    pub fn closed_loop(&self) -> DMatrix<f64> {
        self.plant.closed_loop(&self.theta_star)
    }

    /// The passification-based σ-modified law `θ̇ = -Γ[κ(gᵀy)y + α(θ - θ̄)]`.
    pub fn adaptive_output_law(&self, gain: GainMatrix, kappa: f64, alpha: f64) -> Result<OutputLaw> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa", format!("must be > 0, got {kappa}")));
        }
        if !(alpha > 0.0) {
            return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        let law = AdaptLaw::sigma(gain, kappa, Feedback::linear(alpha, self.theta_bar.clone()));
        law.validate(self.plant.output_dim())?;
        Ok(OutputLaw {
            law,
            gradient: GradientSource::OutputSurrogate {
                g: self.g.clone(),
                l: self.plant.l.clone(),
            },
            alignment: self.alignment(),
        })
    }

    /// Relation between the literal `∇θw = (BᵀHx) y` and the surrogate `(gᵀy) y`.
    ///
    /// They coincide up to the factor `c > 0` exactly when `HB = c·Lg`.
    pub fn alignment(&self) -> Alignment {
        let hb = self.goal.matrix() * &self.plant.b;
        let lg = &self.plant.l * &self.g;
        let lg2 = lg.norm_squared();
        let scale = if lg2 > 0.0 { lg.dot(&hb) / lg2 } else { 0.0 };
        let residual = (&hb - &lg * scale).norm() / hb.norm().max(f64::MIN_POSITIVE);
        Alignment {
            scale,
            residual,
            aligned: scale > 0.0 && residual <= 1e-6,
        }
    }

    /// Closed-loop scenario of the plant with the given law.
    pub fn scenario(
        &self,
        output_law: &OutputLaw,
        disturbance: Disturbance,
        x0: DVector<f64>,
        theta0: DVector<f64>,
        sim: SimConfig,
    ) -> ScenarioSpec {
        ScenarioSpec {
            plant: Arc::new(self.plant.clone()),
            goal: Arc::new(self.goal.clone()),
            disturbance,
            law: output_law.law.clone(),
            gradient: output_law.gradient.clone(),
            x0,
            theta0,
            sim,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputLaw {
    pub law: AdaptLaw,
    pub gradient: GradientSource,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alignment {
    /// Least-squares `c` in `HB ≈ c·Lg`.
    pub scale: f64,
    /// `‖HB - c·Lg‖ / ‖HB‖`.
    pub residual: f64,
    pub aligned: bool,
}

/// Class constants `(α₀, α₁, σ)` of a linear output design, with their certificates.
#[derive(Debug, Clone, Serialize)]
pub struct ClassConstants {
    pub sigma: f64,
    /// Largest `α₀` with `w(x, θ*) ≤ -α₀ Q(x)` for all x (generalized eigenvalue).
    pub alpha0: f64,
    /// Smallest `-w/Q` over the sampled directions.
    pub alpha0_sampled: f64,
    /// `2σ̂` when `H` came from the shifted Lyapunov equation.
    pub alpha0_lyapunov: Option<f64>,
    pub alpha1: f64,
    pub alpha1_analytic: f64,
    pub alpha1_sampled: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `σ*(A*)`.
    pub stability_degree: f64,
    pub attainability: Certificate,
    pub growth: Certificate,
}

const CLASS_SAMPLES: usize = 1000;

/// Computes and certifies `σ = 0.5`, `α₀`, `α₁` for `Q = ½xᵀHx`.
///
/// `α₀` is the smallest eigenvalue of `H^{-1/2} S H^{-1/2}` with
/// `S = -(HA* + A*ᵀH)`, i.e. the exact infimum of `-w(x, θ*)/Q(x)`;
/// `α₁ = max(√(2λ⁺), sampled sup ‖Hx‖/√Q)`.
pub fn class_constants(design: &OutputDesign, seed: u64) -> Result<ClassConstants> {
    let a_star = design.closed_loop();
    let degree = stability_degree(&a_star);
    if !(degree > 0.0) {
        return Err(Error::NotHurwitz { degree });
    }
    let h = design.goal.matrix();
    let n = h.nrows();
    let s = -(h * &a_star + a_star.transpose() * h);
    let chol = Cholesky::new(h.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("goal matrix".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Cholesky factor of H".into()))?;
    let reduced = &linv * s * linv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let alpha0 = reduced.symmetric_eigen().eigenvalues.min();
    if !(alpha0 > 0.0) {
        return Err(Error::Unattainable(alpha0));
    }

    let growth = design.goal.growth_constants().expect("quadratic goal");
    let plant = &design.plant;
    let goal = &design.goal;
    let mut rng = sampling::rng(seed);
    let dirs: Vec<DVector<f64>> = (0..CLASS_SAMPLES)
        .map(|_| sampling::unit_vector(&mut rng, n))
        .collect();

    let mut alpha0_sampled = f64::INFINITY;
    let mut alpha1_sampled: f64 = 0.0;
    for x in &dirs {
        let q = goal.value(x);
        let w = goal.gradient(x).dot(&plant.dynamics(x, &design.theta_star, 0.0));
        alpha0_sampled = alpha0_sampled.min(-w / q);
        alpha1_sampled = alpha1_sampled.max(goal.gradient(x).norm() / q.sqrt());
    }
    let alpha1 = growth.alpha1.max(alpha1_sampled);

    let mut attainability = Certificate::new("attainability_a4", 1e-12);
    let mut growth_cert = Certificate::new("growth_a5", 1e-12);
    for x in &dirs {
        let q = goal.value(x);
        let w = goal.gradient(x).dot(&plant.dynamics(x, &design.theta_star, 0.0));
        attainability.observe((-w - alpha0 * q) / q, || x.as_slice().to_vec());
        growth_cert.observe(
            (alpha1 * q.powf(growth.sigma) - goal.gradient(x).norm()) / alpha1,
            || x.as_slice().to_vec(),
        );
    }

    Ok(ClassConstants {
        sigma: growth.sigma,
        alpha0,
        alpha0_sampled,
        alpha0_lyapunov: design.shift.map(|s| 2.0 * s),
        alpha1,
        alpha1_analytic: growth.alpha1,
        alpha1_sampled,
        lambda_max: design.goal.lambda_max(),
        lambda_min: design.goal.lambda_min(),
        stability_degree: degree,
        attainability: attainability.finish(),
        growth: growth_cert.finish(),
    })
}

/// The scalar tightness example: `ẋ = (a + bθ)x + f`, `Q = ½x²`, `f ≡ Δf`.
#[derive(Debug, Clone)]
pub struct ScalarExample {
    pub plant: ScalarAffinePlant,
    pub design: OutputDesign,
    pub disturbance: Disturbance,
}

/// Builds the scalar example with `θ* = (p - a)/b` placing the frozen
/// closed-loop pole at `p = -1`.
pub fn make_scalar_example(a: f64, b: f64, delta_f: f64) -> Result<ScalarExample> {
    make_scalar_example_with_pole(a, b, delta_f, -1.0)
}

pub fn make_scalar_example_with_pole(a: f64, b: f64, delta_f: f64, pole: f64) -> Result<ScalarExample> {
    if b == 0.0 || !b.is_finite() {
        return Err(invalid("b", "must be nonzero for attainability"));
    }
    if !(pole < 0.0) {
        return Err(invalid("pole", format!("must be negative, got {pole}")));
    }
    let plant = ScalarAffinePlant::new(a, b, ScalarForm::StateFeedback);
    let theta_star = DVector::from_element(1, (pole - a) / b);
    let design = OutputDesign::new(
        plant.to_linear_output()?,
        DVector::from_element(1, 1.0),
        theta_star.clone(),
        DVector::zeros(1),
        QuadraticGoal::identity(1),
    )?;
    Ok(ScalarExample {
        plant,
        design,
        disturbance: Disturbance::constant(delta_f, &[1.0])?,
    })
}

impl ScalarExample {
    pub fn theta_star(&self) -> &DVector<f64> {
        &self.design.theta_star
    }

    pub fn delta_f(&self) -> f64 {
        self.disturbance.amplitude()
    }

    /// Closed loop with the given law, `x0 = 1`, `θ0 = 0`.
    pub fn scenario(&self, law: AdaptLaw, sim: SimConfig) -> ScenarioSpec {
        ScenarioSpec {
            plant: Arc::new(self.plant),
            goal: Arc::new(QuadraticGoal::identity(1)),
            disturbance: self.disturbance.clone(),
            law,
            gradient: GradientSource::SpeedGradient,
            x0: DVector::from_element(1, 1.0),
            theta0: DVector::zeros(1),
            sim,
        }
    }

    /// Comparison run with θ frozen at θ*.
    pub fn frozen_scenario(&self, sim: SimConfig) -> ScenarioSpec {
        ScenarioSpec {
            theta0: self.theta_star().clone(),
            ..self.scenario(AdaptLaw::frozen(1), sim)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eval_speed_gradient, Goal};
    use crate::sim::integrate;
    use approx::assert_relative_eq;

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(s)
    }

    fn m2(s: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, s)
    }

    fn example_plant() -> LinearOutputPlant {
        LinearOutputPlant::new(m2(&[0.0, 1.0, -2.0, -2.0]), v(&[0.0, 1.0]), DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn lyapunov_examples() {
        let h = solve_lyapunov(&DMatrix::from_element(1, 1, -1.0), 0.5).unwrap();
        assert_relative_eq!(h[(0, 0)], 1.0, max_relative = 1e-14);

        let h = solve_lyapunov(&-DMatrix::<f64>::identity(2, 2), 0.0).unwrap();
        assert!((h - DMatrix::identity(2, 2) * 0.5).amax() < 1e-14);

        let a = m2(&[0.0, 1.0, -2.0, -2.0]);
        let h = solve_lyapunov(&a, 0.0).unwrap();
        // Aᵀ H + H A = -I solved by hand: H = [[5/4, 1/4], [1/4, 3/8]]
        let expected = m2(&[1.25, 0.25, 0.25, 0.375]);
        assert!((&h - expected).amax() < 1e-14);
        assert!(lyapunov_residual(&a, 0.0, &h) <= 1e-10 * h.norm());
        assert!(h.clone().symmetric_eigen().eigenvalues.min() > 0.0);

        assert!(matches!(
            solve_lyapunov(&m2(&[1.0, 0.0, 0.0, -1.0]), 0.0),
            Err(Error::NotHurwitz { .. })
        ));
        // shift pushes a Hurwitz matrix across the axis
        assert!(solve_lyapunov(&a, 1.5).is_err());
    }

    #[test]
    fn stability_degree_examples() {
        assert_relative_eq!(stability_degree(&m2(&[-1.0, 0.0, 0.0, -3.0])), 1.0);
        assert_relative_eq!(stability_degree(&m2(&[0.0, 1.0, -2.0, -2.0])), 1.0, max_relative = 1e-12);
        assert_eq!(stability_degree(&m2(&[0.0, 0.0, 0.0, -2.0])).abs(), 0.0);
    }

    #[test]
    fn numerator_examples() {
        assert_relative_eq!(numerator_stability_degree(&v(&[1.0]), &[vec![2.0, 1.0]]).unwrap(), 2.0);
        assert_relative_eq!(
            numerator_stability_degree(&v(&[1.0]), &[vec![2.0, 2.0, 1.0]]).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            numerator_stability_degree(&v(&[1.0, 1.0]), &[vec![1.0, 1.0], vec![1.0]]).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        assert_eq!(numerator_stability_degree(&v(&[3.0]), &[vec![2.0]]).unwrap(), f64::INFINITY);
        assert!(numerator_stability_degree(&v(&[0.0]), &[vec![2.0]]).is_err());
    }

    #[test]
    fn transfer_numerators_of_example() {
        // adj(sI - A) B = [1, s]
        let a_s = example_plant().transfer_numerators();
        assert_eq!(a_s, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        // G = gᵀa = 1 + s
        assert_relative_eq!(numerator_stability_degree(&v(&[1.0, 1.0]), &a_s).unwrap(), 1.0);
    }

    #[test]
    fn closed_loop_eigenvalue_approaches_numerator_root() {
        let plant = example_plant();
        let g = v(&[1.0, 1.0]);
        let dists: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|mu| {
                let a_star = plant.closed_loop(&ideal_gain_high_gain(&g, *mu).unwrap());
                eigenvalues(&a_star)
                    .iter()
                    .map(|z| (z - Complex::new(-1.0, 0.0)).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        assert!(dists[0] > dists[1] && dists[1] > dists[2], "{dists:?}");
    }

    #[test]
    fn high_gain_examples() {
        assert_eq!(ideal_gain_high_gain(&v(&[1.0]), 5.0).unwrap(), v(&[-5.0]));
        assert_eq!(ideal_gain_high_gain(&v(&[1.0, 2.0]), 0.0).unwrap().norm(), 0.0);
        let p = ScalarAffinePlant::new(1.0, 1.0, ScalarForm::StateFeedback).to_linear_output().unwrap();
        let a_star = p.closed_loop(&ideal_gain_high_gain(&v(&[1.0]), 5.0).unwrap());
        assert_eq!(a_star[(0, 0)], -4.0);
        assert!(stability_degree(&a_star) > 0.0);
    }

    #[test]
    fn class_constants_scalar() {
        let ex = make_scalar_example(1.0, 1.0, 0.5).unwrap();
        assert_eq!(ex.theta_star()[0], -2.0);
        let c = class_constants(&ex.design, 1).unwrap();
        assert_relative_eq!(c.alpha0, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.alpha0_sampled, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.alpha0, 2.0 * c.stability_degree, max_relative = 1e-14);
        assert_relative_eq!(c.alpha1, 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(c.sigma, 0.5);
        assert!(c.attainability.passed && c.growth.passed);
    }

    #[test]
    fn class_constants_identity_goal_alpha1() {
        let mut design = OutputDesign::new(
            example_plant(),
            v(&[1.0, 1.0]),
            v(&[-5.0, -5.0]),
            v(&[0.0, 0.0]),
            QuadraticGoal::identity(2),
        );
        // H = I need not be a Lyapunov matrix for A*; α₀ may then fail
        if let Ok(d) = design.as_mut() {
            match class_constants(d, 2) {
                Ok(c) => {
                    assert_relative_eq!(c.alpha1_analytic, 2f64.sqrt());
                    assert_relative_eq!(c.alpha1_sampled, 2f64.sqrt(), max_relative = 1e-12);
                }
                Err(e) => assert!(matches!(e, Error::Unattainable(_))),
            }
        }
    }

    #[test]
    fn class_constants_lyapunov_design() {
        let g = v(&[1.0, 1.0]);
        let star = ideal_gain_high_gain(&g, 5.0).unwrap();
        let d = OutputDesign::with_lyapunov_goal(example_plant(), g, star.clone(), star, 0.9).unwrap();
        let c = class_constants(&d, 3).unwrap();
        let two_shift = c.alpha0_lyapunov.unwrap();
        assert!(c.alpha0 >= two_shift - 1e-12);
        assert!(c.alpha0_sampled >= c.alpha0 - 1e-12);
        assert!(c.attainability.passed && c.growth.passed);
        assert!(c.alpha1 >= c.alpha1_sampled);
        assert_relative_eq!(c.alpha1, (2.0 * c.lambda_max).sqrt(), max_relative = 1e-12);
        let h = d.goal.matrix();
        assert!(lyapunov_residual(&d.closed_loop(), d.shift.unwrap(), h) <= 1e-10 * h.norm());
    }

    #[test]
    fn misconfigured_ideal_gain_is_rejected() {
        // A* = 1 + θ* = +1
        let p = ScalarAffinePlant::new(1.0, 1.0, ScalarForm::StateFeedback).to_linear_output().unwrap();
        let r = OutputDesign::new(p, v(&[1.0]), v(&[0.0]), v(&[0.0]), QuadraticGoal::identity(1));
        assert!(matches!(r, Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn attainability_fails_for_non_lyapunov_goal() {
        // A* Hurwitz but H = diag(1, 100) gives w > 0 in some directions
        let p = LinearOutputPlant::new(m2(&[-1.0, 10.0, 0.0, -1.0]), v(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let h = QuadraticGoal::new(m2(&[100.0, 0.0, 0.0, 1.0])).unwrap();
        let d = OutputDesign::new(p, v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0]), h).unwrap();
        assert!(matches!(class_constants(&d, 1), Err(Error::Unattainable(_))));
    }

    #[test]
    fn scalar_example_steady_states() {
        let sim = SimConfig::new(1e-2, 50.0);
        let ex = make_scalar_example(1.0, 1.0, 0.5).unwrap();
        let traj = integrate(&ex.frozen_scenario(sim.clone())).unwrap();
        assert!((traj.tail_sup_state_norm(0.2) - 0.5).abs() < 0.01);
        assert!((traj.tail_sup(0.2) - 0.125).abs() < 0.0025);

        let calm = make_scalar_example(1.0, 1.0, 0.0).unwrap();
        let traj = integrate(&calm.frozen_scenario(sim.clone())).unwrap();
        assert!(traj.tail_sup(0.2) < 1e-15);

        let stable = make_scalar_example(-1.0, 1.0, 1.0).unwrap();
        assert_eq!(stable.theta_star()[0], 0.0);
        let traj = integrate(&stable.frozen_scenario(sim)).unwrap();
        assert!((traj.tail_sup_state_norm(0.2) - 1.0).abs() < 0.02);
    }

    #[test]
    fn output_law_examples() {
        let ex = make_scalar_example(0.3, 1.0, 0.5).unwrap();
        // aligned: HB = 1 = Lg
        let ol = ex.design.adaptive_output_law(GainMatrix::identity(1), 2.0, 1.0).unwrap();
        assert!(ol.alignment.aligned);
        assert_relative_eq!(ol.alignment.scale, 1.0);
        let x = v(&[2.0]);
        let th = v(&[0.1]);
        let literal = eval_speed_gradient(&ex.plant, &QuadraticGoal::identity(1), &x, &th, 0.0).unwrap();
        let surrogate = ol.gradient.eval(&ex.plant, &QuadraticGoal::identity(1), &x, &th, 0.0).unwrap();
        assert_eq!(literal[0], 4.0);
        assert_eq!(surrogate[0], 4.0);

        // y = 0: pure leak toward the prior
        let zero = ol.gradient.eval(&ex.plant, &QuadraticGoal::identity(1), &v(&[0.0]), &th, 0.0).unwrap();
        let rate = ol.law.adapt_rate(&zero, &th, 0.0);
        assert_relative_eq!(rate[0], -1.0 * (0.1 - 0.0));

        // κ = 2, α = 1, y = 1, θ = θ̄
        let one = ol.gradient.eval(&ex.plant, &QuadraticGoal::identity(1), &v(&[1.0]), &v(&[0.0]), 0.0).unwrap();
        assert_eq!(ol.law.adapt_rate(&one, &v(&[0.0]), 0.0)[0], -2.0);

        assert!(ex.design.adaptive_output_law(GainMatrix::identity(1), 0.0, 1.0).is_err());
    }

    #[test]
    fn alignment_reports_mismatch() {
        let g = v(&[1.0, 1.0]);
        let star = ideal_gain_high_gain(&g, 5.0).unwrap();
        let d = OutputDesign::with_lyapunov_goal(example_plant(), g, star.clone(), star, 0.9).unwrap();
        let a = d.alignment();
        assert!(!a.aligned && a.residual > 1e-3);
        // literal gradient is (BᵀHx) y
        let goal: &dyn Goal = &d.goal;
        let x = v(&[0.4, -1.2]);
        let lit = eval_speed_gradient(&d.plant, goal, &x, &v(&[0.0, 0.0]), 0.0).unwrap();
        let expect = &x * (d.plant.b.dot(&(d.goal.matrix() * &x)));
        assert!((lit - expect).amax() < 1e-14);
    }
}
