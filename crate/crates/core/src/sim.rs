//! Closed-loop integration and trajectory measurements.
//!
//! The augmented state is `(x, θ)`, or `(x, z)` with `z = θ + γψ(x, t)` for the
//! combined law. Integration is classical fixed-step RK4. Discontinuous
//! right-hand sides (relay and ball-deadzone feedback, the deadzone law,
//! piecewise-constant or state-dependent disturbances) are evaluated pointwise
//! at the stage points without event location, so the local error degrades to
//! `O(h)` on steps that cross a switching surface; [`ScenarioSpec::validate`]
//! enforces `h ≤ max_step_discontinuous` (default `1e-3`) for those scenarios.

use std::io::{self, Write};

use nalgebra::DVector;
use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{invalid, Error, Result};
use crate::model::{eval_disturbance, eval_dynamics, eval_speed, Goal, Plant, ScenarioSpec};
use crate::speedgrad::{GainMatrix, LawFamily, PseudoGradient};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub record_stride: usize,
    /// Fraction `τ` of the horizon used by the tail-supremum estimator.
    pub tail_fraction: f64,
    pub max_step_discontinuous: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 50.0,
            record_stride: 10,
            tail_fraction: 0.2,
            max_step_discontinuous: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Number of integration steps `T / h`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step", format!("must be > 0, got {}", self.step)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if self.step > self.horizon {
            return Err(invalid("step", "must not exceed the horizon"));
        }
        let steps = self.steps() as f64;
        if (steps * self.step - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(invalid(
                "horizon",
                format!("horizon {} is not an integer multiple of step {}", self.horizon, self.step),
            ));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be ≥ 1"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(invalid(
                "tail_fraction",
                format!("must lie in (0, 1), got {}", self.tail_fraction),
            ));
        }
        if !(self.max_step_discontinuous > 0.0) {
            return Err(invalid("max_step_discontinuous", "must be > 0"));
        }
        Ok(())
    }
}

/// Recorded samples of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub params: Vec<DVector<f64>>,
    pub goal: Vec<f64>,
    pub speed: Vec<f64>,
    pub lyapunov: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    fn with_capacity(cap: usize) -> Self {
        Self {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            params: Vec::with_capacity(cap),
            goal: Vec::with_capacity(cap),
            speed: Vec::with_capacity(cap),
            lyapunov: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    fn tail_start(&self, tau: f64) -> f64 {
        let t0 = self.times.first().copied().unwrap_or(0.0);
        let t1 = self.final_time();
        t0 + (1.0 - tau) * (t1 - t0)
    }

    fn tail_max(&self, tau: f64, values: impl Iterator<Item = f64>) -> f64 {
        let start = self.tail_start(tau);
        self.times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t >= start)
            .map(|(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tail-window estimate of `lim sup Q`: the max of `Q` over `t ≥ (1 - τ)T`.
    pub fn tail_sup(&self, tau: f64) -> f64 {
        self.tail_max(tau, self.goal.iter().copied())
    }

    /// Tail-window estimate of `lim sup ‖x‖`.
    pub fn tail_sup_state_norm(&self, tau: f64) -> f64 {
        self.tail_max(tau, self.states.iter().map(|x| x.norm()))
    }

    /// `max ‖x‖ + ‖θ‖` over the record.
    pub fn peak_magnitude(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.params)
            .map(|(x, th)| x.norm() + th.norm())
            .fold(0.0, f64::max)
    }

    /// Writes `t,x1..xn,theta1..thetam,Q,w[,V]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.params.first().map_or(0, |p| p.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("theta{i}")));
        header.push("Q".into());
        header.push("w".into());
        if self.lyapunov.is_some() {
            header.push("V".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<f64> = Vec::with_capacity(3 + n + m);
            row.push(self.times[i]);
            row.extend(self.states[i].iter());
            row.extend(self.params[i].iter());
            row.push(self.goal[i]);
            row.push(self.speed[i]);
            if let Some(v) = &self.lyapunov {
                row.push(v[i]);
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// One classical RK4 step of `ṡ = f(t, s)`.
pub fn rk4_step<F>(mut f: F, t: f64, s: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, s)?;
    let k2 = f(t + 0.5 * h, &(s + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(s + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(s + &k3 * h))?;
    Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Closed-loop right-hand side over the augmented state.
struct ClosedLoop<'a> {
    scenario: &'a ScenarioSpec,
    n: usize,
    psi: Option<&'a PseudoGradient>,
}

impl ClosedLoop<'_> {
    fn split(&self, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = s.len() - self.n;
        (s.rows(0, self.n).into_owned(), s.rows(self.n, m).into_owned())
    }

    /// θ from the adapted state.
    fn theta(&self, x: &DVector<f64>, p: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        match self.psi {
            Some(psi) => {
                Ok(p - psi.offset(self.scenario.plant.as_ref(), self.scenario.goal.as_ref(), x, t)?)
            }
            None => Ok(p.clone()),
        }
    }

    fn rhs(&self, t: f64, s: &DVector<f64>) -> Result<DVector<f64>> {
        let sc = self.scenario;
        let (plant, goal) = (sc.plant.as_ref(), sc.goal.as_ref());
        let (x, p) = self.split(s);
        let theta = self.theta(&x, &p, t)?;
        let f = eval_disturbance(&sc.disturbance, t, &x, goal);
        let bound = sc.disturbance.amplitude();
        let norm = f.norm();
        if norm > bound {
            return Err(Error::DisturbanceBound {
                norm,
                bound,
                time: t,
            });
        }
        let xdot = eval_dynamics(plant, &x, &theta, t, &f)?;
        let q = goal.value(&x);
        let pdot = if matches!(sc.law.family, LawFamily::Frozen) {
            DVector::zeros(p.len())
        } else {
            let grad = sc.gradient.eval(plant, goal, &x, &theta, t)?;
            sc.law.adapt_rate(&grad, &p, q)
        };
        let mut out = DVector::zeros(s.len());
        out.rows_mut(0, self.n).copy_from(&xdot);
        out.rows_mut(self.n, p.len()).copy_from(&pdot);
        Ok(out)
    }

    fn record(&self, traj: &mut TrajectoryRecord, t: f64, s: &DVector<f64>) -> Result<()> {
        let (plant, goal) = (self.scenario.plant.as_ref(), self.scenario.goal.as_ref());
        let (x, p) = self.split(s);
        let theta = self.theta(&x, &p, t)?;
        traj.goal.push(goal.value(&x));
        traj.speed.push(eval_speed(plant, goal, &x, &theta, t)?);
        traj.times.push(t);
        traj.states.push(x);
        traj.params.push(theta);
        Ok(())
    }
}

/// Integrates the scenario over `[0, T]`.
///
/// Records step 0, every `record_stride`-th step and the final step. A
/// non-finite state aborts with [`Error::NonFinite`] carrying the blow-up time.
pub fn integrate(scenario: &ScenarioSpec) -> Result<TrajectoryRecord> {
    scenario.validate()?;
    let n = scenario.plant.state_dim();
    let m = scenario.plant.param_dim();
    let cfg = &scenario.sim;
    let lp = ClosedLoop {
        scenario,
        n,
        psi: scenario.law.psi(),
    };

    let mut s = DVector::zeros(n + m);
    s.rows_mut(0, n).copy_from(&scenario.x0);
    let p0 = match lp.psi {
        Some(psi) => {
            &scenario.theta0
                + psi.offset(scenario.plant.as_ref(), scenario.goal.as_ref(), &scenario.x0, 0.0)?
        }
        None => scenario.theta0.clone(),
    };
    s.rows_mut(n, m).copy_from(&p0);

    let steps = cfg.steps();
    let mut traj = TrajectoryRecord::with_capacity(steps / cfg.record_stride + 2);
    lp.record(&mut traj, 0.0, &s)?;
    for i in 0..steps {
        let t = i as f64 * cfg.step;
        s = rk4_step(|t, s| lp.rhs(t, s), t, &s, cfg.step)?;
        let t_next = (i + 1) as f64 * cfg.step;
        if !s.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                what: "state",
                time: t_next,
            });
        }
        if (i + 1) % cfg.record_stride == 0 || i + 1 == steps {
            lp.record(&mut traj, t_next, &s)?;
        }
    }
    Ok(traj)
}

/// `V(x, θ, t) = Q(x) + (1/2k) ‖θ - θ* + γψ(x, t)‖²_{Γ⁻¹}`.
#[derive(Debug, Clone)]
pub struct LyapunovSpec {
    pub theta_star: DVector<f64>,
    pub kappa: f64,
    pub gain: GainMatrix,
    pub psi: Option<PseudoGradient>,
}

impl LyapunovSpec {
    /// Takes `κ`, `Γ` and `ψ` from the scenario's σ-modified or combined law.
    pub fn for_scenario(scenario: &ScenarioSpec, theta_star: DVector<f64>) -> Result<Self> {
        let kappa = scenario
            .law
            .kappa()
            .ok_or_else(|| invalid("law", "Lyapunov function needs a sigma or combined law"))?;
        Ok(Self {
            theta_star,
            kappa,
            gain: scenario.law.gain.clone(),
            psi: scenario.law.psi().cloned(),
        })
    }

    pub fn value(
        &self,
        plant: &dyn Plant,
        goal: &dyn Goal,
        x: &DVector<f64>,
        theta: &DVector<f64>,
        t: f64,
    ) -> Result<f64> {
        let mut e = theta - &self.theta_star;
        if let Some(psi) = &self.psi {
            e += psi.offset(plant, goal, x, t)?;
        }
        Ok(goal.value(x) + self.gain.inv_weighted_norm_sq(&e) / (2.0 * self.kappa))
    }

    /// Fills `traj.lyapunov`.
    pub fn attach(&self, traj: &mut TrajectoryRecord, plant: &dyn Plant, goal: &dyn Goal) -> Result<()> {
        let values = (0..traj.len())
            .map(|i| self.value(plant, goal, &traj.states[i], &traj.params[i], traj.times[i]))
            .collect::<Result<Vec<_>>>()?;
        traj.lyapunov = Some(values);
        Ok(())
    }
}

/// Checks `V(tᵢ) ≤ V(0)e^{-αtᵢ} + (β/α)(1 - e^{-αtᵢ})` up to `1e-6 · (1 + V(0))`.
pub fn check_lyapunov_decay(traj: &TrajectoryRecord, alpha: f64, beta: f64) -> Result<Certificate> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    let v = traj
        .lyapunov
        .as_ref()
        .ok_or_else(|| invalid("lyapunov", "trajectory has no Lyapunov values attached"))?;
    let Some(&v0) = v.first() else {
        return Ok(Certificate::new("lyapunov_decay", 0.0).finish());
    };
    let t0 = traj.times[0];
    let mut cert = Certificate::new("lyapunov_decay", 1e-6 * (1.0 + v0));
    for (t, vi) in traj.times.iter().zip(v) {
        let decay = (-alpha * (t - t0)).exp();
        let bound = v0 * decay + beta / alpha * (1.0 - decay);
        cert.observe(bound - vi, || vec![*t]);
    }
    Ok(cert.finish())
}

/// True iff `‖x‖ + ‖θ‖ ≤ bound` at every recorded sample.
pub fn boundedness_check(traj: &TrajectoryRecord, bound: f64) -> bool {
    traj.peak_magnitude() <= bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Disturbance, FnPlant, QuadraticGoal};
    use crate::plants::{ScalarAffinePlant, ScalarForm};
    use crate::speedgrad::{AdaptLaw, Feedback, GradientSource};
    use std::sync::Arc;

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(s)
    }

    fn scalar_scenario(law: AdaptLaw, dist: Disturbance, x0: f64, th0: f64, sim: SimConfig) -> ScenarioSpec {
        ScenarioSpec {
            plant: Arc::new(ScalarAffinePlant::new(1.0, 1.0, ScalarForm::StateFeedback)),
            goal: Arc::new(QuadraticGoal::identity(1)),
            disturbance: dist,
            law,
            gradient: GradientSource::SpeedGradient,
            x0: v(&[x0]),
            theta0: v(&[th0]),
            sim,
        }
    }

    fn synthetic(times: Vec<f64>, q: Vec<f64>) -> TrajectoryRecord {
        let k = times.len();
        TrajectoryRecord {
            states: q.iter().map(|qi| v(&[(2.0 * qi).sqrt()])).collect(),
            params: vec![v(&[0.0]); k],
            speed: vec![0.0; k],
            goal: q,
            times,
            lyapunov: None,
        }
    }

    #[test]
    fn exponential_decay_matches_analytic() {
        let sc = ScenarioSpec {
            plant: Arc::new(FnPlant::new(1, 1, |x, _, _| -x)),
            goal: Arc::new(QuadraticGoal::identity(1)),
            disturbance: Disturbance::Zero,
            law: AdaptLaw::frozen(1),
            gradient: GradientSource::SpeedGradient,
            x0: v(&[1.0]),
            theta0: v(&[0.0]),
            sim: SimConfig::new(0.01, 1.0).with_stride(1),
        };
        let traj = integrate(&sc).unwrap();
        assert_eq!(traj.len(), 101);
        let x_t = traj.states.last().unwrap()[0];
        assert!((x_t - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(traj.final_time(), 1.0);
    }

    #[test]
    fn basic_law_drives_goal_to_zero() {
        let sc = scalar_scenario(
            AdaptLaw::basic(GainMatrix::identity(1)),
            Disturbance::Zero,
            1.0,
            0.0,
            SimConfig::new(1e-3, 50.0).with_stride(100),
        );
        let traj = integrate(&sc).unwrap();
        assert!(*traj.goal.last().unwrap() < 1e-6);
        assert!(traj.params.iter().all(|p| p[0].abs() < 10.0));
    }

    #[test]
    fn frozen_ideal_gain_settles_at_disturbance_ratio() {
        let sc = scalar_scenario(
            AdaptLaw::frozen(1),
            Disturbance::constant(0.5, &[1.0]).unwrap(),
            1.0,
            -2.0,
            SimConfig::new(1e-2, 50.0),
        );
        let traj = integrate(&sc).unwrap();
        let est = traj.tail_sup_state_norm(0.2);
        assert!((est - 0.5).abs() <= 0.02 * 0.5, "{est}");
    }

    #[test]
    fn tail_sup_examples() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        assert_eq!(synthetic(t.clone(), vec![0.7; t.len()]).tail_sup(0.2), 0.7);

        let q: Vec<f64> = t.iter().map(|s| (-s).exp() + 0.3).collect();
        let est = synthetic(t.clone(), q).tail_sup(0.2);
        assert!((est - (0.3 + (-80.0f64).exp())).abs() < 1e-15);

        let q: Vec<f64> = t.iter().map(|s| s * s).collect();
        assert_eq!(synthetic(t.clone(), q).tail_sup(0.2), 1e4);
    }

    #[test]
    fn tail_sup_insensitive_to_record_stride() {
        let law = AdaptLaw::sigma(GainMatrix::identity(1), 4.0, Feedback::linear(2.0, v(&[0.0])));
        let dist = Disturbance::sinusoid(0.5, &[1.0], 1.3, 0.0).unwrap();
        let fine = integrate(&scalar_scenario(law.clone(), dist.clone(), 1.0, 0.0, SimConfig::new(1e-3, 30.0).with_stride(1))).unwrap();
        let coarse = integrate(&scalar_scenario(law, dist, 1.0, 0.0, SimConfig::new(1e-3, 30.0).with_stride(20))).unwrap();
        let max_rate = fine
            .goal
            .windows(2)
            .map(|w| ((w[1] - w[0]) / 1e-3).abs())
            .fold(0.0, f64::max);
        let gap = fine.tail_sup(0.2) - coarse.tail_sup(0.2);
        assert!(gap >= 0.0 && gap <= 20.0 * 1e-3 * max_rate, "{gap}");
    }

    #[test]
    fn lyapunov_decay_examples() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let (alpha, beta) = (0.8, 0.4);
        let mut eq = synthetic(t.clone(), vec![0.1; t.len()]);
        eq.lyapunov = Some(vec![beta / alpha; t.len()]);
        let c = check_lyapunov_decay(&eq, alpha, beta).unwrap();
        assert!(c.passed && c.worst_margin.abs() < 1e-15);

        let mut decay = synthetic(t.clone(), vec![0.1; t.len()]);
        decay.lyapunov = Some(t.iter().map(|s| 3.0 * (-alpha * s).exp()).collect());
        let c = check_lyapunov_decay(&decay, alpha, 0.0).unwrap();
        assert!(c.passed && c.worst_margin.abs() < 1e-15);

        let mut grow = synthetic(t.clone(), vec![0.1; t.len()]);
        grow.lyapunov = Some(t.iter().map(|s| 1.0 + s).collect());
        assert!(!check_lyapunov_decay(&grow, alpha, beta).unwrap().passed);
        assert!(check_lyapunov_decay(&synthetic(t, vec![0.1; 201]), alpha, beta).is_err());
    }

    #[test]
    fn boundedness_examples() {
        let sc = scalar_scenario(
            AdaptLaw::frozen(1),
            Disturbance::Zero,
            0.0,
            -2.0,
            SimConfig::new(1e-2, 10.0),
        );
        assert!(boundedness_check(&integrate(&sc).unwrap(), 2.0 + 1e-12));

        let diverging = ScenarioSpec {
            plant: Arc::new(ScalarAffinePlant::new(1.0, 0.0, ScalarForm::StateFeedback)),
            ..scalar_scenario(AdaptLaw::basic(GainMatrix::identity(1)), Disturbance::Zero, 1.0, 0.0, SimConfig::new(1e-2, 30.0))
        };
        let traj = integrate(&diverging).unwrap();
        assert!(!boundedness_check(&traj, 1e6));

        let blowup = ScenarioSpec {
            sim: SimConfig::new(1e-1, 1000.0),
            ..diverging
        };
        match integrate(&blowup) {
            Err(Error::NonFinite { time, .. }) => assert!(time > 300.0 && time < 1000.0, "{time}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn sigma_with_zero_feedback_reproduces_basic_exactly() {
        let dist = Disturbance::Zero;
        let sim = SimConfig::new(1e-3, 5.0);
        let basic = integrate(&scalar_scenario(AdaptLaw::basic(GainMatrix::identity(1)), dist.clone(), 1.0, 0.0, sim.clone())).unwrap();
        let sigma = integrate(&scalar_scenario(
            AdaptLaw::sigma(GainMatrix::identity(1), 1.0, Feedback::Zero),
            dist,
            1.0,
            0.0,
            sim,
        ))
        .unwrap();
        assert_eq!(basic, sigma);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let law = AdaptLaw::sigma(GainMatrix::identity(1), 3.0, Feedback::linear(2.0, v(&[0.0])));
        let dist = Disturbance::sinusoid(0.5, &[1.0], 1.0, 0.0).unwrap();
        let end = |h: f64| {
            let traj = integrate(&scalar_scenario(law.clone(), dist.clone(), 1.0, 0.0, SimConfig::new(h, 4.0))).unwrap();
            let mut s = traj.states.last().unwrap().clone().data.as_vec().clone();
            s.extend(traj.params.last().unwrap().iter());
            DVector::from_vec(s)
        };
        let (a, b, c) = (end(0.1), end(0.05), end(0.025));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn csv_export_layout() {
        let sc = scalar_scenario(AdaptLaw::frozen(1), Disturbance::Zero, 1.0, -2.0, SimConfig::new(0.5, 1.0).with_stride(1));
        let mut traj = integrate(&sc).unwrap();
        traj.lyapunov = Some(vec![1.0; traj.len()]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,theta1,Q,w,V");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,-2.0000000000000000e0,5.0000000000000000e-1,-1.0000000000000000e0,1.0000000000000000e0");
        for line in &lines[1..] {
            let parsed: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(parsed.len(), 6);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(-1e-3, 1.0).validate().is_err());
        assert!(SimConfig::new(2.0, 1.0).validate().is_err());
        assert!(SimConfig::new(0.3, 1.0).validate().is_err());
        assert!(SimConfig::new(1e-3, 1.0).validate().is_ok());
        let relay = AdaptLaw::sigma(
            GainMatrix::identity(1),
            1.0,
            Feedback::Relay { amplitude: 1.0, prior: v(&[0.0]), radius: 0.1 },
        );
        let sc = scalar_scenario(relay, Disturbance::Zero, 1.0, 0.0, SimConfig::new(1e-2, 1.0));
        assert!(matches!(sc.validate(), Err(Error::InvalidParameter { name: "step", .. })));
    }
}
