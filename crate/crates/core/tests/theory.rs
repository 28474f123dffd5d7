//! Closed-loop properties checked end to end on the scalar example and the
//! two-state output-feedback plant.

use nalgebra::{dmatrix, dvector, DVector};
use sgrobust::bounds::{evaluate, min_gain_k0, optimum_estimate, BoundContext, ClassData, Status};
use sgrobust::model::{check_convexity, check_speed_gradient, Disturbance, QuadraticGoal};
use sgrobust::plants::{class_constants, make_scalar_example, LinearOutputPlant, OutputDesign};
use sgrobust::sim::{integrate, SimConfig};
use sgrobust::speedgrad::{AdaptLaw, Feedback, GainMatrix, PseudoGradient};

const DELTA_F: f64 = 0.5;

fn scalar_context(epsilon: f64) -> (sgrobust::plants::ScalarExample, BoundContext) {
    let ex = make_scalar_example(1.0, 1.0, DELTA_F).unwrap();
    let class = class_constants(&ex.design, 1).unwrap();
    let ctx = BoundContext::new(ClassData::from(&class), ex.theta_star().clone(), epsilon);
    (ex, ctx)
}

fn sigma_law(kappa: f64) -> AdaptLaw {
    AdaptLaw::sigma(GainMatrix::identity(1), kappa, Feedback::linear(2.0, DVector::zeros(1)))
}

#[test]
fn epsilon_optimality_holds_for_several_tolerances() {
    for epsilon in [0.1, 0.25, 0.5, 1.0] {
        let (ex, ctx) = scalar_context(epsilon);
        // ρ′ = α‖θ̄ - θ*‖² / 2 for the linear feedback, with θ* = -2.
        let k0 = min_gain_k0(4.0, epsilon, ctx.class.alpha0, ctx.class.sigma).unwrap();
        let sc = ex.scenario(sigma_law(1.5 * k0), SimConfig::new(1e-3, 40.0).with_stride(10));
        let r = evaluate(&sc, &ctx).unwrap().report;
        assert_eq!(r.condition("epsilon_optimality").unwrap().status, Status::Pass, "ε = {epsilon}");
        let tail = r.measured.unwrap().tail_sup_q;
        assert!(tail <= r.delta_star + epsilon, "ε = {epsilon}: {tail}");
        assert!(tail <= r.corollary_bound.unwrap() * 1.02, "ε = {epsilon}: {tail}");
    }
}

#[test]
fn frozen_tail_stays_below_the_optimum_estimate_for_every_disturbance_kind() {
    let (ex, ctx) = scalar_context(0.5);
    let ds = optimum_estimate(ctx.class.alpha0, ctx.class.alpha1, ctx.class.sigma, DELTA_F).unwrap();
    let kinds = [
        Disturbance::constant(DELTA_F, &[1.0]).unwrap(),
        Disturbance::sinusoid(DELTA_F, &[1.0], 3.0, 0.2).unwrap(),
        Disturbance::uniform_random(DELTA_F, 11, 0.05).unwrap(),
        Disturbance::adversarial_sign(DELTA_F).unwrap(),
    ];
    for d in kinds {
        let mut sc = ex.frozen_scenario(SimConfig::new(1e-3, 30.0));
        sc.disturbance = d.clone();
        let tail = integrate(&sc).unwrap().tail_sup(0.2);
        assert!(tail <= ds * 1.02, "{d:?}: {tail} > {ds}");
    }
}

#[test]
fn adversarial_sign_attains_the_estimate() {
    let (ex, _) = scalar_context(0.5);
    let mut sc = ex.frozen_scenario(SimConfig::new(1e-3, 30.0));
    sc.disturbance = Disturbance::adversarial_sign(DELTA_F).unwrap();
    let tail = integrate(&sc).unwrap().tail_sup(0.2);
    assert!((tail - 0.125).abs() < 0.125 * 0.02, "{tail}");
}

#[test]
fn combined_law_keeps_the_sigma_law_guarantees() {
    let (ex, ctx) = scalar_context(0.5);
    let psi = PseudoGradient::speed_gradient(ex.theta_star().clone(), 1.0, 0.5);
    let law = AdaptLaw::combined(GainMatrix::identity(1), 24.0, Feedback::linear(2.0, DVector::zeros(1)), psi);
    let sc = ex.scenario(law, SimConfig::new(1e-3, 40.0).with_stride(10));
    let r = evaluate(&sc, &ctx).unwrap().report;
    for name in ["lyapunov_decay", "bounded", "corollary_tail", "epsilon_optimality"] {
        let c = r.condition(name).unwrap_or_else(|| panic!("missing {name}"));
        assert_eq!(c.status, Status::Pass, "{name}: {c:?}");
    }
}

#[test]
fn relay_and_ball_deadzone_feedback_stay_bounded() {
    let (ex, ctx) = scalar_context(0.5);
    let prior = dvector![-1.5];
    for (fb, radius) in [
        (Feedback::Relay { amplitude: 10.0, prior: prior.clone(), radius: 0.1 }, 8.0),
        (Feedback::BallDeadzone { alpha: 2.0, prior: prior.clone(), radius: 0.5 }, 4.0),
    ] {
        let sc = ex.scenario(
            AdaptLaw::sigma(GainMatrix::identity(1), 60.0, fb.clone()),
            SimConfig::new(1e-3, 40.0).with_stride(10),
        );
        let r = evaluate(&sc, &ctx.clone().with_nf_radius(radius)).unwrap().report;
        assert!(r.blowup_time.is_none());
        assert_eq!(r.condition("bounded").unwrap().status, Status::Pass, "{fb:?}");
        assert!(r.measured.unwrap().tail_sup_q <= r.delta_star + 0.5, "{fb:?}");
    }
}

#[test]
fn gradient_and_convexity_checks_pass_on_the_output_plant() {
    let plant = LinearOutputPlant::new(
        dmatrix![0.0, 1.0; -2.0, -2.0],
        dvector![0.0, 1.0],
        nalgebra::DMatrix::identity(2, 2),
    )
    .unwrap();
    let design = OutputDesign::new(
        plant,
        dvector![1.0, 1.0],
        dvector![-5.0, -5.0],
        DVector::zeros(2),
        QuadraticGoal::identity(2),
    )
    .unwrap();
    let law = design.adaptive_output_law(GainMatrix::identity(2), 1.5, 1.0).unwrap();
    let sc = design.scenario(
        &law,
        Disturbance::Zero,
        dvector![1.0, 0.0],
        DVector::zeros(2),
        SimConfig::new(1e-3, 1.0),
    );
    let sg = check_speed_gradient(sc.plant.as_ref(), sc.goal.as_ref(), 100, 3.0, 6.0, 1e-5, 5).unwrap();
    assert!(sg.passed, "{sg:?}");
    let cv = check_convexity(sc.plant.as_ref(), sc.goal.as_ref(), 100, 3.0, 6.0, 6).unwrap();
    assert!(cv.passed, "{cv:?}");
}
