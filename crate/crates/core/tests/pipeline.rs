//! End-to-end soundness of the bound pipeline: the certified rate, input
//! bound, and dwell constants assemble into a regret bound that dominates
//! the empirical regret on randomized admissible schedules, and the
//! non-summable baseline is correctly rejected.

use nalgebra::DVector;

use reglab_core::bounds::{
    assemble_regret_bound, sigma_sum, sum_product_cap, window_contraction, BoundInputs,
};
use reglab_core::controllers::ControllerRegistry;
use reglab_core::metrics::{certify_rate, dynamic_regret, fit_input_bound};
use reglab_core::rollout::{rollout, PriorSpec};
use reglab_core::schedule::{
    check_dwell, generate_admissible_schedule, lipschitz_constant, path_length, CostParams,
    CostSegment, DwellSpec, NormPower,
};
use reglab_core::{SteadyStatePair, SystemModel};

fn p1_cost() -> CostParams {
    CostParams {
        p: NormPower::One,
        q: 1.0,
        r: 1.0,
    }
}

fn pool() -> Vec<SteadyStatePair> {
    vec![
        SteadyStatePair::scalar(0.0, 0.0),
        SteadyStatePair::scalar(0.0, 1.5),
        SteadyStatePair::scalar(0.0, -1.0),
    ]
}

#[test]
fn improved_controller_bound_dominates_regret_on_random_schedules() {
    let sys = SystemModel::integrator(1);
    let reg = ControllerRegistry::with_builtins();
    let spec = DwellSpec::new(2, 5.0);
    let x0 = DVector::from_element(1, 1.0);

    // certificate under a constant cost
    let seg0 = CostSegment::new(
        0,
        SteadyStatePair::scalar(0.0, 0.0),
        NormPower::One,
        1.0,
        1.0,
    );
    let mut mk = || {
        reg.build("example1-improved", &serde_json::Value::Null, &sys)
            .unwrap()
    };
    let grid: Vec<DVector<f64>> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&v| DVector::from_element(1, v))
        .collect();
    let cert = certify_rate(
        &sys,
        &mut mk,
        &seg0,
        &grid,
        400,
        &PriorSpec::ControllerDefault,
    )
    .unwrap();
    let m = sigma_sum(&cert, 1e-9).unwrap();
    let d = window_contraction(cert.k, &cert, spec.n0, spec.phi, 200).unwrap();
    let p = sum_product_cap(cert.k, d.delta, spec.n0).unwrap();

    for seed in 0..25u64 {
        let generated =
            generate_admissible_schedule(seed, &spec, 800, &pool(), &p1_cost()).unwrap();
        assert!(generated.admissible);
        assert!(check_dwell(&generated.schedule, &spec).ok);
        let schedule = generated.schedule;

        let mut ctrl = reg
            .build("example1-improved", &serde_json::Value::Null, &sys)
            .unwrap();
        let traj = rollout(
            &sys,
            ctrl.as_mut(),
            &schedule,
            &x0,
            800,
            &PriorSpec::ControllerDefault,
        )
        .unwrap();
        let regret = dynamic_regret(&traj, &schedule, 800).unwrap();
        let (k_u, k_zeta) = fit_input_bound(&traj, &schedule).unwrap();

        let pl = path_length(&schedule, 800).unwrap();
        let theta0 = &schedule.segments()[0].steady.theta;
        let l = lipschitz_constant(schedule.segment_at(0), f64::INFINITY).unwrap();
        let report = assemble_regret_bound(&BoundInputs {
            lipschitz: l,
            k: cert.k,
            m_sigma: m,
            n0: spec.n0,
            delta: d.delta,
            p_cap: p,
            k_u,
            k_zeta,
            x0_dist: (&x0 - theta0).norm(),
            x1_dist: (&traj.x[1] - theta0).norm(),
            theta_sum: pl.theta_sum,
            eta_sum: pl.eta_sum,
        });
        assert!(report.total.is_finite());
        assert!(
            regret <= report.total + 1e-9,
            "seed {seed}: regret {regret} exceeds bound {}",
            report.total
        );
    }
}

#[test]
fn baseline_controller_is_rejected_by_sigma_sum() {
    let sys = SystemModel::integrator(1);
    let reg = ControllerRegistry::with_builtins();
    let seg0 = CostSegment::new(
        0,
        SteadyStatePair::scalar(0.0, 0.0),
        NormPower::One,
        1.0,
        1.0,
    );
    let mut mk = || {
        reg.build("example1-baseline", &serde_json::Value::Null, &sys)
            .unwrap()
    };
    let grid = vec![DVector::from_element(1, 1.0)];
    let cert = certify_rate(
        &sys,
        &mut mk,
        &seg0,
        &grid,
        200,
        &PriorSpec::ControllerDefault,
    )
    .unwrap();
    assert!(matches!(
        sigma_sum(&cert, 1e-9),
        Err(reglab_core::Error::NotSummable)
    ));
}

#[test]
fn linear_feedback_bound_dominates_regret_under_switching() {
    let sys = SystemModel::scalar_linear(0.5, 1.0);
    let reg = ControllerRegistry::with_builtins();
    let cfg = serde_json::json!({"k": [[-0.3]]});
    let spec = DwellSpec::new(2, 5.0);
    let x0 = DVector::from_element(1, 2.0);

    // steady pairs for the linear plant: eta = 0.5 * theta
    let pool = vec![
        SteadyStatePair::scalar(0.0, 0.0),
        SteadyStatePair::scalar(1.0, 2.0),
        SteadyStatePair::scalar(-0.5, -1.0),
    ];

    let seg0 = CostSegment::new(0, pool[0].clone(), NormPower::One, 1.0, 1.0);
    let mut mk = || reg.build("linear-feedback", &cfg, &sys).unwrap();
    let grid: Vec<DVector<f64>> = [1.0, 2.0]
        .iter()
        .map(|&v| DVector::from_element(1, v))
        .collect();
    let cert = certify_rate(
        &sys,
        &mut mk,
        &seg0,
        &grid,
        300,
        &PriorSpec::ControllerDefault,
    )
    .unwrap();
    let m = sigma_sum(&cert, 1e-9).unwrap();
    let d = window_contraction(cert.k, &cert, spec.n0, spec.phi, 200).unwrap();
    let p = sum_product_cap(cert.k, d.delta, spec.n0).unwrap();

    for seed in 100..115u64 {
        let generated = generate_admissible_schedule(seed, &spec, 600, &pool, &p1_cost()).unwrap();
        assert!(generated.admissible);
        let schedule = generated.schedule;
        let mut ctrl = reg.build("linear-feedback", &cfg, &sys).unwrap();
        let traj = rollout(
            &sys,
            ctrl.as_mut(),
            &schedule,
            &x0,
            600,
            &PriorSpec::ControllerDefault,
        )
        .unwrap();
        let regret = dynamic_regret(&traj, &schedule, 600).unwrap();
        let (k_u, k_zeta) = fit_input_bound(&traj, &schedule).unwrap();
        let pl = path_length(&schedule, 600).unwrap();
        let theta0 = &schedule.segments()[0].steady.theta;
        let l = lipschitz_constant(schedule.segment_at(0), f64::INFINITY).unwrap();
        let report = assemble_regret_bound(&BoundInputs {
            lipschitz: l,
            k: cert.k,
            m_sigma: m,
            n0: spec.n0,
            delta: d.delta,
            p_cap: p,
            k_u,
            k_zeta,
            x0_dist: (&x0 - theta0).norm(),
            x1_dist: (&traj.x[1] - theta0).norm(),
            theta_sum: pl.theta_sum,
            eta_sum: pl.eta_sum,
        });
        assert!(
            regret <= report.total + 1e-9,
            "seed {seed}: regret {regret} exceeds bound {}",
            report.total
        );
    }
}
