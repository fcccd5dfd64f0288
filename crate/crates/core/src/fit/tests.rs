use super::*;
use crate::model::{CavityParams, MechanicalParams, PumpConfig, PumpDrive, PumpScheme};
use crate::presets::{BLUE_MAPS, RED_MAPS};
use crate::sweep::{centered_grid, default_line_grid, simulate_line_cut, SweepTrace};
use approx::assert_relative_eq;

fn line_cut(scheme: PumpScheme, n_cav: f64, cav: &CavityParams, mech: &MechanicalParams) -> SweepTrace {
    let pump = PumpConfig::on_sideband(scheme, mech.omega_m, PumpDrive::PhotonNumber(n_cav)).unwrap();
    simulate_line_cut(&pump, cav, mech, &default_line_grid(&pump, cav, mech)).unwrap()
}

/// Every parameter fixed at its true value except the ones listed as free.
fn bindings(
    cav: &CavityParams,
    mech: &MechanicalParams,
    n_cav: f64,
    free: &[(ParamName, f64, f64, f64)],
) -> Vec<ParamBinding> {
    let truth = [
        cav.omega_c,
        cav.kappa,
        cav.kappa_ext,
        mech.omega_m,
        mech.gamma_m,
        mech.g0,
        n_cav,
    ];
    ParamName::ALL
        .iter()
        .map(|&p| match free.iter().find(|f| f.0 == p) {
            Some(&(_, init, lo, hi)) => ParamBinding::free(p, init, lo, hi),
            None => ParamBinding::fixed(p, truth[p.index()]),
        })
        .collect()
}

fn red_problem(init_scale: f64) -> (FitProblem, CavityParams) {
    let c = RED_MAPS[0];
    let (cav, mech) = (c.cavity(), c.mechanics());
    let trace = line_cut(PumpScheme::Red, c.n_cav, &cav, &mech);
    let free = [
        (
            ParamName::Kappa,
            cav.kappa * init_scale,
            cav.kappa / 5.0,
            cav.kappa * 5.0,
        ),
        (
            ParamName::OmegaC,
            cav.omega_c + (init_scale - 1.0) * cav.kappa,
            cav.omega_c - 5.0 * cav.kappa,
            cav.omega_c + 5.0 * cav.kappa,
        ),
    ];
    let ds = FitDataset::from_traces("red", PumpScheme::Red, &[trace], bindings(&cav, &mech, c.n_cav, &free));
    (
        FitProblem {
            datasets: vec![ds],
            shared: vec![],
        },
        cav,
    )
}

#[test]
fn residuals_vanish_at_generating_parameters() {
    let (problem, cav) = red_problem(1.0);
    let order = problem.parameter_order().unwrap();
    assert_eq!(order[0].0, ParamName::OmegaC);
    assert_eq!(order[1].0, ParamName::Kappa);
    let r = problem.residuals(&[cav.omega_c, cav.kappa]).unwrap();
    assert_eq!(r.len(), problem.total_points());
    // Δ and Ω are rebuilt from absolute frequencies near 3.8e10 rad/s
    let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // ulp(ωc) ≈ 8e-6 rad/s against a lineshape slope of ~1e-3 per rad/s
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn residuals_reject_wrong_length() {
    let (problem, cav) = red_problem(1.0);
    assert!(problem.residuals(&[cav.kappa]).is_err());
}

#[test]
fn wrong_kappa_residuals_peak_near_cavity() {
    let cav = CavityParams::from_hz(6e9, 100e3, 44e3).unwrap();
    let mech = MechanicalParams::from_hz(3.8e6, 15.3, 0.56).unwrap();
    let pump = PumpConfig::new(PumpScheme::Red, -mech.omega_m, PumpDrive::PhotonNumber(0.0)).unwrap();
    let grid = centered_grid(mech.omega_m, 5.0 * cav.kappa, 501);
    let trace = simulate_line_cut(&pump, &cav, &mech, &grid).unwrap();
    let free = [(ParamName::Kappa, cav.kappa, cav.kappa / 10.0, cav.kappa * 10.0)];
    let problem = FitProblem {
        datasets: vec![FitDataset::from_traces(
            "bare",
            PumpScheme::Red,
            std::slice::from_ref(&trace),
            bindings(&cav, &mech, 0.0, &free),
        )],
        shared: vec![],
    };
    let r = problem.residuals(&[2.0 * cav.kappa]).unwrap();
    assert!(r.iter().any(|v| *v != 0.0));
    let worst = (0..r.len()).max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())).unwrap();
    let probe = trace.probe_omegas()[worst];
    assert!((probe - cav.omega_c).abs() <= grid[1] - grid[0]);
}

#[test]
fn unstable_trial_point_gets_finite_penalty() {
    let c = BLUE_MAPS[0];
    let (cav, mech) = (c.cavity(), c.mechanics());
    let trace = line_cut(PumpScheme::Blue, c.n_cav, &cav, &mech);
    let free = [(ParamName::NCav, c.n_cav, 1e3, 1e7)];
    let problem = FitProblem {
        datasets: vec![FitDataset::from_traces(
            "blue",
            PumpScheme::Blue,
            &[trace],
            bindings(&cav, &mech, c.n_cav, &free),
        )],
        shared: vec![],
    };
    // C ≈ 3 at n_cav = 3e6
    let r = problem.residuals(&[3e6]).unwrap();
    assert!(r.iter().all(|v| v.is_finite()));
    assert!(r.iter().all(|v| *v == PENALTY_RESIDUAL));
}

#[test]
fn noiseless_red_round_trip() {
    let (problem, cav) = red_problem(1.2);
    let result = fit(&problem).unwrap();
    assert!(result.converged);
    assert!(result.iterations <= 200);
    assert_relative_eq!(
        result.dataset_value(0, ParamName::Kappa),
        cav.kappa,
        max_relative = 1e-6
    );
    assert_relative_eq!(
        result.dataset_value(0, ParamName::OmegaC),
        cav.omega_c,
        max_relative = 1e-6
    );
    assert!(result.cost_history.windows(2).all(|w| w[1] <= w[0]));
    for p in &result.values {
        assert!(p.uncertainty.is_finite());
    }
}

#[test]
fn exact_initialisation_is_a_fixed_point() {
    let (problem, cav) = red_problem(1.0);
    let result = fit(&problem).unwrap();
    assert_relative_eq!(
        result.dataset_value(0, ParamName::Kappa),
        cav.kappa,
        max_relative = 1e-8
    );
    assert_relative_eq!(
        result.dataset_value(0, ParamName::OmegaC),
        cav.omega_c,
        max_relative = 1e-8
    );
    assert!(result.rms_residual < 1e-9);
}

#[test]
fn insufficient_data() {
    let (mut problem, _) = red_problem(1.0);
    problem.datasets[0].points.truncate(1);
    assert!(matches!(
        fit(&problem),
        Err(FitError::InsufficientData {
            points: 1,
            parameters: 2
        })
    ));
}

#[test]
fn iteration_cap_reports_best_so_far() {
    let (problem, _) = red_problem(1.2);
    let settings = lm::LmSettings {
        max_iterations: 1,
        ..Default::default()
    };
    match fit_with(&problem, &settings) {
        Err(FitError::NotConverged(best)) => {
            assert!(!best.converged);
            assert_eq!(best.iterations, 1);
            assert!(best.cost_history.last() < best.cost_history.first());
        }
        other => panic!("expected NotConverged, got {other:?}"),
    }
}

#[test]
fn binding_validation() {
    let (base, cav) = red_problem(1.0);

    let mut p = base.clone();
    p.datasets[0].bindings.pop();
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base.clone();
    p.datasets[0].bindings.push(ParamBinding::fixed(ParamName::G0, 1.0));
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base.clone();
    p.datasets[0].bindings[1] = ParamBinding::free(ParamName::Kappa, cav.kappa, 0.0, 2.0 * cav.kappa);
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base.clone();
    p.datasets[0].bindings[1] = ParamBinding::free(ParamName::Kappa, 3.0 * cav.kappa, cav.kappa / 2.0, 2.0 * cav.kappa);
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base.clone();
    p.datasets[0].bindings[4] = ParamBinding::shared(ParamName::GammaM, "missing");
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base.clone();
    p.datasets[0].bindings[4] = ParamBinding::shared(ParamName::GammaM, "g");
    p.shared.push(SharedBinding {
        id: "g".into(),
        name: ParamName::OmegaM,
        bounds: (1.0, 1e9),
        init: 2.4e7,
    });
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));

    let mut p = base;
    p.shared.push(SharedBinding {
        id: "unused".into(),
        name: ParamName::GammaM,
        bounds: (1.0, 1e3),
        init: 90.0,
    });
    assert!(matches!(fit(&p), Err(FitError::InvalidProblem(_))));
}

#[test]
fn power_calibrated_dataset_needs_no_photon_binding() {
    let c = RED_MAPS[0];
    let (cav, mech) = (c.cavity(), c.mechanics());
    let delta = -mech.omega_m;
    let p_in = crate::model::input_power_for_photons(c.n_cav, delta, &cav);
    let pump = PumpConfig::new(PumpScheme::Red, delta, PumpDrive::InputPower(p_in)).unwrap();
    let trace = simulate_line_cut(&pump, &cav, &mech, &default_line_grid(&pump, &cav, &mech)).unwrap();
    let free = [(ParamName::Kappa, cav.kappa * 1.1, cav.kappa / 5.0, cav.kappa * 5.0)];
    let mut b = bindings(&cav, &mech, c.n_cav, &free);
    b.retain(|b| b.name != ParamName::NCav);
    let mut ds = FitDataset::from_traces("p", PumpScheme::Red, &[trace], b);
    ds.input_power = Some(p_in);
    let problem = FitProblem {
        datasets: vec![ds.clone()],
        shared: vec![],
    };
    let result = fit(&problem).unwrap();
    assert_relative_eq!(
        result.dataset_value(0, ParamName::Kappa),
        cav.kappa,
        max_relative = 1e-6
    );

    ds.bindings.push(ParamBinding::free(ParamName::NCav, 1e6, 1e5, 1e7));
    let problem = FitProblem {
        datasets: vec![ds],
        shared: vec![],
    };
    assert!(matches!(fit(&problem), Err(FitError::InvalidProblem(_))));
}
