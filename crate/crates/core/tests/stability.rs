use bifurc_core::alpha::AlphaVector;
use bifurc_core::coupling::{QuarticMoments, QuarticTensor, C64};
use bifurc_core::galerkin::{coeff_norm, GalerkinSettings, GalerkinSpace};
use bifurc_core::reduction::{solve_reduced, BranchSample, ReductionOptions};
use bifurc_core::spectral::{group_by_index, BoxDomain};
use bifurc_core::stability::{
    instability_verdict, linear_spectrum_a, monodromy, monodromy_of_profile, params_from_branch, simulate_cgl,
    standing_profile, CGLParams, MonodromyOptions, SimulationOptions, Verdict, VerdictOptions,
};

const THETA: f64 = 0.3;

fn interval(index: usize) -> (GalerkinSpace, QuarticMoments) {
    let line = BoxDomain::pi_cube(1);
    let g = group_by_index(&line, index).unwrap();
    let space = GalerkinSpace::new(&line, &g, 2.0, GalerkinSettings { cutoff: 16, collocation: None }).unwrap();
    let model = QuarticMoments { tensor: QuarticTensor::new(&g, &line).unwrap() };
    (space, model)
}

fn sample(space: &GalerkinSpace, eps: f64) -> BranchSample {
    let lam = C64::new(space.group_eigenvalue(), 0.0);
    let state = solve_reduced(eps, &AlphaVector::zeros(1, 0), lam, space, C64::new(1.0, 0.0), 2.0, &ReductionOptions::default()).unwrap();
    BranchSample { pde_residual: 0.0, y_norm: coeff_norm(&state.y), state }
}

fn params(s: &BranchSample) -> CGLParams {
    params_from_branch(s.state.lambda, s.state.eta, THETA, 2.0).unwrap()
}

#[test]
fn linear_spectrum_at_zero_amplitude() {
    let (space, _) = interval(2);
    let p = params_from_branch(C64::new(4.0, 0.0), C64::new(1.0, 0.0), 0.0, 2.0).unwrap();
    let spec = linear_spectrum_a(&p, &space);
    assert_eq!(spec.max_real_part, 3.0);
    let re: Vec<f64> = spec.eigenvalues.iter().take(3).map(|z| z.re).collect();
    assert_eq!(re, vec![3.0, 0.0, -5.0]);
    let p = params_from_branch(C64::new(4.0, 0.0), C64::new(1.0, 0.0), THETA, 2.0).unwrap();
    let tilted = linear_spectrum_a(&p, &space);
    assert!((tilted.max_real_part - 3.0 * THETA.cos()).abs() < 1e-14);
}

#[test]
fn zero_state_monodromy_is_the_linear_flow() {
    let (space, _) = interval(2);
    let p = params_from_branch(C64::new(4.0, 0.0), C64::new(1.0, 0.0), THETA, 2.0).unwrap();
    let zero = vec![C64::new(0.0, 0.0); space.num_modes()];
    let r = monodromy_of_profile(&zero, &p, &space, &MonodromyOptions { steps: 64, step_guard: None }).unwrap();
    let t = p.period().unwrap();
    let expected = (t * THETA.cos() * 3.0).exp();
    assert!((r.max_modulus - expected).abs() < 1e-10 * expected);
    assert!(r.perturbation_norm < 1e-10 * expected, "{}", r.perturbation_norm);
    assert_eq!(r.matrix_dim, 2 * space.num_modes());
}

#[test]
fn floquet_multiplier_and_gauge_direction() {
    let (space, _) = interval(2);
    let eps = 0.05;
    let s = sample(&space, eps);
    let p = params(&s);
    let r = monodromy(&s, &p, &space, &MonodromyOptions::default()).unwrap();
    let t = r.period;
    let expected = (t * THETA.cos() * 3.0).exp();
    assert!(r.max_modulus > 1.0);
    assert!((r.max_modulus / expected - 1.0).abs() < 0.1, "{} vs {expected}", r.max_modulus);
    assert!(r.step_change.unwrap() < 1e-6);
    // conjugate pairs
    for m in r.multipliers.iter().filter(|m| m.im.abs() > 1e-8 * m.norm()) {
        assert!(r.multipliers.iter().any(|q| (q - m.conj()).norm() < 1e-6 * m.norm().max(1e-300)));
    }
    let gauge = r.multipliers.iter().map(|m| (m - 1.0).norm()).fold(f64::INFINITY, f64::min);
    assert!(gauge < 10.0 * eps * eps, "{gauge}");
}

#[test]
fn perturbation_norm_scales_like_eps_squared() {
    let (space, _) = interval(2);
    let eps = [0.02, 0.04, 0.08];
    let k: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let s = sample(&space, e);
            monodromy(&s, &params(&s), &space, &MonodromyOptions { steps: 1024, step_guard: None })
                .unwrap()
                .perturbation_norm
        })
        .collect();
    let slope = (k[2] / k[0]).ln() / (eps[2] / eps[0]).ln();
    assert!(slope >= 1.8, "{slope}");
}

#[test]
fn linear_simulation_matches_exponentials() {
    let (space, _) = interval(2);
    let p = params_from_branch(C64::new(4.0, 0.0), C64::new(1.0, 0.0), THETA, 2.0).unwrap();
    let t = p.period().unwrap();
    let v0: Vec<C64> = (0..space.num_modes()).map(|j| C64::new(1.0 / (j + 1) as f64, 0.5)).collect();
    let opts = SimulationOptions { dt: t / 256.0, nonlinear_coefficient: 0.0, ceiling: f64::INFINITY, ..Default::default() };
    let traj = simulate_cgl(&v0, &p, &space, t, None, &opts).unwrap();
    assert!(!traj.blew_up);
    for (j, (&l, v)) in space.eigenvalues().iter().zip(&traj.final_state).enumerate() {
        let exact = v0[j] * (p.linear_exponent(l) * t).exp();
        assert!((v - exact).norm() < 1e-8 * exact.norm().max(1.0), "{j}: {v} vs {exact}");
    }
}

#[test]
fn standing_wave_rotates_rigidly() {
    let (space, _) = interval(2);
    let s = sample(&space, 0.05);
    let p = params(&s);
    let phi = standing_profile(&s, &p, &space);
    let t = 0.5;
    let traj = simulate_cgl(&phi, &p, &space, t, Some(&phi), &SimulationOptions { dt: 1e-3, ..Default::default() }).unwrap();
    let rotated: Vec<C64> = phi.iter().map(|z| z * C64::from_polar(1.0, p.omega * t)).collect();
    let err = coeff_norm(&traj.final_state.iter().zip(&rotated).map(|(a, b)| a - b).collect::<Vec<_>>());
    assert!(err < 1e-8 * coeff_norm(&phi), "{err}");
    assert!(traj.points.iter().all(|q| q.orbit_distance.unwrap() < 1e-8));
    let zero = vec![C64::new(0.0, 0.0); space.num_modes()];
    let z = simulate_cgl(&zero, &p, &space, t, None, &Default::default()).unwrap();
    assert!(z.final_state.iter().all(|c| c.norm() == 0.0));
}

#[test]
fn second_eigenvalue_is_unstable() {
    let (space, _) = interval(2);
    let s = sample(&space, 0.05);
    let p = params(&s);
    let r = instability_verdict(&s, &p, &space, &VerdictOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Unstable, "{r:?}");
    assert!(r.signals_agree);
    assert!(r.rate_rel_error.unwrap() < 0.25, "{r:?}");
}

#[test]
fn first_eigenvalue_is_outside_the_theorem() {
    let (space, _) = interval(1);
    let s = sample(&space, 0.05);
    let r = instability_verdict(&s, &params(&s), &space, &VerdictOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::OutsideTheorem);
    assert_eq!(r.label, "outside Thm 1.3");
}
