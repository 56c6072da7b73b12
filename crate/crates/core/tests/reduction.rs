use std::f64::consts::PI;

use bifurc_core::alpha::{eval_p, AlphaVector};
use bifurc_core::coupling::{QuarticMoments, QuarticTensor, C64};
use bifurc_core::galerkin::{coeff_norm, GalerkinSettings, GalerkinSpace};
use bifurc_core::reduction::{
    leading_order_lambda, pde_residual, solve_reduced, solve_y, trace_branch, verify_branch_limit,
    ReductionOptions,
};
use bifurc_core::spectral::{group_by_index, BoxDomain};

fn setup(dim: usize, index: usize, cutoff: usize) -> (GalerkinSpace, QuarticMoments) {
    let domain = BoxDomain::pi_cube(dim);
    let g = group_by_index(&domain, index).unwrap();
    let space = GalerkinSpace::new(&domain, &g, 2.0, GalerkinSettings { cutoff, collocation: None }).unwrap();
    let model = QuarticMoments { tensor: QuarticTensor::new(&g, &domain).unwrap() };
    (space, model)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

#[test]
fn y_norm_scales_like_eps_cubed() {
    let (space, _) = setup(1, 1, 24);
    let seed = AlphaVector::zeros(1, 0);
    let opts = ReductionOptions::default();
    let eps: Vec<f64> = (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect();
    let norms: Vec<f64> = eps
        .iter()
        .map(|&e| solve_reduced(e, &seed, real(1.0), &space, real(1.0), 2.0, &opts).unwrap())
        .map(|s| coeff_norm(&s.y))
        .collect();
    let s = slope(&eps, &norms);
    assert!(s >= 2.8, "slope {s}");
}

#[test]
fn lambda_slope_converges_monotonically() {
    let (space, _) = setup(1, 1, 24);
    let seed = AlphaVector::zeros(1, 0);
    let target = 3.0 / (2.0 * PI);
    let mut last = f64::INFINITY;
    for eps in [0.05, 0.025, 0.0125] {
        let s = solve_reduced(eps, &seed, real(1.0), &space, real(1.0), 2.0, &Default::default()).unwrap();
        let err = ((s.lambda.re - 1.0) / (eps * eps) - target).abs();
        assert!(err < 0.05 * target);
        assert!(err < last, "{err} !< {last}");
        last = err;
    }
}

#[test]
fn doubling_cutoff_barely_moves_lambda() {
    let seed = AlphaVector::zeros(1, 0);
    let lam = |k| {
        let (space, _) = setup(1, 1, k);
        solve_reduced(0.05, &seed, real(1.0), &space, real(1.0), 2.0, &Default::default()).unwrap().lambda
    };
    let (a, b) = (lam(24), lam(48));
    assert!((a - b).norm() / a.norm() < 1e-8, "{a} vs {b}");
}

#[test]
fn real_data_stays_real() {
    let (space, _) = setup(2, 2, 16);
    let seed = AlphaVector::new(0, vec![real(1.0)]);
    let s = solve_reduced(0.1, &seed, real(5.0), &space, real(1.0), 2.0, &Default::default()).unwrap();
    assert!(s.lambda.im.abs() < 1e-12);
    assert!(s.y.iter().all(|z| z.im.abs() < 1e-12));
    assert!(s.alpha.max_imag() < 1e-12);
}

#[test]
fn pde_residual_is_gauge_invariant() {
    let (space, _) = setup(2, 2, 16);
    let seed = AlphaVector::new(0, vec![C64::new(0.0, 1.0)]);
    let s = solve_reduced(0.1, &seed, real(5.0), &space, real(1.0), 2.0, &Default::default()).unwrap();
    let u = s.field(&space);
    let r0 = pde_residual(&u, s.lambda, s.eta, 2.0, &space);
    assert!(r0 < 1e-9, "{r0}");
    for phase in [0.3, 1.7, -2.5] {
        let z = C64::from_polar(1.0, phase);
        let v: Vec<C64> = u.iter().map(|c| c * z).collect();
        let r = pde_residual(&v, s.lambda, s.eta, 2.0, &space);
        assert!((r - r0).abs() < 1e-12);
    }
}

#[test]
fn y_is_lipschitz_with_small_constant() {
    let (space, _) = setup(1, 2, 24);
    let opts = ReductionOptions::default();
    let lam = real(4.0);
    // ‖y(ε) − y(ε′)‖ / |ε − ε′| shrinks like δ^σ as the data ball δ shrinks
    let ratio = |delta: f64| {
        let a = solve_y(&[real(delta)], lam, &space, real(1.0), 2.0, &opts).unwrap();
        let b = solve_y(&[real(0.9 * delta)], lam, &space, real(1.0), 2.0, &opts).unwrap();
        let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        coeff_norm(&d) / (0.1 * delta) / delta.powi(2)
    };
    let (r1, r2, r3) = (ratio(0.2), ratio(0.05), ratio(0.0125));
    assert!(r2 < 1.5 * r1 && r3 < 1.5 * r1, "{r1} {r2} {r3}");
}

#[test]
fn square_branches_recover_their_seeds() {
    let (space, model) = setup(2, 2, 16);
    for seed in [real(1.0), real(-1.0), C64::new(0.0, 1.0)] {
        let seed = AlphaVector::new(0, vec![seed]);
        let trace = trace_branch(&seed, &model, 0.3, 6, &space, real(1.0), 2.0, &Default::default()).unwrap();
        assert!(trace.aborted.is_none(), "{:?}", trace.aborted);
        assert!(trace.samples.iter().all(|s| s.pde_residual < 1e-9));
        let report = verify_branch_limit(&trace.samples, &space, &model).unwrap();
        assert!(report.alpha.distance(&seed) < 1e-4, "{:?}", report.alpha);
        assert!(report.p_residual < 1e-8);
        assert!((report.sup_norm_normalized - 1.0).abs() < 1e-12);
        assert!(report.rate_rel_error < 1e-2, "{}", report.rate_rel_error);
    }
}

#[test]
fn complex_eta_tilts_lambda() {
    let (space, model) = setup(1, 1, 24);
    let seed = AlphaVector::zeros(1, 0);
    let eta = C64::new(0.0, 1.0);
    let trace = trace_branch(&seed, &model, 0.1, 4, &space, eta, 2.0, &Default::default()).unwrap();
    let last = trace.samples.last().unwrap();
    let lo = leading_order_lambda(&model, &seed, last.state.eps, 1.0, eta);
    assert!((last.state.lambda.im - lo.im).abs() < 0.05 * lo.im);
    assert!(eval_p(&model, &seed).unwrap().is_empty());
}
