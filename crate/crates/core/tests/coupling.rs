use std::f64::consts::PI;

use bifurc_core::alpha::{closed_form_p_sigma2, eval_p, eval_real_jacobian, finite_difference_jacobian, AlphaVector};
use bifurc_core::coupling::{
    check_hypothesis_h4, quartic_product_unnormalized, MomentModel, QuadratureMoments, QuarticMoments, QuarticTable,
    QuarticTensor, C64,
};
use bifurc_core::quadrature::{gauss_legendre, SampledBasis};
use bifurc_core::spectral::{group_by_eigenvalue, group_by_index, BoxDomain, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Product over axes of `∫_0^π Π sin(k x)` by a 40-point Gauss rule per axis.
fn product_by_quadrature(modes: &[Vec<u32>; 4]) -> f64 {
    let (x, w) = gauss_legendre(40);
    (0..modes[0].len())
        .map(|axis| {
            x.iter()
                .zip(&w)
                .map(|(t, w)| {
                    let s = 0.5 * PI * (t + 1.0);
                    0.5 * PI * w * modes.iter().map(|m| (m[axis] as f64 * s).sin()).product::<f64>()
                })
                .sum::<f64>()
        })
        .product()
}

#[test]
fn four_dimensional_counterexample() {
    let d = BoxDomain::pi_cube(4);
    let ks = [vec![1, 2, 3, 4], vec![2, 3, 4, 1], vec![3, 4, 1, 2], vec![4, 1, 2, 3]];
    let modes: Vec<Mode> = ks.iter().map(|k| Mode::new(k.clone()).unwrap()).collect();
    let exact = quartic_product_unnormalized([&modes[0], &modes[1], &modes[2], &modes[3]], &d).unwrap();
    assert!((exact - (PI / 8.0).powi(4)).abs() < 1e-15, "{exact} {}", product_by_quadrature(&ks));
    assert!((exact - 0.02378).abs() < 1e-5);
    assert!((exact - product_by_quadrature(&ks)).abs() < 1e-10);

    let g = group_by_eigenvalue(&d, 30.0).unwrap();
    assert_eq!(g.multiplicity(), 24);
    let report = check_hypothesis_h4(&g, &d).unwrap();
    assert!(!report.holds);
    let hit = report.violations.iter().any(|v| {
        let mut got: Vec<Vec<u32>> = v.modes.iter().map(|m| m.k.clone()).collect();
        got.sort();
        got == ks.to_vec()
    });
    assert!(hit);
}

#[test]
fn hypothesis_holds_for_square_and_cube() {
    for dim in [2, 3] {
        let d = BoxDomain::pi_cube(dim);
        let g = group_by_index(&d, 2).unwrap();
        assert!(check_hypothesis_h4(&g, &d).unwrap().holds);
    }
}

fn random_vector(rng: &mut ChaCha8Rng, p: usize) -> Vec<C64> {
    (0..p).map(|_| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect()
}

#[test]
fn closed_form_and_quadrature_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dim in [2, 3] {
        let d = BoxDomain::pi_cube(dim);
        let g = group_by_index(&d, 2).unwrap();
        let tensor = QuarticTensor::new(&g, &d).unwrap();
        let table = QuarticTable::new(&tensor);
        let exact = QuarticMoments { tensor };
        let quad = QuadratureMoments::new(SampledBasis::box_modes(&d, &g.modes, 16), 2.0);
        for _ in 0..100 {
            let c = random_vector(&mut rng, g.multiplicity());
            let (a, b) = (exact.moments(&c), quad.moments(&c));
            let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-9 * scale);
            }
            let alpha = AlphaVector::new(0, c[1..].to_vec());
            let (p1, p2) = (closed_form_p_sigma2(&alpha, &table).unwrap(), eval_p(&quad, &alpha).unwrap());
            let scale = p2.iter().map(|z| z.norm()).fold(1e-300, f64::max);
            for (x, y) in p1.iter().zip(&p2) {
                assert!((x - y).norm() < 1e-9 * scale.max(1e-3), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn analytic_jacobians_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = BoxDomain::pi_cube(3);
    let g = group_by_index(&d, 2).unwrap();
    let models: Vec<Box<dyn MomentModel>> = vec![
        Box::new(QuarticMoments { tensor: QuarticTensor::new(&g, &d).unwrap() }),
        Box::new(QuadratureMoments::new(SampledBasis::box_modes(&d, &g.modes, 16), 2.0)),
        Box::new(QuadratureMoments::new(SampledBasis::box_modes(&d, &g.modes, 24), 3.0)),
    ];
    for model in &models {
        for _ in 0..50 {
            let alpha = AlphaVector::new(0, random_vector(&mut rng, 2));
            let a = eval_real_jacobian(model.as_ref(), &alpha).unwrap();
            let f = finite_difference_jacobian(model.as_ref(), &alpha, 1e-5).unwrap();
            let scale = a.amax().max(1.0);
            assert!((a - f).amax() < 1e-6 * scale);
        }
    }
}
