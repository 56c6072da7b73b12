use bifurc_core::alpha::{eval_p, AlphaVector};
use bifurc_core::coupling::{MomentModel, QuadratureMoments, QuarticMoments, QuarticTensor, C64};
use bifurc_core::quadrature::SampledBasis;
use bifurc_core::spectral::{group_by_index, BoxDomain};
use proptest::prelude::*;

fn square_models() -> (QuarticMoments, QuadratureMoments) {
    let d = BoxDomain::pi_cube(2);
    let g = group_by_index(&d, 2).unwrap();
    (
        QuarticMoments { tensor: QuarticTensor::new(&g, &d).unwrap() },
        QuadratureMoments::new(SampledBasis::box_modes(&d, &g.modes, 24), 3.0),
    )
}

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
    let scale = a.iter().chain(b).map(|z| z.norm()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_are_homogeneous(c in prop::collection::vec(complex(), 2), t in 0.1..3.0f64) {
        let (exact, quad) = square_models();
        for model in [&exact as &dyn MomentModel, &quad] {
            let scaled: Vec<C64> = c.iter().map(|z| z * t).collect();
            let lhs = model.moments(&scaled);
            let rhs: Vec<C64> = model.moments(&c).iter().map(|m| m * t.powf(model.sigma() + 1.0)).collect();
            prop_assert!(close(&lhs, &rhs, 1e-11));
        }
    }

    #[test]
    fn moments_are_gauge_equivariant(c in prop::collection::vec(complex(), 2), phase in -3.2..3.2f64) {
        let (exact, quad) = square_models();
        let z = C64::from_polar(1.0, phase);
        for model in [&exact as &dyn MomentModel, &quad] {
            let rotated: Vec<C64> = c.iter().map(|w| w * z).collect();
            let lhs = model.moments(&rotated);
            let rhs: Vec<C64> = model.moments(&c).iter().map(|m| m * z).collect();
            prop_assert!(close(&lhs, &rhs, 1e-11));
        }
    }

    #[test]
    fn p_commutes_with_conjugation(a in complex()) {
        let (exact, quad) = square_models();
        for model in [&exact as &dyn MomentModel, &quad] {
            let p = eval_p(model, &AlphaVector::new(0, vec![a])).unwrap();
            let q = eval_p(model, &AlphaVector::new(0, vec![a.conj()])).unwrap();
            let conj: Vec<C64> = p.iter().map(|z| z.conj()).collect();
            prop_assert!(close(&q, &conj, 1e-11));
        }
    }

    #[test]
    fn real_alpha_gives_real_p(a in -2.0..2.0f64) {
        let (exact, _) = square_models();
        let p = eval_p(&exact, &AlphaVector::new(0, vec![C64::new(a, 0.0)])).unwrap();
        prop_assert!(p[0].im.abs() < 1e-14);
    }
}
