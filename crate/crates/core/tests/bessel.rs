use bifurc_core::bessel::{bessel_j, bessel_zero};

/// Ascending series `Σ (−1)^k (x/2)^{2k+n} / (k! (k+n)!)`, summed with
/// compensated terms; reliable for moderate `x`.
fn series(n: usize, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-20 {
            break;
        }
    }
    sum
}

#[test]
fn matches_series_on_small_arguments() {
    for n in 0..6 {
        for i in 0..=80 {
            let x = i as f64 * 0.1;
            let (a, b) = (bessel_j(n, x), series(n, x));
            assert!((a - b).abs() < 1e-12, "J_{n}({x}): {a} vs {b}");
        }
    }
}

#[test]
fn recurrence_identity_up_to_fifty() {
    for i in 1..=500 {
        let x = i as f64 * 0.1;
        for n in 1..4 {
            let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
            let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
            assert!((lhs - rhs).abs() < 1e-12, "n = {n}, x = {x}");
        }
    }
}

#[test]
fn addition_sum_rule() {
    // J_0² + 2 Σ J_k² = 1
    for x in [0.5, 7.3, 23.0, 49.5] {
        let s: f64 = bessel_j(0, x).powi(2) + 2.0 * (1..120).map(|k| bessel_j(k, x).powi(2)).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12, "{x}: {s}");
    }
}

#[test]
fn first_zero_of_j1() {
    let j = bessel_zero(1, 1);
    // bisection on the series oracle
    let (mut a, mut b) = (3.0, 4.5);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if series(1, a) * series(1, m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    assert!((j - a).abs() < 1e-12);
    assert!((j - 3.8317059702).abs() < 1e-10);
    assert!(bessel_j(1, j).abs() < 1e-12);
    assert!((bessel_zero(0, 1) - 2.404825557695773).abs() < 1e-12);
}
