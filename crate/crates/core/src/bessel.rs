//! Bessel functions of the first kind of integer order.

/// `J_n(x)` for `x >= 0` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`. Negative `x` uses `J_n(−x) = (−1)^n J_n(x)`.
pub fn bessel_j(order: usize, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(order, -x);
        return if order % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let top = 2 * ((order.max(x.ceil() as usize) + 40 + (x.cbrt() * 6.0) as usize) / 2 + 1);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut sum = 0.0;
    let mut wanted = 0.0;
    for k in (0..=top).rev() {
        if k == order {
            wanted = cur;
        }
        if k % 2 == 0 {
            sum += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            sum *= 1e-250;
            wanted *= 1e-250;
        }
    }
    wanted / sum
}

/// Derivative `J_n'(x) = (J_{n−1}(x) − J_{n+1}(x)) / 2`, with `J_0' = −J_1`.
pub fn bessel_j_prime(order: usize, x: f64) -> f64 {
    if order == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(order - 1, x) - bessel_j(order + 1, x))
    }
}

/// The `k`-th positive zero (`k >= 1`) of `J_n`.
pub fn bessel_zero(order: usize, k: usize) -> f64 {
    assert!(k >= 1, "zeros are counted from 1");
    let step = 0.1;
    let mut a = 1e-3;
    let mut fa = bessel_j(order, a);
    let mut found = 0;
    loop {
        let b = a + step;
        let fb = bessel_j(order, b);
        if fa == 0.0 || fa * fb < 0.0 {
            found += 1;
            if found == k {
                return refine(order, a, b);
            }
        }
        a = b;
        fa = fb;
    }
}

fn refine(order: usize, mut a: f64, mut b: f64) -> f64 {
    let mut fa = bessel_j(order, a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = bessel_j(order, m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
        if b - a < 1e-15 * b {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..3 {
        let d = bessel_j_prime(order, x);
        if d == 0.0 {
            break;
        }
        x -= bessel_j(order, x) / d;
    }
    x
}
