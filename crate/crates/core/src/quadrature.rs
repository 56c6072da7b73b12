//! Gauss-Legendre rules and basis functions sampled on quadrature grids.

use std::f64::consts::PI;

use crate::spectral::{sine_factor, BoxDomain, Mode};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional rule mapped to `(a, b)`.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        Self {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|w| half * w).collect(),
        }
    }

    /// Periodic trapezoid rule on `[0, 2π)`.
    pub fn periodic_trapezoid(n: usize) -> Self {
        let h = 2.0 * PI / n as f64;
        Self { nodes: (0..n).map(|i| i as f64 * h).collect(), weights: vec![h; n] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor Gauss-Legendre grid on a box.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes_per_axis: usize,
    pub axes: Vec<AxisRule>,
}

impl QuadratureGrid {
    pub fn for_box(domain: &BoxDomain, nodes_per_axis: usize) -> Self {
        Self {
            nodes_per_axis,
            axes: domain
                .lengths()
                .iter()
                .map(|&l| AxisRule::gauss_legendre(nodes_per_axis, 0.0, l))
                .collect(),
        }
    }

    pub fn num_points(&self) -> usize {
        self.axes.iter().map(AxisRule::len).product()
    }

    /// Tensor weights in row-major order (last axis fastest).
    pub fn weights(&self) -> Vec<f64> {
        tensor_product(self.axes.iter().map(|a| a.weights.clone()).collect())
    }
}

/// Default nodes per axis for a box of dimension `dim`.
pub fn default_nodes_per_axis(dim: usize, sigma: f64) -> usize {
    let base = match dim {
        0..=2 => 64,
        3 => 32,
        _ => 16,
    };
    if is_even_integer(sigma) {
        base
    } else {
        2 * base
    }
}

pub fn is_even_integer(sigma: f64) -> bool {
    sigma >= 0.0 && sigma.fract() == 0.0 && (sigma as u64) % 2 == 0
}

/// Row-major outer product of per-axis factors.
pub(crate) fn tensor_product(factors: Vec<Vec<f64>>) -> Vec<f64> {
    factors.into_iter().fold(vec![1.0], |acc, axis| {
        let mut out = Vec::with_capacity(acc.len() * axis.len());
        for a in &acc {
            for b in &axis {
                out.push(a * b);
            }
        }
        out
    })
}

/// Real basis functions sampled at quadrature points with their weights.
///
/// `values[j][q]` is basis function `j` at point `q`.
#[derive(Debug, Clone)]
pub struct SampledBasis {
    pub weights: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SampledBasis {
    /// Normalized sine modes of a box on a tensor Gauss-Legendre grid.
    pub fn box_modes(domain: &BoxDomain, modes: &[Mode], nodes_per_axis: usize) -> Self {
        let grid = QuadratureGrid::for_box(domain, nodes_per_axis);
        let norm = domain.norm_constant();
        let values = modes
            .iter()
            .map(|mode| {
                let factors = mode
                    .k
                    .iter()
                    .zip(domain.lengths())
                    .zip(&grid.axes)
                    .enumerate()
                    .map(|(axis, ((&k, &l), rule))| {
                        let scale = if axis == 0 { norm } else { 1.0 };
                        rule.nodes.iter().map(|&x| scale * sine_factor(k, l, x)).collect()
                    })
                    .collect();
                tensor_product(factors)
            })
            .collect();
        Self { weights: grid.weights(), values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    /// `∫ f_i f_j` for all pairs.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let p = self.dim();
        (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        self.weights
                            .iter()
                            .zip(&self.values[i])
                            .zip(&self.values[j])
                            .map(|((w, a), b)| w * a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::enumerate_groups;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_and_polynomial_exactness() {
        for n in [1, 2, 5, 16, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(integral, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn box_grid_weights_sum_to_volume() {
        let b = BoxDomain::pi_cube(3);
        let g = QuadratureGrid::for_box(&b, 32);
        assert_relative_eq!(g.weights().iter().sum::<f64>(), b.volume(), max_relative = 1e-12);
        assert!(g.axes.iter().all(|a| a.nodes.iter().all(|&x| x > 0.0 && x < PI)));
    }

    #[test]
    fn group_modes_are_orthonormal() {
        for dim in [2, 3] {
            let b = BoxDomain::pi_cube(dim);
            for g in enumerate_groups(&b, 12.0) {
                let s = SampledBasis::box_modes(&b, &g.modes, 32);
                let gram = s.gram();
                for (i, row) in gram.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((v - expected).abs() < 1e-10, "dim {dim} ({i},{j}) = {v}");
                    }
                }
            }
        }
    }
}
