//! Nonlinear coupling integrals over an eigenspace.
//!
//! Two evaluation paths are kept side by side: exact quartic integrals of sine
//! modes (valid for the cubic nonlinearity on boxes) and tensor quadrature of
//! `|u|^σ u` (any `σ >= 1`, any sampled basis).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::SampledBasis;
use crate::spectral::{BoxDomain, EigenGroup, Mode};

pub type C64 = Complex64;

/// `∫_0^L sin(kπx/L) sin(lπx/L) sin(mπx/L) sin(nπx/L) dx` in closed form.
///
/// Product-to-sum gives eight cosines with frequencies `k ± l ± (m ± n)`; each
/// vanishing frequency contributes `±L/8`.
pub fn quartic_1d(k: u32, l: u32, m: u32, n: u32, length: f64) -> f64 {
    let (a, b, c, d) = (i64::from(k), i64::from(l), i64::from(m), i64::from(n));
    let terms = [
        (1, a - b + c - d),
        (1, a - b - c + d),
        (-1, a - b + c + d),
        (-1, a - b - c - d),
        (-1, a + b + c - d),
        (-1, a + b - c + d),
        (1, a + b + c + d),
        (1, a + b - c - d),
    ];
    let count: i64 = terms.iter().filter(|(_, f)| *f == 0).map(|(s, _)| s).sum();
    count as f64 * length / 8.0
}

fn check_modes(modes: &[&Mode; 4], domain: &BoxDomain) -> Result<()> {
    for m in modes {
        if m.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: m.dim() });
        }
    }
    Ok(())
}

/// `∫ ∏ sin(...)` of four unnormalized sine modes over the box.
pub fn quartic_product_unnormalized(modes: [&Mode; 4], domain: &BoxDomain) -> Result<f64> {
    check_modes(&modes, domain)?;
    Ok((0..domain.dim())
        .map(|j| {
            quartic_1d(modes[0].k[j], modes[1].k[j], modes[2].k[j], modes[3].k[j], domain.lengths()[j])
        })
        .product())
}

/// Same integral for L²-normalized modes.
pub fn quartic_product(modes: [&Mode; 4], domain: &BoxDomain) -> Result<f64> {
    Ok(quartic_product_unnormalized(modes, domain)? * domain.norm_constant().powi(4))
}

/// All normalized quartic integrals `T[i][j][k][l] = ∫ u_i u_j u_k u_l` of a group.
#[derive(Debug, Clone)]
pub struct QuarticTensor {
    p: usize,
    data: Vec<f64>,
}

impl QuarticTensor {
    pub fn new(group: &EigenGroup, domain: &BoxDomain) -> Result<Self> {
        let p = group.multiplicity();
        let modes = &group.modes;
        let mut data = Vec::with_capacity(p.pow(4));
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        data.push(quartic_product([&modes[i], &modes[j], &modes[k], &modes[l]], domain)?);
                    }
                }
            }
        }
        Ok(Self { p, data })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let p = self.p;
        self.data[((i * p + j) * p + k) * p + l]
    }
}

/// Diagonal and pairwise quartic integrals of a group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarticTable {
    /// `∫ u_m⁴`, identical for every mode.
    pub a: f64,
    /// `pair[m][k] = ∫ u_m² u_k²`; the diagonal repeats `a`.
    pub pair: Vec<Vec<f64>>,
    /// Every quartic integral not of the form `u_m⁴` or `u_m² u_k²` vanishes.
    pub cross_ok: bool,
}

impl QuarticTable {
    pub fn new(tensor: &QuarticTensor) -> Self {
        let p = tensor.dim();
        let a = tensor.get(0, 0, 0, 0);
        let pair = (0..p).map(|m| (0..p).map(|k| tensor.get(m, m, k, k)).collect()).collect();
        let mut cross_ok = true;
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        let mut idx = [i, j, k, l];
                        idx.sort_unstable();
                        let paired = idx[0] == idx[1] && idx[2] == idx[3];
                        if !paired && tensor.get(i, j, k, l).abs() > 1e-12 * a {
                            cross_ok = false;
                        }
                    }
                }
            }
        }
        Self { a, pair, cross_ok }
    }

    /// The common value of `∫ u_m² u_k²` (k ≠ m), if all pairs agree.
    pub fn uniform_b(&self) -> Option<f64> {
        let p = self.pair.len();
        let mut vals = (0..p).flat_map(|m| (0..p).filter(move |&k| k != m).map(move |k| (m, k)));
        let (m0, k0) = vals.next()?;
        let b = self.pair[m0][k0];
        vals.all(|(m, k)| (self.pair[m][k] - b).abs() <= 1e-12 * self.a).then_some(b)
    }
}

/// Outcome of the four-distinct-eigenfunction check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H4Report {
    pub holds: bool,
    pub multiplicity: usize,
    pub checked: usize,
    /// Index 4-tuples into the group's mode list with their unnormalized integral.
    pub violations: Vec<H4Violation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H4Violation {
    pub indices: [usize; 4],
    pub modes: [Mode; 4],
    pub value: f64,
}

/// Checks that `∫ u_i u_j u_k u_l = 0` for every four distinct modes of the group.
pub fn check_hypothesis_h4(group: &EigenGroup, domain: &BoxDomain) -> Result<H4Report> {
    let p = group.multiplicity();
    let mut violations = Vec::new();
    let mut checked = 0;
    if p >= 4 {
        let m = &group.modes;
        for i in 0..p {
            for j in i + 1..p {
                for k in j + 1..p {
                    for l in k + 1..p {
                        checked += 1;
                        let v = quartic_product_unnormalized([&m[i], &m[j], &m[k], &m[l]], domain)?;
                        if v.abs() >= 1e-12 {
                            violations.push(H4Violation {
                                indices: [i, j, k, l],
                                modes: [m[i].clone(), m[j].clone(), m[k].clone(), m[l].clone()],
                                value: v,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(H4Report { holds: violations.is_empty(), multiplicity: p, checked, violations })
}

/// Wirtinger derivatives of the moments, `holo[l][q] = ∂M_l/∂c_q`, `anti[l][q] = ∂M_l/∂c̄_q`.
#[derive(Debug, Clone)]
pub struct MomentDerivatives {
    pub holo: Vec<Vec<C64>>,
    pub anti: Vec<Vec<C64>>,
}

/// Moments `M_l(c) = ∫ |u|^σ u u_l` with `u = Σ c_j u_j` over a fixed real basis.
pub trait MomentModel: Sync {
    fn dim(&self) -> usize;
    fn sigma(&self) -> f64;
    fn moments(&self, c: &[C64]) -> Vec<C64>;
    fn derivatives(&self, c: &[C64]) -> MomentDerivatives;
}

/// `|z|^σ`.
#[inline]
pub fn abs_pow(z: C64, sigma: f64) -> f64 {
    let n2 = z.norm_sqr();
    if sigma == 2.0 {
        n2
    } else if sigma == 4.0 {
        n2 * n2
    } else if n2 == 0.0 {
        0.0
    } else {
        n2.powf(0.5 * sigma)
    }
}

/// `|z|^σ z`.
#[inline]
pub fn nonlinearity(z: C64, sigma: f64) -> C64 {
    z * abs_pow(z, sigma)
}

/// `(∂f/∂z, ∂f/∂z̄)` of `f(z) = |z|^σ z`; the second is taken as 0 at `z = 0`.
#[inline]
pub fn nonlinearity_wirtinger(z: C64, sigma: f64) -> (C64, C64) {
    let n2 = z.norm_sqr();
    if n2 == 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    let pw = abs_pow(z, sigma);
    let fz = C64::new(0.5 * (sigma + 2.0) * pw, 0.0);
    let fzb = z * z * (0.5 * sigma * pw / n2);
    (fz, fzb)
}

/// Quadrature evaluation of the moments on a sampled basis.
#[derive(Debug, Clone)]
pub struct QuadratureMoments {
    pub basis: SampledBasis,
    pub sigma: f64,
}

impl QuadratureMoments {
    pub fn new(basis: SampledBasis, sigma: f64) -> Self {
        Self { basis, sigma }
    }

    fn field_at(&self, c: &[C64], q: usize) -> C64 {
        c.iter().zip(&self.basis.values).map(|(c, v)| c * v[q]).sum()
    }

    /// `Σ_q w_q |f(u)| |g|` with `g = Σ t_l u_l`, the magnitude scale for the guard.
    pub fn magnitude(&self, c: &[C64], test: &[C64]) -> f64 {
        (0..self.basis.num_points())
            .map(|q| {
                let u = self.field_at(c, q);
                let g: C64 = test.iter().zip(&self.basis.values).map(|(t, v)| t * v[q]).sum();
                self.basis.weights[q] * nonlinearity(u, self.sigma).norm() * g.norm()
            })
            .sum()
    }
}

const CHUNK: usize = 2048;

impl MomentModel for QuadratureMoments {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn moments(&self, c: &[C64]) -> Vec<C64> {
        let p = self.dim();
        let n = self.basis.num_points();
        let chunk_sum = |start: usize| {
            let mut acc = vec![C64::new(0.0, 0.0); p];
            for q in start..(start + CHUNK).min(n) {
                let f = nonlinearity(self.field_at(c, q), self.sigma) * self.basis.weights[q];
                for (a, v) in acc.iter_mut().zip(&self.basis.values) {
                    *a += f * v[q];
                }
            }
            acc
        };
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let parts: Vec<Vec<C64>> = if n > 4 * CHUNK {
            starts.par_iter().map(|&s| chunk_sum(s)).collect()
        } else {
            starts.iter().map(|&s| chunk_sum(s)).collect()
        };
        // fixed-order reduction keeps results independent of scheduling
        parts.into_iter().fold(vec![C64::new(0.0, 0.0); p], |mut acc, part| {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
            acc
        })
    }

    fn derivatives(&self, c: &[C64]) -> MomentDerivatives {
        let p = self.dim();
        let zero = vec![vec![C64::new(0.0, 0.0); p]; p];
        let mut holo = zero.clone();
        let mut anti = zero;
        let vals = &self.basis.values;
        for q in 0..self.basis.num_points() {
            let (fz, fzb) = nonlinearity_wirtinger(self.field_at(c, q), self.sigma);
            let w = self.basis.weights[q];
            for l in 0..p {
                let wl = w * vals[l][q];
                if wl == 0.0 {
                    continue;
                }
                for j in 0..p {
                    let s = wl * vals[j][q];
                    holo[l][j] += fz * s;
                    anti[l][j] += fzb * s;
                }
            }
        }
        MomentDerivatives { holo, anti }
    }
}

/// Exact moments for `σ = 2` from the quartic tensor.
#[derive(Debug, Clone)]
pub struct QuarticMoments {
    pub tensor: QuarticTensor,
}

impl MomentModel for QuarticMoments {
    fn dim(&self) -> usize {
        self.tensor.dim()
    }

    fn sigma(&self) -> f64 {
        2.0
    }

    fn moments(&self, c: &[C64]) -> Vec<C64> {
        // M_l = Σ T_ijkl c_i c_j c̄_k
        let p = self.dim();
        (0..p)
            .map(|l| {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..p {
                    for j in 0..p {
                        let cij = c[i] * c[j];
                        for k in 0..p {
                            let t = self.tensor.get(i, j, k, l);
                            if t != 0.0 {
                                s += cij * c[k].conj() * t;
                            }
                        }
                    }
                }
                s
            })
            .collect()
    }

    fn derivatives(&self, c: &[C64]) -> MomentDerivatives {
        let p = self.dim();
        let mut holo = vec![vec![C64::new(0.0, 0.0); p]; p];
        let mut anti = holo.clone();
        for l in 0..p {
            for q in 0..p {
                let mut h = C64::new(0.0, 0.0);
                let mut a = C64::new(0.0, 0.0);
                for i in 0..p {
                    for j in 0..p {
                        h += 2.0 * self.tensor.get(q, i, j, l) * c[i] * c[j].conj();
                        a += self.tensor.get(i, j, q, l) * c[i] * c[j];
                    }
                }
                holo[l][q] = h;
                anti[l][q] = a;
            }
        }
        MomentDerivatives { holo, anti }
    }
}

/// `∫ |Σ c_j u_j|^σ (Σ c_j u_j) (Σ t_j u_j)` on one model.
pub fn nonlinear_moment(model: &dyn MomentModel, coeffs: &[C64], test: &[C64]) -> Result<C64> {
    if coeffs.len() != model.dim() || test.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: coeffs.len().min(test.len()) });
    }
    Ok(model.moments(coeffs).iter().zip(test).map(|(m, t)| m * t).sum())
}

/// Two-level guarded quadrature for a box group.
#[derive(Debug, Clone)]
pub struct GuardedQuadrature {
    pub coarse: QuadratureMoments,
    pub fine: QuadratureMoments,
    pub tolerance: f64,
}

impl GuardedQuadrature {
    pub fn for_box(group: &EigenGroup, domain: &BoxDomain, sigma: f64, nodes_per_axis: usize, tolerance: f64) -> Self {
        Self {
            coarse: QuadratureMoments::new(SampledBasis::box_modes(domain, &group.modes, nodes_per_axis), sigma),
            fine: QuadratureMoments::new(SampledBasis::box_modes(domain, &group.modes, 2 * nodes_per_axis), sigma),
            tolerance,
        }
    }

    /// Fine-grid moment, failing if the coarse grid differs by more than
    /// `tolerance` relative to `∫ |f(u)| |g|`.
    pub fn moment(&self, coeffs: &[C64], test: &[C64]) -> Result<C64> {
        let lo = nonlinear_moment(&self.coarse, coeffs, test)?;
        let hi = nonlinear_moment(&self.fine, coeffs, test)?;
        let scale = self.fine.magnitude(coeffs, test);
        let change = (hi - lo).norm();
        if change > self.tolerance * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::QuadratureGuard { change: change / scale.max(f64::MIN_POSITIVE), tolerance: self.tolerance });
        }
        Ok(hi)
    }

    /// Checks all moments `M_l(c)` at once.
    pub fn check_moments(&self, coeffs: &[C64]) -> Result<Vec<C64>> {
        let lo = self.coarse.moments(coeffs);
        let hi = self.fine.moments(coeffs);
        let p = coeffs.len();
        for l in 0..p {
            let mut test = vec![C64::new(0.0, 0.0); p];
            test[l] = C64::new(1.0, 0.0);
            let scale = self.fine.magnitude(coeffs, &test).max(f64::MIN_POSITIVE);
            let change = (hi[l] - lo[l]).norm() / scale;
            if change > self.tolerance {
                return Err(Error::QuadratureGuard { change, tolerance: self.tolerance });
            }
        }
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::AxisRule;
    use crate::spectral::enumerate_groups;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn m(k: &[u32]) -> Mode {
        Mode::new(k.to_vec()).unwrap()
    }

    fn gl_quartic(k: u32, l: u32, mm: u32, n: u32, length: f64) -> f64 {
        let rule = AxisRule::gauss_legendre(64, 0.0, length);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| {
                let s = |f: u32| (f as f64 * PI * x / length).sin();
                w * s(k) * s(l) * s(mm) * s(n)
            })
            .sum()
    }

    #[test]
    fn quartic_1d_matches_quadrature_oracle() {
        for k in 1..=5 {
            for l in 1..=5 {
                for mm in 1..=5 {
                    for n in 1..=5 {
                        for length in [1.0, PI, 0.7] {
                            let exact = quartic_1d(k, l, mm, n, length);
                            let quad = gl_quartic(k, l, mm, n, length);
                            assert!((exact - quad).abs() < 1e-13, "{k}{l}{mm}{n} L={length}: {exact} vs {quad}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn quartic_1d_reference_values() {
        assert_relative_eq!(quartic_1d(3, 3, 3, 3, 2.0), 3.0 * 2.0 / 8.0);
        assert_relative_eq!(quartic_1d(2, 2, 5, 5, 2.0), 2.0 / 4.0);
        assert_relative_eq!(quartic_1d(1, 2, 3, 4, PI), PI / 8.0);
    }

    #[test]
    fn quartic_products() {
        let line = BoxDomain::pi_cube(1);
        let one = m(&[1]);
        assert_relative_eq!(quartic_product([&one; 4], &line).unwrap(), 3.0 / (2.0 * PI), max_relative = 1e-14);

        let sq = BoxDomain::pi_cube(2);
        let (a, b) = (m(&[1, 2]), m(&[2, 1]));
        assert_relative_eq!(
            quartic_product_unnormalized([&a, &b, &a, &b], &sq).unwrap(),
            (PI / 4.0).powi(2),
            max_relative = 1e-14
        );

        let hc = BoxDomain::pi_cube(4);
        let perms = [m(&[1, 2, 3, 4]), m(&[2, 3, 4, 1]), m(&[3, 4, 1, 2]), m(&[4, 1, 2, 3])];
        let v = quartic_product_unnormalized([&perms[0], &perms[1], &perms[2], &perms[3]], &hc).unwrap();
        assert_relative_eq!(v, (PI / 8.0).powi(4), max_relative = 1e-14);
        assert!(quartic_product([&one, &one, &one, &a], &sq).is_err());
    }

    #[test]
    fn h4_trivial_and_violated() {
        let cube = BoxDomain::pi_cube(3);
        let g = enumerate_groups(&cube, 6.0).pop().unwrap();
        let r = check_hypothesis_h4(&g, &cube).unwrap();
        assert!(r.holds && r.checked == 0);

        let hc = BoxDomain::pi_cube(4);
        let g = enumerate_groups(&hc, 30.0).pop().unwrap();
        let r = check_hypothesis_h4(&g, &hc).unwrap();
        assert!(!r.holds);
        let target = [m(&[1, 2, 3, 4]), m(&[2, 3, 4, 1]), m(&[3, 4, 1, 2]), m(&[4, 1, 2, 3])];
        assert!(r.violations.iter().any(|v| {
            let mut got = v.modes.to_vec();
            got.sort();
            let mut t = target.to_vec();
            t.sort();
            got == t
        }));
    }

    #[test]
    fn quartic_table_for_square_and_cube() {
        let sq = BoxDomain::pi_cube(2);
        let g = enumerate_groups(&sq, 5.0).pop().unwrap();
        let t = QuarticTable::new(&QuarticTensor::new(&g, &sq).unwrap());
        let n4 = (2.0 / PI).powi(4);
        assert_relative_eq!(t.a, n4 * 9.0 * PI * PI / 64.0, max_relative = 1e-14);
        assert_relative_eq!(t.uniform_b().unwrap(), n4 * PI * PI / 16.0, max_relative = 1e-14);
        assert!(t.cross_ok && t.a > t.uniform_b().unwrap());

        // modes sharing a frequency on one axis: pair value is (3L/8)(L/4)², not (L/4)³
        let cube = BoxDomain::pi_cube(3);
        let g = enumerate_groups(&cube, 6.0).pop().unwrap();
        let t = QuarticTable::new(&QuarticTensor::new(&g, &cube).unwrap());
        let n4 = (2.0 / PI).powf(6.0);
        assert_relative_eq!(t.uniform_b().unwrap(), n4 * 3.0 * PI.powi(3) / 128.0, max_relative = 1e-13);
        assert!(t.cross_ok);
    }

    #[test]
    fn symmetric_moment_vanishes() {
        let sq = BoxDomain::pi_cube(2);
        let g = enumerate_groups(&sq, 5.0).pop().unwrap();
        let q = GuardedQuadrature::for_box(&g, &sq, 2.0, 64, 1e-9);
        let one = C64::new(1.0, 0.0);
        let v = q.moment(&[one, one], &[one, -one]).unwrap();
        assert!(v.norm() < 1e-13);
    }

    #[test]
    fn quadrature_matches_tensor_on_single_mode() {
        let sq = BoxDomain::pi_cube(2);
        let g = enumerate_groups(&sq, 5.0).pop().unwrap();
        let q = QuadratureMoments::new(SampledBasis::box_modes(&sq, &g.modes, 64), 2.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let v = nonlinear_moment(&q, &[one, zero], &[one, zero]).unwrap();
        // unnormalized A = 9π²/64 scaled by (2/π)⁴
        assert_relative_eq!(v.re, 9.0 * PI * PI / 64.0 * (2.0 / PI).powi(4), max_relative = 1e-12);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn wirtinger_derivatives_at_zero() {
        let (a, b) = nonlinearity_wirtinger(C64::new(0.0, 0.0), 1.0);
        assert_eq!(a.norm() + b.norm(), 0.0);
    }
}
