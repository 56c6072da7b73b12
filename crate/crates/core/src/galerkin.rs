//! Sine-Galerkin truncation of a box with a collocation grid.
//!
//! The truncation keeps every mode with `max_j k_j <= cutoff`. Coefficients are
//! stored row-major over `[cutoff]^N` (first axis slowest). Fields live on the
//! interior uniform grid `x_i = i L / M`, `i = 1..M-1`, where the trapezoid sum
//! integrates products of sines exactly up to total frequency `2M - 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coupling::{nonlinearity, C64};
use crate::error::{Error, Result};
use crate::quadrature::is_even_integer;
use crate::spectral::{eigenvalue_of, BoxDomain, EigenGroup, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalerkinSettings {
    pub cutoff: usize,
    /// Collocation intervals per axis; derived from `cutoff` and `σ` when `None`.
    pub collocation: Option<usize>,
}

impl Default for GalerkinSettings {
    fn default() -> Self {
        Self { cutoff: 24, collocation: None }
    }
}

/// Number of collocation intervals resolving `|u|^σ u` tested against the truncation.
pub fn default_collocation(cutoff: usize, sigma: f64) -> usize {
    if is_even_integer(sigma) {
        // products reach frequency (σ + 2) K, exact when below 2M
        ((sigma as usize + 2) * cutoff) / 2 + 1
    } else {
        4 * cutoff
    }
}

#[derive(Debug, Clone)]
struct AxisTransform {
    /// `phi[i * cutoff + k] = sqrt(2/L) sin((k+1) π x_i / L)`.
    phi: Vec<f64>,
    points: usize,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    pub domain: BoxDomain,
    pub group: EigenGroup,
    pub cutoff: usize,
    pub intervals: usize,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    group_indices: Vec<usize>,
    complement: Vec<usize>,
    axes: Vec<AxisTransform>,
}

impl GalerkinSpace {
    pub fn new(domain: &BoxDomain, group: &EigenGroup, sigma: f64, settings: GalerkinSettings) -> Result<Self> {
        let k = settings.cutoff;
        if k == 0 {
            return Err(Error::InvalidArgument("Galerkin cutoff must be positive".into()));
        }
        let dim = domain.dim();
        let intervals = settings.collocation.unwrap_or_else(|| default_collocation(k, sigma));
        if intervals <= k {
            return Err(Error::InvalidArgument(format!(
                "collocation intervals {intervals} must exceed the cutoff {k}"
            )));
        }
        let total = k.pow(dim as u32);
        let mut modes = Vec::with_capacity(total);
        let mut eigenvalues = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut kv = vec![0u32; dim];
            for axis in (0..dim).rev() {
                kv[axis] = (rem % k) as u32 + 1;
                rem /= k;
            }
            let mode = Mode { k: kv };
            eigenvalues.push(eigenvalue_of(&mode, domain)?.0);
            modes.push(mode);
        }
        let mut group_indices = Vec::with_capacity(group.multiplicity());
        for gm in &group.modes {
            if gm.dim() != dim || gm.k.iter().any(|&f| f as usize > k) {
                return Err(Error::InvalidArgument(format!("group mode {gm} lies outside the truncation")));
            }
            group_indices.push(gm.k.iter().fold(0usize, |acc, &f| acc * k + (f as usize - 1)));
        }
        let complement = (0..total).filter(|i| !group_indices.contains(i)).collect();
        let axes = domain
            .lengths()
            .iter()
            .map(|&l| {
                let points = intervals - 1;
                let norm = (2.0 / l).sqrt();
                let mut phi = Vec::with_capacity(points * k);
                for i in 1..intervals {
                    let x = i as f64 * l / intervals as f64;
                    for f in 1..=k {
                        phi.push(norm * (f as f64 * PI * x / l).sin());
                    }
                }
                AxisTransform { phi, points, weight: l / intervals as f64 }
            })
            .collect();
        Ok(Self {
            domain: domain.clone(),
            group: group.clone(),
            cutoff: k,
            intervals,
            modes,
            eigenvalues,
            group_indices,
            complement,
            axes,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Positions of the group modes, in group order.
    pub fn group_indices(&self) -> &[usize] {
        &self.group_indices
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn group_eigenvalue(&self) -> f64 {
        self.group.eigenvalue
    }

    pub fn num_points(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Trapezoid weight of every collocation point.
    pub fn point_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.weight).product()
    }

    /// Coordinates of collocation point `q` (row-major, first axis slowest).
    pub fn point(&self, q: usize) -> Vec<f64> {
        let mut rem = q;
        let mut x = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.axes[axis].points;
            let i = rem % n + 1;
            rem /= n;
            x[axis] = i as f64 * self.domain.lengths()[axis] / self.intervals as f64;
        }
        x
    }

    /// Embeds group coefficients into a full coefficient vector.
    pub fn embed_group(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.num_modes()];
        for (&i, c) in self.group_indices.iter().zip(coeffs) {
            out[i] = *c;
        }
        out
    }

    pub fn extract_group(&self, coeffs: &[C64]) -> Vec<C64> {
        self.group_indices.iter().map(|&i| coeffs[i]).collect()
    }

    /// Field values on the collocation grid.
    pub fn to_grid(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut dims = vec![self.cutoff; self.dim()];
        let mut data = coeffs.to_vec();
        for axis in 0..self.dim() {
            let t = &self.axes[axis];
            data = apply_axis(&data, &dims, axis, &t.phi, t.points, self.cutoff, false);
            dims[axis] = t.points;
        }
        data
    }

    /// L² projection of grid values onto the truncation.
    pub fn from_grid(&self, values: &[C64]) -> Vec<C64> {
        let mut dims: Vec<usize> = self.axes.iter().map(|a| a.points).collect();
        let mut data = values.to_vec();
        for axis in 0..self.dim() {
            let t = &self.axes[axis];
            data = apply_axis(&data, &dims, axis, &t.phi, t.points, self.cutoff, true);
            dims[axis] = self.cutoff;
        }
        let w = self.point_weight();
        data.iter_mut().for_each(|v| *v *= w);
        data
    }

    /// Coefficients of `|u|^σ u`.
    pub fn nonlinear_projection(&self, coeffs: &[C64], sigma: f64) -> Vec<C64> {
        let grid: Vec<C64> = self.to_grid(coeffs).into_iter().map(|z| nonlinearity(z, sigma)).collect();
        self.from_grid(&grid)
    }

    /// Collocation-grid maximum of `|u|`.
    pub fn sup_norm(&self, coeffs: &[C64]) -> f64 {
        self.to_grid(coeffs).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `∫ g(|u|)` by the trapezoid sum on the grid.
    pub fn integrate_abs(&self, coeffs: &[C64], g: impl Fn(f64) -> f64) -> f64 {
        self.point_weight() * self.to_grid(coeffs).iter().map(|z| g(z.norm())).sum::<f64>()
    }
}

/// L² norm of a coefficient vector.
pub fn coeff_norm(c: &[C64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Applies a real matrix along one axis of a row-major tensor.
///
/// `phi` is `points × cutoff`; forward maps `cutoff → points`, `transpose`
/// maps `points → cutoff`.
fn apply_axis(
    data: &[C64],
    dims: &[usize],
    axis: usize,
    phi: &[f64],
    points: usize,
    cutoff: usize,
    transpose: bool,
) -> Vec<C64> {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let (n_in, n_out) = if transpose { (points, cutoff) } else { (cutoff, points) };
    debug_assert_eq!(dims[axis], n_in);
    let mut out = vec![C64::new(0.0, 0.0); outer * n_out * inner];
    for o in 0..outer {
        for r in 0..n_out {
            let dst = &mut out[(o * n_out + r) * inner..(o * n_out + r + 1) * inner];
            for c in 0..n_in {
                let m = if transpose { phi[c * cutoff + r] } else { phi[r * cutoff + c] };
                if m == 0.0 {
                    continue;
                }
                let src = &data[(o * n_in + c) * inner..(o * n_in + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * m;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{enumerate_groups, group_by_index};
    use approx::assert_relative_eq;

    fn square_space(cutoff: usize) -> GalerkinSpace {
        let sq = BoxDomain::pi_cube(2);
        let g = enumerate_groups(&sq, 5.0).pop().unwrap();
        GalerkinSpace::new(&sq, &g, 2.0, GalerkinSettings { cutoff, collocation: None }).unwrap()
    }

    #[test]
    fn transform_round_trip_is_identity() {
        let s = square_space(6);
        let c: Vec<C64> = (0..s.num_modes()).map(|i| C64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.03)).collect();
        let back = s.from_grid(&s.to_grid(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn group_indices_and_eigenvalues() {
        let s = square_space(4);
        assert_eq!(s.group_indices().len(), 2);
        for &i in s.group_indices() {
            assert_relative_eq!(s.eigenvalues()[i], 5.0, max_relative = 1e-14);
        }
        assert_eq!(s.complement().len(), 14);
    }

    #[test]
    fn cubic_projection_is_exact() {
        // sin³x = (3 sin x − sin 3x)/4 on the interval
        let line = BoxDomain::pi_cube(1);
        let g = group_by_index(&line, 1).unwrap();
        let s = GalerkinSpace::new(&line, &g, 2.0, GalerkinSettings { cutoff: 8, collocation: None }).unwrap();
        let mut c = vec![C64::new(0.0, 0.0); 8];
        c[0] = C64::new(1.0, 0.0);
        let n = s.nonlinear_projection(&c, 2.0);
        let a = (2.0 / PI).sqrt();
        // (a sin x)³ = a³ (3 sin x − sin 3x)/4 tested against a sin(kx)
        assert_relative_eq!(n[0].re, a.powi(4) * 3.0 / 4.0 * PI / 2.0, max_relative = 1e-13);
        assert_relative_eq!(n[2].re, -a.powi(4) / 4.0 * PI / 2.0, max_relative = 1e-13);
        assert!(n[1].norm() < 1e-14 && n[3].norm() < 1e-14);
    }

    #[test]
    fn group_outside_truncation_rejected() {
        let sq = BoxDomain::pi_cube(2);
        let g = enumerate_groups(&sq, 5.0).pop().unwrap();
        assert!(GalerkinSpace::new(&sq, &g, 2.0, GalerkinSettings { cutoff: 1, collocation: None }).is_err());
    }
}
