//! The unit disk: second Dirichlet eigenvalue `j_{1,1}²` with the pair
//! `J_1(j r) cos θ`, `J_1(j r) sin θ`, whose reduced polynomial vanishes on
//! the whole real axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::alpha::{eval_p, eval_real_jacobian, row_normalized_det, AlphaVector};
use crate::bessel::{bessel_j, bessel_zero};
use crate::coupling::{QuadratureMoments, C64};
use crate::error::{Error, Result};
use crate::quadrature::{AxisRule, SampledBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskMode {
    pub angular_index: usize,
    pub radial_index: usize,
    pub bessel_zero: f64,
    pub parity: Parity,
}

impl DiskMode {
    pub fn new(angular_index: usize, radial_index: usize, parity: Parity) -> Result<Self> {
        if radial_index == 0 {
            return Err(Error::InvalidArgument("radial index starts at 1".into()));
        }
        if angular_index == 0 && parity == Parity::Sin {
            return Err(Error::InvalidArgument("sin parity needs a positive angular index".into()));
        }
        Ok(Self { angular_index, radial_index, bessel_zero: bessel_zero(angular_index, radial_index), parity })
    }

    pub fn eigenvalue(&self) -> f64 {
        self.bessel_zero * self.bessel_zero
    }

    /// `L²(disk)` normalization of `J_m(j r) cos/sin(mθ)`.
    pub fn norm_constant(&self) -> f64 {
        let jp = bessel_j(self.angular_index + 1, self.bessel_zero);
        let angular = if self.angular_index == 0 { 2.0 * PI } else { PI };
        1.0 / (angular * jp * jp / 2.0).sqrt()
    }

    /// Value at polar point `(r, θ)`; `phase` shifts the angular frame.
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        let m = self.angular_index as f64;
        let ang = match self.parity {
            Parity::Cos => (m * theta).cos(),
            Parity::Sin => (m * theta).sin(),
        };
        self.norm_constant() * bessel_j(self.angular_index, self.bessel_zero * r) * ang
    }
}

/// The eigenpair `(u₁, u₂)` of the second Dirichlet eigenvalue.
pub fn second_eigenpair() -> [DiskMode; 2] {
    [
        DiskMode::new(1, 1, Parity::Cos).expect("valid mode"),
        DiskMode::new(1, 1, Parity::Sin).expect("valid mode"),
    ]
}

/// Polar rule: Gauss-Legendre in `r` with weight `r`, trapezoid in `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarRule {
    pub radial: usize,
    pub angular: usize,
}

impl Default for PolarRule {
    fn default() -> Self {
        Self { radial: 128, angular: 256 }
    }
}

/// Samples the modes on the polar grid, with the angular frame rotated by `phi`.
pub fn sample_disk_modes(modes: &[DiskMode], rule: PolarRule, phi: f64) -> SampledBasis {
    let r = AxisRule::gauss_legendre(rule.radial, 0.0, 1.0);
    let t = AxisRule::periodic_trapezoid(rule.angular);
    let mut weights = Vec::with_capacity(r.len() * t.len());
    for (ri, rw) in r.nodes.iter().zip(&r.weights) {
        for tw in &t.weights {
            weights.push(rw * ri * tw);
        }
    }
    let values = modes
        .iter()
        .map(|m| {
            let mut v = Vec::with_capacity(weights.len());
            for &ri in &r.nodes {
                for &ti in &t.nodes {
                    v.push(m.eval(ri, ti - phi));
                }
            }
            v
        })
        .collect();
    SampledBasis { weights, values }
}

/// Reduced-system model of the disk pair for exponent `σ`.
pub fn disk_model(sigma: f64, rule: PolarRule, phi: f64) -> QuadratureMoments {
    QuadratureMoments { basis: sample_disk_modes(&second_eigenpair(), rule, phi), sigma }
}

/// `P₂(α) = ∫ |u₁ + α u₂|^σ (u₁ + α u₂)(α u₁ − u₂)`.
pub fn disk_eval_p2(model: &QuadratureMoments, alpha: C64) -> Result<C64> {
    Ok(eval_p(model, &AlphaVector::new(0, vec![alpha]))?[0])
}

/// `(α² − |α|²) α + 2i Im α`.
pub fn structural_form(alpha: C64) -> C64 {
    (alpha * alpha - alpha.norm_sqr()) * alpha + C64::new(0.0, 2.0 * alpha.im)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumReport {
    pub continuum_detected: bool,
    #[serde(rename = "C_re")]
    pub c_re: f64,
    #[serde(rename = "C_im")]
    pub c_im: f64,
    pub max_structural_residual: f64,
    /// `max |P₂(α)| / |C|` over the real grid.
    pub max_real_residual: f64,
    pub real_grid_points: usize,
    /// Row-normalized real Jacobian determinant at `α = 0.5`.
    pub jacobian_det: f64,
    pub theorem_applicable: bool,
    pub message: String,
}

/// Least-squares `C` with `P₂ ≈ C · structural_form`.
pub fn fit_structural_constant(samples: &[(C64, C64)]) -> C64 {
    let num: C64 = samples.iter().map(|(a, p)| structural_form(*a).conj() * p).sum();
    let den: f64 = samples.iter().map(|(a, _)| structural_form(*a).norm_sqr()).sum();
    num / den
}

/// Confirms the real continuum of roots for `σ = 2`.
pub fn detect_continuum(rule: PolarRule, degeneracy_threshold: f64) -> Result<ContinuumReport> {
    let model = disk_model(2.0, rule, 0.0);
    // deterministic complex sample points spread over [-2, 2]²
    let samples: Vec<(C64, C64)> = (0..50)
        .map(|i| {
            let t = i as f64;
            let a = C64::new(2.0 * (0.37 * t + 0.1).sin(), 2.0 * (0.71 * t + 0.3).cos());
            disk_eval_p2(&model, a).map(|p| (a, p))
        })
        .collect::<Result<_>>()?;
    let c = fit_structural_constant(&samples);
    if c.norm() == 0.0 {
        return Err(Error::NumericalFault("structural constant vanishes".into()));
    }
    let max_structural_residual = samples
        .iter()
        .map(|(a, p)| (p - c * structural_form(*a)).norm() / c.norm())
        .fold(0.0, f64::max);
    let real_grid_points = 101;
    let mut max_real_residual: f64 = 0.0;
    for i in 0..real_grid_points {
        let a = -2.0 + 4.0 * i as f64 / (real_grid_points - 1) as f64;
        max_real_residual = max_real_residual.max(disk_eval_p2(&model, C64::new(a, 0.0))?.norm() / c.norm());
    }
    let jac = eval_real_jacobian(&model, &AlphaVector::new(0, vec![C64::new(0.5, 0.0)]))?;
    let jacobian_det = row_normalized_det(&jac);
    let continuum_detected = max_real_residual < 1e-10 && jacobian_det.abs() < degeneracy_threshold;
    let message = if continuum_detected {
        "continuum of real roots: Theorem 1.1 inapplicable".to_string()
    } else {
        "no continuum detected".to_string()
    };
    Ok(ContinuumReport {
        continuum_detected,
        c_re: c.re,
        c_im: c.im,
        max_structural_residual,
        max_real_residual,
        real_grid_points,
        jacobian_det,
        theorem_applicable: !continuum_detected,
        message,
    })
}

/// `P₂` in the original frame predicted from the frame rotated by `phi`:
/// `P(α) = |c′|² c′² P′(α′)`, `c′ = cos φ + α sin φ`, `α′ = (α cos φ − sin φ)/c′`.
pub fn rotated_prediction(rotated: &QuadratureMoments, alpha: C64, phi: f64) -> Result<C64> {
    let c = phi.cos() + alpha * phi.sin();
    if c.norm() < 1e-12 {
        return Err(Error::InvalidArgument("alpha maps to infinity in the rotated frame".into()));
    }
    let a = (alpha * phi.cos() - phi.sin()) / c;
    Ok(c.norm_sqr() * c * c * disk_eval_p2(rotated, a)?)
}
