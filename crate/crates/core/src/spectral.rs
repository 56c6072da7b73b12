//! Dirichlet-Laplacian eigenpairs on N-dimensional boxes.
//!
//! A box is `∏ (0, L_j)` with `L_j = scale * sqrt(r_j)` where every `r_j` is an
//! exact rational. The eigenvalue of the mode `k` is `(π/scale)² Σ k_j²/r_j`, so
//! degeneracy is decided on the rational sum `Σ k_j²/r_j` and never on floats.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Axis-aligned box `∏ (0, L_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths_sq: Vec<Rational>,
    scale: f64,
    lengths: Vec<f64>,
}

impl BoxDomain {
    /// `lengths_sq[j] = r_j` with physical side `L_j = scale * sqrt(r_j)`.
    pub fn new(lengths_sq: Vec<Rational>, scale: f64) -> Result<Self> {
        if lengths_sq.is_empty() {
            return Err(Error::InvalidDomain("box needs at least one axis".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidDomain(format!("scale must be positive, got {scale}")));
        }
        if let Some(bad) = lengths_sq.iter().find(|r| **r <= Rational::zero()) {
            return Err(Error::InvalidDomain(format!("squared length {bad} is not positive")));
        }
        let lengths = lengths_sq
            .iter()
            .map(|r| scale * r.to_f64().unwrap_or(f64::NAN).sqrt())
            .collect();
        Ok(Self { lengths_sq, scale, lengths })
    }

    /// `(0, π)^dim`.
    pub fn pi_cube(dim: usize) -> Self {
        Self::new(vec![Rational::from_integer(1); dim], PI).expect("valid box")
    }

    /// `(0, 1)^dim`.
    pub fn unit_cube(dim: usize) -> Self {
        Self::new(vec![Rational::from_integer(1); dim], 1.0).expect("valid box")
    }

    pub fn dim(&self) -> usize {
        self.lengths_sq.len()
    }

    pub fn lengths_sq(&self) -> &[Rational] {
        &self.lengths_sq
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// `(π/scale)²`, the factor turning the rational part into the eigenvalue.
    pub fn eigen_factor(&self) -> f64 {
        (PI / self.scale).powi(2)
    }

    /// L²-normalization `∏ sqrt(2/L_j)` shared by every sine mode.
    pub fn norm_constant(&self) -> f64 {
        self.lengths.iter().map(|l| (2.0 / l).sqrt()).product()
    }

    fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(&self.lengths)
            .all(|(&x, &l)| x >= -1e-12 * l && x <= l * (1.0 + 1e-12))
    }
}

/// Frequency multi-index of a sine mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<u32>,
}

impl Mode {
    pub fn new(k: Vec<u32>) -> Result<Self> {
        if k.is_empty() || k.contains(&0) {
            return Err(Error::InvalidArgument(format!("mode frequencies must be >= 1, got {k:?}")));
        }
        Ok(Self { k })
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.k.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// An eigenvalue together with the sine modes spanning its eigenspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenGroup {
    pub eigenvalue: f64,
    /// Exact `Σ k_j²/r_j`.
    pub rational: Rational,
    /// Lexicographically sorted.
    pub modes: Vec<Mode>,
    pub norm_constant: f64,
}

impl EigenGroup {
    pub fn multiplicity(&self) -> usize {
        self.modes.len()
    }

    /// Returns the group with `lead` moved to the front, other modes keeping their order.
    pub fn with_lead(&self, lead: usize) -> Result<Self> {
        if lead >= self.modes.len() {
            return Err(Error::InvalidArgument(format!(
                "lead index {lead} out of range for multiplicity {}",
                self.modes.len()
            )));
        }
        let mut modes = self.modes.clone();
        let m = modes.remove(lead);
        modes.insert(0, m);
        Ok(Self { modes, ..self.clone() })
    }
}

fn check_dim(mode: &Mode, domain: &BoxDomain) -> Result<()> {
    if mode.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: mode.dim() });
    }
    Ok(())
}

/// Exact `Σ k_j²/r_j`.
pub fn rational_eigenvalue(mode: &Mode, domain: &BoxDomain) -> Result<Rational> {
    check_dim(mode, domain)?;
    Ok(mode
        .k
        .iter()
        .zip(domain.lengths_sq())
        .map(|(&k, r)| Rational::from_integer(i64::from(k) * i64::from(k)) / *r)
        .fold(Rational::zero(), |acc, t| acc + t))
}

/// Eigenvalue `(π/scale)² Σ k_j²/r_j` and its exact rational part.
pub fn eigenvalue_of(mode: &Mode, domain: &BoxDomain) -> Result<(f64, Rational)> {
    let r = rational_eigenvalue(mode, domain)?;
    Ok((domain.eigen_factor() * r.to_f64().unwrap_or(f64::NAN), r))
}

/// All eigen-groups with eigenvalue `<= max_eigenvalue`, sorted by eigenvalue.
pub fn enumerate_groups(domain: &BoxDomain, max_eigenvalue: f64) -> Vec<EigenGroup> {
    let factor = domain.eigen_factor();
    let bound = max_eigenvalue * (1.0 + 1e-12);
    let kmax: Vec<u32> = domain
        .lengths_sq()
        .iter()
        .map(|r| {
            let m = (bound.max(0.0) / factor * r.to_f64().unwrap_or(0.0)).sqrt();
            m.floor() as u32
        })
        .collect();
    let mut groups: BTreeMap<Rational, Vec<Mode>> = BTreeMap::new();
    if kmax.contains(&0) {
        return Vec::new();
    }
    let mut k = vec![1u32; domain.dim()];
    loop {
        let mode = Mode { k: k.clone() };
        let r = rational_eigenvalue(&mode, domain).expect("dimension matches");
        if factor * r.to_f64().unwrap_or(f64::INFINITY) <= bound {
            groups.entry(r).or_default().push(mode);
        }
        // odometer
        let mut axis = 0;
        loop {
            if axis == k.len() {
                return finish_groups(groups, domain);
            }
            k[axis] += 1;
            if k[axis] <= kmax[axis] {
                break;
            }
            k[axis] = 1;
            axis += 1;
        }
    }
}

fn finish_groups(groups: BTreeMap<Rational, Vec<Mode>>, domain: &BoxDomain) -> Vec<EigenGroup> {
    let norm = domain.norm_constant();
    groups
        .into_iter()
        .map(|(r, mut modes)| {
            modes.sort();
            EigenGroup {
                eigenvalue: domain.eigen_factor() * r.to_f64().unwrap_or(f64::NAN),
                rational: r,
                modes,
                norm_constant: norm,
            }
        })
        .collect()
}

/// The `index`-th distinct eigenvalue (1-based) and its group.
pub fn group_by_index(domain: &BoxDomain, index: usize) -> Result<EigenGroup> {
    if index == 0 {
        return Err(Error::InvalidArgument("eigenvalue index is 1-based".into()));
    }
    let first = domain.eigen_factor()
        * domain
            .lengths_sq()
            .iter()
            .map(|r| 1.0 / r.to_f64().unwrap_or(f64::NAN))
            .sum::<f64>();
    let mut bound = first * 2.0;
    loop {
        let groups = enumerate_groups(domain, bound);
        if groups.len() >= index {
            return Ok(groups[index - 1].clone());
        }
        bound *= 1.5;
    }
}

/// Group containing the eigenvalue closest to `value` (must match within 1e-9 relative).
pub fn group_by_eigenvalue(domain: &BoxDomain, value: f64) -> Result<EigenGroup> {
    enumerate_groups(domain, value * (1.0 + 1e-9))
        .into_iter()
        .find(|g| (g.eigenvalue - value).abs() <= 1e-9 * value.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("{value} is not a Dirichlet eigenvalue of the box")))
}

/// `sin(kπx/L)` on one axis.
#[inline]
pub fn sine_factor(k: u32, length: f64, x: f64) -> f64 {
    (f64::from(k) * PI * x / length).sin()
}

/// Normalized eigenfunction `∏ sqrt(2/L_j) sin(k_j π x_j / L_j)`.
pub fn eval_eigenfunction(mode: &Mode, domain: &BoxDomain, point: &[f64]) -> Result<f64> {
    check_dim(mode, domain)?;
    if point.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: point.len() });
    }
    if !domain.contains(point) {
        return Err(Error::OutsideDomain(point.to_vec()));
    }
    Ok(eval_unchecked(mode, domain, point))
}

pub(crate) fn eval_unchecked(mode: &Mode, domain: &BoxDomain, point: &[f64]) -> f64 {
    domain.norm_constant()
        * mode
            .k
            .iter()
            .zip(domain.lengths())
            .zip(point)
            .map(|((&k, &l), &x)| sine_factor(k, l, x))
            .product::<f64>()
}
