//! Run configuration: one JSON document.
//!
//! Rationals are strings `"p/q"`, complex numbers `[re, im]` pairs, and the box
//! scale is either `"pi"` or a positive number, so that
//! `L_j = scale · sqrt(lengths_sq[j])`.

use std::path::Path;

use bifurc_core::alpha::{SolveOptions, StartGrid};
use bifurc_core::coupling::C64;
use bifurc_core::galerkin::GalerkinSettings;
use bifurc_core::reduction::ReductionOptions;
use bifurc_core::spectral::{BoxDomain, Rational};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scale {
    Named(String),
    Value(f64),
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Named("pi".into())
    }
}

impl Scale {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Scale::Named(s) if s.eq_ignore_ascii_case("pi") => Ok(std::f64::consts::PI),
            Scale::Named(s) => s
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("scale must be \"pi\" or a number, got {s:?}"))),
            Scale::Value(v) => Ok(*v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Box {
        lengths_sq: Vec<String>,
        #[serde(default)]
        scale: Scale,
    },
    Interval {
        length_sq: String,
        #[serde(default)]
        scale: Scale,
    },
    Disk,
}

fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.trim()
        .parse::<Rational>()
        .map_err(|_| CliError::Config(format!("not a rational \"p/q\": {s:?}")))
}

impl DomainSpec {
    /// The box, or `None` for the disk.
    pub fn to_box(&self) -> Result<Option<BoxDomain>, CliError> {
        let (lengths, scale) = match self {
            DomainSpec::Box { lengths_sq, scale } => (lengths_sq.clone(), scale),
            DomainSpec::Interval { length_sq, scale } => (vec![length_sq.clone()], scale),
            DomainSpec::Disk => return Ok(None),
        };
        let r = lengths.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(Some(BoxDomain::new(r, scale.value()?)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSelector {
    /// 1-based index among distinct eigenvalues.
    Index(usize),
    Eigenvalue(f64),
}

impl Default for GroupSelector {
    fn default() -> Self {
        GroupSelector::Index(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub start_range: f64,
    pub start_step: f64,
    pub real_only: bool,
    pub jitter: f64,
    pub residual_tol: f64,
    pub dedup_tol: f64,
    pub max_iterations: usize,
    pub degeneracy_threshold: f64,
    /// Quadrature nodes per axis; derived from dimension and `σ` when absent.
    pub quadrature_nodes: Option<usize>,
    pub quadrature_tol: f64,
    pub cutoff: usize,
    pub steps: usize,
    pub eps_max: Option<f64>,
    pub picard_tol: f64,
    pub newton_tol: f64,
    /// `ε` at which stability is assessed; the smallest branch sample when absent.
    pub stability_eps: Option<f64>,
    pub monodromy_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let grid = StartGrid::default();
        let solve = SolveOptions::default();
        let red = ReductionOptions::default();
        Self {
            start_range: grid.range,
            start_step: grid.step,
            real_only: grid.real_only,
            jitter: grid.jitter,
            residual_tol: solve.residual_tol,
            dedup_tol: solve.dedup_tol,
            max_iterations: solve.max_iterations,
            degeneracy_threshold: solve.degeneracy_threshold,
            quadrature_nodes: None,
            quadrature_tol: 1e-10,
            cutoff: GalerkinSettings::default().cutoff,
            steps: 10,
            eps_max: None,
            picard_tol: red.picard_tol,
            newton_tol: red.newton_tol,
            stability_eps: None,
            monodromy_steps: 2048,
        }
    }
}

impl SolverConfig {
    pub fn start_grid(&self, seed: u64) -> StartGrid {
        StartGrid { range: self.start_range, step: self.start_step, real_only: self.real_only, jitter: self.jitter, seed }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            residual_tol: self.residual_tol,
            dedup_tol: self.dedup_tol,
            max_iterations: self.max_iterations,
            degeneracy_threshold: self.degeneracy_threshold,
            ..SolveOptions::default()
        }
    }

    pub fn reduction_options(&self) -> ReductionOptions {
        ReductionOptions { picard_tol: self.picard_tol, newton_tol: self.newton_tol, ..ReductionOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub axes: [usize; 2],
    #[serde(default)]
    pub fixed: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodalConfig {
    /// Coefficients on the group modes; the seed selected by `--seed-id` otherwise.
    pub coefficients: Option<Vec<[f64; 2]>>,
    pub slice: Option<SliceSpec>,
    pub resolution: Option<usize>,
    pub pixels: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_eta")]
    pub eta: [f64; 2],
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub group: GroupSelector,
    /// Mode moved to the front of the group, e.g. `[5, 5]`.
    #[serde(default)]
    pub lead: Option<Vec<u32>>,
    /// Upper bound for `spectrum`.
    #[serde(default = "default_bound")]
    pub spectrum_bound: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nodal: NodalConfig,
}

fn default_sigma() -> f64 {
    2.0
}

fn default_eta() -> [f64; 2] {
    [1.0, 0.0]
}

fn default_bound() -> f64 {
    10.0
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_json(&text)?, text))
    }

    pub fn eta(&self) -> C64 {
        C64::new(self.eta[0], self.eta[1])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if self.eta[0] == 0.0 && self.eta[1] == 0.0 {
            return bad("eta must be nonzero");
        }
        if !(self.theta.abs() < std::f64::consts::FRAC_PI_2) {
            return bad("|theta| must be below pi/2");
        }
        let s = &self.solver;
        let positive = [
            s.start_range,
            s.start_step,
            s.residual_tol,
            s.dedup_tol,
            s.degeneracy_threshold,
            s.quadrature_tol,
            s.picard_tol,
            s.newton_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return bad("solver ranges and tolerances must be positive");
        }
        if s.max_iterations == 0 || s.cutoff == 0 || s.steps == 0 || s.monodromy_steps == 0 {
            return bad("iteration counts, cutoff and steps must be positive");
        }
        if !(s.jitter >= 0.0) || s.eps_max.is_some_and(|e| !(e > 0.0)) || s.stability_eps.is_some_and(|e| !(e > 0.0)) {
            return bad("jitter must be non-negative and eps values positive");
        }
        if let GroupSelector::Index(0) = self.group {
            return bad("group index is 1-based");
        }
        if let DomainSpec::Box { lengths_sq, .. } = &self.domain {
            if lengths_sq.is_empty() {
                return bad("box needs at least one length");
            }
        }
        self.domain.to_box()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_json(r#"{"domain": {"kind": "box", "lengths_sq": ["1", "3/5"], "scale": 1}}"#).unwrap();
        let b = c.domain.to_box().unwrap().unwrap();
        assert!((b.lengths()[1] - (0.6f64).sqrt()).abs() < 1e-15);
        assert_eq!(c.sigma, 2.0);
        assert_eq!(c.group, GroupSelector::Index(2));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"domain": {"kind": "box", "lengths_sq": ["1/0"]}}"#,
            r#"{"domain": {"kind": "box", "lengths_sq": ["x"]}}"#,
            r#"{"domain": {"kind": "disk"}, "theta": 2.0}"#,
            r#"{"domain": {"kind": "disk"}, "solver": {"residual_tol": 0}}"#,
            r#"{"domain": {"kind": "disk"}, "typo": 1}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_json(
            r#"{"domain": {"kind": "interval", "length_sq": "1"}, "eta": [0, 1], "group": {"eigenvalue": 4}}"#,
        )
        .unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
