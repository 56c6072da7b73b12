//! Stability of bound states under the complex Ginzburg–Landau flow
//! `v_t = e^{iθ}Δv + e^{iγ}|v|^σ v + k v`.
//!
//! A bound state `u` of `λu + Δu = η|u|^σ u` rescaled to `φ = s u`,
//! `s = |η|^{1/σ}`, gives the standing wave `e^{iωt} φ` with
//! `k − iω = e^{iθ}λ` and `e^{iγ} = −e^{iθ} η/|η|`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::C64;
use crate::error::{Error, Result};
use crate::galerkin::{coeff_norm, GalerkinSpace};
use crate::reduction::{applicability, BranchSample};

/// Below this `|ω|` the standing wave is treated as stationary.
pub const OMEGA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CGLParams {
    pub theta: f64,
    pub gamma: f64,
    pub k: f64,
    pub sigma: f64,
    pub omega: f64,
    /// Factor `s` with `φ = s u`.
    pub amplitude_scale: f64,
}

impl CGLParams {
    pub fn period(&self) -> Result<f64> {
        if self.omega.abs() < OMEGA_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "omega = {:.3e}: stationary state has no period",
                self.omega
            )));
        }
        Ok(2.0 * std::f64::consts::PI / self.omega.abs())
    }

    /// Inverse of the parameter map: `λ = e^{−iθ}(k − iω)`.
    pub fn lambda(&self) -> C64 {
        C64::from_polar(1.0, -self.theta) * C64::new(self.k, -self.omega)
    }

    fn rotation(&self) -> C64 {
        C64::from_polar(1.0, self.theta)
    }

    fn nonlinear_phase(&self) -> C64 {
        C64::from_polar(1.0, self.gamma)
    }

    /// Exponent of the linear propagator on a mode with Dirichlet eigenvalue `λ_j`.
    pub fn linear_exponent(&self, lambda_j: f64) -> C64 {
        -self.rotation() * lambda_j + self.k
    }
}

pub fn params_from_branch(lambda: C64, eta: C64, theta: f64, sigma: f64) -> Result<CGLParams> {
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("|theta| must be below pi/2, got {theta}")));
    }
    if eta.norm() == 0.0 || !(sigma > 0.0) {
        return Err(Error::InvalidArgument("need eta != 0 and sigma > 0".into()));
    }
    let rotated = C64::from_polar(1.0, theta) * lambda;
    Ok(CGLParams {
        theta,
        gamma: theta + (-eta).arg(),
        k: rotated.re,
        sigma,
        omega: -rotated.im,
        amplitude_scale: eta.norm().powf(1.0 / sigma),
    })
}

/// Eigenvalues of `A = e^{iθ}Δ + k` on the truncation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSpectrum {
    pub eigenvalues: Vec<C64>,
    pub max_real_part: f64,
}

pub fn linear_spectrum_a(params: &CGLParams, space: &GalerkinSpace) -> LinearSpectrum {
    let eigenvalues: Vec<C64> = space.eigenvalues().iter().map(|&l| params.linear_exponent(l)).collect();
    let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    LinearSpectrum { eigenvalues, max_real_part }
}

/// Coefficients of the CGL profile `φ = s u` for a branch sample.
pub fn standing_profile(sample: &BranchSample, params: &CGLParams, space: &GalerkinSpace) -> Vec<C64> {
    sample.state.field(space).into_iter().map(|c| c * params.amplitude_scale).collect()
}

/// Pointwise factors of `B(t)v = b1 v + e^{2iωt} b2 v̄`.
struct Linearization<'a> {
    space: &'a GalerkinSpace,
    b1: Vec<C64>,
    b2: Vec<C64>,
    omega: f64,
}

impl<'a> Linearization<'a> {
    fn new(profile: &[C64], params: &CGLParams, space: &'a GalerkinSpace) -> Self {
        let s = params.sigma;
        let g = params.nonlinear_phase();
        let grid = space.to_grid(profile);
        let b1 = grid.iter().map(|z| g * (0.5 * (s + 2.0)) * z.norm().powf(s)).collect();
        // u^{1+σ/2} ū^{σ/2−1} = |u|^{σ−2} u², set to zero at exact zeros
        let b2 = grid
            .iter()
            .map(|z| {
                let r = z.norm();
                if r == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    g * (0.5 * s) * r.powf(s - 2.0) * z * z
                }
            })
            .collect();
        Self { space, b1, b2, omega: params.omega }
    }

    fn apply(&self, t: f64, w: &[C64]) -> Vec<C64> {
        let rot = C64::from_polar(1.0, 2.0 * self.omega * t);
        let grid = self.space.to_grid(w);
        let out: Vec<C64> = grid
            .iter()
            .zip(&self.b1)
            .zip(&self.b2)
            .map(|((v, b1), b2)| b1 * v + rot * b2 * v.conj())
            .collect();
        self.space.from_grid(&out)
    }
}

/// One Lawson (integrating-factor) RK4 step for `w' = a ⊙ w + f(t, w)`.
fn lawson_step(
    w: &[C64],
    t: f64,
    h: f64,
    half: &[C64],
    full: &[C64],
    f: &dyn Fn(f64, &[C64]) -> Vec<C64>,
) -> Vec<C64> {
    let n = w.len();
    let k1 = f(t, w);
    let a: Vec<C64> = (0..n).map(|i| half[i] * (w[i] + 0.5 * h * k1[i])).collect();
    let k2 = f(t + 0.5 * h, &a);
    let b: Vec<C64> = (0..n).map(|i| half[i] * w[i] + 0.5 * h * k2[i]).collect();
    let k3 = f(t + 0.5 * h, &b);
    let c: Vec<C64> = (0..n).map(|i| full[i] * w[i] + h * half[i] * k3[i]).collect();
    let k4 = f(t + h, &c);
    (0..n)
        .map(|i| full[i] * w[i] + h / 6.0 * (full[i] * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

fn propagators(params: &CGLParams, space: &GalerkinSpace, h: f64) -> (Vec<C64>, Vec<C64>) {
    let a: Vec<C64> = space.eigenvalues().iter().map(|&l| params.linear_exponent(l)).collect();
    (a.iter().map(|z| (z * 0.5 * h).exp()).collect(), a.iter().map(|z| (z * h).exp()).collect())
}

/// Stacks complex coefficients as `[Re w_0, Im w_0, Re w_1, …]`.
fn to_real(w: &[C64]) -> Vec<f64> {
    w.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn sorted_by_modulus(mut mu: Vec<C64>) -> Vec<C64> {
    mu.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    mu
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub multipliers: Vec<C64>,
    pub max_modulus: f64,
    pub matrix_dim: usize,
    pub period: f64,
    pub steps: usize,
    /// `‖U₀ − S(T)‖₂` on the truncation.
    pub perturbation_norm: f64,
    /// Relative change of `max|μ|` when the step is halved, if checked.
    pub step_change: Option<f64>,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyOptions {
    /// Time steps per period.
    pub steps: usize,
    /// Repeat with half the step and require this relative agreement on `max|μ|`.
    pub step_guard: Option<f64>,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self { steps: 2048, step_guard: Some(1e-6) }
    }
}

/// Exact linear period map `S(T)` as a real matrix.
pub fn linear_period_map(params: &CGLParams, space: &GalerkinSpace, period: f64) -> DMatrix<f64> {
    let n = space.num_modes();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (j, &l) in space.eigenvalues().iter().enumerate() {
        let e = (params.linear_exponent(l) * period).exp();
        m[(2 * j, 2 * j)] = e.re;
        m[(2 * j, 2 * j + 1)] = -e.im;
        m[(2 * j + 1, 2 * j)] = e.im;
        m[(2 * j + 1, 2 * j + 1)] = e.re;
    }
    m
}

fn monodromy_matrix(profile: &[C64], params: &CGLParams, space: &GalerkinSpace, steps: usize) -> Result<(DMatrix<f64>, f64)> {
    let period = params.period()?;
    let n = space.num_modes();
    let h = period / steps as f64;
    let (half, full) = propagators(params, space, h);
    let lin = Linearization::new(profile, params, space);
    let f = |t: f64, w: &[C64]| lin.apply(t, w);
    let columns: Vec<Vec<f64>> = (0..2 * n)
        .into_par_iter()
        .map(|col| {
            let mut w = vec![C64::new(0.0, 0.0); n];
            w[col / 2] = if col % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
            for s in 0..steps {
                w = lawson_step(&w, s as f64 * h, h, &half, &full, &f);
            }
            to_real(&w)
        })
        .collect();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFault("monodromy matrix is not finite".into()));
    }
    Ok((m, period))
}

/// Floquet multipliers of the linearization about `e^{iωt} φ` over one period.
pub fn monodromy(sample: &BranchSample, params: &CGLParams, space: &GalerkinSpace, opts: &MonodromyOptions) -> Result<MonodromyResult> {
    let profile = standing_profile(sample, params, space);
    monodromy_of_profile(&profile, params, space, opts)
}

pub fn monodromy_of_profile(
    profile: &[C64],
    params: &CGLParams,
    space: &GalerkinSpace,
    opts: &MonodromyOptions,
) -> Result<MonodromyResult> {
    if opts.steps == 0 {
        return Err(Error::InvalidArgument("monodromy needs at least one step".into()));
    }
    let (matrix, period) = monodromy_matrix(profile, params, space, opts.steps)?;
    let multipliers = sorted_by_modulus(matrix.complex_eigenvalues().iter().copied().collect());
    let max_modulus = multipliers.first().map(|z| z.norm()).unwrap_or(0.0);
    let step_change = match opts.step_guard {
        Some(tol) => {
            let (fine, _) = monodromy_matrix(profile, params, space, 2 * opts.steps)?;
            let fine_max = fine.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let change = (fine_max - max_modulus).abs() / max_modulus.max(1.0);
            if change > tol {
                return Err(Error::NonConvergence { iterations: 2 * opts.steps, residual: change });
            }
            Some(change)
        }
        None => None,
    };
    let perturbation_norm = (&matrix - linear_period_map(params, space, period)).singular_values().max();
    Ok(MonodromyResult {
        max_modulus,
        matrix_dim: matrix.nrows(),
        multipliers,
        period,
        steps: opts.steps,
        perturbation_norm,
        step_change,
        matrix,
    })
}

/// Eigenvalues of the autonomous linearization `A + B` (stationary states).
pub fn stationary_spectrum(profile: &[C64], params: &CGLParams, space: &GalerkinSpace) -> Vec<C64> {
    let n = space.num_modes();
    let lin = Linearization::new(profile, params, space);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let mut w = vec![C64::new(0.0, 0.0); n];
        w[col / 2] = if col % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let mut out = lin.apply(0.0, &w);
        for (j, &l) in space.eigenvalues().iter().enumerate() {
            out[j] += params.linear_exponent(l) * w[j];
        }
        for (r, v) in to_real(&out).into_iter().enumerate() {
            m[(r, col)] = v;
        }
    }
    sorted_by_modulus(m.complex_eigenvalues().iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub dt: f64,
    /// Multiplies the nonlinear term; 0 gives the linear flow.
    pub nonlinear_coefficient: f64,
    /// Sup-norm above which the run is stopped as a blow-up.
    pub ceiling: f64,
    /// Record diagnostics every this many steps.
    pub record_every: usize,
    /// Stop once the orbit distance exceeds this value.
    pub stop_distance: Option<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { dt: 1e-3, nonlinear_coefficient: 1.0, ceiling: 1e6, record_every: 1, stop_distance: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub l2_norm: f64,
    pub sup_norm: f64,
    /// `inf_{|z|=1} ‖v(t) − z e^{iωt} φ‖`, when a reference profile is given.
    pub orbit_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_state: Vec<C64>,
    pub final_time: f64,
    pub blew_up: bool,
}

/// Distance from `v` to the gauge orbit `{z φ : |z| = 1}`.
pub fn orbit_distance(v: &[C64], phi: &[C64]) -> f64 {
    let inner: C64 = v.iter().zip(phi).map(|(a, b)| a * b.conj()).sum();
    let nv = coeff_norm(v);
    let np = coeff_norm(phi);
    (nv * nv + np * np - 2.0 * inner.norm()).max(0.0).sqrt()
}

/// Integrates the truncated CGL equation with Lawson RK4.
pub fn simulate_cgl(
    initial: &[C64],
    params: &CGLParams,
    space: &GalerkinSpace,
    t_end: f64,
    reference: Option<&[C64]>,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    if initial.len() != space.num_modes() {
        return Err(Error::DimensionMismatch { expected: space.num_modes(), got: initial.len() });
    }
    if !(opts.dt > 0.0) || !(t_end >= 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidArgument("need dt > 0, t_end >= 0, record_every >= 1".into()));
    }
    // the exponential integrator is exact on A; only B's size limits dt
    let steps = (t_end / opts.dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let (half, full) = propagators(params, space, h);
    let g = params.nonlinear_phase() * opts.nonlinear_coefficient;
    let sigma = params.sigma;
    let f = |_t: f64, w: &[C64]| -> Vec<C64> {
        if g == C64::new(0.0, 0.0) {
            return vec![C64::new(0.0, 0.0); w.len()];
        }
        space.nonlinear_projection(w, sigma).into_iter().map(|z| g * z).collect()
    };
    let record = |t: f64, v: &[C64]| TrajectoryPoint {
        t,
        l2_norm: coeff_norm(v),
        sup_norm: space.sup_norm(v),
        orbit_distance: reference.map(|phi| orbit_distance(v, phi)),
    };
    let mut v = initial.to_vec();
    let mut points = vec![record(0.0, &v)];
    let mut blew_up = false;
    let mut t = 0.0;
    for s in 0..steps {
        v = lawson_step(&v, t, h, &half, &full, &f);
        t = (s + 1) as f64 * h;
        let last = (s + 1) % opts.record_every == 0 || s + 1 == steps;
        let sup = space.sup_norm(&v);
        if !sup.is_finite() || sup > opts.ceiling {
            blew_up = true;
            points.push(record(t, &v));
            break;
        }
        if last {
            let p = record(t, &v);
            let stop = matches!((opts.stop_distance, p.orbit_distance), (Some(lim), Some(d)) if d > lim);
            points.push(p);
            if stop {
                break;
            }
        }
    }
    Ok(Trajectory { points, final_state: v, final_time: t, blew_up })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Unstable,
    NoInstabilityDetected,
    OutsideTheorem,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Unstable => "unstable",
            Verdict::NoInstabilityDetected => "no instability detected",
            Verdict::OutsideTheorem => "outside Thm 1.3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub perturbation: f64,
    pub seed: u64,
    pub monodromy: MonodromyOptions,
    /// Simulation steps per period.
    pub sim_steps_per_period: usize,
    /// Simulation horizon in periods.
    pub max_periods: f64,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            perturbation: 1e-6,
            seed: 0x5eed,
            monodromy: MonodromyOptions::default(),
            sim_steps_per_period: 2048,
            max_periods: 4.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub label: String,
    pub first_eigenvalue: bool,
    /// Whether `σ ≤ 2/(N−2)⁺`.
    pub sigma_in_range: bool,
    pub max_real_part_a: f64,
    /// Width of the `O(ε^σ)` band around 0.
    pub band: f64,
    pub max_multiplier: Option<f64>,
    pub floquet_rate: Option<f64>,
    pub measured_rate: Option<f64>,
    pub rate_rel_error: Option<f64>,
    pub signals_agree: bool,
    pub notes: Vec<String>,
}

/// Least-squares slope of `ln d` against `t` over the window `[lo, hi]` of `d`.
fn growth_rate(points: &[TrajectoryPoint], lo: f64, hi: f64) -> Option<f64> {
    let window: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.orbit_distance.map(|d| (p.t, d)))
        .skip_while(|&(_, d)| d < lo)
        .take_while(|&(_, d)| d <= hi)
        .collect();
    if window.len() < 8 {
        return None;
    }
    let n = window.len() as f64;
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = window.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let cov: f64 = window.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let var: f64 = window.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (var > 0.0).then(|| cov / var)
}

/// Combines the spectrum of `A`, the Floquet multipliers and a perturbed
/// nonlinear run into an instability verdict.
pub fn instability_verdict(
    sample: &BranchSample,
    params: &CGLParams,
    space: &GalerkinSpace,
    opts: &VerdictOptions,
) -> Result<StabilityReport> {
    let spectrum = linear_spectrum_a(params, space);
    let lambda0 = space.group_eigenvalue();
    let lowest = space.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let first_eigenvalue = (lambda0 - lowest).abs() <= 1e-9 * lowest.abs().max(1.0);
    let sigma_in_range = applicability(params.sigma, space.dim()).instability;
    let band = 10.0 * (sample.state.lambda - lambda0).norm().max(f64::EPSILON);
    let mut notes = Vec::new();
    if !sigma_in_range {
        notes.push(format!("sigma = {} exceeds 2/(N-2)+ for N = {}", params.sigma, space.dim()));
    }
    let mut report = StabilityReport {
        verdict: Verdict::OutsideTheorem,
        label: Verdict::OutsideTheorem.label().to_string(),
        first_eigenvalue,
        sigma_in_range,
        max_real_part_a: spectrum.max_real_part,
        band,
        max_multiplier: None,
        floquet_rate: None,
        measured_rate: None,
        rate_rel_error: None,
        signals_agree: false,
        notes,
    };
    if first_eigenvalue {
        report.notes.push("branch bifurcates from the first eigenvalue".into());
        return Ok(report);
    }
    let spectral_signal = spectrum.max_real_part > band;
    let profile = standing_profile(sample, params, space);

    let (floquet_signal, rate, horizon, dt) = match params.period() {
        Ok(period) => {
            let mono = monodromy_of_profile(&profile, params, space, &opts.monodromy)?;
            report.max_multiplier = Some(mono.max_modulus);
            let rate = mono.max_modulus.ln() / period;
            (mono.max_modulus > 1.0, rate, opts.max_periods * period, period / opts.sim_steps_per_period as f64)
        }
        Err(_) => {
            report.notes.push("stationary state: autonomous linearization used".into());
            let ev = stationary_spectrum(&profile, params, space);
            let rate = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let horizon = opts.max_periods * 2.0 * std::f64::consts::PI / rate.abs().max(1e-3);
            (rate > 0.0, rate, horizon, horizon / (opts.max_periods * opts.sim_steps_per_period as f64))
        }
    };
    report.floquet_rate = Some(rate);

    let size = coeff_norm(&profile);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut noise: Vec<C64> = (0..profile.len())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let scale = opts.perturbation / coeff_norm(&noise);
    noise.iter_mut().for_each(|z| *z *= scale);
    let initial: Vec<C64> = profile.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let sim = SimulationOptions {
        dt,
        nonlinear_coefficient: 1.0,
        ceiling: 1e6 * space.sup_norm(&profile).max(1.0),
        record_every: 4,
        stop_distance: Some(0.1 * size),
    };
    let traj = simulate_cgl(&initial, params, space, horizon, Some(&profile), &sim)?;
    let start = traj.points[0].orbit_distance.unwrap_or(opts.perturbation);
    let measured = growth_rate(&traj.points, 10.0 * start, 0.1 * size);
    report.measured_rate = measured;
    let rel = measured.map(|m| (m - rate).abs() / rate.abs().max(f64::MIN_POSITIVE));
    report.rate_rel_error = rel;
    let nonlinear_signal = measured.is_some_and(|m| m > 0.0);
    report.signals_agree = spectral_signal == floquet_signal && floquet_signal == nonlinear_signal;
    report.verdict = if spectral_signal && floquet_signal && nonlinear_signal {
        Verdict::Unstable
    } else {
        Verdict::NoInstabilityDetected
    };
    report.label = report.verdict.label().to_string();
    Ok(report)
}
