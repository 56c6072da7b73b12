//! Branch construction by Lyapunov–Schmidt reduction on a Galerkin truncation.
//!
//! A branch point is `u = y + ε (u_lead + Σ α_j u_j)` with `y ⟂ V`. The
//! complement part solves `y = (λ − PL)^{-1}[η P(|u|^σ u)]` by Picard
//! iteration; the eigenspace part is the `p` complex equations
//! `μ c_j = η ∫ |w|^σ w u_j`, `w = u/ε`, `μ = (λ − λ̃)/ε^σ`, solved by Newton
//! for `(μ, α)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::alpha::{eval_p, AlphaVector};
use crate::coupling::{MomentModel, C64};
use crate::error::{Error, Result};
use crate::galerkin::{coeff_norm, GalerkinSpace};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReductionOptions {
    /// Relative change between Picard iterates that counts as converged.
    pub picard_tol: f64,
    pub picard_max_iterations: usize,
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
    /// Smallest admissible `|λ − λ_k|` over complement modes.
    pub resolvent_floor: f64,
    /// Maximum allowed Galerkin residual of an accepted sample.
    pub pde_tol: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            picard_tol: 1e-12,
            picard_max_iterations: 200,
            newton_tol: 1e-11,
            newton_max_iterations: 30,
            resolvent_floor: 1e-8,
            pde_tol: 1e-9,
        }
    }
}

/// One solution of the reduced equations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub eps: f64,
    pub lambda: C64,
    pub alpha: AlphaVector,
    /// Full coefficient vector of `y`; group entries are exactly zero.
    pub y: Vec<C64>,
    pub eta: C64,
    pub sigma: f64,
}

impl ReducedState {
    /// Coefficients of `u = y + ε u_A`.
    pub fn field(&self, space: &GalerkinSpace) -> Vec<C64> {
        let mut u = self.y.clone();
        for (&i, c) in space.group_indices().iter().zip(self.alpha.coefficients()) {
            u[i] += c * self.eps;
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSample {
    pub state: ReducedState,
    pub pde_residual: f64,
    pub y_norm: f64,
}

/// Galerkin residual `‖(λ − λ_k) u_k − η (|u|^σ u)_k‖` of the bound-state equation.
pub fn pde_residual(u: &[C64], lambda: C64, eta: C64, sigma: f64, space: &GalerkinSpace) -> f64 {
    let n = space.nonlinear_projection(u, sigma);
    let r: Vec<C64> = u
        .iter()
        .zip(&n)
        .zip(space.eigenvalues())
        .map(|((u, n), &lk)| (lambda - lk) * u - eta * n)
        .collect();
    coeff_norm(&r)
}

/// Fixed point of `y = (λ − PL)^{-1}[η P(|y + Σ ε_j u_j|^σ (y + Σ ε_j u_j))]`.
pub fn solve_y(
    eps_coeffs: &[C64],
    lambda: C64,
    space: &GalerkinSpace,
    eta: C64,
    sigma: f64,
    opts: &ReductionOptions,
) -> Result<Vec<C64>> {
    if eps_coeffs.len() != space.group_indices().len() {
        return Err(Error::DimensionMismatch { expected: space.group_indices().len(), got: eps_coeffs.len() });
    }
    let resolvent: Vec<(usize, C64)> = space
        .complement()
        .iter()
        .map(|&k| (k, lambda - space.eigenvalues()[k]))
        .collect();
    let closest = resolvent.iter().map(|(_, d)| d.norm()).fold(f64::INFINITY, f64::min);
    if closest < opts.resolvent_floor {
        return Err(Error::ResolventSingular { distance: closest });
    }
    let base = space.embed_group(eps_coeffs);
    let base_norm = coeff_norm(&base);
    let mut y = vec![C64::new(0.0, 0.0); space.num_modes()];
    if base_norm == 0.0 {
        return Ok(y);
    }
    // rounding floor of the nonlinear term
    let floor = 1e-14 * eta.norm() * base_norm.powf(sigma + 1.0);
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    for _ in 0..opts.picard_max_iterations {
        let u: Vec<C64> = base.iter().zip(&y).map(|(b, y)| b + y).collect();
        let n = space.nonlinear_projection(&u, sigma);
        let mut next = vec![C64::new(0.0, 0.0); space.num_modes()];
        for &(k, d) in &resolvent {
            next[k] = eta * n[k] / d;
        }
        let change = y.iter().zip(&next).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let size = coeff_norm(&next);
        y = next;
        if !change.is_finite() {
            break;
        }
        if change <= opts.picard_tol * size || change <= floor {
            return Ok(y);
        }
        if change > last_change {
            growth += 1;
            if growth >= 3 {
                return Err(Error::NonContraction { iterations: opts.picard_max_iterations, last_change: change });
            }
        }
        last_change = change;
    }
    Err(Error::NonContraction { iterations: opts.picard_max_iterations, last_change })
}

/// Residual of the eigenspace equations in the scaled unknowns `(μ, α)`.
struct ReducedProblem<'a> {
    space: &'a GalerkinSpace,
    eps: f64,
    eta: C64,
    sigma: f64,
    lead: usize,
    opts: &'a ReductionOptions,
}

impl ReducedProblem<'_> {
    fn unpack(&self, z: &DVector<f64>) -> (C64, AlphaVector) {
        let mu = C64::new(z[0], z[1]);
        let n = (z.len() - 2) / 2;
        let alpha = (0..n).map(|r| C64::new(z[2 + 2 * r], z[3 + 2 * r])).collect();
        (mu, AlphaVector::new(self.lead, alpha))
    }

    fn lambda(&self, mu: C64) -> C64 {
        self.space.group_eigenvalue() + mu * self.eps.powf(self.sigma)
    }

    fn solve(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Vec<C64>)> {
        let (mu, alpha) = self.unpack(z);
        let c = alpha.coefficients();
        let eps_coeffs: Vec<C64> = c.iter().map(|c| c * self.eps).collect();
        let y = solve_y(&eps_coeffs, self.lambda(mu), self.space, self.eta, self.sigma, self.opts)?;
        let mut u = y.clone();
        for (&i, e) in self.space.group_indices().iter().zip(&eps_coeffs) {
            u[i] += e;
        }
        let scale = self.eps.powf(self.sigma + 1.0);
        let moments: Vec<C64> = self
            .space
            .extract_group(&self.space.nonlinear_projection(&u, self.sigma))
            .into_iter()
            .map(|m| m / scale)
            .collect();
        let mut h = DVector::zeros(z.len());
        for (j, (cj, mj)) in c.iter().zip(&moments).enumerate() {
            let r = mu * cj - self.eta * mj;
            // lead equation first, then the α equations in chart order
            let row = if j == self.lead { 0 } else if j < self.lead { j + 1 } else { j };
            h[2 * row] = r.re;
            h[2 * row + 1] = r.im;
        }
        Ok((h, y))
    }
}

fn newton_reduced(problem: &ReducedProblem<'_>, mut z: DVector<f64>) -> Result<(DVector<f64>, Vec<C64>)> {
    let opts = problem.opts;
    let (mut h, mut y) = problem.solve(&z)?;
    for _ in 0..opts.newton_max_iterations {
        if h.amax() < opts.newton_tol {
            return Ok((z, y));
        }
        let n = z.len();
        let mut jac = DMatrix::zeros(n, n);
        for col in 0..n {
            let step = 1e-7 * z[col].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += step;
            zm[col] -= step;
            let diff = (problem.solve(&zp)?.0 - problem.solve(&zm)?.0) / (2.0 * step);
            jac.set_column(col, &diff);
        }
        let dz = jac.lu().solve(&(-&h)).ok_or_else(|| {
            Error::NumericalFault("singular reduced Jacobian (degenerate seed?)".into())
        })?;
        let phi0 = h.norm_squared();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let zt = &z + &dz * t;
            if let Ok((ht, yt)) = problem.solve(&zt) {
                if ht.norm_squared() < phi0 || ht.amax() < opts.newton_tol {
                    z = zt;
                    h = ht;
                    y = yt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if h.amax() < opts.newton_tol {
        Ok((z, y))
    } else {
        Err(Error::NonConvergence { iterations: opts.newton_max_iterations, residual: h.amax() })
    }
}

/// Leading-order `λ(ε) = λ̃ + η ε^σ ∫ |u_A|^σ u_A u_lead`.
pub fn leading_order_lambda(model: &dyn MomentModel, alpha: &AlphaVector, eps: f64, lambda0: f64, eta: C64) -> C64 {
    let m = model.moments(&alpha.coefficients());
    lambda0 + eta * eps.powf(model.sigma()) * m[alpha.lead]
}

/// Solves the full reduced system at fixed `ε`, starting from `(lambda_guess, seed)`.
pub fn solve_reduced(
    eps: f64,
    seed: &AlphaVector,
    lambda_guess: C64,
    space: &GalerkinSpace,
    eta: C64,
    sigma: f64,
    opts: &ReductionOptions,
) -> Result<ReducedState> {
    if seed.p() != space.group_indices().len() {
        return Err(Error::DimensionMismatch { expected: space.group_indices().len(), got: seed.p() });
    }
    if eps < 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be non-negative, got {eps}")));
    }
    let lambda0 = space.group_eigenvalue();
    if eps == 0.0 {
        return Ok(ReducedState {
            eps,
            lambda: C64::new(lambda0, 0.0),
            alpha: seed.clone(),
            y: vec![C64::new(0.0, 0.0); space.num_modes()],
            eta,
            sigma,
        });
    }
    let problem = ReducedProblem { space, eps, eta, sigma, lead: seed.lead, opts };
    let mu0 = (lambda_guess - lambda0) / eps.powf(sigma);
    let mut z0 = DVector::zeros(2 * seed.p());
    z0[0] = mu0.re;
    z0[1] = mu0.im;
    for (r, a) in seed.alpha.iter().enumerate() {
        z0[2 + 2 * r] = a.re;
        z0[3 + 2 * r] = a.im;
    }
    let (z, y) = newton_reduced(&problem, z0)?;
    let (mu, alpha) = problem.unpack(&z);
    Ok(ReducedState { eps, lambda: problem.lambda(mu), alpha, y, eta, sigma })
}

fn sample_from(state: ReducedState, space: &GalerkinSpace) -> BranchSample {
    let u = state.field(space);
    let res = pde_residual(&u, state.lambda, state.eta, state.sigma, space);
    let y_norm = coeff_norm(&state.y);
    BranchSample { state, pde_residual: res, y_norm }
}

/// A traced branch; `aborted` carries the failure that stopped continuation early.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    pub samples: Vec<BranchSample>,
    pub aborted: Option<String>,
}

/// Continuation in `ε` from `eps_max/steps` to `eps_max` with warm starts; a
/// failed step is halved up to five times before giving up.
#[allow(clippy::too_many_arguments)]
pub fn trace_branch(
    seed: &AlphaVector,
    model: &dyn MomentModel,
    eps_max: f64,
    steps: usize,
    space: &GalerkinSpace,
    eta: C64,
    sigma: f64,
    opts: &ReductionOptions,
) -> Result<BranchTrace> {
    if steps == 0 || !(eps_max > 0.0) {
        return Err(Error::InvalidArgument("need eps_max > 0 and at least one step".into()));
    }
    let h = eps_max / steps as f64;
    let lambda0 = space.group_eigenvalue();
    let mut samples: Vec<BranchSample> = Vec::with_capacity(steps);
    let mut eps_prev = 0.0;
    let mut alpha_prev = seed.clone();
    let mut mu_prev = (leading_order_lambda(model, seed, 1.0, lambda0, eta) - lambda0).to_owned();
    for i in 1..=steps {
        let target = h * i as f64;
        while eps_prev < target * (1.0 - 1e-12) {
            let mut step = target - eps_prev;
            let mut result = None;
            let mut last_err = None;
            for _ in 0..=5 {
                let eps = eps_prev + step;
                let guess = lambda0 + mu_prev * eps.powf(sigma);
                match solve_reduced(eps, &alpha_prev, guess, space, eta, sigma, opts) {
                    Ok(state) => {
                        result = Some(state);
                        break;
                    }
                    Err(e) => {
                        last_err = Some(e);
                        step *= 0.5;
                    }
                }
            }
            let Some(state) = result else {
                let reason = last_err.map(|e| e.to_string()).unwrap_or_default();
                return Ok(BranchTrace { samples, aborted: Some(format!("eps = {eps_prev:.6e}: {reason}")) });
            };
            eps_prev = state.eps;
            alpha_prev = state.alpha.clone();
            mu_prev = (state.lambda - lambda0) / state.eps.powf(sigma);
            if eps_prev >= target * (1.0 - 1e-12) {
                samples.push(sample_from(state, space));
            }
        }
    }
    Ok(BranchTrace { samples, aborted: None })
}

/// Fit of the normalized limit of a branch as `ε → 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitReport {
    /// Extrapolated coefficients in the lead chart.
    pub alpha: AlphaVector,
    /// Chart coefficients at the smallest sampled `ε`.
    pub alpha_smallest: AlphaVector,
    pub p_residual: f64,
    /// Largest `|ũ|` on the grid over all samples (1 by construction).
    pub sup_norm_normalized: f64,
    /// Limit of `c` in `ũ → c u_A`.
    pub c: f64,
    /// Extrapolated `(λ − λ̃)/‖u‖_∞^σ`.
    pub rate: C64,
    /// `η c^σ ∫|u_A|^{σ+2} / ∫|u_A|²`.
    pub rate_expected: C64,
    pub rate_rel_error: f64,
}

/// Least-squares intercept of `values` against powers of `x` up to `degree`.
fn extrapolate(x: &[f64], values: &[C64], degree: usize) -> C64 {
    let n = x.len();
    let d = degree.min(n - 1);
    let a = DMatrix::from_fn(n, d + 1, |i, j| x[i].powi(j as i32));
    let solve = |rhs: DVector<f64>| -> f64 {
        let qr = a.clone().qr();
        let qtb = qr.q().transpose() * rhs;
        qr.r().solve_upper_triangular(&qtb).map(|s| s[0]).unwrap_or(f64::NAN)
    };
    let re = solve(DVector::from_iterator(n, values.iter().map(|v| v.re)));
    let im = solve(DVector::from_iterator(n, values.iter().map(|v| v.im)));
    C64::new(re, im)
}

/// Recovers the limit direction of a traced branch and checks it against the
/// reduced system and the `λ`-rate.
pub fn verify_branch_limit(
    samples: &[BranchSample],
    space: &GalerkinSpace,
    model: &dyn MomentModel,
) -> Result<LimitReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument("need at least three samples".into()));
    }
    let mut ordered: Vec<&BranchSample> = samples.iter().collect();
    ordered.sort_by(|a, b| b.state.eps.total_cmp(&a.state.eps));
    let lead = ordered[0].state.alpha.lead;
    let sigma = ordered[0].state.sigma;
    let eta = ordered[0].state.eta;
    let lambda0 = space.group_eigenvalue();

    let mut xs = Vec::new();
    let mut alphas: Vec<AlphaVector> = Vec::new();
    let mut cs = Vec::new();
    let mut rates = Vec::new();
    let mut sup_max: f64 = 0.0;
    for s in &ordered {
        let u = s.state.field(space);
        let sup = space.sup_norm(&u);
        let normalized: Vec<C64> = u.iter().map(|z| z / sup).collect();
        sup_max = sup_max.max(space.sup_norm(&normalized));
        let chi = space.extract_group(&normalized);
        if coeff_norm(&chi) < 1e-8 {
            return Err(Error::NumericalFault("projection onto the eigenspace vanishes".into()));
        }
        let a = AlphaVector::from_coefficients(&chi, lead)
            .ok_or_else(|| Error::NumericalFault("lead coefficient of the limit vanishes".into()))?;
        xs.push(s.state.eps.powf(sigma));
        cs.push(C64::new(chi[lead].norm(), 0.0));
        rates.push((s.state.lambda - lambda0) / sup.powf(sigma));
        alphas.push(a);
    }
    let p1 = alphas[0].alpha.len();
    let alpha_lim = AlphaVector::new(
        lead,
        (0..p1)
            .map(|r| extrapolate(&xs, &alphas.iter().map(|a| a.alpha[r]).collect::<Vec<_>>(), 2))
            .collect(),
    );
    let c = extrapolate(&xs, &cs, 2).re;
    let rate = extrapolate(&xs, &rates, 2);
    let p_residual = eval_p(model, &alpha_lim)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ua = space.embed_group(&alpha_lim.coefficients());
    let num = space.integrate_abs(&ua, |r| r.powf(sigma + 2.0));
    let den = space.integrate_abs(&ua, |r| r * r);
    let rate_expected = eta * c.powf(sigma) * num / den;
    let rate_rel_error = (rate - rate_expected).norm() / rate_expected.norm().max(f64::MIN_POSITIVE);
    Ok(LimitReport {
        alpha: alpha_lim,
        alpha_smallest: alphas.last().cloned().expect("non-empty"),
        p_residual,
        sup_norm_normalized: sup_max,
        c,
        rate,
        rate_expected,
        rate_rel_error,
    })
}

/// Which existence/characterization/instability results cover `(σ, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applicability {
    /// `1 ≤ σ ≤ 4/(N−2)⁺`.
    pub existence: bool,
    /// `1 ≤ σ < 4/(N−2)⁺`.
    pub characterization: bool,
    /// `1 ≤ σ ≤ 2/(N−2)⁺`.
    pub instability: bool,
}

pub fn applicability(sigma: f64, dim: usize) -> Applicability {
    let crit = |num: f64| if dim <= 2 { f64::INFINITY } else { num / (dim as f64 - 2.0) };
    Applicability {
        existence: sigma >= 1.0 && sigma <= crit(4.0),
        characterization: sigma >= 1.0 && sigma < crit(4.0),
        instability: sigma >= 1.0 && sigma <= crit(2.0),
    }
}
