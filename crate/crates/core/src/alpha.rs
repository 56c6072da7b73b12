//! The reduced system `P_m(α) = ∫ |u_A|^σ u_A (α_m u_lead − u_m) = 0` on an
//! eigenspace, with `u_A = u_lead + Σ α_j u_j`.
//!
//! Roots are stored in the chart where the lead coefficient is exactly 1. The
//! Jacobian is the real `(2p−2)×(2p−2)` one of `(Re P, Im P)` with respect to
//! `(Re α, Im α)`, since `|z|^σ z` is not holomorphic.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{MomentModel, QuarticTable, C64};
use crate::error::{Error, Result};

/// Coefficients `(α_j)_{j ≠ lead}` in group order, lead coefficient fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub lead: usize,
    pub alpha: Vec<C64>,
}

impl AlphaVector {
    pub fn new(lead: usize, alpha: Vec<C64>) -> Self {
        Self { lead, alpha }
    }

    pub fn zeros(p: usize, lead: usize) -> Self {
        Self { lead, alpha: vec![C64::new(0.0, 0.0); p.saturating_sub(1)] }
    }

    pub fn p(&self) -> usize {
        self.alpha.len() + 1
    }

    /// Group index of the `r`-th entry of `alpha`.
    pub fn group_index(&self, r: usize) -> usize {
        if r < self.lead {
            r
        } else {
            r + 1
        }
    }

    /// Full coefficient vector over the group basis.
    pub fn coefficients(&self) -> Vec<C64> {
        let mut c = Vec::with_capacity(self.p());
        c.extend_from_slice(&self.alpha[..self.lead]);
        c.push(C64::new(1.0, 0.0));
        c.extend_from_slice(&self.alpha[self.lead..]);
        c
    }

    /// Re-expresses `coeffs` in the chart of `lead`; `None` if that coefficient vanishes.
    pub fn from_coefficients(coeffs: &[C64], lead: usize) -> Option<Self> {
        let c0 = coeffs[lead];
        if c0.norm() < 1e-300 {
            return None;
        }
        let alpha = coeffs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != lead)
            .map(|(_, c)| c / c0)
            .collect();
        Some(Self { lead, alpha })
    }

    pub fn max_imag(&self) -> f64 {
        self.alpha.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn check_p(model: &dyn MomentModel, alpha: &AlphaVector) -> Result<()> {
    if alpha.p() != model.dim() || alpha.lead >= model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: alpha.p() });
    }
    Ok(())
}

/// `P_m(α)` for every `m ≠ lead`, in the order of `alpha.alpha`.
pub fn eval_p(model: &dyn MomentModel, alpha: &AlphaVector) -> Result<Vec<C64>> {
    check_p(model, alpha)?;
    let moments = model.moments(&alpha.coefficients());
    let lead_moment = moments[alpha.lead];
    Ok(alpha
        .alpha
        .iter()
        .enumerate()
        .map(|(r, a)| a * lead_moment - moments[alpha.group_index(r)])
        .collect())
}

/// Real Jacobian, interleaved `[Re, Im]` per component on both axes.
pub fn eval_real_jacobian(model: &dyn MomentModel, alpha: &AlphaVector) -> Result<DMatrix<f64>> {
    check_p(model, alpha)?;
    let c = alpha.coefficients();
    let moments = model.moments(&c);
    let d = model.derivatives(&c);
    let lead = alpha.lead;
    let n = alpha.alpha.len();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        let m = alpha.group_index(r);
        let am = alpha.alpha[r];
        for s in 0..n {
            let q = alpha.group_index(s);
            let mut holo = am * d.holo[lead][q] - d.holo[m][q];
            if r == s {
                holo += moments[lead];
            }
            let anti = am * d.anti[lead][q] - d.anti[m][q];
            let dx = holo + anti;
            let dy = C64::new(0.0, 1.0) * (holo - anti);
            jac[(2 * r, 2 * s)] = dx.re;
            jac[(2 * r + 1, 2 * s)] = dx.im;
            jac[(2 * r, 2 * s + 1)] = dy.re;
            jac[(2 * r + 1, 2 * s + 1)] = dy.im;
        }
    }
    Ok(jac)
}

/// Central-difference Jacobian of [`eval_p`], same layout as [`eval_real_jacobian`].
pub fn finite_difference_jacobian(model: &dyn MomentModel, alpha: &AlphaVector, h: f64) -> Result<DMatrix<f64>> {
    check_p(model, alpha)?;
    let n = alpha.alpha.len();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for s in 0..n {
        for (b, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
            let mut plus = alpha.clone();
            let mut minus = alpha.clone();
            plus.alpha[s] += dir;
            minus.alpha[s] -= dir;
            let fp = eval_p(model, &plus)?;
            let fm = eval_p(model, &minus)?;
            for r in 0..n {
                let diff = (fp[r] - fm[r]) / (2.0 * h);
                jac[(2 * r, 2 * s + b)] = diff.re;
                jac[(2 * r + 1, 2 * s + b)] = diff.im;
            }
        }
    }
    Ok(jac)
}

/// Analytic Jacobian, failing with a numerical fault when it disagrees with
/// central differences by more than `tolerance` (max entry, relative to the
/// largest entry when that exceeds 1).
pub fn checked_real_jacobian(model: &dyn MomentModel, alpha: &AlphaVector, tolerance: f64) -> Result<DMatrix<f64>> {
    let analytic = eval_real_jacobian(model, alpha)?;
    let fd = finite_difference_jacobian(model, alpha, 1e-6)?;
    let scale = analytic.amax().max(1.0);
    let err = (&analytic - &fd).amax() / scale;
    if err > tolerance {
        return Err(Error::NumericalFault(format!(
            "analytic and finite-difference Jacobians differ by {err:.3e}"
        )));
    }
    Ok(analytic)
}

/// Determinant after scaling every row to unit max-norm; rows at rounding
/// level relative to the whole matrix count as zero.
pub fn row_normalized_det(jac: &DMatrix<f64>) -> f64 {
    if jac.nrows() == 0 {
        return 1.0;
    }
    let floor = 1e-12 * jac.amax();
    let mut m = jac.clone();
    for mut row in m.row_iter_mut() {
        let s = row.amax();
        if s <= floor {
            return 0.0;
        }
        row /= s;
    }
    m.determinant()
}

/// Closed form of `P` for `σ = 2` from diagonal and pairwise quartic integrals:
/// `M_l = A|c_l|²c_l + Σ_{q≠l} B_ql (c_q² c̄_l + 2|c_q|² c_l)`.
pub fn closed_form_p_sigma2(alpha: &AlphaVector, table: &QuarticTable) -> Result<Vec<C64>> {
    if !table.cross_ok {
        return Err(Error::HypothesisViolated(
            "mixed quartic integrals of the group do not vanish".into(),
        ));
    }
    let p = table.pair.len();
    if alpha.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: alpha.p() });
    }
    let c = alpha.coefficients();
    let moment = |l: usize| -> C64 {
        let mut s = c[l] * c[l].norm_sqr() * table.a;
        for (q, cq) in c.iter().enumerate() {
            if q != l {
                s += table.pair[q][l] * (cq * cq * c[l].conj() + 2.0 * cq.norm_sqr() * c[l]);
            }
        }
        s
    };
    let lead_moment = moment(alpha.lead);
    Ok(alpha
        .alpha
        .iter()
        .enumerate()
        .map(|(r, a)| a * lead_moment - moment(alpha.group_index(r)))
        .collect())
}

/// Upper bound on the size of a start lattice.
pub const MAX_STARTS: usize = 2_000_000;

/// Lattice of Newton starting points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartGrid {
    /// Starts cover `[-range, range]` on each real (and imaginary) axis.
    pub range: f64,
    pub step: f64,
    pub real_only: bool,
    /// Uniform random offset of at most `jitter * step` per axis.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for StartGrid {
    fn default() -> Self {
        Self { range: 2.0, step: 0.5, real_only: false, jitter: 0.0, seed: 0 }
    }
}

impl StartGrid {
    pub fn real() -> Self {
        Self { real_only: true, ..Self::default() }
    }

    fn axis(&self) -> Vec<f64> {
        let n = (2.0 * self.range / self.step).round() as i64;
        (0..=n).map(|i| -self.range + i as f64 * self.step).collect()
    }

    /// Number of starts for `free` unknowns, `None` on overflow.
    pub fn count(&self, free: usize) -> Option<usize> {
        let per = self.axis().len();
        let per = if self.real_only { per } else { per * per };
        per.checked_pow(free as u32)
    }

    /// Starts for `free` complex unknowns.
    pub fn starts(&self, free: usize) -> Vec<Vec<C64>> {
        let axis = self.axis();
        let points: Vec<C64> = if self.real_only {
            axis.iter().map(|&x| C64::new(x, 0.0)).collect()
        } else {
            axis.iter().flat_map(|&x| axis.iter().map(move |&y| C64::new(x, y))).collect()
        };
        let mut out: Vec<Vec<C64>> = vec![Vec::new()];
        for _ in 0..free {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    points.iter().map(move |pt| {
                        let mut v = prefix.clone();
                        v.push(*pt);
                        v
                    })
                })
                .collect();
        }
        if self.jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let amp = self.jitter * self.step;
            for start in &mut out {
                for z in start.iter_mut() {
                    z.re += rng.gen_range(-amp..=amp);
                    if !self.real_only {
                        z.im += rng.gen_range(-amp..=amp);
                    }
                }
            }
        }
        out
    }
}

/// Newton and classification settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub residual_tol: f64,
    pub dedup_tol: f64,
    pub max_iterations: usize,
    pub degeneracy_threshold: f64,
    pub real_tol: f64,
    /// More distinct real roots than this flags a continuum.
    pub continuum_count: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            dedup_tol: 1e-6,
            max_iterations: 40,
            degeneracy_threshold: 1e-8,
            real_tol: 1e-8,
            continuum_count: 25,
        }
    }
}

/// A converged root of the reduced system with its classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSolution {
    pub alpha: AlphaVector,
    pub residual: f64,
    pub jacobian_det: f64,
    pub nondegenerate: bool,
    pub is_real: bool,
}

impl SeedSolution {
    /// Number of nonzero coefficients of `u_A` (lead included).
    pub fn support(&self, tol: f64) -> usize {
        1 + self.alpha.alpha.iter().filter(|a| a.norm() > tol).count()
    }
}

/// JSON record of a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub lead: usize,
    pub alpha_re: Vec<f64>,
    pub alpha_im: Vec<f64>,
    pub residual: f64,
    pub jacobian_det: f64,
    pub nondegenerate: bool,
    pub is_real: bool,
}

impl From<&SeedSolution> for SeedRecord {
    fn from(s: &SeedSolution) -> Self {
        Self {
            lead: s.alpha.lead,
            alpha_re: s.alpha.alpha.iter().map(|a| a.re).collect(),
            alpha_im: s.alpha.alpha.iter().map(|a| a.im).collect(),
            residual: s.residual,
            jacobian_det: s.jacobian_det,
            nondegenerate: s.nondegenerate,
            is_real: s.is_real,
        }
    }
}

impl From<&SeedRecord> for SeedSolution {
    fn from(r: &SeedRecord) -> Self {
        Self {
            alpha: AlphaVector::new(
                r.lead,
                r.alpha_re.iter().zip(&r.alpha_im).map(|(&re, &im)| C64::new(re, im)).collect(),
            ),
            residual: r.residual,
            jacobian_det: r.jacobian_det,
            nondegenerate: r.nondegenerate,
            is_real: r.is_real,
        }
    }
}

fn pack(alpha: &AlphaVector, free: &[usize]) -> DVector<f64> {
    DVector::from_iterator(2 * free.len(), free.iter().flat_map(|&r| [alpha.alpha[r].re, alpha.alpha[r].im]))
}

fn unpack(base: &AlphaVector, free: &[usize], x: &DVector<f64>) -> AlphaVector {
    let mut a = base.clone();
    for (i, &r) in free.iter().enumerate() {
        a.alpha[r] = C64::new(x[2 * i], x[2 * i + 1]);
    }
    a
}

fn restricted_residual(model: &dyn MomentModel, alpha: &AlphaVector, free: &[usize]) -> Result<DVector<f64>> {
    let p = eval_p(model, alpha)?;
    Ok(DVector::from_iterator(2 * free.len(), free.iter().flat_map(|&r| [p[r].re, p[r].im])))
}

fn restricted_jacobian(jac: &DMatrix<f64>, free: &[usize]) -> DMatrix<f64> {
    let idx: Vec<usize> = free.iter().flat_map(|&r| [2 * r, 2 * r + 1]).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| jac[(idx[i], idx[j])])
}

fn max_abs(p: &[C64]) -> f64 {
    p.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Damped Newton (Armijo backtracking on `‖P‖²`) over the `free` entries of
/// `start`; the remaining entries stay fixed. Returns the point and the
/// residual `max |P_m|` over all equations.
pub fn damped_newton(
    model: &dyn MomentModel,
    start: &AlphaVector,
    free: &[usize],
    opts: &SolveOptions,
) -> Result<Option<(AlphaVector, f64)>> {
    let mut alpha = start.clone();
    let mut x = pack(&alpha, free);
    let mut r = restricted_residual(model, &alpha, free)?;
    let mut polish = 0;
    for _ in 0..opts.max_iterations {
        let res = r.amax();
        if res < opts.residual_tol {
            polish += 1;
            if polish > 2 || res < 1e-15 {
                break;
            }
        }
        let jac = restricted_jacobian(&eval_real_jacobian(model, &alpha)?, free);
        let rhs = -&r;
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => match jac.svd(true, true).solve(&rhs, 1e-12) {
                Ok(s) => s,
                Err(_) => return Ok(None),
            },
        };
        let phi0 = r.norm_squared();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xt = &x + &step * t;
            let at = unpack(&alpha, free, &xt);
            let rt = restricted_residual(model, &at, free)?;
            if rt.norm_squared() <= phi0 * (1.0 - 1e-4 * t) || rt.amax() < opts.residual_tol * 1e-3 {
                x = xt;
                alpha = at;
                r = rt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if x.amax() > 1e6 {
            return Ok(None);
        }
    }
    let full = max_abs(&eval_p(model, &alpha)?);
    if full < opts.residual_tol {
        Ok(Some((alpha, full)))
    } else {
        Ok(None)
    }
}

/// Result of a multistart run in one chart.
#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub seeds: Vec<SeedSolution>,
    pub starts: usize,
    pub failed: usize,
    pub continuum_suspected: bool,
}

fn canonical_key(a: &AlphaVector) -> Vec<i64> {
    a.alpha
        .iter()
        .flat_map(|z| [(z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64])
        .collect()
}

/// Classifies a root: determinant of the row-normalized Jacobian restricted to `free`.
pub fn classify(
    model: &dyn MomentModel,
    alpha: AlphaVector,
    residual: f64,
    free: &[usize],
    opts: &SolveOptions,
) -> Result<SeedSolution> {
    let jac = restricted_jacobian(&eval_real_jacobian(model, &alpha)?, free);
    let det = row_normalized_det(&jac);
    let is_real = alpha.max_imag() < opts.real_tol;
    Ok(SeedSolution { alpha, residual, jacobian_det: det, nondegenerate: det.abs() > opts.degeneracy_threshold, is_real })
}

/// Damped Newton from every start of `grid` in the chart of `lead`, with the
/// coefficients of group indices `< lead` forced to zero when
/// `zero_before_lead` is set. Roots are deduplicated and sorted canonically.
pub fn multistart_solve(
    model: &dyn MomentModel,
    lead: usize,
    zero_before_lead: bool,
    grid: &StartGrid,
    opts: &SolveOptions,
) -> Result<MultistartResult> {
    let p = model.dim();
    if lead >= p {
        return Err(Error::InvalidArgument(format!("lead {lead} out of range for p = {p}")));
    }
    let base = AlphaVector::zeros(p, lead);
    let free: Vec<usize> = (0..p - 1).filter(|&r| !zero_before_lead || base.group_index(r) > lead).collect();
    match grid.count(free.len()) {
        Some(n) if n <= MAX_STARTS => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "start lattice for {} free unknowns exceeds {MAX_STARTS} points",
                free.len()
            )))
        }
    }
    let starts = grid.starts(free.len());
    let outcomes: Vec<Result<Option<(AlphaVector, f64)>>> = starts
        .par_iter()
        .map(|s| {
            let mut a = base.clone();
            for (i, &r) in free.iter().enumerate() {
                a.alpha[r] = s[i];
            }
            damped_newton(model, &a, &free, opts)
        })
        .collect();
    let mut roots: Vec<(AlphaVector, f64)> = Vec::new();
    let mut failed = 0;
    for o in outcomes {
        match o? {
            Some((a, res)) => {
                if let Some(existing) = roots.iter_mut().find(|(b, _)| b.distance(&a) < opts.dedup_tol) {
                    if res < existing.1 {
                        *existing = (a, res);
                    }
                } else {
                    roots.push((a, res));
                }
            }
            None => failed += 1,
        }
    }
    roots.sort_by_key(|(a, _)| canonical_key(a));
    let seeds = roots
        .into_iter()
        .map(|(a, res)| classify(model, a, res, &free, opts))
        .collect::<Result<Vec<_>>>()?;
    let real_count = seeds.iter().filter(|s| s.is_real).count();
    Ok(MultistartResult {
        continuum_suspected: real_count > opts.continuum_count,
        seeds,
        starts: starts.len(),
        failed,
    })
}

/// All roots over the lead iteration `lead = 0, 1, …, p−1`, each chart forcing
/// the coefficients before the lead to vanish.
#[derive(Debug, Clone)]
pub struct BranchEnumeration {
    pub seeds: Vec<SeedSolution>,
    /// `None` when a continuum of real roots was detected.
    pub real_count: Option<usize>,
    pub complex_count: usize,
    pub degenerate_count: usize,
    pub continuum_suspected: bool,
    /// Real nondegenerate seeds keyed by number of nonzero coefficients.
    pub real_by_support: BTreeMap<usize, usize>,
}

pub fn enumerate_branches(model: &dyn MomentModel, grid: &StartGrid, opts: &SolveOptions) -> Result<BranchEnumeration> {
    let p = model.dim();
    let mut seeds = Vec::new();
    let mut continuum = false;
    for lead in 0..p {
        let run = multistart_solve(model, lead, true, grid, opts)?;
        continuum |= run.continuum_suspected;
        seeds.extend(run.seeds);
    }
    let real: Vec<&SeedSolution> = seeds.iter().filter(|s| s.is_real && s.nondegenerate).collect();
    let mut by_support = BTreeMap::new();
    for s in &real {
        *by_support.entry(s.support(opts.dedup_tol)).or_insert(0) += 1;
    }
    Ok(BranchEnumeration {
        real_count: (!continuum).then_some(real.len()),
        complex_count: seeds.iter().filter(|s| !s.is_real && s.nondegenerate).count(),
        degenerate_count: seeds.iter().filter(|s| !s.nondegenerate).count(),
        continuum_suspected: continuum,
        real_by_support: by_support,
        seeds,
    })
}

/// A cluster of grid cells where both real equations of a two-unknown real
/// system change sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCrossing {
    pub center: [f64; 2],
    pub cells: usize,
}

/// Dense scan of `P` over real `α ∈ [−range, range]²` for a group with `p = 3`:
/// cells in which both `P_1` and `P_2` change sign, merged into 8-connected
/// clusters. Each transversal intersection of the two nodal curves yields one
/// cluster.
pub fn sign_change_scan(model: &dyn MomentModel, lead: usize, range: f64, cells: usize) -> Result<Vec<SignCrossing>> {
    if model.dim() != 3 {
        return Err(Error::InvalidArgument(format!("scan needs p = 3, got p = {}", model.dim())));
    }
    if cells < 2 || !(range > 0.0) {
        return Err(Error::InvalidArgument("need range > 0 and at least two cells".into()));
    }
    let n = cells + 1;
    let h = 2.0 * range / cells as f64;
    let coord = |i: usize| -range + i as f64 * h;
    let values: Vec<[f64; 2]> = (0..n * n)
        .into_par_iter()
        .map(|q| {
            let alpha = AlphaVector::new(lead, vec![C64::new(coord(q / n), 0.0), C64::new(coord(q % n), 0.0)]);
            eval_p(model, &alpha).map(|p| [p[0].re, p[1].re])
        })
        .collect::<Result<_>>()?;
    let changes = |i: usize, j: usize, c: usize| {
        let v = [values[i * n + j][c], values[(i + 1) * n + j][c], values[i * n + j + 1][c], values[(i + 1) * n + j + 1][c]];
        v.iter().any(|x| *x <= 0.0) && v.iter().any(|x| *x >= 0.0)
    };
    let mut flagged = vec![false; cells * cells];
    for i in 0..cells {
        for j in 0..cells {
            flagged[i * cells + j] = changes(i, j, 0) && changes(i, j, 1);
        }
    }
    let mut seen = vec![false; cells * cells];
    let mut out = Vec::new();
    for start in 0..cells * cells {
        if !flagged[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut sx, mut sy, mut count) = (0.0, 0.0, 0);
        while let Some(c) = stack.pop() {
            let (i, j) = (c / cells, c % cells);
            sx += coord(i) + 0.5 * h;
            sy += coord(j) + 0.5 * h;
            count += 1;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= cells as i64 || b >= cells as i64 {
                        continue;
                    }
                    let q = a as usize * cells + b as usize;
                    if flagged[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(SignCrossing { center: [sx / count as f64, sy / count as f64], cells: count });
    }
    Ok(out)
}
