use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bifurc_core::alpha::{enumerate_branches, AlphaVector, SeedRecord, SeedSolution};
use bifurc_core::bessel::bessel_zero;
use bifurc_core::coupling::{
    check_hypothesis_h4, GuardedQuadrature, H4Violation, MomentModel, QuarticMoments, QuarticTensor, C64,
};
use bifurc_core::disk::{detect_continuum, ContinuumReport, PolarRule};
use bifurc_core::galerkin::{GalerkinSettings, GalerkinSpace};
use bifurc_core::nodal::{chain_segments, render_svg, sample_field, zero_segments, Slice};
use bifurc_core::quadrature::default_nodes_per_axis;
use bifurc_core::reduction::{
    applicability, solve_reduced, trace_branch, verify_branch_limit, Applicability, BranchSample, LimitReport,
};
use bifurc_core::spectral::{enumerate_groups, group_by_eigenvalue, group_by_index, BoxDomain, EigenGroup, Mode};
use bifurc_core::stability::{
    instability_verdict, params_from_branch, CGLParams, MonodromyOptions, StabilityReport, VerdictOptions,
};
use serde::{Deserialize, Serialize};

use crate::config::{GroupSelector, RunConfig};
use crate::error::CliError;
use crate::output::{write_atomic, write_json, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Spectrum,
    Seeds,
    Branch,
    Stability,
    Nodal,
    H4,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Seeds => "seeds",
            Command::Branch => "branch",
            Command::Stability => "stability",
            Command::Nodal => "nodal",
            Command::H4 => "h4",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub seed_id: Option<usize>,
    pub eps_max: Option<f64>,
    pub resolution: Option<usize>,
}

fn box_domain(cfg: &RunConfig, what: &str) -> Result<BoxDomain, CliError> {
    cfg.domain
        .to_box()?
        .ok_or_else(|| CliError::Config(format!("{what} is only available on boxes and intervals")))
}

/// The selected eigenvalue group, with the configured lead mode first.
pub fn resolve_group(cfg: &RunConfig, domain: &BoxDomain) -> Result<EigenGroup, CliError> {
    let group = match cfg.group {
        GroupSelector::Index(i) => group_by_index(domain, i)?,
        GroupSelector::Eigenvalue(v) => group_by_eigenvalue(domain, v)?,
    };
    match &cfg.lead {
        None => Ok(group),
        Some(k) => {
            let pos = group
                .modes
                .iter()
                .position(|m| &m.k == k)
                .ok_or_else(|| CliError::Config(format!("lead mode {k:?} is not in the selected group")))?;
            Ok(group.with_lead(pos)?)
        }
    }
}

/// Exact quartic tensor for `σ = 2`, guarded quadrature otherwise.
pub fn build_model(cfg: &RunConfig, domain: &BoxDomain, group: &EigenGroup) -> Result<Box<dyn MomentModel>, CliError> {
    if cfg.sigma == 2.0 {
        return Ok(Box::new(QuarticMoments { tensor: QuarticTensor::new(group, domain)? }));
    }
    let nodes = cfg.solver.quadrature_nodes.unwrap_or_else(|| default_nodes_per_axis(domain.dim(), cfg.sigma));
    let guarded = GuardedQuadrature::for_box(group, domain, cfg.sigma, nodes, cfg.solver.quadrature_tol);
    let p = group.multiplicity();
    // probe vectors: all ones and an alternating complex pattern
    let ones = vec![C64::new(1.0, 0.0); p];
    let mixed: Vec<C64> = (0..p).map(|j| C64::from_polar(1.0 + 0.25 * j as f64, 0.7 * j as f64)).collect();
    guarded.check_moments(&ones)?;
    guarded.check_moments(&mixed)?;
    Ok(Box::new(guarded.coarse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub eigenvalue: f64,
    /// Exact eigenvalue divided by `(π/scale)²`; absent on the disk.
    pub rational: Option<String>,
    pub multiplicity: usize,
    pub modes: Vec<Vec<u32>>,
}

impl GroupInfo {
    fn of(g: &EigenGroup) -> Self {
        Self {
            eigenvalue: g.eigenvalue,
            rational: Some(g.rational.to_string()),
            multiplicity: g.multiplicity(),
            modes: g.modes.iter().map(|m| m.k.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub bound: f64,
    pub groups: Vec<GroupInfo>,
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumReport, CliError> {
    let bound = cfg.spectrum_bound;
    let groups = match cfg.domain.to_box()? {
        Some(domain) => enumerate_groups(&domain, bound).iter().map(GroupInfo::of).collect(),
        None => disk_groups(bound),
    };
    Ok(SpectrumReport { bound, groups })
}

/// Disk eigenvalues `j_{m,n}²` up to `bound`; modes are `[m, n]`.
fn disk_groups(bound: f64) -> Vec<GroupInfo> {
    let mut out = Vec::new();
    for m in 0..64usize {
        for n in 1..64usize {
            let j = bessel_zero(m, n);
            if j * j > bound {
                break;
            }
            out.push(GroupInfo {
                eigenvalue: j * j,
                rational: None,
                multiplicity: if m == 0 { 1 } else { 2 },
                modes: vec![vec![m as u32, n as u32]],
            });
        }
        if bessel_zero(m, 1).powi(2) > bound {
            break;
        }
    }
    out.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedsReport {
    pub group: GroupInfo,
    pub sigma: f64,
    pub real_count: Option<usize>,
    pub complex_count: usize,
    pub degenerate_count: usize,
    pub continuum_suspected: bool,
    pub real_by_support: BTreeMap<usize, usize>,
    pub seeds: Vec<SeedRecord>,
    pub applicability: Applicability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk: Option<ContinuumReport>,
}

pub fn cmd_seeds(cfg: &RunConfig) -> Result<SeedsReport, CliError> {
    let Some(domain) = cfg.domain.to_box()? else {
        if cfg.sigma != 2.0 {
            return Err(CliError::Config("the disk pair is analysed for sigma = 2 only".into()));
        }
        let report = detect_continuum(PolarRule::default(), cfg.solver.degeneracy_threshold)?;
        let [a, _] = bifurc_core::disk::second_eigenpair();
        return Ok(SeedsReport {
            group: GroupInfo {
                eigenvalue: a.eigenvalue(),
                rational: None,
                multiplicity: 2,
                modes: vec![vec![a.angular_index as u32, a.radial_index as u32]; 2],
            },
            sigma: cfg.sigma,
            real_count: None,
            complex_count: 0,
            degenerate_count: 0,
            continuum_suspected: report.continuum_detected,
            real_by_support: BTreeMap::new(),
            seeds: Vec::new(),
            applicability: applicability(cfg.sigma, 2),
            disk: Some(report),
        });
    };
    let group = resolve_group(cfg, &domain)?;
    let model = build_model(cfg, &domain, &group)?;
    let e = enumerate_branches(model.as_ref(), &cfg.solver.start_grid(cfg.seed), &cfg.solver.solve_options())?;
    Ok(SeedsReport {
        group: GroupInfo::of(&group),
        sigma: cfg.sigma,
        real_count: e.real_count,
        complex_count: e.complex_count,
        degenerate_count: e.degenerate_count,
        continuum_suspected: e.continuum_suspected,
        real_by_support: e.real_by_support,
        seeds: e.seeds.iter().map(SeedRecord::from).collect(),
        applicability: applicability(cfg.sigma, domain.dim()),
        disk: None,
    })
}

fn pick_seed(seeds: &SeedsReport, id: Option<usize>) -> Result<(usize, AlphaVector), CliError> {
    let id = id.ok_or_else(|| CliError::Config("--seed-id is required".into()))?;
    let rec = seeds
        .seeds
        .get(id)
        .ok_or_else(|| CliError::Config(format!("seed id {id} out of range (have {})", seeds.seeds.len())))?;
    if !rec.nondegenerate {
        return Err(CliError::Config(format!("seed {id} is degenerate; no branch is guaranteed")));
    }
    Ok((id, SeedSolution::from(rec).alpha))
}

pub fn galerkin_space(cfg: &RunConfig, domain: &BoxDomain, group: &EigenGroup) -> Result<GalerkinSpace, CliError> {
    let settings = GalerkinSettings { cutoff: cfg.solver.cutoff, collocation: None };
    Ok(GalerkinSpace::new(domain, group, cfg.sigma, settings)?)
}

/// `0.2 · gap^{1/σ}` with the distance to the nearest other eigenvalue.
pub fn default_eps_max(space: &GalerkinSpace, sigma: f64) -> f64 {
    let l0 = space.group_eigenvalue();
    let gap = space
        .complement()
        .iter()
        .map(|&k| (space.eigenvalues()[k] - l0).abs())
        .fold(f64::INFINITY, f64::min);
    0.2 * gap.powf(1.0 / sigma)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchDetails {
    pub seed_id: usize,
    pub seed: SeedRecord,
    pub group: GroupInfo,
    pub eps_max: f64,
    pub steps: usize,
    pub cutoff: usize,
    pub aborted: Option<String>,
    pub limit: Option<LimitReport>,
    pub applicability: Applicability,
}

#[derive(Debug, Clone)]
pub struct BranchOutput {
    pub csv: String,
    pub samples: Vec<BranchSample>,
    pub details: BranchDetails,
}

fn branch_csv(samples: &[BranchSample], p: usize) -> String {
    let mut head = vec!["eps".to_string(), "re_lambda".into(), "im_lambda".into()];
    for j in 1..p {
        head.push(format!("re_alpha{j}"));
        head.push(format!("im_alpha{j}"));
    }
    head.push("y_norm".into());
    head.push("pde_residual".into());
    let mut out = head.join(",");
    out.push('\n');
    for s in samples {
        let mut row = vec![s.state.eps, s.state.lambda.re, s.state.lambda.im];
        for a in &s.state.alpha.alpha {
            row.push(a.re);
            row.push(a.im);
        }
        row.push(s.y_norm);
        row.push(s.pde_residual);
        out.push_str(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_branch(cfg: &RunConfig, flags: &Flags) -> Result<BranchOutput, CliError> {
    let domain = box_domain(cfg, "branch tracing")?;
    let seeds = cmd_seeds(cfg)?;
    let (seed_id, seed) = pick_seed(&seeds, flags.seed_id)?;
    let group = resolve_group(cfg, &domain)?;
    let model = build_model(cfg, &domain, &group)?;
    let space = galerkin_space(cfg, &domain, &group)?;
    let eps_max = flags.eps_max.or(cfg.solver.eps_max).unwrap_or_else(|| default_eps_max(&space, cfg.sigma));
    if !(eps_max > 0.0) {
        return Err(CliError::Config("eps-max must be positive".into()));
    }
    let steps = cfg.solver.steps;
    let trace = trace_branch(&seed, model.as_ref(), eps_max, steps, &space, cfg.eta(), cfg.sigma, &cfg.solver.reduction_options())?;
    if trace.samples.is_empty() {
        return Err(bifurc_core::Error::NonConvergence { iterations: steps, residual: f64::NAN }.into());
    }
    let limit = if trace.samples.len() >= 3 {
        verify_branch_limit(&trace.samples, &space, model.as_ref()).ok()
    } else {
        None
    };
    Ok(BranchOutput {
        csv: branch_csv(&trace.samples, group.multiplicity()),
        details: BranchDetails {
            seed_id,
            seed: seeds.seeds[seed_id].clone(),
            group: GroupInfo::of(&group),
            eps_max,
            steps,
            cutoff: cfg.solver.cutoff,
            aborted: trace.aborted,
            limit,
            applicability: applicability(cfg.sigma, domain.dim()),
        },
        samples: trace.samples,
    })
}

/// A row of a branch CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRow {
    pub eps: f64,
    pub lambda: C64,
    pub alpha: Vec<C64>,
}

pub fn parse_branch_csv(text: &str) -> Result<Vec<BranchRow>, CliError> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().ok_or_else(|| CliError::Config("empty branch file".into()))?.split(',').collect();
    let na = (head.len().saturating_sub(5)) / 2;
    if head.len() != 5 + 2 * na || head[0] != "eps" {
        return Err(CliError::Config("unexpected branch header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("bad branch row: {e}")))?;
            if v.len() != head.len() {
                return Err(CliError::Config("ragged branch row".into()));
            }
            Ok(BranchRow {
                eps: v[0],
                lambda: C64::new(v[1], v[2]),
                alpha: (0..na).map(|j| C64::new(v[3 + 2 * j], v[4 + 2 * j])).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityOutput {
    pub seed_id: usize,
    pub eps: f64,
    pub lambda: [f64; 2],
    pub params: CGLParams,
    pub report: StabilityReport,
}

pub fn cmd_stability(cfg: &RunConfig, flags: &Flags, branch_file: &Path) -> Result<StabilityOutput, CliError> {
    let domain = box_domain(cfg, "stability")?;
    let text = std::fs::read_to_string(branch_file).map_err(|source| CliError::Io {
        path: branch_file.display().to_string(),
        source,
    })?;
    let rows = parse_branch_csv(&text)?;
    let row = match cfg.solver.stability_eps {
        Some(e) => rows.iter().min_by(|a, b| (a.eps - e).abs().total_cmp(&(b.eps - e).abs())),
        None => rows.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)),
    }
    .ok_or_else(|| CliError::Config("branch file has no samples".into()))?;
    let seeds = cmd_seeds(cfg)?;
    let (seed_id, seed) = pick_seed(&seeds, flags.seed_id)?;
    let group = resolve_group(cfg, &domain)?;
    let space = galerkin_space(cfg, &domain, &group)?;
    if row.alpha.len() != seed.alpha.len() {
        return Err(CliError::Config("branch file does not match the selected group".into()));
    }
    let start = AlphaVector::new(seed.lead, row.alpha.clone());
    let opts = cfg.solver.reduction_options();
    let state = solve_reduced(row.eps, &start, row.lambda, &space, cfg.eta(), cfg.sigma, &opts)?;
    let u = state.field(&space);
    let sample = BranchSample {
        pde_residual: bifurc_core::reduction::pde_residual(&u, state.lambda, state.eta, state.sigma, &space),
        y_norm: bifurc_core::galerkin::coeff_norm(&state.y),
        state,
    };
    let params = params_from_branch(sample.state.lambda, cfg.eta(), cfg.theta, cfg.sigma)?;
    let verdict_opts = VerdictOptions {
        seed: cfg.seed,
        monodromy: MonodromyOptions { steps: cfg.solver.monodromy_steps, ..MonodromyOptions::default() },
        sim_steps_per_period: cfg.solver.monodromy_steps,
        ..VerdictOptions::default()
    };
    let report = instability_verdict(&sample, &params, &space, &verdict_opts)?;
    Ok(StabilityOutput {
        seed_id,
        eps: sample.state.eps,
        lambda: [sample.state.lambda.re, sample.state.lambda.im],
        params,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct NodalOutput {
    pub svg: String,
    pub grid_csv: String,
    pub polylines: usize,
    pub coefficients: Vec<C64>,
}

pub fn cmd_nodal(cfg: &RunConfig, flags: &Flags) -> Result<NodalOutput, CliError> {
    let domain = box_domain(cfg, "the nodal picture")?;
    let group = resolve_group(cfg, &domain)?;
    let coefficients: Vec<C64> = match (&cfg.nodal.coefficients, flags.seed_id) {
        (Some(c), _) => c.iter().map(|[a, b]| C64::new(*a, *b)).collect(),
        (None, Some(_)) => {
            let seeds = cmd_seeds(cfg)?;
            pick_seed(&seeds, flags.seed_id)?.1.coefficients()
        }
        (None, None) => return Err(CliError::Config("nodal needs coefficients or --seed-id".into())),
    };
    if coefficients.len() != group.multiplicity() {
        return Err(CliError::Config(format!(
            "expected {} coefficients, got {}",
            group.multiplicity(),
            coefficients.len()
        )));
    }
    let slice = match &cfg.nodal.slice {
        Some(s) => Slice { axes: s.axes, fixed: s.fixed.clone() },
        None => Slice::plane(&domain).map_err(|e| CliError::Config(e.to_string()))?,
    };
    let resolution = flags.resolution.or(cfg.nodal.resolution).unwrap_or(200);
    let modes: Vec<Mode> = group.modes.clone();
    let grid = sample_field(&domain, &modes, &coefficients, &slice, resolution)?;
    let lines = chain_segments(&zero_segments(&grid));
    Ok(NodalOutput {
        svg: render_svg(&grid, &lines, cfg.nodal.pixels.unwrap_or(400.0)),
        grid_csv: grid.to_csv(),
        polylines: lines.len(),
        coefficients,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H4Output {
    pub group: GroupInfo,
    pub holds: bool,
    pub checked: usize,
    pub violation_count: usize,
    /// At most the first 100 violating tuples.
    pub violations: Vec<H4Violation>,
}

pub fn cmd_h4(cfg: &RunConfig) -> Result<H4Output, CliError> {
    let domain = box_domain(cfg, "the four-mode check")?;
    let group = resolve_group(cfg, &domain)?;
    let r = check_hypothesis_h4(&group, &domain)?;
    let count = r.violations.len();
    Ok(H4Output {
        group: GroupInfo::of(&group),
        holds: r.holds,
        checked: r.checked,
        violation_count: count,
        violations: r.violations.into_iter().take(100).collect(),
    })
}

/// Runs a command, writes its files and manifest under `out`, and returns a
/// console summary plus the written paths.
pub fn run(cmd: Command, cfg: &RunConfig, raw: &str, out: &Path, flags: &Flags) -> Result<(String, Vec<PathBuf>), CliError> {
    let mut manifest = RunManifest::new(cmd.name(), cfg, raw);
    let mut written = Vec::new();
    let put = |name: String, bytes: &[u8], written: &mut Vec<PathBuf>| -> Result<(), CliError> {
        let path = out.join(&name);
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    let summary = match cmd {
        Command::Spectrum => {
            let r = cmd_spectrum(cfg)?;
            put("spectrum.json".into(), &pretty(&r)?, &mut written)?;
            let mut s = String::new();
            for (i, g) in r.groups.iter().enumerate() {
                s.push_str(&format!("{:>3}  {:>14.8}  x{}  {:?}\n", i + 1, g.eigenvalue, g.multiplicity, g.modes));
            }
            if r.groups.is_empty() {
                s.push_str("no eigenvalues below the bound\n");
            }
            s
        }
        Command::Seeds => {
            let r = cmd_seeds(cfg)?;
            put("seeds.json".into(), &pretty(&r)?, &mut written)?;
            match (&r.disk, r.real_count) {
                (Some(d), _) => format!("{}; C = {:.6e}{:+.6e}i\n", d.message, d.c_re, d.c_im),
                (None, Some(n)) => format!(
                    "{} real branches {:?} by support, {} complex, {} degenerate\n",
                    n, r.real_by_support, r.complex_count, r.degenerate_count
                ),
                (None, None) => "continuum of real roots suspected; no count\n".to_string(),
            }
        }
        Command::Branch => {
            let r = cmd_branch(cfg, flags)?;
            let name = format!("branch_{}.csv", r.details.seed_id);
            put(name.clone(), r.csv.as_bytes(), &mut written)?;
            manifest.details = serde_json::to_value(&r.details).map_err(|e| CliError::Config(e.to_string()))?;
            let last = r.samples.last().expect("non-empty");
            let mut s = format!(
                "{} samples up to eps = {:.4e}; lambda = {:.10}{:+.10}i\n",
                r.samples.len(),
                last.state.eps,
                last.state.lambda.re,
                last.state.lambda.im
            );
            if let Some(a) = &r.details.aborted {
                s.push_str(&format!("stopped early: {a}\n"));
            }
            manifest.outputs.push(name.clone());
            let mpath = out.join(format!("{name}.json"));
            write_json(&mpath, &manifest)?;
            written.push(mpath);
            return Ok((s, written));
        }
        Command::Stability => {
            let id = flags.seed_id.ok_or_else(|| CliError::Config("--seed-id is required".into()))?;
            let r = cmd_stability(cfg, flags, &out.join(format!("branch_{id}.csv")))?;
            put(format!("stability_{id}.json"), &pretty(&r)?, &mut written)?;
            format!(
                "{} (max Re A = {:.4}, max |mu| = {:?}, rates {:?} vs {:?})\n",
                r.report.label, r.report.max_real_part_a, r.report.max_multiplier, r.report.measured_rate, r.report.floquet_rate
            )
        }
        Command::Nodal => {
            let r = cmd_nodal(cfg, flags)?;
            let tag = flags.seed_id.map(|i| format!("_{i}")).unwrap_or_default();
            put(format!("nodal{tag}.svg"), r.svg.as_bytes(), &mut written)?;
            put(format!("nodal{tag}_grid.csv"), r.grid_csv.as_bytes(), &mut written)?;
            format!("{} nodal polylines\n", r.polylines)
        }
        Command::H4 => {
            let r = cmd_h4(cfg)?;
            put("h4.json".into(), &pretty(&r)?, &mut written)?;
            if r.holds {
                format!("four-mode integrals vanish ({} tuples checked)\n", r.checked)
            } else {
                format!("VIOLATED: {} of {} four-mode tuples are nonzero\n", r.violation_count, r.checked)
            }
        }
    };
    manifest.outputs = written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let mpath = out.join(format!("{}.manifest.json", cmd.name()));
    write_json(&mpath, &manifest)?;
    written.push(mpath);
    Ok((summary, written))
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}
