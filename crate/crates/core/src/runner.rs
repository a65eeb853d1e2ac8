//! Experiment driver behind the command-line interface.
//!
//! A run is described by a flat key-value config (or CLI flags): problem,
//! mode, refinement depth, a list of Robin parameters, smoothing counts and
//! tolerances. Each alpha value produces one CSV residual log
//! (`cycle,event,res,res_a,res_b`) plus an entry in a JSON summary; logs are
//! written deterministically so repeated runs with the same config and seed
//! are byte-identical. Independent alpha runs may execute in parallel,
//! capped by the `DUALMG_THREADS` environment variable (default 1).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, FreeSaddleSolver, Lambda, MaterialParams};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::mesh::unit_square_mesh;
use crate::multigrid::{CycleConfig, CycleEvent, CycleMode, Hierarchy, LogEntry, ResidualLog};
use crate::problems::{
    cook_problem, dual_poisson_robin, face_problem, manufactured_classifier,
    manufactured_elasticity, stress_l2_error, ManufacturedKind, ProblemSpec,
};
use crate::rng::SplitMix64;
use crate::smoother::{SmootherBc, SmootherConfig, SmootherContext};
use crate::spaces::DofLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Cook,
    Face,
    DualPoisson,
    Manufactured,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cook" => Ok(Self::Cook),
            "face" => Ok(Self::Face),
            "dual_poisson" => Ok(Self::DualPoisson),
            "manufactured" => Ok(Self::Manufactured),
            other => Err(Error::Config(format!("unknown problem {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cook => "cook",
            Self::Face => "face",
            Self::DualPoisson => "dual_poisson",
            Self::Manufactured => "manufactured",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    SmoothOnly,
    VCycle,
    TwoGrid,
    Direct,
}

impl RunMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth_only" => Ok(Self::SmoothOnly),
            "vcycle" => Ok(Self::VCycle),
            "two_grid" => Ok(Self::TwoGrid),
            "direct" => Ok(Self::Direct),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SmoothOnly => "smooth_only",
            Self::VCycle => "vcycle",
            Self::TwoGrid => "two_grid",
            Self::Direct => "direct",
        }
    }

    fn min_refinements(&self) -> usize {
        match self {
            Self::VCycle | Self::TwoGrid => 1,
            _ => 0,
        }
    }
}

fn parse_smoother(s: &str) -> Result<SmootherBc> {
    match s {
        "robin" => Ok(SmootherBc::Robin),
        "dirichlet" => Ok(SmootherBc::Dirichlet),
        "neumann_rbm" => Ok(SmootherBc::NeumannRemoveRbm),
        "neumann_avg" => Ok(SmootherBc::NeumannZeroAverage),
        other => Err(Error::Config(format!("unknown smoother {other:?}"))),
    }
}

fn smoother_name(bc: SmootherBc) -> &'static str {
    match bc {
        SmootherBc::Robin => "robin",
        SmootherBc::Dirichlet => "dirichlet",
        SmootherBc::NeumannRemoveRbm => "neumann_rbm",
        SmootherBc::NeumannZeroAverage => "neumann_avg",
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub mode: RunMode,
    pub refine: usize,
    pub alphas: Vec<f64>,
    pub smoother: SmootherBc,
    pub pre: usize,
    pub post: usize,
    pub sweeps: usize,
    pub tol: f64,
    pub max_cycles: usize,
    pub seed: u64,
    pub random_init: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Cook,
            mode: RunMode::VCycle,
            refine: 2,
            alphas: vec![0.0, 0.01, 0.1, 1.0, 10.0, 100.0],
            smoother: SmootherBc::Robin,
            pre: 5,
            post: 5,
            sweeps: 100,
            tol: 1e-8,
            max_cycles: 50,
            seed: 0,
            random_init: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.apply_pair(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("cannot parse {what} from {value:?}"));
        match key {
            "problem" => self.problem = ProblemKind::parse(value)?,
            "mode" => self.mode = RunMode::parse(value)?,
            "refine" => self.refine = value.parse().map_err(|_| bad("refine"))?,
            "alpha" => {
                self.alphas = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| bad("alpha")))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "smoother" => self.smoother = parse_smoother(value)?,
            "pre" => self.pre = value.parse().map_err(|_| bad("pre"))?,
            "post" => self.post = value.parse().map_err(|_| bad("post"))?,
            "sweeps" => self.sweeps = value.parse().map_err(|_| bad("sweeps"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("tol"))?,
            "max_cycles" => self.max_cycles = value.parse().map_err(|_| bad("max_cycles"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "init" => {
                self.random_init = match value {
                    "zero" => false,
                    "random" => true,
                    other => {
                        return Err(Error::Config(format!(
                            "init must be zero or random, got {other:?}"
                        )))
                    }
                }
            }
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::Config("alpha list must not be empty".into()));
        }
        if self.refine < self.mode.min_refinements() {
            return Err(Error::Config(format!(
                "mode {} needs refine >= {}",
                self.mode.as_str(),
                self.mode.min_refinements()
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }

    /// Alphas actually executed: non-Robin smoothers run once.
    fn effective_alphas(&self) -> Vec<f64> {
        if self.smoother == SmootherBc::Robin {
            self.alphas.clone()
        } else {
            vec![0.0]
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub mode: String,
    pub smoother: String,
    pub alpha: f64,
    pub refinements: usize,
    pub dofs_per_level: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Geometric-mean residual contraction per cycle (or per sweep).
    pub contraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robin_equals_dirichlet: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_relative_diff: Option<f64>,
    pub csv: String,
}

fn csv_from_log(entries: &[LogEntry]) -> String {
    let mut s = String::from("cycle,event,res,res_a,res_b\n");
    for e in entries {
        let _ = writeln!(
            s,
            "{},{},{:.12e},{:.12e},{:.12e}",
            e.cycle,
            e.event.as_str(),
            e.norm,
            e.norm_a,
            e.norm_b
        );
    }
    s
}

struct SingleOutput {
    summary: RunSummary,
    csv_name: String,
    csv_body: String,
}

fn problem_spec(kind: ProblemKind) -> Result<ProblemSpec> {
    match kind {
        ProblemKind::Cook => Ok(cook_problem(0)?.0),
        ProblemKind::Face => Ok(face_problem(0)?.0),
        _ => Err(Error::Config(
            "elasticity spec requested for a non-elasticity problem".into(),
        )),
    }
}

fn base_summary(cfg: &RunConfig, alpha: f64) -> RunSummary {
    RunSummary {
        problem: cfg.problem.as_str().to_string(),
        mode: cfg.mode.as_str().to_string(),
        smoother: smoother_name(cfg.smoother).to_string(),
        alpha,
        refinements: cfg.refine,
        dofs_per_level: Vec::new(),
        iterations: 0,
        converged: false,
        initial_residual: 0.0,
        final_residual: 0.0,
        contraction: 0.0,
        robin_equals_dirichlet: None,
        stress_errors: None,
        convergence_order: None,
        direct_relative_diff: None,
        csv: String::new(),
    }
}

fn random_state(
    system: &crate::assembly::SaddleSystem,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let (mut y, mut z) = system.initial_state();
    for d in system.free_stress_dofs() {
        y[d] = rng.next_symmetric();
    }
    for v in z.iter_mut() {
        *v = rng.next_symmetric();
    }
    (y, z)
}

fn run_elasticity_smooth_only(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    let spec = problem_spec(cfg.problem)?;
    let hierarchy = spec.hierarchy(cfg.refine)?;
    let mesh = hierarchy.finest();
    let layout = DofLayout::build(mesh);
    let system = assemble(mesh, &layout, &spec.material, &spec.loads())?;
    let ctx = SmootherContext::build(
        mesh,
        &layout,
        &system,
        SmootherConfig::new(cfg.smoother, alpha)?,
    )?;

    let (mut y, mut z) = if cfg.random_init {
        random_state(&system, cfg.seed)
    } else {
        system.initial_state()
    };
    let r0 = system.residuals(&y, &z).norm;
    let mut log = ResidualLog::default();
    let mut r_now = r0;
    for sweep in 1..=cfg.sweeps {
        let r = ctx.sweep(&system, &mut y, &mut z)?;
        log.push(sweep, CycleEvent::Sweep, r.norm, r.norm_a, r.norm_b);
        r_now = r.norm;
        if !r_now.is_finite() {
            break;
        }
    }
    let executed = log.entries.len();
    let mut summary = base_summary(cfg, alpha);
    summary.dofs_per_level = vec![system.n + system.m];
    summary.iterations = executed;
    summary.converged = r_now <= cfg.tol * r0;
    summary.initial_residual = r0;
    summary.final_residual = r_now;
    summary.contraction = if executed > 0 && r0 > 0.0 {
        (r_now / r0).powf(1.0 / executed as f64)
    } else {
        0.0
    };
    Ok(SingleOutput {
        csv_name: csv_name(cfg, alpha),
        csv_body: csv_from_log(&log.entries),
        summary,
    })
}

fn run_elasticity_cycles(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    let spec = problem_spec(cfg.problem)?;
    let hierarchy = Hierarchy::build(
        spec.coarse_mesh.clone(),
        cfg.refine,
        &spec.material,
        &spec.loads(),
        SmootherConfig::new(cfg.smoother, alpha)?,
    )?;
    let cycle_cfg = CycleConfig {
        pre: cfg.pre,
        post: cfg.post,
        mode: if cfg.mode == RunMode::TwoGrid {
            CycleMode::TwoGrid
        } else {
            CycleMode::VCycle
        },
        tol: cfg.tol,
        max_cycles: cfg.max_cycles,
    };
    let (_, _, report) = if cfg.random_init {
        let mut ws = hierarchy.workspace();
        let (y, z) = random_state(hierarchy.finest(), cfg.seed);
        hierarchy.set_state(&mut ws, &y, &z);
        hierarchy.solve_from(&cycle_cfg, ws)?
    } else {
        hierarchy.solve(&cycle_cfg)?
    };

    let mut summary = base_summary(cfg, alpha);
    summary.dofs_per_level = hierarchy.dofs_per_level();
    summary.iterations = report.cycles;
    summary.converged = report.converged;
    summary.initial_residual = report.initial_norm;
    summary.final_residual = report.final_norm;
    summary.contraction = report.contraction;
    Ok(SingleOutput {
        csv_name: csv_name(cfg, alpha),
        csv_body: csv_from_log(&report.log.entries),
        summary,
    })
}

fn run_elasticity_direct(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    let spec = problem_spec(cfg.problem)?;
    let hierarchy = spec.hierarchy(cfg.refine)?;
    let mesh = hierarchy.finest();
    let layout = DofLayout::build(mesh);
    let system = assemble(mesh, &layout, &spec.material, &spec.loads())?;
    let solver = FreeSaddleSolver::build(&system)?;
    let (y, z) = solver.solve_system(&system)?;
    let r = system.residuals(&y, &z);
    let scale = norm2(&system.f) + norm2(&system.h);

    let mut log = ResidualLog::default();
    log.push(0, CycleEvent::Post, r.norm, r.norm_a, r.norm_b);
    let mut summary = base_summary(cfg, alpha);
    summary.dofs_per_level = vec![system.n + system.m];
    summary.iterations = 1;
    summary.converged = r.norm <= 1e-9 * scale.max(1.0);
    summary.initial_residual = scale;
    summary.final_residual = r.norm;
    Ok(SingleOutput {
        csv_name: csv_name(cfg, alpha),
        csv_body: csv_from_log(&log.entries),
        summary,
    })
}

fn run_dual_poisson(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    if cfg.mode != RunMode::Direct {
        return Err(Error::Config(
            "dual_poisson supports mode = direct only".into(),
        ));
    }
    let cells = 4usize << cfg.refine.min(6);
    let mesh = unit_square_mesh(cells, &crate::mesh::all_neumann)?;
    let sys = dual_poisson_robin(&mesh, alpha)?;
    let k = sys.robin_dense(alpha);
    let lu = crate::linalg::PartialPivLu::factor(&k);
    let rhs = sys.rhs();
    let sol = lu.solve(&rhs)?;
    let res = {
        let kx = k.matvec(&sol);
        let r: Vec<f64> = kx.iter().zip(rhs.iter()).map(|(a, b)| b - a).collect();
        norm2(&r)
    };
    let equals = alpha == 0.0 && k.max_abs_diff(&sys.dirichlet_dense()) == 0.0;

    let mut log = ResidualLog::default();
    log.push(0, CycleEvent::Post, res, res, 0.0);
    let mut summary = base_summary(cfg, alpha);
    summary.dofs_per_level = vec![sys.n_flux + sys.n_pot];
    summary.iterations = 1;
    summary.converged = res <= 1e-8 * norm2(&rhs).max(1.0);
    summary.initial_residual = norm2(&rhs);
    summary.final_residual = res;
    summary.robin_equals_dirichlet = Some(equals);
    Ok(SingleOutput {
        csv_name: csv_name(cfg, alpha),
        csv_body: csv_from_log(&log.entries),
        summary,
    })
}

fn run_manufactured(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    let mat = MaterialParams::new(1.0, Lambda::Finite(1.0))?;
    match cfg.mode {
        RunMode::Direct => {
            // Convergence study: solve on successively refined meshes and
            // report stress L2 errors plus the fitted order.
            let levels = cfg.refine.max(2).min(4);
            let base = unit_square_mesh(1, &manufactured_classifier)?;
            let (spec, exact) = manufactured_elasticity(base, &mat, ManufacturedKind::Cubic)?;
            let hierarchy = spec.hierarchy(levels)?;
            let mut errors = Vec::new();
            let mut log = ResidualLog::default();
            let mut dofs = Vec::new();
            for level in 1..=levels {
                let mesh = &hierarchy.meshes[level];
                let layout = DofLayout::build(mesh);
                let system = assemble(mesh, &layout, &mat, &spec.loads())?;
                let solver = FreeSaddleSolver::build(&system)?;
                let (y, _z) = solver.solve_system(&system)?;
                let err = stress_l2_error(mesh, &layout, &y, &|p| exact.stress(p))?;
                errors.push(err);
                dofs.push(system.n + system.m);
                log.push(level, CycleEvent::Post, err, err, 0.0);
            }
            let order = fit_convergence_order(&errors);
            let mut summary = base_summary(cfg, alpha);
            summary.dofs_per_level = dofs;
            summary.iterations = levels;
            summary.converged = (order - 2.0).abs() <= 0.3;
            summary.initial_residual = errors[0];
            summary.final_residual = *errors.last().unwrap();
            summary.stress_errors = Some(errors);
            summary.convergence_order = Some(order);
            Ok(SingleOutput {
                csv_name: csv_name(cfg, alpha),
                csv_body: csv_from_log(&log.entries),
                summary,
            })
        }
        RunMode::VCycle | RunMode::TwoGrid => {
            let base = unit_square_mesh(1, &manufactured_classifier)?;
            let (spec, _) = manufactured_elasticity(base, &mat, ManufacturedKind::Cubic)?;
            let hierarchy = Hierarchy::build(
                spec.coarse_mesh.clone(),
                cfg.refine,
                &mat,
                &spec.loads(),
                SmootherConfig::new(cfg.smoother, alpha)?,
            )?;
            let cycle_cfg = CycleConfig {
                pre: cfg.pre,
                post: cfg.post,
                mode: if cfg.mode == RunMode::TwoGrid {
                    CycleMode::TwoGrid
                } else {
                    CycleMode::VCycle
                },
                tol: cfg.tol,
                max_cycles: cfg.max_cycles,
            };
            let (y, z, report) = hierarchy.solve(&cycle_cfg)?;
            let sys = hierarchy.finest();
            let direct = FreeSaddleSolver::build(sys)?;
            let (yd, zd) = direct.solve_system(sys)?;
            let dy: Vec<f64> = y.iter().zip(yd.iter()).map(|(a, b)| a - b).collect();
            let dz: Vec<f64> = z.iter().zip(zd.iter()).map(|(a, b)| a - b).collect();
            let rel = sys.solution_norm(&dy, &dz) / sys.solution_norm(&yd, &zd).max(1e-300);

            let mut summary = base_summary(cfg, alpha);
            summary.dofs_per_level = hierarchy.dofs_per_level();
            summary.iterations = report.cycles;
            summary.converged = report.converged;
            summary.initial_residual = report.initial_norm;
            summary.final_residual = report.final_norm;
            summary.contraction = report.contraction;
            summary.direct_relative_diff = Some(rel);
            Ok(SingleOutput {
                csv_name: csv_name(cfg, alpha),
                csv_body: csv_from_log(&report.log.entries),
                summary,
            })
        }
        _ => Err(Error::Config(
            "manufactured supports mode = direct, vcycle or two_grid".into(),
        )),
    }
}

/// Least-squares slope of log(error) against log(h), h halving per level.
pub fn fit_convergence_order(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    if errors.len() < 2 {
        return 0.0;
    }
    // x_i = log(h_i) = -i log 2 (up to a constant), y_i = log(e_i).
    let xs: Vec<f64> = (0..errors.len())
        .map(|i| -(i as f64) * (2.0_f64).ln())
        .collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

fn csv_name(cfg: &RunConfig, alpha: f64) -> String {
    format!(
        "{}_{}_{}_alpha{}.csv",
        cfg.problem.as_str(),
        cfg.mode.as_str(),
        smoother_name(cfg.smoother),
        alpha
    )
}

fn run_single(cfg: &RunConfig, alpha: f64) -> Result<SingleOutput> {
    match (cfg.problem, cfg.mode) {
        (ProblemKind::DualPoisson, _) => run_dual_poisson(cfg, alpha),
        (ProblemKind::Manufactured, _) => run_manufactured(cfg, alpha),
        (_, RunMode::SmoothOnly) => run_elasticity_smooth_only(cfg, alpha),
        (_, RunMode::Direct) => run_elasticity_direct(cfg, alpha),
        (_, RunMode::VCycle) | (_, RunMode::TwoGrid) => run_elasticity_cycles(cfg, alpha),
    }
}

fn thread_cap() -> usize {
    std::env::var("DUALMG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Executes the configured alpha sweep, writes one CSV per run plus
/// `summary.json` and `summary.csv` under the output directory, and returns
/// the summaries in alpha order.
pub fn run(cfg: &RunConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let alphas = cfg.effective_alphas();
    let cap = thread_cap().min(alphas.len().max(1));

    let mut outputs: Vec<Option<SingleOutput>> = Vec::new();
    if cap <= 1 {
        for &alpha in &alphas {
            outputs.push(Some(run_single(cfg, alpha)?));
        }
    } else {
        let mut slots: Vec<Option<Result<SingleOutput>>> =
            (0..alphas.len()).map(|_| None).collect();
        for chunk in (0..alphas.len()).collect::<Vec<_>>().chunks(cap) {
            let results: Vec<(usize, Result<SingleOutput>)> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&i| {
                        let alpha = alphas[i];
                        scope.spawn(move || (i, run_single(cfg, alpha)))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for (i, res) in results {
                slots[i] = Some(res);
            }
        }
        for slot in slots {
            outputs.push(Some(slot.unwrap()?));
        }
    }

    std::fs::create_dir_all(&cfg.out)?;
    let mut summaries = Vec::with_capacity(outputs.len());
    for out in outputs.into_iter().flatten() {
        let path = cfg.out.join(&out.csv_name);
        std::fs::write(&path, &out.csv_body)?;
        let mut s = out.summary;
        s.csv = out.csv_name;
        summaries.push(s);
    }
    let json = serde_json::to_string_pretty(&summaries)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    std::fs::write(cfg.out.join("summary.json"), json)?;
    std::fs::write(cfg.out.join("summary.csv"), summarize_csv(&summaries))?;
    Ok(summaries)
}

/// Aligned text table over one or more run summaries.
pub fn summarize(summaries: &[RunSummary]) -> String {
    let headers = [
        "problem", "mode", "smoother", "alpha", "dofs", "iters", "converged", "contraction",
    ];
    let mut rows: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for s in summaries {
        rows.push(vec![
            s.problem.clone(),
            s.mode.clone(),
            s.smoother.clone(),
            format!("{}", s.alpha),
            s.dofs_per_level
                .last()
                .map(|d| d.to_string())
                .unwrap_or_default(),
            s.iterations.to_string(),
            s.converged.to_string(),
            format!("{:.3}", s.contraction),
        ]);
    }
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        for (c, cell) in row.iter().enumerate() {
            let _ = write!(out, "{:width$}  ", cell, width = widths[c]);
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}

/// CSV variant of the summary table.
pub fn summarize_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("problem,mode,smoother,alpha,dofs,iterations,converged,contraction\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6e}",
            s.problem,
            s.mode,
            s.smoother,
            s.alpha,
            s.dofs_per_level.last().copied().unwrap_or(0),
            s.iterations,
            s.converged,
            s.contraction
        );
    }
    out
}

pub fn load_summaries(path: &Path) -> Result<Vec<RunSummary>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
