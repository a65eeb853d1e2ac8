//! Geometric multigrid on the saddle point hierarchy.
//!
//! Coarse operators are Galerkin products through the canonical transfers,
//! A_j = Pi^T A_{j+1} Pi and B_j = Q^T B_{j+1} Pi; restriction is the
//! transpose of prolongation, so coarse right-hand sides are restricted
//! residuals. The coarsest level is solved exactly by a direct factorization
//! of the free-dof saddle matrix. The two-grid driver skips the intermediate
//! levels by chaining the per-level transfers.

use crate::assembly::{assemble, FreeSaddleSolver, Loads, MaterialParams, SaddleSystem};
use crate::error::Result;
use crate::mesh::{Mesh, MeshHierarchy};
use crate::smoother::{SmootherConfig, SmootherContext};
use crate::spaces::{DofLayout, TransferPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleMode {
    VCycle,
    TwoGrid,
}

#[derive(Clone, Copy, Debug)]
pub struct CycleConfig {
    pub pre: usize,
    pub post: usize,
    pub mode: CycleMode,
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            pre: 5,
            post: 5,
            mode: CycleMode::VCycle,
            tol: 1e-8,
            max_cycles: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleEvent {
    /// After the pre-smoothing sweeps on the finest level.
    Pre,
    /// After the coarse correction was added to the finest iterate.
    Coarse,
    /// After the post-smoothing sweeps.
    Post,
    /// One stand-alone smoother sweep (smoother-only studies).
    Sweep,
}

impl CycleEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            CycleEvent::Pre => "pre",
            CycleEvent::Coarse => "coarse",
            CycleEvent::Post => "post",
            CycleEvent::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LogEntry {
    pub cycle: usize,
    pub event: CycleEvent,
    pub norm: f64,
    pub norm_a: f64,
    pub norm_b: f64,
}

/// Per-event residual history of a run.
#[derive(Clone, Debug, Default)]
pub struct ResidualLog {
    pub entries: Vec<LogEntry>,
}

impl ResidualLog {
    pub fn push(&mut self, cycle: usize, event: CycleEvent, norm: f64, norm_a: f64, norm_b: f64) {
        self.entries.push(LogEntry {
            cycle,
            event,
            norm,
            norm_a,
            norm_b,
        });
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub converged: bool,
    pub cycles: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Geometric-mean residual contraction per cycle.
    pub contraction: f64,
    pub log: ResidualLog,
}

struct LevelState {
    y: Vec<f64>,
    z: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
    r_a: Vec<f64>,
    r_b: Vec<f64>,
}

impl LevelState {
    fn new(n: usize, m: usize) -> Self {
        Self {
            y: vec![0.0; n],
            z: vec![0.0; m],
            f: vec![0.0; n],
            h: vec![0.0; m],
            r_a: vec![0.0; n],
            r_b: vec![0.0; m],
        }
    }
}

pub struct CycleWorkspace {
    levels: Vec<LevelState>,
}

pub struct Hierarchy {
    pub meshes: MeshHierarchy,
    pub layouts: Vec<DofLayout>,
    pub systems: Vec<SaddleSystem>,
    /// `transfers[j]` maps level `j` to level `j + 1`.
    pub transfers: Vec<TransferPair>,
    /// Smoother contexts for levels 1..=J (the coarsest solves exactly).
    pub smoothers: Vec<Option<SmootherContext>>,
    coarse_solver: FreeSaddleSolver,
}

impl Hierarchy {
    /// Builds the level chain: meshes by uniform refinement, the finest
    /// system assembled directly, coarse blocks by Galerkin products, an
    /// exact factorization at the coarsest level, and one smoother context
    /// per refined level.
    pub fn build(
        coarse_mesh: Mesh,
        refinements: usize,
        mat: &MaterialParams,
        loads: &Loads,
        smoother_cfg: SmootherConfig,
    ) -> Result<Hierarchy> {
        assert!(refinements >= 1, "a hierarchy needs at least two levels");
        let meshes = MeshHierarchy::build(coarse_mesh, refinements)?;
        let levels = meshes.levels();
        let layouts: Vec<DofLayout> = meshes.meshes.iter().map(DofLayout::build).collect();

        let mut transfers = Vec::with_capacity(levels - 1);
        for j in 0..levels - 1 {
            let mut pair = TransferPair::build(
                &meshes.meshes[j],
                &meshes.meshes[j + 1],
                &meshes.maps[j],
                &layouts[j],
                &layouts[j + 1],
            )?;
            pair.apply_stress_constraints(&layouts[j + 1].constrained_mask);
            transfers.push(pair);
        }

        let fine = assemble(&meshes.meshes[levels - 1], &layouts[levels - 1], mat, loads)?;
        let mut systems: Vec<Option<SaddleSystem>> = (0..levels).map(|_| None).collect();
        systems[levels - 1] = Some(fine);
        for j in (0..levels - 1).rev() {
            let finer = systems[j + 1].as_ref().unwrap();
            let pair = &transfers[j];
            let mut a = pair.pit.matmul(&finer.a).matmul(&pair.pi);
            let mut b = pair.qt.matmul(&finer.b).matmul(&pair.pi);
            let layout = &layouts[j];
            a.zero_rows(&layout.constrained_mask);
            a.zero_cols(&layout.constrained_mask);
            b.zero_cols(&layout.constrained_mask);
            let bt = b.transpose();
            let constrained = layout.constrained.iter().map(|&d| (d, 0.0)).collect();
            systems[j] = Some(SaddleSystem {
                a,
                b,
                bt,
                f: vec![0.0; layout.n_stress],
                h: vec![0.0; layout.n_mult()],
                n: layout.n_stress,
                m: layout.n_mult(),
                n_disp: layout.n_disp,
                n_rot: layout.n_rot,
                constrained,
                constrained_mask: layout.constrained_mask.clone(),
            });
        }
        let systems: Vec<SaddleSystem> = systems.into_iter().map(Option::unwrap).collect();

        let coarse_solver = FreeSaddleSolver::build(&systems[0])?;

        let mut smoothers: Vec<Option<SmootherContext>> = vec![None];
        for j in 1..levels {
            smoothers.push(Some(SmootherContext::build(
                &meshes.meshes[j],
                &layouts[j],
                &systems[j],
                smoother_cfg,
            )?));
        }

        Ok(Hierarchy {
            meshes,
            layouts,
            systems,
            transfers,
            smoothers,
            coarse_solver,
        })
    }

    pub fn levels(&self) -> usize {
        self.systems.len()
    }

    pub fn finest(&self) -> &SaddleSystem {
        self.systems.last().unwrap()
    }

    pub fn coarse_solver(&self) -> &FreeSaddleSolver {
        &self.coarse_solver
    }

    /// Total dofs (stress + multipliers) per level, coarse to fine.
    pub fn dofs_per_level(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.n + s.m).collect()
    }

    pub fn workspace(&self) -> CycleWorkspace {
        let mut levels: Vec<LevelState> = self
            .systems
            .iter()
            .map(|s| LevelState::new(s.n, s.m))
            .collect();
        let fine = self.finest();
        let top = levels.last_mut().unwrap();
        top.f.copy_from_slice(&fine.f);
        top.h.copy_from_slice(&fine.h);
        let (y, z) = fine.initial_state();
        top.y = y;
        top.z = z;
        levels.last_mut().unwrap().r_a.fill(0.0);
        CycleWorkspace { levels }
    }

    fn smooth(&self, j: usize, state: &mut LevelState, sweeps: usize) -> Result<()> {
        let ctx = self.smoothers[j].as_ref().expect("refined level");
        let sys = &self.systems[j];
        for _ in 0..sweeps {
            ctx.sweep_inner(
                sys,
                &state.f,
                &state.h,
                &mut state.y,
                &mut state.z,
                &mut state.r_a,
                &mut state.r_b,
            )?;
        }
        Ok(())
    }

    fn refresh_residual(&self, j: usize, state: &mut LevelState) {
        let sys = &self.systems[j];
        sys.residuals_with_rhs_into(
            &state.f,
            &state.h,
            &state.y,
            &state.z,
            &mut state.r_a,
            &mut state.r_b,
        );
    }

    fn log_state(log: &mut ResidualLog, cycle: usize, event: CycleEvent, state: &LevelState) {
        let na = crate::linalg::norm2(&state.r_a);
        let nb = crate::linalg::norm2(&state.r_b);
        log.push(cycle, event, (na * na + nb * nb).sqrt(), na, nb);
    }

    fn cycle_rec(
        &self,
        levels: &mut [LevelState],
        cfg: &CycleConfig,
        cycle: usize,
        mut log: Option<&mut ResidualLog>,
    ) -> Result<()> {
        let j = levels.len() - 1;
        if j == 0 {
            let state = &mut levels[0];
            let (y, z) = self.coarse_solver.solve(&state.f, &state.h)?;
            state.y = y;
            state.z = z;
            return Ok(());
        }
        let (rest, cur) = levels.split_at_mut(j);
        let cur = &mut cur[0];

        self.refresh_residual(j, cur);
        self.smooth(j, cur, cfg.pre)?;
        if let Some(log) = log.as_deref_mut() {
            Self::log_state(log, cycle, CycleEvent::Pre, cur);
        }

        let pair = &self.transfers[j - 1];
        let coarse = &mut rest[j - 1];
        pair.pit.matvec(&cur.r_a, &mut coarse.f);
        pair.qt.matvec(&cur.r_b, &mut coarse.h);
        for &(dof, _) in &self.systems[j - 1].constrained {
            coarse.f[dof] = 0.0;
        }
        coarse.y.fill(0.0);
        coarse.z.fill(0.0);
        self.cycle_rec(rest, cfg, cycle, None)?;

        let coarse = &rest[j - 1];
        pair.pi.matvec_axpy(&coarse.y, 1.0, &mut cur.y);
        pair.q.matvec_axpy(&coarse.z, 1.0, &mut cur.z);
        self.refresh_residual(j, cur);
        if let Some(log) = log.as_deref_mut() {
            Self::log_state(log, cycle, CycleEvent::Coarse, cur);
        }

        self.smooth(j, cur, cfg.post)?;
        if let Some(log) = log.as_deref_mut() {
            Self::log_state(log, cycle, CycleEvent::Post, cur);
        }
        Ok(())
    }

    /// One V-cycle on the workspace iterate, logging finest-level residuals
    /// after the pre, coarse and post phases.
    pub fn v_cycle(
        &self,
        ws: &mut CycleWorkspace,
        cfg: &CycleConfig,
        cycle: usize,
        log: &mut ResidualLog,
    ) -> Result<()> {
        self.cycle_rec(&mut ws.levels, cfg, cycle, Some(log))
    }

    /// One two-grid cycle, composing the transfer chain on the fly. `solve`
    /// builds the composition once and reuses it across cycles.
    pub fn two_grid(
        &self,
        ws: &mut CycleWorkspace,
        cfg: &CycleConfig,
        cycle: usize,
        log: &mut ResidualLog,
    ) -> Result<()> {
        let ops = self.composite_transfers();
        self.two_grid_cycle(&ops, ws, cfg, cycle, log)
    }

    fn composite_transfers(&self) -> TransferPair {
        let mut pi = self.transfers[0].pi.clone();
        let mut q = self.transfers[0].q.clone();
        for pair in &self.transfers[1..] {
            pi = pair.pi.matmul(&pi);
            q = pair.q.matmul(&q);
        }
        let pit = pi.transpose();
        let qt = q.transpose();
        TransferPair { pi, q, pit, qt }
    }

    /// One two-grid cycle: only the finest level and the fixed coarsest level
    /// take part, connected by the chained transfer operators.
    pub fn two_grid_cycle(
        &self,
        ops: &TransferPair,
        ws: &mut CycleWorkspace,
        cfg: &CycleConfig,
        cycle: usize,
        log: &mut ResidualLog,
    ) -> Result<()> {
        let j = self.levels() - 1;
        let (rest, cur) = ws.levels.split_at_mut(j);
        let cur = &mut cur[0];

        self.refresh_residual(j, cur);
        self.smooth(j, cur, cfg.pre)?;
        Self::log_state(log, cycle, CycleEvent::Pre, cur);

        let coarse = &mut rest[0];
        ops.pit.matvec(&cur.r_a, &mut coarse.f);
        ops.qt.matvec(&cur.r_b, &mut coarse.h);
        for &(dof, _) in &self.systems[0].constrained {
            coarse.f[dof] = 0.0;
        }
        let (y, z) = self.coarse_solver.solve(&coarse.f, &coarse.h)?;
        coarse.y = y;
        coarse.z = z;
        ops.pi.matvec_axpy(&coarse.y, 1.0, &mut cur.y);
        ops.q.matvec_axpy(&coarse.z, 1.0, &mut cur.z);
        self.refresh_residual(j, cur);
        Self::log_state(log, cycle, CycleEvent::Coarse, cur);

        self.smooth(j, cur, cfg.post)?;
        Self::log_state(log, cycle, CycleEvent::Post, cur);
        Ok(())
    }

    /// Iterates cycles until the finest residual drops below tol * ||r0|| or
    /// the cycle budget runs out. Non-convergence is a flagged result, not an
    /// error.
    pub fn solve(&self, cfg: &CycleConfig) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let ws = self.workspace();
        self.solve_from(cfg, ws)
    }

    /// Like `solve`, starting from the state already placed in `ws`.
    pub fn solve_from(
        &self,
        cfg: &CycleConfig,
        mut ws: CycleWorkspace,
    ) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let j = self.levels() - 1;
        let two_grid_ops = match cfg.mode {
            CycleMode::TwoGrid => Some(self.composite_transfers()),
            CycleMode::VCycle => None,
        };
        let mut log = ResidualLog::default();
        self.refresh_residual(j, &mut ws.levels[j]);
        let r0 = {
            let s = &ws.levels[j];
            let na = crate::linalg::norm2(&s.r_a);
            let nb = crate::linalg::norm2(&s.r_b);
            (na * na + nb * nb).sqrt()
        };
        let mut r_now = r0;
        let mut converged = r0 == 0.0;
        let mut cycles = 0;
        while !converged && cycles < cfg.max_cycles {
            match &two_grid_ops {
                Some(ops) => self.two_grid_cycle(ops, &mut ws, cfg, cycles, &mut log)?,
                None => self.v_cycle(&mut ws, cfg, cycles, &mut log)?,
            }
            cycles += 1;
            r_now = log.entries.last().map(|e| e.norm).unwrap_or(r_now);
            if !r_now.is_finite() || r_now > 1e14 * r0.max(f64::MIN_POSITIVE) {
                break; // diverged; report below
            }
            if r_now <= cfg.tol * r0 {
                converged = true;
            }
        }
        let contraction = if cycles > 0 && r0 > 0.0 {
            (r_now / r0).powf(1.0 / cycles as f64)
        } else {
            0.0
        };
        let state = &ws.levels[j];
        let report = SolveReport {
            converged,
            cycles,
            initial_norm: r0,
            final_norm: r_now,
            contraction,
            log,
        };
        Ok((state.y.clone(), state.z.clone(), report))
    }

    /// Replaces the finest-level iterate in a workspace.
    pub fn set_state(&self, ws: &mut CycleWorkspace, y: &[f64], z: &[f64]) {
        let top = ws.levels.last_mut().unwrap();
        top.y.copy_from_slice(y);
        top.z.copy_from_slice(z);
    }
}

/// Direct Galerkin consistency check used by tests: both blocks of the
/// coarse level `j` against a directly assembled coarse system.
pub fn galerkin_mismatch(
    hierarchy: &Hierarchy,
    j: usize,
    mat: &MaterialParams,
    loads: &Loads,
) -> Result<(f64, f64)> {
    let mesh = &hierarchy.meshes.meshes[j];
    let layout = &hierarchy.layouts[j];
    let direct = assemble(mesh, layout, mat, loads)?;
    let a_diff = hierarchy.systems[j].a.sub(&direct.a).frobenius() / direct.a.frobenius();
    let b_diff = hierarchy.systems[j].b.sub(&direct.b).frobenius() / direct.b.frobenius();
    Ok((a_diff, b_diff))
}
