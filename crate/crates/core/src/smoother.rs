//! Monolithic patch smoother.
//!
//! Each local subspace couples stress dofs of a node patch with every
//! displacement and rotation dof living on the patch elements. The local
//! saddle blocks are extracted from the global matrices (A_loc = P^T A P for
//! the inclusion P of the local dofs) and the local right-hand side is the
//! restriction of the current global residual, so a converged state produces
//! zero corrections.
//!
//! The patch boundary consists of the artificial interfaces only: interior
//! mesh edges separating the patch from the rest of the domain. Edges on the
//! physical boundary keep their global treatment inside every local problem
//! (free displacement-boundary dofs stay in the local system, eliminated
//! traction dofs are excluded). Four treatments of the artificial interface
//! are supported:
//!
//! * `NeumannRemoveRbm` — interface stress dofs are dropped (local
//!   homogeneous Neumann conditions); where that leaves a rank-deficient
//!   system, two displacement dofs and one rotation dof are deleted to block
//!   the rigid body motions.
//! * `NeumannZeroAverage` — interface dofs dropped; rank-deficient systems
//!   are solved up to rigid body motions (the incompatible component of the
//!   right-hand side is projected out) and the representative with
//!   zero-average displacement and rotation is selected through appended
//!   constraint rows.
//! * `Dirichlet` — interface stress dofs join the local system.
//! * `Robin` — Dirichlet plus a diagonal penalty G(alpha) on the interface
//!   block; alpha = 0 reproduces Dirichlet bit for bit.
//!
//! Sweeps visit patches in ascending anchor-node order and refresh the
//! residual after every local correction (sequential subspace correction).

use crate::assembly::{Residuals, SaddleSystem};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, FullPivLu, SINGULAR_REL_TOL};
use crate::mesh::{Mesh, Patch};
use crate::spaces::DofLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmootherBc {
    NeumannRemoveRbm,
    NeumannZeroAverage,
    Dirichlet,
    Robin,
}

#[derive(Clone, Copy, Debug)]
pub struct SmootherConfig {
    pub bc: SmootherBc,
    /// Robin parameter; ignored by the other kinds.
    pub alpha: f64,
}

impl SmootherConfig {
    pub fn new(bc: SmootherBc, alpha: f64) -> Result<Self> {
        if bc == SmootherBc::Robin && !(alpha >= 0.0) {
            return Err(Error::Config(format!("alpha = {alpha} must be >= 0")));
        }
        Ok(Self { bc, alpha })
    }

    pub fn dirichlet() -> Self {
        Self {
            bc: SmootherBc::Dirichlet,
            alpha: 0.0,
        }
    }

    pub fn robin(alpha: f64) -> Self {
        Self {
            bc: SmootherBc::Robin,
            alpha,
        }
    }

    fn mode(&self) -> LocalMode {
        match self.bc {
            SmootherBc::NeumannRemoveRbm => LocalMode::NeumannRemoveRbm,
            SmootherBc::NeumannZeroAverage => LocalMode::NeumannZeroAverage,
            SmootherBc::Dirichlet => LocalMode::Dirichlet,
            SmootherBc::Robin => LocalMode::Robin(self.alpha),
        }
    }
}

/// Local boundary treatment, including the raw (unmodified) Neumann system
/// whose expected rank deficiency is part of the method's analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalMode {
    NeumannRaw,
    NeumannRemoveRbm,
    NeumannZeroAverage,
    Dirichlet,
    Robin(f64),
}

impl LocalMode {
    fn uses_boundary_stress(&self) -> bool {
        matches!(self, LocalMode::Dirichlet | LocalMode::Robin(_))
    }
}

/// Global dof sets of one patch, in local ordering [ext | int | mult].
#[derive(Clone, Debug)]
pub struct LocalSets {
    /// Stress dofs on the artificial interfaces (empty for the Neumann
    /// kinds).
    pub ext: Vec<usize>,
    /// Remaining stress dofs of the patch: interior edges, element moments
    /// and free physical-boundary dofs.
    pub int: Vec<usize>,
    /// All multiplier dofs on the patch elements (displacement then rotation).
    pub mult: Vec<usize>,
    /// Local positions into `mult` that stay in the system (rigid-mode
    /// removal deletes three of them).
    pub kept_mult: Vec<usize>,
    /// Appended zero-average constraint rows (0 or 3).
    pub n_aug: usize,
    /// Orthonormal discrete rigid body modes over the multiplier block
    /// (zero-average kind only). The local right-hand side is projected onto
    /// their orthogonal complement, which is the compatible range of the
    /// singular pure-Neumann operator: the system is solved up to rigid body
    /// motions and the zero-average representative is returned.
    pub rigid_modes: Vec<Vec<f64>>,
}

impl LocalSets {
    pub fn n_stress(&self) -> usize {
        self.ext.len() + self.int.len()
    }

    pub fn size(&self) -> usize {
        self.n_stress() + self.kept_mult.len() + self.n_aug
    }
}

/// Dense local saddle problem with its current right-hand side.
pub struct LocalProblem {
    pub sets: LocalSets,
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
}

/// Splits the patch stress dofs into interior and boundary sets.
///
/// The local boundary treatment distinguishes three kinds of patch edges:
/// edges shared by two patch elements (always interior), artificial
/// interfaces to elements outside the patch, and edges on the domain
/// boundary. The Neumann kinds keep only the strictly interior dofs (local
/// homogeneous Neumann conditions all around, which is what allows rigid
/// body motions). Dirichlet and Robin inherit the global boundary treatment
/// on domain-boundary edges — free displacement-boundary dofs join the
/// interior set — and classify only the artificial interfaces as `ext`,
/// since only those have violated constraints on the far side. Globally
/// eliminated dofs are excluded throughout.
fn stress_sets(
    mesh: &Mesh,
    layout: &DofLayout,
    system: &SaddleSystem,
    patch: &Patch,
    include_domain_boundary: bool,
) -> (Vec<usize>, Vec<usize>) {
    let in_patch = |t: usize| patch.elements.binary_search(&t).is_ok();
    let mut interior_edges = Vec::new();
    let mut interface_edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for &t in &patch.elements {
        for k in 0..3 {
            let e = mesh.tri_edge(t, k);
            if !seen.insert(e) {
                continue;
            }
            let edge = mesh.edge(e);
            match edge.tris.1 {
                Some(other) if in_patch(edge.tris.0) && in_patch(other) => {
                    interior_edges.push(e);
                }
                Some(_) => interface_edges.push(e),
                None => {
                    if include_domain_boundary {
                        interior_edges.push(e);
                    }
                }
            }
        }
    }
    let mut int = Vec::new();
    let mut ext = Vec::new();
    for row in 0..2 {
        for &e in &interior_edges {
            for moment in 0..2 {
                int.push(layout.edge_stress_dof(row, e, moment));
            }
        }
        for &t in &patch.elements {
            for comp in 0..2 {
                int.push(layout.interior_stress_dof(row, t, comp));
            }
        }
        for &e in &interface_edges {
            for moment in 0..2 {
                ext.push(layout.edge_stress_dof(row, e, moment));
            }
        }
    }
    int.retain(|&d| !system.constrained_mask[d]);
    ext.retain(|&d| !system.constrained_mask[d]);
    int.sort_unstable();
    ext.sort_unstable();
    (ext, int)
}

fn multiplier_set(mesh: &Mesh, layout: &DofLayout, patch: &Patch) -> Vec<usize> {
    let mut mult = Vec::new();
    for &t in &patch.elements {
        for node in 0..3 {
            for comp in 0..2 {
                mult.push(layout.disp_dof(t, node, comp));
            }
        }
    }
    let mut verts: Vec<usize> = patch
        .elements
        .iter()
        .flat_map(|&t| mesh.triangle(t))
        .collect();
    verts.sort_unstable();
    verts.dedup();
    for v in verts {
        mult.push(layout.rot_dof(v));
    }
    mult
}

/// Builds the base index sets of a patch for the given local mode, before
/// any singularity handling.
pub fn local_sets(
    mesh: &Mesh,
    layout: &DofLayout,
    system: &SaddleSystem,
    patch: &Patch,
    mode: LocalMode,
) -> LocalSets {
    let with_boundary = mode.uses_boundary_stress();
    let (ext, int) = stress_sets(mesh, layout, system, patch, true);
    let ext = if with_boundary { ext } else { Vec::new() };
    let mult = multiplier_set(mesh, layout, patch);
    let kept_mult = (0..mult.len()).collect();
    LocalSets {
        ext,
        int,
        mult,
        kept_mult,
        n_aug: 0,
        rigid_modes: Vec::new(),
    }
}

/// Applies the Neumann singularity fix to a set of base sets: rigid-mode
/// removal drops the first two displacement dofs and the last rotation from
/// the local numbering; the zero-average variant appends three constraint
/// rows and records the orthonormal rigid modes used to project the local
/// right-hand side onto the compatible range.
fn modify_sets(mesh: &Mesh, layout: &DofLayout, patch: &Patch, sets: &mut LocalSets, mode: LocalMode) {
    let n_mult = sets.mult.len();
    match mode {
        LocalMode::NeumannRemoveRbm => {
            sets.kept_mult = (0..n_mult)
                .filter(|&i| i != 0 && i != 1 && i != n_mult - 1)
                .collect();
        }
        LocalMode::NeumannZeroAverage => {
            sets.n_aug = 3;
            sets.rigid_modes = rigid_body_modes(mesh, layout, patch, &sets.mult);
        }
        _ => {}
    }
}

/// Orthonormal basis of the discrete rigid body motions (two translations
/// and one rotation) over a patch's multiplier dofs. Rigid motions are
/// linear, so their canonical interpolants are exact and lie in the kernel
/// of the transposed pure-Neumann local operator.
fn rigid_body_modes(
    mesh: &Mesh,
    layout: &DofLayout,
    patch: &Patch,
    mult: &[usize],
) -> Vec<Vec<f64>> {
    let origin = mesh.vertex(patch.anchor);
    let n = mult.len();
    let mut modes = vec![vec![0.0; n]; 3];
    for (l, &dof) in mult.iter().enumerate() {
        if dof < layout.n_disp {
            let t = dof / 6;
            let node = (dof % 6) / 2;
            let comp = dof % 2;
            let p = mesh.vertex(mesh.triangle(t)[node]);
            if comp == 0 {
                modes[0][l] = 1.0;
                modes[2][l] = -(p[1] - origin[1]);
            } else {
                modes[1][l] = 1.0;
                modes[2][l] = p[0] - origin[0];
            }
        } else {
            modes[2][l] = 1.0;
        }
    }
    // Gram-Schmidt.
    for i in 0..3 {
        for j in 0..i {
            let d = crate::linalg::dot(&modes[i], &modes[j]);
            let (head, tail) = modes.split_at_mut(i);
            for (a, b) in tail[0].iter_mut().zip(head[j].iter()) {
                *a -= d * b;
            }
        }
        let nrm = crate::linalg::norm2(&modes[i]);
        for a in modes[i].iter_mut() {
            *a /= nrm;
        }
    }
    modes
}

/// Assembles the dense local matrix for the given sets and mode. The layout
/// is [ext | int | kept multipliers | augmentation].
fn local_matrix(
    mesh: &Mesh,
    system: &SaddleSystem,
    patch: &Patch,
    sets: &LocalSets,
    mode: LocalMode,
) -> DenseMatrix {
    let ne = sets.ext.len();
    let ni = sets.int.len();
    let nm = sets.kept_mult.len();
    let size = sets.size();
    let mut k = DenseMatrix::zeros(size, size);

    // Position of each global stress dof in the local ordering.
    let mut stress_pos = std::collections::HashMap::with_capacity(ne + ni);
    for (i, &d) in sets.ext.iter().enumerate() {
        stress_pos.insert(d, i);
    }
    for (i, &d) in sets.int.iter().enumerate() {
        stress_pos.insert(d, ne + i);
    }
    let mut mult_pos = std::collections::HashMap::with_capacity(nm);
    for (local, &slot) in sets.kept_mult.iter().enumerate() {
        mult_pos.insert(sets.mult[slot], ne + ni + local);
    }

    // Stress-stress block from the symmetric A.
    for (&d, &p) in &stress_pos {
        let (cols, vals) = system.a.row(d);
        for (c, v) in cols.iter().zip(vals.iter()) {
            if let Some(&q) = stress_pos.get(c) {
                k.add(p, q, *v);
            }
        }
    }
    // Multiplier rows of B and the symmetric placement of B^T.
    for (&d, &p) in &mult_pos {
        let (cols, vals) = system.b.row(d);
        for (c, v) in cols.iter().zip(vals.iter()) {
            if let Some(&q) = stress_pos.get(c) {
                k.add(p, q, *v);
                k.add(q, p, *v);
            }
        }
    }

    if sets.n_aug == 3 {
        // int_patch u_x = 0, int_patch u_y = 0, int_patch theta = 0.
        let base = ne + ni + nm;
        for (local, &slot) in sets.kept_mult.iter().enumerate() {
            let dof = sets.mult[slot];
            let p = ne + ni + local;
            if dof < system.n_disp {
                let t = dof / 6;
                let comp = dof % 2;
                let w = mesh.area(t) / 3.0;
                k.add(base + comp, p, w);
                k.add(p, base + comp, w);
            } else {
                let v = dof - system.n_disp;
                let mut w = 0.0;
                for &t in &patch.elements {
                    if mesh.triangle(t).contains(&v) {
                        w += mesh.area(t) / 3.0;
                    }
                }
                k.add(base + 2, p, w);
                k.add(p, base + 2, w);
            }
        }
    }

    if let LocalMode::Robin(alpha) = mode {
        let g = robin_diagonal(&k, ne, alpha);
        if alpha != 0.0 {
            for (p, gp) in g.iter().enumerate() {
                k.add(p, p, *gp);
            }
        }
    }
    k
}

/// Diagonal Robin penalty: G_pp = alpha * max over the p-th row of
/// [A_ee | A_ie^T | B_ie^T] in absolute value, for the `ne` boundary rows of
/// an assembled (unpenalized) local matrix.
pub fn robin_diagonal(local: &DenseMatrix, ne: usize, alpha: f64) -> Vec<f64> {
    (0..ne)
        .map(|p| {
            let row_max = local.row(p).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            alpha * row_max
        })
        .collect()
}

/// Assembles the local system of `patch`, applying the Neumann singularity
/// handling only where the raw local problem is actually rank deficient:
/// patches whose elements touch the displacement boundary inherit free
/// boundary dofs, have no rigid body motions and are solved unmodified.
fn build_local(
    mesh: &Mesh,
    layout: &DofLayout,
    system: &SaddleSystem,
    patch: &Patch,
    mode: LocalMode,
) -> (LocalSets, DenseMatrix, FullPivLu) {
    let mut sets = local_sets(mesh, layout, system, patch, mode);
    let matrix = local_matrix(mesh, system, patch, &sets, mode);
    let lu = FullPivLu::factor(&matrix);
    let needs_fix = lu.is_singular()
        && matches!(
            mode,
            LocalMode::NeumannRemoveRbm | LocalMode::NeumannZeroAverage
        );
    if !needs_fix {
        return (sets, matrix, lu);
    }
    modify_sets(mesh, layout, patch, &mut sets, mode);
    let matrix = local_matrix(mesh, system, patch, &sets, mode);
    let lu = FullPivLu::factor(&matrix);
    (sets, matrix, lu)
}

/// Extracts the local problem of `patch` for the current residual.
pub fn extract_local(
    mesh: &Mesh,
    layout: &DofLayout,
    system: &SaddleSystem,
    patch: &Patch,
    mode: LocalMode,
    r_a: &[f64],
    r_b: &[f64],
) -> LocalProblem {
    let (sets, matrix, _) = build_local(mesh, layout, system, patch, mode);
    let rhs = gather_rhs(&sets, r_a, r_b);
    LocalProblem { sets, matrix, rhs }
}

fn gather_rhs(sets: &LocalSets, r_a: &[f64], r_b: &[f64]) -> Vec<f64> {
    let mut rhs = Vec::with_capacity(sets.size());
    for &d in &sets.ext {
        rhs.push(r_a[d]);
    }
    for &d in &sets.int {
        rhs.push(r_a[d]);
    }
    for &slot in &sets.kept_mult {
        rhs.push(r_b[sets.mult[slot]]);
    }
    rhs.resize(sets.size(), 0.0); // zero-average constraint rows
    if !sets.rigid_modes.is_empty() {
        // Compatibility projection: remove the rigid-mode component of the
        // constraint residual, which lies outside the range of the singular
        // local operator. What is filtered here stays in the global residual.
        let base = sets.ext.len() + sets.int.len();
        let nm = sets.kept_mult.len();
        for mode in &sets.rigid_modes {
            let block = &mut rhs[base..base + nm];
            let d: f64 = block.iter().zip(mode.iter()).map(|(a, b)| a * b).sum();
            for (a, b) in block.iter_mut().zip(mode.iter()) {
                *a -= d * b;
            }
        }
    }
    rhs
}

/// Correction carried by one local solve, as (global dof, increment) pairs.
pub struct LocalCorrection {
    pub stress: Vec<(usize, f64)>,
    pub mult: Vec<(usize, f64)>,
}

/// Factors and solves a local problem. Rank-deficient systems (the
/// unmodified Neumann case) surface as `SingularLocalSystem`.
pub fn local_solve(problem: &LocalProblem, anchor: usize) -> Result<LocalCorrection> {
    let lu = FullPivLu::factor(&problem.matrix);
    solve_with(&lu, &problem.sets, &problem.rhs, anchor)
}

fn solve_with(
    lu: &FullPivLu,
    sets: &LocalSets,
    rhs: &[f64],
    anchor: usize,
) -> Result<LocalCorrection> {
    let sol = lu.solve(rhs).map_err(|_| Error::SingularLocalSystem {
        anchor,
        pivot: lu.min_pivot(),
        threshold: SINGULAR_REL_TOL * lu.max_pivot(),
    })?;
    let ne = sets.ext.len();
    let ni = sets.int.len();
    let mut stress = Vec::with_capacity(ne + ni);
    for (i, &d) in sets.ext.iter().enumerate() {
        stress.push((d, sol[i]));
    }
    for (i, &d) in sets.int.iter().enumerate() {
        stress.push((d, sol[ne + i]));
    }
    let mut mult = Vec::with_capacity(sets.kept_mult.len());
    for (local, &slot) in sets.kept_mult.iter().enumerate() {
        mult.push((sets.mult[slot], sol[ne + ni + local]));
    }
    Ok(LocalCorrection { stress, mult })
}

/// Patch data and cached factorizations for one level. Local matrices do not
/// change between sweeps, so each patch is factored once.
pub struct SmootherContext {
    pub cfg: SmootherConfig,
    pub patches: Vec<Patch>,
    sets: Vec<LocalSets>,
    factors: Vec<FullPivLu>,
}

impl SmootherContext {
    pub fn build(
        mesh: &Mesh,
        layout: &DofLayout,
        system: &SaddleSystem,
        cfg: SmootherConfig,
    ) -> Result<SmootherContext> {
        let patches = mesh.all_patches()?;
        Self::build_with_patches(mesh, layout, system, cfg, patches)
    }

    pub fn build_with_patches(
        mesh: &Mesh,
        layout: &DofLayout,
        system: &SaddleSystem,
        cfg: SmootherConfig,
        patches: Vec<Patch>,
    ) -> Result<SmootherContext> {
        let mode = cfg.mode();
        let mut sets = Vec::with_capacity(patches.len());
        let mut factors = Vec::with_capacity(patches.len());
        for patch in &patches {
            let (s, _, lu) = build_local(mesh, layout, system, patch, mode);
            if lu.is_singular() {
                return Err(Error::SingularLocalSystem {
                    anchor: patch.anchor,
                    pivot: lu.min_pivot(),
                    threshold: SINGULAR_REL_TOL * lu.max_pivot(),
                });
            }
            sets.push(s);
            factors.push(lu);
        }
        Ok(SmootherContext {
            cfg,
            patches,
            sets,
            factors,
        })
    }

    /// One multiplicative sweep over all patches against the right-hand side
    /// (f, h). `r_a`/`r_b` must hold the residual of (y, z) on entry; on exit
    /// they hold the freshly recomputed residual of the updated state, which
    /// is also returned as norms.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep_inner(
        &self,
        system: &SaddleSystem,
        f: &[f64],
        h: &[f64],
        y: &mut [f64],
        z: &mut [f64],
        r_a: &mut [f64],
        r_b: &mut [f64],
    ) -> Result<Residuals> {
        for ((patch, sets), lu) in self
            .patches
            .iter()
            .zip(self.sets.iter())
            .zip(self.factors.iter())
        {
            let rhs = gather_rhs(sets, r_a, r_b);
            let corr = solve_with(lu, sets, &rhs, patch.anchor)?;
            apply_correction(system, &corr, y, z, r_a, r_b);
        }
        system.residuals_with_rhs_into(f, h, y, z, r_a, r_b);
        Ok(Residuals::from_parts(r_a.to_vec(), r_b.to_vec()))
    }

    /// Stand-alone sweep against the assembled loads: computes the entry
    /// residual itself.
    pub fn sweep(&self, system: &SaddleSystem, y: &mut [f64], z: &mut [f64]) -> Result<Residuals> {
        let mut r_a = vec![0.0; system.n];
        let mut r_b = vec![0.0; system.m];
        system.residuals_into(y, z, &mut r_a, &mut r_b);
        self.sweep_inner(system, &system.f, &system.h, y, z, &mut r_a, &mut r_b)
    }
}

/// Adds a local correction to the state and downdates the residual through
/// the sparse columns it touches.
fn apply_correction(
    system: &SaddleSystem,
    corr: &LocalCorrection,
    y: &mut [f64],
    z: &mut [f64],
    r_a: &mut [f64],
    r_b: &mut [f64],
) {
    for &(d, dy) in &corr.stress {
        if dy == 0.0 {
            continue;
        }
        y[d] += dy;
        let (cols, vals) = system.a.row(d); // column d by symmetry
        for (c, v) in cols.iter().zip(vals.iter()) {
            r_a[*c] -= v * dy;
        }
        let (cols, vals) = system.bt.row(d);
        for (c, v) in cols.iter().zip(vals.iter()) {
            r_b[*c] -= v * dy;
        }
    }
    for &(d, dz) in &corr.mult {
        if dz == 0.0 {
            continue;
        }
        z[d] += dz;
        let (cols, vals) = system.b.row(d); // column d of B^T
        for (c, v) in cols.iter().zip(vals.iter()) {
            r_a[*c] -= v * dz;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, FreeSaddleSolver, Lambda, Loads, MaterialParams};
    use crate::mesh::{all_dirichlet, BoundaryLabel, Mesh};
    use crate::rng::SplitMix64;

    fn fan_mesh(n_elems: usize) -> Mesh {
        // Triangles fanning around vertex 0, with traction labels all
        // around: every fan boundary dof is eliminated, leaving exactly the
        // internal ones that the local Neumann problems see.
        let mut vertices = vec![[0.0, 0.0]];
        let mut triangles = Vec::new();
        for k in 0..=n_elems {
            let angle = std::f64::consts::PI * k as f64 / (n_elems as f64 + 1.0);
            vertices.push([angle.cos(), angle.sin()]);
        }
        for k in 0..n_elems {
            triangles.push([0, k + 1, k + 2]);
        }
        Mesh::build(0, vertices, triangles, &crate::mesh::all_neumann).unwrap()
    }

    fn fan_problem(n_elems: usize) -> (Mesh, DofLayout, SaddleSystem) {
        let mesh = fan_mesh(n_elems);
        let layout = DofLayout::build(&mesh);
        let mat = MaterialParams::new(1.0, Lambda::Finite(1.0)).unwrap();
        let system = assemble(&mesh, &layout, &mat, &Loads::zero()).unwrap();
        (mesh, layout, system)
    }

    #[test]
    fn fan_internal_dof_counts() {
        // (n, m) = (4, 9), (12, 16), (20, 23) for 1-, 2-, 3-element fans.
        let expect = [(1usize, 4usize, 9usize), (2, 12, 16), (3, 20, 23)];
        for &(k, n_loc, m_loc) in &expect {
            let (mesh, layout, system) = fan_problem(k);
            let patch = mesh.node_patch(0).unwrap();
            assert_eq!(patch.elements.len(), k);
            let sets = local_sets(&mesh, &layout, &system, &patch, LocalMode::NeumannRaw);
            assert_eq!(sets.int.len(), n_loc, "stress dofs for {k}-element fan");
            assert_eq!(sets.mult.len(), m_loc, "multiplier dofs for {k}-element fan");
            assert!(sets.ext.is_empty());
        }
        // The three-element fan allows exactly the rigid body motions.
        assert_eq!(23 - 20, 3);
    }

    #[test]
    fn dirichlet_sets_add_interface_edge_dofs() {
        // Interior node of a structured mesh: the six spoke edges and the six
        // element moments stay internal, the six ring edges (artificial
        // interfaces to the surrounding elements) form the ext set.
        let mesh = crate::mesh::unit_square_mesh(4, &all_dirichlet).unwrap();
        let layout = DofLayout::build(&mesh);
        let mat = MaterialParams::new(1.0, Lambda::Finite(1.0)).unwrap();
        let system = assemble(&mesh, &layout, &mat, &Loads::zero()).unwrap();
        let interior = (0..mesh.n_vertices())
            .find(|&v| {
                let p = mesh.vertex(v);
                (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12
            })
            .unwrap();
        let patch = mesh.node_patch(interior).unwrap();
        assert_eq!(patch.elements.len(), 6);
        let sets = local_sets(&mesh, &layout, &system, &patch, LocalMode::Dirichlet);
        assert_eq!(sets.ext.len(), 24);
        assert_eq!(sets.int.len(), 48);
        assert_eq!(sets.mult.len(), 6 * 6 + 7);
        // The Neumann kinds drop the interface dofs.
        let sets_n = local_sets(&mesh, &layout, &system, &patch, LocalMode::NeumannRaw);
        assert!(sets_n.ext.is_empty());
        assert_eq!(sets_n.int.len(), 48);
    }

    #[test]
    fn displacement_boundary_dofs_stay_in_dirichlet_local_systems() {
        // Under the Dirichlet/Robin kinds, a patch at the displacement part
        // of the boundary keeps the free boundary edge dofs in its internal
        // set (the local problem inherits the global boundary condition); the
        // Neumann kinds drop them along with everything else on the patch
        // boundary.
        let (mesh, layout, system) = patch_problem();
        let corner = (0..mesh.n_vertices())
            .find(|&v| {
                let p = mesh.vertex(v);
                p[0].abs() < 1e-12 && p[1].abs() < 1e-12
            })
            .unwrap();
        let patch = mesh.enlarge_patch(mesh.node_patch(corner).unwrap()).unwrap();
        let sets = local_sets(&mesh, &layout, &system, &patch, LocalMode::Dirichlet);
        let sets_n = local_sets(&mesh, &layout, &system, &patch, LocalMode::NeumannRaw);
        let mut has_boundary_dof = false;
        for (e, label) in mesh.boundary_edges() {
            if label == BoundaryLabel::Dirichlet {
                for row in 0..2 {
                    for moment in 0..2 {
                        let d = layout.edge_stress_dof(row, e, moment);
                        if sets.int.contains(&d) {
                            has_boundary_dof = true;
                            // Inherited under the Neumann kinds as well; the
                            // raw local system of this patch is nonsingular.
                            assert!(sets_n.int.contains(&d));
                        }
                        assert!(!sets.ext.contains(&d));
                        assert!(!sets_n.ext.contains(&d));
                    }
                }
            }
        }
        assert!(has_boundary_dof);
        let (_, _, lu) = super::build_local(&mesh, &layout, &system, &patch, LocalMode::NeumannRaw);
        assert!(!lu.is_singular());
    }

    #[test]
    fn unmodified_neumann_fan_is_rank_deficient() {
        // One-element fan: m - n = 5 > 3 rigid modes, so the raw local saddle
        // system loses at least five pivots.
        let (mesh, layout, system) = fan_problem(1);
        let patch = mesh.node_patch(0).unwrap();
        let (y, z) = system.initial_state();
        let r = system.residuals(&y, &z);
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::NeumannRaw,
            &r.r_a,
            &r.r_b,
        );
        let lu = FullPivLu::factor(&lp.matrix);
        assert!(lu.is_singular());
        assert!(lp.matrix.nrows() - lu.rank() >= 5);
        assert!(local_solve(&lp, 0).is_err());
    }

    #[test]
    fn modified_neumann_fans_are_solvable() {
        let (mesh, layout, system) = fan_problem(3);
        let patch = mesh.node_patch(0).unwrap();
        let (y, z) = system.initial_state();
        let r = system.residuals(&y, &z);
        for mode in [LocalMode::NeumannRemoveRbm, LocalMode::NeumannZeroAverage] {
            let lp = extract_local(&mesh, &layout, &system, &patch, mode, &r.r_a, &r.r_b);
            let lu = FullPivLu::factor(&lp.matrix);
            assert!(!lu.is_singular(), "{mode:?}");
        }
    }

    #[test]
    fn robin_diagonal_matches_brute_force_scan() {
        let mut rng = SplitMix64::new(17);
        let n = 12;
        let ne = 5;
        let mut k = DenseMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                k.set(r, c, rng.next_symmetric());
            }
        }
        let alpha = 0.7;
        let g = robin_diagonal(&k, ne, alpha);
        for p in 0..ne {
            let mut m = 0.0_f64;
            for c in 0..n {
                m = m.max(k.at(p, c).abs());
            }
            assert_eq!(g[p], alpha * m);
        }
        assert!(robin_diagonal(&k, ne, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn robin_definition_unrolled() {
        // Row with entries {A_ee: 0.5, A_ie^T: -2, B_ie^T: 1} and alpha = 1
        // gives G = 2.
        let mut k = DenseMatrix::zeros(3, 3);
        k.set(0, 0, 0.5);
        k.set(0, 1, -2.0);
        k.set(0, 2, 1.0);
        let g = robin_diagonal(&k, 1, 1.0);
        assert_eq!(g[0], 2.0);
    }

    fn patch_problem() -> (Mesh, DofLayout, SaddleSystem) {
        let classify = |mid: [f64; 2]| {
            if mid[0] < 1e-12 {
                BoundaryLabel::Dirichlet
            } else {
                BoundaryLabel::Neumann
            }
        };
        let mesh = crate::mesh::unit_square_mesh(3, &classify).unwrap();
        let layout = DofLayout::build(&mesh);
        let mat = MaterialParams::new(1.0, Lambda::Finite(1.0)).unwrap();
        let g_n = |p: [f64; 2]| [0.01 * p[1], 0.02];
        let body = |_: [f64; 2]| [0.0, -0.1];
        let loads = Loads {
            dirichlet: &crate::assembly::ZERO_VECTOR_FIELD,
            neumann: &g_n,
            body: &body,
        };
        let system = assemble(&mesh, &layout, &mat, &loads).unwrap();
        (mesh, layout, system)
    }

    #[test]
    fn local_rhs_vanishes_at_exact_solution() {
        let (mesh, layout, system) = patch_problem();
        let solver = FreeSaddleSolver::build(&system).unwrap();
        let (y, z) = solver.solve_system(&system).unwrap();
        let r = system.residuals(&y, &z);
        let patch = mesh
            .enlarge_patch(mesh.node_patch(5).unwrap())
            .unwrap();
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::Dirichlet,
            &r.r_a,
            &r.r_b,
        );
        let scale = crate::linalg::norm2(&system.f) + crate::linalg::norm2(&system.h);
        for v in &lp.rhs {
            assert!(v.abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn dirichlet_correction_zeroes_local_residual() {
        let (mesh, layout, system) = patch_problem();
        let (mut y, mut z) = system.initial_state();
        let mut r_a = vec![0.0; system.n];
        let mut r_b = vec![0.0; system.m];
        system.residuals_into(&y, &z, &mut r_a, &mut r_b);
        let patch = mesh.enlarge_patch(mesh.node_patch(7).unwrap()).unwrap();
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::Dirichlet,
            &r_a,
            &r_b,
        );
        let scale = crate::linalg::norm2(&lp.rhs).max(1e-30);
        let corr = local_solve(&lp, patch.anchor).unwrap();
        apply_correction(&system, &corr, &mut y, &mut z, &mut r_a, &mut r_b);
        let after = gather_rhs(&lp.sets, &r_a, &r_b);
        for v in &after {
            assert!(v.abs() <= 1e-10 * scale, "{v} vs scale {scale}");
        }
    }

    #[test]
    fn robin_correction_zeroes_unpenalized_local_rows() {
        let (mesh, layout, system) = patch_problem();
        let (mut y, mut z) = system.initial_state();
        let mut r_a = vec![0.0; system.n];
        let mut r_b = vec![0.0; system.m];
        system.residuals_into(&y, &z, &mut r_a, &mut r_b);
        let patch = mesh.enlarge_patch(mesh.node_patch(7).unwrap()).unwrap();
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::Robin(1.0),
            &r_a,
            &r_b,
        );
        let scale = crate::linalg::norm2(&lp.rhs).max(1e-30);
        let corr = local_solve(&lp, patch.anchor).unwrap();
        apply_correction(&system, &corr, &mut y, &mut z, &mut r_a, &mut r_b);
        // The interior and multiplier equations are satisfied exactly; the
        // penalized boundary rows keep a G y_ext residual by construction.
        let after = gather_rhs(&lp.sets, &r_a, &r_b);
        for v in &after[lp.sets.ext.len()..] {
            assert!(v.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn zero_average_constraints_hold_after_solve() {
        let (mesh, layout, system) = patch_problem();
        let (y, z) = system.initial_state();
        let r = system.residuals(&y, &z);
        // A node whose patch stays clear of the displacement boundary: the
        // raw pure-Neumann local system is singular there, so the
        // zero-average treatment actually engages.
        let interior = (0..mesh.n_vertices())
            .find(|&v| {
                let p = mesh.vertex(v);
                p[0] > 0.5 && p[0] < 0.9 && p[1] > 0.1 && p[1] < 0.9
            })
            .unwrap();
        let patch = mesh.enlarge_patch(mesh.node_patch(interior).unwrap()).unwrap();
        {
            let raw = local_sets(&mesh, &layout, &system, &patch, LocalMode::NeumannRaw);
            let k = local_matrix(&mesh, &system, &patch, &raw, LocalMode::NeumannRaw);
            assert!(FullPivLu::factor(&k).is_singular());
        }
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::NeumannZeroAverage,
            &r.r_a,
            &r.r_b,
        );
        let corr = local_solve(&lp, patch.anchor).unwrap();
        // Quadrature of the returned fields over the patch.
        let mut sums = [0.0_f64; 3];
        for &(dof, val) in &corr.mult {
            if dof < system.n_disp {
                let t = dof / 6;
                sums[dof % 2] += val * mesh.area(t) / 3.0;
            } else {
                let v = dof - system.n_disp;
                for &t in &patch.elements {
                    if mesh.triangle(t).contains(&v) {
                        sums[2] += val * mesh.area(t) / 3.0;
                    }
                }
            }
        }
        let scale = crate::linalg::norm2(&lp.rhs).max(1.0);
        for s in sums {
            assert!(s.abs() <= 1e-10 * scale, "{s}");
        }
    }

    #[test]
    fn sweep_preserves_exact_solution_and_constraints() {
        let (mesh, layout, system) = patch_problem();
        let solver = FreeSaddleSolver::build(&system).unwrap();
        let (y, z) = solver.solve_system(&system).unwrap();
        let ctx =
            SmootherContext::build(&mesh, &layout, &system, SmootherConfig::robin(1.0)).unwrap();
        let mut y2 = y.clone();
        let mut z2 = z.clone();
        let r = ctx.sweep(&system, &mut y2, &mut z2).unwrap();
        let scale = crate::linalg::norm2(&system.f) + crate::linalg::norm2(&system.h);
        assert!(r.norm <= 1e-9 * scale);
        for &(dof, val) in &system.constrained {
            assert_eq!(y2[dof], val, "constrained dof {dof} moved");
        }
    }

    #[test]
    fn dirichlet_solve_on_whole_domain_patch_is_exact() {
        // A patch covering the entire (tiny, all-displacement-boundary) mesh
        // reproduces the global direct solution in one local solve.
        let mesh = fan_like_dirichlet_mesh();
        let layout = DofLayout::build(&mesh);
        let mat = MaterialParams::new(1.0, Lambda::Finite(1.0)).unwrap();
        let g_d = |p: [f64; 2]| [0.1 * p[1], -0.05 * p[0]];
        let loads = Loads {
            dirichlet: &g_d,
            neumann: &crate::assembly::ZERO_VECTOR_FIELD,
            body: &crate::assembly::ZERO_VECTOR_FIELD,
        };
        let system = assemble(&mesh, &layout, &mat, &loads).unwrap();
        let patch = mesh.enlarge_patch(mesh.node_patch(0).unwrap()).unwrap();
        assert_eq!(patch.elements.len(), mesh.n_triangles());

        let (mut y, mut z) = system.initial_state();
        let r = system.residuals(&y, &z);
        let lp = extract_local(
            &mesh,
            &layout,
            &system,
            &patch,
            LocalMode::Dirichlet,
            &r.r_a,
            &r.r_b,
        );
        let corr = local_solve(&lp, 0).unwrap();
        for (d, v) in corr.stress {
            y[d] += v;
        }
        for (d, v) in corr.mult {
            z[d] += v;
        }
        let solver = FreeSaddleSolver::build(&system).unwrap();
        let (yd, zd) = solver.solve_system(&system).unwrap();
        let scale = crate::linalg::norm2(&yd) + crate::linalg::norm2(&zd);
        for (a, b) in y.iter().zip(yd.iter()).chain(z.iter().zip(zd.iter())) {
            assert!((a - b).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    fn fan_like_dirichlet_mesh() -> Mesh {
        let mut vertices = vec![[0.0, 0.0]];
        let mut triangles = Vec::new();
        for k in 0..=3 {
            let angle = std::f64::consts::PI * k as f64 / 4.0;
            vertices.push([angle.cos(), angle.sin()]);
        }
        for k in 0..3 {
            triangles.push([0, k + 1, k + 2]);
        }
        Mesh::build(0, vertices, triangles, &all_dirichlet).unwrap()
    }

    #[test]
    fn robin_zero_matches_dirichlet_bit_for_bit() {
        let (mesh, layout, system) = patch_problem();
        let ctx_d =
            SmootherContext::build(&mesh, &layout, &system, SmootherConfig::dirichlet()).unwrap();
        let ctx_r =
            SmootherContext::build(&mesh, &layout, &system, SmootherConfig::robin(0.0)).unwrap();
        let (mut yd, mut zd) = system.initial_state();
        let (mut yr, mut zr) = system.initial_state();
        for _ in 0..3 {
            ctx_d.sweep(&system, &mut yd, &mut zd).unwrap();
            ctx_r.sweep(&system, &mut yr, &mut zr).unwrap();
        }
        for (a, b) in yd.iter().zip(yr.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in zd.iter().zip(zr.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sweeps_reduce_residual_on_small_problem() {
        let (mesh, layout, system) = patch_problem();
        let ctx =
            SmootherContext::build(&mesh, &layout, &system, SmootherConfig::robin(1.0)).unwrap();
        let (mut y, mut z) = system.initial_state();
        let r0 = system.residuals(&y, &z).norm;
        let mut last = r0;
        for _ in 0..20 {
            last = ctx.sweep(&system, &mut y, &mut z).unwrap().norm;
        }
        assert!(last < 1e-2 * r0, "reduction {}", last / r0);
    }
}
