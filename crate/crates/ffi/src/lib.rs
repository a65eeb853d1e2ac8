//! C ABI for the dualmg solver library.
//!
//! The interface works through opaque handles and integer status codes; the
//! last error message per thread is retrievable as a C string. A generated
//! header lives in `include/dualmg.h` (regenerated by the build script).

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::Path;

use dualmg::assembly::{assemble, FreeSaddleSolver};
use dualmg::mesh::Mesh;
use dualmg::multigrid::{CycleConfig, CycleMode, Hierarchy};
use dualmg::problems::{cook_problem_with_base, face_problem, ProblemSpec};
use dualmg::smoother::SmootherConfig;
use dualmg::spaces::DofLayout;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualmgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    BuildFailed = 4,
    SolveFailed = 5,
}

/// Opaque mesh handle.
pub struct DualmgMesh {
    mesh: Mesh,
}

/// Opaque problem handle: a benchmark geometry with its loads.
pub struct DualmgProblem {
    spec: ProblemSpec,
}

/// Solve statistics reported back to the caller.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DualmgSolveStats {
    pub iterations: u64,
    pub converged: u8,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Geometric-mean residual contraction per cycle.
    pub contraction: f64,
    /// Total dofs on the finest level.
    pub fine_dofs: u64,
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn dualmg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (truncated to
/// `len` bytes including the terminator). Returns the untruncated length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn dualmg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Guarantee termination on truncation.
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Loads a mesh from the plain-text format (`V T B` header, vertex lines,
/// triangle lines, boundary lines `v0 v1 N|D`).
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dualmg_mesh_load(
    path: *const c_char,
    out: *mut *mut DualmgMesh,
) -> DualmgStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DualmgStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_error("path is not valid UTF-8");
        return DualmgStatus::InvalidArgument;
    };
    match Mesh::read_file(0, Path::new(path)) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(DualmgMesh { mesh }));
            DualmgStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::IoError
        }
    }
}

/// Writes a mesh in the plain-text format.
///
/// # Safety
/// `mesh` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn dualmg_mesh_write(
    mesh: *const DualmgMesh,
    path: *const c_char,
) -> DualmgStatus {
    if mesh.is_null() || path.is_null() {
        set_error("null pointer argument");
        return DualmgStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_error("path is not valid UTF-8");
        return DualmgStatus::InvalidArgument;
    };
    match (*mesh).mesh.write_file(Path::new(path)) {
        Ok(()) => DualmgStatus::Ok,
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::IoError
        }
    }
}

/// Vertex, triangle and boundary-edge counts of a mesh.
///
/// # Safety
/// `mesh` must be a live handle; count pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn dualmg_mesh_counts(
    mesh: *const DualmgMesh,
    vertices: *mut u64,
    triangles: *mut u64,
    boundary_edges: *mut u64,
) -> DualmgStatus {
    if mesh.is_null() {
        set_error("null mesh handle");
        return DualmgStatus::NullArgument;
    }
    let m = &(*mesh).mesh;
    if !vertices.is_null() {
        *vertices = m.n_vertices() as u64;
    }
    if !triangles.is_null() {
        *triangles = m.n_triangles() as u64;
    }
    if !boundary_edges.is_null() {
        *boundary_edges = m.n_boundary_edges() as u64;
    }
    DualmgStatus::Ok
}

/// Releases a mesh handle.
///
/// # Safety
/// `mesh` must come from `dualmg_mesh_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dualmg_mesh_free(mesh: *mut DualmgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Benchmark problem kinds exposed through the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualmgProblemKind {
    Cook = 0,
    Face = 1,
}

/// Creates a benchmark problem handle.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dualmg_problem_create(
    kind: DualmgProblemKind,
    out: *mut *mut DualmgProblem,
) -> DualmgStatus {
    if out.is_null() {
        set_error("null output pointer");
        return DualmgStatus::NullArgument;
    }
    let spec = match kind {
        DualmgProblemKind::Cook => cook_problem_with_base(5, 0).map(|(s, _)| s),
        DualmgProblemKind::Face => face_problem(0).map(|(s, _)| s),
    };
    match spec {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(DualmgProblem { spec }));
            DualmgStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::BuildFailed
        }
    }
}

/// Releases a problem handle.
///
/// # Safety
/// `problem` must come from `dualmg_problem_create` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dualmg_problem_free(problem: *mut DualmgProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Total dofs (stress plus multipliers) after `refinements` uniform
/// refinements of the problem's coarse mesh.
///
/// # Safety
/// `problem` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dualmg_problem_dofs(
    problem: *const DualmgProblem,
    refinements: u32,
    out: *mut u64,
) -> DualmgStatus {
    if problem.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DualmgStatus::NullArgument;
    }
    let spec = &(*problem).spec;
    match spec.hierarchy(refinements as usize) {
        Ok(h) => {
            let layout = DofLayout::build(h.finest());
            *out = (layout.n_stress + layout.n_mult()) as u64;
            DualmgStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::BuildFailed
        }
    }
}

/// Solves the problem with the patch-smoothed multigrid method.
///
/// `mode` is 0 for V-cycles, 1 for the two-grid method; `alpha` is the Robin
/// parameter of the smoother. Non-convergence within `max_cycles` is
/// reported through `stats.converged`, not as an error status.
///
/// # Safety
/// `problem` must be a live handle; `stats` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dualmg_solve_multigrid(
    problem: *const DualmgProblem,
    refinements: u32,
    mode: c_int,
    alpha: f64,
    pre_smooth: u32,
    post_smooth: u32,
    tol: f64,
    max_cycles: u32,
    stats: *mut DualmgSolveStats,
) -> DualmgStatus {
    if problem.is_null() || stats.is_null() {
        set_error("null pointer argument");
        return DualmgStatus::NullArgument;
    }
    if refinements == 0 {
        set_error("multigrid needs at least one refinement");
        return DualmgStatus::InvalidArgument;
    }
    if !(alpha >= 0.0) || !(tol > 0.0) {
        set_error("alpha must be >= 0 and tol > 0");
        return DualmgStatus::InvalidArgument;
    }
    let cycle_mode = match mode {
        0 => CycleMode::VCycle,
        1 => CycleMode::TwoGrid,
        other => {
            set_error(&format!("unknown cycle mode {other}"));
            return DualmgStatus::InvalidArgument;
        }
    };
    let spec = &(*problem).spec;
    let hierarchy = match Hierarchy::build(
        spec.coarse_mesh.clone(),
        refinements as usize,
        &spec.material,
        &spec.loads(),
        SmootherConfig::robin(alpha),
    ) {
        Ok(h) => h,
        Err(e) => {
            set_error(&e.to_string());
            return DualmgStatus::BuildFailed;
        }
    };
    let cfg = CycleConfig {
        pre: pre_smooth as usize,
        post: post_smooth as usize,
        mode: cycle_mode,
        tol,
        max_cycles: max_cycles as usize,
    };
    match hierarchy.solve(&cfg) {
        Ok((_, _, report)) => {
            *stats = DualmgSolveStats {
                iterations: report.cycles as u64,
                converged: report.converged as u8,
                initial_residual: report.initial_norm,
                final_residual: report.final_norm,
                contraction: report.contraction,
                fine_dofs: *hierarchy.dofs_per_level().last().unwrap() as u64,
            };
            DualmgStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::SolveFailed
        }
    }
}

/// Solves the problem directly on the refined mesh and reports the residual.
///
/// # Safety
/// `problem` must be a live handle; `stats` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dualmg_solve_direct(
    problem: *const DualmgProblem,
    refinements: u32,
    stats: *mut DualmgSolveStats,
) -> DualmgStatus {
    if problem.is_null() || stats.is_null() {
        set_error("null pointer argument");
        return DualmgStatus::NullArgument;
    }
    let spec = &(*problem).spec;
    let run = || -> dualmg::Result<DualmgSolveStats> {
        let hierarchy = spec.hierarchy(refinements as usize)?;
        let mesh = hierarchy.finest();
        let layout = DofLayout::build(mesh);
        let system = assemble(mesh, &layout, &spec.material, &spec.loads())?;
        let solver = FreeSaddleSolver::build(&system)?;
        let (y, z) = solver.solve_system(&system)?;
        let r = system.residuals(&y, &z);
        Ok(DualmgSolveStats {
            iterations: 1,
            converged: 1,
            initial_residual: 0.0,
            final_residual: r.norm,
            contraction: 0.0,
            fine_dofs: (system.n + system.m) as u64,
        })
    };
    match run() {
        Ok(s) => {
            *stats = s;
            DualmgStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            DualmgStatus::SolveFailed
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_c_string() {
        let v = unsafe { CStr::from_ptr(dualmg_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn mesh_roundtrip_through_ffi() {
        let dir = std::env::temp_dir().join("dualmg_ffi_mesh");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("square.msh");
        let mesh = dualmg::mesh::unit_square_mesh(2, &dualmg::mesh::all_dirichlet).unwrap();
        mesh.write_file(&path).unwrap();

        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut handle: *mut DualmgMesh = std::ptr::null_mut();
        let status = unsafe { dualmg_mesh_load(c_path.as_ptr(), &mut handle) };
        assert_eq!(status, DualmgStatus::Ok);
        let (mut v, mut t, mut b) = (0u64, 0u64, 0u64);
        unsafe {
            assert_eq!(
                dualmg_mesh_counts(handle, &mut v, &mut t, &mut b),
                DualmgStatus::Ok
            );
        }
        assert_eq!(v, mesh.n_vertices() as u64);
        assert_eq!(t, mesh.n_triangles() as u64);
        assert_eq!(b, mesh.n_boundary_edges() as u64);
        unsafe { dualmg_mesh_free(handle) };
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn missing_file_reports_error() {
        let c_path = CString::new("/nonexistent/mesh.txt").unwrap();
        let mut handle: *mut DualmgMesh = std::ptr::null_mut();
        let status = unsafe { dualmg_mesh_load(c_path.as_ptr(), &mut handle) };
        assert_eq!(status, DualmgStatus::IoError);
        let mut buf = [0 as c_char; 256];
        let n = unsafe { dualmg_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 1);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert!(!msg.is_empty());
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status = unsafe { dualmg_mesh_load(std::ptr::null(), std::ptr::null_mut()) };
        assert_eq!(status, DualmgStatus::NullArgument);
        unsafe { dualmg_mesh_free(std::ptr::null_mut()) };
        unsafe { dualmg_problem_free(std::ptr::null_mut()) };
    }

    #[test]
    fn cook_multigrid_through_ffi() {
        let mut problem: *mut DualmgProblem = std::ptr::null_mut();
        let status = unsafe { dualmg_problem_create(DualmgProblemKind::Cook, &mut problem) };
        assert_eq!(status, DualmgStatus::Ok);

        let mut dofs = 0u64;
        unsafe {
            assert_eq!(dualmg_problem_dofs(problem, 1, &mut dofs), DualmgStatus::Ok);
        }
        assert!(dofs > 1000);

        let mut stats = DualmgSolveStats::default();
        let status =
            unsafe { dualmg_solve_multigrid(problem, 1, 0, 1.0, 5, 5, 1e-8, 40, &mut stats) };
        assert_eq!(status, DualmgStatus::Ok);
        assert_eq!(stats.converged, 1);
        assert!(stats.iterations > 0 && stats.iterations <= 40);
        assert!(stats.final_residual <= 1e-8 * stats.initial_residual);
        assert_eq!(stats.fine_dofs, dofs);
        unsafe { dualmg_problem_free(problem) };
    }

    #[test]
    fn invalid_mode_is_rejected() {
        let mut problem: *mut DualmgProblem = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                dualmg_problem_create(DualmgProblemKind::Face, &mut problem),
                DualmgStatus::Ok
            );
        }
        let mut stats = DualmgSolveStats::default();
        let status =
            unsafe { dualmg_solve_multigrid(problem, 1, 7, 1.0, 5, 5, 1e-8, 10, &mut stats) };
        assert_eq!(status, DualmgStatus::InvalidArgument);
        unsafe { dualmg_problem_free(problem) };
    }
}
