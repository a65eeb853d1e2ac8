//! Benchmark problems and manufactured solutions.
//!
//! * Cook membrane: the standard tapered quadrilateral clamped on the left,
//!   loaded by a constant vertical traction on the right, incompressible by
//!   default.
//! * Face domain: the unit square with four polygonal holes (two squares,
//!   one triangle, one rectangle); a quadratic displacement is prescribed on
//!   the bottom edge and on the triangular hole, everything else is
//!   traction-free.
//! * Dual Poisson: scalar flux/potential model used to relate the diagonal
//!   boundary penalty to a lumped Robin boundary mass.
//! * Manufactured elasticity: polynomial displacement fields with exact
//!   stress, rotation and body force for convergence-order checks.

use crate::assembly::{Loads, MaterialParams};
use crate::error::{Error, Result};
use crate::linalg::{CooMatrix, CsrMatrix, DenseMatrix};
use crate::mesh::{grid_mesh, BoundaryLabel, Mesh, MeshHierarchy};
use crate::quadrature::{edge_gauss, quadrature};
use crate::spaces::{DofLayout, ElementBasis};

type VecField = Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// A geometry plus its boundary data and material.
pub struct ProblemSpec {
    pub name: String,
    pub coarse_mesh: Mesh,
    pub material: MaterialParams,
    g_d: VecField,
    g_n: VecField,
    body: VecField,
}

impl ProblemSpec {
    pub fn loads(&self) -> Loads<'_> {
        Loads {
            dirichlet: &*self.g_d,
            neumann: &*self.g_n,
            body: &*self.body,
        }
    }

    pub fn hierarchy(&self, refinements: usize) -> Result<MeshHierarchy> {
        MeshHierarchy::build(self.coarse_mesh.clone(), refinements)
    }
}

const GEOM_EPS: f64 = 1e-9;

/// Cook membrane quadrilateral (0,0), (48,44), (48,60), (0,44).
const COOK_X: f64 = 48.0;

fn cook_map(xi: f64, eta: f64) -> [f64; 2] {
    [COOK_X * xi, 44.0 * xi + 44.0 * eta - 28.0 * xi * eta]
}

fn cook_classifier(mid: [f64; 2]) -> BoundaryLabel {
    if mid[0] < GEOM_EPS {
        BoundaryLabel::Dirichlet
    } else {
        BoundaryLabel::Neumann
    }
}

/// Structured Cook mesh with `cells x cells` quadrilaterals.
pub fn cook_mesh(cells: usize) -> Result<Mesh> {
    grid_mesh(cells, cook_map, |_| false, &cook_classifier)
}

/// Default coarse resolution: a few hundred dofs, comparable to the coarse
/// levels used in the reference experiments.
pub const COOK_BASE_CELLS: usize = 5;

pub fn cook_problem(refinements: usize) -> Result<(ProblemSpec, MeshHierarchy)> {
    cook_problem_with_base(COOK_BASE_CELLS, refinements)
}

pub fn cook_problem_with_base(
    cells: usize,
    refinements: usize,
) -> Result<(ProblemSpec, MeshHierarchy)> {
    let mesh = cook_mesh(cells)?;
    let spec = ProblemSpec {
        name: "cook".to_string(),
        coarse_mesh: mesh.clone(),
        material: MaterialParams::new(1.0, crate::assembly::Lambda::Infinite)?,
        g_d: Box::new(|_| [0.0, 0.0]),
        g_n: Box::new(|p| {
            if p[0] > COOK_X - GEOM_EPS {
                [0.0, 0.01]
            } else {
                [0.0, 0.0]
            }
        }),
        body: Box::new(|_| [0.0, 0.0]),
    };
    let hierarchy = MeshHierarchy::build(mesh, refinements)?;
    Ok((spec, hierarchy))
}

/// Hole layout of the face domain, in cell units of the structured grid.
/// The nose triangle must have its two legs on grid lines and its hypotenuse
/// along the anti-diagonal cell direction.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub cells: usize,
    /// Axis-aligned holes as [x0, y0, x1, y1].
    pub eye_left: [usize; 4],
    pub eye_right: [usize; 4],
    pub mouth: [usize; 4],
    /// Right triangle (x0, y0), (x0 + legs, y0), (x0, y0 + legs).
    pub nose_corner: [usize; 2],
    pub nose_legs: usize,
}

impl Default for FaceGeometry {
    fn default() -> Self {
        FaceGeometry {
            cells: 6,
            eye_left: [1, 4, 2, 5],
            eye_right: [4, 4, 5, 5],
            mouth: [1, 1, 2, 3],
            nose_corner: [3, 2],
            nose_legs: 2,
        }
    }
}

impl FaceGeometry {
    fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    fn in_rect(&self, r: &[usize; 4], p: [f64; 2]) -> bool {
        let h = self.h();
        p[0] > r[0] as f64 * h
            && p[0] < r[2] as f64 * h
            && p[1] > r[1] as f64 * h
            && p[1] < r[3] as f64 * h
    }

    fn in_nose(&self, p: [f64; 2]) -> bool {
        let h = self.h();
        let x0 = self.nose_corner[0] as f64 * h;
        let y0 = self.nose_corner[1] as f64 * h;
        let legs = self.nose_legs as f64 * h;
        p[0] > x0 && p[1] > y0 && (p[0] - x0) + (p[1] - y0) < legs
    }

    fn is_hole(&self, p: [f64; 2]) -> bool {
        self.in_rect(&self.eye_left, p)
            || self.in_rect(&self.eye_right, p)
            || self.in_rect(&self.mouth, p)
            || self.in_nose(p)
    }

    fn on_nose_boundary(&self, p: [f64; 2]) -> bool {
        let h = self.h();
        let x0 = self.nose_corner[0] as f64 * h;
        let y0 = self.nose_corner[1] as f64 * h;
        let legs = self.nose_legs as f64 * h;
        let on_left = (p[0] - x0).abs() < GEOM_EPS && p[1] > y0 - GEOM_EPS
            && p[1] < y0 + legs + GEOM_EPS;
        let on_bottom = (p[1] - y0).abs() < GEOM_EPS && p[0] > x0 - GEOM_EPS
            && p[0] < x0 + legs + GEOM_EPS;
        let on_hyp = ((p[0] - x0) + (p[1] - y0) - legs).abs() < GEOM_EPS
            && p[0] > x0 - GEOM_EPS
            && p[1] > y0 - GEOM_EPS;
        on_left || on_bottom || on_hyp
    }
}

pub fn face_mesh(geom: &FaceGeometry) -> Result<Mesh> {
    let g = geom.clone();
    let classify = move |mid: [f64; 2]| {
        if mid[1] < GEOM_EPS || g.on_nose_boundary(mid) {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        }
    };
    grid_mesh(geom.cells, |x, y| [x, y], |c| geom.is_hole(c), &classify)
}

pub fn face_problem(refinements: usize) -> Result<(ProblemSpec, MeshHierarchy)> {
    face_problem_with_geometry(FaceGeometry::default(), refinements)
}

pub fn face_problem_with_geometry(
    geom: FaceGeometry,
    refinements: usize,
) -> Result<(ProblemSpec, MeshHierarchy)> {
    let mesh = face_mesh(&geom)?;
    let spec = ProblemSpec {
        name: "face".to_string(),
        coarse_mesh: mesh.clone(),
        material: MaterialParams::new(1.0, crate::assembly::Lambda::Infinite)?,
        // Quadratic displacement on the bottom edge, zero on the triangular
        // hole; both are Dirichlet, distinguished by position.
        g_d: Box::new(|p| {
            if p[1] < GEOM_EPS {
                [0.0, 0.05 * p[0] * p[0]]
            } else {
                [0.0, 0.0]
            }
        }),
        g_n: Box::new(|_| [0.0, 0.0]),
        body: Box::new(|_| [0.0, 0.0]),
    };
    let hierarchy = MeshHierarchy::build(mesh, refinements)?;
    Ok((spec, hierarchy))
}

/// Scalar dual Poisson system: S the flux mass matrix, M the boundary mass
/// of normal traces, T the divergence form, f the source vector. Flux dofs
/// are split into `ext` (on the boundary) and `int`.
pub struct DualPoissonSystem {
    pub s: CsrMatrix,
    pub m_boundary: CsrMatrix,
    pub t: CsrMatrix,
    pub f: Vec<f64>,
    pub alpha: f64,
    pub n_flux: usize,
    pub n_pot: usize,
    pub ext: Vec<usize>,
    pub int: Vec<usize>,
}

/// Assembles the dual Poisson blocks on `mesh` with homogeneous Robin data
/// and unit source.
pub fn dual_poisson_robin(mesh: &Mesh, alpha: f64) -> Result<DualPoissonSystem> {
    let n_edges = mesh.n_edges();
    let n_tris = mesh.n_triangles();
    let n_flux = 2 * n_edges + 2 * n_tris;
    let n_pot = 3 * n_tris;

    let mut s = CooMatrix::new(n_flux, n_flux);
    let mut t = CooMatrix::new(n_pot, n_flux);
    let mut m = CooMatrix::new(n_flux, n_flux);
    let mut f = vec![0.0; n_pot];

    for tri in 0..n_tris {
        let basis = ElementBasis::build(mesh, tri)?;
        let mut dofs = [0usize; 8];
        for k in 0..3 {
            let e = mesh.tri_edge(tri, k);
            dofs[2 * k] = 2 * e;
            dofs[2 * k + 1] = 2 * e + 1;
        }
        dofs[6] = 2 * n_edges + 2 * tri;
        dofs[7] = 2 * n_edges + 2 * tri + 1;

        let verts = mesh.triangle_coords(tri);
        let area = mesh.area(tri);
        let qp = quadrature(&verts, 4)?;
        let mut mass = [[0.0; 8]; 8];
        let mut div_rows = [[0.0; 8]; 3];
        for (x, w) in &qp {
            let phi = basis.eval_all(x[0], x[1]);
            let div = basis.div_all(x[0], x[1]);
            let bary = bary_coords(&verts, *x);
            for i in 0..8 {
                for j in 0..8 {
                    mass[i][j] += w * (phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1]);
                }
                for k in 0..3 {
                    div_rows[k][i] += w * bary[k] * div[i];
                }
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                s.push(dofs[i], dofs[j], mass[i][j]);
            }
            for k in 0..3 {
                t.push(3 * tri + k, dofs[i], div_rows[k][i]);
            }
        }
        for k in 0..3 {
            f[3 * tri + k] += area / 3.0; // unit source
        }
    }

    // Boundary mass of normal traces, supported on each boundary edge's two
    // trace dofs.
    for (e, _) in mesh.boundary_edges() {
        let edge = mesh.edge(e);
        let tri = edge.tris.0;
        let basis = ElementBasis::build(mesh, tri)?;
        let local = (0..3).find(|&k| mesh.tri_edge(tri, k) == e).unwrap();
        let pa = mesh.vertex(edge.verts[0]);
        let pb = mesh.vertex(edge.verts[1]);
        let mut mm = [[0.0; 2]; 2];
        for (tq, wq) in edge_gauss() {
            let x = pa[0] + tq * (pb[0] - pa[0]);
            let y = pa[1] + tq * (pb[1] - pa[1]);
            let vals = basis.eval_all(x, y);
            let mut flux = [0.0; 2];
            for moment in 0..2 {
                let v = vals[2 * local + moment];
                flux[moment] = v[0] * edge.normal[0] + v[1] * edge.normal[1];
            }
            for i in 0..2 {
                for j in 0..2 {
                    mm[i][j] += wq * edge.length * flux[i] * flux[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                m.push(2 * e + i, 2 * e + j, mm[i][j]);
            }
        }
    }

    let mut ext = Vec::new();
    for (e, _) in mesh.boundary_edges() {
        ext.push(2 * e);
        ext.push(2 * e + 1);
    }
    ext.sort_unstable();
    let ext_mask: Vec<bool> = {
        let mut mask = vec![false; n_flux];
        for &d in &ext {
            mask[d] = true;
        }
        mask
    };
    let int = (0..n_flux).filter(|&d| !ext_mask[d]).collect();

    Ok(DualPoissonSystem {
        s: s.to_csr(),
        m_boundary: m.to_csr(),
        t: t.to_csr(),
        f,
        alpha,
        n_flux,
        n_pot,
        ext,
        int,
    })
}

impl DualPoissonSystem {
    fn saddle_size(&self) -> usize {
        self.n_flux + self.n_pot
    }

    /// Full Dirichlet saddle matrix [[S, T^T], [T, 0]].
    pub fn dirichlet_dense(&self) -> DenseMatrix {
        let size = self.saddle_size();
        let mut k = DenseMatrix::zeros(size, size);
        for r in 0..self.n_flux {
            let (cols, vals) = self.s.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                k.add(r, *c, *v);
            }
        }
        for r in 0..self.n_pot {
            let (cols, vals) = self.t.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                k.add(self.n_flux + r, *c, *v);
                k.add(*c, self.n_flux + r, *v);
            }
        }
        k
    }

    /// Robin saddle matrix: Dirichlet plus alpha * M on the boundary block.
    /// With alpha = 0 the construction is identical to `dirichlet_dense`.
    pub fn robin_dense(&self, alpha: f64) -> DenseMatrix {
        let mut k = self.dirichlet_dense();
        if alpha != 0.0 {
            for r in 0..self.n_flux {
                let (cols, vals) = self.m_boundary.row(r);
                for (c, v) in cols.iter().zip(vals.iter()) {
                    k.add(r, *c, alpha * v);
                }
            }
        }
        k
    }

    /// Diagonal penalty per ext dof: alpha times the largest absolute entry
    /// of the dof's row across [S | T^T].
    pub fn g_diagonal(&self, alpha: f64) -> Vec<f64> {
        let tt = self.t.transpose();
        self.ext
            .iter()
            .map(|&d| {
                let mut row_max = 0.0_f64;
                let (_, vals) = self.s.row(d);
                for v in vals {
                    row_max = row_max.max(v.abs());
                }
                let (_, vals) = tt.row(d);
                for v in vals {
                    row_max = row_max.max(v.abs());
                }
                alpha * row_max
            })
            .collect()
    }

    /// Averaged system: Dirichlet matrix plus diag(G) on the ext dofs.
    pub fn averaged_dense(&self, alpha: f64) -> DenseMatrix {
        let mut k = self.dirichlet_dense();
        let g = self.g_diagonal(alpha);
        for (i, &d) in self.ext.iter().enumerate() {
            k.add(d, d, g[i]);
        }
        k
    }

    /// Row sums of the boundary mass per ext dof (all strictly positive on
    /// the Raviart-Thomas edge-trace basis).
    pub fn m_row_sums(&self) -> Vec<f64> {
        self.ext
            .iter()
            .map(|&d| {
                let (_, vals) = self.m_boundary.row(d);
                vals.iter().sum()
            })
            .collect()
    }

    /// Lumping coefficients beta_i = G_ii / sum_j M_ij.
    pub fn lumping_coefficients(&self, alpha: f64) -> Vec<f64> {
        self.g_diagonal(alpha)
            .iter()
            .zip(self.m_row_sums().iter())
            .map(|(g, s)| g / s)
            .collect()
    }

    /// Right-hand side [0; f].
    pub fn rhs(&self) -> Vec<f64> {
        let mut rhs = vec![0.0; self.saddle_size()];
        rhs[self.n_flux..].copy_from_slice(&self.f);
        rhs
    }
}

/// Built-in manufactured displacement fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManufacturedKind {
    /// Linear displacement, constant stress: reproduced exactly.
    Linear,
    /// Cubic displacement, quadratic stress: second-order stress convergence.
    Cubic,
}

/// Exact fields of a manufactured problem (finite lambda only).
#[derive(Clone, Copy, Debug)]
pub struct ExactSolution {
    pub mu: f64,
    pub lambda: f64,
    pub kind: ManufacturedKind,
}

impl ExactSolution {
    pub fn displacement(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        match self.kind {
            ManufacturedKind::Linear => [0.2 * x + 0.3 * y, 0.1 * x + 0.4 * y],
            ManufacturedKind::Cubic => {
                [x * x * x + x * y * y - y * y * y, y * y * y + x * x * y]
            }
        }
    }

    fn strain(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = p;
        match self.kind {
            ManufacturedKind::Linear => [[0.2, 0.2], [0.2, 0.4]],
            ManufacturedKind::Cubic => {
                let e11 = 3.0 * x * x + y * y;
                let e22 = 3.0 * y * y + x * x;
                let e12 = 2.0 * x * y - 1.5 * y * y;
                [[e11, e12], [e12, e22]]
            }
        }
    }

    pub fn stress(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let e = self.strain(p);
        let tr = e[0][0] + e[1][1];
        [
            [
                2.0 * self.mu * e[0][0] + self.lambda * tr,
                2.0 * self.mu * e[0][1],
            ],
            [
                2.0 * self.mu * e[1][0],
                2.0 * self.mu * e[1][1] + self.lambda * tr,
            ],
        ]
    }

    /// Scalar rotation (skew part of the displacement gradient).
    pub fn rotation(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            ManufacturedKind::Linear => -0.1,
            ManufacturedKind::Cubic => 1.5 * p[1] * p[1],
        }
    }

    /// Body force f = -div(stress).
    pub fn body_force(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        match self.kind {
            ManufacturedKind::Linear => [0.0, 0.0],
            ManufacturedKind::Cubic => [
                -(16.0 * self.mu + 8.0 * self.lambda) * x + 6.0 * self.mu * y,
                -(16.0 * self.mu + 8.0 * self.lambda) * y,
            ],
        }
    }
}

/// Outward normal of the unit square at a boundary point.
fn unit_square_normal(p: [f64; 2]) -> [f64; 2] {
    if p[0] < GEOM_EPS {
        [-1.0, 0.0]
    } else if p[0] > 1.0 - GEOM_EPS {
        [1.0, 0.0]
    } else if p[1] < GEOM_EPS {
        [0.0, -1.0]
    } else {
        [0.0, 1.0]
    }
}

/// Boundary classifier used by manufactured problems: the left edge carries
/// the displacement data, the rest prescribed tractions.
pub fn manufactured_classifier(mid: [f64; 2]) -> BoundaryLabel {
    if mid[0] < GEOM_EPS {
        BoundaryLabel::Dirichlet
    } else {
        BoundaryLabel::Neumann
    }
}

/// Manufactured elasticity problem on a unit-square mesh. The incompressible
/// limit is rejected: the stiffness action needed to build the exact stress
/// is unbounded there.
pub fn manufactured_elasticity(
    mesh: Mesh,
    mat: &MaterialParams,
    kind: ManufacturedKind,
) -> Result<(ProblemSpec, ExactSolution)> {
    let lambda = match mat.lambda {
        crate::assembly::Lambda::Finite(l) => l,
        crate::assembly::Lambda::Infinite => {
            return Err(Error::InvalidMaterial(
                "manufactured problems require a finite lambda".into(),
            ))
        }
    };
    let exact = ExactSolution {
        mu: mat.mu,
        lambda,
        kind,
    };
    let g_d = move |p: [f64; 2]| exact.displacement(p);
    let g_n = move |p: [f64; 2]| {
        let s = exact.stress(p);
        let n = unit_square_normal(p);
        [
            s[0][0] * n[0] + s[0][1] * n[1],
            s[1][0] * n[0] + s[1][1] * n[1],
        ]
    };
    let body = move |p: [f64; 2]| exact.body_force(p);
    Ok((
        ProblemSpec {
            name: "manufactured".to_string(),
            coarse_mesh: mesh,
            material: *mat,
            g_d: Box::new(g_d),
            g_n: Box::new(g_n),
            body: Box::new(body),
        },
        exact,
    ))
}

/// L2 norm of the stress error against an exact tensor field.
pub fn stress_l2_error(
    mesh: &Mesh,
    layout: &DofLayout,
    y: &[f64],
    exact: &dyn Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Result<f64> {
    let mut err2 = 0.0;
    for t in 0..mesh.n_triangles() {
        let basis = ElementBasis::build(mesh, t)?;
        let dofs = layout.element_scalar_dofs(mesh, t);
        for (x, w) in quadrature(&mesh.triangle_coords(t), 6)? {
            let sh = crate::assembly::reconstruct_stress(&basis, layout, &dofs, y, x);
            let se = exact(x);
            let mut d2 = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    let d = sh[r][c] - se[r][c];
                    d2 += d * d;
                }
            }
            err2 += w * d2;
        }
    }
    Ok(err2.sqrt())
}

fn bary_coords(verts: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (verts[1][0] - verts[0][0]) * (verts[2][1] - verts[0][1])
        - (verts[1][1] - verts[0][1]) * (verts[2][0] - verts[0][0]);
    let l1 = ((p[0] - verts[0][0]) * (verts[2][1] - verts[0][1])
        - (p[1] - verts[0][1]) * (verts[2][0] - verts[0][0]))
        / det;
    let l2 = ((verts[1][0] - verts[0][0]) * (p[1] - verts[0][1])
        - (verts[1][1] - verts[0][1]) * (p[0] - verts[0][0]))
        / det;
    [1.0 - l1 - l2, l1, l2]
}
