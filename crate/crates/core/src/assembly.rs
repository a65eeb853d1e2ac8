//! Assembly of the stress-first saddle point system and residual evaluation.
//!
//! The system couples the compliance form a(sigma, tau) with the equilibrium
//! form b(tau, u) = int u . div tau and the weak-symmetry form
//! c(tau, p) = int p (tau_21 - tau_12). Unknowns: y (stress dofs) and
//! z = [u; p] (displacement then rotation dofs), solving
//!
//!   [ A  B^T ] [y]   [f]
//!   [ B   0  ] [z] = [h].
//!
//! Traction (Neumann) conditions are essential here: the affected stress dofs
//! are eliminated, their columns moved to the right-hand side and their rows
//! zeroed, which keeps the semidefinite structure of A intact in the
//! incompressible limit.

use crate::error::{Error, Result};
use crate::linalg::{norm2, CooMatrix, CsrMatrix, DenseMatrix, PartialPivLu};
use crate::mesh::{BoundaryLabel, Mesh};
use crate::quadrature::{edge_gauss, quadrature};
use crate::spaces::{DofLayout, ElementBasis};

/// First Lame parameter; the incompressible limit is a distinguished value so
/// the exact kernel of the compliance form stays testable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

#[derive(Clone, Copy, Debug)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: Lambda,
}

impl MaterialParams {
    pub fn new(mu: f64, lambda: Lambda) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidMaterial(format!("mu = {mu} must be positive")));
        }
        if let Lambda::Finite(l) = lambda {
            if !(l > 0.0) {
                return Err(Error::InvalidMaterial(format!(
                    "lambda = {l} must be positive or infinite"
                )));
            }
        }
        Ok(Self { mu, lambda })
    }

    /// Trace coefficient lambda / (d lambda + 2 mu) for d = 2, with its
    /// incompressible limit 1/2.
    pub fn trace_coefficient(&self) -> f64 {
        match self.lambda {
            Lambda::Finite(l) => l / (2.0 * l + 2.0 * self.mu),
            Lambda::Infinite => 0.5,
        }
    }
}

/// Compliance tensor action: (1/2mu) (sigma - c_lambda tr(sigma) I).
pub fn compliance_apply(sigma: [[f64; 2]; 2], mat: &MaterialParams) -> [[f64; 2]; 2] {
    let c = mat.trace_coefficient();
    let tr = sigma[0][0] + sigma[1][1];
    let s = 1.0 / (2.0 * mat.mu);
    [
        [s * (sigma[0][0] - c * tr), s * sigma[0][1]],
        [s * sigma[1][0], s * (sigma[1][1] - c * tr)],
    ]
}

/// Problem data evaluated pointwise on the domain or its boundary.
pub struct Loads<'a> {
    /// Prescribed displacement on Dirichlet edges.
    pub dirichlet: &'a dyn Fn([f64; 2]) -> [f64; 2],
    /// Prescribed traction sigma . n on Neumann edges.
    pub neumann: &'a dyn Fn([f64; 2]) -> [f64; 2],
    /// Volumetric force.
    pub body: &'a dyn Fn([f64; 2]) -> [f64; 2],
}

pub const ZERO_VECTOR_FIELD: fn([f64; 2]) -> [f64; 2] = |_| [0.0, 0.0];

impl<'a> Loads<'a> {
    pub fn zero() -> Loads<'static> {
        Loads {
            dirichlet: &ZERO_VECTOR_FIELD,
            neumann: &ZERO_VECTOR_FIELD,
            body: &ZERO_VECTOR_FIELD,
        }
    }
}

#[derive(Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub bt: CsrMatrix,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub n_disp: usize,
    pub n_rot: usize,
    /// Eliminated stress dofs with their prescribed values, ascending.
    pub constrained: Vec<(usize, f64)>,
    pub constrained_mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Residuals {
    pub r_a: Vec<f64>,
    pub r_b: Vec<f64>,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm: f64,
}

impl Residuals {
    pub fn from_parts(r_a: Vec<f64>, r_b: Vec<f64>) -> Residuals {
        let norm_a = norm2(&r_a);
        let norm_b = norm2(&r_b);
        let norm = (norm_a * norm_a + norm_b * norm_b).sqrt();
        Residuals {
            r_a,
            r_b,
            norm_a,
            norm_b,
            norm,
        }
    }

    /// Stacked residual [r_a; r_b].
    pub fn full(&self) -> Vec<f64> {
        let mut r = self.r_a.clone();
        r.extend_from_slice(&self.r_b);
        r
    }
}

/// Assembles the saddle system on `mesh` with boundary data from `loads`.
pub fn assemble(
    mesh: &Mesh,
    layout: &DofLayout,
    mat: &MaterialParams,
    loads: &Loads,
) -> Result<SaddleSystem> {
    let n = layout.n_stress;
    let m = layout.n_mult();
    let stride = layout.scalar_stride();
    let c_lam = mat.trace_coefficient();
    let half_inv_mu = 1.0 / (2.0 * mat.mu);

    let mut a_coo = CooMatrix::new(n, n);
    let mut b_coo = CooMatrix::new(m, n);
    let mut f = vec![0.0; n];
    let mut h = vec![0.0; m];

    for t in 0..mesh.n_triangles() {
        let basis = ElementBasis::build(mesh, t)?;
        let scalar_dofs = layout.element_scalar_dofs(mesh, t);
        let verts = mesh.triangle_coords(t);
        let tri = mesh.triangle(t);
        let qp = quadrature(&verts, 4)?;

        // Quadrature-point tables: basis values/divergences and barycentric
        // (P1 Lagrange) values.
        let nq = qp.len();
        let mut phi = Vec::with_capacity(nq);
        let mut div = Vec::with_capacity(nq);
        let mut bary = Vec::with_capacity(nq);
        for (x, _) in &qp {
            phi.push(basis.eval_all(x[0], x[1]));
            div.push(basis.div_all(x[0], x[1]));
            bary.push(barycentric(&verts, *x));
        }

        // a-block: (1/2mu) [delta_rs phi_i . phi_j - c_lam phi_i[r] phi_j[s]].
        let mut mass = [[0.0; 8]; 8]; // int phi_i . phi_j
        let mut comp = [[[[0.0; 8]; 8]; 2]; 2]; // int phi_i[r] phi_j[s]
        for (q, (_, w)) in qp.iter().enumerate() {
            let p = &phi[q];
            for i in 0..8 {
                for j in 0..8 {
                    mass[i][j] += w * (p[i][0] * p[j][0] + p[i][1] * p[j][1]);
                    for r in 0..2 {
                        for s in 0..2 {
                            comp[r][s][i][j] += w * p[i][r] * p[j][s];
                        }
                    }
                }
            }
        }
        for r in 0..2 {
            for s in 0..2 {
                for i in 0..8 {
                    for j in 0..8 {
                        let mut v = -c_lam * comp[r][s][i][j];
                        if r == s {
                            v += mass[i][j];
                        }
                        v *= half_inv_mu;
                        a_coo.push(
                            r * stride + scalar_dofs[i],
                            s * stride + scalar_dofs[j],
                            v,
                        );
                    }
                }
            }
        }

        // b-block rows (displacement component r tests div of stress row r)
        // and the volumetric load.
        for k in 0..3 {
            let mut bk = [0.0; 8]; // int lambda_k div phi_i
            let mut load = [0.0; 2];
            for (q, (x, w)) in qp.iter().enumerate() {
                let lk = bary[q][k];
                for i in 0..8 {
                    bk[i] += w * lk * div[q][i];
                }
                let fv = (loads.body)(*x);
                load[0] += w * lk * fv[0];
                load[1] += w * lk * fv[1];
            }
            for r in 0..2 {
                let row = layout.disp_dof(t, k, r);
                for i in 0..8 {
                    b_coo.push(row, r * stride + scalar_dofs[i], bk[i]);
                }
                h[row] += -load[r];
            }
        }

        // c-block rows: int p (tau_21 - tau_12); stress row 0 contributes
        // -phi[1], row 1 contributes +phi[0].
        for k in 0..3 {
            let row = layout.rot_dof(tri[k]);
            let mut c0 = [0.0; 8];
            let mut c1 = [0.0; 8];
            for (q, (_, w)) in qp.iter().enumerate() {
                let lk = bary[q][k];
                for i in 0..8 {
                    c0[i] += -w * lk * phi[q][i][1];
                    c1[i] += w * lk * phi[q][i][0];
                }
            }
            for i in 0..8 {
                b_coo.push(row, scalar_dofs[i], c0[i]);
                b_coo.push(row, stride + scalar_dofs[i], c1[i]);
            }
        }
    }

    // Dirichlet data enters through f_a(tau) = int_Gamma_D (tau . n) . g_D:
    // only the two trace dofs of each Dirichlet edge see it.
    for (e, label) in mesh.boundary_edges() {
        if label != BoundaryLabel::Dirichlet {
            continue;
        }
        let edge = mesh.edge(e);
        let t = edge.tris.0;
        let basis = ElementBasis::build(mesh, t)?;
        let scalar_dofs = layout.element_scalar_dofs(mesh, t);
        let local = (0..3)
            .find(|&k| mesh.tri_edge(t, k) == e)
            .expect("edge belongs to its incident triangle");
        let pa = mesh.vertex(edge.verts[0]);
        let pb = mesh.vertex(edge.verts[1]);
        for (tq, wq) in edge_gauss() {
            let x = [pa[0] + tq * (pb[0] - pa[0]), pa[1] + tq * (pb[1] - pa[1])];
            let g = (loads.dirichlet)(x);
            let vals = basis.eval_all(x[0], x[1]);
            for moment in 0..2 {
                let i = 2 * local + moment;
                let flux = vals[i][0] * edge.normal[0] + vals[i][1] * edge.normal[1];
                for r in 0..2 {
                    f[r * stride + scalar_dofs[i]] += wq * edge.length * flux * g[r];
                }
            }
        }
    }

    let mut a = a_coo.to_csr();
    let mut b = b_coo.to_csr();
    let mut bt = b.transpose();

    // Essential traction conditions: canonical edge moments of g_N.
    let mut constrained = Vec::with_capacity(layout.constrained.len());
    for &dof in &layout.constrained {
        let (row, entity) = split_stress_dof(layout, dof);
        let e = entity / 2;
        let moment = entity % 2;
        let edge = mesh.edge(e);
        let pa = mesh.vertex(edge.verts[0]);
        let pb = mesh.vertex(edge.verts[1]);
        let mut val = 0.0;
        for (tq, wq) in edge_gauss() {
            let x = [pa[0] + tq * (pb[0] - pa[0]), pa[1] + tq * (pb[1] - pa[1])];
            let g = (loads.neumann)(x);
            let l = if moment == 0 { 1.0 - tq } else { tq };
            val += wq * edge.length * g[row] * l;
        }
        constrained.push((dof, val));
    }

    // Move constrained columns to the right-hand side, then zero their rows
    // and columns.
    for &(dof, val) in &constrained {
        if val != 0.0 {
            let (cols, vals) = a.row(dof); // A is symmetric
            for (c, v) in cols.iter().zip(vals.iter()) {
                f[*c] -= v * val;
            }
            let (cols, vals) = bt.row(dof);
            for (c, v) in cols.iter().zip(vals.iter()) {
                h[*c] -= v * val;
            }
        }
    }
    let mask = &layout.constrained_mask;
    a.zero_rows(mask);
    a.zero_cols(mask);
    b.zero_cols(mask);
    bt.zero_rows(mask);
    for &(dof, _) in &constrained {
        f[dof] = 0.0;
    }

    Ok(SaddleSystem {
        a,
        b,
        bt,
        f,
        h,
        n,
        m,
        n_disp: layout.n_disp,
        n_rot: layout.n_rot,
        constrained,
        constrained_mask: layout.constrained_mask.clone(),
    })
}

impl SaddleSystem {
    /// Initial iterate: prescribed values on eliminated dofs, zero elsewhere.
    pub fn initial_state(&self) -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; self.n];
        for &(dof, val) in &self.constrained {
            y[dof] = val;
        }
        (y, vec![0.0; self.m])
    }

    /// r_a = f - A y - B^T z, r_b = h - B y; eliminated dofs report zero.
    pub fn residuals(&self, y: &[f64], z: &[f64]) -> Residuals {
        let mut r_a = self.f.clone();
        self.a.matvec_axpy(y, -1.0, &mut r_a);
        self.bt.matvec_axpy(z, -1.0, &mut r_a);
        let mut r_b = self.h.clone();
        self.b.matvec_axpy(y, -1.0, &mut r_b);
        for &(dof, _) in &self.constrained {
            r_a[dof] = 0.0;
        }
        Residuals::from_parts(r_a, r_b)
    }

    /// Writes the residual into caller buffers (used by the smoother loop).
    pub fn residuals_into(&self, y: &[f64], z: &[f64], r_a: &mut [f64], r_b: &mut [f64]) {
        self.residuals_with_rhs_into(&self.f, &self.h, y, z, r_a, r_b);
    }

    /// Residual against an explicit right-hand side; multigrid levels below
    /// the finest smooth against restricted residuals instead of the
    /// assembled loads.
    pub fn residuals_with_rhs_into(
        &self,
        f: &[f64],
        h: &[f64],
        y: &[f64],
        z: &[f64],
        r_a: &mut [f64],
        r_b: &mut [f64],
    ) {
        r_a.copy_from_slice(f);
        self.a.matvec_axpy(y, -1.0, r_a);
        self.bt.matvec_axpy(z, -1.0, r_a);
        r_b.copy_from_slice(h);
        self.b.matvec_axpy(y, -1.0, r_b);
        for &(dof, _) in &self.constrained {
            r_a[dof] = 0.0;
        }
    }

    pub fn free_stress_dofs(&self) -> Vec<usize> {
        (0..self.n).filter(|&d| !self.constrained_mask[d]).collect()
    }

    /// Dense full saddle matrix on free dofs: [[A, B^T], [B, 0]].
    pub fn free_dense_matrix(&self) -> (DenseMatrix, Vec<usize>) {
        let free = self.free_stress_dofs();
        let nf = free.len();
        let size = nf + self.m;
        let mut pos = vec![usize::MAX; self.n];
        for (i, &d) in free.iter().enumerate() {
            pos[d] = i;
        }
        let mut k = DenseMatrix::zeros(size, size);
        for (i, &d) in free.iter().enumerate() {
            let (cols, vals) = self.a.row(d);
            for (c, v) in cols.iter().zip(vals.iter()) {
                if pos[*c] != usize::MAX {
                    k.add(i, pos[*c], *v);
                }
            }
        }
        for r in 0..self.m {
            let (cols, vals) = self.b.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                if pos[*c] != usize::MAX {
                    k.add(nf + r, pos[*c], *v);
                    k.add(pos[*c], nf + r, *v);
                }
            }
        }
        (k, free)
    }

    /// A-energy plus Euclidean multiplier norm, used for solution comparisons.
    pub fn solution_norm(&self, y: &[f64], z: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.n];
        self.a.matvec(y, &mut ay);
        let energy: f64 = ay.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let zn: f64 = z.iter().map(|v| v * v).sum();
        (energy.max(0.0) + zn).sqrt()
    }
}

/// Direct factorization of the free-dof saddle matrix. Used for the exact
/// coarsest-level solve and as the reference solver in tests.
pub struct FreeSaddleSolver {
    lu: PartialPivLu,
    free: Vec<usize>,
    n: usize,
    m: usize,
}

impl FreeSaddleSolver {
    pub fn build(system: &SaddleSystem) -> Result<FreeSaddleSolver> {
        let (k, free) = system.free_dense_matrix();
        let lu = PartialPivLu::factor(&k);
        if lu.is_singular() {
            return Err(Error::SingularMatrix {
                pivot: lu.min_pivot(),
                threshold: crate::linalg::SINGULAR_REL_TOL * lu.scale(),
            });
        }
        Ok(FreeSaddleSolver {
            lu,
            free,
            n: system.n,
            m: system.m,
        })
    }

    pub fn min_pivot(&self) -> f64 {
        self.lu.min_pivot()
    }

    pub fn scale(&self) -> f64 {
        self.lu.scale()
    }

    /// Solves K [y_free; z] = [r_a|free; r_b], returning full-length vectors
    /// with zeros at eliminated dofs.
    pub fn solve(&self, r_a: &[f64], r_b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let nf = self.free.len();
        let mut rhs = Vec::with_capacity(nf + self.m);
        for &d in &self.free {
            rhs.push(r_a[d]);
        }
        rhs.extend_from_slice(r_b);
        let sol = self.lu.solve(&rhs)?;
        let mut y = vec![0.0; self.n];
        for (i, &d) in self.free.iter().enumerate() {
            y[d] = sol[i];
        }
        Ok((y, sol[nf..].to_vec()))
    }

    /// Full solve of the boundary-value problem: corrections from the system
    /// right-hand side added to the prescribed boundary values.
    pub fn solve_system(&self, system: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut y, z) = self.solve(&system.f, &system.h)?;
        for &(dof, val) in &system.constrained {
            y[dof] = val;
        }
        Ok((y, z))
    }
}

fn split_stress_dof(layout: &DofLayout, dof: usize) -> (usize, usize) {
    let stride = layout.scalar_stride();
    (dof / stride, dof % stride)
}

fn barycentric(verts: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
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

/// Canonical stress interpolant: dof moments of a tensor field given row-wise.
pub fn interpolate_stress(
    mesh: &Mesh,
    layout: &DofLayout,
    field: &dyn Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Vec<f64> {
    let mut y = vec![0.0; layout.n_stress];
    for e in 0..mesh.n_edges() {
        let edge = mesh.edge(e);
        let pa = mesh.vertex(edge.verts[0]);
        let pb = mesh.vertex(edge.verts[1]);
        for (tq, wq) in edge_gauss() {
            let x = [pa[0] + tq * (pb[0] - pa[0]), pa[1] + tq * (pb[1] - pa[1])];
            let s = field(x);
            for row in 0..2 {
                let flux = s[row][0] * edge.normal[0] + s[row][1] * edge.normal[1];
                y[layout.edge_stress_dof(row, e, 0)] += wq * edge.length * flux * (1.0 - tq);
                y[layout.edge_stress_dof(row, e, 1)] += wq * edge.length * flux * tq;
            }
        }
    }
    for t in 0..mesh.n_triangles() {
        for (x, w) in quadrature(&mesh.triangle_coords(t), 4).expect("valid element") {
            let s = field(x);
            for row in 0..2 {
                for comp in 0..2 {
                    y[layout.interior_stress_dof(row, t, comp)] += w * s[row][comp];
                }
            }
        }
    }
    y
}

/// Canonical multiplier interpolant: nodal displacement values per element
/// and vertex rotation values.
pub fn interpolate_multipliers(
    mesh: &Mesh,
    layout: &DofLayout,
    displacement: &dyn Fn([f64; 2]) -> [f64; 2],
    rotation: &dyn Fn([f64; 2]) -> f64,
) -> Vec<f64> {
    let mut z = vec![0.0; layout.n_mult()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        for k in 0..3 {
            let u = displacement(mesh.vertex(tri[k]));
            z[layout.disp_dof(t, k, 0)] = u[0];
            z[layout.disp_dof(t, k, 1)] = u[1];
        }
    }
    for v in 0..mesh.n_vertices() {
        z[layout.rot_dof(v)] = rotation(mesh.vertex(v));
    }
    z
}

/// Pointwise reconstruction of the stress tensor from its dof vector.
pub fn reconstruct_stress(
    basis: &ElementBasis,
    layout: &DofLayout,
    scalar_dofs: &[usize; 8],
    y: &[f64],
    x: [f64; 2],
) -> [[f64; 2]; 2] {
    let stride = layout.scalar_stride();
    let vals = basis.eval_all(x[0], x[1]);
    let mut out = [[0.0; 2]; 2];
    for row in 0..2 {
        for (i, v) in vals.iter().enumerate() {
            let c = y[row * stride + scalar_dofs[i]];
            out[row][0] += c * v[0];
            out[row][1] += c * v[1];
        }
    }
    out
}
