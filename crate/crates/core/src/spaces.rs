//! Discrete spaces and transfer operators.
//!
//! Stress uses one first-order Raviart-Thomas field per tensor row (8 dofs
//! per triangle and scalar row: two normal-trace moments per edge against the
//! linear Lagrange functions of the edge, plus two interior moments against
//! the constant vector fields). Displacements are discontinuous linears with
//! two components per element node; the rotation multiplier is one continuous
//! linear scalar.
//!
//! Element basis functions are built directly in physical coordinates: the
//! eight dof functionals are applied to a centered, scaled monomial basis of
//! the local space and the resulting 8x8 matrix is inverted. Global
//! functionals are shared verbatim between neighbouring elements, so normal
//! traces match across edges without any sign bookkeeping.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{invert_small, CooMatrix, CsrMatrix, DenseMatrix};
use crate::mesh::{BoundaryLabel, Mesh, RefinementMap};
use crate::quadrature::{edge_gauss, quadrature};

/// Index maps for the stress / displacement / rotation triplet on one mesh.
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub n_edges: usize,
    pub n_tris: usize,
    pub n_verts: usize,
    pub n_stress: usize,
    pub n_disp: usize,
    pub n_rot: usize,
    /// Stress dofs on Neumann boundary edges (both tensor rows), ascending.
    pub constrained: Vec<usize>,
    pub constrained_mask: Vec<bool>,
}

impl DofLayout {
    pub fn build(mesh: &Mesh) -> DofLayout {
        let n_edges = mesh.n_edges();
        let n_tris = mesh.n_triangles();
        let n_verts = mesh.n_vertices();
        let n_stress = 2 * (2 * n_edges + 2 * n_tris);
        let n_disp = 6 * n_tris;
        let n_rot = n_verts;
        let mut constrained = Vec::new();
        for (e, label) in mesh.boundary_edges() {
            if label == BoundaryLabel::Neumann {
                for row in 0..2 {
                    let base = row * (2 * n_edges + 2 * n_tris) + 2 * e;
                    constrained.push(base);
                    constrained.push(base + 1);
                }
            }
        }
        constrained.sort_unstable();
        let mut constrained_mask = vec![false; n_stress];
        for &d in &constrained {
            constrained_mask[d] = true;
        }
        DofLayout {
            n_edges,
            n_tris,
            n_verts,
            n_stress,
            n_disp,
            n_rot,
            constrained,
            constrained_mask,
        }
    }

    /// Dofs of one scalar Raviart-Thomas field.
    pub fn scalar_stride(&self) -> usize {
        2 * self.n_edges + 2 * self.n_tris
    }

    pub fn n_mult(&self) -> usize {
        self.n_disp + self.n_rot
    }

    pub fn edge_stress_dof(&self, row: usize, edge: usize, moment: usize) -> usize {
        row * self.scalar_stride() + 2 * edge + moment
    }

    pub fn interior_stress_dof(&self, row: usize, tri: usize, comp: usize) -> usize {
        row * self.scalar_stride() + 2 * self.n_edges + 2 * tri + comp
    }

    pub fn disp_dof(&self, tri: usize, node: usize, comp: usize) -> usize {
        6 * tri + 2 * node + comp
    }

    pub fn rot_dof(&self, vertex: usize) -> usize {
        6 * self.n_tris + vertex
    }

    /// The eight scalar dofs of a triangle in element-local order: two per
    /// edge (opposite local vertices 0, 1, 2), then the two interior moments.
    pub fn element_scalar_dofs(&self, mesh: &Mesh, t: usize) -> [usize; 8] {
        let mut out = [0usize; 8];
        for k in 0..3 {
            let e = mesh.tri_edge(t, k);
            out[2 * k] = 2 * e;
            out[2 * k + 1] = 2 * e + 1;
        }
        out[6] = 2 * self.n_edges + 2 * t;
        out[7] = 2 * self.n_edges + 2 * t + 1;
        out
    }
}

const N_LOCAL: usize = 8;

/// Dual Raviart-Thomas basis on one physical triangle.
pub struct ElementBasis {
    /// coeff[k][j]: weight of monomial k in basis function j.
    coeff: [[f64; N_LOCAL]; N_LOCAL],
    origin: [f64; 2],
    inv_h: f64,
    verts: [[f64; 2]; 3],
}

#[inline]
fn monomials(xi: f64, eta: f64) -> [[f64; 2]; N_LOCAL] {
    [
        [1.0, 0.0],
        [xi, 0.0],
        [eta, 0.0],
        [0.0, 1.0],
        [0.0, xi],
        [0.0, eta],
        [xi * xi, xi * eta],
        [xi * eta, eta * eta],
    ]
}

#[inline]
fn monomial_divs(xi: f64, eta: f64, inv_h: f64) -> [f64; N_LOCAL] {
    [
        0.0,
        inv_h,
        0.0,
        0.0,
        0.0,
        inv_h,
        3.0 * xi * inv_h,
        3.0 * eta * inv_h,
    ]
}

impl ElementBasis {
    pub fn build(mesh: &Mesh, t: usize) -> Result<ElementBasis> {
        let verts = mesh.triangle_coords(t);
        let area = mesh.area(t);
        if !(area.is_finite() && area > 0.0) {
            return Err(Error::DegenerateTriangle(t));
        }
        let origin = [
            (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
            (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
        ];
        let mut h: f64 = 0.0;
        for k in 0..3 {
            let a = verts[k];
            let b = verts[(k + 1) % 3];
            h = h.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
        }
        let inv_h = 1.0 / h;

        let mut m = DenseMatrix::zeros(N_LOCAL, N_LOCAL);
        // Edge moments with globally oriented normals and parametrization.
        for k in 0..3 {
            let edge = mesh.edge(mesh.tri_edge(t, k));
            let pa = mesh.vertex(edge.verts[0]);
            let pb = mesh.vertex(edge.verts[1]);
            for (tq, wq) in edge_gauss() {
                let x = pa[0] + tq * (pb[0] - pa[0]);
                let y = pa[1] + tq * (pb[1] - pa[1]);
                let mono = monomials((x - origin[0]) * inv_h, (y - origin[1]) * inv_h);
                let l = [1.0 - tq, tq];
                for (j, mj) in mono.iter().enumerate() {
                    let flux = mj[0] * edge.normal[0] + mj[1] * edge.normal[1];
                    for moment in 0..2 {
                        m.add(2 * k + moment, j, wq * edge.length * flux * l[moment]);
                    }
                }
            }
        }
        // Interior moments against the constant vector fields.
        for (x, w) in quadrature(&verts, 4)? {
            let mono = monomials((x[0] - origin[0]) * inv_h, (x[1] - origin[1]) * inv_h);
            for (j, mj) in mono.iter().enumerate() {
                m.add(6, j, w * mj[0]);
                m.add(7, j, w * mj[1]);
            }
        }

        let inv = invert_small(&m).map_err(|_| Error::DegenerateTriangle(t))?;
        let mut coeff = [[0.0; N_LOCAL]; N_LOCAL];
        for (k, row) in coeff.iter_mut().enumerate() {
            for (j, val) in row.iter_mut().enumerate() {
                *val = inv.at(k, j);
            }
        }
        Ok(ElementBasis {
            coeff,
            origin,
            inv_h,
            verts,
        })
    }

    /// Values of all eight basis fields at a physical point.
    pub fn eval_all(&self, x: f64, y: f64) -> [[f64; 2]; N_LOCAL] {
        let mono = monomials((x - self.origin[0]) * self.inv_h, (y - self.origin[1]) * self.inv_h);
        let mut out = [[0.0; 2]; N_LOCAL];
        for j in 0..N_LOCAL {
            let mut vx = 0.0;
            let mut vy = 0.0;
            for k in 0..N_LOCAL {
                let c = self.coeff[k][j];
                if c != 0.0 {
                    vx += c * mono[k][0];
                    vy += c * mono[k][1];
                }
            }
            out[j] = [vx, vy];
        }
        out
    }

    /// Divergences of all eight basis fields at a physical point.
    pub fn div_all(&self, x: f64, y: f64) -> [f64; N_LOCAL] {
        let divs = monomial_divs(
            (x - self.origin[0]) * self.inv_h,
            (y - self.origin[1]) * self.inv_h,
            self.inv_h,
        );
        let mut out = [0.0; N_LOCAL];
        for j in 0..N_LOCAL {
            let mut d = 0.0;
            for k in 0..N_LOCAL {
                d += self.coeff[k][j] * divs[k];
            }
            out[j] = d;
        }
        out
    }

    pub fn eval(&self, j: usize, x: f64, y: f64) -> [f64; 2] {
        self.eval_all(x, y)[j]
    }

    /// Evaluation at a reference-triangle point (barycentric (1-u-v, u, v)).
    pub fn eval_ref(&self, j: usize, u: f64, v: f64) -> [f64; 2] {
        let (p0, p1, p2) = (self.verts[0], self.verts[1], self.verts[2]);
        let x = p0[0] + u * (p1[0] - p0[0]) + v * (p2[0] - p0[0]);
        let y = p0[1] + u * (p1[1] - p0[1]) + v * (p2[1] - p0[1]);
        self.eval(j, x, y)
    }

    pub fn map_ref(&self, u: f64, v: f64) -> [f64; 2] {
        let (p0, p1, p2) = (self.verts[0], self.verts[1], self.verts[2]);
        [
            p0[0] + u * (p1[0] - p0[0]) + v * (p2[0] - p0[0]),
            p0[1] + u * (p1[1] - p0[1]) + v * (p2[1] - p0[1]),
        ]
    }
}

/// Prolongations from a coarse level to its uniform refinement: `pi` for the
/// stress dofs, `q` for the displacement and rotation multipliers; transposes
/// act as restrictions.
pub struct TransferPair {
    pub pi: CsrMatrix,
    pub q: CsrMatrix,
    pub pit: CsrMatrix,
    pub qt: CsrMatrix,
}

/// Parent barycentric coordinates of each child's nodes under red refinement.
const CHILD_BARY: [[[f64; 3]; 3]; 4] = [
    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
    [[0.0, 1.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.5, 0.0]],
    [[0.0, 0.0, 1.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]],
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
];

impl TransferPair {
    pub fn build(
        coarse: &Mesh,
        fine: &Mesh,
        map: &RefinementMap,
        coarse_layout: &DofLayout,
        fine_layout: &DofLayout,
    ) -> Result<TransferPair> {
        if fine.n_triangles() != 4 * coarse.n_triangles()
            || fine.n_vertices() != coarse.n_vertices() + coarse.n_edges()
            || map.children.len() != coarse.n_triangles()
        {
            return Err(Error::NonNestedPair);
        }
        let stride_c = coarse_layout.scalar_stride();
        let stride_f = fine_layout.scalar_stride();
        let nv_c = coarse.n_vertices();

        let mut fine_edge_of: HashMap<[usize; 2], usize> = HashMap::new();
        for e in 0..fine.n_edges() {
            fine_edge_of.insert(fine.edge(e).verts, e);
        }
        let lookup = |a: usize, b: usize| -> Result<usize> {
            fine_edge_of
                .get(&[a.min(b), a.max(b)])
                .copied()
                .ok_or(Error::NonNestedPair)
        };

        let mut pi = CooMatrix::new(fine_layout.n_stress, coarse_layout.n_stress);
        let gauss = edge_gauss();

        for tc in 0..coarse.n_triangles() {
            let basis = ElementBasis::build(coarse, tc)?;
            let cols = coarse_layout.element_scalar_dofs(coarse, tc);

            // Interior moments of the four children.
            for &child in &map.children[tc] {
                let verts = fine.triangle_coords(child);
                let mut acc = [[0.0; 2]; N_LOCAL];
                for (x, w) in quadrature(&verts, 4)? {
                    let phi = basis.eval_all(x[0], x[1]);
                    for s in 0..N_LOCAL {
                        acc[s][0] += w * phi[s][0];
                        acc[s][1] += w * phi[s][1];
                    }
                }
                for (s, a) in acc.iter().enumerate() {
                    for c in 0..2 {
                        let row = 2 * fine.n_edges() + 2 * child + c;
                        for r in 0..2 {
                            pi.push(r * stride_f + row, r * stride_c + cols[s], a[c]);
                        }
                    }
                }
            }

            // Fine edges evaluated from this coarse element: the three
            // internal edges (edges of the central child) plus the halves of
            // coarse edges this element owns.
            let mut fine_edges: Vec<usize> = fine
                .triangle(map.children[tc][3])
                .iter()
                .enumerate()
                .map(|(k, _)| fine.tri_edge(map.children[tc][3], k))
                .collect();
            for k in 0..3 {
                let ge = coarse.tri_edge(tc, k);
                if coarse.edge(ge).tris.0 == tc {
                    let [a, b] = coarse.edge(ge).verts;
                    fine_edges.push(lookup(a, nv_c + ge)?);
                    fine_edges.push(lookup(b, nv_c + ge)?);
                }
            }

            for fe in fine_edges {
                let edge = fine.edge(fe);
                let pa = fine.vertex(edge.verts[0]);
                let pb = fine.vertex(edge.verts[1]);
                let mut acc = [[0.0; 2]; N_LOCAL];
                for (tq, wq) in gauss {
                    let x = pa[0] + tq * (pb[0] - pa[0]);
                    let y = pa[1] + tq * (pb[1] - pa[1]);
                    let phi = basis.eval_all(x, y);
                    for s in 0..N_LOCAL {
                        let flux = phi[s][0] * edge.normal[0] + phi[s][1] * edge.normal[1];
                        acc[s][0] += wq * edge.length * flux * (1.0 - tq);
                        acc[s][1] += wq * edge.length * flux * tq;
                    }
                }
                for (s, a) in acc.iter().enumerate() {
                    for moment in 0..2 {
                        let row = 2 * fe + moment;
                        for r in 0..2 {
                            pi.push(r * stride_f + row, r * stride_c + cols[s], a[moment]);
                        }
                    }
                }
            }
        }

        let mut q = CooMatrix::new(fine_layout.n_mult(), coarse_layout.n_mult());
        for tc in 0..coarse.n_triangles() {
            for (slot, &child) in map.children[tc].iter().enumerate() {
                for node in 0..3 {
                    let bary = CHILD_BARY[slot][node];
                    for (parent_node, &weight) in bary.iter().enumerate() {
                        if weight != 0.0 {
                            for c in 0..2 {
                                q.push(
                                    fine_layout.disp_dof(child, node, c),
                                    coarse_layout.disp_dof(tc, parent_node, c),
                                    weight,
                                );
                            }
                        }
                    }
                }
            }
        }
        for v in 0..fine.n_vertices() {
            if v < nv_c {
                q.push(fine_layout.rot_dof(v), coarse_layout.rot_dof(v), 1.0);
            } else {
                let [a, b] = coarse.edge(v - nv_c).verts;
                q.push(fine_layout.rot_dof(v), coarse_layout.rot_dof(a), 0.5);
                q.push(fine_layout.rot_dof(v), coarse_layout.rot_dof(b), 0.5);
            }
        }

        let pi = pi.to_csr();
        let q = q.to_csr();
        let pit = pi.transpose();
        let qt = q.transpose();
        Ok(TransferPair { pi, q, pit, qt })
    }

    /// Zeroes prolongation rows at constrained fine stress dofs so coarse
    /// corrections never touch eliminated boundary values.
    pub fn apply_stress_constraints(&mut self, fine_constrained_mask: &[bool]) {
        self.pi.zero_rows(fine_constrained_mask);
        self.pit = self.pi.transpose();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{all_dirichlet, all_neumann, unit_square_mesh, MeshHierarchy};
    use crate::rng::SplitMix64;

    #[test]
    fn layout_dimension_identities() {
        for n in [1usize, 3] {
            let mesh = unit_square_mesh(n, &all_dirichlet).unwrap();
            let layout = DofLayout::build(&mesh);
            assert_eq!(
                layout.n_stress,
                2 * (2 * mesh.n_edges() + 2 * mesh.n_triangles())
            );
            assert_eq!(layout.n_disp, 6 * mesh.n_triangles());
            assert_eq!(layout.n_rot, mesh.n_vertices());
            assert!(layout.constrained.is_empty());
        }
        let mesh = unit_square_mesh(2, &all_neumann).unwrap();
        let layout = DofLayout::build(&mesh);
        assert_eq!(layout.constrained.len(), 4 * mesh.n_boundary_edges());
    }

    /// Applies the eight dof functionals to an arbitrary field.
    fn apply_functionals(mesh: &Mesh, t: usize, field: &dyn Fn(f64, f64) -> [f64; 2]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for k in 0..3 {
            let edge = mesh.edge(mesh.tri_edge(t, k));
            let pa = mesh.vertex(edge.verts[0]);
            let pb = mesh.vertex(edge.verts[1]);
            for (tq, wq) in edge_gauss() {
                let x = pa[0] + tq * (pb[0] - pa[0]);
                let y = pa[1] + tq * (pb[1] - pa[1]);
                let v = field(x, y);
                let flux = v[0] * edge.normal[0] + v[1] * edge.normal[1];
                out[2 * k] += wq * edge.length * flux * (1.0 - tq);
                out[2 * k + 1] += wq * edge.length * flux * tq;
            }
        }
        for (x, w) in quadrature(&mesh.triangle_coords(t), 4).unwrap() {
            let v = field(x[0], x[1]);
            out[6] += w * v[0];
            out[7] += w * v[1];
        }
        out
    }

    #[test]
    fn dual_basis_duality() {
        let mesh = unit_square_mesh(2, &all_dirichlet).unwrap();
        for t in 0..mesh.n_triangles() {
            let basis = ElementBasis::build(&mesh, t).unwrap();
            for j in 0..8 {
                let vals = apply_functionals(&mesh, t, &|x, y| basis.eval(j, x, y));
                for (i, v) in vals.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "tri {t} dof {j} func {i}: {v}");
                }
            }
        }
    }

    #[test]
    fn divergence_is_consistent_with_field() {
        let mesh = unit_square_mesh(2, &all_dirichlet).unwrap();
        let basis = ElementBasis::build(&mesh, 1).unwrap();
        let p = basis.map_ref(0.3, 0.3);
        let d = 1e-6;
        for j in 0..8 {
            let dx = (basis.eval(j, p[0] + d, p[1])[0] - basis.eval(j, p[0] - d, p[1])[0]) / (2.0 * d);
            let dy = (basis.eval(j, p[0], p[1] + d)[1] - basis.eval(j, p[0], p[1] - d)[1]) / (2.0 * d);
            assert!(
                (basis.div_all(p[0], p[1])[j] - (dx + dy)).abs() < 1e-5,
                "dof {j}"
            );
        }
    }

    #[test]
    fn interior_dof_has_zero_normal_trace() {
        let mesh = unit_square_mesh(2, &all_dirichlet).unwrap();
        for t in [0usize, 3] {
            let basis = ElementBasis::build(&mesh, t).unwrap();
            for j in [6usize, 7] {
                for k in 0..3 {
                    let edge = mesh.edge(mesh.tri_edge(t, k));
                    let pa = mesh.vertex(edge.verts[0]);
                    let pb = mesh.vertex(edge.verts[1]);
                    for (tq, _) in edge_gauss() {
                        let x = pa[0] + tq * (pb[0] - pa[0]);
                        let y = pa[1] + tq * (pb[1] - pa[1]);
                        let v = basis.eval(j, x, y);
                        let flux = v[0] * edge.normal[0] + v[1] * edge.normal[1];
                        assert!(flux.abs() < 1e-11, "tri {t} dof {j} edge {k}: {flux}");
                    }
                }
            }
        }
    }

    fn canonical_scalar_dofs(
        mesh: &Mesh,
        layout: &DofLayout,
        field: &dyn Fn(f64, f64) -> [f64; 2],
    ) -> Vec<f64> {
        let mut dofs = vec![0.0; layout.scalar_stride()];
        for e in 0..mesh.n_edges() {
            let edge = mesh.edge(e);
            let pa = mesh.vertex(edge.verts[0]);
            let pb = mesh.vertex(edge.verts[1]);
            for (tq, wq) in edge_gauss() {
                let x = pa[0] + tq * (pb[0] - pa[0]);
                let y = pa[1] + tq * (pb[1] - pa[1]);
                let v = field(x, y);
                let flux = v[0] * edge.normal[0] + v[1] * edge.normal[1];
                dofs[2 * e] += wq * edge.length * flux * (1.0 - tq);
                dofs[2 * e + 1] += wq * edge.length * flux * tq;
            }
        }
        for t in 0..mesh.n_triangles() {
            for (x, w) in quadrature(&mesh.triangle_coords(t), 4).unwrap() {
                let v = field(x[0], x[1]);
                dofs[2 * mesh.n_edges() + 2 * t] += w * v[0];
                dofs[2 * mesh.n_edges() + 2 * t + 1] += w * v[1];
            }
        }
        dofs
    }

    #[test]
    fn transfer_reproduces_nested_fields() {
        let coarse = unit_square_mesh(2, &all_dirichlet).unwrap();
        let hier = MeshHierarchy::build(coarse, 1).unwrap();
        let (coarse, fine) = (&hier.meshes[0], &hier.meshes[1]);
        let lc = DofLayout::build(coarse);
        let lf = DofLayout::build(fine);
        let pair = TransferPair::build(coarse, fine, &hier.maps[0], &lc, &lf).unwrap();

        // A full RT1 scalar field: linear part plus the x-weighted bubble.
        let field = |x: f64, y: f64| -> [f64; 2] {
            [0.7 - 0.3 * x + 1.1 * y + x * (0.5 * x - 0.2 * y), -0.4 + x + 0.25 * y
                + y * (0.5 * x - 0.2 * y)]
        };
        let coarse_scalar = canonical_scalar_dofs(coarse, &lc, &field);
        let fine_scalar = canonical_scalar_dofs(fine, &lf, &field);
        let mut yc = vec![0.0; lc.n_stress];
        yc[..lc.scalar_stride()].copy_from_slice(&coarse_scalar);
        let mut yf = vec![0.0; lf.n_stress];
        pair.pi.matvec(&yc, &mut yf);
        for (i, &v) in fine_scalar.iter().enumerate() {
            assert!((yf[i] - v).abs() < 1e-11, "dof {i}: {} vs {v}", yf[i]);
        }
        // Second tensor row untouched.
        for &v in &yf[lf.scalar_stride()..] {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn rotation_prolongation_interpolates_linears() {
        let coarse = unit_square_mesh(2, &all_dirichlet).unwrap();
        let hier = MeshHierarchy::build(coarse, 1).unwrap();
        let (coarse, fine) = (&hier.meshes[0], &hier.meshes[1]);
        let lc = DofLayout::build(coarse);
        let lf = DofLayout::build(fine);
        let pair = TransferPair::build(coarse, fine, &hier.maps[0], &lc, &lf).unwrap();

        let mut zc = vec![0.0; lc.n_mult()];
        for v in 0..coarse.n_vertices() {
            zc[lc.rot_dof(v)] = coarse.vertex(v)[0]; // p = x
        }
        let mut zf = vec![0.0; lf.n_mult()];
        pair.q.matvec(&zc, &mut zf);
        for v in 0..fine.n_vertices() {
            assert!((zf[lf.rot_dof(v)] - fine.vertex(v)[0]).abs() < 1e-14);
        }
        // Rotation block entries are exactly 1 or 1/2.
        for r in 6 * fine.n_triangles()..lf.n_mult() {
            let (_, vals) = pair.q.row(r);
            for &v in vals {
                assert!(v == 1.0 || v == 0.5, "entry {v}");
            }
        }
    }

    #[test]
    fn displacement_prolongation_reproduces_linears() {
        let coarse = unit_square_mesh(2, &all_dirichlet).unwrap();
        let hier = MeshHierarchy::build(coarse, 1).unwrap();
        let (coarse, fine) = (&hier.meshes[0], &hier.meshes[1]);
        let lc = DofLayout::build(coarse);
        let lf = DofLayout::build(fine);
        let pair = TransferPair::build(coarse, fine, &hier.maps[0], &lc, &lf).unwrap();

        let u = |p: [f64; 2]| [1.0 + 2.0 * p[0] - p[1], 0.5 - p[0] + 3.0 * p[1]];
        let mut zc = vec![0.0; lc.n_mult()];
        for t in 0..coarse.n_triangles() {
            let tri = coarse.triangle(t);
            for k in 0..3 {
                let val = u(coarse.vertex(tri[k]));
                zc[lc.disp_dof(t, k, 0)] = val[0];
                zc[lc.disp_dof(t, k, 1)] = val[1];
            }
        }
        let mut zf = vec![0.0; lf.n_mult()];
        pair.q.matvec(&zc, &mut zf);
        for t in 0..fine.n_triangles() {
            let tri = fine.triangle(t);
            for k in 0..3 {
                let val = u(fine.vertex(tri[k]));
                assert!((zf[lf.disp_dof(t, k, 0)] - val[0]).abs() < 1e-13);
                assert!((zf[lf.disp_dof(t, k, 1)] - val[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transfer_construction_is_deterministic() {
        let coarse = unit_square_mesh(2, &all_dirichlet).unwrap();
        let hier = MeshHierarchy::build(coarse, 1).unwrap();
        let lc = DofLayout::build(&hier.meshes[0]);
        let lf = DofLayout::build(&hier.meshes[1]);
        let a = TransferPair::build(&hier.meshes[0], &hier.meshes[1], &hier.maps[0], &lc, &lf)
            .unwrap();
        let b = TransferPair::build(&hier.meshes[0], &hier.meshes[1], &hier.maps[0], &lc, &lf)
            .unwrap();
        assert_eq!(a.pi.sub(&b.pi).frobenius(), 0.0);
        assert_eq!(a.q.sub(&b.q).frobenius(), 0.0);
        let mut rng = SplitMix64::new(11);
        let x: Vec<f64> = (0..lc.n_stress).map(|_| rng.next_symmetric()).collect();
        let mut ya = vec![0.0; lf.n_stress];
        let mut yb = vec![0.0; lf.n_stress];
        a.pi.matvec(&x, &mut ya);
        b.pi.matvec(&x, &mut yb);
        for (u, v) in ya.iter().zip(yb.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn non_nested_pair_rejected() {
        let a = unit_square_mesh(2, &all_dirichlet).unwrap();
        let b = unit_square_mesh(3, &all_dirichlet).unwrap();
        let hier = MeshHierarchy::build(a.clone(), 1).unwrap();
        let la = DofLayout::build(&a);
        let lb = DofLayout::build(&b);
        assert!(TransferPair::build(&a, &b, &hier.maps[0], &la, &lb).is_err());
    }
}
