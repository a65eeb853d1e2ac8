//! Conforming 2D triangular meshes with oriented edges, boundary labels,
//! nested uniform refinement and node patches.
//!
//! Edge orientation is fixed globally: the unit normal of an interior edge
//! points from the lower-index incident triangle to the higher-index one, and
//! boundary normals point outward. Normal-trace degrees of freedom built on
//! this convention are reproducible across runs and across levels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryLabel {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, ascending.
    pub verts: [usize; 2],
    /// Incident triangles; `1` is `None` on the boundary, otherwise the pair
    /// is ascending.
    pub tris: (usize, Option<usize>),
    /// Unit normal under the global orientation convention.
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Clone)]
pub struct Mesh {
    pub level: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Per triangle, the global edge opposite each local vertex.
    tri_edges: Vec<[usize; 3]>,
    /// Per edge: `Some(label)` iff the edge lies on the boundary.
    boundary: Vec<Option<BoundaryLabel>>,
    /// Sorted triangle incidence per vertex.
    vertex_tris: Vec<Vec<usize>>,
}

/// Parent-child bookkeeping produced by one uniform refinement step.
#[derive(Clone, Debug)]
pub struct RefinementMap {
    /// Coarse triangle -> its four children (three corner children then the
    /// central one).
    pub children: Vec<[usize; 4]>,
    /// Fine edge -> coarse edge it halves, if any.
    pub edge_parent: Vec<Option<usize>>,
    /// Number of coarse vertices; fine vertex `n_coarse_vertices + e` is the
    /// midpoint of coarse edge `e`.
    pub n_coarse_vertices: usize,
}

/// Elements around a node, possibly enlarged near the boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub anchor: usize,
    /// Sorted triangle indices.
    pub elements: Vec<usize>,
    /// Nodes whose stars were merged in, starting with the anchor.
    pub trace: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh from raw vertices and counter-clockwise triangles; the
    /// classifier labels each boundary edge from its midpoint.
    pub fn build(
        level: usize,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        classifier: &dyn Fn([f64; 2]) -> BoundaryLabel,
    ) -> Result<Mesh> {
        Self::build_inner(level, vertices, triangles, |_, mid| Ok(classifier(mid)))
    }

    fn build_inner(
        level: usize,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        mut labeler: impl FnMut([usize; 2], [f64; 2]) -> Result<BoundaryLabel>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidVertexIndex { tri: t, vertex: v });
                }
            }
            if signed_area(&vertices, tri) <= 0.0 {
                return Err(Error::InvertedTriangle(t));
            }
        }

        // Deterministic edge numbering: lexicographic by ascending vertex pair.
        let mut acc: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = [a.min(b), a.max(b)];
                acc.entry(key).or_default().push(t);
            }
        }

        let mut edges = Vec::with_capacity(acc.len());
        let mut boundary = Vec::with_capacity(acc.len());
        let mut edge_index: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for (key, mut tris) in acc {
            if tris.len() > 2 {
                return Err(Error::NonManifoldEdge(key[0], key[1]));
            }
            tris.sort_unstable();
            let pa = vertices[key[0]];
            let pb = vertices[key[1]];
            let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
            let length = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
            if length == 0.0 {
                return Err(Error::DegenerateTriangle(tris[0]));
            }
            let mut normal = [tangent[1] / length, -tangent[0] / length];
            // Point away from the lower-index (or only) incident triangle.
            let c = centroid(&vertices, &triangles[tris[0]]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if normal[0] * (c[0] - mid[0]) + normal[1] * (c[1] - mid[1]) > 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            let pair = match tris.len() {
                1 => (tris[0], None),
                _ => (tris[0], Some(tris[1])),
            };
            let e = edges.len();
            edge_index.insert(key, e);
            let label = if pair.1.is_none() {
                Some(labeler(key, mid)?)
            } else {
                None
            };
            boundary.push(label);
            edges.push(Edge {
                verts: key,
                tris: pair,
                normal,
                length,
            });
        }

        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                tri_edges[t][k] = edge_index[&[a.min(b), a.max(b)]];
            }
        }

        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        for list in &mut vertex_tris {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Mesh {
            level,
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary,
            vertex_tris,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Global edge opposite local vertex `k` of triangle `t`.
    pub fn tri_edge(&self, t: usize, k: usize) -> usize {
        self.tri_edges[t][k]
    }

    pub fn boundary_label(&self, e: usize) -> Option<BoundaryLabel> {
        self.boundary[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary[e].is_some()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, BoundaryLabel)> + '_ {
        self.boundary
            .iter()
            .enumerate()
            .filter_map(|(e, l)| l.map(|l| (e, l)))
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.boundary.iter().filter(|l| l.is_some()).count()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    /// Edge length totals per boundary label (Neumann, Dirichlet).
    pub fn boundary_lengths(&self) -> (f64, f64) {
        let mut n = 0.0;
        let mut d = 0.0;
        for (e, label) in self.boundary_edges() {
            match label {
                BoundaryLabel::Neumann => n += self.edges[e].length,
                BoundaryLabel::Dirichlet => d += self.edges[e].length,
            }
        }
        (n, d)
    }

    /// Checks the structural invariants (Euler count, areas, manifoldness is
    /// guaranteed by construction). Intended for tests and import validation.
    pub fn check_invariants(&self) -> Result<()> {
        let b = self.n_boundary_edges();
        if 2 * self.n_edges() != 3 * self.n_triangles() + b {
            return Err(Error::MeshFormat(format!(
                "edge count {} inconsistent with (3T + b)/2 = {}",
                self.n_edges(),
                (3 * self.n_triangles() + b) as f64 / 2.0
            )));
        }
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(Error::InvertedTriangle(t));
            }
        }
        Ok(())
    }

    /// Uniform 1->4 (red) refinement via edge midpoints. Children are
    /// congruent, nested in the parent, and boundary labels are inherited
    /// from the parent boundary edge.
    pub fn refine_uniform(&self) -> Result<(Mesh, RefinementMap)> {
        let nv = self.n_vertices();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.n_edges());
        for e in &self.edges {
            let pa = self.vertices[e.verts[0]];
            let pb = self.vertices[e.verts[1]];
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }

        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        let mut children = Vec::with_capacity(self.n_triangles());
        for t in 0..self.n_triangles() {
            let [v0, v1, v2] = self.triangles[t];
            // tri_edges[t][k] is opposite vertex k.
            let m12 = nv + self.tri_edges[t][0];
            let m20 = nv + self.tri_edges[t][1];
            let m01 = nv + self.tri_edges[t][2];
            let base = triangles.len();
            triangles.push([v0, m01, m20]);
            triangles.push([v1, m12, m01]);
            triangles.push([v2, m20, m12]);
            triangles.push([m01, m12, m20]);
            children.push([base, base + 1, base + 2, base + 3]);
        }

        let fine = Mesh::build_inner(self.level + 1, vertices, triangles, |verts, _mid| {
            // A fine boundary edge is one half of a coarse boundary edge; its
            // midpoint endpoint identifies the parent.
            let parent = parent_of_half_edge(verts, nv).ok_or_else(|| {
                Error::MeshFormat("boundary edge without a coarse parent".into())
            })?;
            self.boundary[parent].ok_or_else(|| {
                Error::MeshFormat("fine boundary edge over an interior coarse edge".into())
            })
        })?;

        let edge_parent = (0..fine.n_edges())
            .map(|e| {
                parent_of_half_edge(fine.edges[e].verts, nv).filter(|&p| p < self.n_edges())
            })
            .collect();

        Ok((
            fine,
            RefinementMap {
                children,
                edge_parent,
                n_coarse_vertices: nv,
            },
        ))
    }

    /// All elements sharing `node`.
    pub fn node_patch(&self, node: usize) -> Result<Patch> {
        let elements = self.vertex_tris.get(node).cloned().unwrap_or_default();
        if elements.is_empty() {
            return Err(Error::IsolatedVertex(node));
        }
        Ok(Patch {
            anchor: node,
            elements,
            trace: vec![node],
        })
    }

    /// Grows a patch until it has at least three elements, merging in the
    /// star of the lowest-index node of the current patch not yet used.
    pub fn enlarge_patch(&self, patch: Patch) -> Result<Patch> {
        if self.n_triangles() < 3 {
            return Err(Error::MeshTooSmall);
        }
        let mut patch = patch;
        while patch.elements.len() < 3 {
            let candidate = patch
                .elements
                .iter()
                .flat_map(|&t| self.triangles[t])
                .filter(|v| !patch.trace.contains(v))
                .min();
            let Some(next) = candidate else {
                return Err(Error::MeshTooSmall);
            };
            let star = self.node_patch(next)?;
            for t in star.elements {
                if let Err(pos) = patch.elements.binary_search(&t) {
                    patch.elements.insert(pos, t);
                }
            }
            patch.trace.push(next);
        }
        Ok(patch)
    }

    /// Enlarged node patches for every vertex, in ascending node order.
    pub fn all_patches(&self) -> Result<Vec<Patch>> {
        (0..self.n_vertices())
            .map(|v| self.enlarge_patch(self.node_patch(v)?))
            .collect()
    }

    /// Plain-text serialization: header `V T B`, vertex lines, triangle
    /// lines, boundary edge lines `v0 v1 label` with label N or D.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let b = self.n_boundary_edges();
        let _ = writeln!(s, "{} {} {}", self.n_vertices(), self.n_triangles(), b);
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for (e, label) in self.boundary_edges() {
            let tag = match label {
                BoundaryLabel::Neumann => "N",
                BoundaryLabel::Dirichlet => "D",
            };
            let verts = self.edges[e].verts;
            let _ = writeln!(s, "{} {} {}", verts[0], verts[1], tag);
        }
        s
    }

    pub fn from_text(level: usize, text: &str) -> Result<Mesh> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::MeshFormat(format!("unexpected end of input reading {what}")))
        };
        let nv: usize = parse(next("vertex count")?)?;
        let nt: usize = parse(next("triangle count")?)?;
        let nb: usize = parse(next("boundary count")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let x: f64 = parse(next("vertex x")?)?;
            let y: f64 = parse(next("vertex y")?)?;
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let a: usize = parse(next("triangle vertex")?)?;
            let b: usize = parse(next("triangle vertex")?)?;
            let c: usize = parse(next("triangle vertex")?)?;
            triangles.push([a, b, c]);
        }
        let mut labels: BTreeMap<[usize; 2], BoundaryLabel> = BTreeMap::new();
        for _ in 0..nb {
            let a: usize = parse(next("boundary vertex")?)?;
            let b: usize = parse(next("boundary vertex")?)?;
            let tag = next("boundary label")?;
            let label = match tag {
                "N" => BoundaryLabel::Neumann,
                "D" => BoundaryLabel::Dirichlet,
                other => {
                    return Err(Error::MeshFormat(format!(
                        "unknown boundary label {other:?} (expected N or D)"
                    )))
                }
            };
            labels.insert([a.min(b), a.max(b)], label);
        }
        let mesh = Mesh::build_inner(level, vertices, triangles, |verts, _| {
            labels.get(&verts).copied().ok_or_else(|| {
                Error::MeshFormat(format!(
                    "boundary edge ({}, {}) has no label entry",
                    verts[0], verts[1]
                ))
            })
        })?;
        if mesh.n_boundary_edges() != nb {
            return Err(Error::MeshFormat(format!(
                "{} boundary labels listed but mesh has {} boundary edges",
                nb,
                mesh.n_boundary_edges()
            )));
        }
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(level: usize, path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        Mesh::from_text(level, &text)
    }
}

/// Chain of nested meshes, coarse to fine.
pub struct MeshHierarchy {
    pub meshes: Vec<Mesh>,
    /// `maps[j]` relates level `j` to level `j + 1`.
    pub maps: Vec<RefinementMap>,
}

impl MeshHierarchy {
    pub fn build(coarse: Mesh, refinements: usize) -> Result<MeshHierarchy> {
        let mut meshes = vec![coarse];
        let mut maps = Vec::new();
        for _ in 0..refinements {
            let (fine, map) = meshes.last().unwrap().refine_uniform()?;
            meshes.push(fine);
            maps.push(map);
        }
        Ok(MeshHierarchy { meshes, maps })
    }

    pub fn levels(&self) -> usize {
        self.meshes.len()
    }

    pub fn finest(&self) -> &Mesh {
        self.meshes.last().unwrap()
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let a = vertices[tri[0]];
    let b = vertices[tri[1]];
    let c = vertices[tri[2]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn centroid(vertices: &[[f64; 2]], tri: &[usize; 3]) -> [f64; 2] {
    let a = vertices[tri[0]];
    let b = vertices[tri[1]];
    let c = vertices[tri[2]];
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// For a fine edge with ascending endpoints `verts` on a once-refined mesh
/// with `n_coarse` coarse vertices: the coarse edge it halves, if any.
fn parent_of_half_edge(verts: [usize; 2], n_coarse: usize) -> Option<usize> {
    let [a, b] = verts;
    if a < n_coarse && b >= n_coarse {
        Some(b - n_coarse)
    } else {
        None
    }
}

fn parse<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::MeshFormat(format!("cannot parse token {tok:?}")))
}

/// Everything-Neumann classifier, handy for tests.
pub fn all_neumann(_mid: [f64; 2]) -> BoundaryLabel {
    BoundaryLabel::Neumann
}

/// Everything-Dirichlet classifier, handy for tests.
pub fn all_dirichlet(_mid: [f64; 2]) -> BoundaryLabel {
    BoundaryLabel::Dirichlet
}

/// Structured triangulation of the unit square with `n x n` cells, each cell
/// split along its anti-diagonal. Holes (given as a predicate on triangle
/// centroids) can be cut out by the callers that need them.
pub fn unit_square_mesh(
    n: usize,
    classifier: &dyn Fn([f64; 2]) -> BoundaryLabel,
) -> Result<Mesh> {
    grid_mesh(n, |x, y| [x, y], |_c| false, classifier)
}

/// Structured mesh over the unit square mapped through `map`, with triangles
/// whose centroid (in unit-square coordinates) satisfies `hole` removed.
/// Each cell is cut along its shorter physical diagonal (ties go to the
/// anti-diagonal), which keeps triangles well shaped under sheared maps.
/// Unused vertices are dropped and indices compacted.
pub fn grid_mesh(
    n: usize,
    map: impl Fn(f64, f64) -> [f64; 2],
    hole: impl Fn([f64; 2]) -> bool,
    classifier: &dyn Fn([f64; 2]) -> BoundaryLabel,
) -> Result<Mesh> {
    assert!(n >= 1);
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let dist2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut triangles_raw: Vec<([usize; 3], [f64; 2])> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            let p00 = map(x0, y0);
            let p10 = map(x0 + h, y0);
            let p11 = map(x0 + h, y0 + h);
            let p01 = map(x0, y0 + h);
            let unit = [
                [x0, y0],
                [x0 + h, y0],
                [x0 + h, y0 + h],
                [x0, y0 + h],
            ];
            let centroid = |a: usize, b: usize, c: usize| {
                [
                    (unit[a][0] + unit[b][0] + unit[c][0]) / 3.0,
                    (unit[a][1] + unit[b][1] + unit[c][1]) / 3.0,
                ]
            };
            let ids = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)];
            if dist2(p00, p11) < dist2(p10, p01) {
                // Main diagonal.
                triangles_raw.push(([ids[0], ids[1], ids[2]], centroid(0, 1, 2)));
                triangles_raw.push(([ids[0], ids[2], ids[3]], centroid(0, 2, 3)));
            } else {
                // Anti-diagonal.
                triangles_raw.push(([ids[0], ids[1], ids[3]], centroid(0, 1, 3)));
                triangles_raw.push(([ids[1], ids[2], ids[3]], centroid(1, 2, 3)));
            }
        }
    }

    let mut keep_vertex = vec![false; (n + 1) * (n + 1)];
    let mut triangles = Vec::new();
    for (tri, c) in triangles_raw {
        if !hole(c) {
            for &v in &tri {
                keep_vertex[v] = true;
            }
            triangles.push(tri);
        }
    }
    let mut remap = vec![usize::MAX; keep_vertex.len()];
    let mut vertices = Vec::new();
    for (old, &keep) in keep_vertex.iter().enumerate() {
        if keep {
            remap[old] = vertices.len();
            let (i, j) = (old % (n + 1), old / (n + 1));
            vertices.push(map(i as f64 * h, j as f64 * h));
        }
    }
    for tri in &mut triangles {
        for v in tri.iter_mut() {
            *v = remap[*v];
        }
    }
    Mesh::build(0, vertices, triangles, classifier)
}
