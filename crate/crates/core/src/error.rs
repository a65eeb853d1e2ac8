use thiserror::Error;

/// Errors produced while building meshes, assembling systems or running solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("triangle {0} has non-positive area")]
    InvertedTriangle(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("triangle {tri} references vertex {vertex} out of range")]
    InvalidVertexIndex { tri: usize, vertex: usize },
    #[error("vertex {0} has no incident triangles")]
    IsolatedVertex(usize),
    #[error("mesh has fewer than three triangles; patches cannot be enlarged")]
    MeshTooSmall,
    #[error("meshes do not form a nested refinement pair")]
    NonNestedPair,
    #[error("unsupported quadrature order {0} (supported: 2, 4, 6)")]
    UnsupportedQuadratureOrder(u32),
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error(
        "local patch system at node {anchor} is singular (pivot {pivot:.3e} < {threshold:.3e})"
    )]
    SingularLocalSystem {
        anchor: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("matrix is numerically singular (pivot {pivot:.3e} < {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mesh file: {0}")]
    MeshFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
