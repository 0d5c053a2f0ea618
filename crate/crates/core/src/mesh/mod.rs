//! Admissible two-point-flux meshes.
//!
//! A mesh is a set of convex polygonal cells, each carrying a point `x_K`,
//! plus the list of edges with their transmissibility `τ_σ = m(σ)/d_σ`.
//! `d_σ` is the distance between the two cell points for an interior edge and
//! the distance from the cell point to the edge line for a boundary edge.
//! Boundary edges are either Dirichlet or Neumann; Dirichlet edges carry a
//! dense index used by [`DiscreteFunction`].

mod cartesian;
pub mod format;
mod function;
mod triangulation;
mod validate;

use std::collections::HashMap;

use thiserror::Error;

pub use cartesian::{build_cartesian, Rect};
pub use function::DiscreteFunction;
pub use triangulation::import_triangulation;
pub use validate::{validate, ValidationReport, Violation, DEFAULT_ANGLE_TOL};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior { k: usize, l: usize },
    Dirichlet { k: usize, index: usize },
    Neumann { k: usize },
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: usize,
    pub kind: EdgeKind,
    pub nodes: [usize; 2],
    /// Length `m(σ)`.
    pub measure: f64,
    pub d_sigma: f64,
    pub tau: f64,
}

impl Edge {
    /// The cell `K_σ` used when a sum runs over edges.
    pub fn owner(&self) -> usize {
        match self.kind {
            EdgeKind::Interior { k, .. } | EdgeKind::Dirichlet { k, .. } | EdgeKind::Neumann { k } => k,
        }
    }

    /// Neighbour across the edge as seen from cell `k`, for interior edges.
    pub fn neighbor_of(&self, k: usize) -> Option<usize> {
        match self.kind {
            EdgeKind::Interior { k: a, l: b } if a == k => Some(b),
            EdgeKind::Interior { k: a, l: b } if b == k => Some(a),
            _ => None,
        }
    }

    pub fn is_interior(&self) -> bool {
        matches!(self.kind, EdgeKind::Interior { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub id: usize,
    pub center: Point,
    /// Area `m(K)`.
    pub measure: f64,
    /// Polygon vertices, counter-clockwise.
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("cell {cell} references a missing node")]
    BadNodeIndex { cell: usize },
    #[error("cell {cell} has nonpositive area {area}")]
    NonPositiveArea { cell: usize, area: f64 },
    #[error("edge {nodes:?} is shared by more than two cells")]
    NonConforming { nodes: [usize; 2] },
    #[error("cell points of the cells adjacent to edge {edge} coincide (d_sigma = {d_sigma})")]
    CoincidentCenters { edge: usize, d_sigma: f64 },
    #[error("point of cell {cell} lies on or outside boundary edge {edge} (distance {distance})")]
    CenterOnBoundary { cell: usize, edge: usize, distance: f64 },
    #[error("boundary edge {nodes:?} has no label")]
    UnlabeledBoundary { nodes: [usize; 2] },
    #[error("label for {nodes:?} does not match a boundary edge")]
    InconsistentLabel { nodes: [usize; 2] },
    #[error("mesh has no Dirichlet edge")]
    NoDirichlet,
    #[error("mesh is not admissible:\n{0}")]
    NotAdmissible(ValidationReport),
    #[error("mesh file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read mesh file {path}: {message}")]
    Io { path: String, message: String },
}

/// Boundary edge handed to the classifier while a mesh is assembled.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdgeRef {
    pub nodes: [usize; 2],
    pub midpoint: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    dirichlet_edges: Vec<usize>,
    size: f64,
    xi: f64,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    let area = 0.5 * a2;
    if area.abs() < f64::MIN_POSITIVE {
        return (area, pts[0]);
    }
    (area, [cx / (6.0 * area), cy / (6.0 * area)])
}

impl Mesh {
    /// Assembles a mesh from polygonal cells and their cell points.
    ///
    /// Polygons may be given in either orientation; they are stored
    /// counter-clockwise. `classify` labels every boundary edge. The result
    /// is structurally consistent but not necessarily admissible; see
    /// [`validate`].
    pub fn from_polygons<F>(
        vertices: Vec<Point>,
        polygons: Vec<Vec<usize>>,
        centers: Vec<Point>,
        mut classify: F,
    ) -> Result<Mesh, MeshError>
    where
        F: FnMut(BoundaryEdgeRef) -> Option<BoundaryKind>,
    {
        assert_eq!(polygons.len(), centers.len(), "one cell point per polygon");
        let mut cells = Vec::with_capacity(polygons.len());
        let mut centroids = Vec::with_capacity(polygons.len());
        let mut size: f64 = 0.0;
        for (id, (mut nodes, center)) in polygons.into_iter().zip(centers).enumerate() {
            if nodes.len() < 3 || nodes.iter().any(|&n| n >= vertices.len()) {
                return Err(MeshError::BadNodeIndex { cell: id });
            }
            let pts: Vec<Point> = nodes.iter().map(|&n| vertices[n]).collect();
            let (mut area, centroid) = polygon_area_centroid(&pts);
            if area < 0.0 {
                nodes.reverse();
                area = -area;
            }
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { cell: id, area });
            }
            for (i, p) in pts.iter().enumerate() {
                for q in &pts[i + 1..] {
                    size = size.max(norm(sub(*p, *q)));
                }
            }
            centroids.push(centroid);
            cells.push(Cell { id, center, measure: area, nodes, edges: Vec::new() });
        }

        // edge discovery in cell order, local edges in polygon order
        let mut by_nodes: HashMap<(usize, usize), usize> = HashMap::new();
        let mut adjacency: Vec<([usize; 2], Vec<usize>)> = Vec::new();
        for cell in cells.iter_mut() {
            let n = cell.nodes.len();
            for i in 0..n {
                let a = cell.nodes[i];
                let b = cell.nodes[(i + 1) % n];
                let key = (a.min(b), a.max(b));
                let e = *by_nodes.entry(key).or_insert_with(|| {
                    adjacency.push(([a, b], Vec::new()));
                    adjacency.len() - 1
                });
                if adjacency[e].1.len() == 2 {
                    return Err(MeshError::NonConforming { nodes: [key.0, key.1] });
                }
                adjacency[e].1.push(cell.id);
                cell.edges.push(e);
            }
        }

        let mut edges = Vec::with_capacity(adjacency.len());
        let mut dirichlet_edges = Vec::new();
        for (id, (nodes, adj)) in adjacency.into_iter().enumerate() {
            let a = vertices[nodes[0]];
            let b = vertices[nodes[1]];
            let measure = norm(sub(b, a));
            let kind = if adj.len() == 2 {
                EdgeKind::Interior { k: adj[0], l: adj[1] }
            } else {
                let midpoint = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                match classify(BoundaryEdgeRef { nodes, midpoint }) {
                    Some(BoundaryKind::Dirichlet) => {
                        dirichlet_edges.push(id);
                        EdgeKind::Dirichlet { k: adj[0], index: dirichlet_edges.len() - 1 }
                    }
                    Some(BoundaryKind::Neumann) => EdgeKind::Neumann { k: adj[0] },
                    None => return Err(MeshError::UnlabeledBoundary { nodes }),
                }
            };
            let d_sigma = match kind {
                EdgeKind::Interior { k, l } => {
                    let d = norm(sub(cells[k].center, cells[l].center));
                    if !(d > 1e-14 * size) {
                        return Err(MeshError::CoincidentCenters { edge: id, d_sigma: d });
                    }
                    d
                }
                EdgeKind::Dirichlet { k, .. } | EdgeKind::Neumann { k } => {
                    let d = signed_distance(cells[k].center, a, b, centroids[k]);
                    if !(d > 1e-14 * size) {
                        return Err(MeshError::CenterOnBoundary { cell: k, edge: id, distance: d });
                    }
                    d
                }
            };
            edges.push(Edge { id, kind, nodes, measure, d_sigma, tau: measure / d_sigma });
        }

        let mut mesh = Mesh { vertices, cells, edges, dirichlet_edges, size, xi: 0.0 };
        mesh.xi = validate::regularity(&mesh);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell(&self, k: usize) -> &Cell {
        &self.cells[k]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// `θ`, the number of cells.
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// `θ^D`, the number of Dirichlet edges.
    pub fn num_dirichlet(&self) -> usize {
        self.dirichlet_edges.len()
    }

    /// Edge ids of the Dirichlet edges, in Dirichlet-index order.
    pub fn dirichlet_edges(&self) -> &[usize] {
        &self.dirichlet_edges
    }

    /// Maximum cell diameter.
    pub fn size(&self) -> f64 {
        self.size
    }

    /// Regularity parameter `ξ = min d(x_K, σ)/d_σ`.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].nodes;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Signed distance from the point of cell `k` to the line of edge `e`,
    /// positive on the side of the cell.
    pub fn center_edge_distance(&self, k: usize, e: usize) -> f64 {
        let [a, b] = self.edges[e].nodes;
        let cell = &self.cells[k];
        let pts: Vec<Point> = cell.nodes.iter().map(|&n| self.vertices[n]).collect();
        let (_, centroid) = polygon_area_centroid(&pts);
        signed_distance(cell.center, self.vertices[a], self.vertices[b], centroid)
    }

    /// Rebuilds the mesh with a different point for one cell, keeping the
    /// boundary labels. Used to construct non-admissible meshes in tests and
    /// to inspect validation.
    pub fn with_center(&self, k: usize, center: Point) -> Result<Mesh, MeshError> {
        let mut centers: Vec<Point> = self.cells.iter().map(|c| c.center).collect();
        centers[k] = center;
        let labels: HashMap<(usize, usize), BoundaryKind> = self
            .edges
            .iter()
            .filter_map(|e| {
                let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
                match e.kind {
                    EdgeKind::Dirichlet { .. } => Some((key, BoundaryKind::Dirichlet)),
                    EdgeKind::Neumann { .. } => Some((key, BoundaryKind::Neumann)),
                    EdgeKind::Interior { .. } => None,
                }
            })
            .collect();
        Mesh::from_polygons(self.vertices.clone(), self.cells.iter().map(|c| c.nodes.clone()).collect(), centers, |b| {
            labels.get(&(b.nodes[0].min(b.nodes[1]), b.nodes[0].max(b.nodes[1]))).copied()
        })
    }
}

fn signed_distance(x: Point, a: Point, b: Point, inside: Point) -> f64 {
    let t = sub(b, a);
    let len = norm(t);
    let mut n = [-t[1] / len, t[0] / len];
    if dot(sub(inside, a), n) < 0.0 {
        n = [-n[0], -n[1]];
    }
    dot(sub(x, a), n)
}
