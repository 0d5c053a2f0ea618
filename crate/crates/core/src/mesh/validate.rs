use std::fmt;

use super::{EdgeKind, Mesh};

/// Maximum accepted deviation (radians) of a center segment from the edge
/// normal.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonOrthogonal {
        edge: usize,
        angle: f64,
    },
    /// `d(x_K, σ)` is not positive: the cell point sits on the edge or on
    /// the wrong side of it.
    CenterOutside {
        cell: usize,
        edge: usize,
        distance: f64,
    },
    NoDirichlet,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonOrthogonal { edge, angle } => {
                write!(f, "edge {edge}: center segment deviates from the normal by {angle:.3e} rad")
            }
            Violation::CenterOutside { cell, edge, distance } => {
                write!(f, "cell {cell}, edge {edge}: signed center distance {distance:.3e}")
            }
            Violation::NoDirichlet => write!(f, "no Dirichlet boundary edge"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    /// Largest angle (radians) between a center segment and its edge normal.
    pub worst_orthogonality: f64,
    pub xi: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn offending_edges(&self) -> Vec<usize> {
        let mut edges: Vec<usize> = self
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::NonOrthogonal { edge, .. } | Violation::CenterOutside { edge, .. } => Some(*edge),
                Violation::NoDirichlet => None,
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "admissible: {}", if self.ok { "yes" } else { "no" })?;
        writeln!(f, "worst orthogonality defect: {:.3e} rad", self.worst_orthogonality)?;
        writeln!(f, "regularity xi: {:.6}", self.xi)?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

pub(super) fn regularity(mesh: &Mesh) -> f64 {
    let mut xi = f64::INFINITY;
    for cell in mesh.cells() {
        for &e in &cell.edges {
            let ratio = mesh.center_edge_distance(cell.id, e) / mesh.edge(e).d_sigma;
            xi = xi.min(ratio);
        }
    }
    xi
}

fn orthogonality_defect(mesh: &Mesh, e: usize) -> Option<f64> {
    let edge = mesh.edge(e);
    let EdgeKind::Interior { k, l } = edge.kind else {
        return None;
    };
    let [a, b] = edge.nodes;
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let t = [pb[0] - pa[0], pb[1] - pa[1]];
    let (xk, xl) = (mesh.cell(k).center, mesh.cell(l).center);
    let s = [xl[0] - xk[0], xl[1] - xk[1]];
    let cos = (t[0] * s[0] + t[1] * s[1]).abs() / (t[0].hypot(t[1]) * s[0].hypot(s[1]));
    Some(cos.min(1.0).asin())
}

/// Checks two-point-flux admissibility: center segments orthogonal to
/// interior edges within `angle_tol`, every cell point strictly inside its
/// cell relative to each edge (`ξ > 0`), and a nonempty Dirichlet boundary.
pub fn validate(mesh: &Mesh, angle_tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for edge in mesh.edges() {
        if let Some(angle) = orthogonality_defect(mesh, edge.id) {
            worst = worst.max(angle);
            if angle > angle_tol {
                violations.push(Violation::NonOrthogonal { edge: edge.id, angle });
            }
        }
    }
    for cell in mesh.cells() {
        for &e in &cell.edges {
            let distance = mesh.center_edge_distance(cell.id, e);
            if !(distance > 0.0) {
                violations.push(Violation::CenterOutside { cell: cell.id, edge: e, distance });
            }
        }
    }
    if mesh.num_dirichlet() == 0 {
        violations.push(Violation::NoDirichlet);
    }
    ValidationReport { ok: violations.is_empty(), worst_orthogonality: worst, xi: regularity(mesh), violations }
}
