use super::{validate, BoundaryKind, Mesh, MeshError, Point, DEFAULT_ANGLE_TOL};

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Uniform `nx × ny` grid of rectangles with cell points at the centroids.
/// `dirichlet` is asked about the midpoint of every boundary edge.
pub fn build_cartesian<F>(nx: usize, ny: usize, domain: Rect, dirichlet: F) -> Result<Mesh, MeshError>
where
    F: Fn(Point) -> bool,
{
    if nx == 0 || ny == 0 {
        return Err(MeshError::DegenerateDomain(format!("grid {nx}x{ny}")));
    }
    let (w, h) = (domain.x1 - domain.x0, domain.y1 - domain.y0);
    if !(w > 0.0 && h > 0.0) {
        return Err(MeshError::DegenerateDomain(format!("width {w}, height {h}")));
    }
    let (hx, hy) = (w / nx as f64, h / ny as f64);
    let node = |i: usize, j: usize| i + j * (nx + 1);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // pin the far sides so the domain is reproduced exactly
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
            vertices.push([x, y]);
        }
    }
    let mut polygons = Vec::with_capacity(nx * ny);
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            polygons.push(vec![node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            let (a, c) = (vertices[node(i, j)], vertices[node(i + 1, j + 1)]);
            centers.push([0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1])]);
        }
    }
    let mesh = Mesh::from_polygons(vertices, polygons, centers, |b| {
        Some(if dirichlet(b.midpoint) { BoundaryKind::Dirichlet } else { BoundaryKind::Neumann })
    })?;
    let report = validate(&mesh, DEFAULT_ANGLE_TOL);
    if !report.ok {
        return Err(MeshError::NotAdmissible(report));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::EdgeKind;

    #[test]
    fn two_cells() {
        let mesh = build_cartesian(2, 1, Rect::UNIT, |_| true).unwrap();
        assert_eq!(mesh.num_cells(), 2);
        assert!(mesh.cells().iter().all(|c| (c.measure - 0.5).abs() < 1e-15));
        let interior: Vec<_> = mesh.edges().iter().filter(|e| e.is_interior()).collect();
        assert_eq!(interior.len(), 1);
        let e = interior[0];
        assert!((e.measure - 1.0).abs() < 1e-15);
        assert!((e.d_sigma - 0.5).abs() < 1e-15);
        assert!((e.tau - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_cell_all_dirichlet() {
        let mesh = build_cartesian(1, 1, Rect::UNIT, |_| true).unwrap();
        assert_eq!(mesh.num_cells(), 1);
        assert_eq!(mesh.num_dirichlet(), 4);
        assert_eq!(mesh.edges().iter().filter(|e| e.is_interior()).count(), 0);
    }

    #[test]
    fn three_cells_left_right_dirichlet() {
        let mesh = build_cartesian(3, 1, Rect::UNIT, |p| p[0] == 0.0 || p[0] == 1.0).unwrap();
        assert_eq!(mesh.num_dirichlet(), 2);
        for &e in mesh.dirichlet_edges() {
            let edge = mesh.edge(e);
            assert!((edge.d_sigma - 1.0 / 6.0).abs() < 1e-15);
            assert!((edge.tau - 6.0).abs() < 1e-13);
        }
        let neumann = mesh.edges().iter().filter(|e| matches!(e.kind, EdgeKind::Neumann { .. })).count();
        assert_eq!(neumann, 6);
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        let flat = Rect { x0: 0.0, x1: 1.0, y0: 0.5, y1: 0.5 };
        assert!(matches!(build_cartesian(2, 2, flat, |_| true), Err(MeshError::DegenerateDomain(_))));
        assert!(matches!(build_cartesian(0, 2, Rect::UNIT, |_| true), Err(MeshError::DegenerateDomain(_))));
    }

    #[test]
    fn measures_sum_to_domain_area() {
        let domain = Rect { x0: -0.3, x1: 2.1, y0: 0.7, y1: 1.9 };
        let mesh = build_cartesian(7, 13, domain, |p| p[1] == 0.7).unwrap();
        let rel = (mesh.total_measure() - domain.area()).abs() / domain.area();
        assert!(rel < 1e-12);
        assert!(mesh.edges().iter().all(|e| e.tau > 0.0 && e.d_sigma > 0.0));
    }
}
