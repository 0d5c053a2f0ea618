use std::collections::HashMap;

use super::{validate, BoundaryKind, Mesh, MeshError, Point, DEFAULT_ANGLE_TOL};

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Builds a mesh from a conforming triangulation using circumcenters as cell
/// points. Every boundary edge must be labelled, and only boundary edges may
/// be labelled. Triangles whose circumcenter is not strictly inside are
/// rejected.
pub fn import_triangulation(
    nodes: &[Point],
    triangles: &[[usize; 3]],
    boundary_labels: &[([usize; 2], BoundaryKind)],
) -> Result<Mesh, MeshError> {
    let mut centers = Vec::with_capacity(triangles.len());
    for (id, t) in triangles.iter().enumerate() {
        if t.iter().any(|&n| n >= nodes.len()) {
            return Err(MeshError::BadNodeIndex { cell: id });
        }
        centers.push(circumcenter(nodes[t[0]], nodes[t[1]], nodes[t[2]]));
    }

    let mut labels: HashMap<(usize, usize), BoundaryKind> = HashMap::new();
    for &([a, b], kind) in boundary_labels {
        if labels.insert(key(a, b), kind).is_some_and(|prev| prev != kind) {
            return Err(MeshError::InconsistentLabel { nodes: [a, b] });
        }
    }
    let mut used = HashMap::new();
    let mesh = Mesh::from_polygons(nodes.to_vec(), triangles.iter().map(|t| t.to_vec()).collect(), centers, |b| {
        let k = key(b.nodes[0], b.nodes[1]);
        let kind = labels.get(&k).copied();
        if kind.is_some() {
            used.insert(k, ());
        }
        kind
    })?;
    if let Some((&(a, b), _)) = labels.iter().filter(|(k, _)| !used.contains_key(*k)).min_by_key(|(k, _)| **k) {
        return Err(MeshError::InconsistentLabel { nodes: [a, b] });
    }
    let report = validate(&mesh, DEFAULT_ANGLE_TOL);
    if !report.ok {
        return Err(MeshError::NotAdmissible(report));
    }
    Ok(mesh)
}
