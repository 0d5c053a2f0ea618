//! Plain-text triangulation format.
//!
//! ```text
//! # comment
//! nodes 4
//! 0.0 0.0
//! ...
//! triangles 2
//! 0 1 2
//! ...
//! boundary 4
//! 0 1 dirichlet
//! 1 3 neumann
//! ...
//! ```
//!
//! Node indices are zero-based. Blank lines and text after `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{import_triangulation, BoundaryKind, Mesh, MeshError, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationData {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<([usize; 2], BoundaryKind)>,
}

impl TriangulationData {
    pub fn into_mesh(self) -> Result<Mesh, MeshError> {
        import_triangulation(&self.nodes, &self.triangles, &self.boundary)
    }
}

fn perr(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn header(lines: &mut impl Iterator<Item = (usize, Vec<String>)>, name: &str) -> Result<usize, MeshError> {
    let (ln, tok) = lines.next().ok_or_else(|| perr(0, format!("missing `{name}` header")))?;
    if tok.len() != 2 || tok[0] != name {
        return Err(perr(ln, format!("expected `{name} <count>`")));
    }
    tok[1].parse().map_err(|_| perr(ln, format!("bad {name} count `{}`", tok[1])))
}

fn record(
    lines: &mut impl Iterator<Item = (usize, Vec<String>)>,
    what: &str,
    len: usize,
) -> Result<(usize, Vec<String>), MeshError> {
    let (ln, tok) = lines.next().ok_or_else(|| perr(0, format!("file ends inside the {what} block")))?;
    if tok.len() != len {
        return Err(perr(ln, format!("{what} record needs {len} fields, found {}", tok.len())));
    }
    Ok((ln, tok))
}

fn index(ln: usize, s: &str) -> Result<usize, MeshError> {
    s.parse().map_err(|_| perr(ln, format!("bad node index `{s}`")))
}

pub fn parse(text: &str) -> Result<TriangulationData, MeshError> {
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let tok: Vec<String> = content.split_whitespace().map(str::to_owned).collect();
        (!tok.is_empty()).then_some((i + 1, tok))
    });

    let n = header(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, tok) = record(&mut lines, "node", 2)?;
        let mut p: Point = [0.0; 2];
        for (c, s) in p.iter_mut().zip(&tok) {
            *c = s.parse().map_err(|_| perr(ln, format!("bad coordinate `{s}`")))?;
            if !c.is_finite() {
                return Err(perr(ln, "non-finite coordinate"));
            }
        }
        nodes.push(p);
    }

    let m = header(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, tok) = record(&mut lines, "triangle", 3)?;
        let mut t = [0; 3];
        for (c, s) in t.iter_mut().zip(&tok) {
            *c = index(ln, s)?;
            if *c >= n {
                return Err(perr(ln, format!("node {c} out of range")));
            }
        }
        triangles.push(t);
    }

    let k = header(&mut lines, "boundary")?;
    let mut boundary = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln, tok) = record(&mut lines, "boundary", 3)?;
        let (a, b) = (index(ln, &tok[0])?, index(ln, &tok[1])?);
        let kind = match tok[2].to_ascii_lowercase().as_str() {
            "dirichlet" => BoundaryKind::Dirichlet,
            "neumann" => BoundaryKind::Neumann,
            other => return Err(perr(ln, format!("unknown boundary kind `{other}`"))),
        };
        boundary.push(([a, b], kind));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "trailing content after the boundary block"));
    }
    Ok(TriangulationData { nodes, triangles, boundary })
}

pub fn write(data: &TriangulationData) -> String {
    let mut out = String::new();
    writeln!(out, "nodes {}", data.nodes.len()).unwrap();
    for p in &data.nodes {
        writeln!(out, "{:.17e} {:.17e}", p[0], p[1]).unwrap();
    }
    writeln!(out, "triangles {}", data.triangles.len()).unwrap();
    for t in &data.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "boundary {}", data.boundary.len()).unwrap();
    for ([a, b], kind) in &data.boundary {
        let k = match kind {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        };
        writeln!(out, "{a} {b} {k}").unwrap();
    }
    out
}

pub fn read_mesh_file(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MeshError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse(&text)?.into_mesh()
}
