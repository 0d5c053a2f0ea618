//! Legacy ASCII VTK output of cell fields.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::equilibrium::EquilibriumState;
use crate::mesh::Mesh;
use crate::problem::State;

/// Names of the cell-data arrays, in file order.
pub const ARRAYS: [&str; 6] = ["N", "P", "Psi", "N_eq", "P_eq", "Psi_eq"];

const VTK_TRIANGLE: u8 = 5;
const VTK_QUAD: u8 = 9;
const VTK_POLYGON: u8 = 7;

/// Writes an unstructured grid with one scalar array per entry of `fields`.
pub fn write_grid<W: Write>(out: &mut W, mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> io::Result<()> {
    let cells = mesh.cells();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} 0", v[0], v[1])?;
    }
    let size: usize = cells.iter().map(|c| c.nodes.len() + 1).sum();
    writeln!(out, "CELLS {} {}", cells.len(), size)?;
    for c in cells {
        write!(out, "{}", c.nodes.len())?;
        for n in &c.nodes {
            write!(out, " {n}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for c in cells {
        let kind = match c.nodes.len() {
            3 => VTK_TRIANGLE,
            4 => VTK_QUAD,
            _ => VTK_POLYGON,
        };
        writeln!(out, "{kind}")?;
    }
    writeln!(out, "CELL_DATA {}", cells.len())?;
    for (name, values) in fields {
        if values.len() != cells.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("field {name} has {} values for {} cells", values.len(), cells.len()),
            ));
        }
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(out, "{v:.16e}")?;
        }
    }
    Ok(())
}

/// Writes a state together with the equilibrium it relaxes to.
pub fn write_state<W: Write>(out: &mut W, mesh: &Mesh, state: &State, eq: &EquilibriumState) -> io::Result<()> {
    let title = format!("driftfv step {} t {:.16e}", state.step, state.t);
    let fields: [(&str, &[f64]); 6] = [
        (ARRAYS[0], &state.n.cells),
        (ARRAYS[1], &state.p.cells),
        (ARRAYS[2], &state.psi.cells),
        (ARRAYS[3], &eq.n.cells),
        (ARRAYS[4], &eq.p.cells),
        (ARRAYS[5], &eq.psi.cells),
    ];
    write_grid(out, mesh, &title, &fields)
}

/// [`write_state`] to a file.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State, eq: &EquilibriumState) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_state(&mut out, mesh, state, eq)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, import_triangulation, BoundaryKind, DiscreteFunction, Rect};

    /// Minimal reader of the sections written above.
    struct Parsed {
        points: usize,
        cells: Vec<Vec<usize>>,
        types: Vec<u8>,
        arrays: Vec<(String, Vec<f64>)>,
    }

    fn parse(text: &str) -> Parsed {
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
        lines.next();
        assert_eq!(lines.next(), Some("ASCII"));
        assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
        let header = |line: Option<&str>, key: &str| -> Vec<usize> {
            let line = line.unwrap();
            let mut words = line.split_whitespace();
            assert_eq!(words.next(), Some(key), "{line}");
            words.filter_map(|w| w.parse().ok()).collect()
        };
        let points = header(lines.next(), "POINTS")[0];
        for _ in 0..points {
            assert_eq!(lines.next().unwrap().split_whitespace().count(), 3);
        }
        let counts = header(lines.next(), "CELLS");
        let cells: Vec<Vec<usize>> = (0..counts[0])
            .map(|_| lines.next().unwrap().split_whitespace().map(|w| w.parse().unwrap()).collect())
            .collect();
        assert_eq!(cells.iter().map(Vec::len).sum::<usize>(), counts[1]);
        let cells: Vec<Vec<usize>> = cells
            .into_iter()
            .map(|c| {
                assert_eq!(c[0], c.len() - 1);
                c[1..].to_vec()
            })
            .collect();
        let n_types = header(lines.next(), "CELL_TYPES")[0];
        let types = (0..n_types).map(|_| lines.next().unwrap().parse().unwrap()).collect();
        let n_data = header(lines.next(), "CELL_DATA")[0];
        let mut arrays = Vec::new();
        while let Some(line) = lines.next() {
            let name = line.split_whitespace().nth(1).unwrap().to_string();
            assert_eq!(lines.next(), Some("LOOKUP_TABLE default"));
            let values = (0..n_data).map(|_| lines.next().unwrap().parse().unwrap()).collect();
            arrays.push((name, values));
        }
        Parsed { points, cells, types, arrays }
    }

    fn state_on(mesh: &Mesh, offset: f64) -> (State, EquilibriumState) {
        let f = |s: f64| {
            DiscreteFunction::new(
                (0..mesh.num_cells()).map(|k| s + k as f64 / 3.0).collect(),
                vec![0.0; mesh.num_dirichlet()],
            )
        };
        let state = State { n: f(offset), p: f(offset + 1.0), psi: f(offset - 2.0), step: 7, t: 0.07 };
        let eq = EquilibriumState {
            psi: f(-1.0),
            n: f(0.5),
            p: f(1.5),
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
        };
        (state, eq)
    }

    fn render(mesh: &Mesh, state: &State, eq: &EquilibriumState) -> String {
        let mut buf = Vec::new();
        write_state(&mut buf, mesh, state, eq).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_cell() {
        let mesh = build_cartesian(1, 1, Rect::UNIT, |_| true).unwrap();
        let (state, eq) = state_on(&mesh, 0.25);
        let parsed = parse(&render(&mesh, &state, &eq));
        assert_eq!(parsed.points, 4);
        assert_eq!(parsed.cells.len(), 1);
        let names: Vec<&str> = parsed.arrays.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ARRAYS);
        assert_eq!(parsed.arrays[0].1, vec![0.25]);
    }

    #[test]
    fn two_quads_share_an_edge() {
        let mesh = build_cartesian(2, 1, Rect::UNIT, |p| p[0] == 0.0).unwrap();
        let (state, eq) = state_on(&mesh, 1.0);
        let parsed = parse(&render(&mesh, &state, &eq));
        assert_eq!(parsed.points, 6);
        assert_eq!(parsed.types, vec![VTK_QUAD, VTK_QUAD]);
        for (cell, nodes) in mesh.cells().iter().zip(&parsed.cells) {
            assert_eq!(&cell.nodes, nodes);
        }
        let shared: Vec<&usize> = parsed.cells[0].iter().filter(|n| parsed.cells[1].contains(n)).collect();
        assert_eq!(shared.len(), 2);
    }

    #[test]
    fn round_trip_values_and_cell_count() {
        let h = 3f64.sqrt() / 2.0;
        let vertices = [[0.0, 0.0], [1.0, 0.0], [0.5, h], [1.5, h]];
        let triangles = [[0, 1, 2], [1, 3, 2]];
        let labels: Vec<([usize; 2], BoundaryKind)> =
            [[0, 1], [1, 3], [3, 2], [2, 0]].into_iter().map(|e| (e, BoundaryKind::Dirichlet)).collect();
        let mesh = import_triangulation(&vertices, &triangles, &labels).unwrap();
        let (state, eq) = state_on(&mesh, 0.1);
        let parsed = parse(&render(&mesh, &state, &eq));
        assert_eq!(parsed.cells.len(), mesh.num_cells());
        assert_eq!(parsed.types, vec![VTK_TRIANGLE; 2]);
        // 17 significant digits read back exactly
        assert_eq!(parsed.arrays[0].1, state.n.cells);
        assert_eq!(parsed.arrays[5].1, eq.psi.cells);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let mesh = build_cartesian(2, 1, Rect::UNIT, |_| true).unwrap();
        let err = write_grid(&mut Vec::new(), &mesh, "t", &[("N", &[1.0])]).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidInput);
    }
}
