//! Compressed-row matrices, linear solvers and the M-matrix check used on
//! every assembled system.
//!
//! The scheme's matrices keep a fixed sparsity pattern for a whole run, so
//! [`CsrMatrix`] is built once from its pattern and refilled in place.

mod band;
mod krylov;

use std::fmt;

use thiserror::Error;

pub use band::{reverse_cuthill_mckee, BandLu};
pub use krylov::bicgstab;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix with the given nonzero pattern and all values zero.
    /// Duplicate positions are merged.
    pub fn from_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside a {n}x{n} matrix");
            rows[i].push(j);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut a = Self::from_pattern(n, triplets.iter().map(|&(i, j, _)| (i, j)));
        for &(i, j, v) in triplets {
            a.add(i, j, v);
        }
        a
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::from_pattern(n, (0..n).map(|i| (i, i)));
        a.values.fill(1.0);
        a
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "dense input must be square");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear_values(&mut self) {
        self.values.fill(0.0);
    }

    /// Index into [`values`](Self::values) of entry `(i, j)`, if present in
    /// the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry is not in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.values[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Relative margin required for strict column dominance.
pub const DOMINANCE_MARGIN: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum MMatrixViolation {
    NonPositiveDiagonal {
        row: usize,
        value: f64,
    },
    PositiveOffDiagonal {
        row: usize,
        col: usize,
        value: f64,
    },
    /// `diagonal - Σ|off-diagonal|` in the column is below the margin.
    WeakColumn {
        col: usize,
        diagonal: f64,
        off_sum: f64,
    },
}

impl fmt::Display for MMatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MMatrixViolation::NonPositiveDiagonal { row, value } => write!(f, "diagonal ({row},{row}) = {value:e}"),
            MMatrixViolation::PositiveOffDiagonal { row, col, value } => {
                write!(f, "off-diagonal ({row},{col}) = {value:e} > 0")
            }
            MMatrixViolation::WeakColumn { col, diagonal, off_sum } => {
                write!(f, "column {col} not strictly dominant: diagonal {diagonal:e}, off-diagonal sum {off_sum:e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixReport {
    pub is_m_matrix: bool,
    pub violations: Vec<MMatrixViolation>,
}

/// Sufficient M-matrix test: positive diagonal, nonpositive off-diagonal
/// entries and strict diagonal dominance of every column.
pub fn check_m_matrix(a: &CsrMatrix) -> MMatrixReport {
    let n = a.dim();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut violations = Vec::new();
    for i in 0..n {
        for (j, v) in a.row(i) {
            if i == j {
                diag[j] = v;
            } else {
                off[j] += v.abs();
                if v > 0.0 {
                    violations.push(MMatrixViolation::PositiveOffDiagonal { row: i, col: j, value: v });
                }
            }
        }
    }
    for j in 0..n {
        if !(diag[j] > 0.0) {
            violations.push(MMatrixViolation::NonPositiveDiagonal { row: j, value: diag[j] });
        } else if !(diag[j] - off[j] >= DOMINANCE_MARGIN * diag[j]) {
            violations.push(MMatrixViolation::WeakColumn { col: j, diagonal: diag[j], off_sum: off[j] });
        }
    }
    MMatrixReport { is_m_matrix: violations.is_empty(), violations }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular at pivot {row}")]
    Singular { row: usize },
    #[error("linear solve did not reach the tolerance: residual {residual:e} > {tolerance:e}")]
    NotConverged { residual: f64, tolerance: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    Dimension { matrix: usize, vector: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Banded LU with partial pivoting after reverse Cuthill–McKee ordering.
    #[default]
    Direct,
    /// Jacobi-preconditioned BiCGStab.
    BiCgStab,
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" | "lu" => Ok(SolverKind::Direct),
            "bicgstab" | "iterative" => Ok(SolverKind::BiCgStab),
            other => Err(format!("unknown linear solver `{other}` (expected direct or bicgstab)")),
        }
    }
}

pub fn residual_tolerance(b: &[f64]) -> f64 {
    1e-12f64.max(1e-12 * inf_norm(b))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    inf_norm(r)
}

const REFINEMENT_STEPS: usize = 2;

/// Reusable solver for a sequence of systems sharing one sparsity pattern.
/// Every returned solution satisfies `‖Ax − b‖∞ ≤ max(1e-12, 1e-12‖b‖∞)`.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    kind: SolverKind,
    lu: Option<BandLu>,
}

impl LinearSolver {
    pub fn new(kind: SolverKind) -> Self {
        LinearSolver { kind, lu: None }
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// Factorizes `a` (direct solver only). Must be called whenever the
    /// values of `a` change before [`solve_prepared`](Self::solve_prepared).
    pub fn prepare(&mut self, a: &CsrMatrix) -> Result<(), SolveError> {
        if self.kind == SolverKind::Direct {
            match &mut self.lu {
                Some(lu) if lu.dim() == a.dim() => lu.refactor(a)?,
                _ => self.lu = Some(BandLu::new(a)?),
            }
        }
        Ok(())
    }

    /// Solves with the factorization from the last [`prepare`](Self::prepare).
    pub fn solve_prepared(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        if b.len() != a.dim() {
            return Err(SolveError::Dimension { matrix: a.dim(), vector: b.len() });
        }
        let tol = residual_tolerance(b);
        match self.kind {
            SolverKind::Direct => {
                let lu = self.lu.as_ref().expect("prepare() before solve_prepared()");
                let mut x = lu.solve(b);
                let mut r = vec![0.0; b.len()];
                let mut res = residual(a, &x, b, &mut r);
                for _ in 0..REFINEMENT_STEPS {
                    if res <= tol {
                        break;
                    }
                    let dx = lu.solve(&r);
                    for (xi, d) in x.iter_mut().zip(&dx) {
                        *xi += d;
                    }
                    res = residual(a, &x, b, &mut r);
                }
                if res <= tol && res.is_finite() {
                    Ok(x)
                } else {
                    Err(SolveError::NotConverged { residual: res, tolerance: tol })
                }
            }
            SolverKind::BiCgStab => bicgstab(a, b, tol, 20 * a.dim() + 100),
        }
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.prepare(a)?;
        self.solve_prepared(a, b)
    }
}

/// One-shot direct solve.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
    LinearSolver::new(SolverKind::Direct).solve(a, b)
}
