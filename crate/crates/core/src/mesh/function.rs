use super::{EdgeKind, Mesh};

/// Piecewise-constant function on a mesh: one value per cell plus one value
/// per Dirichlet edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    pub cells: Vec<f64>,
    pub dirichlet: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(cells: Vec<f64>, dirichlet: Vec<f64>) -> Self {
        DiscreteFunction { cells, dirichlet }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        DiscreteFunction { cells: vec![0.0; mesh.num_cells()], dirichlet: vec![0.0; mesh.num_dirichlet()] }
    }

    pub fn matches(&self, mesh: &Mesh) -> bool {
        self.cells.len() == mesh.num_cells() && self.dirichlet.len() == mesh.num_dirichlet()
    }

    /// `u_{K,σ}`: neighbour value, Dirichlet value or `u_K` on Neumann edges.
    #[inline]
    pub fn across(&self, mesh: &Mesh, k: usize, e: usize) -> f64 {
        match mesh.edge(e).kind {
            EdgeKind::Interior { k: a, l: b } => self.cells[if a == k { b } else { a }],
            EdgeKind::Dirichlet { index, .. } => self.dirichlet[index],
            EdgeKind::Neumann { .. } => self.cells[k],
        }
    }

    /// `Du_{K,σ} = u_{K,σ} - u_K`.
    #[inline]
    pub fn jump(&self, mesh: &Mesh, k: usize, e: usize) -> f64 {
        self.across(mesh, k, e) - self.cells[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DiscreteFunction {
            cells: self.cells.iter().map(|&v| f(v)).collect(),
            dirichlet: self.dirichlet.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        DiscreteFunction {
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| f(a, b)).collect(),
            dirichlet: self.dirichlet.iter().zip(&other.dirichlet).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `|u|²_{1,M} = Σ_σ τ_σ (D_σ u)²`.
    pub fn seminorm_sq(&self, mesh: &Mesh) -> f64 {
        mesh.edges()
            .iter()
            .map(|e| {
                let d = self.jump(mesh, e.owner(), e.id);
                e.tau * d * d
            })
            .sum()
    }

    /// `‖u‖²_{0,M} = Σ_K m(K) u_K²`.
    pub fn l2_norm_sq(&self, mesh: &Mesh) -> f64 {
        mesh.cells().iter().zip(&self.cells).map(|(c, &v)| c.measure * v * v).sum()
    }

    pub fn min_cell(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_cell(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, Rect};

    #[test]
    fn seminorm_vanishes_only_on_matching_constants() {
        let mesh = build_cartesian(3, 2, Rect::UNIT, |p| p[0] == 0.0).unwrap();
        let c = DiscreteFunction::new(vec![2.5; 6], vec![2.5; mesh.num_dirichlet()]);
        assert_eq!(c.seminorm_sq(&mesh), 0.0);
        let mut off = c.clone();
        off.dirichlet[0] = 2.0;
        assert!(off.seminorm_sq(&mesh) > 0.0);
        let mut bump = c.clone();
        bump.cells[4] = 3.0;
        assert!(bump.seminorm_sq(&mesh) > 0.0);
    }

    #[test]
    fn neumann_jump_is_zero() {
        let mesh = build_cartesian(2, 1, Rect::UNIT, |p| p[0] == 0.0).unwrap();
        let u = DiscreteFunction::new(vec![1.0, 4.0], vec![0.0]);
        for cell in mesh.cells() {
            for &e in &cell.edges {
                match mesh.edge(e).kind {
                    EdgeKind::Neumann { .. } => assert_eq!(u.jump(&mesh, cell.id, e), 0.0),
                    EdgeKind::Interior { .. } => assert_eq!(u.jump(&mesh, cell.id, e).abs(), 3.0),
                    EdgeKind::Dirichlet { .. } => assert_eq!(u.jump(&mesh, cell.id, e), -1.0),
                }
            }
        }
        // τ_int = 2, τ_D = 4: 2·9 + 4·1
        assert!((u.seminorm_sq(&mesh) - 22.0).abs() < 1e-13);
        assert!((u.l2_norm_sq(&mesh) - 0.5 * 17.0).abs() < 1e-14);
    }

    #[test]
    fn discrete_poincare_ratio_is_bounded() {
        use rand::{Rng, SeedableRng};
        // whole boundary Dirichlet with zero data: ‖u‖₀ ≤ diam(Ω)|u|₁
        let mesh = build_cartesian(12, 12, Rect::UNIT, |_| true).unwrap();
        let zero = vec![0.0; mesh.num_dirichlet()];
        let ratio = |u: &DiscreteFunction| (u.l2_norm_sq(&mesh) / u.seminorm_sq(&mesh)).sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let cells = (0..mesh.num_cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst = worst.max(ratio(&DiscreteFunction::new(cells, zero.clone())));
        }
        assert!(worst > 0.0 && worst <= 2f64.sqrt() / mesh.xi().sqrt());
        // the first Dirichlet eigenfunction attains about 1/(π√2)
        let pi = std::f64::consts::PI;
        let mode = mesh.cells().iter().map(|c| (pi * c.center[0]).sin() * (pi * c.center[1]).sin()).collect();
        let r = ratio(&DiscreteFunction::new(mode, zero));
        assert!((r * pi * 2f64.sqrt() - 1.0).abs() < 0.02, "{r}");
        assert!(worst <= r);
    }
}
