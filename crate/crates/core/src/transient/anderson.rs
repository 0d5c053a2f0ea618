/// Anderson mixing for a fixed-point map `x ↦ g(x)`: the next iterate is
/// `g(x_k) − ΔG γ` with `γ` minimizing `‖f_k − ΔF γ‖₂`, where `f = g(x) − x`
/// and `ΔF`, `ΔG` hold the differences of the last `depth` steps.
#[derive(Debug, Clone)]
pub(crate) struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    df: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
}

/// Relative Tikhonov shift of the normal equations.
const REGULARIZATION: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the small dense SPD system `a x = b` by Gaussian elimination with
/// partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if !(a[p][k].abs() > 0.0) {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Anderson { depth, last: None, df: Vec::new(), dg: Vec::new() }
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.df.clear();
        self.dg.clear();
    }

    /// Next iterate from `x` and `g = g(x)`.
    pub fn next(&mut self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
        if let Some((f_prev, g_prev)) = &self.last {
            self.df.push(f.iter().zip(f_prev).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(g_prev).map(|(a, b)| a - b).collect());
            if self.df.len() > self.depth {
                self.df.remove(0);
                self.dg.remove(0);
            }
        }
        self.last = Some((f.clone(), g.to_vec()));
        let m = self.df.len();
        if m == 0 {
            return g.to_vec();
        }
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                a[i][j] = dot(&self.df[i], &self.df[j]);
                a[j][i] = a[i][j];
            }
        }
        let scale = (0..m).map(|i| a[i][i]).fold(0.0, f64::max);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += REGULARIZATION * scale;
        }
        let b: Vec<f64> = self.df.iter().map(|col| dot(col, &f)).collect();
        match solve_dense(a, b) {
            Some(gamma) => {
                let mut out = g.to_vec();
                for (col, &c) in self.dg.iter().zip(&gamma) {
                    for (o, d) in out.iter_mut().zip(col) {
                        *o -= c * d;
                    }
                }
                out
            }
            None => {
                self.reset();
                g.to_vec()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accelerates_a_linear_contraction() {
        // g(x) = A x + b with spectral radius 0.95: Picard needs hundreds of
        // iterations, Anderson with depth 3 on a 3-dimensional problem is
        // exact after a few
        let g = |x: &[f64]| vec![0.95 * x[0] + 1.0, 0.5 * x[1] + 0.3 * x[2], 0.2 * x[1] + 0.9 * x[2] - 1.0];
        let mut aa = Anderson::new(3);
        let mut x = vec![0.0; 3];
        for _ in 0..8 {
            let gx = g(&x);
            x = aa.next(&x, &gx);
        }
        let fixed = g(&x);
        let res = fixed.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-9, "{res}");
    }

    #[test]
    fn first_step_is_plain_picard() {
        let mut aa = Anderson::new(2);
        assert_eq!(aa.next(&[1.0, 2.0], &[3.0, 4.0]), vec![3.0, 4.0]);
    }
}
