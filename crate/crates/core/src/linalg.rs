//! Solvers for `(I - Q) x = b` where `Q` is a substochastic restriction.
//!
//! The matrix is never formed with an explicit diagonal. Each row carries its
//! nonnegative off-diagonal weights plus a `slack`, the mass that leaves the
//! restricted set. The diagonal `1 - Q_ii` is rebuilt as `slack + sum(off)`,
//! and elimination updates the slack instead of subtracting, in the manner of
//! Grassmann-Taksar-Heyman. Nothing cancels, so hitting times of order `1e12`
//! keep full relative precision.

use crate::error::{Error, Result};

/// Dense M-matrix in slack form.
#[derive(Debug, Clone)]
pub struct DenseMMatrix {
    n: usize,
    off: Vec<f64>,
    slack: Vec<f64>,
}

impl DenseMMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            off: vec![0.0; n * n],
            slack: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds weight `q` to the off-diagonal entry `(i, j)`; `i == j` is ignored.
    pub fn add_off(&mut self, i: usize, j: usize, q: f64) {
        if i != j {
            self.off[i * self.n + j] += q;
        }
    }

    pub fn add_slack(&mut self, i: usize, q: f64) {
        self.slack[i] += q;
    }

    pub fn factor(mut self) -> Result<DenseFactor> {
        let n = self.n;
        let mut pivot = vec![0.0; n];
        let mut mult = vec![0.0; n * n];
        for k in 0..n {
            let row_k = k * n;
            let d: f64 = self.slack[k] + self.off[row_k + k + 1..row_k + n].iter().sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "zero pivot at row {k}: restricted set has a closed class"
                )));
            }
            pivot[k] = d;
            for i in k + 1..n {
                let a_ik = self.off[i * n + k];
                if a_ik == 0.0 {
                    continue;
                }
                let f = a_ik / d;
                mult[i * n + k] = f;
                self.slack[i] += f * self.slack[k];
                for j in k + 1..n {
                    if j != i {
                        let a_kj = self.off[row_k + j];
                        if a_kj != 0.0 {
                            self.off[i * n + j] += f * a_kj;
                        }
                    }
                }
                // the part of a_ik routed back to row i is already in the slack
                // and in the updated off-diagonals, so the entry is retired
                self.off[i * n + k] = 0.0;
            }
        }
        Ok(DenseFactor {
            n,
            upper: self.off,
            pivot,
            mult,
        })
    }
}

/// Factored form of a [`DenseMMatrix`].
#[derive(Debug, Clone)]
pub struct DenseFactor {
    n: usize,
    upper: Vec<f64>,
    pivot: Vec<f64>,
    mult: Vec<f64>,
}

impl DenseFactor {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Overwrites `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = self.mult[i * n + k];
                if f != 0.0 {
                    b[i] += f * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * n..(k + 1) * n];
            let mut acc = b[k];
            for j in k + 1..n {
                acc += row[j] * b[j];
            }
            b[k] = acc / self.pivot[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Full inverse, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Tridiagonal M-matrix in slack form.
///
/// Row `i` reads `-lo[i] x[i-1] + (lo[i] + hi[i] + slack[i]) x[i] - hi[i] x[i+1]`.
/// `lo[0]` and `hi[n-1]` must be zero; a zero link anywhere splits the system
/// into independent blocks.
#[derive(Debug, Clone)]
pub struct TriMMatrix {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub slack: Vec<f64>,
}

impl TriMMatrix {
    pub fn len(&self) -> usize {
        self.slack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slack.is_empty()
    }

    pub fn factor(self) -> Result<TriFactor> {
        let n = self.len();
        let mut fwd_slack = vec![0.0; n];
        let mut fwd_pivot = vec![0.0; n];
        for i in 0..n {
            let mut s = self.slack[i];
            if i > 0 && self.lo[i] != 0.0 {
                s += self.lo[i] * fwd_slack[i - 1] / fwd_pivot[i - 1];
            }
            fwd_slack[i] = s;
            fwd_pivot[i] = self.hi[i] + s;
        }
        let mut bwd_slack = vec![0.0; n];
        let mut bwd_pivot = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = self.slack[i];
            if i + 1 < n && self.hi[i] != 0.0 {
                s += self.hi[i] * bwd_slack[i + 1] / bwd_pivot[i + 1];
            }
            bwd_slack[i] = s;
            bwd_pivot[i] = self.lo[i] + s;
        }
        for i in 0..n {
            if !(fwd_pivot[i] > 0.0) || !(bwd_pivot[i] > 0.0) {
                return Err(Error::SolverFailure(format!(
                    "zero pivot at row {i}: restricted set has a closed class"
                )));
            }
        }
        Ok(TriFactor {
            m: self,
            fwd_slack,
            fwd_pivot,
            bwd_slack,
            bwd_pivot,
        })
    }
}

/// Factored form of a [`TriMMatrix`], with both sweep directions kept so
/// that the diagonal of the inverse comes out in linear time.
#[derive(Debug, Clone)]
pub struct TriFactor {
    m: TriMMatrix,
    fwd_slack: Vec<f64>,
    fwd_pivot: Vec<f64>,
    bwd_slack: Vec<f64>,
    bwd_pivot: Vec<f64>,
}

impl TriFactor {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.len();
        assert_eq!(b.len(), n);
        for i in 1..n {
            if self.m.lo[i] != 0.0 {
                b[i] += self.m.lo[i] / self.fwd_pivot[i - 1] * b[i - 1];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            if i + 1 < n {
                acc += self.m.hi[i] * b[i + 1];
            }
            b[i] = acc / self.fwd_pivot[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Schur complement of each diagonal entry, `1 / (M^{-1})_ii`.
    ///
    /// For a Green function this is the probability of escaping before
    /// the first return.
    pub fn escape_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut d = self.m.slack[i];
                if i > 0 && self.m.lo[i] != 0.0 {
                    d += self.m.lo[i] * self.fwd_slack[i - 1] / self.fwd_pivot[i - 1];
                }
                if i + 1 < n && self.m.hi[i] != 0.0 {
                    d += self.m.hi[i] * self.bwd_slack[i + 1] / self.bwd_pivot[i + 1];
                }
                d
            })
            .collect()
    }

    pub fn inverse_diagonal(&self) -> Vec<f64> {
        self.escape_diagonal().into_iter().map(|d| 1.0 / d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense_from(q: &[&[f64]]) -> (DenseMMatrix, Vec<Vec<f64>>) {
        let n = q.len();
        let mut m = DenseMMatrix::new(n);
        let mut full = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                row_sum += q[i][j];
                m.add_off(i, j, q[i][j]);
                full[i][j] = if i == j { 1.0 - q[i][j] } else { -q[i][j] };
            }
            m.add_slack(i, 1.0 - row_sum);
        }
        (m, full)
    }

    #[test]
    fn dense_solve_matches_residual() {
        let q: [&[f64]; 3] = [&[0.2, 0.3, 0.1], &[0.0, 0.5, 0.4], &[0.3, 0.3, 0.3]];
        let (m, full) = dense_from(&q);
        let f = m.factor().unwrap();
        let b = [1.0, 2.0, 0.5];
        let x = f.solve(&b);
        for i in 0..3 {
            let lhs: f64 = (0..3).map(|j| full[i][j] * x[j]).sum();
            assert_relative_eq!(lhs, b[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn dense_inverse_is_inverse() {
        let q: [&[f64]; 3] = [&[0.0, 0.5, 0.25], &[0.5, 0.0, 0.5], &[0.1, 0.8, 0.0]];
        let (m, full) = dense_from(&q);
        let inv = m.factor().unwrap().inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| full[i][k] * inv[k * 3 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(v, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dense_closed_class_fails() {
        let q: [&[f64]; 2] = [&[0.5, 0.5], &[0.5, 0.5]];
        let (m, _) = dense_from(&q);
        assert!(matches!(m.factor(), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn dense_tiny_leak_keeps_precision() {
        // two states swapping, leaking 1e-14 from the second one
        let leak = 1e-14;
        let mut m = DenseMMatrix::new(2);
        m.add_off(0, 1, 1.0);
        m.add_off(1, 0, 1.0 - leak);
        m.add_slack(1, leak);
        let x = m.factor().unwrap().solve(&[1.0, 1.0]);
        // exact mean exit time from state 0 is (2 - leak) / leak
        assert_relative_eq!(x[0], (2.0 - leak) / leak, max_relative = 1e-14);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lo = vec![0.0, 0.3, 0.2, 0.4, 0.0, 0.5];
        let hi = vec![0.4, 0.1, 0.5, 0.0, 0.3, 0.0];
        let slack = vec![0.1, 0.0, 0.0, 0.05, 0.2, 0.1];
        let n = lo.len();
        let mut d = DenseMMatrix::new(n);
        for i in 0..n {
            if i > 0 {
                d.add_off(i, i - 1, lo[i]);
            }
            if i + 1 < n {
                d.add_off(i, i + 1, hi[i]);
            }
            d.add_slack(i, slack[i]);
        }
        let dense = d.factor().unwrap();
        let tri = TriMMatrix { lo, hi, slack }.factor().unwrap();
        let b = [1.0, 0.0, 2.0, 1.0, 0.5, 3.0];
        let xd = dense.solve(&b);
        let xt = tri.solve(&b);
        for i in 0..n {
            assert_relative_eq!(xd[i], xt[i], max_relative = 1e-13);
        }
        let inv = dense.inverse();
        let diag = tri.inverse_diagonal();
        for i in 0..n {
            assert_relative_eq!(inv[i * n + i], diag[i], max_relative = 1e-13);
        }
    }
}
