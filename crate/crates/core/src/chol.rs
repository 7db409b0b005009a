//! Packed Cholesky factorization with incremental row extension.

/// Lower-triangular Cholesky factor stored row-major in packed form: row `i`
/// occupies `i + 1` entries starting at `i * (i + 1) / 2`.
///
/// The packed layout makes appending a row an O(n) copy, which is what the
/// fantasy-conditioning path in the rollout leans on.
#[derive(Debug, Clone, Default)]
pub(crate) struct Chol {
    n: usize,
    l: Vec<f64>,
}

#[inline]
fn idx(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl Chol {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Factor a symmetric positive definite matrix given as its packed lower
    /// triangle (diagonal included). Returns `None` if a pivot is not
    /// strictly positive, i.e. the matrix is not numerically PD.
    pub fn factor(packed: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(packed.len(), n * (n + 1) / 2);
        let mut l = vec![0.0; packed.len()];
        for i in 0..n {
            for j in 0..=i {
                let mut s = packed[idx(i, j)];
                for k in 0..j {
                    s -= l[idx(i, k)] * l[idx(j, k)];
                }
                if i == j {
                    if !(s.is_finite() && s > 0.0) {
                        return None;
                    }
                    l[idx(i, i)] = s.sqrt();
                } else {
                    l[idx(i, j)] = s / l[idx(j, j)];
                }
            }
        }
        Some(Self { n, l })
    }

    /// Extend the factor by one row, where `row` holds the new off-diagonal
    /// entries of the underlying matrix and `diag` its new diagonal entry.
    /// Returns `false` (leaving the factor untouched) if the Schur complement
    /// is not strictly positive.
    pub fn extend(&mut self, row: &[f64], diag: f64) -> bool {
        debug_assert_eq!(row.len(), self.n);
        let mut v = row.to_vec();
        self.solve_lower(&mut v);
        let d2 = diag - v.iter().map(|x| x * x).sum::<f64>();
        if !(d2.is_finite() && d2 > 0.0) {
            return false;
        }
        self.l.extend_from_slice(&v);
        self.l.push(d2.sqrt());
        self.n += 1;
        true
    }

    /// Solve `L y = b` in place. `b` may cover a leading block only.
    pub fn solve_lower(&self, b: &mut [f64]) {
        debug_assert!(b.len() <= self.n);
        for i in 0..b.len() {
            let base = idx(i, 0);
            let mut s = b[i];
            for (k, bk) in b[..i].iter().enumerate() {
                s -= self.l[base + k] * bk;
            }
            b[i] = s / self.l[base + i];
        }
    }

    /// Solve `L^T x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        debug_assert!(b.len() <= self.n);
        let n = b.len();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[idx(k, i)] * b[k];
            }
            b[i] = s / self.l[idx(i, i)];
        }
    }

    /// Solve `L L^T x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }

    /// `sum_i ln L_ii`, which is half the log-determinant of the matrix.
    pub fn log_diag_sum(&self) -> f64 {
        (0..self.n).map(|i| self.l[idx(i, i)].ln()).sum()
    }
}
