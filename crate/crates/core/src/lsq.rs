//! Householder QR for small, tall least-squares problems.

use nalgebra::DMatrix;

/// Compact Householder factorization `A = QR` of an `n x p` matrix, `n >= p`.
///
/// Column-major storage; reflector `k` lives below the diagonal of column `k`
/// (with an implicit unit leading entry) and `R` on and above the diagonal.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    a: Vec<f64>,
    n: usize,
    p: usize,
    betas: Vec<f64>,
    /// Column norms of the input, used for the rank test.
    col_scale: Vec<f64>,
}

impl HouseholderQr {
    /// `a` holds the `p` columns of length `n` back to back.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize, p: usize) -> Self {
        assert_eq!(a.len(), n * p);
        assert!(n >= p, "need at least as many rows as columns");
        let col_scale = (0..p).map(|k| a[k * n..(k + 1) * n].iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let mut betas = vec![0.0; p];
        for k in 0..p {
            let col = &mut a[k * n..(k + 1) * n];
            let norm = col[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if col[k] > 0.0 { -norm } else { norm };
            let v0 = col[k] - alpha;
            // Normalize so the reflector's leading entry is 1.
            for x in col[k + 1..].iter_mut() {
                *x /= v0;
            }
            let beta = -v0 / alpha;
            col[k] = alpha;
            betas[k] = beta;
            // Apply to the remaining columns.
            for j in k + 1..p {
                let (left, right) = a.split_at_mut(j * n);
                let vk = &left[k * n..(k + 1) * n];
                let cj = &mut right[..n];
                let mut dot = cj[k];
                for i in k + 1..n {
                    dot += vk[i] * cj[i];
                }
                let s = beta * dot;
                cj[k] -= s;
                for i in k + 1..n {
                    cj[i] -= s * vk[i];
                }
            }
        }
        HouseholderQr { a, n, p, betas, col_scale }
    }

    fn reflect(&self, k: usize, b: &mut [f64]) {
        let beta = self.betas[k];
        if beta == 0.0 {
            return;
        }
        let v = &self.a[k * self.n..(k + 1) * self.n];
        let mut dot = b[k];
        for i in k + 1..self.n {
            dot += v[i] * b[i];
        }
        let s = beta * dot;
        b[k] -= s;
        for i in k + 1..self.n {
            b[i] -= s * v[i];
        }
    }

    pub(crate) fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.p {
            self.reflect(k, b);
        }
    }

    pub(crate) fn apply_q(&self, b: &mut [f64]) {
        for k in (0..self.p).rev() {
            self.reflect(k, b);
        }
    }

    #[inline]
    pub(crate) fn r(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.n + i]
    }

    /// Numerical full column rank relative to the input column norms.
    pub(crate) fn full_rank(&self) -> bool {
        (0..self.p).all(|k| self.r(k, k).abs() > 1e-13 * self.col_scale[k].max(f64::MIN_POSITIVE))
    }

    /// Solves `R x = b[..p]` in place.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve_r(&self, b: &mut [f64]) {
        for i in (0..self.p).rev() {
            let mut s = b[i];
            for j in i + 1..self.p {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// Solves `R^T y = b[..p]` in place.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve_rt(&self, b: &mut [f64]) {
        for i in 0..self.p {
            let mut s = b[i];
            for j in 0..i {
                s -= self.r(j, i) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// 2-norm condition number of `R` (equivalently of `A`).
    pub(crate) fn condition(&self) -> f64 {
        let r = DMatrix::from_fn(self.p, self.p, |i, j| if j >= i { self.r(i, j) } else { 0.0 });
        let sv = r.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Least-squares solution for right-hand side `rhs` (length `n`).
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        self.apply_qt(&mut b);
        self.solve_r(&mut b);
        b.truncate(self.p);
        b
    }
}
