use nalgebra::{DMatrix, DVector};

/// Householder QR with column pivoting, `X P = Q R`.
///
/// Reflectors are kept separately from `R`; only what least squares and the
/// covariance computations need is exposed.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Upper triangle holds R (in pivoted column order).
    r: DMatrix<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factors `x`; rank is the number of leading diagonal entries of R above
    /// `rel_tol * |R[0,0]|`.
    pub fn new(x: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (n, p) = x.shape();
        let mut a = x.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut reflectors = Vec::with_capacity(p.min(n));
        let steps = p.min(n);
        for k in 0..steps {
            // Exact remaining norms; p is small enough that downdating is not worth it.
            let (best, _) = (k..p)
                .map(|j| {
                    let col = &a.as_slice()[j * n + k..(j + 1) * n];
                    (j, col.iter().map(|v| v * v).sum::<f64>())
                })
                .fold((k, -1.0), |acc, (j, s)| if s > acc.1 { (j, s) } else { acc });
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }
            let data = a.as_mut_slice();
            let col = &data[k * n + k..(k + 1) * n];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut v = col.to_vec();
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            if beta > 0.0 {
                data[k * n + k] = alpha;
                for e in &mut data[k * n + k + 1..(k + 1) * n] {
                    *e = 0.0;
                }
                for j in k + 1..p {
                    let colj = &mut data[j * n + k..(j + 1) * n];
                    let s: f64 = v.iter().zip(colj.iter()).map(|(a, b)| a * b).sum();
                    let f = beta * s;
                    for (c, vi) in colj.iter_mut().zip(&v) {
                        *c -= f * vi;
                    }
                }
            }
            reflectors.push((v, beta));
        }
        let r00 = if steps > 0 { a[(0, 0)].abs() } else { 0.0 };
        let rank = (0..steps)
            .take_while(|&k| r00 > 0.0 && a[(k, k)].abs() > rel_tol * r00)
            .count();
        PivotedQr {
            rows: n,
            cols: p,
            r: a,
            reflectors,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.cols
    }

    /// Original column index at each pivoted position.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Original indices of the columns beyond the numerical rank.
    pub fn dependent_columns(&self) -> Vec<usize> {
        let mut cols = self.perm[self.rank..].to_vec();
        cols.sort_unstable();
        cols
    }

    /// `Q^T y`.
    pub fn qt_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        let data = out.as_mut_slice();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let seg = &mut data[k..self.rows];
            let s: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
            let f = beta * s;
            for (c, vi) in seg.iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
        out
    }

    /// Square upper-triangular R in pivoted order.
    pub fn r(&self) -> DMatrix<f64> {
        let p = self.cols;
        DMatrix::from_fn(p, p, |i, j| if i <= j { self.r[(i, j)] } else { 0.0 })
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.cols;
        let mut z = vec![0.0; p];
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for (j, zj) in z.iter().enumerate().skip(i + 1) {
                acc -= self.r[(i, j)] * zj;
            }
            z[i] = acc / self.r[(i, i)];
        }
        z
    }

    /// Least-squares solution in original column order. Requires full rank.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert!(self.is_full_rank());
        let c = self.qt_mul(y);
        let z = self.back_substitute(&c.as_slice()[..self.cols]);
        let mut beta = DVector::zeros(self.cols);
        for (k, &orig) in self.perm.iter().enumerate() {
            beta[orig] = z[k];
        }
        beta
    }

    /// Inverse of R (pivoted order).
    pub fn r_inverse(&self) -> DMatrix<f64> {
        let p = self.cols;
        let mut inv = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.back_substitute(&e);
            inv.set_column(j, &DVector::from_vec(col));
        }
        inv
    }

    /// `(X^T X)^{-1}` in original column order. Requires full rank.
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let rinv = self.r_inverse();
        let m = &rinv * rinv.transpose();
        let p = self.cols;
        let mut out = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                out[(self.perm[a], self.perm[b])] = m[(a, b)];
            }
        }
        out
    }
}
