//! Small dense linear algebra for dimensions n <= 3: symmetric matrices,
//! their eigenvalues, and a partial-pivot LU solver used by the
//! enumeration oracle and least-squares fits.

use alloc::vec;
use alloc::vec::Vec;
// Inherent f64 methods shadow the trait when std is linked (tests).
#[allow(unused_imports)]
use num_traits::Float;

/// Symmetric n x n matrix, n <= 3, stored padded to 3 x 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    pub n: usize,
    pub a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zero(n: usize) -> Self {
        assert!(n == 2 || n == 3, "dimension must be 2 or 3");
        SymMat {
            n,
            a: [[0.0; 3]; 3],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    /// Builds from a row-major slice of length n*n, symmetrizing entries.
    /// Returns the largest asymmetry |a_ij - a_ji| alongside.
    pub fn from_row_major(n: usize, vals: &[f64]) -> (Self, f64) {
        assert_eq!(vals.len(), n * n);
        let mut m = Self::zero(n);
        let mut skew: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = vals[i * n + j];
                let w = vals[j * n + i];
                skew = skew.max((v - w).abs());
                m.a[i][j] = 0.5 * (v + w);
            }
        }
        (m, skew)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.a[i][j]);
            }
        }
        out
    }

    pub fn trace_product(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * other.a[j][i];
            }
        }
        s
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += xi[i] * self.a[i][j] * xi[j];
            }
        }
        s
    }

    /// Row diagonal dominance margin: min_i (a_ii - sum_{j!=i} |a_ij|).
    pub fn diagonal_dominance_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for i in 0..self.n {
            let mut off = 0.0;
            for j in 0..self.n {
                if j != i {
                    off += self.a[i][j].abs();
                }
            }
            margin = margin.min(self.a[i][i] - off);
        }
        margin
    }

    /// Eigenvalues in ascending order (cyclic Jacobi; exact to machine
    /// precision for these tiny matrices). Unused slots hold NaN.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut a = self.a;
        let n = self.n;
        for _ in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off <= 1e-300 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() <= 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = [f64::NAN; 3];
        for i in 0..n {
            ev[i] = a[i][i];
        }
        ev[..n].sort_unstable_by(|x, y| x.partial_cmp(y).expect("eigenvalue NaN"));
        ev
    }

    /// Eigenvalues (ascending) with matching eigenvector columns.
    pub fn eigen_decomposition(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut a = self.a;
        let n = self.n;
        let mut v = [[0.0; 3]; 3];
        for i in 0..3 {
            v[i][i] = 1.0;
        }
        for _ in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off <= 1e-300 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() <= 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k][p];
                        let vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: [usize; 3] = [0, 1, 2];
        order[..n].sort_unstable_by(|&x, &y| a[x][x].partial_cmp(&a[y][y]).expect("NaN eig"));
        let mut ev = [f64::NAN; 3];
        let mut vec_out = [[0.0; 3]; 3];
        for (slot, &col) in order[..n].iter().enumerate() {
            ev[slot] = a[col][col];
            for k in 0..n {
                vec_out[k][slot] = v[k][col];
            }
        }
        (ev, vec_out)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[self.n - 1]
    }
}

/// Product of padded 3x3 matrices restricted to the leading n x n block.
pub fn mat_mul(n: usize, a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn mat_transpose(n: usize, a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Gram matrix A^T A of a padded n x n matrix.
pub fn gram(n: usize, a: &[[f64; 3]; 3]) -> SymMat {
    let at = mat_transpose(n, a);
    let g = mat_mul(n, &at, a);
    SymMat { n, a: g }
}

/// Dense square matrix in row-major order with a partial-pivot LU solve.
/// Used for the oracle's direct solves and for normal-equation fits;
/// sizes stay small (tens of unknowns).
pub struct DenseMatrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            a: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    /// Solves `A x = b` in place via LU with partial pivoting.
    /// Returns None when a pivot collapses (singular system).
    pub fn solve(mut self, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = self.at(perm[col], col).abs();
            for r in (col + 1)..n {
                let v = self.at(perm[r], col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            perm.swap(col, piv);
            let prow = perm[col];
            let pval = self.at(prow, col);
            for r in (col + 1)..n {
                let row = perm[r];
                let f = self.at(row, col) / pval;
                if f == 0.0 {
                    continue;
                }
                for c in col..n {
                    let v = self.at(prow, c);
                    self.a[row * n + c] -= f * v;
                }
                b[row] -= f * b[prow];
            }
        }
        let mut x = vec![0.0; n];
        for col in (0..n).rev() {
            let row = perm[col];
            let mut s = b[row];
            for c in (col + 1)..n {
                s -= self.at(row, c) * x[c];
            }
            x[col] = s / self.at(row, col);
        }
        Some(x)
    }
}

/// Least-squares slope and intercept of y against x.
/// Returns (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let m = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = m * sxx - sx * sx;
    let slope = (m * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / m;
    let mut ss = 0.0;
    for (a, b) in x.iter().zip(y) {
        let r = b - (slope * a + intercept);
        ss += r * r;
    }
    (slope, intercept, (ss / m).sqrt())
}
