//! Dense row-major matrices and LU factorization with partial pivoting.
//!
//! State spaces here are small (tens to a few hundred states), so every
//! linear system goes through a dense LU factorization; no explicit
//! inverses are formed on solve paths. One factorization of `I - g*P`
//! serves both the primal systems (`A x = b`) and the dual/transposed
//! systems (`A^T x = b`).

use crate::error::{Error, Result};

/// Condition-number threshold above which solves are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Parameter("ragged matrix rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^T x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (c, a) in self.row(r).iter().enumerate() {
                out[c] += a * xr;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// `I - scale * A` for square `A`.
    pub fn resolvent_operand(&self, scale: f64) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= -scale;
        }
        for i in 0..m.rows {
            let v = m.get(i, i) + 1.0;
            m.set(i, i, v);
        }
        m
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    // swaps[k] is the row exchanged with k at elimination step k
    swaps: Vec<usize>,
}

impl LuFactor {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Parameter("LU requires a square matrix".into()));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut swaps = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Numeric("singular matrix in LU factorization".into()));
            }
            swaps[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= m * lu[k * n + j];
                    }
                }
            }
        }
        Ok(LuFactor { n, lu, swaps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.swaps[k]);
        }
        // forward: L y = P b (unit diagonal)
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        // A = P^{-1} L U, so A^T = U^T L^T P; solve U^T y = b then L^T z = y,
        // then undo the row swaps in reverse order.
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s;
        }
        for k in (0..n).rev() {
            x.swap(k, self.swaps[k]);
        }
        x
    }

    /// Hager-style estimate of `||A^{-1}||_1`.
    fn inverse_norm_one_estimate(&self, transposed: bool) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let apply = |factor: &Self, v: &[f64], trans: bool| {
            if trans {
                factor.solve_transpose(v)
            } else {
                factor.solve(v)
            }
        };
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = apply(self, &x, transposed);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = apply(self, &xi, !transposed);
            let z_inf = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if z_inf <= zx {
                break;
            }
            let j = z
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap();
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        est
    }

    /// Estimate of the infinity-norm condition number of the factored matrix.
    pub fn condition_inf(&self, a: &Matrix) -> f64 {
        // ||A^{-1}||_inf = ||A^{-T}||_1, estimated through transposed solves.
        a.norm_inf() * self.inverse_norm_one_estimate(true)
    }
}

/// Factor a matrix and refuse it if singular or past [`CONDITION_LIMIT`].
pub fn factor_guarded(a: &Matrix, what: &str) -> Result<LuFactor> {
    let lu = LuFactor::factor(a).map_err(|_| Error::Numeric(format!("{what} is singular")))?;
    let cond = lu.condition_inf(a);
    if !cond.is_finite() || cond >= CONDITION_LIMIT {
        return Err(Error::Numeric(format!(
            "{what} is ill-conditioned (estimated condition {cond:.3e})"
        )));
    }
    Ok(lu)
}

/// Maximum absolute difference between two equally long slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Infinity norm of a slice.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
