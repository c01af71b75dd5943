//! Small dense matrices: storage for normalizers and the SPD solve behind
//! every quadratic-form pivot.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative pivot tolerance for Cholesky: a pivot at or below
/// `PIVOT_TOL * max_diag` means the matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Row-major `q x q` matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Adds `w * v v'`.
    pub fn add_outer(&mut self, v: &[T], w: T) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let wi = w * v[i];
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += wi * vj;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `A M A'` for a `k x q` matrix `A` given by rows.
    pub fn congruence(&self, a: &[Vec<T>]) -> Self {
        let k = a.len();
        let mut out = Self::zeros(k);
        let am: Vec<Vec<T>> = a
            .iter()
            .map(|row| {
                (0..self.dim)
                    .map(|j| (0..self.dim).map(|l| row[l] * self[(l, j)]).sum())
                    .collect()
            })
            .collect();
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = (0..self.dim).map(|l| am[i][l] * a[j][l]).sum();
            }
        }
        out
    }

    /// Lower Cholesky factor `L` with `A = L L'`.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        let q = self.dim;
        let max_diag = (0..q)
            .map(|i| self[(i, i)])
            .fold(T::zero(), |a, b| a.max(b));
        let tol = T::lit(PIVOT_TOL) * max_diag;
        let mut l = vec![T::zero(); q * q];
        for j in 0..q {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[j * q + k] * l[j * q + k];
            }
            if !(d > tol) {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[j * q + j] = djj;
            for i in j + 1..q {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * q + k] * l[j * q + k];
                }
                l[i * q + j] = s / djj;
            }
        }
        Ok(Cholesky { dim: q, l })
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let q = self.dim;
        let mut y = b.to_vec();
        for i in 0..q {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * q + k] * y[k];
            }
            y[i] = s / self.l[i * q + i];
        }
        for i in (0..q).rev() {
            let mut s = y[i];
            for k in i + 1..q {
                s -= self.l[k * q + i] * y[k];
            }
            y[i] = s / self.l[i * q + i];
        }
        y
    }

    /// `b' A^{-1} b`, computed as `|L^{-1} b|^2` so it is never negative.
    pub fn inv_quadratic_form(&self, b: &[T]) -> T {
        let q = self.dim;
        let mut y = b.to_vec();
        for i in 0..q {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * q + k] * y[k];
            }
            y[i] = s / self.l[i * q + i];
        }
        y.iter().map(|&v| v * v).sum()
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd<T: Scalar>(a: &SquareMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    Ok(a.cholesky()?.solve(b))
}

/// `b' A^{-1} b` for symmetric positive definite `A`.
pub fn inv_quadratic_form<T: Scalar>(a: &SquareMatrix<T>, b: &[T]) -> Result<T> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    Ok(a.cholesky()?.inv_quadratic_form(b))
}

/// Gaussian elimination with partial pivoting for a small general system.
/// Returns `None` when a pivot falls below `rel_tol` times the largest entry.
pub(crate) fn solve_general(a: &[Vec<f64>], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let p = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= rel_tol * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..p {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..p {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| m[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Gauss-Jordan inverse, kept separate from the Cholesky path.
    fn dense_inverse(a: &SquareMatrix<f64>) -> Vec<Vec<f64>> {
        let q = a.dim();
        let mut aug: Vec<Vec<f64>> = (0..q)
            .map(|i| {
                let mut row: Vec<f64> = (0..q).map(|j| a[(i, j)]).collect();
                row.extend((0..q).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for c in 0..q {
            let p = (c..q)
                .max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs()))
                .unwrap();
            aug.swap(c, p);
            let d = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= d;
            }
            for r in 0..q {
                if r != c {
                    let f = aug[r][c];
                    for k in 0..2 * q {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[q..].to_vec()).collect()
    }

    #[test]
    fn solve_examples() {
        let x = solve_spd(&SquareMatrix::<f64>::identity(2), &[3.0, -1.0]).unwrap();
        assert_eq!(x, vec![3.0, -1.0]);
        let x = solve_spd(&SquareMatrix::from_diag(&[4.0]), &[8.0]).unwrap();
        assert_eq!(x, vec![2.0]);
        let a = SquareMatrix::from_rows(&[vec![2.0f64, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = solve_spd(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular_and_indefinite() {
        assert_eq!(
            solve_spd(&SquareMatrix::<f64>::zeros(2), &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite)
        );
        let a = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(solve_spd(&a, &[1.0, 0.0]), Err(Error::NotPositiveDefinite));
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(solve_spd(&a, &[1.0, 0.0]), Err(Error::NotPositiveDefinite));
        assert!(matches!(
            solve_spd(&SquareMatrix::<f64>::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn general_solve_handles_permutation() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = solve_general(&a, &[4.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(solve_general(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0], 1e-12).is_none());
    }

    fn spd_strategy() -> impl Strategy<Value = (SquareMatrix<f64>, Vec<f64>)> {
        (1usize..7).prop_flat_map(|q| {
            (
                proptest::collection::vec(-1.0f64..1.0, q * q),
                proptest::collection::vec(0.5f64..2.0, q),
                proptest::collection::vec(-5.0f64..5.0, q),
            )
                .prop_map(move |(lower, diag, b)| {
                    let mut l = vec![vec![0.0; q]; q];
                    for i in 0..q {
                        for j in 0..i {
                            l[i][j] = lower[i * q + j];
                        }
                        l[i][i] = diag[i];
                    }
                    let mut a = SquareMatrix::zeros(q);
                    for i in 0..q {
                        for j in 0..q {
                            a[(i, j)] = (0..q).map(|k| l[i][k] * l[j][k]).sum();
                        }
                    }
                    (a, b)
                })
        })
    }

    proptest! {
        #[test]
        fn solve_matches_dense_inverse((a, b) in spd_strategy()) {
            let x = solve_spd(&a, &b).unwrap();
            let inv = dense_inverse(&a);
            let oracle: Vec<f64> = inv.iter().map(|r| r.iter().zip(&b).map(|(u, v)| u * v).sum()).collect();
            let norm = oracle.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let diff = x.iter().zip(&oracle).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            prop_assert!(diff / norm < 1e-8, "relative diff {}", diff / norm);

            let ax = a.mul_vec(&x);
            let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res = ax.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            if bn > 0.0 {
                prop_assert!(res / bn < 1e-10);
            }

            let qf = inv_quadratic_form(&a, &b).unwrap();
            let direct: f64 = b.iter().zip(&x).map(|(u, v)| u * v).sum();
            prop_assert!((qf - direct).abs() <= 1e-8 * direct.abs().max(1.0));
        }
    }
}
