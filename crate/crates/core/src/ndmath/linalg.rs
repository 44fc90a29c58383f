//! Small dense linear algebra in `f64`: orthogonal sampling, symmetric
//! eigendecomposition and least squares. Dimensions here never exceed a few dozen.

use super::{Matrix, RngState};
use crate::error::{invalid, Error, Result};

/// Square `f64` matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareF64 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SquareF64 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.dim + c]
    }

    pub fn mul(&self, other: &SquareF64) -> SquareF64 {
        let n = self.dim;
        let mut out = SquareF64::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SquareF64 {
        let n = self.dim;
        let mut out = SquareF64::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.at(i, j);
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_raw(self.dim, self.dim, self.data.iter().map(|&v| v as f32).collect())
    }
}

/// Haar-distributed random orthogonal matrix: Gram-Schmidt on a Gaussian matrix,
/// with column signs fixed so the distribution is uniform over O(n).
pub fn random_orthogonal(dim: usize, rng: &mut RngState) -> Result<Matrix> {
    if dim == 0 {
        return Err(invalid("random_orthogonal: dim must be >= 1"));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal() as f64).collect();
        // two passes of modified Gram-Schmidt keep orthogonality at f64 precision
        for _ in 0..2 {
            for q in &cols {
                let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= p * qi);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        cols.push(v);
    }
    let mut q = Matrix::zeros(dim, dim);
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            q.set(r, c, v as f32);
        }
    }
    Ok(q)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen(a: &SquareF64) -> Result<(Vec<f64>, SquareF64)> {
    let n = a.dim;
    let mut m = a.clone();
    let mut v = SquareF64::identity(n);
    let scale = m.data.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.at(i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            let vals = (0..n).map(|i| m.at(i, i)).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    *m.at_mut(k, p) = c * mkp - s * mkq;
                    *m.at_mut(k, q) = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    *m.at_mut(p, k) = c * mpk - s * mqk;
                    *m.at_mut(q, k) = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    *v.at_mut(k, p) = c * vkp - s * vkq;
                    *v.at_mut(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NumericDomain(
        "symmetric_eigen: Jacobi sweeps did not converge".into(),
    ))
}

/// Square root of a symmetric positive semidefinite matrix. Eigenvalues in
/// `[-tol, 1e-10)` are clamped to zero; anything more negative is a domain error.
pub fn psd_sqrt(a: &SquareF64, tol: f64) -> Result<SquareF64> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let n = a.dim;
    let mut roots = Vec::with_capacity(n);
    for &l in &vals {
        if l < -tol {
            return Err(Error::NumericDomain(format!(
                "matrix is not positive semidefinite (eigenvalue {l:.3e})"
            )));
        }
        roots.push(if l < 1e-10 { 0.0 } else { l.sqrt() });
    }
    let mut out = SquareF64::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.data[i * n + j] = roots
                .iter()
                .enumerate()
                .map(|(k, r)| vecs.at(i, k) * r * vecs.at(j, k))
                .sum();
        }
    }
    Ok(out)
}

/// Solves the symmetric positive definite system `a·x = b` by Cholesky.
pub fn solve_spd(a: &SquareF64, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim;
    if b.len() != n {
        return Err(invalid("solve_spd: rhs length mismatch"));
    }
    let mut l = SquareF64::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NumericDomain(
                        "solve_spd: matrix is not positive definite".into(),
                    ));
                }
                *l.at_mut(i, i) = s.sqrt();
            } else {
                *l.at_mut(i, j) = s / l.at(j, j);
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l.at(i, k) * y[k]).sum();
        y[i] = (b[i] - s) / l.at(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l.at(k, i) * x[k]).sum();
        x[i] = (y[i] - s) / l.at(i, i);
    }
    Ok(x)
}

/// Ordinary least squares with intercept via the normal equations.
/// Returns `(coefficients, intercept)`.
pub fn least_squares(xs: &[Vec<f32>], ys: &[f32]) -> Result<(Vec<f64>, f64)> {
    let n = xs.len();
    if n == 0 || n != ys.len() {
        return Err(invalid("least_squares: need equally many nonempty rows and targets"));
    }
    let d = xs[0].len() + 1;
    let mut ata = SquareF64::zeros(d);
    let mut aty = vec![0.0; d];
    let mut row = vec![0.0f64; d];
    for (x, &y) in xs.iter().zip(ys) {
        row[..d - 1].iter_mut().zip(x).for_each(|(r, &v)| *r = v as f64);
        row[d - 1] = 1.0;
        for i in 0..d {
            aty[i] += row[i] * y as f64;
            for j in 0..d {
                ata.data[i * d + j] += row[i] * row[j];
            }
        }
    }
    let sol = solve_spd(&ata, &aty)?;
    Ok((sol[..d - 1].to_vec(), sol[d - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_dim_one_is_sign() {
        for seed in 0..5 {
            let q = random_orthogonal(1, &mut RngState::new(seed)).unwrap();
            assert_eq!(q.get(0, 0).abs(), 1.0);
        }
        assert!(random_orthogonal(0, &mut RngState::new(0)).is_err());
    }

    #[test]
    fn orthogonal_is_orthonormal_and_deterministic() {
        let q = random_orthogonal(16, &mut RngState::new(7)).unwrap();
        let qtq = q.t_matmul(&q).unwrap();
        assert!(qtq.max_abs_diff(&Matrix::identity(16)) < 1e-5);
        let q2 = random_orthogonal(16, &mut RngState::new(7)).unwrap();
        assert_eq!(q.as_slice(), q2.as_slice());
    }

    #[test]
    fn orthogonal_preserves_norm() {
        let mut rng = RngState::new(11);
        let q = random_orthogonal(16, &mut rng).unwrap();
        for _ in 0..100 {
            let v = rng.normal_vec(16);
            let qv = q.mul_vec(&v).unwrap();
            let ratio = super::super::norm(&qv) / super::super::norm(&v);
            assert!((1.0 - 1e-5..=1.0 + 1e-5).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = RngState::new(3);
        let n = 6;
        let mut a = SquareF64::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.normal() as f64;
                *a.at_mut(i, j) = v;
                *a.at_mut(j, i) = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| vecs.at(i, k) * vals[k] * vecs.at(j, k)).sum();
                assert!((r - a.at(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn psd_sqrt_squares_back_and_rejects_indefinite() {
        let mut a = SquareF64::zeros(2);
        a.data = vec![4.0, 1.0, 1.0, 3.0];
        let s = psd_sqrt(&a, 1e-9).unwrap();
        let ss = s.mul(&s);
        for (x, y) in ss.data.iter().zip(&a.data) {
            assert!((x - y).abs() < 1e-10);
        }
        a.data = vec![1.0, 0.0, 0.0, -1.0];
        assert!(matches!(psd_sqrt(&a, 1e-9), Err(Error::NumericDomain(_))));
    }

    #[test]
    fn least_squares_recovers_plane() {
        let mut rng = RngState::new(5);
        let xs: Vec<Vec<f32>> = (0..200).map(|_| rng.normal_vec(3)).collect();
        let ys: Vec<f32> = xs.iter().map(|x| 2.0 * x[0] - x[1] + 0.5 * x[2] + 3.0).collect();
        let (c, b) = least_squares(&xs, &ys).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-4 && (c[1] + 1.0).abs() < 1e-4);
        assert!((c[2] - 0.5).abs() < 1e-4 && (b - 3.0).abs() < 1e-4);
    }
}
