//! Dense symmetric eigensolvers for small matrices (d ≤ 64).
//!
//! A cyclic Jacobi sweep handles the ordinary symmetric problem; the
//! generalized problem A v = λ B v is reduced through a Cholesky factor of
//! B. Everything is row-major `Vec<f64>` — at these sizes a matrix library
//! would be pure overhead.

use crate::error::{Error, Result};

/// Row-major dense square matrix helper.
#[derive(Debug, Clone)]
pub struct SquareMat {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SquareMat {
    pub fn zeros(dim: usize) -> Self {
        SquareMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "rows must form a square matrix");
            m.data[i * dim..(i + 1) * dim].copy_from_slice(row);
        }
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                dev = dev.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        dev
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of the returned matrix.
pub fn sym_eig(a: &SquareMat) -> (Vec<f64>, SquareMat) {
    let d = a.dim;
    let mut m = a.clone();
    let mut v = SquareMat::identity(d);
    if d <= 1 {
        return (m.data.clone(), v);
    }

    let off = |m: &SquareMat| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        s
    };

    let scale: f64 = m.data.iter().map(|x| x * x).sum::<f64>().max(1e-300);
    let tol = 1e-30 * scale;
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..d - 1 {
            for q in p + 1..d {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = SquareMat::zeros(d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..d {
            vectors[(row, new_col)] = v[(row, old_col)];
        }
    }
    (eigenvalues, vectors)
}

/// Cholesky factor L with A = L·Lᵀ; None if A is not positive-definite.
pub fn cholesky(a: &SquareMat) -> Option<SquareMat> {
    let d = a.dim;
    let mut l = SquareMat::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve L x = b for lower-triangular L.
pub fn solve_lower(l: &SquareMat, b: &[f64]) -> Vec<f64> {
    let d = l.dim;
    let mut x = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            x[i] -= l[(i, k)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Solve Lᵀ x = b for lower-triangular L.
pub fn solve_lower_t(l: &SquareMat, b: &[f64]) -> Vec<f64> {
    let d = l.dim;
    let mut x = b.to_vec();
    for i in (0..d).rev() {
        for k in i + 1..d {
            x[i] -= l[(k, i)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Generalized symmetric eigenproblem A v = λ B v.
///
/// B gets a diagonal regularization of `1e-10·trace(B)/d` before
/// factorization. Eigenvalues come back descending; eigenvectors are
/// B-orthonormal columns.
pub fn generalized_sym_eig(a: &SquareMat, b: &SquareMat) -> Result<(Vec<f64>, SquareMat)> {
    let d = a.dim;
    if b.dim != d {
        return Err(Error::DimensionMismatch {
            op: "generalized_sym_eig",
            detail: format!("A is {d}x{d}, B is {}x{}", b.dim, b.dim),
        });
    }
    let scale = a.norm().max(1.0);
    let dev = a.max_asymmetry();
    if dev > 1e-10 * scale {
        return Err(Error::NotSymmetric { max_dev: dev });
    }

    let mut b_reg = b.clone();
    let trace: f64 = (0..d).map(|i| b[(i, i)]).sum();
    let eps = 1e-10 * trace / d as f64;
    for i in 0..d {
        b_reg[(i, i)] += eps;
    }
    let l = cholesky(&b_reg).ok_or(Error::NotPositiveDefinite)?;

    // C = L⁻¹ A L⁻ᵀ, built column by column, then symmetrized.
    let mut c = SquareMat::zeros(d);
    for j in 0..d {
        let col: Vec<f64> = (0..d).map(|i| a[(i, j)]).collect();
        let y = solve_lower(&l, &col);
        for i in 0..d {
            c[(i, j)] = y[i];
        }
    }
    // Now c = L⁻¹ A; apply L⁻ᵀ from the right via rows: (L⁻¹ A L⁻ᵀ)ᵢ. = solve on rows.
    let mut c2 = SquareMat::zeros(d);
    for i in 0..d {
        let row: Vec<f64> = (0..d).map(|j| c[(i, j)]).collect();
        let y = solve_lower(&l, &row);
        for j in 0..d {
            c2[(i, j)] = y[j];
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (c2[(i, j)] + c2[(j, i)]);
            c2[(i, j)] = avg;
            c2[(j, i)] = avg;
        }
    }

    let (eigenvalues, y) = sym_eig(&c2);
    let mut vectors = SquareMat::zeros(d);
    for col in 0..d {
        let ycol: Vec<f64> = (0..d).map(|row| y[(row, col)]).collect();
        let vcol = solve_lower_t(&l, &ycol);
        for row in 0..d {
            vectors[(row, col)] = vcol[row];
        }
    }
    Ok((eigenvalues, vectors))
}
