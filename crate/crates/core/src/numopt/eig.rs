use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const EIG_DIM_CAP: usize = 2048;

const MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix. Construction symmetrizes its input and refuses
/// inputs that are visibly asymmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<R>(Matrix<R>);

impl<R: Real> SymMatrix<R> {
    pub fn new(m: Matrix<R>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix",
                expected: m.rows(),
                got: m.cols(),
            });
        }
        let scale = R::from_f64(m.max_abs().max(1.0));
        let tol = R::from_f64(1e-9) * scale;
        let n = m.rows();
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let half = R::from_f64(0.5);
        Ok(SymMatrix(Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * half)))
    }

    /// `AᵀA`, symmetric by construction.
    pub fn gram(a: &Matrix<R>) -> Self {
        let at = a.transpose();
        let g = at.matmul(a).expect("compatible shapes");
        SymMatrix::new(g).expect("gram matrix is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix<R> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<R> {
        self.0
    }
}

/// Eigen-decomposition `M = V diag(values) Vᵀ`, values in decreasing order and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigen<R> {
    pub values: Vec<R>,
    pub vectors: Matrix<R>,
}

impl<R: Real> Eigen<R> {
    pub fn vector(&self, k: usize) -> Vec<R> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic Jacobi. Stops once the off-diagonal Frobenius mass falls below
/// `max(1e-12·‖M‖_F, 100·ε·‖M‖_F)`.
pub fn eig_sym<R: Real>(m: &SymMatrix<R>) -> Result<Eigen<R>> {
    let n = m.dim();
    if n > EIG_DIM_CAP {
        return Err(Error::CapExceeded {
            what: "eigensolver dimension",
            size: n,
            cap: EIG_DIM_CAP,
        });
    }
    let mut a = m.matrix().clone();
    let mut v = Matrix::<R>::identity(n);
    let fro = a.entries().iter().fold(R::zero(), |s, &x| s + x * x).sqrt();
    let thresh = (R::from_f64(1e-12) * fro).max(R::from_f64(100.0) * R::epsilon() * fro);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut off = R::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= thresh {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == R::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (R::from_f64(2.0) * apq);
                let t = if theta.abs() > R::from_f64(1e150) {
                    R::from_f64(0.5) / theta
                } else {
                    let sgn = if theta >= R::zero() { R::one() } else { -R::one() };
                    sgn / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = R::zero();
                a[(q, p)] = R::zero();
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "Jacobi eigensolver after {MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).expect("finite eigenvalues"));
    Ok(Eigen {
        values: order.iter().map(|&i| a[(i, i)]).collect(),
        vectors: Matrix::from_fn(n, n, |r, k| v[(r, order[k])]),
    })
}

pub fn min_eigenvalue<R: Real>(m: &SymMatrix<R>) -> Result<R> {
    Ok(eig_sym(m)?.values.last().copied().unwrap_or_else(R::zero))
}

/// Operator 2-norm `sqrt(λ_max(AᵀA))`.
pub fn op_norm<R: Real>(a: &Matrix<R>) -> Result<R> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(R::zero());
    }
    let e = eig_sym(&SymMatrix::gram(a))?;
    Ok(e.values[0].max(R::zero()).sqrt())
}

/// Projection onto the operator-norm unit ball: singular values above one are
/// clipped, `A ↦ A V diag(min(1, 1/σ)) Vᵀ` with `AᵀA = V diag(σ²) Vᵀ`.
pub fn clip_operator_norm<R: Real>(a: &Matrix<R>) -> Result<Matrix<R>> {
    let e = eig_sym(&SymMatrix::gram(a))?;
    if e.values.first().is_none_or(|&l| l <= R::one()) {
        return Ok(a.clone());
    }
    let f: Vec<R> = e
        .values
        .iter()
        .map(|&l| if l > R::one() { R::one() / l.sqrt() } else { R::one() })
        .collect();
    let v = &e.vectors;
    a.matmul(&v.matmul(&Matrix::diag(&f))?.matmul(&v.transpose())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: Vec<Vec<f64>>) -> SymMatrix<f64> {
        SymMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn small_spectra() {
        assert_eq!(eig_sym(&sym(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap().values, vec![1.0, 1.0]);
        assert_eq!(eig_sym(&sym(vec![vec![1.0, 0.0], vec![0.0, 3.0]])).unwrap().values, vec![3.0, 1.0]);
        let e = eig_sym(&sym(vec![vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction() {
        let m = sym(vec![
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, -3.0, 0.0, 2.0],
            vec![-2.0, 0.0, 1.0, 1.5],
            vec![0.5, 2.0, 1.5, 0.0],
        ]);
        let e = eig_sym(&m).unwrap();
        let v = &e.vectors;
        let rec = v
            .matmul(&Matrix::diag(&e.values))
            .unwrap()
            .matmul(&v.transpose())
            .unwrap();
        let err = rec.sub(m.matrix()).unwrap().entries().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-12);
        let vtv = v.transpose().matmul(v).unwrap();
        assert!(vtv.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_computes_norms() {
        assert!(SymMatrix::new(Matrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()).is_err());
        let a = Matrix::<f64>::from_rows(vec![vec![3.0, 0.0], vec![4.0, 0.0]]).unwrap();
        assert!((op_norm(&a).unwrap() - 5.0).abs() < 1e-12);
        let f = Matrix::<f32>::from_rows(vec![vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!((op_norm(&f).unwrap() - 2.0).abs() < 1e-5);
        let c = clip_operator_norm(&a).unwrap();
        assert!((op_norm(&c).unwrap() - 1.0).abs() < 1e-12);
        assert!((c[(1, 0)] - 0.8).abs() < 1e-12);
    }
}
