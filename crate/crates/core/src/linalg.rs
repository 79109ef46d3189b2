//! Small dense linear-algebra helpers shared by the design and simulation code.
//!
//! Everything here works on `nalgebra` dynamic matrices; the problems are desk
//! scale (a handful of states, one or two inputs) so clarity wins over speed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Builds a matrix from row slices.
pub fn mat_from_rows(rows: &[&[f64]]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn vector(values: &[f64]) -> Vector {
    Vector::from_column_slice(values)
}

/// Largest singular value (induced 2-norm).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn symmetric_eigenvalues(m: &Mat) -> Vector {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues
}

pub fn max_symmetric_eigenvalue(m: &Mat) -> f64 {
    symmetric_eigenvalues(m)
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    symmetric_eigenvalues(m)
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Principal square root of a symmetric positive definite matrix and its inverse.
pub fn spd_sqrt_pair(p: &Mat) -> Result<(Mat, Mat)> {
    if !p.is_square() {
        return Err(Error::Dimension(format!(
            "weight matrix must be square, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::Infeasible(format!(
            "weight matrix is not positive definite (min eigenvalue {min:e})"
        )));
    }
    let q = &eig.eigenvectors;
    let sqrt = q * Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let inv_sqrt = q * Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
    Ok((sqrt, inv_sqrt))
}

/// Weighted Euclidean norm `sqrt(y' P y)`.
pub fn p_norm(y: &Vector, p: &Mat) -> f64 {
    (y.transpose() * p * y)[(0, 0)].max(0.0).sqrt()
}

/// A P-weighted norm with the square roots of `P` cached.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    p: Mat,
    sqrt: Mat,
    inv_sqrt: Mat,
}

impl WeightedNorm {
    pub fn new(p: &Mat) -> Result<Self> {
        let (sqrt, inv_sqrt) = spd_sqrt_pair(p)?;
        Ok(Self {
            p: p.clone(),
            sqrt,
            inv_sqrt,
        })
    }

    pub fn weight(&self) -> &Mat {
        &self.p
    }

    pub fn vector_norm(&self, y: &Vector) -> f64 {
        p_norm(y, &self.p)
    }

    /// Induced matrix norm `sup ||Q y||_P / ||y||_P`, i.e. the largest singular
    /// value of `P^{1/2} Q P^{-1/2}`.
    pub fn matrix_norm(&self, q: &Mat) -> f64 {
        if q.nrows() == 1 && q.ncols() == 1 {
            return q[(0, 0)].abs();
        }
        spectral_norm(&(&self.sqrt * q * &self.inv_sqrt))
    }
}

pub fn inverse(m: &Mat, what: &str) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what} is not square")));
    }
    let det = m.determinant();
    // relative to scale, so a well-conditioned but tiny matrix still inverts
    if det.abs() <= 1e-12 * spectral_norm(m).powi(m.nrows() as i32) {
        return Err(Error::Singular(format!("{what}: |det| = {:e}", det.abs())));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Numerical rank from singular values with a relative cutoff.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter()
        .filter(|&&s| s > rel_tol * max.max(f64::MIN_POSITIVE))
        .count()
}

pub fn sup_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weighted_norm_identity_is_spectral() {
        let w = WeightedNorm::new(&Mat::identity(2, 2)).unwrap();
        let q = mat_from_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert_relative_eq!(w.matrix_norm(&q), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_norm_is_similarity_invariant() {
        // ||Q||_P for Q = P^{-1/2} D P^{1/2} equals ||D||_2.
        let p = mat_from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let w = WeightedNorm::new(&p).unwrap();
        let (s, si) = spd_sqrt_pair(&p).unwrap();
        let d = mat_from_rows(&[&[0.3, 0.0], &[0.0, -1.7]]);
        let q = &si * &d * &s;
        assert_relative_eq!(w.matrix_norm(&q), 1.7, epsilon = 1e-10);
    }

    #[test]
    fn non_spd_weight_rejected() {
        let p = mat_from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(WeightedNorm::new(&p).is_err());
    }

    #[test]
    fn rank_detects_deficiency() {
        let c = mat_from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(rank(&c, 1e-12), 1);
    }
}
