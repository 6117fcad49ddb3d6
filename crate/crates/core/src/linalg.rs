//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Inverse of a symmetric matrix: Cholesky when positive definite, LU otherwise.
pub fn inverse_symmetric(m: &Matrix) -> Result<Matrix> {
    if let Some(ch) = m.clone().cholesky() {
        let inv = ch.inverse();
        return Ok(symmetrize(&inv));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularModel("matrix is not invertible".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularModel("matrix is not invertible".into()));
    }
    Ok(symmetrize(&inv))
}

/// General inverse via LU.
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularModel("matrix is not invertible".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularModel("matrix is not invertible".into()));
    }
    Ok(inv)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// True if `m` is positive semi-definite up to a relative tolerance on its
/// eigenvalues.
pub fn is_psd(m: &Matrix, rel_tol: f64) -> bool {
    let eig = symmetrize(m).symmetric_eigenvalues();
    let scale = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    eig.iter().all(|v| *v >= -rel_tol * scale.max(f64::MIN_POSITIVE))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// serde adaptor storing a matrix as a list of rows.
pub mod serde_rows {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(from_rows(&rows))
    }
}

/// serde adaptor for an optional matrix.
pub mod serde_rows_opt {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        Ok(rows.map(|r| from_rows(&r)))
    }
}
