use super::{Density1D, Interval};
use crate::error::{Error, Result};

/// Densities `k m^(k-1)`, `k = 1..=n`, on `support` (affinely mapped from `[0, 1]`).
pub fn monomial_basis(n: usize, support: Interval) -> Result<Vec<Density1D>> {
    if n == 0 {
        return Err(Error::input("basis size must be >= 1"));
    }
    (1..=n as u32).map(|k| Density1D::monomial(k, support)).collect()
}

/// Normalized Bernstein polynomials of degree `n - 1` (`n` elements). They span
/// the same space as [`monomial_basis`] with much better conditioning.
pub fn bernstein_basis(n: usize, support: Interval) -> Result<Vec<Density1D>> {
    if n == 0 {
        return Err(Error::input("basis size must be >= 1"));
    }
    let deg = n as u32 - 1;
    (0..=deg).map(|k| Density1D::bernstein(k, deg, support)).collect()
}
