//! Tensor-product trigonometric basis on `[0,1]^d`.
//!
//! In one dimension `φ_0 ≡ 1`, `φ_k(u) = √2 cos(2πku)` for `k > 0` and
//! `φ_k(u) = √2 sin(2π|k|u)` for `k < 0`. The multivariate element is the
//! product over coordinates.

use std::f64::consts::{PI, SQRT_2};

use crate::coeffs::CoefficientMap;
use crate::multiindex::MultiIndex;

/// One-dimensional basis function `φ_k(u)`.
pub fn eval_basis_1d(k: i32, u: f64) -> f64 {
    match k {
        0 => 1.0,
        k if k > 0 => SQRT_2 * (2.0 * PI * k as f64 * u).cos(),
        k => SQRT_2 * (2.0 * PI * k.unsigned_abs() as f64 * u).sin(),
    }
}

/// `φ_j(x) = ∏_ℓ φ_{j_ℓ}(x_ℓ)`.
///
/// # Panics
/// If `x` and `j` have different lengths.
pub fn eval_basis(j: &MultiIndex, x: &[f64]) -> f64 {
    assert_eq!(j.dim(), x.len(), "index and point dimensions differ");
    j.entries()
        .iter()
        .zip(x)
        .filter(|(k, _)| **k != 0)
        .map(|(&k, &u)| eval_basis_1d(k, u))
        .product()
}

/// Synthesis `f(x) = Σ_j θ_j φ_j(x)` by direct summation.
pub fn eval_function(coeffs: &CoefficientMap, x: &[f64]) -> f64 {
    coeffs
        .iter()
        .map(|(j, &theta)| theta * eval_basis(j, x))
        .sum()
}
