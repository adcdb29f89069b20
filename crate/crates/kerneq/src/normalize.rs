//! Kernel normalization at the origin.
//!
//! A kernel is *normalized* when `K(μ, 0) = I` for all `μ`, i.e. its
//! coefficient column `A_m0` is `δ_{m0}·I`. Every kernel with positive
//! definite `A_00` admits a holomorphic gauge `G` with
//!
//! ```text
//! K₀ = G K G*,        G(μ) = A_00^{1/2} · (Σ_m A_m0 μ^m)⁻¹,
//! ```
//!
//! and the normalized form is the canonical representative on which all
//! equivalence logic operates: once two kernels are normalized, any residual
//! freedom is a single constant unitary on the coefficient family.

use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::kernel::KernelSeries;
use crate::matrix::{self, CMat};
use crate::tol::Tolerances;

/// A normalized kernel together with the gauge that produced it.
#[derive(Debug, Clone)]
pub struct NormalizedPair {
    /// The normalized kernel, `K₀ = G K G*`.
    pub k0: KernelSeries,
    /// The holomorphic gauge `G` with invertible constant term.
    pub gauge: HoloSeries,
}

/// Normalize a kernel at the origin. Requires `A_00` positive definite.
///
/// # Example
/// ```
/// use kerneq::normalize::{is_normalized, normalize};
/// use kerneq::tol::Tolerances;
/// use kerneq::zoo;
/// let tol = Tolerances::default();
/// // 2·Szegő normalizes back to Szegő through the constant gauge 1/√2.
/// let doubled = zoo::diagonal_kernel(&[2.0, 2.0, 2.0, 2.0]).unwrap();
/// let pair = normalize(&doubled, &tol).unwrap();
/// assert!(is_normalized(&pair.k0, &tol));
/// assert!((pair.gauge.coeff(0)[(0, 0)].re - 0.5f64.sqrt()).abs() < 1e-14);
/// assert!((pair.k0.coeff(2, 2)[(0, 0)].re - 1.0).abs() < 1e-14);
/// ```
pub fn normalize(kernel: &KernelSeries, tol: &Tolerances) -> Result<NormalizedPair> {
    let n = kernel.rank();
    let d = kernel.degree();
    let a00_sqrt = matrix::psd_sqrt(kernel.coeff(0, 0), tol.psd, "kernel constant term")?;
    if matrix::condition(&a00_sqrt) >= 1.0 / tol.zero {
        return Err(Error::NotPositiveDefinite("kernel constant term"));
    }
    // F(μ) = Σ A_m0 μ^m is invertible as a series because A_00 is.
    let f = HoloSeries::from_fn(n, d, |m| kernel.coeff(m, 0).clone())?;
    let f_inv = f.invert()?;
    let gauge = HoloSeries::from_fn(n, d, |m| &a00_sqrt * f_inv.coeff(m))?;
    let k0 = KernelSeries::congruence(&gauge, kernel, &gauge)?;
    if !is_normalized(&k0, tol) {
        return Err(Error::VerificationFailed(format!(
            "normalization produced a column defect of {:.3e}",
            column_defect(&k0)
        )));
    }
    Ok(NormalizedPair { k0, gauge })
}

/// Largest deviation of the `A_m0` column from `δ_{m0}·I`.
fn column_defect(kernel: &KernelSeries) -> f64 {
    let n = kernel.rank();
    let mut worst = matrix::max_abs_diff(kernel.coeff(0, 0), &matrix::eye(n));
    for m in 1..=kernel.degree() {
        worst = worst.max(matrix::max_abs(kernel.coeff(m, 0)));
    }
    worst
}

/// True iff `A_00 = I` and `A_m0 = 0` for `m ≥ 1`, within `tol.zero`
/// relative to the coefficient scale.
pub fn is_normalized(kernel: &KernelSeries, tol: &Tolerances) -> bool {
    column_defect(kernel) <= tol.zero * kernel.max_coeff_norm().max(1.0)
}

/// The coefficient family `{A_mq}` of a normalized kernel in lexicographic
/// `(m, q)` order, with exactly-zero matrices dropped. This is the matrix
/// family whose simultaneous block structure drives decomposition and
/// equivalence.
pub fn coefficient_family(kernel: &KernelSeries, tol: &Tolerances) -> Result<Vec<CMat>> {
    if !is_normalized(kernel, tol) {
        return Err(Error::NotNormalized);
    }
    let mut family = Vec::new();
    for m in 0..=kernel.degree() {
        for q in 0..=kernel.degree() {
            let a = kernel.coeff(m, q);
            if matrix::max_abs(a) > 0.0 {
                family.push(a.clone());
            }
        }
    }
    Ok(family)
}
