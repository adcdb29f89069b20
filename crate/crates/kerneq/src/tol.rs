//! Tolerance bundle threaded through every numerical decision.

/// Thresholds for the four kinds of numerical decision the library makes.
///
/// All are *relative*: `zero` against the largest coefficient norm in the
/// expression at hand, `psd` against the largest Gram eigenvalue, `rank`
/// against the largest singular value, `gap` against the spectral diameter.
/// The defaults are calibrated for desk-scale instances (rank ≤ 8, degree
/// ≤ 12), which are well-conditioned throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Residuals at or below `zero` (relative) count as exact identities.
    pub zero: f64,
    /// Gram eigenvalues above `-psd · λ_max` count as non-negative.
    pub psd: f64,
    /// Singular values at or below `rank · σ_max` count as null directions.
    pub rank: f64,
    /// Eigenvalue clusters separated by more than `gap · diameter` are split.
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { zero: 1e-9, psd: 1e-9, rank: 1e-8, gap: 1e-6 }
    }
}

impl Tolerances {
    /// Default thresholds with `zero` overridden (the CLI's env-var hook).
    pub fn with_zero(zero: f64) -> Self {
        Tolerances { zero, ..Tolerances::default() }
    }
}
