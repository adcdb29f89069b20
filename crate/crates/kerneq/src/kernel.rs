//! Truncated matrix-valued kernel power series.
//!
//! A rank-`n` kernel is represented by its coefficient block grid
//!
//! ```text
//! K(μ, λ) = Σ_{0 ≤ m,q ≤ D}  A_mq  μ^m  λ̄^q ,        A_mq ∈ M_n(ℂ),
//! ```
//!
//! expanded around the origin. Two structural invariants make such a grid a
//! *kernel* rather than an arbitrary array:
//!
//! * **Hermitian symmetry** `A_mq = (A_qm)*` — the coefficient image of
//!   `K(μ,λ) = K(λ,μ)*`;
//! * **non-negativity** — the `n(D+1) × n(D+1)` block Gram matrix
//!   `[A_mq]_{m,q}` is positive semidefinite, which is exactly positivity of
//!   the truncated kernel.
//!
//! Construction does not force the invariants (several operations, e.g. a
//! one-sided congruence, legitimately pass through non-Hermitian grids);
//! [`KernelSeries::validate`] reports on them, and operations that *need*
//! them state so.

use crate::biseries::BiSeries;
use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::matrix::{self, CMat, C64};
use crate::tol::Tolerances;

/// Truncated kernel `Σ A_mq μ^m λ̄^q` of rank `n` and degree `D`.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    rank: usize,
    degree: usize,
    coeffs: Vec<CMat>, // (D+1)² entries, row-major in (m, q)
}

impl KernelSeries {
    /// Build from a full `(D+1)²` coefficient grid in row-major `(m, q)`
    /// order. Checks shapes and finiteness only; see [`Self::validate`] for
    /// the kernel invariants.
    pub fn new(rank: usize, degree: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.len() != (degree + 1) * (degree + 1) {
            return Err(Error::Shape(format!(
                "kernel grid holds {} matrices, expected {}",
                coeffs.len(),
                (degree + 1) * (degree + 1)
            )));
        }
        for c in &coeffs {
            if c.nrows() != rank || c.ncols() != rank {
                return Err(Error::Shape(format!(
                    "kernel coefficient is {}×{}, expected {rank}×{rank}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if !matrix::all_finite(c) {
                return Err(Error::Shape("non-finite kernel coefficient".into()));
            }
        }
        Ok(KernelSeries { rank, degree, coeffs })
    }

    /// Build coefficientwise from `(m, q) ↦ A_mq`.
    pub fn from_fn(
        rank: usize,
        degree: usize,
        f: impl Fn(usize, usize) -> CMat,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity((degree + 1) * (degree + 1));
        for m in 0..=degree {
            for q in 0..=degree {
                coeffs.push(f(m, q));
            }
        }
        KernelSeries::new(rank, degree, coeffs)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient `A_mq`.
    pub fn coeff(&self, m: usize, q: usize) -> &CMat {
        assert!(m <= self.degree && q <= self.degree, "coefficient index out of range");
        &self.coeffs[m * (self.degree + 1) + q]
    }

    /// Evaluate `Σ A_mq μ^m λ̄^q` at a point pair.
    ///
    /// # Example
    /// ```
    /// use kerneq::zoo;
    /// use kerneq::matrix::re;
    /// // Szegő kernel truncated at degree 3: 1 + x + x² + x³ at x = μλ̄ = 0.25.
    /// let k = zoo::szego(3);
    /// let v = k.eval(re(0.5), re(0.5));
    /// assert!((v[(0, 0)].re - 1.328125).abs() < 1e-15);
    /// ```
    pub fn eval(&self, mu: C64, lambda: C64) -> CMat {
        let lb = lambda.conj();
        let mut acc = matrix::zeros(self.rank, self.rank);
        let mut mp = matrix::ONE;
        for m in 0..=self.degree {
            let mut w = mp;
            for q in 0..=self.degree {
                acc += self.coeff(m, q) * w;
                w *= lb;
            }
            mp *= mu;
        }
        acc
    }

    /// The two-sided transform `Ψ(μ) K(μ,λ) Φ(λ)*`, truncated to the
    /// smallest operand degree (each kept coefficient only reads inputs of
    /// lower or equal order, so it is exact there).
    ///
    /// With `Ψ = Φ` this is the congruence that realizes unitary equivalence
    /// of the underlying operators, and it preserves both kernel invariants.
    ///
    /// # Example
    /// ```
    /// use kerneq::holo::scalar_series;
    /// use kerneq::kernel::KernelSeries;
    /// use kerneq::zoo;
    /// // (1+μ)·Σ(μλ̄)^k·(1+λ̄): the hand convolution gives
    /// //   A_00 = 1, A_10 = A_01 = 1, A_11 = 2, A_21 = A_12 = 1, A_22 = 2.
    /// let phi = scalar_series(&[1.0, 1.0, 0.0]);
    /// let k = KernelSeries::congruence(&phi, &zoo::szego(2), &phi).unwrap();
    /// let want = [[1.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
    /// for m in 0..=2 {
    ///     for q in 0..=2 {
    ///         assert!((k.coeff(m, q)[(0, 0)].re - want[m][q]).abs() < 1e-14);
    ///     }
    /// }
    /// ```
    pub fn congruence(
        psi: &HoloSeries,
        kernel: &KernelSeries,
        phi: &HoloSeries,
    ) -> Result<KernelSeries> {
        if psi.rank() != kernel.rank {
            return Err(Error::RankMismatch(psi.rank(), kernel.rank));
        }
        if phi.rank() != kernel.rank {
            return Err(Error::RankMismatch(phi.rank(), kernel.rank));
        }
        let degree = kernel.degree.min(psi.degree()).min(phi.degree());
        let n = kernel.rank;
        // Pre-adjoint the right gauge: K ↦ Σ Ψ_a A_bc Φ_d* over a+b=m, c+d=q.
        let phi_adj: Vec<CMat> = (0..=degree).map(|d| phi.coeff(d).adjoint()).collect();
        KernelSeries::from_fn(n, degree, |m, q| {
            let mut acc = matrix::zeros(n, n);
            for a in 0..=m {
                for d in 0..=q {
                    // Ψ_a · A_{m-a, q-d} · Φ_d*
                    acc += psi.coeff(a) * kernel.coeff(m - a, q - d) * &phi_adj[d];
                }
            }
            acc
        })
    }

    /// Block-diagonal direct sum; operands are truncated to the smallest
    /// common degree.
    pub fn direct_sum(parts: &[KernelSeries]) -> Result<KernelSeries> {
        if parts.is_empty() {
            return Err(Error::EmptyList);
        }
        let degree = parts.iter().map(|p| p.degree).min().unwrap();
        let rank: usize = parts.iter().map(|p| p.rank).sum();
        KernelSeries::from_fn(rank, degree, |m, q| {
            let mut block = matrix::zeros(rank, rank);
            let mut offset = 0;
            for p in parts {
                block
                    .view_mut((offset, offset), (p.rank, p.rank))
                    .copy_from(p.coeff(m, q));
                offset += p.rank;
            }
            block
        })
    }

    /// The diagonal restriction `k(λ, λ̄) = K(λ, λ)` as a bi-series with
    /// coefficient `(p, q) = A_pq`, valid on the full `(D, D)` box.
    pub fn diagonal_restriction(&self) -> BiSeries {
        BiSeries::from_fn(self.rank, (self.degree, self.degree), |p, q| {
            self.coeff(p, q).clone()
        })
        .expect("kernel grid is a valid bi-series")
    }

    /// Series inverse of the diagonal restriction, `K(λ,λ)⁻¹`, exact on the
    /// full box. Requires `A_00` invertible.
    ///
    /// # Example
    /// ```
    /// use kerneq::zoo;
    /// // The Szegő diagonal 1/(1-λλ̄) inverts to the polynomial 1 - λλ̄.
    /// let inv = zoo::szego(3).invert_on_diagonal().unwrap();
    /// assert!((inv.coeff(0, 0)[(0, 0)].re - 1.0).abs() < 1e-14);
    /// assert!((inv.coeff(1, 1)[(0, 0)].re + 1.0).abs() < 1e-14);
    /// assert!(inv.coeff(2, 2)[(0, 0)].norm() < 1e-14);
    /// ```
    pub fn invert_on_diagonal(&self) -> Result<BiSeries> {
        self.diagonal_restriction().inverse()
    }

    /// Largest coefficient entry (scale reference for relative residuals).
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(matrix::max_abs).fold(0.0, f64::max)
    }

    /// Max coefficient distance on the common degree grid.
    pub fn max_diff(&self, rhs: &KernelSeries) -> Result<f64> {
        if self.rank != rhs.rank {
            return Err(Error::RankMismatch(self.rank, rhs.rank));
        }
        let degree = self.degree.min(rhs.degree);
        let mut worst = 0.0f64;
        for m in 0..=degree {
            for q in 0..=degree {
                worst = worst.max(matrix::max_abs_diff(self.coeff(m, q), rhs.coeff(m, q)));
            }
        }
        Ok(worst)
    }

    /// Truncate to a smaller degree (identity if `degree` is not smaller).
    pub fn truncated(&self, degree: usize) -> KernelSeries {
        let d = degree.min(self.degree);
        KernelSeries::from_fn(self.rank, d, |m, q| self.coeff(m, q).clone())
            .expect("truncation of a valid grid")
    }

    /// The stacked block Gram matrix `[A_mq]` whose positivity is the kernel
    /// non-negativity invariant.
    pub fn gram(&self) -> CMat {
        let n = self.rank;
        let side = n * (self.degree + 1);
        let mut g = matrix::zeros(side, side);
        for m in 0..=self.degree {
            for q in 0..=self.degree {
                g.view_mut((m * n, q * n), (n, n)).copy_from(self.coeff(m, q));
            }
        }
        g
    }

    /// Diagnostic report on the kernel invariants; never fails.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let scale = self.max_coeff_norm();
        let mut hermitian_residual = 0.0f64;
        for m in 0..=self.degree {
            for q in m..=self.degree {
                hermitian_residual = hermitian_residual.max(matrix::max_abs_diff(
                    self.coeff(m, q),
                    &self.coeff(q, m).adjoint(),
                ));
            }
        }
        let (eigs, _) = matrix::hermitian_eigen(&self.gram());
        let gram_min = eigs.first().copied().unwrap_or(0.0);
        let gram_max = eigs.last().copied().unwrap_or(0.0);
        let a00_condition = matrix::condition(self.coeff(0, 0));
        ValidationReport {
            rank: self.rank,
            degree: self.degree,
            coefficient_scale: scale,
            hermitian_residual,
            gram_min_eigenvalue: gram_min,
            gram_max_eigenvalue: gram_max,
            a00_condition,
            hermitian_ok: hermitian_residual <= tol.zero * scale.max(1.0),
            psd_ok: gram_min >= -tol.psd * gram_max.max(1.0),
            a00_invertible: a00_condition < 1.0 / tol.zero,
        }
    }

    /// Shorthand: `Err(InvalidKernel)` unless `validate` passes everything.
    pub fn require_valid(&self, tol: &Tolerances) -> Result<()> {
        let report = self.validate(tol);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidKernel(report.summary()))
        }
    }
}

/// Outcome of [`KernelSeries::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rank: usize,
    pub degree: usize,
    pub coefficient_scale: f64,
    pub hermitian_residual: f64,
    pub gram_min_eigenvalue: f64,
    pub gram_max_eigenvalue: f64,
    pub a00_condition: f64,
    pub hermitian_ok: bool,
    pub psd_ok: bool,
    pub a00_invertible: bool,
}

impl ValidationReport {
    /// All three invariants hold (Hermitian symmetry, positivity,
    /// invertible constant block).
    pub fn is_valid(&self) -> bool {
        self.hermitian_ok && self.psd_ok && self.a00_invertible
    }

    /// One-line human-readable digest.
    pub fn summary(&self) -> String {
        format!(
            "hermitian residual {:.3e} ({}), gram min eigenvalue {:.3e} ({}), A00 condition {:.3e} ({})",
            self.hermitian_residual,
            if self.hermitian_ok { "ok" } else { "FAIL" },
            self.gram_min_eigenvalue,
            if self.psd_ok { "ok" } else { "FAIL" },
            self.a00_condition,
            if self.a00_invertible { "ok" } else { "FAIL" },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holo::scalar_series;
    use crate::matrix::{re, ZERO};
    use crate::zoo;

    #[test]
    fn eval_degenerate_cases() {
        let k = zoo::szego(3);
        assert!((k.eval(ZERO, ZERO)[(0, 0)].re - 1.0).abs() < 1e-15);
        // Bergman at (0.5, 0): only the q = 0 column survives, and only A_00
        // is nonzero there.
        let b = zoo::bergman(2);
        assert!((b.eval(re(0.5), ZERO)[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn congruence_with_identity_is_identity() {
        let k = zoo::bergman(4);
        let id = HoloSeries::identity(1, 4);
        let k2 = KernelSeries::congruence(&id, &k, &id).unwrap();
        assert!(k.max_diff(&k2).unwrap() == 0.0);
    }

    #[test]
    fn congruence_by_constant_scales() {
        let k = zoo::szego(3);
        let s = scalar_series(&[std::f64::consts::SQRT_2, 0.0, 0.0, 0.0]);
        let k2 = KernelSeries::congruence(&s, &k, &s).unwrap();
        for m in 0..=3 {
            assert!((k2.coeff(m, m)[(0, 0)].re - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn congruence_preserves_validity() {
        let k = zoo::random_psd_kernel(2, 3, 5, 11).unwrap();
        let phi = zoo::random_invertible_holo(2, 5, 12);
        let k2 = KernelSeries::congruence(&phi, &k, &phi).unwrap();
        let report = k2.validate(&Tolerances::default());
        assert!(report.is_valid(), "{}", report.summary());
    }

    #[test]
    fn direct_sum_blocks() {
        let k = KernelSeries::direct_sum(&[zoo::szego(3), zoo::bergman(3)]).unwrap();
        assert_eq!(k.rank(), 2);
        for m in 0..=3 {
            assert!((k.coeff(m, m)[(0, 0)].re - 1.0).abs() < 1e-15);
            assert!((k.coeff(m, m)[(1, 1)].re - (m as f64 + 1.0)).abs() < 1e-15);
            assert!(k.coeff(m, m)[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn validate_flags_indefinite_constant_block() {
        let k = KernelSeries::from_fn(2, 1, |m, q| {
            if m == 0 && q == 0 {
                CMat::from_row_slice(2, 2, &[re(1.0), ZERO, ZERO, re(-1.0)])
            } else {
                matrix::zeros(2, 2)
            }
        })
        .unwrap();
        let report = k.validate(&Tolerances::default());
        assert!(!report.psd_ok);
        assert!(report.hermitian_ok);
    }

    #[test]
    fn invert_on_diagonal_round_trips() {
        let k = zoo::diagonal_kernel(&[2.0, 2.0, 2.0]).unwrap();
        let inv = k.invert_on_diagonal().unwrap();
        let prod = inv.product(&k.diagonal_restriction()).unwrap();
        let id = BiSeries::constant(matrix::eye(1));
        assert!(prod.max_diff(&id).unwrap() < 1e-14);
        // ½ - ½λλ̄ + 0·(λλ̄)² for constant weight 2.
        assert!((inv.coeff(0, 0)[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((inv.coeff(1, 1)[(0, 0)].re + 0.5).abs() < 1e-14);
        assert!(inv.coeff(2, 2)[(0, 0)].norm() < 1e-14);
    }
}
