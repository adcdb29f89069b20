//! Truncated matrix-valued holomorphic series in one variable.
//!
//! A [`HoloSeries`] is a polynomial `Φ(μ) = Σ_{m≤D} Φ_m μ^m` standing in for a
//! holomorphic germ at the origin, truncated at degree `D`. Coefficients
//! beyond `D` are *unknown*, not zero; every operation here is exact on the
//! coefficients it keeps because products and inverses of power series only
//! ever read lower-order input coefficients.

use crate::error::{Error, Result};
use crate::matrix::{self, re, CMat, C64};

/// Truncated holomorphic series `Σ_{m≤D} Φ_m μ^m` with n×n matrix
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloSeries {
    rank: usize,
    coeffs: Vec<CMat>, // degree + 1 entries
}

impl HoloSeries {
    /// Build from explicit coefficients `Φ_0, Φ_1, …` (degree = `len - 1`).
    pub fn new(rank: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyList);
        }
        for c in &coeffs {
            if c.nrows() != rank || c.ncols() != rank {
                return Err(Error::Shape(format!(
                    "holomorphic series coefficient is {}×{}, expected {rank}×{rank}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if !matrix::all_finite(c) {
                return Err(Error::Shape("non-finite series coefficient".into()));
            }
        }
        Ok(HoloSeries { rank, coeffs })
    }

    /// Build coefficientwise from a closure `m ↦ Φ_m`.
    pub fn from_fn(rank: usize, degree: usize, f: impl Fn(usize) -> CMat) -> Result<Self> {
        HoloSeries::new(rank, (0..=degree).map(f).collect())
    }

    /// The identity gauge `Φ(μ) = I` at the given degree.
    pub fn identity(rank: usize, degree: usize) -> Self {
        let mut coeffs = vec![matrix::zeros(rank, rank); degree + 1];
        coeffs[0] = matrix::eye(rank);
        HoloSeries { rank, coeffs }
    }

    /// A constant series `Φ(μ) = M`.
    pub fn constant(m: CMat, degree: usize) -> Self {
        let rank = m.nrows();
        let mut coeffs = vec![matrix::zeros(rank, rank); degree + 1];
        coeffs[0] = m;
        HoloSeries { rank, coeffs }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient `Φ_m`.
    pub fn coeff(&self, m: usize) -> &CMat {
        &self.coeffs[m]
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    /// Evaluate at a point by Horner's rule.
    pub fn eval(&self, mu: C64) -> CMat {
        let mut acc = matrix::zeros(self.rank, self.rank);
        for c in self.coeffs.iter().rev() {
            acc = acc * mu + c;
        }
        acc
    }

    /// Series product, truncated to the smaller operand degree (the
    /// coefficients beyond it would depend on unknown inputs).
    pub fn product(&self, rhs: &HoloSeries) -> Result<HoloSeries> {
        if self.rank != rhs.rank {
            return Err(Error::RankMismatch(self.rank, rhs.rank));
        }
        let degree = self.degree().min(rhs.degree());
        let mut coeffs = vec![matrix::zeros(self.rank, self.rank); degree + 1];
        for m in 0..=degree {
            for a in 0..=m {
                coeffs[m] += self.coeff(a) * rhs.coeff(m - a);
            }
        }
        Ok(HoloSeries { rank: self.rank, coeffs })
    }

    /// Multiplicative inverse as a series: `Ψ_0 = Φ_0⁻¹`,
    /// `Ψ_m = -Φ_0⁻¹ Σ_{k=1..m} Φ_k Ψ_{m-k}`. Fails if `Φ_0` is singular.
    ///
    /// # Example
    /// ```
    /// use kerneq::holo::HoloSeries;
    /// use kerneq::matrix::{re, CMat};
    /// // Φ(μ) = 1 + μ inverts to the geometric series 1 - μ + μ² - μ³.
    /// let phi = HoloSeries::from_fn(1, 3, |m| {
    ///     CMat::from_element(1, 1, re(if m <= 1 { 1.0 } else { 0.0 }))
    /// })
    /// .unwrap();
    /// let psi = phi.invert().unwrap();
    /// for m in 0..=3 {
    ///     assert!((psi.coeff(m)[(0, 0)].re - [1.0, -1.0, 1.0, -1.0][m]).abs() < 1e-14);
    /// }
    /// ```
    pub fn invert(&self) -> Result<HoloSeries> {
        let phi0_inv = matrix::inverse(self.coeff(0), "constant term of holomorphic series")?;
        let degree = self.degree();
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(phi0_inv.clone());
        for m in 1..=degree {
            let mut sum = matrix::zeros(self.rank, self.rank);
            for k in 1..=m {
                sum += self.coeff(k) * &coeffs[m - k];
            }
            coeffs.push(-(&phi0_inv * sum));
        }
        Ok(HoloSeries { rank: self.rank, coeffs })
    }

    /// Formal derivative `Φ'(μ)`; the truncation degree drops by one.
    pub fn derivative(&self) -> HoloSeries {
        if self.degree() == 0 {
            return HoloSeries::constant(matrix::zeros(self.rank, self.rank), 0);
        }
        let coeffs = (1..=self.degree())
            .map(|m| self.coeff(m).scale(m as f64))
            .collect();
        HoloSeries { rank: self.rank, coeffs }
    }

    /// The series `μ ↦ Φ(μ̄)*`, i.e. the one whose coefficients are the
    /// adjoints `Φ_m*`. It is again holomorphic, and it is the gauge factor
    /// that intertwines curvature data of congruent kernels.
    pub fn adjoint_series(&self) -> HoloSeries {
        HoloSeries {
            rank: self.rank,
            coeffs: self.coeffs.iter().map(|c| c.adjoint()).collect(),
        }
    }

    /// True when the constant term is invertible with condition number below
    /// `1 / zero_tol` — the requirement for this series to act as a gauge.
    pub fn is_invertible(&self, zero_tol: f64) -> bool {
        matrix::condition(self.coeff(0)) < 1.0 / zero_tol
    }

    /// Largest coefficient entry (scale reference for relative residuals).
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(matrix::max_abs).fold(0.0, f64::max)
    }

    /// Max-norm distance of coefficients on the common degree range.
    pub fn max_diff(&self, rhs: &HoloSeries) -> f64 {
        let degree = self.degree().min(rhs.degree());
        (0..=degree)
            .map(|m| matrix::max_abs_diff(self.coeff(m), rhs.coeff(m)))
            .fold(0.0, f64::max)
    }

    /// Scalar multiple.
    pub fn scale(&self, s: C64) -> HoloSeries {
        HoloSeries {
            rank: self.rank,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Block-diagonal direct sum of gauges.
    pub fn direct_sum(parts: &[HoloSeries]) -> Result<HoloSeries> {
        if parts.is_empty() {
            return Err(Error::EmptyList);
        }
        let degree = parts.iter().map(|p| p.degree()).min().unwrap();
        let rank: usize = parts.iter().map(|p| p.rank).sum();
        let mut coeffs = vec![matrix::zeros(rank, rank); degree + 1];
        for (m, c) in coeffs.iter_mut().enumerate() {
            let mut offset = 0;
            for p in parts {
                c.view_mut((offset, offset), (p.rank, p.rank))
                    .copy_from(p.coeff(m));
                offset += p.rank;
            }
        }
        Ok(HoloSeries { rank, coeffs })
    }
}

/// Scalar (rank-1) series from real coefficients — a test and zoo
/// convenience.
pub fn scalar_series(coeffs: &[f64]) -> HoloSeries {
    HoloSeries::new(
        1,
        coeffs.iter().map(|&x| CMat::from_element(1, 1, re(x))).collect(),
    )
    .expect("nonempty scalar series")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;

    #[test]
    fn product_truncates_to_min_degree() {
        let a = scalar_series(&[1.0, 1.0, 1.0]);
        let b = scalar_series(&[1.0, -1.0]);
        let p = a.product(&b).unwrap();
        assert_eq!(p.degree(), 1);
        // (1 + μ + μ²)(1 - μ) = 1 + 0·μ + …
        assert!((p.coeff(0)[(0, 0)] - ONE).norm() < 1e-15);
        assert!(p.coeff(1)[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn inverse_of_constant_scales() {
        let phi = HoloSeries::constant(CMat::from_element(1, 1, re(4.0)), 2);
        let psi = phi.invert().unwrap();
        assert!((psi.coeff(0)[(0, 0)].re - 0.25).abs() < 1e-15);
        assert!(psi.coeff(1)[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn inverse_round_trips_through_product() {
        // Non-commuting matrix coefficients exercise the order of factors.
        let i = C64::new(0.0, 1.0);
        let phi = HoloSeries::new(
            2,
            vec![
                CMat::from_row_slice(2, 2, &[re(1.0), re(0.5), ZERO_C, re(2.0)]),
                CMat::from_row_slice(2, 2, &[i, re(1.0), re(-0.3), ZERO_C]),
                CMat::from_row_slice(2, 2, &[re(0.2), -i, ONE, re(0.7)]),
            ],
        )
        .unwrap();
        let psi = phi.invert().unwrap();
        let prod = phi.product(&psi).unwrap();
        let id = HoloSeries::identity(2, 2);
        assert!(prod.max_diff(&id) < 1e-13);
        let prod_rev = psi.product(&phi).unwrap();
        assert!(prod_rev.max_diff(&id) < 1e-13, "series inverse is two-sided");
    }

    #[test]
    fn derivative_shifts_and_scales() {
        let phi = scalar_series(&[5.0, 3.0, 2.0]); // 5 + 3μ + 2μ²
        let d = phi.derivative(); // 3 + 4μ
        assert_eq!(d.degree(), 1);
        assert!((d.coeff(0)[(0, 0)].re - 3.0).abs() < 1e-15);
        assert!((d.coeff(1)[(0, 0)].re - 4.0).abs() < 1e-15);
    }

    const ZERO_C: C64 = C64::new(0.0, 0.0);
}
