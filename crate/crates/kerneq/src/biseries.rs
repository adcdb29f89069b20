//! Truncated series in `λ` and `λ̄` with matrix coefficients, carrying a
//! validity box.
//!
//! Everything downstream of a kernel's diagonal restriction — metrics,
//! connections, curvatures, the antiholomorphy quotient — lives in the ring
//! of formal series `Σ C_pq λ^p λ̄^q`. Truncation interacts with arithmetic in
//! exactly one dangerous way: derivatives and products *shrink* the region
//! where computed coefficients still agree with the untruncated calculation.
//! [`BiSeries`] tracks that region as a **validity box** `(p ≤ Bλ, q ≤ Bλ̄)`:
//! inside the box, stored coefficients (zero where nothing is stored) are
//! exact images of the infinite computation; outside it they are unknown and
//! no operation here will read them. Boxes only ever shrink, and comparisons
//! are restricted to box intersections.
//!
//! A box component can be *unbounded* (for series that are exactly
//! polynomial in one of the variables, e.g. a holomorphic gauge embedded as
//! a bi-series, whose `λ̄`-coefficients are all exactly zero).

use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::matrix::{self, re, CMat, C64};

/// Marker for a box component with no truncation in that variable.
pub const UNBOUNDED: usize = usize::MAX / 4;

/// A validity box: degrees `(p, q)` with `p ≤ .0`, `q ≤ .1` are exact.
pub type Box2 = (usize, usize);

fn box_min(a: Box2, b: Box2) -> Box2 {
    (a.0.min(b.0), a.1.min(b.1))
}

fn clamp_unbounded(x: usize) -> usize {
    x.min(UNBOUNDED)
}

/// Truncated bi-series `Σ_{p,q} C_pq λ^p λ̄^q` with n×n matrix coefficients
/// and a validity box.
#[derive(Debug, Clone)]
pub struct BiSeries {
    rank: usize,
    /// Stored degree bounds; the grid has `(stored.0+1)·(stored.1+1)`
    /// entries. Inside the validity box but beyond the grid, coefficients
    /// are exactly zero.
    stored: Box2,
    validity: Box2,
    coeffs: Vec<CMat>, // row-major in (p, q): index p·(stored.1+1) + q
}

impl BiSeries {
    /// Build from a full coefficient grid covering `0..=stored` in both
    /// variables, valid on `validity ⊇ stored`.
    pub fn from_grid(rank: usize, stored: Box2, validity: Box2, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.len() != (stored.0 + 1) * (stored.1 + 1) {
            return Err(Error::Shape(format!(
                "coefficient grid holds {} matrices, expected {}",
                coeffs.len(),
                (stored.0 + 1) * (stored.1 + 1)
            )));
        }
        if stored.0 > validity.0 || stored.1 > validity.1 {
            return Err(Error::Shape(
                "stored degrees exceed the validity box".into(),
            ));
        }
        for c in &coeffs {
            if c.nrows() != rank || c.ncols() != rank {
                return Err(Error::Shape(format!(
                    "bi-series coefficient is {}×{}, expected {rank}×{rank}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if !matrix::all_finite(c) {
                return Err(Error::Shape("non-finite bi-series coefficient".into()));
            }
        }
        Ok(BiSeries { rank, stored, validity, coeffs })
    }

    /// Build coefficientwise on a finite box (stored = validity).
    pub fn from_fn(
        rank: usize,
        validity: Box2,
        f: impl Fn(usize, usize) -> CMat,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity((validity.0 + 1) * (validity.1 + 1));
        for p in 0..=validity.0 {
            for q in 0..=validity.1 {
                coeffs.push(f(p, q));
            }
        }
        BiSeries::from_grid(rank, validity, validity, coeffs)
    }

    /// A constant series, exact everywhere.
    pub fn constant(m: CMat) -> Self {
        BiSeries {
            rank: m.nrows(),
            stored: (0, 0),
            validity: (UNBOUNDED, UNBOUNDED),
            coeffs: vec![m],
        }
    }

    /// Embed a holomorphic series: coefficients at `(m, 0)`. All
    /// `λ̄`-coefficients are exactly zero, so the box is unbounded in `λ̄`.
    pub fn from_holo(phi: &HoloSeries) -> Self {
        BiSeries {
            rank: phi.rank(),
            stored: (phi.degree(), 0),
            validity: (phi.degree(), UNBOUNDED),
            coeffs: phi.coeffs().to_vec(),
        }
    }

    /// Embed the pointwise adjoint `λ ↦ Φ(λ)*` of a holomorphic series:
    /// coefficients `Φ_m*` at `(0, m)`, unbounded in `λ`.
    pub fn from_holo_adjoint(phi: &HoloSeries) -> Self {
        BiSeries {
            rank: phi.rank(),
            stored: (0, phi.degree()),
            validity: (UNBOUNDED, phi.degree()),
            coeffs: phi.coeffs().iter().map(|c| c.adjoint()).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The validity box. Components equal to [`UNBOUNDED`] mean "exact at
    /// every degree in that variable".
    pub fn validity(&self) -> Box2 {
        self.validity
    }

    /// Stored degree bounds (everything beyond, inside the box, is zero).
    pub fn stored(&self) -> Box2 {
        self.stored
    }

    fn grid_index(&self, p: usize, q: usize) -> usize {
        p * (self.stored.1 + 1) + q
    }

    /// Coefficient `C_pq`. Panics outside the validity box — reading there
    /// is a bookkeeping bug, not a numerical question.
    pub fn coeff(&self, p: usize, q: usize) -> CMat {
        assert!(
            p <= self.validity.0 && q <= self.validity.1,
            "coefficient ({p},{q}) read outside validity box {:?}",
            self.validity
        );
        if p <= self.stored.0 && q <= self.stored.1 {
            self.coeffs[self.grid_index(p, q)].clone()
        } else {
            matrix::zeros(self.rank, self.rank)
        }
    }

    fn coeff_ref(&self, p: usize, q: usize) -> Option<&CMat> {
        if p <= self.stored.0 && q <= self.stored.1 {
            Some(&self.coeffs[self.grid_index(p, q)])
        } else {
            None
        }
    }

    /// Pointwise sum; the result is valid on the box intersection.
    pub fn add(&self, rhs: &BiSeries) -> Result<BiSeries> {
        self.combine(rhs, |a, b| a + b)
    }

    /// Pointwise difference; the result is valid on the box intersection.
    pub fn sub(&self, rhs: &BiSeries) -> Result<BiSeries> {
        self.combine(rhs, |a, b| a - b)
    }

    fn combine(&self, rhs: &BiSeries, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<BiSeries> {
        if self.rank != rhs.rank {
            return Err(Error::RankMismatch(self.rank, rhs.rank));
        }
        let validity = box_min(self.validity, rhs.validity);
        let stored = box_min(
            (self.stored.0.max(rhs.stored.0), self.stored.1.max(rhs.stored.1)),
            validity,
        );
        let zero = matrix::zeros(self.rank, self.rank);
        let mut coeffs = Vec::with_capacity((stored.0 + 1) * (stored.1 + 1));
        for p in 0..=stored.0 {
            for q in 0..=stored.1 {
                let a = self.coeff_ref(p, q).unwrap_or(&zero);
                let b = rhs.coeff_ref(p, q).unwrap_or(&zero);
                coeffs.push(f(a, b));
            }
        }
        BiSeries::from_grid(self.rank, stored, validity, coeffs)
    }

    /// Series product. Output coefficient `(p,q)` reads inputs only at
    /// degrees `≤ (p,q)`, so the result is exact on the box intersection.
    pub fn product(&self, rhs: &BiSeries) -> Result<BiSeries> {
        if self.rank != rhs.rank {
            return Err(Error::RankMismatch(self.rank, rhs.rank));
        }
        let validity = box_min(self.validity, rhs.validity);
        let stored = box_min(
            (
                clamp_unbounded(self.stored.0 + rhs.stored.0),
                clamp_unbounded(self.stored.1 + rhs.stored.1),
            ),
            validity,
        );
        let mut coeffs = vec![matrix::zeros(self.rank, self.rank); (stored.0 + 1) * (stored.1 + 1)];
        // Convolve stored grids only; everything else contributes zero.
        for pa in 0..=self.stored.0 {
            for qa in 0..=self.stored.1 {
                let a = &self.coeffs[self.grid_index(pa, qa)];
                if matrix::max_abs(a) == 0.0 {
                    continue;
                }
                for pb in 0..=rhs.stored.0 {
                    let p = pa + pb;
                    if p > stored.0 {
                        break;
                    }
                    for qb in 0..=rhs.stored.1 {
                        let q = qa + qb;
                        if q > stored.1 {
                            break;
                        }
                        let b = &rhs.coeffs[rhs.grid_index(pb, qb)];
                        coeffs[p * (stored.1 + 1) + q] += a * b;
                    }
                }
            }
        }
        BiSeries::from_grid(self.rank, stored, validity, coeffs)
    }

    /// `a·b - b·a`.
    pub fn commutator(&self, rhs: &BiSeries) -> Result<BiSeries> {
        self.product(rhs)?.sub(&rhs.product(self)?)
    }

    /// Multiplicative inverse by order-by-order recursion from
    /// `C_00 = (constant term)⁻¹`. Each output coefficient depends only on
    /// inputs of lower or equal degree, so the full validity box survives.
    /// Requires a finite box and an invertible constant term.
    pub fn inverse(&self) -> Result<BiSeries> {
        if self.validity.0 >= UNBOUNDED || self.validity.1 >= UNBOUNDED {
            return Err(Error::InvalidParameter(
                "series inverse needs a finite validity box".into(),
            ));
        }
        let k00_inv = matrix::inverse(&self.coeff(0, 0), "constant term of bi-series")?;
        let (bl, blb) = self.validity;
        let mut inv = vec![matrix::zeros(self.rank, self.rank); (bl + 1) * (blb + 1)];
        let idx = |p: usize, q: usize| p * (blb + 1) + q;
        for p in 0..=bl {
            for q in 0..=blb {
                if p == 0 && q == 0 {
                    inv[0] = k00_inv.clone();
                    continue;
                }
                // (M·K)_pq = Σ_{a≤p, b≤q} M_ab K_{p-a,q-b} must vanish;
                // solve for M_pq against K_00.
                let mut sum = matrix::zeros(self.rank, self.rank);
                for a in 0..=p {
                    for b in 0..=q {
                        if a == p && b == q {
                            continue;
                        }
                        if let Some(k) = self.coeff_ref(p - a, q - b) {
                            sum += &inv[idx(a, b)] * k;
                        }
                    }
                }
                inv[idx(p, q)] = -(sum * &k00_inv);
            }
        }
        BiSeries::from_grid(self.rank, (bl, blb), (bl, blb), inv)
    }

    /// Formal `∂/∂λ`: coefficient `(p,q) ← (p+1)·C_{p+1,q}`. The box loses
    /// one degree in `λ`; an already-exhausted box is an error.
    pub fn d_lambda(&self) -> Result<BiSeries> {
        if self.validity.0 == 0 {
            return Err(Error::EmptyValidityBox);
        }
        let validity = (
            if self.validity.0 >= UNBOUNDED { UNBOUNDED } else { self.validity.0 - 1 },
            self.validity.1,
        );
        let stored = (self.stored.0.saturating_sub(1), self.stored.1);
        let mut coeffs = Vec::with_capacity((stored.0 + 1) * (stored.1 + 1));
        for p in 0..=stored.0 {
            for q in 0..=stored.1 {
                let c = self
                    .coeff_ref(p + 1, q)
                    .map(|m| m.scale((p + 1) as f64))
                    .unwrap_or_else(|| matrix::zeros(self.rank, self.rank));
                coeffs.push(c);
            }
        }
        BiSeries::from_grid(self.rank, box_min(stored, validity), validity, coeffs)
    }

    /// Formal `∂/∂λ̄`, mirror of [`BiSeries::d_lambda`].
    pub fn d_lambda_bar(&self) -> Result<BiSeries> {
        if self.validity.1 == 0 {
            return Err(Error::EmptyValidityBox);
        }
        let validity = (
            self.validity.0,
            if self.validity.1 >= UNBOUNDED { UNBOUNDED } else { self.validity.1 - 1 },
        );
        let stored = (self.stored.0, self.stored.1.saturating_sub(1));
        let mut coeffs = Vec::with_capacity((stored.0 + 1) * (stored.1 + 1));
        for p in 0..=stored.0 {
            for q in 0..=stored.1 {
                let c = self
                    .coeff_ref(p, q + 1)
                    .map(|m| m.scale((q + 1) as f64))
                    .unwrap_or_else(|| matrix::zeros(self.rank, self.rank));
                coeffs.push(c);
            }
        }
        BiSeries::from_grid(self.rank, box_min(stored, validity), validity, coeffs)
    }

    /// Negate every coefficient.
    pub fn neg(&self) -> BiSeries {
        BiSeries {
            rank: self.rank,
            stored: self.stored,
            validity: self.validity,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// Scale every coefficient.
    pub fn scale(&self, s: C64) -> BiSeries {
        BiSeries {
            rank: self.rank,
            stored: self.stored,
            validity: self.validity,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Trace as a rank-1 bi-series (same boxes).
    pub fn trace(&self) -> BiSeries {
        BiSeries {
            rank: 1,
            stored: self.stored,
            validity: self.validity,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| CMat::from_element(1, 1, c.diagonal().sum()))
                .collect(),
        }
    }

    /// Evaluate at a point: `Σ C_pq λ^p λ̄^q` over the stored grid. Only
    /// meaningful well inside the disc of the underlying germ.
    pub fn eval(&self, lambda: C64) -> CMat {
        let lb = lambda.conj();
        let mut acc = matrix::zeros(self.rank, self.rank);
        let mut lp = re(1.0);
        for p in 0..=self.stored.0 {
            let mut w = lp;
            for q in 0..=self.stored.1 {
                acc += &self.coeffs[self.grid_index(p, q)] * w;
                w *= lb;
            }
            lp *= lambda;
        }
        acc
    }

    /// Largest stored coefficient entry.
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(matrix::max_abs).fold(0.0, f64::max)
    }

    /// Largest coefficient norm over the intersection of the validity box
    /// with `p ≥ min_p` (used to measure "is this series holomorphic /
    /// antiholomorphic beyond a given order").
    pub fn max_coeff_norm_from_degree(&self, min_p: usize) -> f64 {
        let mut worst = 0.0f64;
        for p in min_p..=self.stored.0 {
            for q in 0..=self.stored.1 {
                worst = worst.max(matrix::max_abs(&self.coeffs[self.grid_index(p, q)]));
            }
        }
        worst
    }

    /// Max coefficient distance on the box intersection.
    pub fn max_diff(&self, rhs: &BiSeries) -> Result<f64> {
        if self.rank != rhs.rank {
            return Err(Error::RankMismatch(self.rank, rhs.rank));
        }
        let common = box_min(self.validity, rhs.validity);
        let reach = box_min(
            (self.stored.0.max(rhs.stored.0), self.stored.1.max(rhs.stored.1)),
            common,
        );
        let zero = matrix::zeros(self.rank, self.rank);
        let mut worst = 0.0f64;
        for p in 0..=reach.0 {
            for q in 0..=reach.1 {
                let a = self.coeff_ref(p, q).unwrap_or(&zero);
                let b = rhs.coeff_ref(p, q).unwrap_or(&zero);
                worst = worst.max(matrix::max_abs_diff(a, b));
            }
        }
        Ok(worst)
    }

    /// Residual of the Hermitian-pairing symmetry `C_pq = (C_qp)*`, over the
    /// symmetric part of the validity box.
    pub fn hermitian_residual(&self) -> f64 {
        let side = self
            .stored
            .0
            .max(self.stored.1)
            .min(self.validity.0)
            .min(self.validity.1);
        let zero = matrix::zeros(self.rank, self.rank);
        let mut worst = 0.0f64;
        for p in 0..=side {
            for q in p..=side {
                let a = self.coeff_ref(p, q).unwrap_or(&zero);
                let b = self.coeff_ref(q, p).unwrap_or(&zero);
                worst = worst.max(matrix::max_abs_diff(a, &b.adjoint()));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holo::scalar_series;
    use crate::matrix::{eye, ONE};

    /// Scalar bi-series from a small real grid (test helper).
    fn scalar_grid(grid: &[&[f64]]) -> BiSeries {
        let rows = grid.len();
        let cols = grid[0].len();
        BiSeries::from_fn(1, (rows - 1, cols - 1), |p, q| {
            CMat::from_element(1, 1, re(grid[p][q]))
        })
        .unwrap()
    }

    #[test]
    fn product_intersects_boxes_and_convolves() {
        // (1 + λλ̄) · (1 - λλ̄) = 1 - (λλ̄)², exact on the (2,2) grid... but
        // operand boxes are (1,1), so the product is only valid there.
        let a = scalar_grid(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = scalar_grid(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let p = a.product(&b).unwrap();
        assert_eq!(p.validity(), (1, 1));
        assert!((p.coeff(0, 0)[(0, 0)] - ONE).norm() < 1e-15);
        assert!(p.coeff(1, 1)[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn inverse_matches_hand_computed_geometric_series() {
        // 1/(1 - λλ̄) = Σ (λλ̄)^k on any finite box.
        let one_minus = scalar_grid(&[&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let inv = one_minus.inverse().unwrap();
        for p in 0..=2 {
            for q in 0..=2 {
                let want = if p == q { 1.0 } else { 0.0 };
                assert!(
                    (inv.coeff(p, q)[(0, 0)].re - want).abs() < 1e-14,
                    "coefficient ({p},{q})"
                );
            }
        }
    }

    #[test]
    fn inverse_times_original_is_identity_on_box() {
        let i = C64::new(0.0, 1.0);
        let m = BiSeries::from_fn(2, (2, 2), |p, q| {
            if p == 0 && q == 0 {
                CMat::from_row_slice(2, 2, &[re(2.0), re(0.3), re(0.3), re(1.5)])
            } else {
                CMat::from_row_slice(
                    2,
                    2,
                    &[
                        re(0.1 * (p as f64 + q as f64)),
                        i.scale(0.2 * p as f64),
                        -i.scale(0.2 * q as f64),
                        re(0.05),
                    ],
                )
            }
        })
        .unwrap();
        let inv = m.inverse().unwrap();
        let prod = m.product(&inv).unwrap();
        let id = BiSeries::constant(eye(2));
        assert!(prod.max_diff(&id).unwrap() < 1e-13);
        let prod_rev = inv.product(&m).unwrap();
        assert!(prod_rev.max_diff(&id).unwrap() < 1e-13);
    }

    #[test]
    fn derivatives_shift_boxes() {
        let s = scalar_grid(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let dl = s.d_lambda().unwrap();
        assert_eq!(dl.validity(), (0, 1));
        assert!((dl.coeff(0, 0)[(0, 0)].re - 3.0).abs() < 1e-15);
        assert!((dl.coeff(0, 1)[(0, 0)].re - 4.0).abs() < 1e-15);
        let dlb = s.d_lambda_bar().unwrap();
        assert_eq!(dlb.validity(), (1, 0));
        assert!((dlb.coeff(1, 0)[(0, 0)].re - 4.0).abs() < 1e-15);
        assert!(dl.d_lambda().is_err(), "box exhausted in λ");
    }

    #[test]
    fn holo_embeddings_are_polynomially_exact() {
        let phi = scalar_series(&[1.0, 2.0]);
        let h = BiSeries::from_holo(&phi);
        assert_eq!(h.validity().1, UNBOUNDED);
        // λ̄-derivative of a holomorphic embed is identically zero with an
        // unbounded box still unbounded in λ̄.
        let d = h.d_lambda_bar().unwrap();
        assert_eq!(d.max_coeff_norm(), 0.0);
        let a = BiSeries::from_holo_adjoint(&phi);
        assert_eq!(a.validity().0, UNBOUNDED);
        assert!((a.coeff(0, 1)[(0, 0)].re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_exactness_under_degree_growth() {
        // Computing at a larger degree must reproduce the smaller box.
        let weights = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let grid_small = BiSeries::from_fn(1, (3, 3), |p, q| {
            CMat::from_element(1, 1, re(if p == q { weights[p] } else { 0.0 }))
        })
        .unwrap();
        let grid_large = BiSeries::from_fn(1, (5, 5), |p, q| {
            CMat::from_element(1, 1, re(if p == q { weights[p] } else { 0.0 }))
        })
        .unwrap();
        let inv_small = grid_small.inverse().unwrap();
        let inv_large = grid_large.inverse().unwrap();
        assert!(inv_small.max_diff(&inv_large).unwrap() < 1e-12);
    }
}
