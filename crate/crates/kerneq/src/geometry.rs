//! Metric, connection, curvature, and covariant derivatives of the
//! Hermitian holomorphic data carried by a kernel.
//!
//! Everything here is formal power-series calculus: derivatives are
//! coefficient shifts, never finite differences, and every derived object
//! carries the validity box on which its coefficients are exact.
//!
//! The central chain is
//!
//! ```text
//! kernel K  →  metric h  →  connection Θ = h⁻¹ ∂h  →  curvature 𝒦 = −∂̄Θ
//!           →  covariant derivatives 𝒦_{i,j}
//! ```
//!
//! with two metric conventions: the *direct* restriction `h(λ) = K(λ, λ)`
//! and the *omega* substitution `h(λ) = K(λ̄, λ̄)`. Identities about gauge
//! transformations are each checked in the convention under which they hold;
//! keeping both constructors explicit removes a whole class of
//! conjugation-convention mistakes.

use crate::biseries::BiSeries;
use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::kernel::KernelSeries;
use crate::matrix;
use crate::tol::Tolerances;

/// Hermitian metric `h(λ, λ̄)` with invertible constant term.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    h: BiSeries,
}

impl MetricSeries {
    /// Wrap a bi-series after checking the metric invariants: coefficient
    /// `(p,q)` adjoint-symmetric to `(q,p)` within `tol.zero`, and a
    /// positive-definite constant term.
    pub fn from_bi(h: BiSeries, tol: &Tolerances) -> Result<Self> {
        let scale = h.max_coeff_norm().max(1.0);
        if h.hermitian_residual() > tol.zero * scale {
            return Err(Error::InvalidKernel(format!(
                "metric is not Hermitian-symmetric: residual {:.3e}",
                h.hermitian_residual()
            )));
        }
        let h00 = h.coeff(0, 0);
        let (eigs, _) = matrix::hermitian_eigen(&h00);
        let min_eig = eigs.first().copied().unwrap_or(0.0);
        if min_eig <= tol.psd * scale {
            return Err(Error::NotPositiveDefinite("metric constant term"));
        }
        Ok(MetricSeries { h })
    }

    fn from_bi_unchecked(h: BiSeries) -> Self {
        MetricSeries { h }
    }

    /// Direct diagonal restriction `h(λ) = K(λ, λ)`: coefficient
    /// `(p, q) = A_pq`.
    pub fn direct(kernel: &KernelSeries, tol: &Tolerances) -> Result<Self> {
        if matrix::condition(kernel.coeff(0, 0)) >= 1.0 / tol.zero {
            return Err(Error::Singular("kernel constant term"));
        }
        MetricSeries::from_bi(kernel.diagonal_restriction(), tol)
    }

    /// Conjugated-argument restriction `h(λ) = K(λ̄, λ̄)`: coefficient
    /// `(p, q) = A_qp` (the index swap comes from `μ^m ↦ λ̄^m`,
    /// `λ̄^q ↦ λ^q`).
    pub fn omega(kernel: &KernelSeries, tol: &Tolerances) -> Result<Self> {
        if matrix::condition(kernel.coeff(0, 0)) >= 1.0 / tol.zero {
            return Err(Error::Singular("kernel constant term"));
        }
        let d = kernel.degree();
        let h = BiSeries::from_fn(kernel.rank(), (d, d), |p, q| kernel.coeff(q, p).clone())?;
        MetricSeries::from_bi(h, tol)
    }

    pub fn series(&self) -> &BiSeries {
        &self.h
    }

    pub fn rank(&self) -> usize {
        self.h.rank()
    }

    pub fn validity(&self) -> (usize, usize) {
        self.h.validity()
    }

    /// Holomorphic change of frame: `h ↦ Φ(λ)* h Φ(λ)` with `Φ(λ)*`
    /// expanded antiholomorphically. The result is again a metric (exactly
    /// Hermitian, constant term `Φ_0* h_00 Φ_0`); requires `Φ_0` invertible
    /// so the new constant term stays definite.
    pub fn gauge_transform(&self, phi: &HoloSeries) -> Result<MetricSeries> {
        if phi.rank() != self.rank() {
            return Err(Error::RankMismatch(phi.rank(), self.rank()));
        }
        if !phi.is_invertible(1e-12) {
            return Err(Error::Singular("gauge constant term"));
        }
        let left = BiSeries::from_holo_adjoint(phi);
        let right = BiSeries::from_holo(phi);
        let h = left.product(&self.h)?.product(&right)?;
        Ok(MetricSeries::from_bi_unchecked(h))
    }
}

/// Connection form `Θ = h⁻¹ ∂_λ h`.
#[derive(Debug, Clone)]
pub struct ConnectionSeries {
    theta: BiSeries,
}

impl ConnectionSeries {
    pub fn series(&self) -> &BiSeries {
        &self.theta
    }

    pub fn rank(&self) -> usize {
        self.theta.rank()
    }
}

/// `Θ = h⁻¹ ∂_λ h`; the validity box loses one λ-degree.
pub fn connection(h: &MetricSeries) -> Result<ConnectionSeries> {
    let inv = h.series().inverse()?;
    let dh = h.series().d_lambda()?;
    Ok(ConnectionSeries { theta: inv.product(&dh)? })
}

/// Curvature `𝒦 = −∂_λ̄ Θ`; the box loses one degree in each direction
/// relative to the metric.
///
/// # Example
/// ```
/// use kerneq::geometry::{curvature, MetricSeries};
/// use kerneq::tol::Tolerances;
/// use kerneq::zoo;
/// let tol = Tolerances::default();
/// let h = MetricSeries::direct(&zoo::bergman(6), &tol).unwrap();
/// let k = curvature(&h).unwrap();
/// assert!((k.coeff(0, 0)[(0, 0)].re + 2.0).abs() < 1e-12);
/// ```
pub fn curvature(h: &MetricSeries) -> Result<BiSeries> {
    let theta = connection(h)?;
    Ok(theta.theta.d_lambda_bar()?.neg())
}

/// Covariant partial derivatives `𝒦_{i,j}` for `i + j ≤ order`, produced by
/// the two recursions
///
/// ```text
/// (1)  𝒦_{i, j+1} = ∂̄ 𝒦_{i, j}
/// (2)  𝒦_{i+1, j} = ∂ 𝒦_{i, j} + [Θ, 𝒦_{i, j}]
/// ```
///
/// following the path `(0,0) → (i,0) → (i,j)` per entry: λ-derivatives via
/// (2) first, then λ̄-derivatives via (1). Entry `(0,0)` is the curvature
/// itself, and each entry's validity box shrinks accordingly.
#[derive(Debug, Clone)]
pub struct CurvatureTable {
    order: usize,
    rows: Vec<Vec<BiSeries>>, // rows[i][j] = 𝒦_{i,j}, j ≤ order − i
}

impl CurvatureTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry `𝒦_{i,j}`; panics outside `i + j ≤ order`.
    pub fn entry(&self, i: usize, j: usize) -> &BiSeries {
        assert!(i + j <= self.order, "covariant entry out of range");
        &self.rows[i][j]
    }

    /// All `(i, j, 𝒦_{i,j})` in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &BiSeries)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (i, j, e)))
    }
}

/// Build the covariant table of `h` up to `order`. Fails with
/// [`Error::EmptyValidityBox`] when the metric degree cannot support the
/// requested number of derivatives.
pub fn covariant_table(h: &MetricSeries, order: usize) -> Result<CurvatureTable> {
    let theta = connection(h)?;
    let k00 = theta.theta.d_lambda_bar()?.neg();
    let mut rows: Vec<Vec<BiSeries>> = Vec::with_capacity(order + 1);
    for i in 0..=order {
        let base = if i == 0 {
            k00.clone()
        } else {
            // (2): 𝒦_{i,0} = ∂ 𝒦_{i−1,0} + [Θ, 𝒦_{i−1,0}]
            let prev = &rows[i - 1][0];
            prev.d_lambda()?.add(&theta.theta.commutator(prev)?)?
        };
        let mut row = vec![base];
        for j in 1..=(order - i) {
            // (1): 𝒦_{i,j} = ∂̄ 𝒦_{i,j−1}
            let next = row[j - 1].d_lambda_bar()?;
            row.push(next);
        }
        rows.push(row);
    }
    Ok(CurvatureTable { order, rows })
}

/// Residual of the connection transformation law
/// `Θ_T = Φ⁻¹ Θ_S Φ + Φ⁻¹ Φ′` under a holomorphic change of frame
/// (which holds exactly when the metrics are related by
/// `h_T = Φ(λ)* h_S Φ(λ)`).
///
/// Returns the max coefficient norm of the defect over the common validity
/// box.
pub fn gauge_law_check(
    theta_t: &ConnectionSeries,
    theta_s: &ConnectionSeries,
    phi: &HoloSeries,
) -> Result<f64> {
    if theta_t.rank() != theta_s.rank() {
        return Err(Error::RankMismatch(theta_t.rank(), theta_s.rank()));
    }
    if phi.rank() != theta_s.rank() {
        return Err(Error::RankMismatch(phi.rank(), theta_s.rank()));
    }
    let phi_inv = phi.invert()?;
    let b = BiSeries::from_holo(phi);
    let b_inv = BiSeries::from_holo(&phi_inv);
    let b_prime = BiSeries::from_holo(&phi.derivative());
    let transported = b_inv.product(theta_s.series())?.product(&b)?;
    let shift = b_inv.product(&b_prime)?;
    let law = transported.add(&shift)?;
    theta_t.series().max_diff(&law)
}

/// Residual of the covariant-derivative intertwining identity for a
/// congruent pair: under the hypothesis
/// `K_S(μ,λ) = Ψ(μ) K_T(μ,λ) Φ(λ)*` (checked first, within `tol.zero`
/// relative), the series `B(λ) = Σ Φ_m* λ^m` satisfies
///
/// ```text
/// B · 𝒦_{S,i,j} = 𝒦_{T,i,j} · B        for all i, j ≥ 1,
/// ```
///
/// where both covariant tables are built from the conjugated-argument
/// metrics `h(λ) = K(λ̄, λ̄)`. Returns the max defect norm over
/// `1 ≤ i, j`, `i + j ≤ order` on the common validity boxes.
///
/// (`B` is [`HoloSeries::adjoint_series`] of `Φ`: taking plain transposes
/// instead fails for complex coefficients — the identity comes from
/// `h_S = Ψ(λ̄) · h_T · B(λ)`, and only the adjoint makes that expansion of
/// `Φ(λ̄)*` correct.)
pub fn curvature_intertwining_check(
    k_t: &KernelSeries,
    k_s: &KernelSeries,
    psi: &HoloSeries,
    phi: &HoloSeries,
    order: usize,
    tol: &Tolerances,
) -> Result<f64> {
    let reconstructed = KernelSeries::congruence(psi, k_t, phi)?;
    let defect = reconstructed.max_diff(k_s)?;
    let scale = k_s.max_coeff_norm().max(1.0);
    if defect > tol.zero * scale {
        return Err(Error::HypothesisViolated(format!(
            "K_S does not match Ψ·K_T·Φ*: defect {defect:.3e} (scale {scale:.3e})"
        )));
    }
    let h_t = MetricSeries::omega(k_t, tol)?;
    let h_s = MetricSeries::omega(k_s, tol)?;
    let table_t = covariant_table(&h_t, order)?;
    let table_s = covariant_table(&h_s, order)?;
    let b = BiSeries::from_holo(&phi.adjoint_series());
    let mut worst = 0.0f64;
    for i in 1..=order {
        for j in 1..=(order.saturating_sub(i)) {
            let lhs = b.product(table_s.entry(i, j))?;
            let rhs = table_t.entry(i, j).product(&b)?;
            worst = worst.max(lhs.max_diff(&rhs)?);
        }
    }
    Ok(worst)
}

/// Characteristic-polynomial coefficients of the curvature as scalar
/// bi-series: `[e₁, …, e_n]` with `e₁ = tr 𝒦` and `e_n = det 𝒦`, each on
/// the curvature's validity box.
///
/// These are the frame-independent content of the curvature: a holomorphic
/// change of frame only conjugates `𝒦`, so its eigenvalues — equivalently
/// these coefficients — are preserved, while the matrix entries are not.
/// Computed through power sums `p_k = tr 𝒦^k` and the Newton identities
/// `k e_k = Σ_{i=1..k} (−1)^{i−1} e_{k−i} p_i`, which avoids sorting
/// eigenvalue branches of an analytic family.
pub fn curvature_eigen_invariants(h: &MetricSeries) -> Result<Vec<BiSeries>> {
    let k = curvature(h)?;
    let n = k.rank();
    // Power sums p_1..p_n.
    let mut powers = Vec::with_capacity(n);
    let mut acc = k.clone();
    for step in 0..n {
        if step > 0 {
            acc = acc.product(&k)?;
        }
        powers.push(acc.trace());
    }
    // Newton's identities for elementary symmetric functions.
    let one = BiSeries::constant(matrix::eye(1));
    let mut elems: Vec<BiSeries> = vec![one];
    for k_idx in 1..=n {
        let mut sum: Option<BiSeries> = None;
        for i in 1..=k_idx {
            let term = elems[k_idx - i].product(&powers[i - 1])?;
            let term = if i % 2 == 0 { term.neg() } else { term };
            sum = Some(match sum {
                None => term,
                Some(s) => s.add(&term)?,
            });
        }
        let e_k = sum.expect("k_idx ≥ 1").scale(matrix::re(1.0 / k_idx as f64));
        elems.push(e_k);
    }
    Ok(elems.into_iter().skip(1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSeries;
    use crate::matrix::{re, C64, CMat, ZERO};
    use crate::zoo;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn omega_metric_swaps_indices() {
        // A_10 = i, A_01 = −i: the omega metric must carry −i at (1,0).
        let k = KernelSeries::from_fn(1, 1, |m, q| {
            let v = match (m, q) {
                (0, 0) => re(1.0),
                (1, 0) => C64::new(0.0, 1.0),
                (0, 1) => C64::new(0.0, -1.0),
                _ => re(0.25),
            };
            CMat::from_element(1, 1, v)
        })
        .unwrap();
        let h = MetricSeries::omega(&k, &tol()).unwrap();
        assert!((h.series().coeff(1, 0)[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((h.series().coeff(0, 1)[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn szego_connection_and_curvature() {
        let h = MetricSeries::direct(&zoo::szego(6), &tol()).unwrap();
        let theta = connection(&h).unwrap();
        // Θ = λ̄ + λλ̄² + …: coefficient (0,1) is 1, (1,2) is 1, (1,0) is 0.
        assert!((theta.series().coeff(0, 1)[(0, 0)].re - 1.0).abs() < 1e-13);
        assert!((theta.series().coeff(1, 2)[(0, 0)].re - 1.0).abs() < 1e-13);
        assert!(theta.series().coeff(1, 0)[(0, 0)].norm() < 1e-13);
        let k = curvature(&h).unwrap();
        // 𝒦 = −∂̄(λ̄/(1−λλ̄)) = −1/(1−λλ̄)² = −Σ (k+1)(λλ̄)^k.
        assert!((k.coeff(0, 0)[(0, 0)].re + 1.0).abs() < 1e-13);
        assert!((k.coeff(1, 1)[(0, 0)].re + 2.0).abs() < 1e-12);
        assert!((k.coeff(2, 2)[(0, 0)].re + 3.0).abs() < 1e-12);
    }

    #[test]
    fn covariant_table_szego_values() {
        let h = MetricSeries::direct(&zoo::szego(8), &tol()).unwrap();
        let table = covariant_table(&h, 3).unwrap();
        // (1,0) at origin vanishes; (1,1) at origin is −2.
        assert!(table.entry(1, 0).coeff(0, 0)[(0, 0)].norm() < 1e-12);
        assert!((table.entry(1, 1).coeff(0, 0)[(0, 0)].re + 2.0).abs() < 1e-12);
        // Recursion (1) is definitional: entry (0,2) = ∂̄ entry (0,1).
        let lhs = table.entry(0, 2);
        let rhs = table.entry(0, 1).d_lambda_bar().unwrap();
        assert!(lhs.max_diff(&rhs).unwrap() == 0.0);
    }

    #[test]
    fn covariant_table_needs_degree() {
        let h = MetricSeries::direct(&zoo::szego(2), &tol()).unwrap();
        // Curvature box is (1,1); order 2 asks for a third λ-derivative of h.
        assert!(covariant_table(&h, 2).is_err());
        assert!(covariant_table(&h, 1).is_ok());
    }

    #[test]
    fn identity_metric_is_flat() {
        let k = KernelSeries::from_fn(2, 4, |m, q| {
            if m == 0 && q == 0 {
                matrix::eye(2)
            } else {
                matrix::zeros(2, 2)
            }
        })
        .unwrap();
        let h = MetricSeries::direct(&k, &tol()).unwrap();
        assert!(curvature(&h).unwrap().max_coeff_norm() == 0.0);
        let table = covariant_table(&h, 2).unwrap();
        for (_, _, entry) in table.iter() {
            assert!(entry.max_coeff_norm() == 0.0);
        }
    }

    #[test]
    fn gauge_law_holds_for_congruent_metrics() {
        for seed in 0..5 {
            let k = zoo::random_psd_kernel(2, 6, 0, 100 + seed).unwrap();
            let h_s = MetricSeries::direct(&k, &tol()).unwrap();
            let phi = zoo::random_invertible_holo(2, 6, 200 + seed);
            let h_t = h_s.gauge_transform(&phi).unwrap();
            let theta_s = connection(&h_s).unwrap();
            let theta_t = connection(&h_t).unwrap();
            let residual = gauge_law_check(&theta_t, &theta_s, &phi).unwrap();
            assert!(residual < 1e-8, "seed {seed}: residual {residual:.3e}");
        }
    }

    #[test]
    fn gauge_law_constant_unitary_noop() {
        let h = MetricSeries::direct(&zoo::szego(5), &tol()).unwrap();
        let theta = connection(&h).unwrap();
        let phi = HoloSeries::constant(CMat::from_element(1, 1, re(3.0)), 0);
        // Scalar constant gauge: Φ⁻¹ΘΦ = Θ and Φ′ = 0.
        let residual = gauge_law_check(&theta, &theta, &phi).unwrap();
        assert!(residual == 0.0);
    }

    #[test]
    fn eigen_invariants_of_direct_sum() {
        let sum = KernelSeries::direct_sum(&[zoo::szego(5), zoo::bergman(5)]).unwrap();
        let h = MetricSeries::direct(&sum, &tol()).unwrap();
        let invariants = curvature_eigen_invariants(&h).unwrap();
        assert_eq!(invariants.len(), 2);
        let trace0 = invariants[0].coeff(0, 0)[(0, 0)];
        let det0 = invariants[1].coeff(0, 0)[(0, 0)];
        assert!((trace0.re + 3.0).abs() < 1e-12, "trace {trace0}");
        assert!((det0.re - 2.0).abs() < 1e-12, "det {det0}");
    }

    #[test]
    fn eigen_invariants_are_gauge_invariant() {
        for seed in 0..3 {
            let k = zoo::random_psd_kernel(2, 5, 0, 300 + seed).unwrap();
            let h = MetricSeries::direct(&k, &tol()).unwrap();
            let phi = zoo::random_invertible_holo(2, 5, 400 + seed);
            let h2 = h.gauge_transform(&phi).unwrap();
            let inv1 = curvature_eigen_invariants(&h).unwrap();
            let inv2 = curvature_eigen_invariants(&h2).unwrap();
            for (a, b) in inv1.iter().zip(&inv2) {
                let diff = a.max_diff(b).unwrap();
                let scale = a.max_coeff_norm().max(1.0);
                assert!(diff < 1e-8 * scale, "seed {seed}: diff {diff:.3e}");
            }
            // The curvature itself is only similar, not equal.
            let k1 = curvature(&h).unwrap();
            let k2 = curvature(&h2).unwrap();
            assert!(k1.max_diff(&k2).unwrap() > 1e-6);
        }
    }

    #[test]
    fn intertwining_check_accepts_congruent_pair() {
        for seed in 0..3 {
            let k_t = zoo::random_psd_kernel(2, 7, 0, 500 + seed).unwrap();
            let phi = zoo::random_invertible_holo(2, 7, 600 + seed);
            let k_s = KernelSeries::congruence(&phi, &k_t, &phi).unwrap();
            let residual =
                curvature_intertwining_check(&k_t, &k_s, &phi, &phi, 3, &tol()).unwrap();
            assert!(residual < 1e-8, "seed {seed}: residual {residual:.3e}");
        }
    }

    #[test]
    fn intertwining_check_rejects_wrong_hypothesis() {
        let k_t = zoo::szego(5);
        let k_s = zoo::bergman(5);
        let id = HoloSeries::identity(1, 5);
        let err = curvature_intertwining_check(&k_t, &k_s, &id, &id, 2, &tol());
        assert!(matches!(err, Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn curvature_matches_finite_difference_of_log_metric() {
        // Independent oracle for rank 1: 𝒦 = −∂∂̄ log h = −¼ Δ log h,
        // five-point stencil with step 1e-4, at points inside |λ| ≤ 0.3.
        let delta = 1e-4;
        for (kernel, _name) in [(zoo::szego(9), "szego"), (zoo::bergman(9), "bergman")] {
            let h = MetricSeries::direct(&kernel, &tol()).unwrap();
            let k = curvature(&h).unwrap();
            let log_h = |z: C64| -> f64 { h.series().eval(z)[(0, 0)].re.ln() };
            for point in [
                C64::new(0.0, 0.0),
                C64::new(0.2, 0.1),
                C64::new(-0.15, 0.25),
                C64::new(0.3, 0.0),
            ] {
                let laplacian = (log_h(point + C64::new(delta, 0.0))
                    + log_h(point - C64::new(delta, 0.0))
                    + log_h(point + C64::new(0.0, delta))
                    + log_h(point - C64::new(0.0, delta))
                    - 4.0 * log_h(point))
                    / (delta * delta);
                let oracle = -laplacian / 4.0;
                let series_value = k.eval(point)[(0, 0)].re;
                assert!(
                    (series_value - oracle).abs() < 1e-5,
                    "at {point}: series {series_value} vs finite-difference {oracle}"
                );
            }
        }
    }

    #[test]
    fn metric_rejects_indefinite_constant_term() {
        let bad = BiSeries::from_fn(1, (1, 1), |p, q| {
            CMat::from_element(1, 1, if p == 0 && q == 0 { ZERO } else { re(1.0) })
        })
        .unwrap();
        assert!(MetricSeries::from_bi(bad, &tol()).is_err());
    }
}
