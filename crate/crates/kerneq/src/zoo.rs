//! Stock kernels and seeded random generators.
//!
//! Everything random here is driven by an explicit `u64` seed through a
//! counter-based stream cipher, so a (seed, shape) pair always reproduces the
//! same object — across runs, platforms, and call sites.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::kernel::KernelSeries;
use crate::matrix::{self, CMat, C64};

/// Scalar diagonal kernel `Σ a_k (μλ̄)^k` from its weight sequence;
/// `weights[k]` must be positive. Degree is `weights.len() - 1`.
pub fn diagonal_kernel(weights: &[f64]) -> Result<KernelSeries> {
    if weights.is_empty() {
        return Err(Error::EmptyList);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(
            "diagonal kernel weights must be positive and finite".into(),
        ));
    }
    let degree = weights.len() - 1;
    KernelSeries::from_fn(1, degree, |m, q| {
        if m == q {
            CMat::from_element(1, 1, matrix::re(weights[m]))
        } else {
            matrix::zeros(1, 1)
        }
    })
}

/// Weights `a_k = α(α+1)⋯(α+k−1)/k!` of the generalized Bergman kernel
/// `(1−μλ̄)^{−α}`.
pub fn bergman_alpha_weights(alpha: f64, degree: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(degree + 1);
    let mut w = 1.0;
    weights.push(w);
    for k in 0..degree {
        w *= (alpha + k as f64) / (k as f64 + 1.0);
        weights.push(w);
    }
    weights
}

/// Truncation of `(1−μλ̄)^{−α}`, `α > 0`. `α = 1` is the Szegő kernel,
/// `α = 2` the Bergman kernel.
pub fn bergman_alpha(alpha: f64, degree: usize) -> Result<KernelSeries> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bergman exponent must be positive, got {alpha}"
        )));
    }
    diagonal_kernel(&bergman_alpha_weights(alpha, degree))
}

/// Szegő kernel `1/(1−μλ̄)` truncated at `degree` (all weights 1).
pub fn szego(degree: usize) -> KernelSeries {
    bergman_alpha(1.0, degree).expect("alpha = 1 is valid")
}

/// Bergman kernel `1/(1−μλ̄)²` truncated at `degree` (weights `k+1`).
pub fn bergman(degree: usize) -> KernelSeries {
    bergman_alpha(2.0, degree).expect("alpha = 2 is valid")
}

/// Rank-2 jet extension of a scalar diagonal kernel: the kernel of the
/// span of `(f, f′)` pairs,
///
/// ```text
/// K_jet = [ K      ∂̄K  ]
///         [ ∂K    ∂∂̄K ] .
/// ```
///
/// Coefficientwise, with scalar weights `a_k`:
/// `A_mm = diag(a_m, (m+1)² a_{m+1})`, `A_{q+1,q}` has `(q+1)a_{q+1}` in the
/// top-right entry, `A_{m,m+1}` its adjoint, everything else zero. The top
/// weight `a_{D+1}` entering the last diagonal block is taken as `0`, which
/// is exactly the truncation of the jet of the degree-`D+1` kernel.
///
/// The result is positive (each block grid is a Gram matrix of truncated
/// jets) and irreducible, but *not* normalized: `A_10 ≠ 0`.
pub fn jet_kernel(weights: &[f64]) -> Result<KernelSeries> {
    if weights.is_empty() {
        return Err(Error::EmptyList);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(
            "jet kernel weights must be positive and finite".into(),
        ));
    }
    let degree = weights.len() - 1;
    let a = |k: usize| if k <= degree { weights[k] } else { 0.0 };
    KernelSeries::from_fn(2, degree, |m, q| {
        let mut block = matrix::zeros(2, 2);
        if m == q {
            block[(0, 0)] = matrix::re(a(m));
            block[(1, 1)] = matrix::re(((m + 1) * (m + 1)) as f64 * a(m + 1));
        } else if m == q + 1 {
            block[(0, 1)] = matrix::re((q as f64 + 1.0) * a(q + 1));
        } else if m + 1 == q {
            block[(1, 0)] = matrix::re((m as f64 + 1.0) * a(m + 1));
        }
        block
    })
}

/// Deterministic stream mixer: derives independent sub-seeds from a root
/// seed and a few context labels (SplitMix64 finalizer over the packed
/// labels).
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(a.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(b.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_complex(rng: &mut ChaCha8Rng) -> C64 {
    // Real and imaginary parts independent standard normals (Box–Muller).
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (-2.0 * u1.ln()).sqrt();
    C64::new(r * u2.cos(), r * u2.sin())
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Haar-distributed `n×n` unitary: QR of a complex Gaussian matrix with the
/// `R` diagonal's phases divided out (the phase correction is what makes the
/// distribution exactly Haar rather than merely unitary).
pub fn haar_unitary(n: usize, seed: u64) -> CMat {
    let mut rng = rng(seed);
    let g = gaussian_matrix(n, n, &mut rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { matrix::ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random invertible polynomial gauge `Φ(μ) = Φ_0 + Φ_1 μ + …` with
/// well-conditioned constant term: `Φ_0 = U + 2I` for Haar `U` (eigenvalues
/// stay in a disc of radius 1 around 2, so `cond ≤ 3`), higher coefficients
/// scaled-down Gaussians.
pub fn random_invertible_holo(rank: usize, degree: usize, seed: u64) -> HoloSeries {
    let mut rng = rng(mix_seed(seed, 0x11, 0));
    let mut coeffs = Vec::with_capacity(degree + 1);
    let u = haar_unitary(rank, mix_seed(seed, 0x12, 0));
    coeffs.push(u + matrix::eye(rank).scale(2.0));
    for m in 1..=degree {
        coeffs.push(gaussian_matrix(rank, rank, &mut rng).scale(0.4 / m as f64));
    }
    HoloSeries::new(rank, coeffs).expect("generated shapes are consistent")
}

/// Random kernel with both invariants holding *exactly* in structure:
/// `A_mq = F_m F_q*` for Gaussian slabs `F_m` with `width` columns (pass 0
/// for the default `n·(D+1)`), i.e. the block Gram matrix of the row family
/// `[F_0; …; F_D]`. An extra `n` columns carry `ε^{1/2} I` into `F_0` only,
/// which adds `ε I` to `A_00` and keeps it safely invertible (`ε = 10⁻³`).
pub fn random_psd_kernel(rank: usize, degree: usize, width: usize, seed: u64) -> Result<KernelSeries> {
    let width = if width == 0 { rank * (degree + 1) } else { width };
    if width < rank {
        return Err(Error::InvalidParameter(format!(
            "factor width {width} is below rank {rank}"
        )));
    }
    let mut rng = rng(mix_seed(seed, 0x21, 0));
    let scale = 1.0 / (width as f64).sqrt();
    let mut slabs: Vec<CMat> = (0..=degree)
        .map(|_| gaussian_matrix(rank, width, &mut rng).scale(scale))
        .collect();
    // Augment every slab with n extra columns; only F_0 gets √ε I there.
    let eps_sqrt = 1e-3_f64.sqrt();
    for (m, slab) in slabs.iter_mut().enumerate() {
        let mut wide = matrix::zeros(rank, width + rank);
        wide.view_mut((0, 0), (rank, width)).copy_from(slab);
        if m == 0 {
            wide.view_mut((0, width), (rank, rank))
                .copy_from(&matrix::eye(rank).scale(eps_sqrt));
        }
        *slab = wide;
    }
    KernelSeries::from_fn(rank, degree, |m, q| &slabs[m] * slabs[q].adjoint())
}

/// What [`disguised_direct_sum`] actually assembled, for ground-truth
/// comparisons in tests.
#[derive(Debug, Clone)]
pub struct DisguiseTruth {
    /// Summand ranks in assembly order (with multiplicity, before shuffling
    /// by the unitary — the sum itself is in this block order).
    pub summand_ranks: Vec<usize>,
    /// The conjugating unitary `U₀`.
    pub unitary: CMat,
}

/// Conjugate a direct sum `K₁ ⊕ ⋯ ⊕ K_s` by a constant Haar unitary:
/// `U₀ (⊕ K_i) U₀*`. The result is irreducibility-equivalent to the plain
/// sum but its block structure is hidden from coefficient inspection.
pub fn disguised_direct_sum(
    parts: &[KernelSeries],
    seed: u64,
) -> Result<(KernelSeries, DisguiseTruth)> {
    let plain = KernelSeries::direct_sum(parts)?;
    let u = haar_unitary(plain.rank(), mix_seed(seed, 0x31, 0));
    let u_holo = HoloSeries::constant(u.clone(), plain.degree());
    let disguised = KernelSeries::congruence(&u_holo, &plain, &u_holo)?;
    Ok((
        disguised,
        DisguiseTruth {
            summand_ranks: parts.iter().map(|p| p.rank()).collect(),
            unitary: u,
        },
    ))
}

/// Random unit vector (for probing positivity in tests).
pub fn random_unit_vector(n: usize, seed: u64) -> DVector<C64> {
    let mut rng = rng(seed);
    let v = DVector::from_fn(n, |_, _| standard_complex(&mut rng));
    let norm = v.norm();
    v / matrix::re(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::Tolerances;

    #[test]
    fn bergman_alpha_interpolates_szego_and_bergman() {
        let w1 = bergman_alpha_weights(1.0, 5);
        assert!(w1.iter().all(|w| (*w - 1.0).abs() < 1e-15));
        let w2 = bergman_alpha_weights(2.0, 5);
        for (k, w) in w2.iter().enumerate() {
            assert!((*w - (k as f64 + 1.0)).abs() < 1e-13);
        }
        // Half-integer exponent: a_2 = α(α+1)/2 = 0.375 for α = 1/2.
        let wh = bergman_alpha_weights(0.5, 2);
        assert!((wh[2] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn jet_kernel_coefficients_from_weights() {
        // Szegő weights (all 1): A_mm = diag(1, (m+1)²), off-diagonals carry
        // m+1 in the corner.
        let k = jet_kernel(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(k.rank(), 2);
        assert!((k.coeff(0, 0)[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!((k.coeff(1, 1)[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((k.coeff(1, 1)[(1, 1)].re - 4.0).abs() < 1e-15);
        assert!(k.coeff(1, 1)[(0, 1)].norm() < 1e-15);
        assert!((k.coeff(1, 0)[(0, 1)].re - 1.0).abs() < 1e-15);
        assert!((k.coeff(0, 1)[(1, 0)].re - 1.0).abs() < 1e-15);
        assert!((k.coeff(2, 1)[(0, 1)].re - 2.0).abs() < 1e-15);
        // Not normalized: the jet direction leaks into A_10.
        assert!(matrix::max_abs(k.coeff(1, 0)) > 0.5);
    }

    #[test]
    fn jet_kernel_is_valid() {
        let k = jet_kernel(&bergman_alpha_weights(2.0, 6)).unwrap();
        let report = k.validate(&Tolerances::default());
        assert!(report.is_valid(), "{}", report.summary());
    }

    #[test]
    fn haar_unitary_is_unitary_and_seeded() {
        let u = haar_unitary(4, 7);
        let resid = matrix::max_abs_diff(&(&u * u.adjoint()), &matrix::eye(4));
        assert!(resid < 1e-13, "unitarity residual {resid}");
        let u2 = haar_unitary(4, 7);
        assert_eq!(matrix::max_abs_diff(&u, &u2), 0.0);
        let u3 = haar_unitary(4, 8);
        assert!(matrix::max_abs_diff(&u, &u3) > 1e-3);
    }

    #[test]
    fn random_psd_kernel_is_valid() {
        for seed in 0..4 {
            let k = random_psd_kernel(3, 4, 0, seed).unwrap();
            let report = k.validate(&Tolerances::default());
            assert!(report.is_valid(), "seed {seed}: {}", report.summary());
        }
    }

    #[test]
    fn random_invertible_holo_is_invertible() {
        let phi = random_invertible_holo(3, 4, 5);
        assert!(phi.is_invertible(1e-9));
        let inv = phi.invert().unwrap();
        let prod = phi.product(&inv);
        let id = HoloSeries::identity(3, 4);
        assert!(prod.unwrap().max_diff(&id) < 1e-12);
    }

    #[test]
    fn disguise_round_trip() {
        let (k, truth) = disguised_direct_sum(&[szego(3), bergman(3)], 9).unwrap();
        assert_eq!(k.rank(), 2);
        // Undo the disguise: U₀* K U₀ should be the plain sum again.
        let u_inv = HoloSeries::constant(truth.unitary.adjoint(), 3);
        let undone = KernelSeries::congruence(&u_inv, &k, &u_inv).unwrap();
        let plain = KernelSeries::direct_sum(&[szego(3), bergman(3)]).unwrap();
        assert!(undone.max_diff(&plain).unwrap() < 1e-13);
    }
}
