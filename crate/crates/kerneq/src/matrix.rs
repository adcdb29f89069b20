//! Dense complex matrices and the handful of decompositions everything else
//! leans on.
//!
//! The whole crate works with [`CMat`] — a dynamically sized matrix of
//! double-precision complex scalars. Matrices here are tiny (rank ≤ 8 blocks,
//! stacked constraint matrices of a few thousand rows at most), so the
//! emphasis is on *robust* rank decisions rather than speed: null spaces are
//! computed from unsquared singular values (a Gram/normal-equations shortcut
//! would square them and wreck the 1e-8 relative threshold).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Complex scalar: a pair of `f64`s.
pub type C64 = num_complex::Complex<f64>;
/// Dense column-major complex matrix.
pub type CMat = DMatrix<C64>;

/// Real zero as a complex scalar.
pub const ZERO: C64 = C64::new(0.0, 0.0);
/// Real one as a complex scalar.
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Complex scalar from a real value.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// n×n identity.
pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// n×n zero matrix.
pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Largest entry modulus. This is the coefficient norm used for every
/// residual in the crate; on fixed-size desk instances it is equivalent to
/// any other norm up to a harmless constant.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `max_abs(a - b)` without materializing the difference.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// How far `m` is from being Hermitian, as a max-entry norm.
pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// True if every entry is finite.
pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
///
/// The input is symmetrized first so float fuzz cannot leak into the
/// decomposition; callers are expected to pass matrices that are Hermitian
/// up to roundoff.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    // nalgebra returns eigenpairs in no particular order; fix ascending.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Unique PSD square root of a Hermitian positive-definite matrix.
///
/// Eigenvalues in `[-psd_tol·λ_max, 0)` are treated as float noise and
/// clamped to zero; anything more negative is a genuine failure.
pub fn psd_sqrt(m: &CMat, psd_tol: f64, what: &'static str) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(m);
    let lambda_max = values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = -psd_tol * lambda_max.max(1.0);
    if values.first().copied().unwrap_or(0.0) < floor {
        return Err(Error::NotPositiveDefinite(what));
    }
    let n = m.nrows();
    let mut root = zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        let s = re(v.max(0.0).sqrt());
        let col = vectors.column(i);
        // root += s · v v*
        for r in 0..n {
            for c in 0..n {
                root[(r, c)] += s * col[r] * col[c].conj();
            }
        }
    }
    Ok(root)
}

/// Inverse via LU, or an error naming the offending matrix.
pub fn inverse(m: &CMat, what: &'static str) -> Result<CMat> {
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// 2-norm condition number estimate (σ_max / σ_min); infinite when singular.
pub fn condition(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the (right) null space of `m`, with singular values
/// at or below `rank_tol · max(σ_max, scale_floor)` counted as null.
///
/// The floor is essential: when `m` *should* be zero its largest singular
/// value is itself rounding noise, and a purely relative threshold would
/// promote that noise to full rank. Callers pass the natural scale of the
/// data `m` was assembled from.
///
/// The matrix is first reduced by a QR factorization so the SVD only ever
/// sees a small square factor; singular values are preserved exactly by that
/// step, so the threshold semantics are unchanged.
pub fn null_space(m: &CMat, rank_tol: f64, scale_floor: f64) -> Vec<DVector<C64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    // Row count below column count would make the QR reduction widen the
    // matrix; pad with zero rows instead (no effect on the null space).
    let work = if m.nrows() < cols {
        let mut padded = zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let r = work.qr().unpack_r();
    let svd = r.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let reference = sigma_max.max(scale_floor);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap()
    });
    let mut basis = Vec::new();
    for &i in &idx {
        if svd.singular_values[i] <= rank_tol * reference {
            // Rows of Vᴴ conjugate back to right singular vectors.
            basis.push(DVector::from_iterator(
                cols,
                v_t.row(i).iter().map(|z| z.conj()),
            ));
        }
    }
    basis
}

/// Stack the entries of a matrix column-major into a vector.
pub fn vectorize(m: &CMat) -> DVector<C64> {
    DVector::from_iterator(m.nrows() * m.ncols(), m.iter().copied())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &DVector<C64>, rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(rows, cols, v.iter().copied())
}
