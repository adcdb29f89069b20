//! Commutants of *-closed matrix families and simultaneous block
//! diagonalization.
//!
//! The commutant `{X : XA = AX for all A}` of a self-adjoint-closed family
//! is a finite-dimensional C*-algebra, isomorphic to `⊕ M_{m_i}(ℂ)` — the
//! multiplicities `m_i` and block ranks `n_i` of the family's simultaneous
//! block structure are completely encoded in it. [`decompose`] extracts that
//! structure constructively: a generic Hermitian element of the commutant
//! has eigenspaces that are joint invariant subspaces, so seeded sampling
//! plus spectral clustering splits the space, recursion refines the split
//! until every block is irreducible, and a verification pass (commutant
//! dimension bookkeeping plus block-diagonality residuals) confirms the
//! answer instead of trusting the randomness.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equivalence::unitary_witness_irreducible;
use crate::error::{Error, Result};
use crate::matrix::{self, CMat, C64};
use crate::tol::Tolerances;
use crate::zoo::mix_seed;

/// A finite list of `n×n` matrices, closed under adjoints (adjoints are
/// appended on construction when missing).
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    rank: usize,
    members: Vec<CMat>,
}

impl MatrixFamily {
    /// Build a family, appending the adjoint of any member whose adjoint is
    /// not already present (exact comparison; a duplicate member is
    /// harmless, an absent adjoint is not).
    pub fn new(rank: usize, members: Vec<CMat>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyList);
        }
        for m in &members {
            if m.nrows() != rank || m.ncols() != rank {
                return Err(Error::Shape(format!(
                    "family member is {}×{}, expected {rank}×{rank}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !matrix::all_finite(m) {
                return Err(Error::Shape("non-finite family member".into()));
            }
        }
        let mut closed = members;
        let original = closed.len();
        for i in 0..original {
            let adj = closed[i].adjoint();
            if !closed.iter().any(|m| matrix::max_abs_diff(m, &adj) == 0.0) {
                closed.push(adj);
            }
        }
        Ok(MatrixFamily { rank, members: closed })
    }

    /// Build a family whose member list must stay exactly as given — no
    /// adjoint appending. For use when member *positions* carry meaning
    /// (e.g. two families paired index-by-index for intertwiner solves);
    /// the caller asserts the list is already adjoint-closed up to
    /// numerical noise, as a kernel coefficient grid is.
    pub fn new_closed(rank: usize, members: Vec<CMat>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyList);
        }
        for m in &members {
            if m.nrows() != rank || m.ncols() != rank {
                return Err(Error::Shape(format!(
                    "family member is {}×{}, expected {rank}×{rank}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !matrix::all_finite(m) {
                return Err(Error::Shape("non-finite family member".into()));
            }
        }
        Ok(MatrixFamily { rank, members })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn members(&self) -> &[CMat] {
        &self.members
    }

    /// Compress the family onto the range of an isometry: `A ↦ V* A V`.
    /// Adjoint closure survives the compression.
    pub fn restrict(&self, isometry: &CMat) -> MatrixFamily {
        MatrixFamily {
            rank: isometry.ncols(),
            members: self
                .members
                .iter()
                .map(|a| isometry.adjoint() * a * isometry)
                .collect(),
        }
    }

    /// An orthonormal basis (under the trace inner product) of the linear
    /// span of the members. The commutant only sees the span, so reducing
    /// to it first caps the stacked solve at `n²` constraints blocks.
    fn span_basis(&self, rank_tol: f64) -> Vec<CMat> {
        let n = self.rank;
        let cols = self.members.len();
        let mut stacked = matrix::zeros(n * n, cols);
        for (j, m) in self.members.iter().enumerate() {
            stacked.set_column(j, &matrix::vectorize(m));
        }
        let qr = stacked.col_piv_qr();
        let (q, r, _p) = qr.unpack();
        let mut head = 0.0f64;
        let mut basis = Vec::new();
        for j in 0..r.nrows().min(r.ncols()) {
            let d = r[(j, j)].norm();
            if j == 0 {
                head = d;
            }
            if d > rank_tol * head.max(f64::MIN_POSITIVE) {
                basis.push(matrix::unvectorize(&q.column(j).into_owned(), n, n));
            } else {
                break;
            }
        }
        if basis.is_empty() {
            // Every member is zero; the span is {0} and everything commutes
            // with it. Represent that by the zero matrix so callers see a
            // full commutant.
            basis.push(matrix::zeros(n, n));
        }
        basis
    }
}

/// Orthonormal basis of a commutant, under the trace inner product.
#[derive(Debug, Clone)]
pub struct CommutantBasis {
    pub dimension: usize,
    pub basis: Vec<CMat>,
}

impl CommutantBasis {
    /// Worst relative commutation defect of the basis against a family —
    /// the quantity the basis is supposed to annihilate.
    pub fn max_commutation_residual(&self, family: &MatrixFamily) -> f64 {
        let mut worst = 0.0f64;
        for x in &self.basis {
            for a in family.members() {
                let scale = matrix::max_abs(a).max(1e-300);
                let defect = matrix::max_abs(&(x * a - a * x)) / scale;
                worst = worst.max(defect);
            }
        }
        worst
    }
}

/// Compute the commutant `{X : XA = AX, ∀A in the family}` as the null
/// space of the stacked maps `X ↦ XA − AX` (column-major vectorization:
/// `vec(XA − AX) = (Aᵀ ⊗ I − I ⊗ A) vec X`). Null vectors are detected on
/// unsquared singular values at the relative threshold `tol.rank`.
pub fn commutant_basis(family: &MatrixFamily, tol: &Tolerances) -> Result<CommutantBasis> {
    let n = family.rank();
    let span = family.span_basis(tol.rank);
    let mut stacked = matrix::zeros(span.len() * n * n, n * n);
    for (idx, a) in span.iter().enumerate() {
        let block = commutation_map(a);
        stacked.view_mut((idx * n * n, 0), (n * n, n * n)).copy_from(&block);
    }
    // Span elements are unit Frobenius norm, so the constraint blocks live
    // at unit scale; 1.0 is the honest noise floor for the solve.
    let null = matrix::null_space(&stacked, tol.rank, 1.0);
    let basis: Vec<CMat> = null.iter().map(|v| matrix::unvectorize(v, n, n)).collect();
    Ok(CommutantBasis { dimension: basis.len(), basis })
}

/// `vec(XA − AX) = (Aᵀ ⊗ I − I ⊗ A) vec X` for column-major `vec`.
fn commutation_map(a: &CMat) -> CMat {
    let n = a.nrows();
    let eye = matrix::eye(n);
    a.transpose().kronecker(&eye) - eye.kronecker(a)
}

/// A family is irreducible exactly when its commutant is the scalars.
pub fn is_irreducible(family: &MatrixFamily, tol: &Tolerances) -> bool {
    commutant_basis(family, tol).map(|b| b.dimension == 1).unwrap_or(false)
}

/// The commutant dimension forced by a multiplicity partition:
/// `⊕ M_{m_i}(ℂ)` has dimension `Σ m_i²`.
pub fn commutant_dimension_for_multiplicities(multiplicities: &[usize]) -> Result<usize> {
    if multiplicities.is_empty() {
        return Err(Error::InvalidPartition("empty multiplicity list".into()));
    }
    if multiplicities.iter().any(|&m| m == 0) {
        return Err(Error::InvalidPartition("multiplicities must be ≥ 1".into()));
    }
    Ok(multiplicities.iter().map(|&m| m * m).sum())
}

/// One irreducible block of a decomposition, in the column order of the
/// conjugating unitary.
#[derive(Debug, Clone)]
pub struct Leaf {
    /// Index into [`Decomposition::components`].
    pub component: usize,
    /// First column of this block in the unitary.
    pub offset: usize,
    /// Block size.
    pub size: usize,
    /// The family compressed to this block.
    pub family: MatrixFamily,
}

/// A distinct irreducible component with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub rank: usize,
    pub multiplicity: usize,
}

/// Verified simultaneous block-diagonalization of a *-closed family.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Distinct components, in first-occurrence order of their blocks.
    pub components: Vec<Component>,
    /// Unitary whose column blocks are the irreducible subspaces; blocks of
    /// one component sit adjacently.
    pub unitary: CMat,
    /// Irreducible blocks in column order.
    pub leaves: Vec<Leaf>,
    /// Commutant dimension of the input family (must equal `Σ m_i²`).
    pub commutant_dim: usize,
    /// Worst relative off-block-diagonal residual of `U*AU` over the family.
    pub residual: f64,
}

impl Decomposition {
    /// Number of distinct components.
    pub fn t(&self) -> usize {
        self.components.len()
    }

    /// Block sizes in unitary column order.
    pub fn partition(&self) -> Vec<usize> {
        self.leaves.iter().map(|l| l.size).collect()
    }

    /// `(rank, multiplicity)` pairs sorted for structure comparison.
    pub fn signature(&self) -> Vec<(usize, usize)> {
        let mut sig: Vec<(usize, usize)> = self
            .components
            .iter()
            .map(|c| (c.rank, c.multiplicity))
            .collect();
        sig.sort_unstable();
        sig
    }
}

/// Split a *-closed family into irreducible joint blocks and group the
/// blocks into components by mutual equivalence.
///
/// The randomness is fully determined by `seed`: the same family and seed
/// reproduce the same unitary bit for bit. If a commutant reports dimension
/// `> 1` but no spectral split is found after a few derived-seed retries, or
/// the final bookkeeping (`Σ m_i²` = commutant dimension, block-diagonal
/// residual ≤ 10·`tol.zero`) fails, the call returns
/// [`Error::VerificationFailed`] rather than an unverified answer.
pub fn decompose(family: &MatrixFamily, seed: u64, tol: &Tolerances) -> Result<Decomposition> {
    let n = family.rank();
    let full = commutant_basis(family, tol)?;
    let commutant_dim = full.dimension;

    // Collect irreducible blocks as (isometry from the ambient space, family).
    let mut raw_leaves: Vec<(CMat, MatrixFamily)> = Vec::new();
    if commutant_dim == 1 {
        raw_leaves.push((matrix::eye(n), family.clone()));
    } else {
        split_recursive(family, matrix::eye(n), seed, 0, tol, &mut raw_leaves)?;
    }

    // Group mutually equivalent blocks into components (first-occurrence
    // order). Distinct components are never equivalent, so a single witness
    // probe per (leaf, component) pair decides membership.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..raw_leaves.len() {
        let mut placed = false;
        for group in groups.iter_mut() {
            let rep = &raw_leaves[group[0]].1;
            if rep.rank() == raw_leaves[i].1.rank()
                && unitary_witness_irreducible(&raw_leaves[i].1, rep, tol)?.is_some()
            {
                group.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            groups.push(vec![i]);
        }
    }

    // Assemble the unitary with same-component blocks adjacent.
    let mut unitary = matrix::zeros(n, n);
    let mut leaves = Vec::with_capacity(raw_leaves.len());
    let mut components = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for (c_idx, group) in groups.iter().enumerate() {
        let rank = raw_leaves[group[0]].1.rank();
        components.push(Component { rank, multiplicity: group.len() });
        for &leaf_idx in group {
            let (iso, fam) = &raw_leaves[leaf_idx];
            let size = fam.rank();
            unitary.view_mut((0, offset), (n, size)).copy_from(iso);
            leaves.push(Leaf {
                component: c_idx,
                offset,
                size,
                family: fam.clone(),
            });
            offset += size;
        }
    }
    if offset != n {
        return Err(Error::VerificationFailed(format!(
            "blocks cover {offset} of {n} dimensions"
        )));
    }

    // Verification pass: the partition must explain the commutant dimension
    // exactly, the assembled matrix must be unitary, and every member must
    // be block-diagonal in the new frame.
    let explained: usize = components.iter().map(|c| c.multiplicity * c.multiplicity).sum();
    if explained != commutant_dim {
        return Err(Error::VerificationFailed(format!(
            "multiplicities explain commutant dimension {explained}, measured {commutant_dim}"
        )));
    }
    let unitarity = matrix::max_abs_diff(&(unitary.adjoint() * &unitary), &matrix::eye(n));
    if unitarity > 10.0 * tol.zero {
        return Err(Error::VerificationFailed(format!(
            "assembled frame is not unitary: residual {unitarity:.3e}"
        )));
    }
    let mut residual = 0.0f64;
    for a in family.members() {
        let b = unitary.adjoint() * a * &unitary;
        let scale = matrix::max_abs(a).max(1e-300);
        let mut off = 0.0f64;
        for (i, row) in b.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !same_block(&leaves, i, j) {
                    off = off.max(v.norm());
                }
            }
        }
        residual = residual.max(off / scale);
    }
    if residual > 10.0 * tol.zero {
        return Err(Error::VerificationFailed(format!(
            "off-block residual {residual:.3e} exceeds 10·τ_zero"
        )));
    }

    Ok(Decomposition { components, unitary, leaves, commutant_dim, residual })
}

fn same_block(leaves: &[Leaf], i: usize, j: usize) -> bool {
    leaves
        .iter()
        .any(|l| i >= l.offset && i < l.offset + l.size && j >= l.offset && j < l.offset + l.size)
}

fn split_recursive(
    family: &MatrixFamily,
    isometry: CMat,
    seed: u64,
    depth: u64,
    tol: &Tolerances,
    out: &mut Vec<(CMat, MatrixFamily)>,
) -> Result<()> {
    let basis = commutant_basis(family, tol)?;
    if basis.dimension <= 1 {
        out.push((isometry, family.clone()));
        return Ok(());
    }
    for attempt in 0..3u64 {
        let h = sample_hermitian(&basis, mix_seed(seed, depth + 1, attempt));
        let (eigs, vecs) = matrix::hermitian_eigen(&h);
        let clusters = cluster_ranges(&eigs, tol.gap);
        if clusters.len() <= 1 {
            continue;
        }
        // Deflate in descending eigenvalue order for a deterministic block
        // layout (hermitian_eigen sorts ascending, so walk backwards).
        for range in clusters.into_iter().rev() {
            let size = range.end - range.start;
            let mut v = matrix::zeros(family.rank(), size);
            for (col, idx) in (range.start..range.end).enumerate() {
                v.set_column(col, &vecs.column(idx).into_owned());
            }
            let sub_family = family.restrict(&v);
            let sub_isometry = &isometry * &v;
            split_recursive(&sub_family, sub_isometry, seed, depth + 1, tol, out)?;
        }
        return Ok(());
    }
    Err(Error::VerificationFailed(format!(
        "commutant dimension {} > 1 but no spectral separation after retries",
        basis.dimension
    )))
}

/// A seeded random Hermitian element of the commutant:
/// `H = Σ r_k (Y_k + Y_k*)/2` with standard-normal `r_k`, where the `Y_k`
/// run over the basis and its `i`-multiples (so the Hermitian parts span
/// every Hermitian commutant element regardless of basis phases).
fn sample_hermitian(basis: &CommutantBasis, seed: u64) -> CMat {
    let n = basis.basis[0].nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    };
    let mut h = matrix::zeros(n, n);
    for x in &basis.basis {
        let sym = (x + x.adjoint()).scale(0.5);
        let skew_sym = ((x - x.adjoint()) * C64::new(0.0, 1.0)).scale(0.5);
        h += sym.scale(normal());
        h += skew_sym.scale(normal());
    }
    // Exact Hermitian symmetrization to keep the eigensolver honest.
    (&h + h.adjoint()).scale(0.5)
}

/// Group an ascending eigenvalue list into clusters separated by relative
/// gaps larger than `gap_tol` of the spectral diameter.
fn cluster_ranges(eigs: &[f64], gap_tol: f64) -> Vec<std::ops::Range<usize>> {
    if eigs.is_empty() {
        return Vec::new();
    }
    let diameter = eigs[eigs.len() - 1] - eigs[0];
    if diameter <= 0.0 {
        return vec![0..eigs.len()];
    }
    let cut = gap_tol * diameter;
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..eigs.len() {
        if eigs[i] - eigs[i - 1] > cut {
            ranges.push(start..i);
            start = i;
        }
    }
    ranges.push(start..eigs.len());
    ranges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSeries;
    use crate::normalize::coefficient_family;
    use crate::zoo;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn family_of(k: &KernelSeries) -> MatrixFamily {
        MatrixFamily::new(k.rank(), coefficient_family(k, &tol()).unwrap()).unwrap()
    }

    #[test]
    fn identity_family_has_full_commutant() {
        let f = MatrixFamily::new(2, vec![matrix::eye(2)]).unwrap();
        let basis = commutant_basis(&f, &tol()).unwrap();
        assert_eq!(basis.dimension, 4);
        assert!(basis.max_commutation_residual(&f) < 1e-12);
    }

    #[test]
    fn multiplicity_dimension_table() {
        assert_eq!(commutant_dimension_for_multiplicities(&[1]).unwrap(), 1);
        assert_eq!(commutant_dimension_for_multiplicities(&[2]).unwrap(), 4);
        assert_eq!(commutant_dimension_for_multiplicities(&[2, 1]).unwrap(), 5);
        assert_eq!(commutant_dimension_for_multiplicities(&[3, 1, 1]).unwrap(), 11);
        assert!(commutant_dimension_for_multiplicities(&[]).is_err());
        assert!(commutant_dimension_for_multiplicities(&[2, 0]).is_err());
    }

    #[test]
    fn szego_plus_bergman_commutant_is_diagonal() {
        let k = KernelSeries::direct_sum(&[zoo::szego(4), zoo::bergman(4)]).unwrap();
        let f = family_of(&k);
        let basis = commutant_basis(&f, &tol()).unwrap();
        assert_eq!(basis.dimension, 2);
        assert!(!is_irreducible(&f, &tol()));
        // Every commutant element must be diagonal here.
        for x in &basis.basis {
            assert!(x[(0, 1)].norm() < 1e-9 && x[(1, 0)].norm() < 1e-9);
        }
    }

    #[test]
    fn doubled_szego_commutant_is_full_two_by_two() {
        let k = KernelSeries::direct_sum(&[zoo::szego(4), zoo::szego(4)]).unwrap();
        let f = family_of(&k);
        assert_eq!(commutant_basis(&f, &tol()).unwrap().dimension, 4);
    }

    #[test]
    fn rank_one_and_jet_families_are_irreducible() {
        assert!(is_irreducible(&family_of(&zoo::szego(4)), &tol()));
        let jet = zoo::jet_kernel(&zoo::bergman_alpha_weights(1.0, 5)).unwrap();
        let pair = crate::normalize::normalize(&jet, &tol()).unwrap();
        assert!(is_irreducible(&family_of(&pair.k0), &tol()));
    }

    #[test]
    fn decompose_irreducible_is_identity() {
        let d = decompose(&family_of(&zoo::szego(4)), 1, &tol()).unwrap();
        assert_eq!(d.t(), 1);
        assert_eq!(d.components[0], Component { rank: 1, multiplicity: 1 });
        assert_eq!(d.commutant_dim, 1);
        assert!(matrix::max_abs_diff(&d.unitary, &matrix::eye(1)) == 0.0);
    }

    #[test]
    fn decompose_szego_plus_bergman() {
        let k = KernelSeries::direct_sum(&[zoo::szego(4), zoo::bergman(4)]).unwrap();
        let d = decompose(&family_of(&k), 3, &tol()).unwrap();
        assert_eq!(d.t(), 2);
        assert_eq!(d.signature(), vec![(1, 1), (1, 1)]);
        assert_eq!(d.commutant_dim, 2);
        assert!(d.residual < 1e-9, "residual {:.3e}", d.residual);
    }

    #[test]
    fn decompose_recovers_disguised_multiplicities() {
        let parts = [zoo::szego(4), zoo::szego(4), zoo::bergman(4)];
        let (k, _truth) = zoo::disguised_direct_sum(&parts, 42).unwrap();
        let d = decompose(&family_of(&k), 5, &tol()).unwrap();
        assert_eq!(d.t(), 2);
        assert_eq!(d.signature(), vec![(1, 1), (1, 2)]);
        assert_eq!(d.commutant_dim, 5);
        assert!(d.residual < 1e-9, "residual {:.3e}", d.residual);
        // Equivariance: the disguise did not change the structure.
        let plain = KernelSeries::direct_sum(&parts).unwrap();
        let d_plain = decompose(&family_of(&plain), 5, &tol()).unwrap();
        assert_eq!(d.signature(), d_plain.signature());
    }

    #[test]
    fn decompose_is_seed_reproducible() {
        let (k, _) = zoo::disguised_direct_sum(&[zoo::szego(4), zoo::bergman(4)], 11).unwrap();
        let f = family_of(&k);
        let d1 = decompose(&f, 17, &tol()).unwrap();
        let d2 = decompose(&f, 17, &tol()).unwrap();
        assert!(matrix::max_abs_diff(&d1.unitary, &d2.unitary) == 0.0);
    }

    #[test]
    fn cluster_ranges_split_on_relative_gaps() {
        let ranges = cluster_ranges(&[0.0, 1e-9, 1.0, 1.0 + 1e-9, 2.0], 1e-6);
        assert_eq!(ranges, vec![0..2, 2..4, 4..5]);
        assert_eq!(cluster_ranges(&[5.0, 5.0, 5.0], 1e-6), vec![0..3]);
    }
}
