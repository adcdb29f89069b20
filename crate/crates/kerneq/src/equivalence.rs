//! Deciding unitary equivalence and recovering its witnesses.
//!
//! Two kernels are unitarily equivalent exactly when a holomorphic gauge `Φ`
//! realizes `K_T = Φ K_S Φ*`. The decision pipeline reduces that analytic
//! statement to finite linear algebra:
//!
//! 1. normalize both kernels — the remaining freedom is one constant
//!    unitary on the coefficient family;
//! 2. block-diagonalize each family ([`crate::commutant::decompose`]);
//! 3. if the component structures `(t, {(n_i, m_i)})` differ, the kernels
//!    are not equivalent; otherwise match irreducible blocks across the two
//!    sides through one-dimensional intertwiner spaces;
//! 4. assemble the constant unitary, pull it back through the normalizing
//!    gauges, and *verify* the resulting congruence coefficientwise.
//!
//! A verdict of `Equivalent` is therefore always certified by an explicit
//! witness and a residual, never inferred from intermediate successes.

use crate::commutant::{decompose, Decomposition, MatrixFamily};
use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::kernel::KernelSeries;
use crate::matrix::{self, CMat};
use crate::normalize::{normalize, NormalizedPair};
use crate::tol::Tolerances;
use crate::zoo::mix_seed;

/// Basis of `{X : X A_k = B_k X and X A_k* = B_k* X for every k}`, for two
/// families whose members are paired by position (`X` maps the `F`-side
/// space into the `G`-side space, so it is `rank(G) × rank(F)`).
///
/// Member lists must have equal length; the adjoint constraints are added
/// per pair, so the inputs need not be adjoint-closed themselves as long as
/// their pairing is positional.
pub fn intertwiner_space(
    f: &MatrixFamily,
    g: &MatrixFamily,
    tol: &Tolerances,
) -> Result<Vec<CMat>> {
    if f.members().len() != g.members().len() {
        return Err(Error::Shape(format!(
            "intertwiner families pair {} members against {}",
            f.members().len(),
            g.members().len()
        )));
    }
    let fn_ = f.rank();
    let gn = g.rank();
    let cols = fn_ * gn;
    let eye_g = matrix::eye(gn);
    let eye_f = matrix::eye(fn_);
    let pairs = f.members().len();
    let mut stacked = matrix::zeros(2 * pairs * cols, cols);
    for (k, (a, b)) in f.members().iter().zip(g.members()).enumerate() {
        // vec(XA − BX) = (Aᵀ ⊗ I_g − I_f ⊗ B) vec X, column-major.
        let direct = a.transpose().kronecker(&eye_g) - eye_f.kronecker(b);
        let adjoint = a.conjugate().kronecker(&eye_g) - eye_f.kronecker(&b.adjoint());
        stacked.view_mut((2 * k * cols, 0), (cols, cols)).copy_from(&direct);
        stacked
            .view_mut(((2 * k + 1) * cols, 0), (cols, cols))
            .copy_from(&adjoint);
    }
    // Constraints scale linearly with the member entries; flooring the
    // rank threshold at that scale keeps an all-noise stack (two genuinely
    // intertwined families) from reading as full-rank.
    let scale = f.members().iter().chain(g.members()).map(matrix::max_abs).fold(0.0, f64::max);
    let null = matrix::null_space(&stacked, tol.rank, scale);
    Ok(null.iter().map(|v| matrix::unvectorize(v, gn, fn_)).collect())
}

/// For irreducible families, the intertwiner space has dimension 0 (the
/// families are inequivalent) or 1; in the latter case its unit-norm basis
/// element `X` satisfies `X*X = XX* = c·I`, and `X/√c` is the unitary
/// intertwiner. Returns it with the phase fixed so the largest-modulus
/// entry is real positive; returns `None` when no unitary intertwiner
/// exists. A dimension above 1 contradicts irreducibility and is reported
/// as [`Error::IrreducibleInconsistency`].
pub fn unitary_witness_irreducible(
    f: &MatrixFamily,
    g: &MatrixFamily,
    tol: &Tolerances,
) -> Result<Option<CMat>> {
    let basis = intertwiner_space(f, g, tol)?;
    match basis.len() {
        0 => return Ok(None),
        1 => {}
        d => return Err(Error::IrreducibleInconsistency(d)),
    }
    let x = &basis[0];
    if x.nrows() != x.ncols() {
        return Ok(None);
    }
    let n = x.nrows();
    let gram = x.adjoint() * x;
    let c = gram.trace().re / n as f64;
    if c <= 100.0 * tol.zero {
        return Ok(None);
    }
    let scalar_defect = matrix::max_abs_diff(&gram, &matrix::eye(n).scale(c))
        .max(matrix::max_abs_diff(&(x * x.adjoint()), &matrix::eye(n).scale(c)));
    if scalar_defect > 100.0 * tol.zero {
        return Ok(None);
    }
    let mut w = x.scale(1.0 / c.sqrt());
    // Deterministic phase: rotate the largest-modulus entry onto the
    // positive real axis (ties broken by column-major order).
    let mut best = (0usize, 0usize);
    let mut best_norm = -1.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = w[(i, j)].norm();
            if v > best_norm {
                best_norm = v;
                best = (i, j);
            }
        }
    }
    let pivot = w[best];
    if pivot.norm() > 0.0 {
        w *= pivot.conj() / matrix::re(pivot.norm());
    }
    Ok(Some(w))
}

/// Outcome of an equivalence decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Certified by a verified congruence witness.
    Equivalent,
    /// Structurally ruled out (component mismatch or empty intertwiner).
    NotEquivalent,
    /// The assembled witness left a residual too large to certify but too
    /// small to refute — truncation may be masking a far-coefficient
    /// disagreement.
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Equivalent => write!(f, "equivalent"),
            Verdict::NotEquivalent => write!(f, "not-equivalent"),
            Verdict::Undecided => write!(f, "undecided"),
        }
    }
}

/// Full result of [`are_equivalent`].
#[derive(Debug, Clone)]
pub struct EquivalenceVerdict {
    pub verdict: Verdict,
    /// Witness with `K_T = Φ K_S Φ*`; present iff `Equivalent`.
    pub witness: Option<HoloSeries>,
    /// `permutation[i]` = index of the S-side component matched to T-side
    /// component `i`; present when the structures were matched.
    pub permutation: Option<Vec<usize>>,
    /// Max relative coefficient defect of the verified congruence.
    pub residual: Option<f64>,
    /// Human-readable explanation of how the verdict was reached.
    pub detail: String,
}

/// Where undecidability ends: residuals above this cannot be attributed to
/// truncation noise and fail verification outright.
const UNDECIDED_CEILING: f64 = 1e-4;

/// Decide whether `K_T = Φ K_S Φ*` for some invertible holomorphic `Φ`,
/// and produce `Φ` when it exists.
///
/// Requires two valid kernels of equal rank and degree. Randomness (used
/// only inside the block decompositions) is fully seeded.
///
/// # Example
/// ```
/// use kerneq::equivalence::{are_equivalent, Verdict};
/// use kerneq::tol::Tolerances;
/// use kerneq::zoo;
/// let tol = Tolerances::default();
/// let doubled = zoo::diagonal_kernel(&[2.0; 6]).unwrap();
/// let verdict = are_equivalent(&zoo::szego(5), &doubled, 0, &tol).unwrap();
/// assert_eq!(verdict.verdict, Verdict::Equivalent);
/// // The witness rescales by 1/√2: Φ (2K) Φ* = K.
/// let phi = verdict.witness.unwrap();
/// assert!((phi.coeff(0)[(0, 0)].re - 0.5f64.sqrt()).abs() < 1e-12);
/// ```
pub fn are_equivalent(
    k_t: &KernelSeries,
    k_s: &KernelSeries,
    seed: u64,
    tol: &Tolerances,
) -> Result<EquivalenceVerdict> {
    if k_t.rank() != k_s.rank() {
        return Err(Error::RankMismatch(k_t.rank(), k_s.rank()));
    }
    if k_t.degree() != k_s.degree() {
        return Err(Error::DegreeMismatch(k_t.degree(), k_s.degree()));
    }
    k_t.require_valid(tol)?;
    k_s.require_valid(tol)?;

    let pair_t = normalize(k_t, tol)?;
    let pair_s = normalize(k_s, tol)?;
    let family_t = full_grid_family(&pair_t.k0)?;
    let family_s = full_grid_family(&pair_s.k0)?;

    let dec_t = decompose(&family_t, mix_seed(seed, 0x7, 0), tol)?;
    let dec_s = decompose(&family_s, mix_seed(seed, 0x8, 0), tol)?;

    if dec_t.signature() != dec_s.signature() {
        return Ok(EquivalenceVerdict {
            verdict: Verdict::NotEquivalent,
            witness: None,
            permutation: None,
            residual: None,
            detail: format!(
                "component structures differ: {:?} vs {:?}",
                dec_t.signature(),
                dec_s.signature()
            ),
        });
    }

    let matching = match match_components(&dec_t, &dec_s, tol)? {
        Some(m) => m,
        None => {
            return Ok(EquivalenceVerdict {
                verdict: Verdict::NotEquivalent,
                witness: None,
                permutation: None,
                residual: None,
                detail: "equal component shapes, but some component admits no unitary \
                         intertwiner to any counterpart"
                    .into(),
            });
        }
    };

    let u = assemble_unitary(&dec_t, &dec_s, &matching, tol)?;
    let phi = pull_back_witness(&pair_t, &pair_s, &u)?;
    let reconstructed = KernelSeries::congruence(&phi, k_s, &phi)?;
    let scale = k_t.max_coeff_norm().max(1.0);
    let residual = reconstructed.max_diff(k_t)? / scale;

    if residual <= 10.0 * tol.zero {
        Ok(EquivalenceVerdict {
            verdict: Verdict::Equivalent,
            witness: Some(phi),
            permutation: Some(matching.permutation),
            residual: Some(residual),
            detail: format!("congruence verified with relative residual {residual:.3e}"),
        })
    } else if residual <= UNDECIDED_CEILING {
        Ok(EquivalenceVerdict {
            verdict: Verdict::Undecided,
            witness: None,
            permutation: Some(matching.permutation),
            residual: Some(residual),
            detail: format!(
                "assembled witness leaves relative residual {residual:.3e}, between the \
                 certification bound and the refutation bound"
            ),
        })
    } else {
        Err(Error::VerificationFailed(format!(
            "matched structures but the assembled witness fails the congruence: \
             relative residual {residual:.3e}"
        )))
    }
}

/// The full `(D+1)²` coefficient grid as a positionally-ordered family —
/// no zero-dropping, so that two kernels of the same degree pair member by
/// member. (The grid of a Hermitian kernel is adjoint-closed as it stands.)
fn full_grid_family(kernel: &KernelSeries) -> Result<MatrixFamily> {
    let mut members = Vec::with_capacity((kernel.degree() + 1) * (kernel.degree() + 1));
    for m in 0..=kernel.degree() {
        for q in 0..=kernel.degree() {
            members.push(kernel.coeff(m, q).clone());
        }
    }
    MatrixFamily::new_closed(kernel.rank(), members)
}

struct Matching {
    /// permutation[i] = S-component index for T-component i.
    permutation: Vec<usize>,
    /// Per T-leaf (in U_T column order): matched S-leaf index and the
    /// unitary `w` with `w · L_S · w* = L_T`.
    leaf_witnesses: Vec<(usize, CMat)>,
}

/// Match components of equal shape across the two decompositions. Distinct
/// components of one kernel are never mutually equivalent, so a greedy scan
/// with witness verification finds the unique perfect matching if one
/// exists; `None` means some component has no counterpart.
fn match_components(
    dec_t: &Decomposition,
    dec_s: &Decomposition,
    tol: &Tolerances,
) -> Result<Option<Matching>> {
    let t = dec_t.components.len();
    let mut permutation = vec![usize::MAX; t];
    let mut taken = vec![false; dec_s.components.len()];
    // First-leaf witness per matched component pair, reused for the leaf map.
    let mut component_witness: Vec<Option<CMat>> = vec![None; t];

    for (i, comp_t) in dec_t.components.iter().enumerate() {
        let first_t = dec_t.leaves.iter().position(|l| l.component == i).expect("leaf exists");
        let mut found = false;
        for (j, comp_s) in dec_s.components.iter().enumerate() {
            if taken[j] || comp_s != comp_t {
                continue;
            }
            let first_s =
                dec_s.leaves.iter().position(|l| l.component == j).expect("leaf exists");
            if let Some(w) = unitary_witness_irreducible(
                &dec_s.leaves[first_s].family,
                &dec_t.leaves[first_t].family,
                tol,
            )? {
                permutation[i] = j;
                taken[j] = true;
                component_witness[i] = Some(w);
                found = true;
                break;
            }
        }
        if !found {
            return Ok(None);
        }
    }

    // Leaf-level pairing: k-th leaf of T-component i ↔ k-th leaf of
    // S-component permutation[i], each with its own verified witness.
    let mut leaf_witnesses = Vec::with_capacity(dec_t.leaves.len());
    for (p, leaf_t) in dec_t.leaves.iter().enumerate() {
        let i = leaf_t.component;
        let j = permutation[i];
        let k_within = dec_t.leaves[..p].iter().filter(|l| l.component == i).count();
        let q = dec_s
            .leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| l.component == j)
            .map(|(idx, _)| idx)
            .nth(k_within)
            .expect("multiplicities match");
        let w = unitary_witness_irreducible(&dec_s.leaves[q].family, &leaf_t.family, tol)?
            .ok_or_else(|| {
                Error::VerificationFailed(
                    "a leaf of a matched component admits no unitary intertwiner".into(),
                )
            })?;
        leaf_witnesses.push((q, w));
    }
    Ok(Some(Matching { permutation, leaf_witnesses }))
}

/// `U = U_T · M · U_S*` where `M` places each leaf witness in the block
/// position pairing the two leaf layouts; then `U A_S U* = A_T` across the
/// whole normalized coefficient grid.
fn assemble_unitary(
    dec_t: &Decomposition,
    dec_s: &Decomposition,
    matching: &Matching,
    tol: &Tolerances,
) -> Result<CMat> {
    let n = dec_t.unitary.nrows();
    let mut m = matrix::zeros(n, n);
    for (p, (q, w)) in matching.leaf_witnesses.iter().enumerate() {
        let row = dec_t.leaves[p].offset;
        let col = dec_s.leaves[*q].offset;
        if dec_t.leaves[p].size != dec_s.leaves[*q].size {
            return Err(Error::VerificationFailed("matched leaves differ in size".into()));
        }
        m.view_mut((row, col), (w.nrows(), w.ncols())).copy_from(w);
    }
    let u = &dec_t.unitary * m * dec_s.unitary.adjoint();
    let unitarity = matrix::max_abs_diff(&(u.adjoint() * &u), &matrix::eye(n));
    if unitarity > 100.0 * tol.zero {
        return Err(Error::VerificationFailed(format!(
            "assembled intertwiner is not unitary: residual {unitarity:.3e}"
        )));
    }
    Ok(u)
}

/// `Φ(μ) = G_T(μ)⁻¹ · U · G_S(μ)`: conjugating the normalized families by
/// `U` and undoing both normalizing gauges yields the witness on the
/// original pair.
fn pull_back_witness(
    pair_t: &NormalizedPair,
    pair_s: &NormalizedPair,
    u: &CMat,
) -> Result<HoloSeries> {
    let g_t_inv = pair_t.gauge.invert()?;
    let d = pair_t.gauge.degree();
    let u_series = HoloSeries::constant(u.clone(), d);
    g_t_inv.product(&u_series)?.product(&pair_s.gauge)
}

/// Antiholomorphy criterion for a proposed gauge: with
/// `M(λ) = K_T(λ,λ)⁻¹ · Ψ(λ)⁻¹ · K_S(λ,λ)` as a bi-series, the kernels
/// satisfy `K_S = Ψ K_T Ψ*` only if `M` is antiholomorphic, i.e.
/// `∂_λ M = 0`. Returns `(antiholomorphic?, residual)` where the residual
/// is the largest coefficient of positive λ-degree on the validity box.
///
/// When the congruence holds, `M(λ) = Ψ(λ)*` exactly; when it fails, the
/// obstruction shows up as an order-one coefficient (e.g. the pair
/// Szegő/Bergman with `Ψ = 1` leaves `M = (1 − λλ̄)⁻¹`, whose `(1,1)`
/// coefficient is 1).
pub fn antiholomorphy_check(
    k_t: &KernelSeries,
    k_s: &KernelSeries,
    psi: &HoloSeries,
    tol: &Tolerances,
) -> Result<(bool, f64)> {
    if psi.rank() != k_t.rank() || k_t.rank() != k_s.rank() {
        return Err(Error::RankMismatch(k_t.rank(), k_s.rank()));
    }
    let psi_inv = psi.invert()?;
    let k_t_inv = k_t.invert_on_diagonal()?;
    let m = k_t_inv
        .product(&crate::biseries::BiSeries::from_holo(&psi_inv))?
        .product(&k_s.diagonal_restriction())?;
    let residual = m.max_coeff_norm_from_degree(1);
    Ok((residual <= tol.zero, residual))
}

/// How a single block of an intertwiner behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockClass {
    Zero,
    Invertible,
}

/// Blockwise anatomy of a witness `Φ` relative to component partitions of
/// the two sides. Rows of `c` and `classes` follow the S-side partition,
/// columns the T-side partition.
#[derive(Debug, Clone)]
pub struct IntertwinerReport {
    pub partition_t: Vec<usize>,
    pub partition_s: Vec<usize>,
    /// Scalars with `Ψ_ij(μ) Φ_ji(μ) = c_ij · I` (constant in `μ`).
    pub c: Vec<Vec<f64>>,
    pub classes: Vec<Vec<BlockClass>>,
    /// Worst defect of the `c_ij·I` fits over both product orders and all
    /// series orders.
    pub scalar_residual: f64,
    /// Worst deviation of a row or column sum of `c` from 1.
    pub sum_residual: f64,
    /// Defect of `Ψ = Φ⁻¹` (series identity back-check).
    pub inverse_residual: f64,
    /// Invariant violations, empty when the block structure is clean.
    pub violations: Vec<String>,
}

impl IntertwinerReport {
    /// True when every structural invariant held within tolerances.
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Groups of mutually-connected blocks: connected components of the
    /// bipartite graph whose edges are the `Invertible` blocks, as
    /// `(S-block indices, T-block indices)` pairs.
    pub fn component_groups(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let s_count = self.partition_s.len();
        let t_count = self.partition_t.len();
        let mut s_seen = vec![false; s_count];
        let mut groups = Vec::new();
        for start in 0..s_count {
            if s_seen[start] {
                continue;
            }
            let mut s_stack = vec![start];
            let mut s_group = Vec::new();
            let mut t_group = Vec::new();
            let mut t_seen = vec![false; t_count];
            while let Some(i) = s_stack.pop() {
                if s_seen[i] {
                    continue;
                }
                s_seen[i] = true;
                s_group.push(i);
                for j in 0..t_count {
                    if self.classes[i][j] == BlockClass::Invertible && !t_seen[j] {
                        t_seen[j] = true;
                        t_group.push(j);
                        for i2 in 0..s_count {
                            if self.classes[i2][j] == BlockClass::Invertible && !s_seen[i2] {
                                s_stack.push(i2);
                            }
                        }
                    }
                }
            }
            s_group.sort_unstable();
            t_group.sort_unstable();
            groups.push((s_group, t_group));
        }
        groups
    }
}

/// Dissect a witness `Φ` (with `K_T = Φ K_S Φ*`) into blocks along the two
/// component partitions and extract the scalar coupling matrix `C`.
///
/// For each S-block `i` and T-block `j`, the products `Ψ_ij(μ) Φ_ji(μ)` and
/// `Φ_ji(μ) Ψ_ij(μ)` (with `Ψ = Φ⁻¹`) must be the constant `c_ij · I`;
/// every block must be invertible or zero at the component level; and each
/// row and column of `C = [c_ij]` must sum to 1. Deviations are reported in
/// the residual fields and the `violations` list rather than failing the
/// call; hard errors are reserved for inconsistent partitions or a
/// non-invertible `Φ`.
pub fn intertwiner_structure(
    phi: &HoloSeries,
    partition_t: &[usize],
    partition_s: &[usize],
    tol: &Tolerances,
) -> Result<IntertwinerReport> {
    let n = phi.rank();
    if partition_t.iter().sum::<usize>() != n || partition_t.iter().any(|&p| p == 0) {
        return Err(Error::InvalidPartition(format!(
            "T-side partition {partition_t:?} does not tile rank {n}"
        )));
    }
    if partition_s.iter().sum::<usize>() != n || partition_s.iter().any(|&p| p == 0) {
        return Err(Error::InvalidPartition(format!(
            "S-side partition {partition_s:?} does not tile rank {n}"
        )));
    }
    let psi = phi.invert()?;
    let identity = HoloSeries::identity(n, phi.degree());
    let inverse_residual = psi.product(phi)?.max_diff(&identity);

    let offsets = |partition: &[usize]| -> Vec<usize> {
        let mut acc = 0;
        partition
            .iter()
            .map(|p| {
                let at = acc;
                acc += p;
                at
            })
            .collect()
    };
    let t_off = offsets(partition_t);
    let s_off = offsets(partition_s);
    let degree = phi.degree();
    let scale = phi.max_coeff_norm().max(psi.max_coeff_norm()).max(1.0);

    let mut c = vec![vec![0.0f64; partition_t.len()]; partition_s.len()];
    let mut classes =
        vec![vec![BlockClass::Zero; partition_t.len()]; partition_s.len()];
    let mut scalar_residual = 0.0f64;
    let mut violations = Vec::new();

    for (i, (&so, &ss)) in s_off.iter().zip(partition_s).enumerate() {
        for (j, (&to, &ts)) in t_off.iter().zip(partition_t).enumerate() {
            // Ψ_ij: S-block rows × T-block cols; Φ_ji: T-block rows × S-block cols.
            let psi_block: Vec<CMat> = (0..=degree)
                .map(|m| psi.coeff(m).view((so, to), (ss, ts)).into_owned())
                .collect();
            let phi_block: Vec<CMat> = (0..=degree)
                .map(|m| phi.coeff(m).view((to, so), (ts, ss)).into_owned())
                .collect();

            // Constant-fit of Ψ_ij(μ)Φ_ji(μ) = c·I from the order-0 trace.
            let p0 = &psi_block[0] * &phi_block[0];
            let fitted = p0.trace().re / ss as f64;
            for m in 0..=degree {
                let mut p_m = matrix::zeros(ss, ss);
                let mut q_m = matrix::zeros(ts, ts);
                for a in 0..=m {
                    p_m += &psi_block[a] * &phi_block[m - a];
                    q_m += &phi_block[a] * &psi_block[m - a];
                }
                let target = if m == 0 { fitted } else { 0.0 };
                scalar_residual = scalar_residual
                    .max(matrix::max_abs_diff(&p_m, &matrix::eye(ss).scale(target)))
                    .max(matrix::max_abs_diff(&q_m, &matrix::eye(ts).scale(target)));
            }
            if fitted < -10.0 * tol.zero {
                violations.push(format!("c[{i}][{j}] = {fitted:.3e} is negative"));
            }
            c[i][j] = if fitted.abs() <= 10.0 * tol.zero { 0.0 } else { fitted };

            // Classify by the constant term of the Φ block.
            let sv = matrix::singular_values(&phi_block[0]);
            let smin = sv.last().copied().unwrap_or(0.0);
            let class = if smin > tol.zero * scale {
                BlockClass::Invertible
            } else {
                BlockClass::Zero
            };
            classes[i][j] = class;
            match class {
                BlockClass::Invertible => {
                    if ss != ts {
                        violations.push(format!(
                            "block ({i},{j}) is invertible but not square ({ts}×{ss})"
                        ));
                    }
                    if c[i][j] == 0.0 {
                        violations.push(format!(
                            "block ({i},{j}) is invertible yet couples with c = 0"
                        ));
                    }
                }
                BlockClass::Zero => {
                    let full_norm = phi_block.iter().map(matrix::max_abs).fold(0.0, f64::max);
                    if full_norm > 10.0 * tol.zero * scale {
                        violations.push(format!(
                            "block ({i},{j}) vanishes at μ=0 but carries weight {full_norm:.3e} \
                             at higher orders"
                        ));
                    }
                    if c[i][j] != 0.0 {
                        violations.push(format!(
                            "block ({i},{j}) is zero yet couples with c = {:.3e}",
                            c[i][j]
                        ));
                    }
                }
            }
        }
    }

    let mut sum_residual = 0.0f64;
    for row in &c {
        sum_residual = sum_residual.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    for j in 0..partition_t.len() {
        let col: f64 = c.iter().map(|row| row[j]).sum();
        sum_residual = sum_residual.max((col - 1.0).abs());
    }
    if sum_residual > 100.0 * tol.zero {
        violations.push(format!(
            "row/column sums of C deviate from 1 by {sum_residual:.3e}"
        ));
    }

    Ok(IntertwinerReport {
        partition_t: partition_t.to_vec(),
        partition_s: partition_s.to_vec(),
        c,
        classes,
        scalar_residual,
        sum_residual,
        inverse_residual,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holo::scalar_series;
    use crate::normalize::coefficient_family;
    use crate::zoo;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn family_of(k: &KernelSeries) -> MatrixFamily {
        MatrixFamily::new(k.rank(), coefficient_family(k, &tol()).unwrap()).unwrap()
    }

    #[test]
    fn intertwiner_dimensions() {
        let s = family_of(&zoo::szego(4));
        let b = family_of(&zoo::bergman(4));
        assert_eq!(intertwiner_space(&s, &s, &tol()).unwrap().len(), 1);
        assert_eq!(intertwiner_space(&s, &b, &tol()).unwrap().len(), 0);
        let ss = family_of(
            &KernelSeries::direct_sum(&[zoo::szego(4), zoo::szego(4)]).unwrap(),
        );
        assert_eq!(intertwiner_space(&ss, &ss, &tol()).unwrap().len(), 4);
    }

    #[test]
    fn witness_recovers_conjugating_unitary() {
        let jet = zoo::jet_kernel(&zoo::bergman_alpha_weights(1.0, 5)).unwrap();
        let k0 = normalize(&jet, &tol()).unwrap().k0;
        let f = full_grid_family(&k0).unwrap();
        let v = zoo::haar_unitary(2, 31);
        let g = MatrixFamily::new_closed(
            2,
            f.members().iter().map(|a| &v * a * v.adjoint()).collect(),
        )
        .unwrap();
        let w = unitary_witness_irreducible(&f, &g, &tol()).unwrap().unwrap();
        for (a, b) in f.members().iter().zip(g.members()) {
            assert!(matrix::max_abs_diff(&(&w * a * w.adjoint()), b) < 1e-10);
        }
        // Agreement with V up to the fixed phase.
        let ratio = w[(0, 0)] / v[(0, 0)];
        assert!((ratio.norm() - 1.0).abs() < 1e-10);
        assert!(matrix::max_abs_diff(&w, &(&v * ratio)) < 1e-10);
    }

    #[test]
    fn szego_is_self_equivalent_with_identity_witness() {
        let verdict = are_equivalent(&zoo::szego(5), &zoo::szego(5), 0, &tol()).unwrap();
        assert_eq!(verdict.verdict, Verdict::Equivalent);
        let phi = verdict.witness.unwrap();
        assert!(phi.max_diff(&HoloSeries::identity(1, 5)) < 1e-10);
    }

    #[test]
    fn szego_and_bergman_are_not_equivalent_both_ways() {
        let v1 = are_equivalent(&zoo::szego(5), &zoo::bergman(5), 0, &tol()).unwrap();
        let v2 = are_equivalent(&zoo::bergman(5), &zoo::szego(5), 0, &tol()).unwrap();
        assert_eq!(v1.verdict, Verdict::NotEquivalent);
        assert_eq!(v2.verdict, Verdict::NotEquivalent);
    }

    #[test]
    fn close_weights_are_still_separated() {
        let a = zoo::diagonal_kernel(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = zoo::diagonal_kernel(&[1.0, 1.0 + 2e-6, 1.0, 1.0]).unwrap();
        let verdict = are_equivalent(&a, &b, 0, &tol()).unwrap();
        assert_eq!(verdict.verdict, Verdict::NotEquivalent);
    }

    #[test]
    fn congruence_round_trip_is_equivalent() {
        for seed in 0..3 {
            let k = zoo::random_psd_kernel(2, 5, 0, 1000 + seed).unwrap();
            let phi = zoo::random_invertible_holo(2, 5, 1100 + seed);
            let k_t = KernelSeries::congruence(&phi, &k, &phi).unwrap();
            let verdict = are_equivalent(&k_t, &k, seed, &tol()).unwrap();
            assert_eq!(verdict.verdict, Verdict::Equivalent, "seed {seed}: {}", verdict.detail);
            assert!(verdict.residual.unwrap() < 10.0 * tol().zero);
        }
    }

    #[test]
    fn permuted_direct_sums_are_equivalent() {
        let sb = KernelSeries::direct_sum(&[zoo::szego(5), zoo::bergman(5)]).unwrap();
        let bs = KernelSeries::direct_sum(&[zoo::bergman(5), zoo::szego(5)]).unwrap();
        let verdict = are_equivalent(&sb, &bs, 0, &tol()).unwrap();
        assert_eq!(verdict.verdict, Verdict::Equivalent);
        let pi = verdict.permutation.unwrap();
        let mut sorted = pi.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);
        // The witness must be a constant antidiagonal permutation (up to phase).
        let phi = verdict.witness.unwrap();
        let p0 = phi.coeff(0);
        assert!(p0[(0, 0)].norm() < 1e-9 && p0[(1, 1)].norm() < 1e-9);
        assert!((p0[(0, 1)].norm() - 1.0).abs() < 1e-9);
        assert!((p0[(1, 0)].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn verdict_implies_antiholomorphy() {
        let k = zoo::random_psd_kernel(2, 5, 0, 1200).unwrap();
        let phi = zoo::random_invertible_holo(2, 5, 1201);
        let k_t = KernelSeries::congruence(&phi, &k, &phi).unwrap();
        let verdict = are_equivalent(&k_t, &k, 0, &tol()).unwrap();
        assert_eq!(verdict.verdict, Verdict::Equivalent);
        // Orient the witness as K_S = Ψ K_T Ψ*: Ψ = Φ⁻¹.
        let psi = verdict.witness.unwrap().invert().unwrap();
        let (ok, residual) = antiholomorphy_check(&k_t, &k, &psi, &tol()).unwrap();
        assert!(ok, "antiholomorphy residual {residual:.3e}");
    }

    #[test]
    fn antiholomorphy_flags_szego_vs_bergman() {
        let id = HoloSeries::identity(1, 6);
        let (ok, residual) =
            antiholomorphy_check(&zoo::szego(6), &zoo::bergman(6), &id, &tol()).unwrap();
        assert!(!ok);
        assert!((residual - 1.0).abs() < 1e-12, "residual {residual}");
        // And the scalar-constant gauge is accepted on identical kernels.
        let c = scalar_series(&[2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (ok2, r2) = antiholomorphy_check(&zoo::szego(6), &zoo::szego(6), &c, &tol()).unwrap();
        assert!(ok2, "residual {r2:.3e}");
    }

    #[test]
    fn structure_of_identity_witness() {
        let phi = HoloSeries::identity(2, 4);
        let report = intertwiner_structure(&phi, &[1, 1], &[1, 1], &tol()).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
        assert_eq!(report.c, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(report.classes[0][0], BlockClass::Invertible);
        assert_eq!(report.classes[0][1], BlockClass::Zero);
    }

    #[test]
    fn structure_of_block_diagonal_witness() {
        let phi1 = zoo::random_invertible_holo(1, 4, 51);
        let phi2 = zoo::random_invertible_holo(2, 4, 52);
        let phi = HoloSeries::direct_sum(&[phi1, phi2]).unwrap();
        let report = intertwiner_structure(&phi, &[1, 2], &[1, 2], &tol()).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
        assert!((report.c[0][0] - 1.0).abs() < 1e-10);
        assert!((report.c[1][1] - 1.0).abs() < 1e-10);
        assert!(report.c[0][1].abs() < 1e-10 && report.c[1][0].abs() < 1e-10);
        assert_eq!(report.component_groups(), vec![(vec![0], vec![0]), (vec![1], vec![1])]);
    }

    #[test]
    fn structure_of_swap_witness() {
        let sb = KernelSeries::direct_sum(&[zoo::szego(5), zoo::bergman(5)]).unwrap();
        let bs = KernelSeries::direct_sum(&[zoo::bergman(5), zoo::szego(5)]).unwrap();
        let verdict = are_equivalent(&sb, &bs, 0, &tol()).unwrap();
        let phi = verdict.witness.unwrap();
        let report = intertwiner_structure(&phi, &[1, 1], &[1, 1], &tol()).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
        for (i, row) in report.c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 0.0 } else { 1.0 };
                assert!((v - expect).abs() < 1e-9, "c[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn structure_rejects_bad_partition() {
        let phi = HoloSeries::identity(3, 2);
        assert!(intertwiner_structure(&phi, &[1, 1], &[1, 1, 1], &tol()).is_err());
        assert!(intertwiner_structure(&phi, &[3, 0], &[3], &tol()).is_err());
    }
}
