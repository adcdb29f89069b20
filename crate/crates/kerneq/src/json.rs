//! JSON encoding of kernels.
//!
//! The format is a flat coefficient list — only nonzero coefficients are
//! stored, in lexicographic `(m, q)` order, each as a row-major complex
//! matrix with `[re, im]` entries:
//!
//! ```json
//! {
//!   "rank": 1,
//!   "degree": 2,
//!   "coefficients": [
//!     { "m": 0, "q": 0, "matrix": [[[1.0, 0.0]]] },
//!     { "m": 1, "q": 1, "matrix": [[[1.0, 0.0]]] },
//!     { "m": 2, "q": 2, "matrix": [[[1.0, 0.0]]] }
//!   ]
//! }
//! ```
//!
//! Parsing is strict: unknown fields, duplicate positions, out-of-range
//! indices, ragged matrices, and non-finite entries are all rejected.
//! Serialization uses shortest-roundtrip float printing, so a kernel
//! survives an encode/decode cycle bit for bit.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holo::HoloSeries;
use crate::kernel::KernelSeries;
use crate::matrix::{self, CMat, C64};

/// Serde mirror of a kernel. Convert with [`KernelJson::from`] and
/// [`KernelJson::into_kernel`]; use [`to_string`] / [`from_str`] for the
/// usual text round trip.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub rank: usize,
    pub degree: usize,
    pub coefficients: Vec<CoefficientJson>,
}

/// One stored coefficient `A_{m,q}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientJson {
    pub m: usize,
    pub q: usize,
    /// Row-major `rank × rank` matrix; each entry is `[re, im]`.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl From<&KernelSeries> for KernelJson {
    fn from(kernel: &KernelSeries) -> Self {
        let mut coefficients = Vec::new();
        for m in 0..=kernel.degree() {
            for q in 0..=kernel.degree() {
                let a = kernel.coeff(m, q);
                if matrix::max_abs(a) == 0.0 {
                    continue;
                }
                coefficients.push(CoefficientJson { m, q, matrix: matrix_entries(a) });
            }
        }
        KernelJson { rank: kernel.rank(), degree: kernel.degree(), coefficients }
    }
}

impl KernelJson {
    /// Validate and assemble the coefficient grid (absent positions are
    /// zero).
    pub fn into_kernel(self) -> Result<KernelSeries> {
        let n = self.rank;
        if n == 0 {
            return Err(Error::InvalidKernel("rank must be at least 1".into()));
        }
        let d = self.degree;
        let mut grid = vec![matrix::zeros(n, n); (d + 1) * (d + 1)];
        let mut seen = HashSet::new();
        for coeff in self.coefficients {
            if coeff.m > d || coeff.q > d {
                return Err(Error::InvalidKernel(format!(
                    "coefficient ({}, {}) lies outside degree {d}",
                    coeff.m, coeff.q
                )));
            }
            if !seen.insert((coeff.m, coeff.q)) {
                return Err(Error::InvalidKernel(format!(
                    "duplicate coefficient ({}, {})",
                    coeff.m, coeff.q
                )));
            }
            grid[coeff.m * (d + 1) + coeff.q] = parse_matrix(
                &coeff.matrix,
                n,
                &format!("coefficient ({}, {})", coeff.m, coeff.q),
            )?;
        }
        KernelSeries::new(n, d, grid)
    }
}

/// Pretty-printed JSON for a kernel (deterministic bytes).
pub fn to_string(kernel: &KernelSeries) -> String {
    serde_json::to_string_pretty(&KernelJson::from(kernel)).expect("kernel serializes")
}

/// Parse a kernel, rejecting malformed or inconsistent input.
pub fn from_str(text: &str) -> Result<KernelSeries> {
    let parsed: KernelJson = serde_json::from_str(text)
        .map_err(|e| Error::InvalidKernel(format!("JSON parse error: {e}")))?;
    parsed.into_kernel()
}

/// Serde mirror of a holomorphic series — the one-variable analogue of
/// [`KernelJson`], used for gauges and equivalence witnesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoloJson {
    pub rank: usize,
    pub degree: usize,
    pub coefficients: Vec<HoloCoefficientJson>,
}

/// One stored series coefficient (of `μ^m`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoloCoefficientJson {
    pub m: usize,
    /// Row-major `rank × rank` matrix; each entry is `[re, im]`.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl From<&HoloSeries> for HoloJson {
    fn from(series: &HoloSeries) -> Self {
        let coefficients = (0..=series.degree())
            .filter(|&m| matrix::max_abs(series.coeff(m)) != 0.0)
            .map(|m| HoloCoefficientJson { m, matrix: matrix_entries(series.coeff(m)) })
            .collect();
        HoloJson { rank: series.rank(), degree: series.degree(), coefficients }
    }
}

impl HoloJson {
    /// Validate and assemble the series (absent orders are zero).
    pub fn into_series(self) -> Result<HoloSeries> {
        let n = self.rank;
        if n == 0 {
            return Err(Error::InvalidKernel("rank must be at least 1".into()));
        }
        let mut coeffs = vec![matrix::zeros(n, n); self.degree + 1];
        let mut seen = HashSet::new();
        for coeff in self.coefficients {
            if coeff.m > self.degree {
                return Err(Error::InvalidKernel(format!(
                    "coefficient {} lies outside degree {}",
                    coeff.m, self.degree
                )));
            }
            if !seen.insert(coeff.m) {
                return Err(Error::InvalidKernel(format!("duplicate coefficient {}", coeff.m)));
            }
            coeffs[coeff.m] = parse_matrix(&coeff.matrix, n, &format!("coefficient {}", coeff.m))?;
        }
        HoloSeries::new(n, coeffs)
    }
}

/// Pretty-printed JSON for a holomorphic series (deterministic bytes).
pub fn holo_to_string(series: &HoloSeries) -> String {
    serde_json::to_string_pretty(&HoloJson::from(series)).expect("series serializes")
}

/// Parse a holomorphic series, rejecting malformed or inconsistent input.
pub fn holo_from_str(text: &str) -> Result<HoloSeries> {
    let parsed: HoloJson = serde_json::from_str(text)
        .map_err(|e| Error::InvalidKernel(format!("JSON parse error: {e}")))?;
    parsed.into_series()
}

/// Row-major `[re, im]` entry grid for one matrix — the building block all
/// the JSON formats share.
pub fn matrix_entries(a: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

/// Parse one `n × n` matrix out of its entry grid, checking shape and
/// finiteness; `what` names the location in error messages.
pub fn parse_matrix(entries: &[Vec<[f64; 2]>], n: usize, what: &str) -> Result<CMat> {
    if entries.len() != n {
        return Err(Error::InvalidKernel(format!(
            "{what} has {} rows, expected {n}",
            entries.len()
        )));
    }
    let mut a = matrix::zeros(n, n);
    for (i, row) in entries.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidKernel(format!(
                "{what} row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::InvalidKernel(format!("non-finite entry in {what}")));
            }
            a[(i, j)] = C64::new(re, im);
        }
    }
    Ok(a)
}
