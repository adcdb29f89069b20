//! Batch front end for the kernel library: reads kernel JSON files, runs
//! one library operation, writes a JSON report, and encodes the outcome in
//! the exit code.
//!
//! Exit codes: 0 success (or "equivalent"), 2 invalid input, 3 not
//! equivalent, 4 undecided, 5 internal verification failure. All randomness
//! flows from `--seed`; identical invocations produce identical bytes.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kerneq::commutant::{decompose, MatrixFamily};
use kerneq::equivalence::{are_equivalent, intertwiner_structure, BlockClass, Verdict};
use kerneq::error::Error;
use kerneq::geometry::{covariant_table, curvature_eigen_invariants, MetricSeries};
use kerneq::holo::HoloSeries;
use kerneq::json::{self, HoloJson, KernelJson};
use kerneq::kernel::KernelSeries;
use kerneq::matrix;
use kerneq::normalize::{coefficient_family, normalize};
use kerneq::tol::Tolerances;
use kerneq::zoo;

#[derive(Parser)]
#[command(
    name = "kerneq",
    version,
    about = "Matrix-valued kernel power series: curvature, normalization, \
             block decomposition, and unitary equivalence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Truncation degree for generated kernels.
    #[arg(long, global = true, default_value_t = 8)]
    degree: usize,

    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Evaluation radius for the spot check in `validate`.
    #[arg(long, global = true, default_value_t = 0.9)]
    radius: f64,

    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a kernel's structural validity and print diagnostics.
    Validate { kernel: PathBuf },

    /// Curvature and covariant derivatives as coefficient tables, plus the
    /// eigenvalue invariants at the origin.
    Curvature {
        kernel: PathBuf,
        /// Covariant order: emits every entry (i, j) with i + j ≤ order.
        #[arg(long, default_value_t = 0)]
        order: usize,
        /// Which metric to differentiate.
        #[arg(long, value_enum, default_value_t = ConventionArg::Direct)]
        convention: ConventionArg,
    },

    /// Compute the normalizing gauge at the origin and the normalized
    /// kernel it produces.
    Normalize { kernel: PathBuf },

    /// Block-diagonalize the normalized coefficient family into
    /// irreducible components with multiplicities.
    Decompose { kernel: PathBuf },

    /// Decide whether two kernels are unitarily equivalent; emits the
    /// verdict with its witness, and encodes the verdict in the exit code.
    Equiv { kernel_a: PathBuf, kernel_b: PathBuf },

    /// Dissect an equivalence witness into blocks along two component
    /// partitions and extract the scalar coupling matrix.
    Structure {
        /// A witness: either a holomorphic-series JSON or an `equiv`
        /// verdict JSON with a non-null "witness" field.
        witness: PathBuf,
        /// Block sizes of the first kernel (the congruence target),
        /// comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        partition_a: Vec<usize>,
        /// Block sizes of the second kernel, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        partition_b: Vec<usize>,
    },

    /// Generate named kernels and seeded random instances.
    Gen {
        #[command(subcommand)]
        kind: GenCommand,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum ConventionArg {
    /// h(p, q) = A_pq — metric of the kernel's own frame.
    Direct,
    /// h(p, q) = A_qp — metric of the conjugate-symmetric frame.
    Omega,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Rank-one kernel with unit weights.
    Szego,
    /// Rank-one kernel with weights k + 1.
    Bergman,
    /// Rank-one kernel with rising-factorial weights of parameter alpha.
    BergmanAlpha {
        #[arg(long)]
        alpha: f64,
    },
    /// Rank-one kernel with explicit weights (degree = number of weights − 1).
    DiagonalWeights {
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// Rank-two jet kernel over explicit base weights.
    Jet {
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// Direct sum of kernels read from files.
    DirectSum {
        #[arg(required = true)]
        parts: Vec<PathBuf>,
    },
    /// Direct sum of named parts, disguised by a seeded random unitary;
    /// writes the hidden ground truth to a separate file.
    CongruenceDisguised {
        /// Comma-separated part names: szego, bergman, jet, or alpha:<x>.
        #[arg(long, value_delimiter = ',', required = true)]
        parts: Vec<String>,
        /// Ground-truth path (default: the --output path with a
        /// .truth.json extension).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Seeded random positive kernel of the given rank.
    RandomPsd {
        #[arg(long)]
        rank: usize,
    },
}

/// A failed run: what to print and what to exit with.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::VerificationFailed(_) | Error::IrreducibleInconsistency(_) => 5,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    if cli.degree == 0 {
        return Err(Failure::input("--degree must be at least 1"));
    }
    if !(cli.radius > 0.0 && cli.radius.is_finite()) {
        return Err(Failure::input("--radius must be positive and finite"));
    }
    let tol = tolerances_from_env()?;

    match &cli.command {
        Command::Validate { kernel } => cmd_validate(cli, &tol, kernel),
        Command::Curvature { kernel, order, convention } => {
            cmd_curvature(cli, &tol, kernel, *order, *convention)
        }
        Command::Normalize { kernel } => cmd_normalize(cli, &tol, kernel),
        Command::Decompose { kernel } => cmd_decompose(cli, &tol, kernel),
        Command::Equiv { kernel_a, kernel_b } => cmd_equiv(cli, &tol, kernel_a, kernel_b),
        Command::Structure { witness, partition_a, partition_b } => {
            cmd_structure(cli, &tol, witness, partition_a, partition_b)
        }
        Command::Gen { kind } => cmd_gen(cli, &tol, kind),
    }
}

/// Tolerance defaults, with `RKHS_CD_TOLERANCE` overriding the base zero
/// threshold when set.
fn tolerances_from_env() -> Result<Tolerances, Failure> {
    match std::env::var("RKHS_CD_TOLERANCE") {
        Ok(text) => {
            let value: f64 = text.parse().map_err(|_| {
                Failure::input(format!("RKHS_CD_TOLERANCE is not a number: {text:?}"))
            })?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(Failure::input(format!(
                    "RKHS_CD_TOLERANCE must be positive and finite, got {value}"
                )));
            }
            Ok(Tolerances::with_zero(value))
        }
        Err(_) => Ok(Tolerances::default()),
    }
}

fn load_kernel(path: &Path) -> Result<KernelSeries, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(json::from_str(&text)?)
}

fn emit(cli: &Cli, body: &str) -> Result<(), Failure> {
    let mut text = body.to_string();
    text.push('\n');
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

// ---------------------------------------------------------------------------
// validate

#[derive(Serialize)]
struct ValidateOut {
    rank: usize,
    degree: usize,
    coefficient_scale: f64,
    hermitian_residual: f64,
    gram_min_eigenvalue: f64,
    gram_max_eigenvalue: f64,
    a00_condition: f64,
    hermitian_ok: bool,
    psd_ok: bool,
    a00_invertible: bool,
    eval_finite_at_radius: bool,
    valid: bool,
}

fn cmd_validate(cli: &Cli, tol: &Tolerances, path: &Path) -> Result<i32, Failure> {
    let kernel = load_kernel(path)?;
    let report = kernel.validate(tol);
    let at_radius = kernel.eval(matrix::re(cli.radius), matrix::re(cli.radius));
    let out = ValidateOut {
        rank: report.rank,
        degree: report.degree,
        coefficient_scale: report.coefficient_scale,
        hermitian_residual: report.hermitian_residual,
        gram_min_eigenvalue: report.gram_min_eigenvalue,
        gram_max_eigenvalue: report.gram_max_eigenvalue,
        a00_condition: report.a00_condition,
        hermitian_ok: report.hermitian_ok,
        psd_ok: report.psd_ok,
        a00_invertible: report.a00_invertible,
        eval_finite_at_radius: matrix::all_finite(&at_radius),
        valid: report.is_valid(),
    };
    emit(cli, &pretty(&out))?;
    if out.valid {
        Ok(0)
    } else {
        eprintln!("error: {}", report.summary());
        Ok(2)
    }
}

// ---------------------------------------------------------------------------
// curvature

#[derive(Serialize)]
struct BiCoefficientOut {
    p: usize,
    q: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct CurvatureEntryOut {
    entry: [usize; 2],
    #[serde(rename = "box")]
    validity: [usize; 2],
    coefficients: Vec<BiCoefficientOut>,
}

#[derive(Serialize)]
struct CurvatureOut {
    convention: String,
    order: usize,
    entries: Vec<CurvatureEntryOut>,
    /// Elementary symmetric functions of the curvature eigenvalues at the
    /// origin, from trace (first) to determinant (last), as [re, im].
    origin_invariants: Vec<[f64; 2]>,
}

fn cmd_curvature(
    cli: &Cli,
    tol: &Tolerances,
    path: &Path,
    order: usize,
    convention: ConventionArg,
) -> Result<i32, Failure> {
    let kernel = load_kernel(path)?;
    kernel.require_valid(tol)?;
    let (h, name) = match convention {
        ConventionArg::Direct => (MetricSeries::direct(&kernel, tol)?, "direct"),
        ConventionArg::Omega => (MetricSeries::omega(&kernel, tol)?, "omega"),
    };
    let table = covariant_table(&h, order)?;
    let mut entries = Vec::new();
    for i in 0..=order {
        for j in 0..=(order - i) {
            let series = table.entry(i, j);
            let stored = series.stored();
            let validity = series.validity();
            let eff = (validity.0.min(stored.0), validity.1.min(stored.1));
            let mut coefficients = Vec::new();
            for p in 0..=eff.0 {
                for q in 0..=eff.1 {
                    let c = series.coeff(p, q);
                    if matrix::max_abs(&c) == 0.0 {
                        continue;
                    }
                    coefficients.push(BiCoefficientOut {
                        p,
                        q,
                        matrix: json::matrix_entries(&c),
                    });
                }
            }
            entries.push(CurvatureEntryOut {
                entry: [i, j],
                validity: [eff.0, eff.1],
                coefficients,
            });
        }
    }
    let invariants = curvature_eigen_invariants(&h)?;
    let origin_invariants = invariants
        .iter()
        .map(|e| {
            let v = e.coeff(0, 0)[(0, 0)];
            [v.re, v.im]
        })
        .collect();
    let out = CurvatureOut {
        convention: name.to_string(),
        order,
        entries,
        origin_invariants,
    };
    emit(cli, &pretty(&out))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// normalize

#[derive(Serialize)]
struct NormalizeOut {
    #[serde(rename = "K0")]
    k0: KernelJson,
    gauge: HoloJson,
}

fn cmd_normalize(cli: &Cli, tol: &Tolerances, path: &Path) -> Result<i32, Failure> {
    let kernel = load_kernel(path)?;
    kernel.require_valid(tol)?;
    let pair = normalize(&kernel, tol)?;
    let out = NormalizeOut {
        k0: KernelJson::from(&pair.k0),
        gauge: HoloJson::from(&pair.gauge),
    };
    emit(cli, &pretty(&out))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// decompose

#[derive(Serialize)]
struct ComponentOut {
    rank: usize,
    multiplicity: usize,
}

#[derive(Serialize)]
struct DecomposeOut {
    t: usize,
    components: Vec<ComponentOut>,
    commutant_dim: usize,
    unitary: Vec<Vec<[f64; 2]>>,
    residual: f64,
}

fn cmd_decompose(cli: &Cli, tol: &Tolerances, path: &Path) -> Result<i32, Failure> {
    let kernel = load_kernel(path)?;
    kernel.require_valid(tol)?;
    let pair = normalize(&kernel, tol)?;
    let family = MatrixFamily::new(pair.k0.rank(), coefficient_family(&pair.k0, tol)?)?;
    let decomposition = decompose(&family, cli.seed, tol)?;
    let out = DecomposeOut {
        t: decomposition.t(),
        components: decomposition
            .components
            .iter()
            .map(|c| ComponentOut { rank: c.rank, multiplicity: c.multiplicity })
            .collect(),
        commutant_dim: decomposition.commutant_dim,
        unitary: json::matrix_entries(&decomposition.unitary),
        residual: decomposition.residual,
    };
    emit(cli, &pretty(&out))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// equiv

#[derive(Serialize)]
struct EquivOut {
    verdict: String,
    residual: Option<f64>,
    witness: Option<HoloJson>,
    permutation: Option<Vec<usize>>,
    detail: String,
}

fn cmd_equiv(cli: &Cli, tol: &Tolerances, path_a: &Path, path_b: &Path) -> Result<i32, Failure> {
    let kernel_a = load_kernel(path_a)?;
    let kernel_b = load_kernel(path_b)?;
    let verdict = are_equivalent(&kernel_a, &kernel_b, cli.seed, tol)?;
    let out = EquivOut {
        verdict: verdict.verdict.to_string(),
        residual: verdict.residual,
        witness: verdict.witness.as_ref().map(HoloJson::from),
        permutation: verdict.permutation.clone(),
        detail: verdict.detail.clone(),
    };
    emit(cli, &pretty(&out))?;
    Ok(match verdict.verdict {
        Verdict::Equivalent => 0,
        Verdict::NotEquivalent => 3,
        Verdict::Undecided => 4,
    })
}

// ---------------------------------------------------------------------------
// structure

#[derive(Serialize)]
struct StructureOut {
    partition_t: Vec<usize>,
    partition_s: Vec<usize>,
    /// Scalar coupling matrix; rows follow the second kernel's partition,
    /// columns the first's.
    c: Vec<Vec<f64>>,
    classes: Vec<Vec<String>>,
    scalar_residual: f64,
    sum_residual: f64,
    inverse_residual: f64,
    component_groups: Vec<GroupOut>,
    violations: Vec<String>,
    ok: bool,
}

#[derive(Serialize)]
struct GroupOut {
    s_blocks: Vec<usize>,
    t_blocks: Vec<usize>,
}

fn load_witness(path: &Path) -> Result<HoloSeries, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: JSON parse error: {e}", path.display())))?;
    // Accept either a bare series or an `equiv` verdict carrying one.
    let series_value = match value.get("witness") {
        Some(serde_json::Value::Null) => {
            return Err(Failure::input(
                "verdict JSON has no witness (the kernels were not equivalent)",
            ));
        }
        Some(inner) => inner.clone(),
        None => value,
    };
    let parsed: HoloJson = serde_json::from_value(series_value)
        .map_err(|e| Failure::input(format!("witness is not a holomorphic series: {e}")))?;
    Ok(parsed.into_series()?)
}

fn cmd_structure(
    cli: &Cli,
    tol: &Tolerances,
    witness: &Path,
    partition_a: &[usize],
    partition_b: &[usize],
) -> Result<i32, Failure> {
    let phi = load_witness(witness)?;
    let report = intertwiner_structure(&phi, partition_a, partition_b, tol)?;
    let out = StructureOut {
        partition_t: report.partition_t.clone(),
        partition_s: report.partition_s.clone(),
        c: report.c.clone(),
        classes: report
            .classes
            .iter()
            .map(|row| {
                row.iter()
                    .map(|class| {
                        match class {
                            BlockClass::Zero => "zero",
                            BlockClass::Invertible => "invertible",
                        }
                        .to_string()
                    })
                    .collect()
            })
            .collect(),
        scalar_residual: report.scalar_residual,
        sum_residual: report.sum_residual,
        inverse_residual: report.inverse_residual,
        component_groups: report
            .component_groups()
            .into_iter()
            .map(|(s_blocks, t_blocks)| GroupOut { s_blocks, t_blocks })
            .collect(),
        violations: report.violations.clone(),
        ok: report.ok(),
    };
    emit(cli, &pretty(&out))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// gen

#[derive(Serialize)]
struct TruthOut {
    summand_ranks: Vec<usize>,
    unitary: Vec<Vec<[f64; 2]>>,
}

fn named_part(name: &str, degree: usize) -> Result<KernelSeries, Failure> {
    if let Some(alpha_text) = name.strip_prefix("alpha:") {
        let alpha: f64 = alpha_text
            .parse()
            .map_err(|_| Failure::input(format!("bad alpha parameter in part {name:?}")))?;
        return Ok(zoo::bergman_alpha(alpha, degree)?);
    }
    match name {
        "szego" => Ok(zoo::szego(degree)),
        "bergman" => Ok(zoo::bergman(degree)),
        "jet" => Ok(zoo::jet_kernel(&vec![1.0; degree + 1])?),
        other => Err(Failure::input(format!(
            "unknown part {other:?} (expected szego, bergman, jet, or alpha:<x>)"
        ))),
    }
}

fn cmd_gen(cli: &Cli, tol: &Tolerances, kind: &GenCommand) -> Result<i32, Failure> {
    let kernel = match kind {
        GenCommand::Szego => zoo::szego(cli.degree),
        GenCommand::Bergman => zoo::bergman(cli.degree),
        GenCommand::BergmanAlpha { alpha } => zoo::bergman_alpha(*alpha, cli.degree)?,
        GenCommand::DiagonalWeights { weights } => zoo::diagonal_kernel(weights)?,
        GenCommand::Jet { weights } => zoo::jet_kernel(weights)?,
        GenCommand::DirectSum { parts } => {
            let kernels = parts.iter().map(|p| load_kernel(p)).collect::<Result<Vec<_>, _>>()?;
            KernelSeries::direct_sum(&kernels)?
        }
        GenCommand::CongruenceDisguised { parts, truth } => {
            let truth_path = match (truth, &cli.output) {
                (Some(path), _) => path.clone(),
                (None, Some(output)) => output.with_extension("truth.json"),
                (None, None) => {
                    return Err(Failure::input(
                        "congruence-disguised needs --truth or --output so the ground \
                         truth has a file to go to",
                    ));
                }
            };
            let kernels = parts
                .iter()
                .map(|name| named_part(name, cli.degree))
                .collect::<Result<Vec<_>, _>>()?;
            let (kernel, truth) = zoo::disguised_direct_sum(&kernels, cli.seed)?;
            let truth_out = TruthOut {
                summand_ranks: truth.summand_ranks.clone(),
                unitary: json::matrix_entries(&truth.unitary),
            };
            let mut truth_text = pretty(&truth_out);
            truth_text.push('\n');
            std::fs::write(&truth_path, truth_text)
                .map_err(|e| Failure::input(format!("{}: {e}", truth_path.display())))?;
            kernel
        }
        GenCommand::RandomPsd { rank } => {
            if *rank == 0 {
                return Err(Failure::input("--rank must be at least 1"));
            }
            zoo::random_psd_kernel(*rank, cli.degree, 0, cli.seed)?
        }
    };
    kernel.require_valid(tol)?;
    emit(cli, &json::to_string(&kernel))?;
    Ok(0)
}
