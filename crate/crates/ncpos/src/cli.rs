//! Command-line driver. Exit codes: 0 positive or certified, 1 not positive
//! (witness written), 2 inaccurate, 3 usage or input error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncpos_core::certify::{self, CertifyOptions, MembershipProblem, Verdict, WitnessSearch};
use ncpos_core::fejer::{self, FactorizeOptions, PositivityVerdict};
use ncpos_core::fock;
use ncpos_core::groupfree::{povm_from_variables, GroupPoly};
use ncpos_core::linalg;
use ncpos_core::pencil::LinearPencil;
use ncpos_core::sdp::export_sdpa;
use ncpos_core::{NcPoly, WordImages};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::format::{
    parse_any_poly, parse_pencil, AnyPoly, CertificateJson, FactorizationJson, GroupWitnessJson, ReportJson,
    WitnessJson,
};

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NOT_POSITIVE: i32 = 1;
pub const EXIT_INACCURATE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ncpos", version, about = "Positivity certificates for noncommutative polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify positivity of a polynomial on the free spectrahedron of a pencil.
    Certify {
        #[command(flatten)]
        input: PencilInput,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factor a group polynomial as a sum of hermitian squares.
    Factorize {
        #[arg(long)]
        poly: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search only for a point where the polynomial is not positive.
    Witness {
        #[arg(long)]
        poly: PathBuf,
        /// Required for free polynomials; group polynomials use the POVM pencil.
        #[arg(long)]
        pencil: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fock-space round trip on random polynomials.
    ExtractCheck {
        #[arg(long)]
        g: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the extraction matrix and its condition number as JSON.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Write the membership SDP in SDPA sparse format.
    ExportSdpa {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        pencil: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        degree: Degree,
        /// Export the lower-bound problem instead of the feasibility problem.
        #[arg(long)]
        lower_bound: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct PencilInput {
    #[arg(long)]
    poly: PathBuf,
    #[arg(long)]
    pencil: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    #[arg(long, default_value = "auto")]
    degree: Degree,
    /// Feasibility tolerance of the SDP solver.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Solver::Internal)]
    solver: Solver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Solver {
    Internal,
    /// Write the SDP as an SDPA file next to `--out` for an external solver.
    SdpaFile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Degree {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Degree {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Degree::Auto);
        }
        s.parse().map(Degree::Fixed).map_err(|_| format!("expected `auto` or a non-negative integer, got {s:?}"))
    }
}

impl Degree {
    fn get(self) -> Option<usize> {
        match self {
            Degree::Auto => None,
            Degree::Fixed(k) => Some(k),
        }
    }
}

impl SolveArgs {
    fn certify_options(&self) -> CertifyOptions {
        let mut opts = CertifyOptions { seed: self.seed, samples: self.samples, ..Default::default() };
        opts.sdp.tol_feas = self.tol;
        opts
    }

    fn factorize_options(&self) -> FactorizeOptions {
        FactorizeOptions {
            certify: self.certify_options(),
            degree: self.degree.get(),
            samples: self.samples,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: crate::format::FormatError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ncpos_core::Error),
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_poly(path: &Path) -> CliResult<AnyPoly> {
    parse_any_poly(&read(path)?).map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

fn load_pencil(path: &Path) -> CliResult<LinearPencil> {
    parse_pencil(&read(path)?).map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

fn free_problem(poly: &Path, pencil: &Path, degree: Degree) -> CliResult<MembershipProblem> {
    let p = match load_poly(poly)? {
        AnyPoly::Free(p) => p,
        AnyPoly::Group(_) => return Err(CliError::Usage(format!("{}: expected a free polynomial", poly.display()))),
    };
    let l = load_pencil(pencil)?;
    Ok(match degree.get() {
        Some(d) => MembershipProblem::with_degree(p, l, d)?,
        None => MembershipProblem::new(p, l)?,
    })
}

fn sdpa_path(out: &Path) -> PathBuf {
    out.with_extension("dat-s")
}

fn delegate_to_sdpa(mp: &MembershipProblem, out: &Path) -> CliResult<i32> {
    let path = sdpa_path(out);
    let text = export_sdpa(&certify::assemble_membership_sdp(mp)?);
    fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let msg = format!("membership SDP written to {} for an external solver", path.display());
    eprintln!("{msg}");
    write_json(out, &ReportJson::new("delegated", msg))?;
    Ok(EXIT_INACCURATE)
}

fn cmd_certify(input: &PencilInput, solve: &SolveArgs, out: &Path) -> CliResult<i32> {
    let mp = free_problem(&input.poly, &input.pencil, solve.degree)?;
    if solve.solver == Solver::SdpaFile {
        return delegate_to_sdpa(&mp, out);
    }
    let opts = solve.certify_options();
    match certify::decide(&mp, &opts)? {
        Verdict::Certified(cert) => {
            let center = scalar_center(mp.pencil());
            let check = center
                .map(|c| certify::verify_certificate_from(mp.p(), mp.pencil(), &cert, &c, opts.samples, opts.seed))
                .transpose()?;
            if let Some(v) = &check {
                eprintln!("certified: residual {:.3e}, sampled margin {:.3e}", v.coeff_residual, v.min_eval_margin);
            }
            write_json(out, &CertificateJson::new(&cert, mp.pencil(), mp.degree(), check.as_ref()))?;
            Ok(EXIT_POSITIVE)
        }
        Verdict::NotPositive(w) => {
            eprintln!("not positive: witness value {:.6e} at size {}", w.value, w.y.first().map_or(0, |y| y.nrows()));
            write_json(out, &WitnessJson::new(&w))?;
            Ok(EXIT_NOT_POSITIVE)
        }
        Verdict::Inaccurate(msg) => {
            eprintln!("inaccurate: {msg}");
            write_json(out, &ReportJson::new("inaccurate", msg))?;
            Ok(EXIT_INACCURATE)
        }
    }
}

/// The origin when it lies in the interior of `D_L`; sampling is skipped otherwise.
fn scalar_center(l: &LinearPencil) -> Option<Vec<f64>> {
    let origin = vec![0.0; l.g()];
    (linalg::lambda_min(&l.evaluate_scalar(&origin)) > 1e-6).then_some(origin)
}

fn report_group(verdict: PositivityVerdict, out: Option<&Path>, witness_only: bool) -> CliResult<i32> {
    match verdict {
        PositivityVerdict::Positive(r) => {
            eprintln!(
                "positive: {} summands of extent ≤ {} (bound {}), residual {:.3e}",
                r.count(),
                r.max_summand_extent(),
                r.extent_bound,
                r.coeff_residual
            );
            if let Some(out) = out {
                if witness_only {
                    write_json(out, &ReportJson::new("positive", "no witness: the polynomial is positive"))?;
                } else {
                    write_json(out, &FactorizationJson::new(&r))?;
                }
            }
            Ok(EXIT_POSITIVE)
        }
        PositivityVerdict::NotPositive(w) => {
            eprintln!("not positive: POVM witness value {:.6e}", w.value);
            if let Some(u) = &w.unitary {
                eprintln!("unitary witness value {:.6e}", u.value);
            }
            if let Some(note) = &w.dilation_note {
                eprintln!("{note}");
            }
            if let Some(out) = out {
                write_json(out, &GroupWitnessJson::new(&w))?;
            }
            Ok(EXIT_NOT_POSITIVE)
        }
        PositivityVerdict::Inaccurate(msg) => {
            eprintln!("inaccurate: {msg}");
            if let Some(out) = out {
                write_json(out, &ReportJson::new("inaccurate", msg))?;
            }
            Ok(EXIT_INACCURATE)
        }
    }
}

fn group_poly(path: &Path) -> CliResult<GroupPoly> {
    match load_poly(path)? {
        AnyPoly::Group(p) => Ok(p),
        AnyPoly::Free(_) => Err(CliError::Usage(format!("{}: expected a group polynomial", path.display()))),
    }
}

fn cmd_factorize(poly: &Path, solve: &SolveArgs, out: &Path) -> CliResult<i32> {
    let p = group_poly(poly)?;
    if solve.solver == Solver::SdpaFile {
        return delegate_to_sdpa(&fejer::membership_problem(&p, solve.degree.get())?, out);
    }
    report_group(fejer::factorize(&p, &solve.factorize_options())?, Some(out), false)
}

fn cmd_witness(poly: &Path, pencil: Option<&Path>, solve: &SolveArgs, out: Option<&Path>) -> CliResult<i32> {
    let opts = solve.certify_options();
    match (load_poly(poly)?, pencil) {
        (AnyPoly::Group(p), _) => {
            let mp = fejer::membership_problem(&p, solve.degree.get())?;
            let verdict = match certify::find_witness(&mp, &opts)? {
                WitnessSearch::Found(w) => {
                    let povm = povm_from_variables(p.signature(), &w.y)?;
                    PositivityVerdict::NotPositive(fejer::group_witness(&p, povm, &w.gamma)?)
                }
                WitnessSearch::NonNegative(lambda) => {
                    eprintln!("no witness: the bound problem gives λ = {lambda:.3e}");
                    if let Some(out) = out {
                        write_json(out, &ReportJson::new("positive", format!("lower bound {lambda:e}")))?;
                    }
                    return Ok(EXIT_POSITIVE);
                }
                WitnessSearch::Inaccurate(msg) => PositivityVerdict::Inaccurate(msg),
            };
            report_group(verdict, out, true)
        }
        (AnyPoly::Free(_), None) => Err(CliError::Usage("--pencil is required for free polynomials".into())),
        (AnyPoly::Free(_), Some(pencil)) => {
            let mp = free_problem(poly, pencil, solve.degree)?;
            match certify::find_witness(&mp, &opts)? {
                WitnessSearch::Found(w) => {
                    eprintln!("not positive: witness value {:.6e}", w.value);
                    if let Some(out) = out {
                        write_json(out, &WitnessJson::new(&w))?;
                    }
                    Ok(EXIT_NOT_POSITIVE)
                }
                WitnessSearch::NonNegative(lambda) => {
                    eprintln!("no witness: the bound problem gives λ = {lambda:.3e}");
                    if let Some(out) = out {
                        write_json(out, &ReportJson::new("positive", format!("lower bound {lambda:e}")))?;
                    }
                    Ok(EXIT_POSITIVE)
                }
                WitnessSearch::Inaccurate(msg) => {
                    eprintln!("inaccurate: {msg}");
                    if let Some(out) = out {
                        write_json(out, &ReportJson::new("inaccurate", msg))?;
                    }
                    Ok(EXIT_INACCURATE)
                }
            }
        }
    }
}

#[derive(Serialize)]
struct ExtractionDump {
    format: u32,
    g: usize,
    depth: usize,
    condition: f64,
    m: crate::format::MatrixJson,
}

fn cmd_extract_check(
    g: usize,
    depth: usize,
    samples: usize,
    nu: usize,
    seed: u64,
    dump: Option<&Path>,
) -> CliResult<i32> {
    let start = Instant::now();
    let f = fock::build_fock_tuple(g, depth)?;
    let ext = fock::extraction_matrix(&f)?;
    if let Some(path) = dump {
        write_json(
            path,
            &ExtractionDump {
                format: crate::format::FORMAT_VERSION,
                g,
                depth,
                condition: ext.condition,
                m: crate::format::MatrixJson::from_matrix(&ext.m),
            },
        )?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut images = WordImages::new(f.ops())?;
    for _ in 0..samples {
        let q = NcPoly::random(&mut rng, g, nu, nu, depth);
        let t = q.evaluate_cached(&mut images)?;
        let back = fock::extract_coefficients_with(&t, &f, &ext, nu, &mut images)?;
        worst = worst.max(back.max_coeff_diff(&q));
    }
    let ok = worst <= 1e-9;
    println!(
        "extract-check g={g} depth={depth}: {samples} samples, max coefficient error {worst:.3e}, cond(M) = {:.3e}, {:.2?} [{}]",
        ext.condition,
        start.elapsed(),
        if ok { "ok" } else { "FAILED" }
    );
    Ok(if ok { EXIT_POSITIVE } else { EXIT_INACCURATE })
}

fn cmd_export(poly: &Path, pencil: Option<&Path>, degree: Degree, lower_bound: bool, out: &Path) -> CliResult<i32> {
    let mp = match (load_poly(poly)?, pencil) {
        (AnyPoly::Group(p), _) => fejer::membership_problem(&p, degree.get())?,
        (AnyPoly::Free(_), Some(pencil)) => free_problem(poly, pencil, degree)?,
        (AnyPoly::Free(_), None) => return Err(CliError::Usage("--pencil is required for free polynomials".into())),
    };
    let prob = if lower_bound {
        certify::assemble_lower_bound_sdp(&mp)?
    } else {
        certify::assemble_membership_sdp(&mp)?
    };
    fs::write(out, export_sdpa(&prob)).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    eprintln!("{} constraints, blocks {:?}", prob.constraints.len(), prob.blocks);
    Ok(EXIT_POSITIVE)
}

/// Parses `args` (program name first) and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_POSITIVE };
        }
    };
    let result = match &cli.command {
        Command::Certify { input, solve, out } => cmd_certify(input, solve, out),
        Command::Factorize { poly, solve, out } => cmd_factorize(poly, solve, out),
        Command::Witness { poly, pencil, solve, out } => cmd_witness(poly, pencil.as_deref(), solve, out.as_deref()),
        Command::ExtractCheck { g, depth, samples, nu, seed, dump_matrix } => {
            cmd_extract_check(*g, *depth, *samples, *nu, *seed, dump_matrix.as_deref())
        }
        Command::ExportSdpa { poly, pencil, degree, lower_bound, out } => {
            cmd_export(poly, pencil.as_deref(), *degree, *lower_bound, out)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Core(ncpos_core::Error::Numerical(_)) => EXIT_INACCURATE,
                _ => EXIT_INPUT,
            }
        }
    }
}
