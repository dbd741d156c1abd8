//! `sjv` - batch verification and inspection for the Siegel-Jacobi library.
//!
//! Subcommands:
//! * `verify`     run one (or every) check suite and print a report line per check
//! * `maass`      print a recursion generator's fingerprint at the base point
//! * `catalog`    list the invariant polynomial catalog at given sizes
//! * `correspond` build the operator attached to a catalog polynomial
//! * `conjecture` emit the proportionality probe for the quartic generator
//!
//! All randomness flows from `--seed`; identical invocations print identical
//! output (timings, which are not reproducible, go to stderr).  The exit code
//! is zero exactly when every executed check passed.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use siegel_jacobi::correspond::{
    conjecture_fit, fingerprint, fit_constant, fit_probes, poly_to_op_hc, OpFingerprint,
    PolyOperator,
};
use siegel_jacobi::error::SjError;
use siegel_jacobi::frame::{CoordFrame, Model};
use siegel_jacobi::harness::{all_pass, run_suite, validate_sizes, CheckReport, Suite};
use siegel_jacobi::invariant::{catalog, default_probes, InvariantPolynomial};
use siegel_jacobi::ops::{apply_at, maass_generators};
use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "sjv",
    version,
    about = "Verification harness for the geometry and invariant operators of the Siegel-Jacobi space"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite and report each check.
    Verify(VerifyArgs),
    /// Print the base-point fingerprint of a recursion generator.
    Maass(MaassArgs),
    /// List the invariant polynomial catalog at the given sizes.
    Catalog(CatalogArgs),
    /// Build the operator attached to a catalog polynomial.
    Correspond(CorrespondArgs),
    /// Emit the proportionality probe (c_j, residual) for a trace generator.
    Conjecture(ConjectureArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: group, cayley, polys, metrics, operators, maass,
    /// or correspond.  Omitted = every suite in canonical order.
    #[arg(long)]
    suite: Option<String>,
    /// Matrix size of the symmetric factor.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Row count of the rectangular block factor.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Root seed; every check derives its own stream from it.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Sample budget per check.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Override the reference tolerance of ordinary checks.  Sensitivity
    /// controls keep their floor.
    #[arg(long)]
    tol: Option<f64>,
    /// Also write the full JSON report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct MaassArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Which generator (1-based, j <= n).
    #[arg(long, default_value_t = 1)]
    j: usize,
}

#[derive(Args)]
struct CatalogArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Write the listing as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CorrespondArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Catalog name of the polynomial to convert (see `sjv catalog`).
    #[arg(long)]
    poly: String,
    /// Fit the resulting operator against the one induced by this polynomial.
    #[arg(long)]
    fit_against: Option<String>,
}

#[derive(Args)]
struct ConjectureArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Which trace generator to probe (1-based, j <= n).
    #[arg(long, default_value_t = 2)]
    j: usize,
    #[arg(long, default_value_t = 40)]
    samples: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

/// Top-level JSON report: library version, the canonical invocation that
/// produced it, the root seed, and one record per executed check.
#[derive(Serialize)]
struct Report<'a> {
    version: &'a str,
    command: String,
    seed: u64,
    checks: &'a [CheckReport],
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, Box<dyn Error>> {
    match cli.cmd {
        Cmd::Verify(args) => cmd_verify(&args),
        Cmd::Maass(args) => cmd_maass(&args),
        Cmd::Catalog(args) => cmd_catalog(&args),
        Cmd::Correspond(args) => cmd_correspond(&args),
        Cmd::Conjecture(args) => cmd_conjecture(&args),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, Box<dyn Error>> {
    let suites: Vec<Suite> = match &args.suite {
        Some(name) => vec![name.parse()?],
        None => Suite::ALL.to_vec(),
    };
    let t0 = Instant::now();
    let mut checks: Vec<CheckReport> = Vec::new();
    for suite in suites {
        checks.extend(run_suite(suite, args.n, args.m, args.seed, args.samples, args.tol)?);
    }
    for r in &checks {
        println!(
            "[{}] {:<52} defect {:>10.3e}  tol {:>8.1e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.max_defect,
            r.tolerance
        );
    }
    let failed = checks.iter().filter(|r| !r.pass).count();
    println!("{} checks, {} failed (n = {}, m = {}, seed = {})", checks.len(), failed, args.n, args.m, args.seed);
    eprintln!("wall time: {:.2?}", t0.elapsed());

    if let Some(path) = &args.json {
        // The report records the canonical invocation, not the output path:
        // where a report is written must not change what it says.
        let report = Report {
            version: env!("CARGO_PKG_VERSION"),
            command: verify_command_string(args),
            seed: args.seed,
            checks: &checks,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
        eprintln!("report written to {}", path.display());
    }
    Ok(all_pass(&checks))
}

fn verify_command_string(args: &VerifyArgs) -> String {
    let mut s = String::from("verify");
    if let Some(suite) = &args.suite {
        s.push_str(&format!(" --suite {suite}"));
    }
    s.push_str(&format!(
        " --n {} --m {} --seed {} --samples {}",
        args.n, args.m, args.seed, args.samples
    ));
    if let Some(t) = args.tol {
        s.push_str(&format!(" --tol {t}"));
    }
    s
}

fn cmd_maass(args: &MaassArgs) -> Result<bool, Box<dyn Error>> {
    validate_sizes(args.n, 0)?;
    if args.j == 0 || args.j > args.n {
        return Err(Box::new(SjError::InvalidIndex {
            family: "recursion generator".into(),
            detail: format!("need 1 <= j <= n = {}, got j = {}", args.n, args.j),
        }));
    }
    let sym = maass_generators(args.n);
    let op = &sym.h[args.j - 1];
    let frame = CoordFrame::new(Model::Half, args.n, 0);
    let p = frame.base_point();
    let fp = fingerprint(|f, q| apply_at(op, f, &frame, q), &frame, &p, op.degree());
    println!(
        "generator H_{} at n = {} (degree {}), fingerprint at the base point:",
        args.j,
        args.n,
        op.degree()
    );
    print_fingerprint(&fp, &frame);
    Ok(true)
}

/// Print the nonzero rows of a fingerprint table: one line per centered
/// coordinate monomial the operator reacts to.
fn print_fingerprint(fp: &OpFingerprint, frame: &CoordFrame) {
    let mut nonzero = 0usize;
    for (exps, val) in fp.entries() {
        if val.norm() <= 1e-12 {
            continue;
        }
        nonzero += 1;
        println!("  {:<24} -> {:+.6} {:+.6}i", monomial_label(exps, frame), val.re, val.im);
    }
    println!("({} of {} table entries nonzero; coordinates: {})", nonzero, fp.len(), frame.names().join(" "));
}

fn monomial_label(exps: &[u8], frame: &CoordFrame) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (name, &e) in frame.names().iter().zip(exps) {
        match e {
            0 => {}
            1 => parts.push(name.clone()),
            _ => parts.push(format!("{name}^{e}")),
        }
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" ")
    }
}

/// One catalog row as listed (and serialized) by `sjv catalog`.
#[derive(Serialize)]
struct CatalogRow {
    name: String,
    degree: usize,
}

/// The catalog's parameter-dependent families need sample parameter
/// matrices; fix the seed so listings are reproducible.
fn deterministic_catalog(n: usize, m: usize) -> Vec<InvariantPolynomial> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let probes = default_probes(&mut rng, m);
    catalog(n, m, &probes)
}

fn cmd_catalog(args: &CatalogArgs) -> Result<bool, Box<dyn Error>> {
    validate_sizes(args.n, args.m)?;
    let rows: Vec<CatalogRow> = deterministic_catalog(args.n, args.m)
        .iter()
        .map(|p| CatalogRow { name: p.name(), degree: p.degree() })
        .collect();
    for row in &rows {
        println!("{:<28} degree {}", row.name, row.degree);
    }
    println!("{} polynomials at n = {}, m = {}", rows.len(), args.n, args.m);
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&rows)? + "\n")?;
        eprintln!("listing written to {}", path.display());
    }
    Ok(true)
}

fn resolve_poly(n: usize, m: usize, name: &str) -> Result<InvariantPolynomial, SjError> {
    deterministic_catalog(n, m)
        .into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| SjError::UnknownName(format!("polynomial `{name}` (see `sjv catalog`)")))
}

fn cmd_correspond(args: &CorrespondArgs) -> Result<bool, Box<dyn Error>> {
    validate_sizes(args.n, args.m)?;
    let poly = resolve_poly(args.n, args.m, &args.poly)?;
    let theta = poly_to_op_hc(&poly, args.n, args.m)?;
    let frame = CoordFrame::new(Model::Half, args.n, args.m);
    let p = frame.base_point();
    println!(
        "operator induced by {} at n = {}, m = {}: degree {}, {} tangent directions",
        theta.name(),
        args.n,
        args.m,
        theta.degree(),
        theta.basis().len()
    );
    let fp = fingerprint(|f, q| theta.apply_expr(f, &frame, q), &frame, &p, theta.degree());
    print_fingerprint(&fp, &frame);

    if let Some(other_name) = &args.fit_against {
        let other = resolve_poly(args.n, args.m, other_name)?;
        let against: PolyOperator = poly_to_op_hc(&other, args.n, args.m)?;
        let probes = fit_probes(&frame, 40, 2024);
        let fit = fit_constant(
            |f, q| theta.apply_expr(f, &frame, q),
            |f, q| against.apply_expr(f, &frame, q),
            &probes,
        );
        println!(
            "fit against {}: constant {:+.9}, relative residual {:.3e} ({} probes)",
            against.name(),
            fit.constant,
            fit.residual,
            probes.len()
        );
    }
    Ok(true)
}

fn cmd_conjecture(args: &ConjectureArgs) -> Result<bool, Box<dyn Error>> {
    let fit = conjecture_fit(args.n, args.j, args.samples, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(true)
}
