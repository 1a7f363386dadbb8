use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use credible_sdp::annotator::{trace_bytes, Flavor};
use credible_sdp::problem::{self, RUNNING_EXAMPLE_JSON};
use credible_sdp::synth;
use credible_sdp::{
    check_trace, emit_annotated_listing, load_problem, sigma_from_nu, solve, CheckReport, Mode,
    SdpProblem, SolveReport, SolveStatus, SolverOptions,
};

const TOL_ENV: &str = "CREDIBLE_SDP_TOL";

#[derive(Parser, Debug)]
#[command(
    name = "credible-sdp",
    version,
    about = "Contract-monitored primal-dual SDP solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a problem file and report invariant slack.
    Solve(SolveArgs),
    /// Emit the contract-annotated listing for a problem file.
    Annotate(AnnotateArgs),
    /// Re-check a trace against its problem file.
    CheckTrace(CheckArgs),
    /// Solve, annotate and check the bundled running example.
    Demo(DemoArgs),
    /// Write a random strictly feasible problem file.
    Random(RandomArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Audit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FlavorArg {
    PseudoMatlab,
    CLike,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::PseudoMatlab => Flavor::PseudoMatlab,
            FlavorArg::CLike => Flavor::CLike,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Target duality gap.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Derive sigma = n/(n + nu*sqrt(n)).
    #[arg(long)]
    nu: Option<f64>,
    /// Gap reduction factor; wins over --nu.
    #[arg(long)]
    sigma: Option<f64>,
    /// Upper bound c in the gap invariant 0 < Tr(XZ) <= c.
    #[arg(long)]
    gap_ceiling: Option<f64>,
    /// Iteration cap (default: ten times the iteration bound).
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum, default_value = "audit")]
    mode: ModeArg,
    /// Write the JSON-lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write the annotated listing here.
    #[arg(long)]
    listing: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pseudo-matlab")]
    flavor: FlavorArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Output path; stdout when omitted.
    #[arg(long)]
    listing: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pseudo-matlab")]
    flavor: FlavorArg,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    problem: PathBuf,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum, default_value = "audit")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "pseudo-matlab")]
    flavor: FlavorArg,
    /// Directory for trace.jsonl and listing.m; nothing is written when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RandomArgs {
    /// Matrix dimension.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Process exit code for a finished solve.
fn exit_code(status: &SolveStatus, mode: Mode) -> u8 {
    match (status, mode) {
        (SolveStatus::Converged, _) => 0,
        (SolveStatus::InvariantViolation { .. }, _) => 2,
        (SolveStatus::DivergenceGuard, _) => 3,
        (SolveStatus::IterationCap, _) => 4,
    }
}

fn read_problem(path: &Path) -> Result<SdpProblem<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_problem(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn build_options(
    prob: &SdpProblem<f64>,
    o: &Overrides,
    mode: ModeArg,
) -> Result<SolverOptions<f64>> {
    let mut opts = SolverOptions::for_problem(prob)?;
    if let Some(eps) = o.epsilon {
        opts.epsilon = eps;
    }
    if let Some(nu) = o.nu {
        opts.nu = Some(nu);
        opts.sigma = sigma_from_nu(prob.n(), nu)?;
    }
    if let Some(sigma) = o.sigma {
        opts.sigma = sigma;
    }
    if let Some(c) = o.gap_ceiling {
        opts.gap_ceiling = c;
    }
    opts.max_iterations = o.max_iterations;
    opts.mode = match mode {
        ModeArg::Strict => Mode::Strict,
        ModeArg::Audit => Mode::Audit,
    };
    if let Ok(raw) = std::env::var(TOL_ENV) {
        let tol: f64 = raw
            .trim()
            .parse()
            .with_context(|| format!("{TOL_ENV}={raw:?} is not a number"))?;
        opts.tolerances.identity_check = tol;
    }
    opts.validate()?;
    Ok(opts)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn render_report(prob: &SdpProblem<f64>, rep: &SolveReport<f64>) -> String {
    let o = &rep.options;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem      {} (n={}, m={})",
        prob.fingerprint(),
        prob.n(),
        prob.m()
    );
    let _ = writeln!(
        s,
        "options      epsilon={:e} sigma={} gap_ceiling={} mode={:?} identity_tol={:e}",
        o.epsilon, o.sigma, o.gap_ceiling, o.mode, o.tolerances.identity_check
    );
    let _ = writeln!(
        s,
        "sigma        {} used; {:.6} implied by nu={:.6}",
        o.sigma, rep.sigma_from_nu, rep.nu
    );
    let _ = writeln!(s, "status       {}", rep.status.name());
    if let SolveStatus::InvariantViolation { id, iteration } = &rep.status {
        let _ = writeln!(s, "violation    {id} at iteration {iteration}");
    }
    let _ = writeln!(
        s,
        "iterations   {} (bound {}, geometric: assumes gap contracts by sigma per full step)",
        rep.iterations(),
        rep.budget.bound_iterations
    );
    let _ = writeln!(s, "initial gap  {:.6e}", rep.initial.phi);
    let _ = writeln!(s, "final gap    {:.6e}", rep.final_gap());
    if let Some(d) = rep.min_potential_drop() {
        let _ = writeln!(s, "min potential decrease {d:.6e} (nu={:.6})", rep.nu);
    }
    let _ = writeln!(
        s,
        "\n{:<22} {:>8} {:>8} {:>14}",
        "contract", "checked", "failed", "min slack"
    );
    let mut stats: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for r in rep.records() {
        let e = stats.entry(r.id.as_str()).or_default();
        e.0 += 1;
        if !r.passed {
            e.1 += 1;
        }
    }
    let slack = rep.min_slack_by_id();
    let order = credible_sdp::monitor::catalog::init_ids(prob.m())
        .into_iter()
        .chain(credible_sdp::monitor::catalog::loop_ids());
    for id in order {
        if let Some((checked, failed)) = stats.get(id.as_str()) {
            let _ = writeln!(
                s,
                "{:<22} {:>8} {:>8} {:>14.6e}",
                id, checked, failed, slack[&id]
            );
        }
    }
    let failed = rep.failed_records();
    if !failed.is_empty() {
        let _ = writeln!(s, "\nfailed records ({}):", failed.len());
        for r in failed.iter().take(20) {
            let _ = writeln!(
                s,
                "  {} iteration {}: measured {:.6e}, bound {:.6e}, slack {:.6e}",
                r.id, r.iteration, r.measured, r.bound, r.slack
            );
        }
    }
    s
}

fn render_check(rep: &CheckReport) -> String {
    let mut s = format!(
        "trace check: {} records over {} iterations, status {}\n",
        rep.records_checked, rep.iterations, rep.status
    );
    if rep.is_clean() {
        s.push_str("clean\n");
    } else {
        let _ = writeln!(s, "{} finding(s):", rep.findings.len());
        for f in &rep.findings {
            let _ = writeln!(s, "  {f}");
        }
    }
    s
}

fn cmd_solve(a: &SolveArgs) -> Result<u8> {
    let prob = read_problem(&a.problem)?;
    let opts = build_options(&prob, &a.overrides, a.mode)?;
    let rep = solve(&prob, &opts, |_, _, _| {})?;
    if let Some(path) = &a.trace {
        write_file(path, &trace_bytes(&prob, &rep))?;
    }
    if let Some(path) = &a.listing {
        let listing = emit_annotated_listing(&prob, &opts, a.flavor.into());
        write_file(path, listing.text().as_bytes())?;
    }
    let text = render_report(&prob, &rep);
    match &a.report {
        Some(path) => write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(exit_code(&rep.status, opts.mode))
}

fn cmd_annotate(a: &AnnotateArgs) -> Result<u8> {
    let prob = read_problem(&a.problem)?;
    let opts = build_options(&prob, &a.overrides, ModeArg::Audit)?;
    let text = emit_annotated_listing(&prob, &opts, a.flavor.into()).text();
    match &a.listing {
        Some(path) => write_file(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn cmd_check(a: &CheckArgs) -> Result<u8> {
    let prob = read_problem(&a.problem)?;
    let bytes = fs::read(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let rep = check_trace(&bytes, &prob)?;
    print!("{}", render_check(&rep));
    Ok(if rep.is_clean() { 0 } else { 2 })
}

fn cmd_demo(a: &DemoArgs) -> Result<u8> {
    let prob: SdpProblem<f64> = problem::running_example();
    let opts = build_options(&prob, &a.overrides, a.mode)?;
    let rep = solve(&prob, &opts, |_, _, _| {})?;
    let trace = trace_bytes(&prob, &rep);
    let listing = emit_annotated_listing(&prob, &opts, a.flavor.into());
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join("problem.json"), RUNNING_EXAMPLE_JSON.as_bytes())?;
        write_file(&dir.join("trace.jsonl"), &trace)?;
        write_file(&dir.join("listing.m"), listing.text().as_bytes())?;
    }
    let check = check_trace(&trace, &prob)?;
    print!("{}", render_report(&prob, &rep));
    println!(
        "\nlisting: {} lines, {} contracts ({})",
        listing.lines.len(),
        listing.contract_index.len(),
        listing.flavor
    );
    print!("{}", render_check(&check));

    let code = exit_code(&rep.status, opts.mode);
    if !check.is_clean() {
        return Ok(2);
    }
    if code != 0 {
        return Ok(code);
    }
    Ok(if rep.is_clean() { 0 } else { 2 })
}

fn cmd_random(a: &RandomArgs) -> Result<u8> {
    if a.n == 0 {
        bail!("--n must be at least 1");
    }
    let prob: SdpProblem<f64> = synth::random_feasible(a.n, a.seed)?;
    let text = prob.to_file().to_json();
    match &a.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::CheckTrace(a) => cmd_check(a),
        Command::Demo(a) => cmd_demo(a),
        Command::Random(a) => cmd_random(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
