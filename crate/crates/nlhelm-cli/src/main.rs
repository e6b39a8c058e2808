use clap::{Args, Parser, Subcommand};
use nlhelm::run::{
    family_diagnostics, farfield_report, kernel_split_report, linear_check, run_scenario, RunError,
    RunReport,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_ASSERTION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "nlhelm",
    version,
    about = "Standing waves of the nonlinear Helmholtz equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario, then verify residual, decay and far field.
    Solve(RunArgs),
    /// Continue an interrupted solve from a checkpoint.
    Resume(RunArgs),
    /// Resolvent cross-validation and linear far-field checks with Q as source.
    LinearCheck(RunArgs),
    /// Kernel split dumps and the truncated-kernel decay fit.
    KernelSplit(RunArgs),
    /// Resolvent ratios and the nonvanishing probe on a band-limited family.
    Diagnostics(RunArgs),
    /// Far-field stage on the solutions already in the run directory.
    Farfield(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Exit with status 4 when a configured check fails (default).
    #[arg(long, overrides_with = "no_assert")]
    assert: bool,
    /// Report failed checks without changing the exit status.
    #[arg(long, overrides_with = "assert")]
    no_assert: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, outcome) = match cli.command {
        Command::Solve(a) => {
            let r = with_threads(&a, || {
                run_scenario(&a.scenario, &a.out, a.resume.as_deref())
            });
            (a, r)
        }
        Command::Resume(a) => {
            let r = match &a.resume {
                Some(ck) => with_threads(&a, || run_scenario(&a.scenario, &a.out, Some(ck))),
                None => return usage("resume needs --resume <checkpoint>"),
            };
            (a, r)
        }
        Command::LinearCheck(a) => {
            let r = with_threads(&a, || linear_check(&a.scenario, &a.out));
            (a, r)
        }
        Command::KernelSplit(a) => {
            let r = with_threads(&a, || kernel_split_report(&a.scenario, &a.out));
            (a, r)
        }
        Command::Diagnostics(a) => {
            let r = with_threads(&a, || family_diagnostics(&a.scenario, &a.out));
            (a, r)
        }
        Command::Farfield(a) => {
            let r = with_threads(&a, || farfield_report(&a.scenario, &a.out));
            (a, r)
        }
    };
    match outcome {
        Ok(report) => finish(&report, &args.out, !args.no_assert),
        Err(e) => fail(&e),
    }
}

fn with_threads(
    args: &RunArgs,
    job: impl FnOnce() -> Result<RunReport, RunError> + Send,
) -> Result<RunReport, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        builder = builder.num_threads(n.max(1));
    }
    match builder.build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

fn usage(message: &str) -> ExitCode {
    let body = serde_json::json!({"errors": [{"field": "resume", "message": message}]});
    println!("{body}");
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn finish(report: &RunReport, out: &Path, assert: bool) -> ExitCode {
    for c in &report.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        println!(
            "{mark}  {:<32} {:>14.6e}  {}",
            c.name, c.value, c.requirement
        );
    }
    for (i, s) in report.solutions.iter().enumerate() {
        println!(
            "solution {i}: J = {:.12e}, residual {:.3e}, {} iterations",
            s.j_value, s.crit_residual, s.iterations
        );
    }
    println!("report: {}", out.join(nlhelm::run::REPORT_FILE).display());
    if assert && !report.passed {
        ExitCode::from(EXIT_ASSERTION)
    } else {
        ExitCode::SUCCESS
    }
}

fn fail(e: &RunError) -> ExitCode {
    let code = e.exit_code();
    if code == 2 {
        let body = serde_json::json!({ "errors": e.issues() });
        println!("{body}");
    }
    eprintln!("error: {e}");
    ExitCode::from(code as u8)
}
