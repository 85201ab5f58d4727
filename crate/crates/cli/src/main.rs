//! Batch verification driver.
//!
//! Samples a scenario's chart box, runs the selected curvature-bound
//! verifiers and identity audits, and emits a deterministic report.
//!
//! Exit codes: 0 every bound holds and every gating identity audit passes;
//! 1 some bound is violated beyond the slack tolerance; 2 a gating identity
//! audit fails under the working sign convention; 3 configuration or
//! scenario error; 4 hard numeric failure at a sample point.

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use riccibound_core::report::{self, ConventionChoice, OutputFormat, RunConfig};
use riccibound_core::tol;

#[derive(Parser, Debug)]
#[command(
    name = "riccibound",
    version,
    about = "Verify curvature bounds of Riemannian submersions and maps on sampled charts"
)]
struct Cli {
    /// Built-in scenario name (see `--scenario list`) or path to a scenario
    /// file.
    #[arg(long, default_value = "warped-s3")]
    scenario: String,

    /// Comma-separated subset of t31,t41,t53,t54,t62,t65,t66,audits,
    /// hineva-fuzz. Defaults to everything applicable to the scenario.
    #[arg(long, value_delimiter = ',')]
    theorems: Option<Vec<String>>,

    /// Number of sample points drawn from the chart box.
    #[arg(long, default_value_t = 25)]
    samples: usize,

    /// Seed for the deterministic low-discrepancy sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// A bound counts as violated when its slack drops below the negative
    /// of this tolerance.
    #[arg(long, default_value_t = tol::DEFAULT_TOL_SLACK)]
    tol_slack: f64,

    /// A gating identity audit fails above this residual.
    #[arg(long, default_value_t = tol::DEFAULT_TOL_IDENTITY)]
    tol_identity: f64,

    /// Curvature sign convention. `auto` selects the convention with the
    /// smaller identity-audit residual and records both.
    #[arg(long, default_value = "auto")]
    convention: String,

    /// Output format: `json` (full report) or `csv` (verdict table).
    #[arg(long, default_value = "json")]
    format: String,

    /// Output path; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 3); clap's default exit
    // code of 2 is reserved for failed identity audits here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            code
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, (ExitCode, String)> {
    if cli.scenario == "list" {
        for name in riccibound_core::scenario::builtin_names() {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }

    let config_error = |msg: String| (ExitCode::from(3), msg);
    let convention =
        ConventionChoice::parse(&cli.convention).map_err(|e| config_error(e.to_string()))?;
    let format = OutputFormat::parse(&cli.format).map_err(|e| config_error(e.to_string()))?;
    let config = RunConfig {
        scenario: cli.scenario,
        theorems: cli.theorems,
        samples: cli.samples,
        seed: cli.seed,
        tol_slack: cli.tol_slack,
        tol_identity: cli.tol_identity,
        tol_equality: tol::DEFAULT_TOL_EQUALITY,
        convention,
        format,
        out: cli.out,
    };

    let started = Instant::now();
    let report = report::run(&config)
        .map_err(|e| (ExitCode::from(report::exit_code_for_error(&e) as u8), e.to_string()))?;
    let rendered = report::render(&report);
    match &report.config.out {
        Some(path) => std::fs::write(path, rendered.as_bytes())
            .map_err(|e| config_error(format!("writing `{path}`: {e}")))?,
        None => print!("{rendered}"),
    }

    // The human-readable summary (with wall time) goes to stderr so the
    // report bytes stay deterministic.
    let s = &report.summary;
    eprintln!(
        "{}: {} verdicts ({} equality, {} violated), min slack {:.3e}, \
         worst gating residual {:.3e}, convention {}, exit {} [{:.2?}]",
        report.config.scenario,
        s.verdict_count,
        s.equality_count,
        s.violation_count,
        s.min_slack,
        s.worst_gating_residual,
        s.selected_convention,
        s.exit_code,
        started.elapsed(),
    );
    Ok(ExitCode::from(s.exit_code as u8))
}
