//! Command-line front end for the heavytail experiment pipeline.
//!
//! Five subcommands: `run` executes a config-driven experiment and writes a
//! reproducible run directory; `check-ppd` classifies a matrix against the
//! p-positive-definite cones; `verify-lemmas` runs the deterministic and
//! Monte-Carlo oracle suite; `fit-rate` re-runs the rate analysis on an
//! existing run directory; `stable-test` re-runs the distributional battery
//! on one.
//!
//! Exit codes: 0 success, 1 runtime failure or a failed verification suite,
//! 2 invalid input (config, matrix, flags), 3 when more than half of the
//! replications diverged. Every error is printed both human-readably and as
//! a one-line JSON object on the diagnostic stream, so wrappers can parse
//! outcomes without scraping prose.

mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heavytail::experiment::{
    analyze_traces, load_run, run_experiment, write_analysis, AnalysisReport, ExperimentConfig,
    ExperimentError, RunSummary, SCHEMA_VERSION,
};
use heavytail::ppd::{classify_cones, ConeClassification, PpdReport, SymMatrix};

/// Environment variable naming the default output root for run directories.
const OUT_ENV: &str = "HEAVYTAIL_OUT";

#[derive(Parser)]
#[command(
    name = "heavytail",
    version,
    about = "SGD under heavy-tailed gradient noise: run experiments, classify p-PD cones, verify the numerical oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config (or re-run one from an
    /// emitted manifest.json). With no config, every field takes its
    /// default.
    Run {
        /// Path to a TOML config or a previously emitted manifest.json.
        config: Option<PathBuf>,
        /// Override the config's run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root for run directories (default: $HEAVYTAIL_OUT, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for replications (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Classify a symmetric matrix against the p-positive-definite cones.
    CheckPpd {
        /// Text file: one matrix row per line, entries separated by spaces
        /// or commas; `#` starts a comment.
        matrix: PathBuf,
        /// Exponents in [1, 2] to test (p = 1 and p = 2 are always added).
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.25, 1.5, 1.75, 2.0])]
        p: Vec<f64>,
        /// Also write the classification as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the numerical oracle suite for the inequalities and limit
    /// lemmas the convergence theory rests on.
    VerifyLemmas {
        /// Sample/iteration budget for the Monte-Carlo families.
        #[arg(long, value_enum, default_value_t = Budget::Default)]
        budget: Budget,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-run moment curves and rate fits on an existing run directory,
    /// rewriting its analysis.json and rate CSVs.
    FitRate {
        /// A run directory produced by `heavytail run`.
        run_dir: PathBuf,
        /// Override analysis.burn_in from the manifest.
        #[arg(long)]
        burn_in: Option<u64>,
        /// Override analysis.moments from the manifest (comma-separated).
        #[arg(long, value_delimiter = ',')]
        moments: Option<Vec<f64>>,
    },
    /// Re-run the stable-limit battery on an existing run directory.
    StableTest {
        /// A run directory produced by `heavytail run`.
        run_dir: PathBuf,
        /// Override the test level from the manifest.
        #[arg(long)]
        level: Option<f64>,
        /// Override the checkpoint the battery evaluates at.
        #[arg(long)]
        t_final: Option<u64>,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Budget {
    /// Reduced trials/horizons; completes in seconds.
    Quick,
    /// The documented reference budgets.
    Default,
    /// Extended trials for overnight confidence runs.
    Full,
}

/// A failure carrying its process exit code and a machine-readable kind.
pub struct Failure {
    pub exit: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            exit: 2,
            kind: "validation",
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            kind: "runtime",
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(err: ExperimentError) -> Self {
        let (exit, kind) = match &err {
            ExperimentError::DivergenceMajority { .. } => (3, "divergence"),
            ExperimentError::Io(_) | ExperimentError::Csv(_) => (1, "io"),
            _ => (2, "validation"),
        };
        Failure {
            exit,
            kind,
            message: err.to_string(),
        }
    }
}

fn report_failure(f: &Failure) {
    eprintln!("error: {}", f.message);
    let json = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": f.kind, "exit": f.exit, "message": f.message },
    });
    eprintln!("{json}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            report_failure(&f);
            ExitCode::from(f.exit)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => cmd_run(config.as_deref(), seed, out, threads),
        Command::CheckPpd { matrix, p, json } => cmd_check_ppd(&matrix, &p, json.as_deref()),
        Command::VerifyLemmas { budget, threads } => {
            init_pool(threads)?;
            let all_passed = verify::run_suite(budget)?;
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::FitRate {
            run_dir,
            burn_in,
            moments,
        } => cmd_fit_rate(&run_dir, burn_in, moments),
        Command::StableTest {
            run_dir,
            level,
            t_final,
            json,
        } => cmd_stable_test(&run_dir, level, t_final, json.as_deref()),
    }
}

/// Builds the global worker pool. All replication parallelism in the
/// library runs on this pool; modules below never spawn their own.
fn init_pool(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn resolve_out(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn print_analysis_summary(report: &AnalysisReport) {
    for c in &report.curves {
        match (&c.fit, c.theory_slope) {
            (Some(fit), Some(theory)) => println!(
                "p = {}: slope {:+.4} (theory {:+.4}, gap {:.4}), r^2 = {:.4}",
                c.p, fit.slope, theory, fit.abs_gap, fit.r_squared
            ),
            _ => println!(
                "p = {}: no fit ({})",
                c.p,
                c.fit_note.as_deref().unwrap_or("unknown reason")
            ),
        }
    }
    match (&report.stable_limit, &report.stable_limit_note) {
        (Some(rep), _) => {
            let verdict = match rep.aggregate_pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "inconclusive",
            };
            let passing = rep
                .directions
                .iter()
                .filter(|d| d.verdict == Some(true))
                .count();
            println!(
                "stable-limit battery: {verdict} ({passing}/{} directions)",
                rep.directions.len()
            );
        }
        (None, Some(note)) => println!("stable-limit battery: skipped ({note})"),
        (None, None) => {}
    }
}

fn cmd_run(
    config_path: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<ExitCode, Failure> {
    init_pool(threads)?;
    let mut config = match config_path {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    let root = resolve_out(out);
    let RunSummary {
        run_dir,
        manifest,
        report,
        warnings,
    } = run_experiment(&config, &root)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("run directory: {}", run_dir.display());
    println!(
        "replications: {} ({} censored), t_max = {}, seed = {}",
        manifest.streams.replications,
        manifest.censored.len(),
        manifest.config.run.t_max,
        manifest.config.run.seed
    );
    print_analysis_summary(&report);
    Ok(ExitCode::SUCCESS)
}

/// Parses a plain-text matrix: one row per line, entries separated by
/// whitespace or commas, `#` to end of line is a comment.
fn parse_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut row = Vec::new();
        for token in line.split(|c: char| c.is_whitespace() || c == ',') {
            if token.is_empty() {
                continue;
            }
            let value: f64 = token.parse().map_err(|_| {
                Failure::validation(format!(
                    "{}:{}: unparseable matrix entry {token:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            row.push(value);
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Failure::validation(format!(
            "{}: no matrix rows found",
            path.display()
        )));
    }
    Ok(rows)
}

fn membership_word(report: &PpdReport) -> &'static str {
    if report.boundary() {
        "PSD boundary"
    } else if report.member_pd {
        "PD member"
    } else {
        "outside"
    }
}

fn write_atomic_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Failure::runtime(format!("serializing report: {e}")))?;
    bytes.push(b'\n');
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, &bytes)
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|e| Failure::runtime(format!("writing {}: {e}", path.display())))
}

fn cmd_check_ppd(
    matrix_path: &Path,
    p_list: &[f64],
    json: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let rows = parse_matrix_file(matrix_path)?;
    let matrix = SymMatrix::new(&rows).map_err(|e| Failure::validation(e.to_string()))?;
    let table: ConeClassification =
        classify_cones(&matrix, p_list).map_err(|e| Failure::validation(e.to_string()))?;

    println!("{:>6}  {:>14}  membership", "p", "margin");
    for r in &table.reports {
        println!("{:>6}  {:>14.6e}  {}", r.p, r.margin, membership_word(r));
    }
    println!(
        "cross-checks: diagonal dominance {:.6e} (p = 1 agrees: {}), lambda_min {:.6e} (p = 2 agrees: {})",
        table.diag_dominance,
        if table.p1_cross_check { "yes" } else { "NO" },
        table.lambda_min,
        if table.p2_cross_check { "yes" } else { "NO" },
    );
    match &table.order_violation {
        None => println!("cone ordering: consistent"),
        Some(v) => println!("cone ordering: VIOLATION ({v})"),
    }

    if let Some(path) = json {
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "matrix": rows,
            "classification": table,
        });
        write_atomic_json(path, &doc)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit_rate(
    run_dir: &Path,
    burn_in: Option<u64>,
    moments: Option<Vec<f64>>,
) -> Result<ExitCode, Failure> {
    let (manifest, traces) = load_run(run_dir)?;
    let mut config = manifest.config.clone();
    if let Some(b) = burn_in {
        config.analysis.burn_in = b;
    }
    if let Some(ms) = moments {
        config.analysis.moments = ms;
    }
    let (report, rate_csvs, warnings) = analyze_traces(
        &config,
        &traces,
        manifest.censored.len(),
        manifest.streams.replications,
    )?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    write_analysis(run_dir, &report, &rate_csvs)?;
    println!(
        "re-analyzed {} traces from {}",
        traces.len(),
        run_dir.display()
    );
    print_analysis_summary(&report);
    Ok(ExitCode::SUCCESS)
}

fn cmd_stable_test(
    run_dir: &Path,
    level: Option<f64>,
    t_final: Option<u64>,
    json: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let (manifest, traces) = load_run(run_dir)?;
    let mut config = manifest.config.clone();
    config.analysis.moments = Vec::new();
    config.analysis.stable_diagnostic = true;
    if let Some(l) = level {
        config.analysis.level = l;
    }
    if let Some(t) = t_final {
        config.analysis.t_final = Some(t);
    }
    let (report, _, _) = analyze_traces(
        &config,
        &traces,
        manifest.censored.len(),
        manifest.streams.replications,
    )?;

    let Some(battery) = &report.stable_limit else {
        let note = report
            .stable_limit_note
            .as_deref()
            .unwrap_or("unknown reason");
        println!("stable-limit battery: skipped ({note})");
        return Ok(ExitCode::SUCCESS);
    };

    println!(
        "stable-limit battery at t = {} (alpha = {}, level = {}, {} replications)",
        battery.t_final, battery.alpha, battery.level, battery.replications
    );
    println!(
        "{:<24}  {:>6}  {:>18}  {:>18}  verdict",
        "direction", "hill", "self-similarity", "distribution"
    );
    for d in &battery.directions {
        let dir = format!(
            "[{}]",
            d.direction
                .iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let hill = d
            .hill
            .map_or_else(|| "-".to_string(), |h| format!("{h:.3}"));
        let fmt_test = |t: &Option<heavytail::stable::TestReport>| match t {
            Some(r) => format!(
                "{:.4} {} {:.4}",
                r.statistic,
                if r.pass { "<" } else { ">=" },
                r.critical_value
            ),
            None => "-".to_string(),
        };
        let verdict = match (d.degenerate, d.verdict) {
            (true, _) => "degenerate",
            (_, Some(true)) => "pass",
            (_, Some(false)) => "FAIL",
            (_, None) => "-",
        };
        println!(
            "{:<24}  {:>6}  {:>18}  {:>18}  {verdict}",
            dir,
            hill,
            fmt_test(&d.self_similarity),
            fmt_test(&d.distribution)
        );
    }
    let aggregate = match battery.aggregate_pass {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "inconclusive",
    };
    println!("aggregate: {aggregate}");

    if let Some(path) = json {
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "run_dir": manifest.run_dir,
            "report": battery,
        });
        write_atomic_json(path, &doc)?;
    }
    Ok(if battery.aggregate_pass == Some(false) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
