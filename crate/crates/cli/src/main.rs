//! `bifurc`: run the trackers on registered problems and write path CSVs,
//! JSON reports and comparison tables.

use bifurcation_core::model::{builtin, registry, registry_entry, ParametricSystem, ProblemParams, PROBLEM_NAMES};
use bifurcation_core::pipeline::{baseline_start, default_start, run_adaptive, run_baseline, PipelineError};
use bifurcation_core::report::{
    comparison_csv, comparison_rows, comparison_text, gs_table, gs_table_text, write_branch_files, TrackerKind,
};
use bifurcation_core::{RunConfig, RunReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "bifurc", version, about = "Adaptive homotopy tracking with bifurcation detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one problem and write path-<branch>.csv and report.json.
    Track(TrackArgs),
    /// Run both trackers for each --h and print a comparison table.
    Compare(TrackArgs),
    /// Gauss-Seidel iteration counts on the perturbed singular 3x3 system.
    GsTable,
    /// List registered problems with their default start and step.
    ListProblems,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrackerArg {
    Adaptive,
    Traditional,
}

#[derive(Args, Debug, Clone)]
struct TrackArgs {
    #[arg(long)]
    problem: String,
    /// Comma-separated start state; one extra trailing value is taken as p0.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pend: Option<f64>,
    /// Step size; repeat for several runs under `compare`.
    #[arg(long = "h", allow_hyphen_values = true)]
    h: Vec<f64>,
    #[arg(long, value_enum, default_value = "adaptive")]
    tracker: TrackerArg,
    #[arg(long, default_value_t = 1)]
    branch_depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Add u0..u{n-1} columns to the path CSVs.
    #[arg(long)]
    full_state: bool,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    /// Which steady solution starts a PDE run (1-based, largest max-norm first).
    #[arg(long, default_value_t = 1)]
    solution: usize,
    /// End a branch at its n-th fold; 0 passes every fold.
    #[arg(long)]
    fold_limit: Option<usize>,
    #[arg(long)]
    newton_tol: Option<f64>,
}

/// Failure categories mapped onto exit codes.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(bifurcation_core::model::ModelError::UnknownProblem(_)) => Failure::Usage(e.to_string()),
            PipelineError::Model(bifurcation_core::model::ModelError::DimensionMismatch { .. }) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

struct Setup {
    sys: Box<dyn ParametricSystem<f64>>,
    u0: Vec<f64>,
    config: RunConfig,
}

fn parse_floats(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("--start: `{t}` is not a number"))))
        .collect()
}

fn setup(args: &TrackArgs, h: Option<f64>) -> Result<Setup, Failure> {
    let entry = registry_entry(&args.problem).map_err(|e| Failure::Usage(e.to_string()))?;
    let params = ProblemParams { grid_n: args.grid_n, d: args.d };
    let sys = builtin::<f64>(&args.problem, &params).map_err(|e| Failure::Usage(e.to_string()))?;
    let n = sys.dim();
    let mut p0 = entry.p0;
    let u0 = match &args.start {
        Some(s) => {
            let mut v = parse_floats(s)?;
            if v.len() == n + 1 {
                p0 = v.pop().expect("nonempty");
            }
            if v.len() != n {
                return Err(Failure::Usage(format!("--start needs {n} values (or {} with p0), got {}", n + 1, v.len())));
            }
            v
        }
        None => {
            let p = args.p0.unwrap_or(p0);
            default_start(&args.problem, &params, p, args.solution)?
        }
    };
    if let Some(p) = args.p0 {
        p0 = p;
    }
    let h = h.unwrap_or(entry.h);
    let p_end = args.pend.unwrap_or(entry.p_end);
    if h == 0.0 || !h.is_finite() {
        return Err(Failure::Usage("--h must be nonzero".into()));
    }
    let mut config = RunConfig::new(&args.problem, p0, h, p_end);
    config.tracker.rng_seed = args.seed;
    config.tracker.newton_tol = args.newton_tol.unwrap_or(entry.newton_tol);
    config.branch_depth = args.branch_depth;
    config.fold_limit = match args.fold_limit {
        Some(0) => None,
        Some(k) => Some(k),
        None => entry.fold_limit,
    };
    config.tracker.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Setup { sys, u0, config })
}

fn run(kind: TrackerArg, s: &Setup) -> Result<RunReport, PipelineError> {
    match kind {
        TrackerArg::Adaptive => run_adaptive(s.sys.as_ref(), &s.u0, &s.config),
        TrackerArg::Traditional => run_baseline(s.sys.as_ref(), &s.u0, &s.config),
    }
}

fn write_json(path: &Path, value: &RunReport) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn summarize(report: &RunReport) {
    println!("problem {} ({}), {} branch(es), {} step(s)", report.problem, report.tracker.as_str(), report.branches.len(), report.total_steps);
    for b in &report.branches {
        let end = b.points.last().map(|p| p.p).unwrap_or(f64::NAN);
        let parent = b.parent.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        println!("  branch {:>2}  parent {:>2}  steps {:>5}  end p = {:<12.6}  stop {}", b.id, parent, b.steps, end, b.stop);
    }
    for r in &report.bifurcations {
        let head: Vec<String> = r.u_b.iter().take(3).map(|x| format!("{x:.6e}")).collect();
        let more = if r.u_b.len() > 3 { ", ..." } else { "" };
        println!(
            "  {:?} on branch {} at p = {:.6e}, u = ({}{more}), windings ({}, {}), residual {:.2e}",
            r.kind, r.branch, r.p_b, head.join(", "), r.c1, r.c2, r.residual
        );
    }
}

fn cmd_track(args: &TrackArgs) -> Result<(), Failure> {
    if args.h.len() > 1 {
        return Err(Failure::Usage("track takes a single --h".into()));
    }
    let s = setup(args, args.h.first().copied())?;
    let report = match run(args.tracker, &s) {
        Ok(r) => r,
        Err(e) => {
            let failure = Failure::from(e.clone());
            if let Failure::Numerical(_) = failure {
                let kind = match args.tracker {
                    TrackerArg::Adaptive => TrackerKind::Adaptive,
                    TrackerArg::Traditional => TrackerKind::Traditional,
                };
                let mut partial = RunReport::new(kind, s.config.clone());
                partial.failure = Some(e.to_string());
                std::fs::create_dir_all(&args.out_dir)
                    .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
                write_json(&args.out_dir.join("report.json"), &partial)?;
            }
            return Err(failure);
        }
    };
    write_branch_files(&args.out_dir, &report, args.full_state)
        .map_err(|e| Failure::Usage(format!("cannot write to {}: {e}", args.out_dir.display())))?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    summarize(&report);
    match &report.failure {
        Some(f) => Err(Failure::Numerical(format!("run ended early: {f} (partial report written)"))),
        None => Ok(()),
    }
}

fn cmd_compare(args: &TrackArgs) -> Result<(), Failure> {
    let hs: Vec<Option<f64>> = if args.h.is_empty() { vec![None] } else { args.h.iter().map(|&h| Some(h)).collect() };
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    for h in hs {
        let mut s = setup(args, h)?;
        let hv = s.config.tracker.h;
        let adaptive = run(TrackerArg::Adaptive, &s);
        if let Ok(r) = &adaptive {
            // A singular start is left along a branch first; the baseline starts there too.
            let (u, p) = baseline_start(r, &s.u0, s.config.p0);
            s.u0 = u;
            s.config.p0 = p;
        }
        let traditional = run(TrackerArg::Traditional, &s);
        for (kind, out) in [(TrackerKind::Adaptive, adaptive), (TrackerKind::Traditional, traditional)] {
            match out {
                Ok(r) => {
                    if let Some(f) = &r.failure {
                        failed.push(format!("{} h={hv}: {f}", kind.as_str()));
                    }
                    write_json(&args.out_dir.join(format!("report-{}-h{hv}.json", kind.as_str())), &r)?;
                    rows.extend(comparison_rows(&r, hv));
                }
                Err(e) => failed.push(format!("{} h={hv}: {e}", kind.as_str())),
            }
        }
    }
    std::fs::write(args.out_dir.join("compare.csv"), comparison_csv(&rows))
        .map_err(|e| Failure::Usage(format!("cannot write compare.csv: {e}")))?;
    print!("{}", comparison_text(&rows));
    for f in &failed {
        println!("failed: {f}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{} run(s) failed", failed.len())))
    }
}

fn cmd_list() {
    for e in registry() {
        let start = match &e.u0 {
            Some(u) => format!("{u:?}"),
            None => "computed".into(),
        };
        println!("{:<12} p0={:<10.6} h={:<6} pend={:<6} start={}  {}", e.name, e.p0, e.h, e.p_end, start, e.description);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GsTable => {
            print!("{}", gs_table_text(&gs_table()));
            Ok(())
        }
        Command::ListProblems => {
            cmd_list();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            if m.contains("unknown problem") {
                eprintln!("registered problems: {}", PROBLEM_NAMES.join(", "));
            }
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
