//! Scenario-driven command line front end.
//!
//! Exit codes: 0 when every verdict and hypothesis checks out, 2 when a hypothesis or
//! verdict fails, 1 on configuration or computational errors.

pub mod output;
pub mod scenario;
pub mod tasks;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::balance;
use crate::comparison::ComparisonSpace;
use crate::error::{Error, Result};
use crate::exec::Execution;
use output::Table;
use scenario::{Scenario, Task};
use tasks::{Context, Options, TaskOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_WARNING: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "torsion", version, about = "Comparison spaces, mean exit time and torsional rigidity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every task of a scenario, writing one CSV per task and a summary.
    Run(RunArgs),
    /// Check the balance conditions of a scenario.
    CheckBalance(RunArgs),
    /// Emit a two-column profile of one quantity.
    Profile(ProfileArgs),
    /// Cross-check exit time and rigidity by Monte Carlo.
    Mc(RunArgs),
    /// Compare a geodesic ball with its symmetrization (needs `[intrinsic]`).
    Compare(RunArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, env = "TORSION_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of grid points in emitted profiles.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Relative slack allowed on verdict margins.
    #[arg(long, env = "TORSION_TOL", default_value_t = crate::bounds::EQUALITY_TOL)]
    pub tol: f64,
    /// Run independent tasks and Monte Carlo paths on the thread pool.
    #[arg(long)]
    pub parallel: bool,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            seed: self.seed,
            paths: self.paths,
            dt: self.dt,
            grid: self.grid,
            tol: self.tol,
            exec: if self.parallel {
                Execution::Parallel
            } else {
                Execution::Sequential
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory; without it only the summary is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    #[value(name = "q_w")]
    QSmall,
    #[value(name = "q_W")]
    QBig,
    #[value(name = "eta_w")]
    Eta,
    #[value(name = "E")]
    ExitTime,
    #[value(name = "psi")]
    Psi,
    #[value(name = "psi_star")]
    PsiStar,
    #[value(name = "A1")]
    Rigidity,
    #[value(name = "margins")]
    Margins,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => run(&a, None),
        Command::CheckBalance(a) => run(&a, Some(vec![Task::Balance])),
        Command::Mc(a) => run(&a, Some(vec![Task::McValidate])),
        Command::Compare(a) => run(&a, Some(vec![Task::IntrinsicCompare])),
        Command::Profile(a) => profile(&a),
    }
}

fn load(path: &Path) -> std::result::Result<Scenario, i32> {
    Scenario::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

/// Outcome of building the comparison space.
enum Built {
    Space(ComparisonSpace),
    Skipped,
    Failed(Error),
}

fn build_space(scenario: &Scenario, tasks: &[Task]) -> std::result::Result<Built, i32> {
    if tasks.iter().all(|&t| t == Task::IntrinsicCompare) {
        return Ok(Built::Skipped);
    }
    let spec = scenario.constellation().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })?;
    Ok(match ComparisonSpace::build(&spec) {
        Ok(space) => Built::Space(space),
        Err(e) => Built::Failed(e),
    })
}

fn run(args: &RunArgs, only: Option<Vec<Task>>) -> i32 {
    let scenario = match load(&args.common.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let tasks = only.unwrap_or_else(|| scenario.tasks.clone());
    let built = match build_space(&scenario, &tasks) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let mut report = String::new();
    let _ = writeln!(report, "scenario: {}", scenario.name);
    let mut warnings = 0;
    let mut errors = 0;
    let (space, runnable): (Option<&ComparisonSpace>, Vec<Task>) = match &built {
        Built::Space(s) => (Some(s), tasks.clone()),
        Built::Skipped => (None, tasks.clone()),
        Built::Failed(e) => {
            let _ = writeln!(report, "[build]");
            if e.is_hypothesis_violation() {
                warnings += 1;
                let _ = writeln!(report, "  warning: hypothesis fails: {e}");
            } else {
                errors += 1;
                let _ = writeln!(report, "  error: {e}");
            }
            let rest: Vec<Task> = tasks.iter().copied().filter(|&t| t == Task::IntrinsicCompare).collect();
            for t in tasks.iter().filter(|t| !rest.contains(t)) {
                let _ = writeln!(report, "[{}] skipped: no comparison space", t.name());
            }
            (None, rest)
        }
    };
    let ctx = Context {
        scenario: &scenario,
        space,
        opts: args.common.options(),
    };
    let outputs = tasks::run_tasks(&ctx, &runnable);
    let mut tables: Vec<&Table> = Vec::new();
    for (task, out) in runnable.iter().zip(&outputs) {
        write_task(&mut report, *task, out);
        warnings += out.warnings.len();
        errors += usize::from(out.error.is_some());
        tables.extend(&out.tables);
    }
    let code = if errors > 0 {
        EXIT_ERROR
    } else if warnings > 0 {
        EXIT_WARNING
    } else {
        EXIT_OK
    };
    let status = match code {
        EXIT_OK => "ok",
        EXIT_WARNING => "hypothesis warning",
        _ => "error",
    };
    let _ = writeln!(report, "status: {status}");
    print!("{report}");
    if let Some(dir) = &args.out {
        if let Err(e) = write_outputs(dir, &tables, &report) {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return EXIT_ERROR;
        }
    }
    code
}

fn write_task(report: &mut String, task: Task, out: &TaskOutput) {
    let _ = writeln!(report, "[{}]", task.name());
    for line in &out.summary {
        let _ = writeln!(report, "  {line}");
    }
    for w in &out.warnings {
        let _ = writeln!(report, "  warning: {w}");
    }
    if let Some(e) = &out.error {
        let _ = writeln!(report, "  error: {e}");
    }
}

fn write_outputs(dir: &Path, tables: &[&Table], report: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        output::write_atomic(dir, &t.name, &t.to_csv()?)?;
    }
    output::write_atomic(dir, "summary.txt", report.as_bytes())
}

fn profile(args: &ProfileArgs) -> i32 {
    let scenario = match load(&args.common.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let space = match build_space(&scenario, &[Task::Build]) {
        Ok(Built::Space(s)) => s,
        Ok(Built::Failed(e)) => {
            eprintln!("error: {e}");
            return if e.is_hypothesis_violation() { EXIT_WARNING } else { EXIT_ERROR };
        }
        Ok(Built::Skipped) => unreachable!("build requested"),
        Err(code) => return code,
    };
    let ctx = Context {
        scenario: &scenario,
        space: Some(&space),
        opts: args.common.options(),
    };
    let table = match emit_profile(&ctx, args.quantity) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let bytes = match table.to_csv() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let written = match &args.out {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            output::write_atomic(dir, &name, &bytes)
        }
        None => std::io::Write::write_all(&mut std::io::stdout(), &bytes),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Two-column table of `quantity` on a uniform grid of its natural abscissa.
pub fn emit_profile(ctx: &Context, quantity: Quantity) -> Result<Table> {
    let space = ctx.space.ok_or_else(|| Error::InvalidConfig("comparison space unavailable".into()))?;
    let n = ctx.opts.grid;
    let (r_end, s_end) = (space.radius(), space.stretched_radius());
    let wm = space.w_model();
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let header = match quantity {
        Quantity::QSmall => {
            for r in tasks::uniform(0.0, r_end, n) {
                rows.push((r, space.intermediary().quotient(r)?));
            }
            ["r", "q_w"]
        }
        Quantity::QBig => {
            for s in tasks::uniform(0.0, s_end, n) {
                rows.push((s, space.quotient(s)?));
            }
            ["s", "q_W"]
        }
        Quantity::Eta => {
            // η_w is singular at the pole.
            for r in tasks::uniform(0.0, r_end, n + 1).into_iter().skip(1) {
                rows.push((r, space.intermediary().eta(r)));
            }
            ["r", "eta_w"]
        }
        Quantity::ExitTime => {
            for s in tasks::uniform(0.0, s_end, n) {
                rows.push((s, wm.mean_exit_time(s_end, s)?));
            }
            ["s", "E"]
        }
        Quantity::Psi => {
            for r in tasks::uniform(0.0, r_end, n) {
                rows.push((r, space.psi(r)?));
            }
            ["r", "psi"]
        }
        Quantity::PsiStar => {
            let sym = tasks::symmetrized(ctx)?;
            for r in tasks::uniform(0.0, sym.radius(), n) {
                rows.push((r, sym.value(r)?));
            }
            ["r", "psi_star"]
        }
        Quantity::Rigidity => {
            for s in tasks::uniform(0.0, s_end, n) {
                rows.push((s, wm.torsional_rigidity(s)?.value));
            }
            ["R", "A1"]
        }
        Quantity::Margins => {
            let report = balance::check_w_balanced_below(space)?;
            let c = report.w_balanced_below.expect("computed");
            rows.extend(c.margins.iter());
            ["r", "margin"]
        }
    };
    let mut table = Table::new("profile.csv", &header);
    for (x, y) in rows {
        table.push(vec![x, y]);
    }
    Ok(table)
}
