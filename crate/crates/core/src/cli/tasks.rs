//! Execution of scenario tasks. Each task yields its CSV tables, summary lines and
//! any hypothesis warnings; nothing is written here.

use crate::balance::{self, BalanceReport};
use crate::bounds::{self, BoundVerdict};
use crate::cli::output::Table;
use crate::cli::scenario::{Scenario, Task};
use crate::comparison::{ComparisonSpace, Direction};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::mc::{self, McConfig};
use crate::model::ModelSpace;
use crate::radial::Grid;
use crate::symmetrization::{self, RadialSource, SymmetrizedFunction, VolumeProfile};

/// Agreement required between a Monte Carlo estimate and quadrature, in standard errors.
pub const MAX_Z: f64 = 4.0;

/// Tolerance for the symmetrization identity, relative to its scale.
pub const IDENTITY_TOL: f64 = 1e-6;

/// Ordering of the radii `T(R)` against `s(R)` or `R`.
pub const ORDER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub grid: usize,
    pub tol: f64,
    pub exec: Execution,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: None,
            paths: None,
            dt: None,
            grid: 512,
            tol: bounds::EQUALITY_TOL,
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TaskOutput {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl TaskOutput {
    fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    fn line(&mut self, message: impl Into<String>) {
        self.summary.push(message.into());
    }
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub space: Option<&'a ComparisonSpace>,
    pub opts: Options,
}

impl Context<'_> {
    fn space(&self) -> Result<&ComparisonSpace> {
        self.space.ok_or_else(|| Error::InvalidConfig("comparison space unavailable".into()))
    }

    fn verdict_ok(&self, v: &BoundVerdict) -> bool {
        v.margin >= -self.opts.tol * v.lhs.abs().max(v.rhs.abs())
    }
}

/// `n` equally spaced points covering `[a, b]`.
pub fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    Grid::uniform_nodes(a, b, n.max(2))
}

/// Runs one task, folding hypothesis violations into warnings.
pub fn run_task(ctx: &Context, task: Task) -> TaskOutput {
    let mut out = TaskOutput::default();
    let result = match task {
        Task::Build => build(ctx, &mut out),
        Task::Balance => balance_task(ctx, &mut out),
        Task::ExitTime => exit_time(ctx, &mut out),
        Task::Rigidity => rigidity(ctx, &mut out),
        Task::Isoperimetric => isoperimetric(ctx, &mut out),
        Task::Symmetrize => symmetrize(ctx, &mut out),
        Task::IntrinsicCompare => intrinsic(ctx, &mut out),
        Task::AverageLimit => average(ctx, &mut out),
        Task::McValidate => mc_validate(ctx, &mut out),
    };
    match result {
        Ok(()) => {}
        Err(e) if e.is_hypothesis_violation() => out.warn(format!("hypothesis fails: {e}")),
        Err(e @ Error::InconclusiveGrowth { .. }) => {
            out.line("classification: inconclusive");
            out.warn(e.to_string());
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Runs tasks in order, or concurrently when `exec` asks for it.
pub fn run_tasks(ctx: &Context, tasks: &[Task]) -> Vec<TaskOutput> {
    exec::map(ctx.opts.exec, tasks, |&t| run_task(ctx, t))
}

fn build(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let radius = space.radius();
    let mut table = Table::new("build.csv", &["r", "s", "lambda", "q_W", "psi"]);
    for r in uniform(0.0, radius, ctx.opts.grid) {
        table.push(vec![
            r,
            space.stretching().stretch(r),
            space.lambda(r)?,
            space.quotient_at(r)?,
            space.psi(r)?,
        ]);
    }
    out.tables.push(table);
    out.line(format!("stretched radius s(R) = {}", space.stretched_radius()));
    out.line(format!("volume of B^W_s(R) = {}", space.w_model().ball_volume(space.stretched_radius())?));
    Ok(())
}

// Both torsion theorems ask for w-balance from below and W-balance from above.
const REQUIRED: [&str; 2] = ["w_balanced_below", "W_balanced_above"];

pub fn balance_report(ctx: &Context) -> Result<BalanceReport> {
    balance::check_all(ctx.space()?)
}

fn balance_task(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let report = balance_report(ctx)?;
    let mut table = Table::new(
        "balance.csv",
        &["criterion", "holds", "marginal", "first_violation", "min_margin"],
    );
    for (name, c) in report.criteria() {
        table.push_row(vec![
            name.to_string(),
            c.holds.to_string(),
            c.marginal.to_string(),
            c.first_violation.map(|v| format!("{v:?}")).unwrap_or_default(),
            format!("{:?}", c.min_margin),
        ]);
        let status = if c.holds { "holds" } else { "fails" };
        out.line(format!("{name}: {status} (min margin {:e})", c.min_margin));
        if !c.holds && REQUIRED.contains(&name) {
            let at = c.first_violation.unwrap_or(f64::NAN);
            out.warn(format!("{name} fails from r = {at}"));
        }
    }
    out.tables.push(table);
    Ok(())
}

fn exit_time(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let mut table = Table::new("exit_time.csv", &["r", "psi"]);
    for r in uniform(0.0, space.radius(), ctx.opts.grid) {
        table.push(vec![r, space.psi(r)?]);
    }
    out.tables.push(table);
    out.line(format!("psi(0) = {}", space.psi(0.0)?));
    Ok(())
}

fn rigidity(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let s = space.stretched_radius();
    let a = space.w_model().torsional_rigidity(s)?;
    let mut table = Table::new("rigidity.csv", &["scenario", "radius", "value", "double_integral"]);
    table.push_row(vec![
        ctx.scenario.name.clone(),
        format!("{s:?}"),
        format!("{:?}", a.value),
        format!("{:?}", a.double_integral),
    ]);
    out.tables.push(table);
    out.line(format!("A1(B^W_s(R)) = {}", a.value));
    Ok(())
}

fn verdict_table(name: &str) -> Table {
    Table::new(name, &["scenario", "quantity", "lhs", "rhs", "direction", "margin", "equality"])
}

fn push_verdict(ctx: &Context, out: &mut TaskOutput, table: &mut Table, quantity: &str, v: &BoundVerdict) {
    table.push_row(vec![
        ctx.scenario.name.clone(),
        quantity.to_string(),
        format!("{:?}", v.lhs),
        format!("{:?}", v.rhs),
        v.relation.to_string(),
        format!("{:?}", v.margin),
        v.equality_detected.to_string(),
    ]);
    out.line(format!("{quantity}: {v}"));
    if !ctx.verdict_ok(v) {
        out.warn(format!("{quantity}: inequality fails, {v}"));
    }
}

fn isoperimetric(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let b = &ctx.scenario.bounds;
    let mut table = verdict_table("isoperimetric.csv");
    let iso = bounds::isoperimetric_bound(space, b.measured_quotient)?;
    out.line(format!("model quotient Vol(S)/Vol(B) = {}", iso.reference));
    if let Some(v) = &iso.chain {
        push_verdict(ctx, out, &mut table, "quotient-cap", v);
    }
    if let Some(v) = &iso.measured {
        push_verdict(ctx, out, &mut table, "quotient", v);
    }
    if let Some(measured) = b.measured_volume {
        let vb = bounds::volume_bound(space, space.radius(), Some(measured))?;
        push_verdict(ctx, out, &mut table, "volume", vb.verdict.as_ref().expect("measured"));
    }
    if let Some(measured) = b.measured_rigidity {
        let volume = match b.domain_volume {
            Some(v) => v,
            None => space.intermediary().ball_volume(space.radius())?,
        };
        let tb = bounds::torsional_bound(space, volume, Some(measured))?;
        push_verdict(ctx, out, &mut table, "rigidity", tb.verdict.as_ref().expect("measured"));
    }
    out.tables.push(table);
    Ok(())
}

/// Symmetrization of the scenario's source into the comparison space.
pub fn symmetrized(ctx: &Context) -> Result<SymmetrizedFunction> {
    let space = ctx.space()?;
    let profile = match &ctx.scenario.symmetrize.profile {
        Some(path) => VolumeProfile::read(&ctx.scenario.base.join(path))?,
        None => {
            let (psi, _) = space.transplanted_psi();
            VolumeProfile::radial(RadialSource::new(
                space.intermediary().clone(),
                psi,
                space.radius(),
            )?)
        }
    };
    let target = bounds::model_with_room(space, profile.total()?)?;
    symmetrization::symmetrize(&profile, &target)
}

fn symmetrize(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let sym = symmetrized(ctx)?;
    let t = sym.radius();
    let levels = ctx.scenario.symmetrize.levels.unwrap_or(symmetrization::DEFAULT_LEVELS);
    let check = symmetrization::verify_integral_identity(&sym, levels)?;
    let mut table = Table::new("symmetrize.csv", &["r", "psi_star"]);
    for r in uniform(0.0, t, ctx.opts.grid) {
        table.push(vec![r, sym.value(r)?]);
    }
    out.tables.push(table);
    out.line(format!("T(R) = {t}"));
    out.line(format!(
        "integral identity: {} vs {} (residual {:e})",
        check.source_integral, check.symmetrized_integral, check.integral_residual
    ));
    out.line(format!("equimeasurability residual {:e}", check.equimeasurability_residual));
    if check.integral_residual > IDENTITY_TOL * check.source_integral.abs()
        || check.equimeasurability_residual > IDENTITY_TOL * check.total_volume
    {
        out.warn("symmetrization identity not reproduced to tolerance");
    }
    if ctx.scenario.symmetrize.profile.is_none() {
        let (ok, bound) = match ctx.scenario.direction {
            Direction::Below => (t <= space.stretched_radius() + ORDER_TOL, "T(R) <= s(R)"),
            Direction::Above => (t >= space.radius() - ORDER_TOL, "T(R) >= R"),
        };
        out.line(format!("{bound}: {ok}"));
        if !ok {
            out.warn(format!("radius ordering {bound} fails"));
        }
        let d = symmetrization::derivative_comparison(&sym, ctx.scenario.direction)?;
        out.line(format!("derivative comparison min margin {:e}", d.min_margin));
        if !d.holds {
            out.warn(format!(
                "derivative comparison fails from r = {}",
                d.first_violation.unwrap_or(f64::NAN)
            ));
        }
    }
    Ok(())
}

/// `M_N` and `M_w` for the intrinsic comparison.
pub fn intrinsic_models(ctx: &Context) -> Result<(ModelSpace, ModelSpace)> {
    let s = ctx.scenario;
    let section = s.intrinsic.as_ref().ok_or_else(|| Error::InvalidConfig("missing [intrinsic]".into()))?;
    let config = |e: crate::cli::scenario::ConfigError| Error::InvalidConfig(e.to_string());
    let n = s.function("intrinsic.n", &section.n).map_err(config)?;
    let w = s.function("w", &s.w).map_err(config)?;
    let room = section.room.unwrap_or(4.0 * s.radius).min(0.999 * w.domain_end());
    Ok((ModelSpace::new(s.m, n, s.radius)?, ModelSpace::new(s.m, w, room)?))
}

fn intrinsic(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let (n, w) = intrinsic_models(ctx)?;
    let c = bounds::intrinsic_compare(&n, &w, ctx.scenario.radius, ctx.scenario.direction)?;
    let mut table = verdict_table("intrinsic_compare.csv");
    push_verdict(ctx, out, &mut table, "rigidity", &c.verdict);
    out.tables.push(table);
    out.line(format!("T(R) = {}", c.symmetrized_radius));
    if !c.hypotheses_hold {
        out.warn("balance hypotheses of the intrinsic comparison fail on M_w");
    }
    Ok(())
}

fn average(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let probe = ctx.scenario.average.probe;
    let mut spec = space.spec().clone();
    spec.radius = probe;
    let far = ComparisonSpace::build(&spec)?;
    let limit = bounds::average_exit_limit(far.w_model(), far.stretched_radius(), ctx.opts.exec)?;
    let mut table = Table::new("average_limit.csv", &["radius", "volume", "quotient", "average", "gap"]);
    for l in &limit.ladder {
        table.push(vec![l.radius, l.volume, l.quotient, l.average, l.gap]);
    }
    out.tables.push(table);
    out.line(format!("classification: {}", limit.growth));
    if let Some(q) = limit.q_infinity {
        out.line(format!("q(inf) = {q}, limit of A1/Vol = {}", limit.limit));
        out.line(format!("bound 1/((m-1) eta) at the probe = {}", limit.eta_bound));
    }
    if !limit.volume_grows {
        out.warn("ball volumes stop growing: the infinite-volume hypothesis is not supported");
    }
    Ok(())
}

pub fn mc_config(ctx: &Context, exit_radius: f64) -> McConfig {
    let section = &ctx.scenario.mc;
    McConfig::new(
        ctx.opts.paths.unwrap_or(section.paths),
        ctx.opts.dt.unwrap_or(section.dt),
        ctx.opts.seed.unwrap_or(section.seed),
        section.start_radius,
        exit_radius,
    )
}

fn mc_validate(ctx: &Context, out: &mut TaskOutput) -> Result<()> {
    let space = ctx.space()?;
    let model = space.w_model();
    let s = space.stretched_radius();
    let cfg = mc_config(ctx, s);
    let mut table = Table::new(
        "mc_validate.csv",
        &["scenario", "quantity", "mean", "stderr", "paths", "dt", "seed", "reference", "z"],
    );
    let exit = mc::simulate_exit_time(model, &cfg, ctx.opts.exec)?;
    let exit_ref = model.mean_exit_time(s, cfg.start_radius)?;
    let rig = mc::estimate_torsional_rigidity(model, s, &cfg, ctx.opts.exec)?;
    let rig_ref = model.torsional_rigidity(s)?.value;
    for (quantity, est, reference) in [("exit-time", exit, exit_ref), ("rigidity", rig, rig_ref)] {
        let z = est.z_score(reference);
        table.push_row(vec![
            ctx.scenario.name.clone(),
            quantity.to_string(),
            format!("{:?}", est.mean),
            format!("{:?}", est.stderr),
            est.paths_used.to_string(),
            format!("{:?}", cfg.dt),
            cfg.seed.to_string(),
            format!("{reference:?}"),
            format!("{z:?}"),
        ]);
        out.line(format!(
            "{quantity}: {} ± {} vs {reference} (z = {z:.2})",
            est.mean, est.stderr
        ));
        if z > MAX_Z {
            out.warn(format!("{quantity}: Monte Carlo disagrees with quadrature, z = {z:.2}"));
        }
    }
    out.tables.push(table);
    Ok(())
}
