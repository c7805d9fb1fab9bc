//! Command-line front end. `run` parses argv, executes one subcommand,
//! writes its outputs and a manifest into `--out`, and returns the exit code.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{ErrorClass, IslmError, Result};
use crate::io::{self, fmt_f64, RunManifest, Table, MANIFEST_NAME};
use crate::isocline::{arc_stability, fold_values, trace_isocline, ArcLabel, Curve, IsoclineCurve};
use crate::model::{verify_conditions, GridSpec, ModelConfig, State};
use crate::phase::{find_equilibria, Equilibrium};
use crate::scenario::{self, place_on_arc, sweep_with, up_down_path, Parameter, SweepMode, SweepSpec};
use crate::slowfast::{detect_cycle, integrate, singular_orbit, CycleControl};
use crate::svg::{emit_svg, Dot, Polyline, Scene, Style};

#[derive(Parser, Debug)]
#[command(name = "islm", version, about = "Slow-fast IS-LM phase-plane analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArcArg {
    A1,
    A2,
    A3,
}

impl From<ArcArg> for ArcLabel {
    fn from(a: ArcArg) -> Self {
        match a {
            ArcArg::A1 => ArcLabel::A1,
            ArcArg::A2 => ArcLabel::A2,
            ArcArg::A3 => ArcLabel::A3,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    MonetaryMs,
    FiscalShift,
    SlowVariable,
}

impl From<ParamArg> for Parameter {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::MonetaryMs => Parameter::MonetaryMS,
            ParamArg::FiscalShift => Parameter::FiscalShift,
            ParamArg::SlowVariable => Parameter::SlowVariable,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the regime conditions on the verification grid.
    Verify(Common),
    /// Find and classify equilibria.
    Equilibria(Common),
    /// Trace IS and LM with folds and arc stability.
    Isoclines(Common),
    /// Integrate one trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        y0: f64,
        #[arg(long, allow_negative_numbers = true)]
        r0: f64,
        /// Horizon (default 60 / epsilon).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Detect the relaxation cycle and build the singular orbit.
    Cycle {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true, requires = "r0")]
        y0: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "y0")]
        r0: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Move the equilibrium onto this arc of the fast isocline first.
        #[arg(long, value_enum)]
        place: Option<ArcArg>,
    },
    /// Equilibrium branches under a policy shift.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        parameter: ParamArg,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        /// Evaluate values independently instead of warm-starting.
        #[arg(long)]
        cold: bool,
    },
    /// Quasi-static up/down run and its jump values.
    Hysteresis {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "slow-variable")]
        parameter: ParamArg,
        /// Path start (default: below the low fold for slow-variable).
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Path turning point (default: above the high fold for slow-variable).
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        /// Values per leg.
        #[arg(long, default_value_t = 131)]
        steps: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Equilibria(_) => "equilibria",
            Command::Isoclines(_) => "isoclines",
            Command::Simulate { .. } => "simulate",
            Command::Cycle { .. } => "cycle",
            Command::Sweep { .. } => "sweep",
            Command::Hysteresis { .. } => "hysteresis",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Verify(c) | Command::Equilibria(c) | Command::Isoclines(c) => c,
            Command::Simulate { common, .. }
            | Command::Cycle { common, .. }
            | Command::Sweep { common, .. }
            | Command::Hysteresis { common, .. } => common,
        }
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Condition => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Usage => 3,
    }
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let started = Instant::now();
    let common = cli.cmd.common().clone();
    if let Err(e) = std::fs::create_dir_all(&common.out) {
        eprintln!("cannot create {}: {e}", common.out.display());
        return 3;
    }
    let mut ctx = Ctx { out: common.out.clone(), outputs: Vec::new(), config_hash: None };
    let result = execute(&cli.cmd, &common, &mut ctx);
    let (status, kind, message, code) = match &result {
        Ok(()) => ("ok", None, None, 0),
        Err(e) => {
            eprintln!("error: {e}");
            ("error", Some(e.kind().to_string()), Some(e.to_string()), exit_code(e.class()))
        }
    };
    let manifest = RunManifest {
        subcommand: cli.cmd.name().to_string(),
        config_path: Some(common.config.clone()),
        config_sha256: ctx.config_hash.clone(),
        outputs: ctx.outputs.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: status.to_string(),
        error_kind: kind,
        message,
        exit_code: code,
    };
    if let Err(e) = io::write_json(&common.out.join(MANIFEST_NAME), &manifest) {
        eprintln!("cannot write manifest: {e}");
        return 3;
    }
    code
}

struct Ctx {
    out: PathBuf,
    outputs: Vec<PathBuf>,
    config_hash: Option<String>,
}

impl Ctx {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.path(name);
        io::write_text(&p, &t.to_csv())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        io::write_json(&p, v)
    }

    fn svg(&mut self, name: &str, scene: &Scene) -> Result<()> {
        let bytes = emit_svg(scene, &Style::default())?;
        let p = self.path(name);
        std::fs::write(p, bytes)?;
        Ok(())
    }
}

fn load(common: &Common, ctx: &mut Ctx) -> Result<ModelConfig> {
    let cfg = io::load_config(&common.config)?;
    ctx.config_hash = Some(io::config_hash(&cfg));
    Ok(cfg)
}

/// Fails with the first violated condition id.
fn require_conditions(cfg: &ModelConfig, grid: &GridSpec) -> Result<()> {
    let rep = verify_conditions(cfg, grid)?;
    match rep.violated_conditions().first() {
        Some(id) => Err(IslmError::ConditionBroken { condition: id.to_string() }),
        None => Ok(()),
    }
}

fn equilibria_table(cfg: &ModelConfig, eqs: &[Equilibrium]) -> Table {
    let mut t = Table::new(&["index", "y", "r", "i_s", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "trace", "det", "kind"]);
    for (k, e) in eqs.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            fmt_f64(e.state.y()),
            fmt_f64(e.state.r()),
            fmt_f64(e.state.short_rate(cfg)),
            fmt_f64(e.eigs[0].re),
            fmt_f64(e.eigs[0].im),
            fmt_f64(e.eigs[1].re),
            fmt_f64(e.eigs[1].im),
            fmt_f64(e.jac.trace),
            fmt_f64(e.jac.det),
            e.kind.as_str().to_string(),
        ]);
    }
    t
}

fn isocline_table(c: &IsoclineCurve) -> Table {
    let mut t = Table::new(&["index", "y", "r", "arc", "stability"]);
    for (k, p) in c.points.iter().enumerate() {
        let arc = c.arc_at(k);
        t.push(vec![
            k.to_string(),
            fmt_f64(p.y()),
            fmt_f64(p.r()),
            arc.map_or("", |a| a.label.as_str()).to_string(),
            arc.and_then(|a| a.stability).map_or("", |s| s.as_str()).to_string(),
        ]);
    }
    t
}

/// Fast isocline with stability labels, slow isocline with arc labels only.
fn isoclines(cfg: &ModelConfig, grid: &GridSpec) -> Result<(IsoclineCurve, IsoclineCurve)> {
    let fast = Curve::fast_for(cfg.fast_side);
    let slow = match fast {
        Curve::IS => Curve::LM,
        Curve::LM => Curve::IS,
    };
    let f = arc_stability(&trace_isocline(fast, cfg, grid)?, cfg)?;
    let s = trace_isocline(slow, cfg, grid)?;
    Ok((f, s))
}

fn phase_scene(title: &str, curves: &[&IsoclineCurve], eqs: &[Equilibrium]) -> Scene {
    let mut sc = Scene::new(title, "Y", "R");
    for c in curves {
        sc.add_isocline(c);
        for f in &c.folds {
            sc.dots.push(Dot { at: f.point.as_array(), class: "fold".into(), label: None });
        }
    }
    for e in eqs {
        sc.dots.push(Dot { at: e.state.as_array(), class: "eq".into(), label: Some(e.kind.as_str().into()) });
    }
    sc
}

fn execute(cmd: &Command, common: &Common, ctx: &mut Ctx) -> Result<()> {
    let grid = GridSpec::default();
    let cfg = load(common, ctx)?;
    cfg.validate()?;
    match cmd {
        Command::Verify(_) => {
            let rep = verify_conditions(&cfg, &grid)?;
            ctx.json("report.json", &rep)?;
            if let Some(id) = rep.violated_conditions().first() {
                return Err(IslmError::ConditionBroken { condition: id.to_string() });
            }
        }
        Command::Equilibria(_) => {
            require_conditions(&cfg, &grid)?;
            let eqs = find_equilibria(&cfg, &grid)?;
            ctx.table("equilibria.csv", &equilibria_table(&cfg, &eqs))?;
            let v: Vec<_> = eqs.iter().map(|e| e.to_json_value(&cfg)).collect();
            ctx.json("equilibria.json", &v)?;
        }
        Command::Isoclines(_) => {
            require_conditions(&cfg, &grid)?;
            let (f, s) = isoclines(&cfg, &grid)?;
            let (is, lm) = if f.which == Curve::IS { (&f, &s) } else { (&s, &f) };
            ctx.table("is.csv", &isocline_table(is))?;
            ctx.table("lm.csv", &isocline_table(lm))?;
            ctx.json(
                "folds.json",
                &json!({
                    "fast_curve": f.which.to_string(),
                    "fast_folds": fold_values(&f).ok(),
                    "is_folds": is.folds,
                    "lm_folds": lm.folds,
                    "fast_arcs": f.arcs,
                }),
            )?;
            let eqs = find_equilibria(&cfg, &grid).unwrap_or_default();
            ctx.svg("isoclines.svg", &phase_scene("isoclines", &[&f, &s], &eqs))?;
        }
        Command::Simulate { y0, r0, t_end, epsilon, .. } => {
            let cfg = epsilon.map_or(cfg.clone(), |e| cfg.with_epsilon(e));
            require_conditions(&cfg, &grid)?;
            let s0 = State::new(*y0, *r0)?;
            let t_end = t_end.unwrap_or(60.0 / cfg.epsilon);
            let tr = integrate(&s0, &cfg, t_end, &Default::default())?;
            ctx.table("trajectory.csv", &io::trajectory_table(&tr))?;
            let mut sc = match isoclines(&cfg, &grid) {
                Ok((f, s)) => phase_scene("trajectory", &[&f, &s], &[]),
                Err(_) => Scene::new("trajectory", "Y", "R"),
            };
            sc.lines.push(Polyline::new(tr.samples.iter().map(|s| s.xy()).collect(), "trajectory").with_arrows(6));
            ctx.svg("trajectory.svg", &sc)?;
        }
        Command::Cycle { y0, r0, epsilon, place, .. } => {
            let mut cfg = epsilon.map_or(cfg.clone(), |e| cfg.with_epsilon(e));
            if let Some(a) = place {
                let p = scenario::natural_parameter(cfg.fast_side);
                let v = place_on_arc(&cfg, p, (*a).into(), &grid)?;
                cfg = scenario::apply_shift_on(&cfg, p, v, &grid)?;
                ctx.json("placed_config.json", &cfg)?;
            }
            require_conditions(&cfg, &grid)?;
            let orbit = singular_orbit(&cfg, &grid);
            let s0 = match (y0, r0) {
                (Some(y), Some(r)) => State::new(*y, *r)?,
                _ => match &orbit {
                    Ok(o) => o.points[0],
                    // no singular orbit: start next to the first equilibrium
                    Err(_) => {
                        let e = find_equilibria(&cfg, &grid)?;
                        let mut x = e[0].state.as_array();
                        x[cfg.fast_side.fast_index()] += 0.5;
                        State::new(x[0], x[1])?
                    }
                },
            };
            let ctrl = CycleControl::default();
            let rep = detect_cycle(&cfg, &s0, &ctrl)?;
            let mut t = Table::new(&["t", "y", "r", "jump"]);
            for (k, s) in rep.cycle_samples.iter().enumerate() {
                let jump = rep.jumps.iter().any(|j| k >= j.start_index && k <= j.end_index);
                t.push(vec![fmt_f64(s.t), fmt_f64(s.y), fmt_f64(s.r), u8::from(jump).to_string()]);
            }
            ctx.table("cycle.csv", &t)?;
            ctx.json(
                "cycle.json",
                &json!({
                    "period": rep.period,
                    "orientation": rep.orientation,
                    "signed_area": rep.signed_area,
                    "yr_signed_area": rep.yr_signed_area,
                    "jumps": rep.jumps,
                    "y_range": rep.y_range,
                    "r_range": rep.r_range,
                    "slow_range": rep.slow_range,
                    "poincare_residual": rep.poincare_residual,
                    "closure": rep.closure,
                    "returns": rep.returns,
                    "section_value": rep.section_value,
                    "epsilon": cfg.epsilon,
                    "singular_orbit": orbit.as_ref().ok().map(|o| json!({
                        "orientation": o.orientation,
                        "signed_area": o.signed_area,
                        "folds": o.folds,
                    })),
                }),
            )?;
            let (f, s) = isoclines(&cfg, &grid)?;
            let eqs = find_equilibria(&cfg, &grid).unwrap_or_default();
            let mut sc = phase_scene("relaxation cycle", &[&f, &s], &eqs);
            if let Ok(o) = &orbit {
                sc.lines.push(Polyline::new(o.xy(), "orbit"));
            }
            sc.lines.push(Polyline::new(rep.points(), "trajectory").with_arrows(4));
            ctx.svg("cycle.svg", &sc)?;
        }
        Command::Sweep { parameter, from, to, steps, cold, .. } => {
            let spec = SweepSpec::linspace(cfg.clone(), (*parameter).into(), *from, *to, *steps);
            let mode = if *cold { SweepMode::Cold } else { SweepMode::Warm };
            let d = sweep_with(&spec, &grid, mode)?;
            let mut t = Table::new(&["parameter_value", "eq_index", "y", "r", "kind"]);
            let mut sc = Scene::new("equilibrium branches", Parameter::from(*parameter).as_str(), "Y");
            for s in &d.slices {
                for (k, e) in s.equilibria.iter().enumerate() {
                    t.push(vec![
                        fmt_f64(s.value),
                        k.to_string(),
                        fmt_f64(e.state.y()),
                        fmt_f64(e.state.r()),
                        e.kind.as_str().to_string(),
                    ]);
                    let class = if e.kind.is_attractor() { "eq" } else { "fold" };
                    sc.dots.push(Dot { at: [s.value, e.state.y()], class: class.into(), label: None });
                }
            }
            ctx.table("sweep.csv", &t)?;
            ctx.json(
                "folds.json",
                &json!({
                    "parameter": d.parameter,
                    "counts": d.counts(),
                    "folds": d.folds,
                }),
            )?;
            ctx.svg("branches.svg", &sc)?;
        }
        Command::Hysteresis { parameter, from, to, steps, .. } => {
            require_conditions(&cfg, &grid)?;
            let param: Parameter = (*parameter).into();
            let fast = Curve::fast_for(cfg.fast_side);
            let fc = arc_stability(&trace_isocline(fast, &cfg, &grid)?, &cfg)?;
            let (lo, hi) = match (from, to, param) {
                (Some(a), Some(b), _) => (*a, *b),
                (a, b, Parameter::SlowVariable) => {
                    let fp = fold_values(&fc)?;
                    let (smin, smax) = slow_bounds(&fc);
                    let d = fp.high - fp.low;
                    (
                        a.unwrap_or_else(|| (fp.low - 0.2 * d).max(0.5 * (fp.low + smin))),
                        b.unwrap_or_else(|| (fp.high + 0.2 * d).min(0.5 * (fp.high + smax))),
                    )
                }
                _ => {
                    return Err(IslmError::Usage(format!("--from and --to are required for {}", param.as_str())));
                }
            };
            let path = up_down_path(lo, hi, *steps);
            let rep = scenario::hysteresis_run(&cfg, param, &path, &grid)?;
            ctx.json("hysteresis.json", &rep)?;
            let fi = cfg.fast_side.fast_index();
            let pick = |p: &scenario::TrackPoint| [p.value, [p.y, p.r][fi]];
            let fast_name = if fi == 0 { "Y" } else { "R" };
            let mut sc = Scene::new("hysteresis", param.as_str(), fast_name);
            if param == Parameter::SlowVariable {
                let si = cfg.fast_side.slow_index();
                for a in &fc.arcs {
                    let pts = fc.points[a.start..=a.end].iter().map(|p| {
                        let x = p.as_array();
                        [x[si], x[fi]]
                    });
                    let class = match a.stability {
                        Some(crate::isocline::Stability::Stable) => "arc-stable",
                        _ => "arc-unstable",
                    };
                    sc.lines.push(Polyline::new(pts.collect(), class));
                }
            }
            sc.lines.push(Polyline::new(rep.up_path.iter().map(pick).collect(), "up").with_arrows(3));
            sc.lines.push(Polyline::new(rep.down_path.iter().map(pick).collect(), "down").with_arrows(3));
            ctx.svg("hysteresis.svg", &sc)?;
        }
    }
    Ok(())
}

fn slow_bounds(c: &IsoclineCurve) -> (f64, f64) {
    (0..c.points.len())
        .map(|k| c.slow(k))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}
