//! Policy experiments: money-stock and fiscal shifts, equilibrium branch
//! sweeps with saddle-node refinement, equilibrium placement on a chosen arc
//! and quasi-static hysteresis runs.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IslmError, Result};
use crate::isocline::{arc_stability, trace_isocline, ArcLabel, Curve, FoldPair, IsoclineCurve, Stability};
use crate::model::{verify_conditions, FastSide, GridSpec, ModelConfig, State};
use crate::ode::{solve, Flow, StepControl, Vec2};
use crate::phase::{
    field, find_equilibria, find_equilibria_seeded, jacobian_at, tangency_det, Equilibrium,
    EquilibriumKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Exogenous money stock `m_s` (replaced).
    MonetaryMS,
    /// Additive shift of the investment intercept `i0`.
    FiscalShift,
    /// The slow variable itself, frozen in the fast subsystem.
    SlowVariable,
}

impl Parameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::MonetaryMS => "monetary_ms",
            Parameter::FiscalShift => "fiscal_shift",
            Parameter::SlowVariable => "slow_variable",
        }
    }

    /// Isocline left unchanged by the parameter.
    fn fixed_curve(self) -> Option<Curve> {
        match self {
            Parameter::MonetaryMS => Some(Curve::IS),
            Parameter::FiscalShift => Some(Curve::LM),
            Parameter::SlowVariable => None,
        }
    }
}

fn shifted(cfg: &ModelConfig, parameter: Parameter, value: f64) -> Result<ModelConfig> {
    let mut out = cfg.clone();
    match parameter {
        Parameter::MonetaryMS => {
            if !(value > 0.0) {
                return Err(IslmError::Precondition(format!("money stock must be positive, got {value}")));
            }
            out.m_s = value;
        }
        Parameter::FiscalShift => out.invest.i0 += value,
        Parameter::SlowVariable => {
            return Err(IslmError::Precondition("the slow variable is not a configuration shift".into()))
        }
    }
    Ok(out)
}

/// Shifted configuration, re-verified on `grid`.
pub fn apply_shift_on(cfg: &ModelConfig, parameter: Parameter, value: f64, grid: &GridSpec) -> Result<ModelConfig> {
    let out = shifted(cfg, parameter, value)?;
    let rep = verify_conditions(&out, grid)?;
    if let Some(id) = rep.violated_conditions().first() {
        return Err(IslmError::ConditionBroken { condition: id.to_string() });
    }
    Ok(out)
}

/// Shifted configuration, re-verified on the default grid.
pub fn apply_shift(cfg: &ModelConfig, parameter: Parameter, value: f64) -> Result<ModelConfig> {
    apply_shift_on(cfg, parameter, value, &GridSpec::default())
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub base: ModelConfig,
}

impl SweepSpec {
    pub fn linspace(base: ModelConfig, parameter: Parameter, from: f64, to: f64, n: usize) -> Self {
        let values = (0..n)
            .map(|k| if n == 1 { from } else { from + (to - from) * k as f64 / (n - 1) as f64 })
            .collect();
        Self { parameter, values, base }
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(IslmError::Precondition("sweep needs at least one value".into()));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(IslmError::Precondition("sweep values must be strictly monotone".into()));
        }
        if self.parameter == Parameter::SlowVariable {
            return Err(IslmError::Precondition("sweeps shift monetary_ms or fiscal_shift".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// Sequential, each value seeded with the previous equilibria.
    Warm,
    /// Independent values, evaluated in parallel.
    Cold,
}

#[derive(Clone, Debug)]
pub struct SweepSlice {
    pub value: f64,
    pub equilibria: Vec<Equilibrium>,
}

/// Refined saddle-node where the equilibrium count changes.
#[derive(Clone, Debug, Serialize)]
pub struct FoldPoint {
    pub value: f64,
    pub state: State,
    /// Determinant of the (scaled) Jacobian at the refined point.
    pub det: f64,
    /// Determinant of the unscaled residual Jacobian.
    pub tangency_det: f64,
    pub residual: f64,
    pub count_before: usize,
    pub count_after: usize,
    /// Kinds of the two equilibria that merge, taken just inside the
    /// larger-count side.
    pub merging: [EquilibriumKind; 2],
}

#[derive(Clone, Debug)]
pub struct BranchDiagram {
    pub parameter: Parameter,
    pub slices: Vec<SweepSlice>,
    pub folds: Vec<FoldPoint>,
}

impl BranchDiagram {
    pub fn counts(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.equilibria.len()).collect()
    }
}

/// Merged equilibria above this Jacobian determinant do not count as a fold.
pub const FOLD_DET_TOL: f64 = 1e-8;

fn count_at(base: &ModelConfig, parameter: Parameter, v: f64, grid: &GridSpec) -> Result<Vec<Equilibrium>> {
    let cfg = shifted(base, parameter, v)?;
    match find_equilibria(&cfg, grid) {
        Err(IslmError::NoEquilibrium) => Ok(Vec::new()),
        other => other,
    }
}

fn closest_pair(eqs: &[Equilibrium]) -> Option<(usize, usize)> {
    let mut best = None;
    let mut dmin = f64::INFINITY;
    for i in 0..eqs.len() {
        for j in i + 1..eqs.len() {
            let d = eqs[i].state.distance(&eqs[j].state);
            if d < dmin {
                dmin = d;
                best = Some((i, j));
            }
        }
    }
    best
}

/// Newton on `(I-S, L-M-M_S, tangency det)` in `(y, r, v)`.
fn augmented_newton(base: &ModelConfig, parameter: Parameter, y: f64, r: f64, v: f64) -> Result<(f64, f64, f64)> {
    let (mut y, mut r, mut v) = (y, r, v);
    let eval = |y: f64, r: f64, v: f64| -> Result<Vector3<f64>> {
        let c = shifted(base, parameter, v)?;
        Ok(Vector3::new(c.goods_excess(y, r), c.money_excess(y, r), tangency_det(&c, y, r)))
    };
    let h = 1e-6;
    for _ in 0..50 {
        let f = eval(y, r, v)?;
        if f.norm() < 1e-13 {
            break;
        }
        let c = shifted(base, parameter, v)?;
        let p = c.partials(y, r);
        let (fv, gv) = match parameter {
            Parameter::MonetaryMS => (0.0, -1.0),
            Parameter::FiscalShift => (1.0, 0.0),
            Parameter::SlowVariable => unreachable!("rejected by shifted"),
        };
        let d_y = (tangency_det(&c, y + h, r) - tangency_det(&c, y - h, r)) / (2.0 * h);
        let d_r = (tangency_det(&c, y, r + h) - tangency_det(&c, y, r - h)) / (2.0 * h);
        let d_v = (eval(y, r, v + h)?[2] - eval(y, r, v - h)?[2]) / (2.0 * h);
        let m = Matrix3::new(
            p.goods_y(), p.goods_r(), fv,
            p.money_y(), p.money_r(), gv,
            d_y, d_r, d_v,
        );
        let Some(step) = m.lu().solve(&f) else {
            return Err(IslmError::NoEquilibrium);
        };
        y -= step[0];
        r -= step[1];
        v -= step[2];
    }
    Ok((y, r, v))
}

fn refine_fold(
    base: &ModelConfig,
    parameter: Parameter,
    a: &SweepSlice,
    b: &SweepSlice,
    grid: &GridSpec,
) -> Result<FoldPoint> {
    let (mut va, mut vb) = (a.value, b.value);
    let ca = a.equilibria.len();
    let high = if a.equilibria.len() > b.equilibria.len() { a } else { b };
    let n_high = high.equilibria.len();
    let (i, j) = closest_pair(&high.equilibria).ok_or(IslmError::NoEquilibrium)?;
    let merging = [high.equilibria[i].kind, high.equilibria[j].kind];
    let mut seed = high.equilibria.clone();
    let mut seed_value = high.value;
    // bisection on the count change
    for _ in 0..60 {
        if (vb - va).abs() <= 1e-11 * va.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (va + vb);
        let eqs = count_at(base, parameter, mid, grid)?;
        let n = eqs.len();
        if n == ca {
            va = mid;
        } else {
            vb = mid;
        }
        if n == n_high {
            seed = eqs;
            seed_value = mid;
        }
    }
    let (i, j) = closest_pair(&seed).ok_or(IslmError::NoEquilibrium)?;
    let (si, sj) = (seed[i].state, seed[j].state);
    let (y, r, v) = augmented_newton(
        base,
        parameter,
        0.5 * (si.y() + sj.y()),
        0.5 * (si.r() + sj.r()),
        seed_value,
    )?;
    let cfg = shifted(base, parameter, v)?;
    let state = State::new(y, r)?;
    Ok(FoldPoint {
        value: v,
        state,
        det: jacobian_at(&cfg, y, r).det,
        tangency_det: tangency_det(&cfg, y, r),
        residual: cfg.goods_excess(y, r).hypot(cfg.money_excess(y, r)),
        count_before: a.equilibria.len(),
        count_after: b.equilibria.len(),
        merging,
    })
}

/// Equilibria along the sweep and refined folds between values whose
/// equilibrium counts differ.
pub fn sweep_with(spec: &SweepSpec, grid: &GridSpec, mode: SweepMode) -> Result<BranchDiagram> {
    spec.validate()?;
    let rep = verify_conditions(&spec.base, grid)?;
    if let Some(id) = rep.violated_conditions().first() {
        return Err(IslmError::ConditionBroken { condition: id.to_string() });
    }
    let configs: Vec<ModelConfig> = spec
        .values
        .par_iter()
        .map(|&v| apply_shift_on(&spec.base, spec.parameter, v, grid))
        .collect::<Result<_>>()?;

    let slices: Vec<SweepSlice> = match mode {
        SweepMode::Cold => configs
            .par_iter()
            .zip(spec.values.par_iter())
            .map(|(c, &v)| Ok(SweepSlice { value: v, equilibria: find_equilibria(c, grid)? }))
            .collect::<Result<_>>()?,
        SweepMode::Warm => {
            let mut out: Vec<SweepSlice> = Vec::with_capacity(configs.len());
            for (c, &v) in configs.iter().zip(&spec.values) {
                let seeds: Vec<State> = out
                    .last()
                    .map(|s| s.equilibria.iter().map(|e| e.state).collect())
                    .unwrap_or_default();
                out.push(SweepSlice { value: v, equilibria: find_equilibria_seeded(c, grid, &seeds)? });
            }
            out
        }
    };

    let pairs: Vec<(usize, usize)> = (0..slices.len().saturating_sub(1))
        .filter(|&k| slices[k].equilibria.len() != slices[k + 1].equilibria.len())
        .map(|k| (k, k + 1))
        .collect();
    let folds = pairs
        .par_iter()
        .map(|&(a, b)| refine_fold(&spec.base, spec.parameter, &slices[a], &slices[b], grid))
        .collect::<Result<Vec<_>>>()?;

    Ok(BranchDiagram { parameter: spec.parameter, slices, folds })
}

/// Warm-started sweep.
pub fn sweep(spec: &SweepSpec) -> Result<BranchDiagram> {
    sweep_with(spec, &GridSpec::default(), SweepMode::Warm)
}

/// Parameter value putting a unique equilibrium on arc `target` of the fast
/// isocline, chosen in the middle of the widest admissible interval.
pub fn place_on_arc(cfg: &ModelConfig, parameter: Parameter, target: ArcLabel, window: &GridSpec) -> Result<f64> {
    let fast = Curve::fast_for(cfg.fast_side);
    if parameter.fixed_curve() != Some(fast) {
        return Err(IslmError::Precondition(format!(
            "{} does not leave the fast isocline {fast} in place",
            parameter.as_str()
        )));
    }
    let c = trace_isocline(fast, cfg, window)?;
    let needed: Vec<f64> = c
        .points
        .iter()
        .map(|p| match parameter {
            Parameter::MonetaryMS => cfg.money_excess(p.y(), p.r()) + cfg.m_s,
            _ => -cfg.goods_excess(p.y(), p.r()),
        })
        .collect();
    let mut events: Vec<f64> = vec![needed[0], needed[needed.len() - 1]];
    for k in 1..needed.len() - 1 {
        if (needed[k] - needed[k - 1]) * (needed[k + 1] - needed[k]) <= 0.0 {
            events.push(needed[k]);
        }
    }
    events.extend(c.folds.iter().map(|f| needed[f.index]));
    events.sort_by(f64::total_cmp);
    events.dedup();

    let crossings = |v: f64| -> Vec<usize> {
        (0..needed.len() - 1)
            .filter(|&k| (needed[k] - v) * (needed[k + 1] - v) < 0.0)
            .collect()
    };
    let mut best: Option<(f64, f64)> = None;
    for w in events.windows(2) {
        let (mut lo, hi) = (w[0], w[1]);
        if parameter == Parameter::MonetaryMS {
            lo = lo.max(0.0);
            if hi <= lo {
                continue;
            }
        }
        let mid = 0.5 * (lo + hi);
        let hits = crossings(mid);
        if hits.len() != 1 {
            continue;
        }
        if c.arc_at(hits[0]).map(|a| a.label) != Some(target) {
            continue;
        }
        if best.map_or(true, |(wd, _)| hi - lo > wd) {
            best = Some((hi - lo, mid));
        }
    }
    best.map(|(_, v)| v).ok_or_else(|| {
        IslmError::Precondition(format!("no {} value puts a unique equilibrium on {}", parameter.as_str(), target.as_str()))
    })
}

/// Quasi-static state at one parameter value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrackPoint {
    pub value: f64,
    pub y: f64,
    pub r: f64,
    pub arc: ArcLabel,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpEvent {
    /// First parameter value at which the new branch is observed.
    pub value: f64,
    /// Last value still on the old branch.
    pub previous: f64,
    pub from: ArcLabel,
    pub to: ArcLabel,
}

#[derive(Clone, Debug, Serialize)]
pub struct HysteresisReport {
    pub parameter: Parameter,
    pub up_jump: JumpEvent,
    pub down_jump: JumpEvent,
    pub up_path: Vec<TrackPoint>,
    pub down_path: Vec<TrackPoint>,
    /// Fold values of the fast isocline when the parameter is the slow
    /// variable.
    pub folds: Option<FoldPair>,
}

/// Longest time a single parameter value may take to settle.
pub const SETTLE_CAP: f64 = 1e5;
/// Settling tolerance (Newton distance to the equilibrium).
pub const SETTLE_TOL: f64 = 1e-8;

fn nearest_arc(c: &IsoclineCurve, x: Vec2) -> ArcLabel {
    let k = c
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| (k, (p.y() - x[0]).hypot(p.r() - x[1])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    c.arc_at(k).map(|a| a.label).unwrap_or(ArcLabel::Monotone)
}

/// Integrates `f` from `x0` until `done` holds at a step end.
fn settle(
    f: impl Fn(Vec2) -> Vec2,
    x0: Vec2,
    done: impl Fn(Vec2) -> bool,
    value: f64,
) -> Result<Vec2> {
    if done(x0) {
        return Ok(x0);
    }
    let ctrl = StepControl::default();
    let mut hit = None;
    let guard = |t: f64, x: Vec2| {
        if x[0] < 0.0 {
            Err(IslmError::DomainExit { t, y: x[0], r: x[1] })
        } else {
            Ok(())
        }
    };
    solve(f, x0, 0.0, SETTLE_CAP, &ctrl, guard, |st| {
        if done(st.x1) {
            hit = Some(st.x1);
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    hit.ok_or(IslmError::NotSettled { value })
}

fn split_path(path: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if path.len() < 3 {
        return Err(IslmError::Precondition("hysteresis path needs an up and a down leg".into()));
    }
    let top = path
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty");
    let up = path[..=top].to_vec();
    let down = path[top..].to_vec();
    let ok = up.windows(2).all(|w| w[1] > w[0]) && down.windows(2).all(|w| w[1] < w[0]) && up.len() > 1 && down.len() > 1;
    if !ok {
        return Err(IslmError::Precondition("path must increase strictly, then decrease strictly".into()));
    }
    Ok((up, down))
}

/// Evenly spaced path from `lo` up to `hi` and back with `n` values per leg.
pub fn up_down_path(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let up: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let mut path = up.clone();
    path.extend(up.iter().rev().skip(1));
    path
}

/// Tracks the followed attractor along the path and reports where it jumps
/// to another branch on the way up and on the way down.
pub fn hysteresis_run(cfg: &ModelConfig, parameter: Parameter, path: &[f64], window: &GridSpec) -> Result<HysteresisReport> {
    let (up, down) = split_path(path)?;
    let side = cfg.fast_side;
    let fast_curve = Curve::fast_for(side);
    let (fi, si) = (side.fast_index(), side.slow_index());
    let base_curve = arc_stability(&trace_isocline(fast_curve, cfg, window)?, cfg)?;
    let folds = crate::isocline::fold_values(&base_curve).ok();

    let curve_for = |v: f64| -> Result<IsoclineCurve> {
        match parameter {
            Parameter::SlowVariable => Ok(base_curve.clone()),
            p if p.fixed_curve() == Some(fast_curve) => Ok(base_curve.clone()),
            p => trace_isocline(fast_curve, &shifted(cfg, p, v)?, window),
        }
    };

    let settle_at = |v: f64, from: Vec2| -> Result<Vec2> {
        match parameter {
            Parameter::SlowVariable => {
                let unit = ModelConfig { epsilon: 1.0, ..cfg.clone() };
                let mut x0 = from;
                x0[si] = v;
                let f = |x: Vec2| {
                    let mut out = [0.0; 2];
                    out[fi] = field(&unit, x[0], x[1])[fi];
                    out
                };
                let done = |x: Vec2| {
                    let res = fast_curve.residual(&unit, x[0], x[1]);
                    let d = fast_curve.gradient(&unit, x[0], x[1])[fi];
                    d < 0.0 && (res / d).abs() < SETTLE_TOL
                };
                settle(f, x0, done, v)
            }
            p => {
                let c = shifted(cfg, p, v)?;
                let f = |x: Vec2| field(&c, x[0], x[1]);
                let done = |x: Vec2| {
                    let j = jacobian_at(&c, x[0], x[1]);
                    let g = field(&c, x[0], x[1]);
                    if j.det == 0.0 {
                        return false;
                    }
                    let dy = (j.j22 * g[0] - j.j12 * g[1]) / j.det;
                    let dr = (j.j11 * g[1] - j.j21 * g[0]) / j.det;
                    j.trace < 0.0 && j.det > 0.0 && dy.hypot(dr) < SETTLE_TOL
                };
                settle(f, from, done, v)
            }
        }
    };

    // starting attractor
    let v0 = up[0];
    let start: Vec2 = match parameter {
        Parameter::SlowVariable => {
            let stable = base_curve
                .crossings(cfg, v0)
                .into_iter()
                .find(|(k, _)| base_curve.arc_at(*k).and_then(|a| a.stability) == Some(Stability::Stable))
                .ok_or_else(|| IslmError::Precondition(format!("no stable branch at {v0}")))?;
            stable.1.as_array()
        }
        p => {
            let c = shifted(cfg, p, v0)?;
            let eqs = find_equilibria(&c, window)?;
            eqs.iter()
                .find(|e| e.kind.is_attractor())
                .map(|e| e.state.as_array())
                .ok_or_else(|| IslmError::Precondition(format!("no attractor at {v0}")))?
        }
    };

    let track = |values: &[f64], mut x: Vec2| -> Result<(Vec<TrackPoint>, Vec2)> {
        let mut out = Vec::with_capacity(values.len());
        for &v in values {
            x = settle_at(v, x)?;
            let c = curve_for(v)?;
            out.push(TrackPoint { value: v, y: x[0], r: x[1], arc: nearest_arc(&c, x) });
        }
        Ok((out, x))
    };
    let (up_path, x_top) = track(&up, start)?;
    let (down_path, _) = track(&down, x_top)?;

    let first_jump = |pts: &[TrackPoint]| {
        pts.windows(2).find(|w| w[0].arc != w[1].arc).map(|w| JumpEvent {
            value: w[1].value,
            previous: w[0].value,
            from: w[0].arc,
            to: w[1].arc,
        })
    };
    match (first_jump(&up_path), first_jump(&down_path)) {
        (Some(up_jump), Some(down_jump)) => Ok(HysteresisReport {
            parameter,
            up_jump,
            down_jump,
            up_path,
            down_path,
            folds,
        }),
        (None, None) => Err(IslmError::NoHysteresis("the followed branch never jumps".into())),
        (None, _) => Err(IslmError::NoHysteresis("no jump on the way up".into())),
        (_, None) => Err(IslmError::NoHysteresis("no jump on the way down".into())),
    }
}

/// Outcome of perturbing a degenerate equilibrium.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EscapeProbe {
    pub direction: Vec2,
    pub initial_distance: f64,
    pub final_distance: f64,
}

/// Integrates from `eq +- delta * v` for each eigenvector `v` of the
/// Jacobian and reports how far every run ends from `eq`.
pub fn perturbation_probes(cfg: &ModelConfig, eq: &State, delta: f64, horizon: f64) -> Result<Vec<EscapeProbe>> {
    let j = jacobian_at(cfg, eq.y(), eq.r());
    let eigs = crate::phase::eigen2(&j);
    let mut dirs = Vec::new();
    for lam in eigs {
        if lam.im != 0.0 {
            continue;
        }
        // (J - lambda I) v = 0
        let v = if j.j12.abs() > 1e-300 {
            [j.j12, lam.re - j.j11]
        } else {
            [lam.re - j.j22, j.j21]
        };
        let n = v[0].hypot(v[1]);
        if n > 0.0 {
            dirs.push([v[0] / n, v[1] / n]);
        }
    }
    let ctrl = StepControl::default();
    let mut out = Vec::new();
    for d in dirs {
        for sign in [1.0, -1.0] {
            let x0 = [eq.y() + sign * delta * d[0], eq.r() + sign * delta * d[1]];
            let Ok(s0) = State::new(x0[0], x0[1]) else { continue };
            let mut end = x0;
            let res = solve(
                |x| field(cfg, x[0], x[1]),
                s0.as_array(),
                0.0,
                horizon,
                &ctrl,
                |_, _| Ok(()),
                |st| {
                    end = st.x1;
                    Flow::Continue
                },
            );
            res?;
            out.push(EscapeProbe {
                direction: [sign * d[0], sign * d[1]],
                initial_distance: delta,
                final_distance: (end[0] - eq.y()).hypot(end[1] - eq.r()),
            });
        }
    }
    Ok(out)
}

/// Whether a config sits on the goods side with a folded IS, or the money
/// side with a folded LM.
pub fn natural_parameter(side: FastSide) -> Parameter {
    match side {
        FastSide::Goods => Parameter::MonetaryMS,
        FastSide::Money => Parameter::FiscalShift,
    }
}
