//! Integration of the singularly perturbed system, relaxation-cycle
//! detection and the singular (epsilon -> 0) orbit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{IslmError, Result};
use crate::isocline::{arc_stability, correct, fold_values, trace_isocline, Curve, FoldPair, IsoclineCurve, Stability};
use crate::model::{FastSide, GridSpec, ModelConfig, Regime, State};
use crate::ode::{solve, Flow, Step, StepControl, Vec2};
use crate::phase::field;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub y: f64,
    pub r: f64,
}

impl Sample {
    pub fn xy(&self) -> Vec2 {
        [self.y, self.r]
    }

    pub fn state(&self) -> State {
        State::new(self.y.max(0.0), self.r).expect("samples keep y >= 0")
    }
}

/// Inclusive sample range of a fast segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpMarker {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub accepted_steps: usize,
    pub jumps: Vec<JumpMarker>,
    #[serde(skip)]
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has its initial sample")
    }

    /// State at time `t` from the dense output.
    pub fn at(&self, t: f64) -> Option<Vec2> {
        let k = self.steps.partition_point(|s| s.t1 < t);
        self.steps.get(k).map(|s| s.eval(t))
    }

    pub fn is_jump(&self, k: usize) -> bool {
        self.jumps.iter().any(|j| j.start <= k && k <= j.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

/// Shoelace signed area of a closed polyline.
pub fn signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for k in 0..n {
        let p = pts[k];
        let q = pts[(k + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Area in the frame with the slow variable horizontal and the fast
/// variable vertical.
pub fn slow_fast_area(side: FastSide, pts: &[Vec2]) -> f64 {
    let (si, fi) = (side.slow_index(), side.fast_index());
    let swapped: Vec<Vec2> = pts.iter().map(|p| [p[si], p[fi]]).collect();
    signed_area(&swapped)
}

pub fn orientation_of(area: f64) -> Orientation {
    if area < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Counterclockwise
    }
}

fn domain_guard(t: f64, x: Vec2) -> Result<()> {
    if x[0] < 0.0 {
        Err(IslmError::DomainExit { t, y: x[0], r: x[1] })
    } else {
        Ok(())
    }
}

/// Default multiple of the median slow speed above which motion is a jump.
pub const JUMP_SPEED_FACTOR: f64 = 10.0;

/// Median of |d slow/dt| over a time-uniform resampling of the polyline.
fn median_slow_speed(cfg: &ModelConfig, samples: &[Sample]) -> f64 {
    let n = 10_000;
    let (t0, t1) = (samples[0].t, samples[samples.len() - 1].t);
    if !(t1 > t0) {
        return 0.0;
    }
    let si = cfg.fast_side.slow_index();
    let mut k = 0;
    let mut speeds: Vec<f64> = (0..n)
        .map(|j| {
            let t = t0 + (t1 - t0) * (j as f64 + 0.5) / n as f64;
            while k + 1 < samples.len() - 1 && samples[k + 1].t < t {
                k += 1;
            }
            let (a, b) = (samples[k], samples[k + 1]);
            let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            let y = a.y + w * (b.y - a.y);
            let r = a.r + w * (b.r - a.r);
            field(cfg, y, r)[si].abs()
        })
        .collect();
    speeds.sort_by(f64::total_cmp);
    speeds[n / 2]
}

/// Maximal runs of samples whose fast speed exceeds `factor` times the
/// median slow speed. Runs separated by less than `merge_gap` in time are
/// joined.
pub fn mark_jumps(cfg: &ModelConfig, samples: &[Sample], factor: f64, merge_gap: f64) -> Vec<JumpMarker> {
    if samples.len() < 2 {
        return Vec::new();
    }
    let threshold = factor * median_slow_speed(cfg, samples);
    let fi = cfg.fast_side.fast_index();
    let fast: Vec<bool> = samples
        .iter()
        .map(|s| field(cfg, s.y, s.r)[fi].abs() > threshold)
        .collect();
    let mut runs: Vec<JumpMarker> = Vec::new();
    let mut k = 0;
    while k < fast.len() {
        if fast[k] {
            let start = k;
            while k + 1 < fast.len() && fast[k + 1] {
                k += 1;
            }
            match runs.last_mut() {
                Some(prev) if samples[start].t - samples[prev.end].t < merge_gap => prev.end = k,
                _ => runs.push(JumpMarker { start, end: k }),
            }
        }
        k += 1;
    }
    runs
}

fn check_epsilon(cfg: &ModelConfig) -> Result<()> {
    if !(cfg.epsilon > 0.0) {
        return Err(IslmError::Precondition("epsilon must be positive".into()));
    }
    Ok(())
}

fn run(
    f: impl Fn(Vec2) -> Vec2,
    s0: &State,
    t_end: f64,
    ctrl: &StepControl,
) -> Result<(Vec<Sample>, Vec<Step>)> {
    let mut samples = vec![Sample { t: 0.0, y: s0.y(), r: s0.r() }];
    let mut steps = Vec::new();
    solve(f, s0.as_array(), 0.0, t_end, ctrl, domain_guard, |st| {
        samples.push(Sample { t: st.t1, y: st.x1[0], r: st.x1[1] });
        steps.push(*st);
        Flow::Continue
    })?;
    Ok((samples, steps))
}

/// Integrates the full system from `s0` over `[0, t_end]`.
pub fn integrate(s0: &State, cfg: &ModelConfig, t_end: f64, ctrl: &StepControl) -> Result<Trajectory> {
    check_epsilon(cfg)?;
    let (samples, steps) = run(|x| field(cfg, x[0], x[1]), s0, t_end, ctrl)?;
    let jumps = mark_jumps(cfg, &samples, JUMP_SPEED_FACTOR, 0.0);
    Ok(Trajectory {
        accepted_steps: steps.len(),
        samples,
        jumps,
        steps,
    })
}

/// Integrates the fast subsystem with the slow variable frozen at its
/// initial value.
pub fn integrate_layer(s0: &State, cfg: &ModelConfig, t_end: f64, ctrl: &StepControl) -> Result<Trajectory> {
    let fi = cfg.fast_side.fast_index();
    let unit = ModelConfig { epsilon: 1.0, ..cfg.clone() };
    let f = |x: Vec2| {
        let v = field(&unit, x[0], x[1]);
        let mut out = [0.0; 2];
        out[fi] = v[fi];
        out
    };
    let (samples, steps) = run(f, s0, t_end, ctrl)?;
    Ok(Trajectory {
        accepted_steps: steps.len(),
        samples,
        jumps: Vec::new(),
        steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleControl {
    /// Horizon; `None` means `60 / epsilon`.
    pub t_end: Option<f64>,
    pub burn_fraction: f64,
    pub max_returns: usize,
    pub return_tol: f64,
    pub jump_speed_factor: f64,
    pub step: StepControl,
    pub window: GridSpec,
}

impl Default for CycleControl {
    fn default() -> Self {
        Self {
            t_end: None,
            burn_fraction: 0.2,
            max_returns: 50,
            return_tol: 1e-6,
            jump_speed_factor: JUMP_SPEED_FACTOR,
            step: StepControl::default(),
            window: GridSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Jump {
    pub from: State,
    pub to: State,
    pub start_index: usize,
    pub end_index: usize,
    /// Spread of the slow variable over the segment.
    pub slow_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    pub cycle_samples: Vec<Sample>,
    pub period: f64,
    pub orientation: Orientation,
    /// Signed area with the slow variable horizontal, fast vertical.
    pub signed_area: f64,
    /// Signed area with `Y` horizontal, `R` vertical.
    pub yr_signed_area: f64,
    pub jumps: Vec<Jump>,
    pub y_range: (f64, f64),
    pub r_range: (f64, f64),
    pub slow_range: f64,
    pub poincare_residual: f64,
    pub closure: f64,
    pub returns: usize,
    pub section_value: f64,
}

impl CycleReport {
    pub fn points(&self) -> Vec<Vec2> {
        self.cycle_samples.iter().map(Sample::xy).collect()
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn check_pairing(cfg: &ModelConfig) -> Result<()> {
    match (cfg.fast_side, cfg.regime) {
        (FastSide::Goods, Regime::KaldorGoods) | (FastSide::Money, Regime::ThreePhaseMoney) => Ok(()),
        (side, regime) => Err(IslmError::Precondition(format!(
            "fast side {side:?} does not match regime {regime:?}"
        ))),
    }
}

/// Crossing time of `slow = v` inside one step by bisection on the dense
/// output.
fn crossing_in(step: &Step, si: usize, v: f64) -> (f64, Vec2) {
    let (mut lo, mut hi) = (step.t0, step.t1);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if step.eval(mid)[si] < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, step.eval(t))
}

/// Integrates past the transient and detects a periodic orbit through a
/// Poincare section at the midpoint between the fold values of the fast
/// isocline, crossed with the slow variable increasing.
pub fn detect_cycle(cfg: &ModelConfig, s0: &State, ctrl: &CycleControl) -> Result<CycleReport> {
    check_epsilon(cfg)?;
    check_pairing(cfg)?;
    let side = cfg.fast_side;
    let si = side.slow_index();
    let t_end = ctrl.t_end.unwrap_or(60.0 / cfg.epsilon);
    let t_burn = ctrl.burn_fraction * t_end;

    let curve = trace_isocline(Curve::fast_for(side), cfg, &ctrl.window)?;
    let fixed_section = fold_values(&curve).ok().map(|fp| 0.5 * (fp.low + fp.high));

    let mut section = fixed_section;
    let mut kept: Vec<Step> = Vec::new();
    let mut returns: Vec<(f64, Vec2, usize)> = Vec::new();
    let mut converged = false;
    let mut settled = false;
    let settle_speed = 1e-12;

    let outcome = solve(
        |x| field(cfg, x[0], x[1]),
        s0.as_array(),
        0.0,
        t_end,
        &ctrl.step,
        domain_guard,
        |st| {
            if st.t1 < t_burn {
                return Flow::Continue;
            }
            let v = *section.get_or_insert(st.x1[si]);
            kept.push(*st);
            if st.f1[0].hypot(st.f1[1]) < settle_speed {
                settled = true;
                return Flow::Stop;
            }
            if st.x0[si] < v && st.x1[si] >= v {
                let (t, x) = crossing_in(st, si, v);
                returns.push((t, x, kept.len() - 1));
                let n = returns.len();
                if n >= 2 {
                    let (a, b) = (returns[n - 2].1, returns[n - 1].1);
                    if (a[0] - b[0]).hypot(a[1] - b[1]) < ctrl.return_tol {
                        converged = true;
                        return Flow::Stop;
                    }
                }
                if n >= ctrl.max_returns {
                    return Flow::Stop;
                }
            }
            Flow::Continue
        },
    );
    let (_, x_end) = outcome?;

    if !converged {
        let v = field(cfg, x_end[0], x_end[1]);
        if settled || v[0].hypot(v[1]) < 1e-6 {
            return Err(IslmError::NoCycle { y: x_end[0], r: x_end[1] });
        }
        return Err(IslmError::NonConvergent { returns: returns.len() });
    }

    let n = returns.len();
    let (ta, xa, ka) = returns[n - 2];
    let (tb, xb, kb) = returns[n - 1];
    let mut samples = vec![Sample { t: ta, y: xa[0], r: xa[1] }];
    for st in &kept[ka..kb] {
        samples.push(Sample { t: st.t1, y: st.x1[0], r: st.x1[1] });
    }
    samples.push(Sample { t: tb, y: xb[0], r: xb[1] });

    let y_range = range(samples.iter().map(|s| s.y));
    let r_range = range(samples.iter().map(|s| s.r));
    if (y_range.1 - y_range.0) + (r_range.1 - r_range.0) < 1e-4 {
        return Err(IslmError::NoCycle { y: xb[0], r: xb[1] });
    }
    let period = tb - ta;
    let pts: Vec<Vec2> = samples.iter().map(Sample::xy).collect();
    let open = &pts[..pts.len() - 1];
    let area = slow_fast_area(side, open);
    let yr_area = signed_area(open);
    let slow_range = if si == 0 { y_range.1 - y_range.0 } else { r_range.1 - r_range.0 };

    let markers = mark_jumps(cfg, &samples, ctrl.jump_speed_factor, 0.01 * period);
    let jumps = markers
        .iter()
        .map(|m| {
            let run = &samples[m.start..=m.end];
            let (lo, hi) = range(run.iter().map(|s| s.xy()[si]));
            Jump {
                from: samples[m.start].state(),
                to: samples[m.end].state(),
                start_index: m.start,
                end_index: m.end,
                slow_drift: hi - lo,
            }
        })
        .collect();

    Ok(CycleReport {
        period,
        orientation: orientation_of(area),
        signed_area: area,
        yr_signed_area: yr_area,
        jumps,
        y_range,
        r_range,
        slow_range,
        poincare_residual: (xa[0] - xb[0]).hypot(xa[1] - xb[1]),
        closure: (xa[0] - xb[0]).hypot(xa[1] - xb[1]),
        returns: n,
        section_value: section.unwrap_or(f64::NAN),
        cycle_samples: samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SegmentKind {
    Arc,
    Jump,
}

/// Inclusive index range into [`SingularOrbit::points`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitSegment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularOrbit {
    /// Closed loop, first point repeated at the end.
    pub points: Vec<State>,
    pub segments: Vec<OrbitSegment>,
    pub folds: FoldPair,
    pub orientation: Orientation,
    pub signed_area: f64,
}

impl SingularOrbit {
    pub fn xy(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| p.as_array()).collect()
    }
}

/// Spacing of the resampled singular orbit.
pub const ORBIT_SPACING: f64 = 1e-3;

/// Slow-equation rate at a point (the drift on the fast isocline).
fn slow_rate(cfg: &ModelConfig, p: &State) -> f64 {
    let si = cfg.fast_side.slow_index();
    let unit = ModelConfig { epsilon: 1.0, ..cfg.clone() };
    field(&unit, p.y(), p.r())[si]
}

/// Curve samples from `from` towards `to` (indices into the curve), both
/// inclusive.
fn walk(c: &IsoclineCurve, from: usize, to: usize) -> Vec<State> {
    if from <= to {
        c.points[from..=to].to_vec()
    } else {
        c.points[to..=from].iter().rev().copied().collect()
    }
}

fn densify_on_curve(which: Curve, cfg: &ModelConfig, pts: &[State], spacing: f64) -> Vec<State> {
    let mut out = Vec::with_capacity(pts.len() * 4);
    for w in pts.windows(2) {
        let (a, b) = (w[0].as_array(), w[1].as_array());
        let d = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (d / spacing).ceil().max(1.0) as usize;
        out.push(w[0]);
        for k in 1..n {
            let t = k as f64 / n as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let q = correct(which, cfg, p).unwrap_or(p);
            out.push(State::new(q[0].max(0.0), q[1]).expect("finite"));
        }
    }
    if let Some(&last) = pts.last() {
        out.push(last);
    }
    out
}

fn densify_line(a: State, b: State, spacing: f64) -> Vec<State> {
    let (pa, pb) = (a.as_array(), b.as_array());
    let d = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
    let n = (d / spacing).ceil().max(1.0) as usize;
    let mut out: Vec<State> = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            State::new(pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])).expect("between valid states")
        })
        .collect();
    out.push(b);
    out
}

/// Builds the epsilon -> 0 loop: drift along the stable arc ending at the
/// low fold, jump at the low fold value, drift along the stable arc ending at
/// the high fold, jump back.
pub fn singular_orbit(cfg: &ModelConfig, window: &GridSpec) -> Result<SingularOrbit> {
    let side = cfg.fast_side;
    let which = Curve::fast_for(side);
    let c = arc_stability(&trace_isocline(which, cfg, window)?, cfg)?;
    let fp = fold_values(&c)?;
    let (f_first, f_second) = (c.folds[0], c.folds[1]);
    let (low_fold, high_fold) = if f_first.slow_value <= f_second.slow_value {
        (f_first, f_second)
    } else {
        (f_second, f_first)
    };
    // stable arc touching a fold
    let stable_next_to = |idx: usize| {
        c.arcs
            .iter()
            .find(|a| (a.start == idx || a.end == idx) && a.stability == Some(Stability::Stable))
            .copied()
            .ok_or_else(|| IslmError::NoReturnDrift("fold without an adjacent stable arc".into()))
    };
    let arc_low = stable_next_to(low_fold.index)?;
    let arc_high = stable_next_to(high_fold.index)?;
    if arc_low == arc_high {
        return Err(IslmError::NoReturnDrift("both folds border the same stable arc".into()));
    }

    // landing points
    let land = |arc: &crate::isocline::Arc, value: f64, what: &str| -> Result<(usize, State)> {
        let hits = c.crossings_in(cfg, value, arc.start, arc.end);
        match hits.as_slice() {
            [one] => Ok(*one),
            [] => Err(IslmError::NoReturnDrift(format!(
                "jump from the {what} fold lands outside the window"
            ))),
            _ => Err(IslmError::NoReturnDrift(format!(
                "jump from the {what} fold has several landing points"
            ))),
        }
    };
    let (k_on_low, land_on_low) = land(&arc_low, fp.high, "high")?;
    let (k_on_high, land_on_high) = land(&arc_high, fp.low, "low")?;

    // arc paths from landing point to fold
    let path = |k: usize, land_pt: State, fold_idx: usize| {
        let mut v = vec![land_pt];
        let mut rest = if k < fold_idx { walk(&c, k + 1, fold_idx) } else { walk(&c, k, fold_idx) };
        if let Some(first) = rest.first() {
            if first.distance(&land_pt) < 1e-15 {
                rest.remove(0);
            }
        }
        v.extend(rest);
        v
    };
    let path_low = path(k_on_low, land_on_low, low_fold.index);
    let path_high = path(k_on_high, land_on_high, high_fold.index);

    // slow drift must carry each arc towards its fold
    let check = |pts: &[State], sign: f64, what: &str| -> Result<()> {
        let interior = &pts[1..pts.len().saturating_sub(1)];
        if interior.iter().any(|p| sign * slow_rate(cfg, p) <= 0.0) {
            return Err(IslmError::NoReturnDrift(format!(
                "slow drift on the {what} stable arc does not lead to its fold"
            )));
        }
        Ok(())
    };
    check(&path_low, -1.0, "lower")?;
    check(&path_high, 1.0, "upper")?;

    let mut points = Vec::new();
    let mut segments = Vec::new();
    let mut push_seg = |kind: SegmentKind, pts: Vec<State>, points: &mut Vec<State>| {
        let start = if points.is_empty() { 0 } else { points.len() - 1 };
        let skip = usize::from(!points.is_empty());
        points.extend(pts.into_iter().skip(skip));
        segments.push(OrbitSegment { kind, start, end: points.len() - 1 });
    };
    push_seg(SegmentKind::Arc, densify_on_curve(which, cfg, &path_low, ORBIT_SPACING), &mut points);
    push_seg(SegmentKind::Jump, densify_line(low_fold.point, land_on_high, ORBIT_SPACING), &mut points);
    push_seg(SegmentKind::Arc, densify_on_curve(which, cfg, &path_high, ORBIT_SPACING), &mut points);
    push_seg(SegmentKind::Jump, densify_line(high_fold.point, land_on_low, ORBIT_SPACING), &mut points);

    let xy: Vec<Vec2> = points.iter().map(|p| p.as_array()).collect();
    let area = slow_fast_area(side, &xy[..xy.len() - 1]);
    Ok(SingularOrbit {
        points,
        segments,
        folds: fp,
        orientation: orientation_of(area),
        signed_area: area,
    })
}

/// Uniform bucket grid for nearest-neighbour queries.
struct Buckets<'a> {
    pts: &'a [Vec2],
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> Buckets<'a> {
    fn new(pts: &'a [Vec2], cell: f64) -> Self {
        let (x0, x1) = range(pts.iter().map(|p| p[0]));
        let (y0, y1) = range(pts.iter().map(|p| p[1]));
        let nx = (((x1 - x0) / cell).floor() as usize + 1).min(1 << 14);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).min(1 << 14);
        let cell = cell.max((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut b = Self { pts, origin: [x0, y0], cell, nx, ny, cells: Vec::new() };
        for (k, p) in pts.iter().enumerate() {
            let (i, j) = b.index(*p);
            cells[j * nx + i].push(k as u32);
        }
        b.cells = cells;
        b
    }

    fn index(&self, p: Vec2) -> (usize, usize) {
        let i = ((p[0] - self.origin[0]) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p[1] - self.origin[1]) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    fn nearest(&self, q: Vec2) -> f64 {
        let (ci, cj) = self.index(q);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // every point in ring r is at least (r - 1) cells away, also for
            // queries outside the grid (projection onto the box is 1-Lipschitz)
            if ring > 0 && (ring as f64 - 1.0) * self.cell > best {
                break;
            }
            let r = ring as isize;
            let (ci, cj) = (ci as isize, cj as isize);
            for j in (cj - r)..=(cj + r) {
                if j < 0 || j >= self.ny as isize {
                    continue;
                }
                for i in (ci - r)..=(ci + r) {
                    if i < 0 || i >= self.nx as isize {
                        continue;
                    }
                    if (j - cj).abs() != r && (i - ci).abs() != r {
                        continue;
                    }
                    for &k in &self.cells[j as usize * self.nx + i as usize] {
                        let p = self.pts[k as usize];
                        best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
            }
        }
        best
    }
}

fn directed(a: &[Vec2], b: &[Vec2]) -> f64 {
    let buckets = Buckets::new(b, 0.05);
    a.par_iter().map(|&p| buckets.nearest(p)).reduce(|| 0.0, f64::max)
}

/// Discrete symmetric Hausdorff distance.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

/// Resamples a polyline so that consecutive points are at most `spacing`
/// apart.
pub fn densify_polyline(pts: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(pts.len() * 2);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b[0] - a[0]).hypot(b[1] - a[1]) / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    if let Some(&l) = pts.last() {
        out.push(l);
    }
    out
}

/// Hausdorff distance between the detected cycle and the singular orbit for
/// each epsilon, in the given order.
pub fn epsilon_convergence(
    cfg: &ModelConfig,
    eps_list: &[f64],
    ctrl: &CycleControl,
) -> Result<Vec<(f64, f64)>> {
    let orbit = singular_orbit(cfg, &ctrl.window)?;
    let skeleton = orbit.xy();
    let seed = orbit.points[0];
    eps_list
        .par_iter()
        .map(|&eps| {
            let c = cfg.with_epsilon(eps);
            let rep = detect_cycle(&c, &seed, ctrl)?;
            let dense = densify_polyline(&rep.points(), ORBIT_SPACING);
            Ok((eps, hausdorff(&dense, &skeleton)))
        })
        .collect()
}
