//! Isocline tracing by pseudo-arclength continuation, fold location and arc
//! stability labels.
//!
//! For IS the fast coordinate is `Y` and folds are extrema of `R`; for LM the
//! fast coordinate is `R` and folds are extrema of `Y`.

use std::fmt;

use serde::Serialize;

use crate::error::{IslmError, Result};
use crate::model::{FastSide, GridSpec, ModelConfig, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Curve {
    IS,
    LM,
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Curve::IS => "IS",
            Curve::LM => "LM",
        })
    }
}

impl Curve {
    /// The isocline whose market is fast.
    pub fn fast_for(side: FastSide) -> Self {
        match side {
            FastSide::Goods => Curve::IS,
            FastSide::Money => Curve::LM,
        }
    }

    /// Index in `[y, r]` of the coordinate the curve folds over.
    pub fn fast_index(self) -> usize {
        match self {
            Curve::IS => 0,
            Curve::LM => 1,
        }
    }

    pub fn slow_index(self) -> usize {
        1 - self.fast_index()
    }

    pub fn residual(self, cfg: &ModelConfig, y: f64, r: f64) -> f64 {
        match self {
            Curve::IS => cfg.goods_excess(y, r),
            Curve::LM => cfg.money_excess(y, r),
        }
    }

    pub fn gradient(self, cfg: &ModelConfig, y: f64, r: f64) -> [f64; 2] {
        let p = cfg.partials(y, r);
        match self {
            Curve::IS => [p.goods_y(), p.goods_r()],
            Curve::LM => [p.money_y(), p.money_r()],
        }
    }

    /// Derivative of the curve's own adjustment equation in its fast
    /// coordinate: `d[alpha(I-S)]/dY` or `d[beta(L-M-M_S)]/dR`.
    pub fn fast_derivative(self, cfg: &ModelConfig, y: f64, r: f64) -> f64 {
        let g = self.gradient(cfg, y, r);
        match self {
            Curve::IS => cfg.alpha * g[0],
            Curve::LM => cfg.beta * g[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ArcLabel {
    A1,
    A2,
    A3,
    Monotone,
}

impl ArcLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcLabel::A1 => "A1",
            ArcLabel::A2 => "A2",
            ArcLabel::A3 => "A3",
            ArcLabel::Monotone => "Monotone",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
        }
    }
}

/// Inclusive sample range of one arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arc {
    pub start: usize,
    pub end: usize,
    pub label: ArcLabel,
    pub stability: Option<Stability>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fold {
    pub index: usize,
    pub point: State,
    pub slow_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FoldPair {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoclineCurve {
    pub which: Curve,
    pub points: Vec<State>,
    pub folds: Vec<Fold>,
    pub arcs: Vec<Arc>,
    pub closed: bool,
}

impl IsoclineCurve {
    pub fn fast(&self, k: usize) -> f64 {
        self.points[k].as_array()[self.which.fast_index()]
    }

    pub fn slow(&self, k: usize) -> f64 {
        self.points[k].as_array()[self.which.slow_index()]
    }

    pub fn arc_at(&self, k: usize) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.start <= k && k <= a.end)
    }

    pub fn arc(&self, label: ArcLabel) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.label == label)
    }

    pub fn max_residual(&self, cfg: &ModelConfig) -> f64 {
        self.points
            .iter()
            .map(|p| self.which.residual(cfg, p.y(), p.r()).abs())
            .fold(0.0, f64::max)
    }

    /// Points where the line `slow = value` crosses the given samples
    /// range, solved onto the curve at fixed slow coordinate.
    pub fn crossings_in(
        &self,
        cfg: &ModelConfig,
        value: f64,
        start: usize,
        end: usize,
    ) -> Vec<(usize, State)> {
        let mut out = Vec::new();
        for k in start..end {
            let (a, b) = (self.slow(k) - value, self.slow(k + 1) - value);
            if a == 0.0 {
                out.push((k, self.points[k]));
            } else if a * b < 0.0 {
                let t = a / (a - b);
                let guess = self.fast(k) + t * (self.fast(k + 1) - self.fast(k));
                let fast = solve_fast(self.which, cfg, value, guess, (self.fast(k), self.fast(k + 1)));
                if let Some(s) = self.make_state(fast, value) {
                    out.push((k, s));
                }
            }
        }
        if end > start && self.slow(end) == value {
            out.push((end, self.points[end]));
        }
        out
    }

    pub fn crossings(&self, cfg: &ModelConfig, value: f64) -> Vec<(usize, State)> {
        if self.points.len() < 2 {
            return Vec::new();
        }
        self.crossings_in(cfg, value, 0, self.points.len() - 1)
    }

    pub(crate) fn make_state(&self, fast: f64, slow: f64) -> Option<State> {
        let mut xy = [0.0; 2];
        xy[self.which.fast_index()] = fast;
        xy[self.which.slow_index()] = slow;
        State::new(xy[0], xy[1]).ok()
    }
}

/// Solves the curve equation for its fast coordinate at a fixed slow value,
/// staying inside the bracket when it has a sign change.
pub(crate) fn solve_fast(
    which: Curve,
    cfg: &ModelConfig,
    slow: f64,
    guess: f64,
    bracket: (f64, f64),
) -> f64 {
    let at = |fast: f64| {
        let mut xy = [0.0; 2];
        xy[which.fast_index()] = fast;
        xy[which.slow_index()] = slow;
        xy
    };
    let phi = |fast: f64| {
        let xy = at(fast);
        which.residual(cfg, xy[0], xy[1])
    };
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let slack = (hi - lo).max(1e-12);
    let mut x = guess;
    for _ in 0..50 {
        let xy = at(x);
        let f = which.residual(cfg, xy[0], xy[1]);
        if f.abs() < 1e-14 {
            break;
        }
        let d = which.gradient(cfg, xy[0], xy[1])[which.fast_index()];
        if d == 0.0 {
            break;
        }
        let step = f / d;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    let inside = x >= lo - slack && x <= hi + slack;
    if inside && phi(x).abs() < 1e-12 {
        return x;
    }
    if phi(lo) * phi(hi) < 0.0 {
        crate::model::bisect(phi, lo, hi, 1e-15)
    } else {
        x
    }
}

/// Pure residual tolerance of corrected samples.
pub const CORRECTOR_TOL: f64 = 1e-12;
/// Bound guaranteed at every sample.
pub const SAMPLE_RESIDUAL: f64 = 1e-8;
const STEP_INIT: f64 = 1e-2;
const STEP_MIN: f64 = 1e-5;
const STEP_MAX: f64 = 5e-2;
const MAX_TURN: f64 = 0.05;
const MAX_SAMPLES: usize = 400_000;

/// Newton projection along the residual gradient.
pub(crate) fn correct(which: Curve, cfg: &ModelConfig, p: [f64; 2]) -> Option<[f64; 2]> {
    let mut x = p;
    for _ in 0..30 {
        let f = which.residual(cfg, x[0], x[1]);
        if f.abs() < CORRECTOR_TOL {
            return Some(x);
        }
        let g = which.gradient(cfg, x[0], x[1]);
        let n2 = g[0] * g[0] + g[1] * g[1];
        if n2 == 0.0 || !n2.is_finite() {
            return None;
        }
        x = [x[0] - f * g[0] / n2, x[1] - f * g[1] / n2];
    }
    let f = which.residual(cfg, x[0], x[1]);
    (f.abs() < CORRECTOR_TOL).then_some(x)
}

fn tangent(which: Curve, cfg: &ModelConfig, x: [f64; 2]) -> [f64; 2] {
    let g = which.gradient(cfg, x[0], x[1]);
    let n = g[0].hypot(g[1]);
    [-g[1] / n, g[0] / n]
}

fn find_seed(which: Curve, cfg: &ModelConfig, w: &GridSpec) -> Option<[f64; 2]> {
    let phi = |y: f64, r: f64| which.residual(cfg, y, r);
    // rows first, then columns; middle lines first
    let mut rows: Vec<usize> = (0..w.nr).collect();
    rows.sort_by_key(|&k| (k as i64 - (w.nr / 2) as i64).abs());
    for ir in rows {
        let r = w.r_at(ir);
        for iy in 0..w.ny - 1 {
            let (y0, y1) = (w.y_at(iy), w.y_at(iy + 1));
            if phi(y0, r) * phi(y1, r) <= 0.0 {
                let y = crate::model::bisect(|y| phi(y, r), y0, y1, 1e-14);
                if let Some(x) = correct(which, cfg, [y, r]) {
                    if w.contains(x[0], x[1]) {
                        return Some(x);
                    }
                }
            }
        }
    }
    let mut cols: Vec<usize> = (0..w.ny).collect();
    cols.sort_by_key(|&k| (k as i64 - (w.ny / 2) as i64).abs());
    for iy in cols {
        let y = w.y_at(iy);
        for ir in 0..w.nr - 1 {
            let (r0, r1) = (w.r_at(ir), w.r_at(ir + 1));
            if phi(y, r0) * phi(y, r1) <= 0.0 {
                let r = crate::model::bisect(|r| phi(y, r), r0, r1, 1e-14);
                if let Some(x) = correct(which, cfg, [y, r]) {
                    if w.contains(x[0], x[1]) {
                        return Some(x);
                    }
                }
            }
        }
    }
    None
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Continues from `start` along `dir` until leaving the window or closing.
/// Returns the samples after `start` and whether the branch closed.
fn continue_branch(
    which: Curve,
    cfg: &ModelConfig,
    w: &GridSpec,
    start: [f64; 2],
    dir: f64,
) -> (Vec<[f64; 2]>, bool) {
    let mut out = Vec::new();
    let mut x = start;
    let mut t = tangent(which, cfg, x);
    t = [dir * t[0], dir * t[1]];
    let mut h = STEP_INIT;
    let mut travelled = 0.0;
    while out.len() < MAX_SAMPLES {
        let pred = [x[0] + h * t[0], x[1] + h * t[1]];
        let corr = correct(which, cfg, pred);
        let Some(c) = corr else {
            if h > STEP_MIN {
                h = (h * 0.5).max(STEP_MIN);
                continue;
            }
            break;
        };
        let mut tn = tangent(which, cfg, c);
        if dot(tn, t) < 0.0 {
            tn = [-tn[0], -tn[1]];
        }
        let turn = dot(tn, t).clamp(-1.0, 1.0).acos();
        let moved = (c[0] - x[0]).hypot(c[1] - x[1]);
        if (turn > MAX_TURN || moved > 2.0 * h) && h > STEP_MIN {
            h = (h * 0.5).max(STEP_MIN);
            continue;
        }
        if !w.contains(c[0], c[1]) {
            // boundary point by bisection on the step length
            let (mut lo, mut hi) = (0.0, h);
            let mut best = x;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match correct(which, cfg, [x[0] + mid * t[0], x[1] + mid * t[1]]) {
                    Some(p) if w.contains(p[0], p[1]) => {
                        best = p;
                        lo = mid;
                    }
                    _ => hi = mid,
                }
            }
            if best != x {
                out.push(best);
            }
            return (out, false);
        }
        travelled += moved;
        let back = (c[0] - start[0]).hypot(c[1] - start[1]);
        if travelled > 10.0 * h && back < h {
            return (out, true);
        }
        out.push(c);
        x = c;
        t = tn;
        if turn < 0.2 * MAX_TURN {
            h = (h * 1.5).min(STEP_MAX);
        }
    }
    (out, false)
}

/// Bisection on the chord between two samples for a zero of the fold
/// partial, each probe projected onto the curve.
fn locate_fold(which: Curve, cfg: &ModelConfig, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let fi = which.fast_index();
    let probe = |tau: f64| {
        let p = [a[0] + tau * (b[0] - a[0]), a[1] + tau * (b[1] - a[1])];
        correct(which, cfg, p).unwrap_or(p)
    };
    let part = |p: [f64; 2]| which.gradient(cfg, p[0], p[1])[fi];
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = part(a);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let fm = part(probe(mid));
        if fm == 0.0 {
            return probe(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    probe(0.5 * (lo + hi))
}

/// Traces the zero set of one market's excess inside `window`.
pub fn trace_isocline(which: Curve, cfg: &ModelConfig, window: &GridSpec) -> Result<IsoclineCurve> {
    window.validate()?;
    let seed = find_seed(which, cfg, window).ok_or(IslmError::SeedNotFound(which))?;
    let (fwd, closed) = continue_branch(which, cfg, window, seed, 1.0);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(fwd.len() * 2 + 1);
    if closed {
        pts.push(seed);
        pts.extend(fwd);
        pts.push(seed);
    } else {
        let (bwd, _) = continue_branch(which, cfg, window, seed, -1.0);
        pts.extend(bwd.into_iter().rev());
        pts.push(seed);
        pts.extend(fwd);
    }
    let fi = which.fast_index();
    if !closed && pts.len() > 1 && pts[pts.len() - 1][fi] < pts[0][fi] {
        pts.reverse();
    }

    // insert folds
    let part = |p: [f64; 2]| which.gradient(cfg, p[0], p[1])[fi];
    let mut with_folds: Vec<[f64; 2]> = Vec::with_capacity(pts.len() + 4);
    let mut fold_idx = Vec::new();
    for k in 0..pts.len() {
        let pk = part(pts[k]);
        if pk == 0.0 && k > 0 && k + 1 < pts.len() {
            fold_idx.push(with_folds.len());
            with_folds.push(pts[k]);
            continue;
        }
        with_folds.push(pts[k]);
        if k + 1 < pts.len() {
            let pn = part(pts[k + 1]);
            if pk * pn < 0.0 {
                let f = locate_fold(which, cfg, pts[k], pts[k + 1]);
                fold_idx.push(with_folds.len());
                with_folds.push(f);
            }
        }
    }

    let points: Vec<State> = with_folds
        .iter()
        .map(|p| State::new(p[0].max(0.0), p[1]).expect("window keeps y >= 0"))
        .collect();
    let folds: Vec<Fold> = fold_idx
        .iter()
        .map(|&i| Fold {
            index: i,
            point: points[i],
            slow_value: points[i].as_array()[which.slow_index()],
        })
        .collect();

    let mut arcs = Vec::new();
    let last = points.len() - 1;
    if folds.is_empty() {
        arcs.push(Arc {
            start: 0,
            end: last,
            label: ArcLabel::Monotone,
            stability: None,
        });
    } else {
        let mut bounds = vec![0];
        bounds.extend(folds.iter().map(|f| f.index));
        bounds.push(last);
        let labels = [ArcLabel::A1, ArcLabel::A2, ArcLabel::A3];
        for (n, w) in bounds.windows(2).enumerate() {
            arcs.push(Arc {
                start: w[0],
                end: w[1],
                label: *labels.get(n).unwrap_or(&ArcLabel::A3),
                stability: None,
            });
        }
    }

    Ok(IsoclineCurve {
        which,
        points,
        folds,
        arcs,
        closed,
    })
}

pub fn fold_values(c: &IsoclineCurve) -> Result<FoldPair> {
    if c.folds.len() != 2 {
        return Err(IslmError::FoldCountMismatch(c.folds.len()));
    }
    let (a, b) = (c.folds[0].slow_value, c.folds[1].slow_value);
    Ok(FoldPair {
        low: a.min(b),
        high: a.max(b),
    })
}

/// Below this magnitude the fast derivative has no usable sign.
pub const SIGN_TOL: f64 = 1e-12;
const FOLD_EXCLUSION: f64 = 1e-7;

/// Labels every arc Stable or Unstable from the sign of the fast derivative.
pub fn arc_stability(c: &IsoclineCurve, cfg: &ModelConfig) -> Result<IsoclineCurve> {
    let expected = Curve::fast_for(cfg.fast_side);
    if c.which != expected {
        return Err(IslmError::WrongCurve {
            expected,
            got: c.which,
        });
    }
    let near_fold = |s: &State| c.folds.iter().any(|f| f.point.distance(s) < FOLD_EXCLUSION);
    let mut out = c.clone();
    for arc in &mut out.arcs {
        let mut sign = 0i8;
        for k in arc.start..=arc.end {
            let p = c.points[k];
            if near_fold(&p) {
                continue;
            }
            let d = c.which.fast_derivative(cfg, p.y(), p.r());
            if d.abs() < SIGN_TOL {
                return Err(IslmError::AmbiguousSign { index: k, value: d });
            }
            let s = if d < 0.0 { -1 } else { 1 };
            if sign == 0 {
                sign = s;
            } else if s != sign {
                return Err(IslmError::AmbiguousSign { index: k, value: d });
            }
        }
        arc.stability = match sign {
            -1 => Some(Stability::Stable),
            1 => Some(Stability::Unstable),
            _ => None,
        };
    }
    Ok(out)
}
