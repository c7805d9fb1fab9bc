//! Vector field, Jacobian, equilibria and their classification.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{IslmError, Result};
use crate::model::{bisect, FastSide, GridSpec, ModelConfig, State};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorFieldValue {
    pub dy_dt: f64,
    pub dr_dt: f64,
}

impl VectorFieldValue {
    pub fn norm(&self) -> f64 {
        self.dy_dt.hypot(self.dr_dt)
    }
}

/// Multipliers `(goods, money)` applied to `alpha(I-S)` and `beta(L-M-M_S)`.
fn rate_scales(cfg: &ModelConfig) -> (f64, f64) {
    match cfg.fast_side {
        FastSide::Goods => (cfg.alpha, cfg.epsilon * cfg.beta),
        FastSide::Money => (cfg.epsilon * cfg.alpha, cfg.beta),
    }
}

/// Raw field on the whole plane, used by the integrators where intermediate
/// stages may probe `Y < 0`.
pub(crate) fn field(cfg: &ModelConfig, y: f64, r: f64) -> [f64; 2] {
    let (sg, sm) = rate_scales(cfg);
    [sg * cfg.goods_excess(y, r), sm * cfg.money_excess(y, r)]
}

pub fn vector_field(s: &State, cfg: &ModelConfig) -> VectorFieldValue {
    let [dy_dt, dr_dt] = field(cfg, s.y(), s.r());
    VectorFieldValue { dy_dt, dr_dt }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jacobian2 {
    pub j11: f64,
    pub j12: f64,
    pub j21: f64,
    pub j22: f64,
    pub trace: f64,
    pub det: f64,
}

impl Jacobian2 {
    pub fn new(j11: f64, j12: f64, j21: f64, j22: f64) -> Self {
        Self {
            j11,
            j12,
            j21,
            j22,
            trace: j11 + j22,
            det: j11 * j22 - j12 * j21,
        }
    }

    /// Scales every entry by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.j11 * k, self.j12 * k, self.j21 * k, self.j22 * k)
    }
}

pub(crate) fn jacobian_at(cfg: &ModelConfig, y: f64, r: f64) -> Jacobian2 {
    let p = cfg.partials(y, r);
    let (sg, sm) = rate_scales(cfg);
    Jacobian2::new(
        sg * p.goods_y(),
        sg * p.goods_r(),
        sm * p.money_y(),
        sm * p.money_r(),
    )
}

pub fn jacobian(s: &State, cfg: &ModelConfig) -> Jacobian2 {
    jacobian_at(cfg, s.y(), s.r())
}

/// Determinant of the unscaled residual Jacobian `d(I-S, L-M-M_S)/d(Y, R)`.
/// Vanishes where IS and LM are tangent.
pub(crate) fn tangency_det(cfg: &ModelConfig, y: f64, r: f64) -> f64 {
    let p = cfg.partials(y, r);
    p.goods_y() * p.money_r() - p.goods_r() * p.money_y()
}

/// Roots of `lambda^2 - trace*lambda + det = 0`.
pub fn eigen2(j: &Jacobian2) -> [Complex64; 2] {
    let b = -j.trace;
    let c = j.det;
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let (l1, l2) = (q, c / q);
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
    } else {
        let re = 0.5 * j.trace;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, -im), Complex64::new(re, im)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    DegenerateZeroEig,
}

impl EquilibriumKind {
    pub fn is_attractor(self) -> bool {
        matches!(self, EquilibriumKind::StableNode | EquilibriumKind::StableFocus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumKind::StableNode => "StableNode",
            EquilibriumKind::StableFocus => "StableFocus",
            EquilibriumKind::UnstableNode => "UnstableNode",
            EquilibriumKind::UnstableFocus => "UnstableFocus",
            EquilibriumKind::Saddle => "Saddle",
            EquilibriumKind::DegenerateZeroEig => "DegenerateZeroEig",
        }
    }
}

/// Eigenvalues below this modulus count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-8;
/// Discriminants within this band of zero are reported as nodes.
pub const FOCUS_BAND: f64 = 1e-12;

pub fn classify(j: &Jacobian2, eigs: &[Complex64; 2]) -> EquilibriumKind {
    let min_mod = eigs[0].norm().min(eigs[1].norm());
    if min_mod < ZERO_EIG_TOL {
        return EquilibriumKind::DegenerateZeroEig;
    }
    if j.det < 0.0 {
        return EquilibriumKind::Saddle;
    }
    let disc = j.trace * j.trace - 4.0 * j.det;
    let focus = disc < -FOCUS_BAND;
    match (j.trace < 0.0, focus) {
        (true, true) => EquilibriumKind::StableFocus,
        (true, false) => EquilibriumKind::StableNode,
        (false, true) => EquilibriumKind::UnstableFocus,
        (false, false) => EquilibriumKind::UnstableNode,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub state: State,
    pub jac: Jacobian2,
    pub eigs: [Complex64; 2],
    pub kind: EquilibriumKind,
}

impl Equilibrium {
    pub fn at(cfg: &ModelConfig, state: State) -> Self {
        let jac = jacobian(&state, cfg);
        let eigs = eigen2(&jac);
        let kind = classify(&jac, &eigs);
        Self {
            state,
            jac,
            eigs,
            kind,
        }
    }
}

#[derive(Serialize)]
struct EquilibriumJson<'a> {
    y: f64,
    r: f64,
    i_s: f64,
    eig_re: [f64; 2],
    eig_im: [f64; 2],
    trace: f64,
    det: f64,
    kind: &'a str,
}

impl Equilibrium {
    pub fn to_json_value(&self, cfg: &ModelConfig) -> serde_json::Value {
        serde_json::to_value(EquilibriumJson {
            y: self.state.y(),
            r: self.state.r(),
            i_s: self.state.short_rate(cfg),
            eig_re: [self.eigs[0].re, self.eigs[1].re],
            eig_im: [self.eigs[0].im, self.eigs[1].im],
            trace: self.jac.trace,
            det: self.jac.det,
            kind: self.kind.as_str(),
        })
        .expect("equilibrium serializes")
    }
}

/// Residual tolerance for refined equilibria.
pub const ROOT_TOL: f64 = 1e-10;
/// Equilibria closer than this are merged.
pub const MERGE_TOL: f64 = 1e-6;
const NEWTON_ITERS: usize = 50;
const SCAN_POINTS: usize = 4000;

/// `R_IS(y)`. Goods excess is strictly decreasing in `R`, so IS is a graph
/// over income.
pub(crate) fn is_rate(cfg: &ModelConfig, y: f64) -> f64 {
    let mut r = 0.0;
    for _ in 0..60 {
        let f = cfg.goods_excess(y, r);
        let fr = cfg.partials(y, r).goods_r();
        let step = f / fr;
        r -= step;
        if step.abs() <= 1e-15 * r.abs().max(1.0) {
            break;
        }
    }
    r
}

/// Money excess along IS and its total derivative in `y`.
fn money_along_is(cfg: &ModelConfig, y: f64) -> (f64, f64, f64) {
    let r = is_rate(cfg, y);
    let p = cfg.partials(y, r);
    let dr_dy = -p.goods_y() / p.goods_r();
    (cfg.money_excess(y, r), p.money_y() + p.money_r() * dr_dy, r)
}

/// Damped Newton on both residuals with the closed-form Jacobian.
pub(crate) fn newton(cfg: &ModelConfig, y0: f64, r0: f64) -> Option<(f64, f64)> {
    let (mut y, mut r) = (y0, r0);
    let res = |y: f64, r: f64| (cfg.goods_excess(y, r), cfg.money_excess(y, r));
    let (mut f, mut g) = res(y, r);
    for _ in 0..NEWTON_ITERS {
        let norm = f.hypot(g);
        if norm < ROOT_TOL * 1e-2 {
            break;
        }
        let p = cfg.partials(y, r);
        let (a, b, c, d) = (p.goods_y(), p.goods_r(), p.money_y(), p.money_r());
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dy = (d * f - b * g) / det;
        let dr = (a * g - c * f) / det;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (yn, rn) = (y - lam * dy, r - lam * dr);
            let (fn_, gn) = res(yn, rn);
            if fn_.hypot(gn) < norm {
                y = yn;
                r = rn;
                f = fn_;
                g = gn;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f.hypot(g) < ROOT_TOL).then_some((y, r))
}

fn scan_candidates(cfg: &ModelConfig, grid: &GridSpec) -> Vec<(f64, f64)> {
    let (lo, hi) = (grid.y_min, grid.y_max);
    let ys: Vec<f64> = (0..=SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / SCAN_POINTS as f64)
        .collect();
    let vals: Vec<(f64, f64)> = ys
        .iter()
        .map(|&y| {
            let (g, dg, _) = money_along_is(cfg, y);
            (g, dg)
        })
        .collect();

    // nodes: scan points plus interior extrema of the money residual
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(ys.len() + 8);
    let mut extrema = Vec::new();
    for k in 0..ys.len() {
        nodes.push((ys[k], vals[k].0));
        if k + 1 < ys.len() && vals[k].1 * vals[k + 1].1 < 0.0 {
            let ye = bisect(|y| money_along_is(cfg, y).1, ys[k], ys[k + 1], 1e-13);
            let ge = money_along_is(cfg, ye).0;
            nodes.push((ye, ge));
            extrema.push((ye, ge));
        }
    }

    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let ((y0, g0), (y1, g1)) = (w[0], w[1]);
        if g0 == 0.0 {
            out.push(y0);
        } else if g0 * g1 < 0.0 {
            out.push(bisect(|y| money_along_is(cfg, y).0, y0, y1, 1e-14));
        }
    }
    if let Some(&(y, g)) = nodes.last() {
        if g == 0.0 {
            out.push(y);
        }
    }
    // tangential contacts
    for (ye, ge) in extrema {
        if ge.abs() <= ROOT_TOL {
            out.push(ye);
        }
    }
    out.into_iter().map(|y| (y, is_rate(cfg, y))).collect()
}

/// Equilibria in the window, sorted by increasing income.
pub fn find_equilibria(cfg: &ModelConfig, grid: &GridSpec) -> Result<Vec<Equilibrium>> {
    find_equilibria_seeded(cfg, grid, &[])
}

/// As [`find_equilibria`], additionally refining from `seeds` (warm start).
pub fn find_equilibria_seeded(
    cfg: &ModelConfig,
    grid: &GridSpec,
    seeds: &[State],
) -> Result<Vec<Equilibrium>> {
    grid.validate()?;
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let consider = |y: f64, r: f64, roots: &mut Vec<(f64, f64)>| {
        if !(y >= 0.0) || y < grid.y_min || y > grid.y_max {
            return;
        }
        if r < grid.r_min || r > grid.r_max {
            return;
        }
        if roots
            .iter()
            .any(|&(a, b)| (a - y).hypot(b - r) < MERGE_TOL)
        {
            return;
        }
        roots.push((y, r));
    };
    for (y, r) in scan_candidates(cfg, grid) {
        // contacts are kept as found; Newton stalls on double roots
        let (y, r) = newton(cfg, y, r).unwrap_or((y, r));
        if cfg.goods_excess(y, r).hypot(cfg.money_excess(y, r)) < ROOT_TOL {
            consider(y, r, &mut roots);
        }
    }
    for s in seeds {
        if let Some((y, r)) = newton(cfg, s.y(), s.r()) {
            consider(y, r, &mut roots);
        }
    }
    if roots.is_empty() {
        return Err(IslmError::NoEquilibrium);
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(roots
        .into_iter()
        .map(|(y, r)| Equilibrium::at(cfg, State::new(y, r).expect("y >= 0 checked")))
        .collect())
}
