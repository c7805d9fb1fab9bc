//! Parametric economic functions of the IS-LM model, the short-rate mapping
//! and a grid verifier for the regime conditions.
//!
//! Function families:
//!
//! * investment `I(Y,R) = i0 + a*tanh(b*(Y - ym)) + linear_slope*Y - h*R`
//! * saving `S(Y,R) = s0 + s*Y + g*R`
//! * money demand `L(Y,i) = l*Y + phi(i)`, `phi'(i) = -d - kappa_l*(i-p)(i-q)`
//! * endogenous money supply `M(Y,i) = m*Y + psi(i)`, `psi'(i) = e + kappa_m*(i-p)(i-q)`
//!
//! where `i = R - mp + pi_e` is the short rate. `phi` and `psi` are the exact
//! cubic antiderivatives anchored at `i = q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IslmError, Result};

/// Which regime the configuration is meant to certify against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Original model: no endogenous money, `mp = pi_e = 0`.
    OriginalDegenerate,
    /// Sigma-shaped investment, folded IS curve.
    KaldorGoods,
    /// Liquidity-trap money market, folded LM curve.
    ThreePhaseMoney,
}

/// Market whose adjustment is fast; the other equation carries `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastSide {
    Goods,
    Money,
}

impl FastSide {
    /// Index of the fast variable in `[y, r]`.
    pub fn fast_index(self) -> usize {
        match self {
            FastSide::Goods => 0,
            FastSide::Money => 1,
        }
    }

    pub fn slow_index(self) -> usize {
        1 - self.fast_index()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestParams {
    pub i0: f64,
    pub a: f64,
    pub b: f64,
    pub ym: f64,
    pub h: f64,
    #[serde(default)]
    pub linear_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaveParams {
    pub s: f64,
    pub g: f64,
    pub s0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoneyDemandParams {
    pub l: f64,
    pub d: f64,
    pub kappa_l: f64,
    /// Lower liquidity-trap boundary in the short rate.
    pub p: f64,
    /// Upper liquidity-trap boundary in the short rate.
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoneySupplyParams {
    pub m: f64,
    pub e: f64,
    pub kappa_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub m_s: f64,
    pub mp: f64,
    pub pi_e: f64,
    pub invest: InvestParams,
    pub save: SaveParams,
    pub demand: MoneyDemandParams,
    pub supply: MoneySupplyParams,
    pub regime: Regime,
    pub fast_side: FastSide,
}

/// Closed-form partial derivatives at one point. Rate derivatives are taken
/// in `R`; they coincide with the short-rate derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partials {
    pub i_y: f64,
    pub i_r: f64,
    pub s_y: f64,
    pub s_r: f64,
    pub l_y: f64,
    pub l_r: f64,
    pub m_y: f64,
    pub m_r: f64,
}

impl Partials {
    /// d(I - S)/dY
    pub fn goods_y(&self) -> f64 {
        self.i_y - self.s_y
    }
    pub fn goods_r(&self) -> f64 {
        self.i_r - self.s_r
    }
    /// d(L - M - M_S)/dY
    pub fn money_y(&self) -> f64 {
        self.l_y - self.m_y
    }
    pub fn money_r(&self) -> f64 {
        self.l_r - self.m_r
    }
}

/// Values of the four economic functions at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EconValues {
    pub invest: f64,
    pub save: f64,
    pub demand: f64,
    pub supply: f64,
}

/// A point of the phase plane with `Y >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct State {
    y: f64,
    r: f64,
}

impl State {
    pub fn new(y: f64, r: f64) -> Result<Self> {
        if !(y >= 0.0) || !r.is_finite() || !y.is_finite() {
            return Err(IslmError::Domain { y });
        }
        Ok(Self { y, r })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.y, self.r]
    }

    pub fn short_rate(&self, cfg: &ModelConfig) -> f64 {
        cfg.short_rate(self.r)
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.y - other.y).hypot(self.r - other.r)
    }
}

// Integral of (u-p)(u-q) from q to i.
fn trap_cubic(i: f64, p: f64, q: f64) -> f64 {
    let c = |x: f64| x * x * x / 3.0 - (p + q) * x * x / 2.0 + p * q * x;
    c(i) - c(q)
}

impl ModelConfig {
    /// Goods-market default: sigma-shaped investment, linear money market.
    pub fn default_kaldor() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            epsilon: 1e-3,
            m_s: 1.0,
            mp: 0.01,
            pi_e: 0.02,
            invest: InvestParams {
                i0: 4.0,
                a: 2.0,
                b: 0.4,
                ym: 10.0,
                h: 0.4,
                linear_slope: 0.0,
            },
            save: SaveParams {
                s: 0.3,
                g: 0.2,
                s0: 0.0,
            },
            demand: MoneyDemandParams {
                l: 0.45,
                d: 0.3,
                kappa_l: 0.0,
                p: 2.0,
                q: 4.0,
            },
            supply: MoneySupplyParams {
                m: 0.2,
                e: 0.1,
                kappa_m: 0.0,
            },
            regime: Regime::KaldorGoods,
            fast_side: FastSide::Goods,
        }
    }

    /// Money-market default: affine investment, three-phase money market.
    pub fn default_three_phase() -> Self {
        let mut cfg = Self::default_kaldor();
        cfg.invest.i0 = 2.95;
        cfg.invest.a = 0.0;
        cfg.invest.linear_slope = 0.1;
        cfg.demand.l = 0.5;
        cfg.demand.d = 0.0;
        cfg.demand.kappa_l = 0.6;
        cfg.supply.e = 0.0;
        cfg.supply.kappa_m = 0.5;
        cfg.regime = Regime::ThreePhaseMoney;
        cfg.fast_side = FastSide::Money;
        cfg
    }

    /// Parses a JSON document (unknown fields rejected) and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(IslmError::InvalidConfig(msg.to_string()));
        let all = [
            self.alpha,
            self.beta,
            self.epsilon,
            self.m_s,
            self.mp,
            self.pi_e,
            self.invest.i0,
            self.invest.a,
            self.invest.b,
            self.invest.ym,
            self.invest.h,
            self.invest.linear_slope,
            self.save.s,
            self.save.g,
            self.save.s0,
            self.demand.l,
            self.demand.d,
            self.demand.kappa_l,
            self.demand.p,
            self.demand.q,
            self.supply.m,
            self.supply.e,
            self.supply.kappa_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad("alpha and beta must be positive");
        }
        if !(self.m_s > 0.0) {
            return bad("m_s must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        if self.demand.kappa_l < 0.0 || self.supply.kappa_m < 0.0 {
            return bad("kappa_l and kappa_m must be non-negative");
        }
        if !(self.demand.p < self.demand.q) {
            return bad("liquidity-trap boundaries need p < q");
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn short_rate(&self, r: f64) -> f64 {
        r - self.mp + self.pi_e
    }

    pub fn invest(&self, y: f64, r: f64) -> f64 {
        let p = &self.invest;
        p.i0 + p.a * (p.b * (y - p.ym)).tanh() + p.linear_slope * y - p.h * r
    }

    pub fn save(&self, y: f64, r: f64) -> f64 {
        self.save.s0 + self.save.s * y + self.save.g * r
    }

    pub fn demand(&self, y: f64, r: f64) -> f64 {
        let i = self.short_rate(r);
        let p = &self.demand;
        p.l * y - p.d * i - p.kappa_l * trap_cubic(i, p.p, p.q)
    }

    pub fn supply(&self, y: f64, r: f64) -> f64 {
        let i = self.short_rate(r);
        let s = &self.supply;
        s.m * y + s.e * i + s.kappa_m * trap_cubic(i, self.demand.p, self.demand.q)
    }

    /// `I - S`; zero on the IS curve.
    pub fn goods_excess(&self, y: f64, r: f64) -> f64 {
        self.invest(y, r) - self.save(y, r)
    }

    /// `L - M - M_S`; zero on the LM curve.
    pub fn money_excess(&self, y: f64, r: f64) -> f64 {
        self.demand(y, r) - self.supply(y, r) - self.m_s
    }

    pub fn partials(&self, y: f64, r: f64) -> Partials {
        let inv = &self.invest;
        let sech = 1.0 / (inv.b * (y - inv.ym)).cosh();
        let i = self.short_rate(r);
        let trap = (i - self.demand.p) * (i - self.demand.q);
        Partials {
            i_y: inv.a * inv.b * sech * sech + inv.linear_slope,
            i_r: -inv.h,
            s_y: self.save.s,
            s_r: self.save.g,
            l_y: self.demand.l,
            l_r: -self.demand.d - self.demand.kappa_l * trap,
            m_y: self.supply.m,
            m_r: self.supply.e + self.supply.kappa_m * trap,
        }
    }
}

/// `i_S = R - MP + pi_e`. No clamping: negative short rates are reported by
/// callers, not rejected here.
pub fn short_rate(r: f64, cfg: &ModelConfig) -> f64 {
    cfg.short_rate(r)
}

pub fn eval_functions(state: &State, cfg: &ModelConfig) -> EconValues {
    let (y, r) = (state.y, state.r);
    EconValues {
        invest: cfg.invest(y, r),
        save: cfg.save(y, r),
        demand: cfg.demand(y, r),
        supply: cfg.supply(y, r),
    }
}

/// Rectangular node grid over the phase plane; also used as a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub ny: usize,
    pub nr: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            y_min: 0.0,
            y_max: 25.0,
            r_min: 0.0,
            r_max: 8.0,
            ny: 201,
            nr: 201,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ny < 2 || self.nr < 2 {
            return Err(IslmError::Grid(format!(
                "need at least 2 nodes per axis, got {}x{}",
                self.ny, self.nr
            )));
        }
        if !(self.y_min >= 0.0 && self.y_min < self.y_max && self.r_min < self.r_max) {
            return Err(IslmError::Grid(
                "ranges must be increasing with y_min >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn y_at(&self, k: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * k as f64 / (self.ny - 1) as f64
    }

    pub fn r_at(&self, k: usize) -> f64 {
        self.r_min + (self.r_max - self.r_min) * k as f64 / (self.nr - 1) as f64
    }

    pub fn contains(&self, y: f64, r: f64) -> bool {
        y >= self.y_min && y <= self.y_max && r >= self.r_min && r <= self.r_max
    }

    pub fn diameter(&self) -> f64 {
        (self.y_max - self.y_min).hypot(self.r_max - self.r_min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    pub y: f64,
    pub r: f64,
    pub observed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KaldorInterval {
    pub x: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub regime: Regime,
    pub grid_spec: GridSpec,
    pub violations: Vec<Violation>,
    pub kaldor_interval: Option<KaldorInterval>,
    pub intersection_ok: bool,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct violated condition ids, in first-seen order.
    pub fn violated_conditions(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for v in &self.violations {
            if !ids.contains(&v.condition.as_str()) {
                ids.push(&v.condition);
            }
        }
        ids
    }
}

/// Finite-difference step used by the verifier.
pub const FD_STEP: f64 = 1e-6;
/// Relative agreement required between finite-difference and closed-form partials.
pub const FD_REL_TOL: f64 = 1e-6;
/// Income at which the `Y -> 0+` limits of condition (13) are probed.
pub const Y_EPS: f64 = 1e-4;

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// Central finite-difference partials of the four functions.
pub fn fd_partials(cfg: &ModelConfig, y: f64, r: f64) -> Partials {
    Partials {
        i_y: central(|v| cfg.invest(v, r), y),
        i_r: central(|v| cfg.invest(y, v), r),
        s_y: central(|v| cfg.save(v, r), y),
        s_r: central(|v| cfg.save(y, v), r),
        l_y: central(|v| cfg.demand(v, r), y),
        l_r: central(|v| cfg.demand(y, v), r),
        m_y: central(|v| cfg.supply(v, r), y),
        m_r: central(|v| cfg.supply(y, v), r),
    }
}

/// Phase of the short rate relative to the liquidity trap `(p, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Outer,
    Inner,
    Boundary,
}

const PHASE_BAND: f64 = 1e-9;

fn phase(cfg: &ModelConfig, i: f64) -> Phase {
    let (p, q) = (cfg.demand.p, cfg.demand.q);
    if (i - p).abs() < PHASE_BAND || (i - q).abs() < PHASE_BAND {
        Phase::Boundary
    } else if i > p && i < q {
        Phase::Inner
    } else {
        Phase::Outer
    }
}

fn node_violations(
    cfg: &ModelConfig,
    y: f64,
    r: f64,
    kaldor: Option<KaldorInterval>,
    out: &mut Vec<Violation>,
) {
    let fd = fd_partials(cfg, y, r);
    let cf = cfg.partials(y, r);
    let mut push = |id: &str, observed: f64| {
        out.push(Violation {
            condition: id.to_string(),
            y,
            r,
            observed,
        })
    };

    let pairs = [
        ("fd:I_Y", fd.i_y, cf.i_y),
        ("fd:I_R", fd.i_r, cf.i_r),
        ("fd:S_Y", fd.s_y, cf.s_y),
        ("fd:S_R", fd.s_r, cf.s_r),
        ("fd:L_Y", fd.l_y, cf.l_y),
        ("fd:L_R", fd.l_r, cf.l_r),
        ("fd:M_Y", fd.m_y, cf.m_y),
        ("fd:M_R", fd.m_r, cf.m_r),
    ];
    for (id, a, b) in pairs {
        if (a - b).abs() > FD_REL_TOL * b.abs().max(1.0) {
            push(id, a - b);
        }
    }

    if !(fd.i_y > 0.0 && fd.i_y < 1.0) {
        push("3:I_Y", fd.i_y);
    }
    if !(fd.i_r < 0.0) {
        push("3:I_R", fd.i_r);
    }
    if !(fd.s_y > 0.0 && fd.s_y < 1.0) {
        push("4:S_Y", fd.s_y);
    }
    if !(fd.s_r > 0.0) {
        push("4:S_R", fd.s_r);
    }
    if !(fd.l_y > 0.0) {
        push("5:L_Y", fd.l_y);
    }

    let i = cfg.short_rate(r);
    match cfg.regime {
        Regime::OriginalDegenerate => {
            if !(fd.l_r < 0.0) {
                push("5:L_R", fd.l_r);
            }
        }
        Regime::KaldorGoods => {
            if !(fd.l_r < 0.0) {
                push("5:L_R", fd.l_r);
            }
            if !(fd.m_y > 0.0 && fd.m_y < fd.l_y) {
                push("10:M_Y", fd.m_y);
            }
            if !(fd.m_r > 0.0) {
                push("11:M_R", fd.m_r);
            }
            if let Some(k) = kaldor {
                let slope_gap = fd.i_y - fd.s_y;
                let ok = if y < k.x {
                    slope_gap < 0.0
                } else if y > k.x && y < k.z {
                    slope_gap > 0.0
                } else if y > k.z {
                    slope_gap < 0.0
                } else {
                    true
                };
                if !ok {
                    push("16:kaldor", slope_gap);
                }
            }
        }
        Regime::ThreePhaseMoney => {
            if !(fd.i_y < fd.s_y) {
                push("12:I_Y<S_Y", fd.i_y - fd.s_y);
            }
            if !(fd.m_y > 0.0 && fd.m_y < fd.l_y) {
                push("10:M_Y", fd.m_y);
            }
            match phase(cfg, i) {
                Phase::Outer => {
                    if !(fd.l_r < 0.0) {
                        push("5:L_R", fd.l_r);
                    }
                    if !(fd.m_r > 0.0) {
                        push("11:M_R", fd.m_r);
                    }
                }
                Phase::Inner => {
                    if !(fd.l_r > 0.0) {
                        push("19:L_R", fd.l_r);
                    }
                    if !(fd.m_r < 0.0) {
                        push("20:M_R", fd.m_r);
                    }
                }
                Phase::Boundary => {}
            }
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub(crate) fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign-change roots of `f` on `[lo, hi]` found by a uniform scan.
pub(crate) fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, tol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    for k in 1..=n {
        let x1 = lo + (hi - lo) * k as f64 / n as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            roots.push(bisect(&f, x0, x1, tol));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        roots.push(x0);
    }
    roots
}

/// Roots `X < Z` of `I_Y = S_Y` at a fixed rate, with the (-, +, -) sign
/// pattern of the Kaldor conditions on `[0, X)`, `(X, Z)`, `(Z, inf)`.
pub fn kaldor_interval(cfg: &ModelConfig, r_fixed: f64) -> Result<KaldorInterval> {
    if cfg.regime != Regime::KaldorGoods {
        return Err(IslmError::NoKaldorInterval(
            "regime is not kaldor_goods".into(),
        ));
    }
    let inv = &cfg.invest;
    let hump = inv.a * inv.b;
    if !(hump > 0.0) || hump + inv.linear_slope <= cfg.save.s {
        return Err(IslmError::NoKaldorInterval(format!(
            "investment slope never exceeds saving slope (a*b + linear_slope = {}, s = {})",
            hump + inv.linear_slope,
            cfg.save.s
        )));
    }
    let gap = |y: f64| {
        let p = cfg.partials(y, r_fixed);
        p.i_y - p.s_y
    };
    // beyond |b (y - ym)| = 40 the sigmoid slope is below 1e-34
    let hi = (inv.ym + 40.0 / inv.b).max(1.0);
    let roots = scan_roots(gap, 0.0, hi, 40_000, 1e-13);
    if roots.len() != 2 || gap(0.0) >= 0.0 {
        return Err(IslmError::NoKaldorInterval(format!(
            "expected two slope crossings in Y >= 0 with I_Y < S_Y at Y = 0, found {}",
            roots.len()
        )));
    }
    Ok(KaldorInterval {
        x: roots[0],
        z: roots[1],
    })
}

/// `R_IS(y)`: the unique rate with `I = S` (goods excess is decreasing in R).
pub fn is_rate_at(cfg: &ModelConfig, y: f64, hint: (f64, f64)) -> Option<f64> {
    let f = |r: f64| cfg.goods_excess(y, r);
    let (mut lo, mut hi) = hint;
    for _ in 0..80 {
        if f(lo) > 0.0 && f(hi) < 0.0 {
            return Some(bisect(f, lo, hi, 1e-13));
        }
        let w = hi - lo;
        lo -= w;
        hi += w;
    }
    None
}

/// Rates at which the money market clears at income `y`, ascending.
pub fn lm_rates_at(cfg: &ModelConfig, y: f64, hint: (f64, f64)) -> Vec<f64> {
    let span = (hint.1 - hint.0).max(1.0);
    let (lo, hi) = (hint.0 - 10.0 * span, hint.1 + 10.0 * span);
    let mut roots = scan_roots(|r| cfg.money_excess(y, r), lo, hi, 200_000, 1e-13);
    if roots.is_empty() {
        // linear money market with a far-away root
        let f = |r: f64| cfg.money_excess(y, r);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            if f(a) * f(b) < 0.0 {
                roots.push(bisect(f, a, b, 1e-13));
                break;
            }
            let w = b - a;
            a -= w;
            b += w;
        }
    }
    roots
}

/// Certifies `cfg` against the regime conditions at every node of `grid`.
pub fn verify_conditions(cfg: &ModelConfig, grid: &GridSpec) -> Result<ConditionReport> {
    grid.validate()?;
    if cfg.regime == Regime::ThreePhaseMoney && cfg.short_rate(grid.r_min) <= 0.0 {
        return Err(IslmError::Grid(format!(
            "three-phase verification needs i_S > 0 over the grid, i_S(r_min) = {}",
            cfg.short_rate(grid.r_min)
        )));
    }

    let mut violations = Vec::new();

    if cfg.regime == Regime::OriginalDegenerate {
        let s = &cfg.supply;
        let structural = [
            ("2:m", s.m),
            ("2:e", s.e),
            ("2:kappa_m", s.kappa_m),
            ("2:kappa_l", cfg.demand.kappa_l),
            ("2:mp", cfg.mp),
            ("2:pi_e", cfg.pi_e),
        ];
        for (id, v) in structural {
            if v != 0.0 {
                violations.push(Violation {
                    condition: id.into(),
                    y: f64::NAN,
                    r: f64::NAN,
                    observed: v,
                });
            }
        }
    }

    let mut kaldor = None;
    if cfg.regime == Regime::KaldorGoods {
        let r_rep = 0.5 * (grid.r_min + grid.r_max);
        match kaldor_interval(cfg, r_rep) {
            Ok(k) => kaldor = Some(k),
            Err(_) => violations.push(Violation {
                condition: "16:kaldor".into(),
                y: f64::NAN,
                r: r_rep,
                observed: cfg.invest.a * cfg.invest.b + cfg.invest.linear_slope - cfg.save.s,
            }),
        }
    }

    if cfg.regime == Regime::ThreePhaseMoney {
        let (p, q) = (cfg.demand.p, cfg.demand.q);
        for i in [p, q] {
            let r = i + cfg.mp - cfg.pi_e;
            let cf = cfg.partials(Y_EPS, r);
            for (id, v) in [("remark:L_R", cf.l_r), ("remark:M_R", cf.m_r)] {
                if v.abs() > 1e-12 {
                    violations.push(Violation {
                        condition: id.into(),
                        y: f64::NAN,
                        r,
                        observed: v,
                    });
                }
            }
        }
    }

    let rows: Vec<Vec<Violation>> = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            let y = grid.y_at(iy);
            let mut row = Vec::new();
            for ir in 0..grid.nr {
                node_violations(cfg, y, grid.r_at(ir), kaldor, &mut row);
            }
            row
        })
        .collect();
    violations.extend(rows.into_iter().flatten());

    let hint = (grid.r_min, grid.r_max);
    let r_is = is_rate_at(cfg, Y_EPS, hint);
    let r_lm = lm_rates_at(cfg, Y_EPS, hint).into_iter().fold(None, |acc: Option<f64>, r| {
        Some(acc.map_or(r, |a| a.max(r)))
    });
    let intersection_ok = match (r_is, r_lm) {
        (Some(a), Some(b)) => a > b,
        (Some(_), None) => true,
        _ => false,
    };
    if !intersection_ok {
        violations.push(Violation {
            condition: "13:intersection".into(),
            y: Y_EPS,
            r: r_is.unwrap_or(f64::NAN),
            observed: r_is.unwrap_or(f64::NAN) - r_lm.unwrap_or(f64::NAN),
        });
    }

    Ok(ConditionReport {
        regime: cfg.regime,
        grid_spec: grid.clone(),
        violations,
        kaldor_interval: kaldor,
        intersection_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine() -> ModelConfig {
        let mut cfg = ModelConfig::default_kaldor();
        cfg.invest.a = 0.0;
        cfg.invest.linear_slope = 0.1;
        cfg
    }

    #[test]
    fn short_rate_examples() {
        let mut cfg = ModelConfig::default_kaldor();
        cfg.mp = 0.0;
        cfg.pi_e = 0.0;
        assert_eq!(short_rate(0.05, &cfg), 0.05);
        cfg.mp = 0.01;
        cfg.pi_e = 0.02;
        assert!((short_rate(0.05, &cfg) - 0.06).abs() < 1e-15);
        assert!(short_rate(-0.01, &cfg).abs() < 1e-15);
    }

    #[test]
    fn negative_income_is_rejected() {
        assert!(matches!(State::new(-0.1, 0.0), Err(IslmError::Domain { .. })));
        assert!(State::new(0.0, -3.0).is_ok());
    }

    #[test]
    fn investment_slope_peaks_at_center() {
        let cfg = ModelConfig::default_kaldor();
        let ym = cfg.invest.ym;
        let fd = (cfg.invest(ym + 1e-6, 0.7) - cfg.invest(ym - 1e-6, 0.7)) / 2e-6;
        let peak = cfg.invest.a * cfg.invest.b + cfg.invest.linear_slope;
        assert!((fd - peak).abs() < 1e-8, "{fd} vs {peak}");
    }

    #[test]
    fn affine_investment_has_constant_slope() {
        let cfg = affine();
        for y in [0.0f64, 3.0, 10.0, 24.0] {
            let p = fd_partials(&cfg, y.max(1e-5), 1.0);
            assert!((p.i_y - 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn money_slopes_vanish_at_trap_boundaries() {
        let cfg = ModelConfig::default_three_phase();
        for i in [cfg.demand.p, cfg.demand.q] {
            let r = i + cfg.mp - cfg.pi_e;
            let cf = cfg.partials(5.0, r);
            assert!(cf.l_r.abs() < 1e-14 && cf.m_r.abs() < 1e-14);
            let fd = fd_partials(&cfg, 5.0, r);
            assert!(fd.l_r.abs() < 1e-8 && fd.m_r.abs() < 1e-8);
        }
    }

    #[test]
    fn antiderivative_is_anchored_at_q() {
        let cfg = ModelConfig::default_three_phase();
        let r_q = cfg.demand.q + cfg.mp - cfg.pi_e;
        assert!((cfg.demand(0.0, r_q)).abs() < 1e-12);
        assert!((cfg.supply(0.0, r_q)).abs() < 1e-12);
    }

    #[test]
    fn kaldor_interval_matches_closed_form() {
        let cfg = ModelConfig::default_kaldor();
        let k = kaldor_interval(&cfg, 1.0).unwrap();
        // a b sech^2(b (Y - ym)) = s  =>  Y = ym -+ acosh(sqrt(a b / s)) / b
        let inv = &cfg.invest;
        let half = (inv.a * inv.b / cfg.save.s).sqrt().acosh() / inv.b;
        assert!((k.x - (inv.ym - half)).abs() < 1e-8);
        assert!((k.z - (inv.ym + half)).abs() < 1e-8);
        assert!(((k.x + k.z) / 2.0 - inv.ym).abs() < 1e-8);
    }

    #[test]
    fn kaldor_interval_errors() {
        let mut cfg = ModelConfig::default_kaldor();
        cfg.invest.a = cfg.save.s / cfg.invest.b;
        assert!(matches!(
            kaldor_interval(&cfg, 0.0),
            Err(IslmError::NoKaldorInterval(_))
        ));
        cfg.invest.a = 0.0;
        assert!(matches!(
            kaldor_interval(&cfg, 0.0),
            Err(IslmError::NoKaldorInterval(_))
        ));
    }

    #[test]
    fn defaults_pass_verification() {
        for cfg in [ModelConfig::default_kaldor(), ModelConfig::default_three_phase()] {
            let rep = verify_conditions(&cfg, &GridSpec::default()).unwrap();
            assert!(rep.passed(), "{:?}", rep.violated_conditions());
            assert!(rep.intersection_ok);
        }
    }

    #[test]
    fn saving_slope_above_one_violates_everywhere() {
        let mut cfg = ModelConfig::default_kaldor();
        cfg.save.s = 1.2;
        let grid = GridSpec {
            ny: 11,
            nr: 7,
            ..GridSpec::default()
        };
        let rep = verify_conditions(&cfg, &grid).unwrap();
        let hits = rep
            .violations
            .iter()
            .filter(|v| v.condition == "4:S_Y")
            .count();
        assert_eq!(hits, 11 * 7);
    }

    #[test]
    fn grid_needs_two_nodes() {
        let grid = GridSpec {
            ny: 1,
            ..GridSpec::default()
        };
        assert!(matches!(
            verify_conditions(&ModelConfig::default_kaldor(), &grid),
            Err(IslmError::Grid(_))
        ));
    }

    #[test]
    fn three_phase_sign_pattern() {
        let cfg = ModelConfig::default_three_phase();
        let (p, q) = (cfg.demand.p, cfg.demand.q);
        let sign_at = |i: f64| {
            let r = i + cfg.mp - cfg.pi_e;
            let d = cfg.partials(3.0, r);
            d.money_r()
        };
        assert!(sign_at(p - 0.5) < 0.0);
        assert!(sign_at(p).abs() < 1e-14);
        assert!(sign_at(0.5 * (p + q)) > 0.0);
        assert!(sign_at(q).abs() < 1e-14);
        assert!(sign_at(q + 0.5) < 0.0);
    }

    #[test]
    fn degenerate_structure_is_checked() {
        let mut cfg = affine();
        cfg.regime = Regime::OriginalDegenerate;
        let rep = verify_conditions(&cfg, &GridSpec { ny: 5, nr: 5, ..GridSpec::default() }).unwrap();
        assert!(rep.violated_conditions().contains(&"2:m"));
        cfg.supply = MoneySupplyParams { m: 0.0, e: 0.0, kappa_m: 0.0 };
        cfg.mp = 0.0;
        cfg.pi_e = 0.0;
        let rep = verify_conditions(&cfg, &GridSpec { ny: 5, nr: 5, ..GridSpec::default() }).unwrap();
        assert!(rep.passed(), "{:?}", rep.violated_conditions());
        // M is identically zero
        assert_eq!(cfg.supply(3.0, 1.0), 0.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ModelConfig::default_kaldor().to_json_pretty()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ModelConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value =
            serde_json::from_str(&ModelConfig::default_kaldor().to_json_pretty()).unwrap();
        v["invest"]["extra"] = serde_json::json!(1);
        assert!(ModelConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn invalid_scalars_are_rejected() {
        let mut cfg = ModelConfig::default_kaldor();
        cfg.m_s = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default_kaldor();
        cfg.epsilon = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default_kaldor();
        cfg.beta = -1.0;
        assert!(cfg.validate().is_err());
    }
}
