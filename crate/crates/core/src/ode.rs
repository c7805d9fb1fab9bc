//! Adaptive Dormand-Prince 5(4) for autonomous planar systems.

use serde::{Deserialize, Serialize};

use crate::error::{IslmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

pub type Vec2 = [f64; 2];

/// One accepted step, enough for cubic Hermite interpolation.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec2,
    pub x1: Vec2,
    pub f0: Vec2,
    pub f1: Vec2,
}

impl Step {
    pub fn eval(&self, t: f64) -> Vec2 {
        let h = self.t1 - self.t0;
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = h00 * self.x0[i] + h10 * h * self.f0[i] + h01 * self.x1[i] + h11 * h * self.f1[i];
        }
        out
    }
}

/// What the observer wants after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus the embedded fourth-order ones
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Approximate extent of the real stability interval of the method.
const STABILITY_LIMIT: f64 = 3.0;

fn axpy(x: Vec2, terms: &[(f64, Vec2)], h: f64) -> Vec2 {
    let mut out = x;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrates `x' = f(x)` from `t0` to `t_end`. `observe` sees every
/// accepted step and may stop the run; `guard` rejects states (returning an
/// error) after acceptance.
pub fn solve<F, G, O>(
    f: F,
    x0: Vec2,
    t0: f64,
    t_end: f64,
    ctrl: &StepControl,
    mut guard: G,
    mut observe: O,
) -> Result<(f64, Vec2)>
where
    F: Fn(Vec2) -> Vec2,
    G: FnMut(f64, Vec2) -> Result<()>,
    O: FnMut(&Step) -> Flow,
{
    let mut t = t0;
    let mut x = x0;
    let mut k1 = f(x);
    let mut h = ctrl.h_init.min(t_end - t0).max(ctrl.h_min);
    let mut steps = 0usize;
    let mut fac_prev_err = 1e-4f64;
    while t < t_end {
        if steps >= ctrl.max_steps {
            return Err(IslmError::StepBudget(ctrl.max_steps));
        }
        h = h.min(ctrl.h_max).min(t_end - t);
        let k2 = f(axpy(x, &[(A21, k1)], h));
        let k3 = f(axpy(x, &[(A31, k1), (A32, k2)], h));
        let k4 = f(axpy(x, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = f(axpy(x, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let x6 = axpy(x, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h);
        let k6 = f(x6);
        let xn = axpy(x, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
        let k7 = f(xn);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctrl.abs_tol + ctrl.rel_tol * x[i].abs().max(xn[i].abs());
            err = err.max((e / sc).abs());
        }
        let finite = xn.iter().all(|v| v.is_finite());
        if finite && err <= 1.0 {
            steps += 1;
            let step = Step {
                t0: t,
                t1: t + h,
                x0: x,
                x1: xn,
                f0: k1,
                f1: k7,
            };
            t += h;
            x = xn;
            k1 = k7;
            guard(t, x)?;
            // PI step-size controller
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * fac_prev_err.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            fac_prev_err = err.max(1e-4);
            // keep h*|lambda| inside the stability region of the method
            let dk = (k7[0] - k6[0]).hypot(k7[1] - k6[1]);
            let dx = (xn[0] - x6[0]).hypot(xn[1] - x6[1]);
            let h_old = h;
            h *= fac;
            if dx > 0.0 && dk > 0.0 {
                let h_stab = STABILITY_LIMIT * dx / dk;
                h = h.min(h_stab.max(0.2 * h_old));
            }
            if observe(&step) == Flow::Stop {
                break;
            }
        } else {
            let fac = if finite {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            if h < ctrl.h_min {
                return Err(IslmError::StepFloorReached { t, h_min: ctrl.h_min });
            }
        }
    }
    Ok((t, x))
}
