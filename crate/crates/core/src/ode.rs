//! Explicit Runge–Kutta integrators for complex linear systems.
//!
//! The adaptive integrator is the Dormand–Prince 5(4) pair with its
//! fourth-order continuous extension for dense output. The fixed-step mode is
//! classical RK4 and exists for bit-reproducible runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{C64, ZERO};

/// Step-size control for the integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stepping {
    Adaptive { rtol: f64, atol: f64 },
    Fixed { step: f64 },
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping::Adaptive {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

impl Stepping {
    pub fn halved(self) -> Self {
        match self {
            Stepping::Adaptive { rtol, atol } => Stepping::Adaptive {
                rtol: rtol / 2.0,
                atol: atol / 2.0,
            },
            Stepping::Fixed { step } => Stepping::Fixed { step: step / 2.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Last accepted (adaptive) step size, reusable as a hint.
    pub last_step: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side `dy = f(t, y)` writing into a preallocated buffer.
pub trait System {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()>;
}

impl<F> System for F
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        self(t, y, dy)
    }
}

fn lincomb(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for &(c, k) in terms {
            acc += k[i] * c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrates from `t0` through every time in `outputs` (ascending, all
/// `>= t0`), calling `on_output(index, t, y)` at each. Returns the final
/// state at the last output time.
pub fn integrate<S, O>(
    sys: &mut S,
    t0: f64,
    y0: &[C64],
    outputs: &[f64],
    stepping: Stepping,
    step_hint: Option<f64>,
    mut on_output: O,
) -> Result<(Vec<C64>, Stats)>
where
    S: System + ?Sized,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::numerics("integrate", "output times must be ascending and >= t0"));
    }
    match stepping {
        Stepping::Adaptive { rtol, atol } => dopri5(sys, t0, y0, outputs, rtol, atol, step_hint, &mut on_output),
        Stepping::Fixed { step } => rk4(sys, t0, y0, outputs, step, &mut on_output),
    }
}

/// Advances `y` in place from `t0` to `t1`.
pub fn advance<S: System + ?Sized>(
    sys: &mut S,
    t0: f64,
    t1: f64,
    y: &mut Vec<C64>,
    stepping: Stepping,
    step_hint: Option<f64>,
) -> Result<Stats> {
    let (yf, stats) = integrate(sys, t0, y, &[t1], stepping, step_hint, |_, _, _| Ok(()))?;
    *y = yf;
    Ok(stats)
}

fn scaled_norm(e: &[C64], y0: &[C64], y1: &[C64], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..e.len() {
        let sc = atol + rtol * y0[i].norm().max(y1[i].norm());
        let r = e[i].norm() / sc;
        acc += r * r;
    }
    (acc / e.len().max(1) as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn dopri5<S, O>(
    sys: &mut S,
    t0: f64,
    y0: &[C64],
    outputs: &[f64],
    rtol: f64,
    atol: f64,
    step_hint: Option<f64>,
    on_output: &mut O,
) -> Result<(Vec<C64>, Stats)>
where
    S: System + ?Sized,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = Stats::default();
    let mut y = y0.to_vec();
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut ytmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut dense = vec![ZERO; n];
    let mut out_buf = vec![ZERO; n];

    let mut t = t0;
    let mut next_out = 0usize;
    while next_out < outputs.len() && outputs[next_out] <= t {
        on_output(next_out, t, &y)?;
        next_out += 1;
    }
    let t_end = match outputs.last() {
        Some(&te) if te > t => te,
        _ => return Ok((y, stats)),
    };

    sys.rhs(t, &y, &mut k1)?;
    stats.evaluations += 1;

    let span = t_end - t;
    let mut h = match step_hint {
        Some(hh) if hh > 0.0 => hh.min(span),
        _ => {
            let d0 = scaled_norm(&y, &y, &y, rtol, atol);
            let d1 = scaled_norm(&k1, &y, &y, rtol, atol);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let h0 = h0.min(span);
            lincomb(&mut ytmp, &y, h0, &[(1.0, &k1)]);
            sys.rhs(t + h0, &ytmp, &mut k2)?;
            stats.evaluations += 1;
            for i in 0..n {
                err[i] = k2[i] - k1[i];
            }
            let d2 = scaled_norm(&err, &y, &y, rtol, atol) / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1).min(span)
        }
    };

    let mut last_rejected = false;
    while t < t_end {
        let remaining = t_end - t;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
        }
        if h < 1e-12 * t.abs().max(1.0) {
            return Err(Error::Integrator {
                t,
                message: format!("step size underflow (h = {h:e})"),
            });
        }
        lincomb(&mut ytmp, &y, h, &[(A21, &k1)]);
        sys.rhs(t + C2 * h, &ytmp, &mut k2)?;
        lincomb(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        sys.rhs(t + C3 * h, &ytmp, &mut k3)?;
        lincomb(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        sys.rhs(t + C4 * h, &ytmp, &mut k4)?;
        lincomb(&mut ytmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        sys.rhs(t + C5 * h, &ytmp, &mut k5)?;
        lincomb(
            &mut ytmp,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let t_new = if h == remaining { t_end } else { t + h };
        sys.rhs(t_new, &ytmp, &mut k6)?;
        lincomb(
            &mut ynew,
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        sys.rhs(t_new, &ynew, &mut k7)?;
        stats.evaluations += 6;
        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = scaled_norm(&err, &y, &ynew, rtol, atol);
        if !e.is_finite() {
            return Err(Error::Integrator {
                t,
                message: "non-finite error estimate".into(),
            });
        }
        if e <= 1.0 {
            stats.accepted += 1;
            // dense output on (t, t_new]
            if next_out < outputs.len() && outputs[next_out] <= t_new {
                for i in 0..n {
                    dense[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let to = outputs[next_out];
                    if to == t_new {
                        on_output(next_out, to, &ynew)?;
                    } else {
                        let th = (to - t) / h;
                        let th1 = 1.0 - th;
                        for i in 0..n {
                            let r2 = ynew[i] - y[i];
                            let r3 = k1[i] * h - r2;
                            let r4 = r2 - k7[i] * h - r3;
                            out_buf[i] = y[i] + (r2 + (r3 + (r4 + dense[i] * th1) * th) * th1) * th;
                        }
                        on_output(next_out, to, &out_buf)?;
                    }
                    next_out += 1;
                }
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            stats.last_step = h;
            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok((y, stats))
}

fn rk4<S, O>(
    sys: &mut S,
    t0: f64,
    y0: &[C64],
    outputs: &[f64],
    step: f64,
    on_output: &mut O,
) -> Result<(Vec<C64>, Stats)>
where
    S: System + ?Sized,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if !(step > 0.0) {
        return Err(Error::numerics("rk4", "fixed step must be positive"));
    }
    let n = y0.len();
    let mut stats = Stats::default();
    let mut y = y0.to_vec();
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut ytmp = vec![ZERO; n];
    let mut t = t0;
    for (idx, &to) in outputs.iter().enumerate() {
        let span = to - t;
        if span > 0.0 {
            // equal substeps landing exactly on the output time
            let m = (span / step - 1e-9).ceil().max(1.0) as usize;
            let h = span / m as f64;
            for s in 0..m {
                let ts = t + s as f64 * h;
                sys.rhs(ts, &y, &mut k1)?;
                lincomb(&mut ytmp, &y, h / 2.0, &[(1.0, &k1)]);
                sys.rhs(ts + h / 2.0, &ytmp, &mut k2)?;
                lincomb(&mut ytmp, &y, h / 2.0, &[(1.0, &k2)]);
                sys.rhs(ts + h / 2.0, &ytmp, &mut k3)?;
                lincomb(&mut ytmp, &y, h, &[(1.0, &k3)]);
                sys.rhs(ts + h, &ytmp, &mut k4)?;
                for i in 0..n {
                    y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
                }
                stats.accepted += 1;
                stats.evaluations += 4;
            }
            t = to;
            stats.last_step = h;
        }
        on_output(idx, to, &y)?;
    }
    Ok((y, stats))
}
