//! Dormand–Prince 5(4) integrator with embedded error control and the
//! standard fourth-order continuous extension for output between steps.
//!
//! State vectors are fixed-size arrays; every mode system in this crate has
//! between three and five real components.

use crate::error::{Error, Result};

/// Hard cap on accepted plus rejected steps per integration.
pub const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        if !(rel > 0.0 && abs > 0.0) {
            return Err(Error::usage(format!(
                "tolerances must be positive, got rel = {rel}, abs = {abs}"
            )));
        }
        Ok(Tolerances { rel, abs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    Adaptive(Tolerances),
    /// Uniform steps with no error control, for order-of-convergence studies.
    Fixed { steps: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejections: usize,
    pub evaluations: usize,
}

// Butcher tableau.
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

// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Result of one Dormand–Prince step, kept for dense output.
struct Step<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: [f64; N],
    cont: [[f64; N]; 5],
}

fn dp_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Result<Step<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1)?;

    let mut err = [0.0; N];
    let mut cont = [[0.0; N]; 5];
    for i in 0..N {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        cont[0][i] = y[i];
        cont[1][i] = dy;
        cont[2][i] = bspl;
        cont[3][i] = dy - h * k7[i] - bspl;
        cont[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Ok(Step { y1, k7, err, cont })
}

fn dense<const N: usize>(cont: &[[f64; N]; 5], s: f64) -> [f64; N] {
    let s1 = 1.0 - s;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = cont[0][i]
            + s * (cont[1][i] + s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
    }
    out
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    k1: &[f64; N],
    span: f64,
    tol: &Tolerances,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let scale: Vec<f64> = y0.iter().map(|y| tol.abs + tol.rel * y.abs()).collect();
    let rms = |v: &[f64; N]| {
        (v.iter().zip(&scale).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, k1)]);
    let k2 = f(t0 + h0, &y1)?;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
///
/// `output_times` must be non-decreasing and lie in `[t0, t1]`; `on_output`
/// receives the (dense-output) state at each of them in order. `on_step`
/// sees the state at the end of every accepted step.
pub fn integrate<const N: usize, F, O, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    control: StepControl,
    output_times: &[f64],
    mut on_output: O,
    mut on_step: S,
) -> Result<([f64; N], IntegratorStats)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(f64, &[f64; N]),
    S: FnMut(f64, &[f64; N]),
{
    if !(t1 > t0) {
        return Err(Error::usage(format!("integration span must satisfy t0 < t1, got [{t0}, {t1}]")));
    }
    if output_times
        .iter()
        .any(|&t| !(t >= t0 && t <= t1))
        || output_times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::usage("output times must be sorted and inside the integration span"));
    }

    let mut stats = IntegratorStats::default();
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] == t0 {
        on_output(t0, &y0);
        next_out += 1;
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    stats.evaluations += 1;
    let span = t1 - t0;

    let (mut h, tol) = match control {
        StepControl::Adaptive(tol) => (initial_step(&mut f, t0, &y0, &k1, span, &tol)?, Some(tol)),
        StepControl::Fixed { steps } => {
            if steps == 0 {
                return Err(Error::usage("fixed-step integration needs at least one step"));
            }
            (span / steps as f64, None)
        }
    };
    let fixed_steps = match control {
        StepControl::Fixed { steps } => steps,
        _ => 0,
    };

    let mut prev_rejected = false;
    loop {
        if stats.steps + stats.rejections >= MAX_STEPS {
            return Err(Error::Numerical {
                t,
                reason: format!("step cap of {MAX_STEPS} exceeded"),
                detail: format!("state = {y:?}, h = {h:e}"),
            });
        }
        let last = match tol {
            Some(_) => {
                if t + h >= t1 || (t1 - (t + h)) < 1e-12 * span {
                    h = t1 - t;
                    true
                } else {
                    false
                }
            }
            None => stats.steps + 1 == fixed_steps,
        };
        let h_step = if tol.is_none() && last { t1 - t } else { h };
        if h_step <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
            return Err(Error::Numerical {
                t,
                reason: "step size underflow".into(),
                detail: format!("state = {y:?}, h = {h_step:e}"),
            });
        }

        let step = dp_step(&mut f, t, &y, &k1, h_step)?;
        stats.evaluations += 6;

        let accept = match &tol {
            None => true,
            Some(tol) => {
                let en = error_norm(&step.err, &y, &step.y1, tol);
                if !en.is_finite() {
                    return Err(Error::Numerical {
                        t,
                        reason: "non-finite error estimate".into(),
                        detail: format!("state = {y:?}, h = {h_step:e}"),
                    });
                }
                let mut factor = if en == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if en <= 1.0 {
                    if prev_rejected {
                        factor = factor.min(1.0);
                    }
                    prev_rejected = false;
                    h = h_step * factor;
                    true
                } else {
                    prev_rejected = true;
                    stats.rejections += 1;
                    h = h_step * factor.min(1.0);
                    false
                }
            }
        };
        if !accept {
            continue;
        }

        let t_new = if last { t1 } else { t + h_step };
        while next_out < output_times.len() && output_times[next_out] <= t_new {
            let to = output_times[next_out];
            if to == t_new {
                on_output(to, &step.y1);
            } else {
                let s = (to - t) / h_step;
                on_output(to, &dense(&step.cont, s));
            }
            next_out += 1;
        }
        t = t_new;
        y = step.y1;
        k1 = step.k7;
        stats.steps += 1;
        on_step(t, &y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                t,
                reason: "non-finite state".into(),
                detail: format!("state = {y:?}"),
            });
        }
        if last {
            break;
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn adaptive_oscillator_period() {
        let tol = Tolerances::new(1e-11, 1e-13).unwrap();
        let (y, stats) = integrate(
            oscillator,
            0.0,
            [1.0, 0.0],
            std::f64::consts::TAU,
            StepControl::Adaptive(tol),
            &[],
            |_, _| {},
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9, "{y:?}");
        assert!(stats.steps > 10);
    }

    #[test]
    fn dense_output_accuracy() {
        let tol = Tolerances::new(1e-10, 1e-12).unwrap();
        let outs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let mut got = Vec::new();
        integrate(
            oscillator,
            0.0,
            [1.0, 0.0],
            10.0,
            StepControl::Adaptive(tol),
            &outs,
            |t, y| got.push((t, *y)),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(got.len(), outs.len());
        for (t, y) in got {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        let run = |n| {
            integrate(oscillator, 0.0, [1.0, 0.0], 5.0, StepControl::Fixed { steps: n }, &[], |_, _| {}, |_, _| {})
                .unwrap()
                .0
        };
        let exact = [5.0f64.cos(), -5.0f64.sin()];
        let err = |y: [f64; 2]| (y[0] - exact[0]).abs().max((y[1] - exact[1]).abs());
        let e1 = err(run(20));
        let e2 = err(run(40));
        let ratio = e1 / e2;
        assert!((24.0..40.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn rejects_bad_outputs() {
        let tol = Tolerances::new(1e-8, 1e-8).unwrap();
        let r = integrate(oscillator, 0.0, [1.0, 0.0], 1.0, StepControl::Adaptive(tol), &[2.0], |_, _| {}, |_, _| {});
        assert!(matches!(r, Err(Error::Usage(_))));
        assert!(Tolerances::new(0.0, 1.0).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let tol = Tolerances::new(1e-8, 1e-8).unwrap();
        let r = integrate(
            |_t, y: &[f64; 1]| Ok([y[0] * y[0]]),
            0.0,
            [1.0],
            2.0,
            StepControl::Adaptive(tol),
            &[],
            |_, _| {},
            |_, _| {},
        );
        assert!(matches!(r, Err(Error::Numerical { .. })));
    }
}
