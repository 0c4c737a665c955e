//! Independent ground truth for validating the mode and geometry code.
//!
//! Nothing here reuses [`crate::ode`]: the reference stepper is a separate
//! classical Runge–Kutta implementation, so a defect in the production
//! integrator cannot hide behind itself.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    check_identities, geometry_coefficients, geometry_rates, reconstruct_cartesian, Helicity, ModeDirection,
};
use crate::metric::{evaluate_metric, MetricState, ScaleFactorModel};
use crate::modes::{
    evolve_bogoliubov, evolve_first_order, evolve_second_order, evolve_suv, suv_derivative, Coupling, ModeProblem,
    PolarizationState,
};
use crate::ode::{StepControl, Tolerances};

/// Prefix for checks that are reported but never gate.
pub const DIAGNOSTIC_PREFIX: &str = "diag.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub check: String,
    pub max_abs: f64,
    pub max_rel: f64,
    pub samples: usize,
    pub pass: bool,
    #[serde(skip)]
    pub tolerance: f64,
}

impl OracleReport {
    pub fn new(check: impl Into<String>, max_abs: f64, max_rel: f64, samples: usize, tolerance: f64) -> Self {
        OracleReport {
            check: check.into(),
            max_abs,
            max_rel,
            samples,
            pass: max_rel <= tolerance,
            tolerance,
        }
    }

    /// A report that is recorded but cannot fail.
    pub fn diagnostic(check: &str, max_abs: f64, max_rel: f64, samples: usize) -> Self {
        Self::new(format!("{DIAGNOSTIC_PREFIX}{check}"), max_abs, max_rel, samples, f64::INFINITY)
    }

    pub fn is_diagnostic(&self) -> bool {
        self.check.starts_with(DIAGNOSTIC_PREFIX)
    }
}

/// Tracks the largest absolute and scaled deviation of a pair of series.
#[derive(Debug, Default, Clone, Copy)]
pub struct Deviation {
    pub max_abs: f64,
    pub scale: f64,
    pub samples: usize,
}

impl Deviation {
    /// A tracker whose relative measure never divides by less than `floor`.
    pub fn with_floor(floor: f64) -> Self {
        Deviation {
            scale: floor,
            ..Default::default()
        }
    }

    pub fn push(&mut self, got: f64, want: f64) {
        self.max_abs = self.max_abs.max((got - want).abs());
        self.scale = self.scale.max(want.abs());
        self.samples += 1;
    }

    /// Absolute deviation relative to the largest reference magnitude; the
    /// absolute value itself when the reference is identically zero.
    pub fn max_rel(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }

    pub fn report(&self, check: &str, tolerance: f64) -> OracleReport {
        OracleReport::new(check, self.max_abs, self.max_rel(), self.samples, tolerance)
    }
}

/// `η(t) − η(t₀) = ∫_{t₀}^{t} dt'/R(t')` for an isotropic model.
pub fn conformal_time(model: &ScaleFactorModel, t0: f64, t: f64) -> Result<f64> {
    if !model.is_isotropic() {
        return Err(Error::usage("conformal time needs an isotropic model"));
    }
    for x in [t0, t] {
        evaluate_metric(model, x)?;
    }
    let (r0, p, t_ref) = match *model {
        ScaleFactorModel::IsotropicPowerLaw { r0, p, t_ref } => (r0, p, t_ref),
        ScaleFactorModel::Kasner { p, t_ref } => (1.0, p[0], t_ref),
        ScaleFactorModel::Tabulated(_) => {
            let inv_r = |s: f64| evaluate_metric(model, s).map(|m| 1.0 / m.a[0]).unwrap_or(f64::NAN);
            let v = adaptive_simpson(&inv_r, t0, t, 1e-13, 40);
            return if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numerical {
                    t,
                    reason: "conformal-time quadrature failed".into(),
                    detail: format!("t0 = {t0}"),
                })
            };
        }
    };
    // ∫ (t_ref/s)^p / R₀ ds
    let eta = |s: f64| {
        if p == 1.0 {
            t_ref * (s / t_ref).ln() / r0
        } else {
            t_ref.powf(p) * (s.powf(1.0 - p) - t_ref.powf(1.0 - p)) / (r0 * (1.0 - p))
        }
    };
    Ok(eta(t) - eta(t0))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), eps, depth)
}

/// `𝒴 = C₁ e^{−ikη} + C₂ e^{ikη}` and its time derivative, with `η`
/// measured from `t₀`.
pub fn isotropic_solution(
    k: f64,
    model: &ScaleFactorModel,
    c1: Complex64,
    c2: Complex64,
    t0: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let eta = conformal_time(model, t0, t)?;
    let r = evaluate_metric(model, t)?.a[0];
    let minus = Complex64::from_polar(1.0, -k * eta);
    let plus = minus.conj();
    let y = c1 * minus + c2 * plus;
    let ydot = Complex64::new(0.0, -k / r) * (c1 * minus - c2 * plus);
    Ok((y, ydot))
}

/// Classical fourth-order Runge–Kutta with `n_steps` uniform steps.
pub fn reference_integrate<const N: usize, F>(mut f: F, y0: [f64; N], t0: f64, t1: f64, n_steps: usize) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    if n_steps == 0 {
        return Err(Error::usage("reference integration needs at least one step"));
    }
    let h = (t1 - t0) / n_steps as f64;
    let shift = |y: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    let mut y = y0;
    for i in 0..n_steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y)?;
        let k2 = f(t + 0.5 * h, &shift(&y, &k1, 0.5 * h))?;
        let k3 = f(t + 0.5 * h, &shift(&y, &k2, 0.5 * h))?;
        let k4 = f(t + h, &shift(&y, &k3, h))?;
        for j in 0..N {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                t: t + h,
                reason: "non-finite state in reference integration".into(),
                detail: format!("state = {y:?}"),
            });
        }
    }
    Ok(y)
}

/// `(S, U, V)` at `t1` by fixed-step RK4 from vacuum at `t0`.
pub fn suv_reference(
    model: &ScaleFactorModel,
    mode: &ModeDirection,
    r: Helicity,
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<PolarizationState> {
    let k = mode.k();
    let y = reference_integrate(
        |t, y: &[f64; 3]| {
            let ms = evaluate_metric(model, t)?;
            let g = geometry_coefficients(&ms, mode);
            Ok(suv_derivative(PolarizationState::new(y[0], y[1], y[2]), g.w, g.w_bar, k * g.mu, r))
        },
        [0.0; 3],
        t0,
        t1,
        n_steps,
    )?;
    Ok(PolarizationState::new(y[0], y[1], y[2]))
}

/// Empirical step-halving ratios of fixed-step RK4 on the `(S,U,V)` system.
///
/// Errors are measured against a Richardson-extrapolated run `16×` finer
/// than the finest level, in the max norm over `(S, U, V)` at `t1`.
pub fn suv_order_ratios(
    model: &ScaleFactorModel,
    mode: &ModeDirection,
    r: Helicity,
    t0: f64,
    t1: f64,
    base_steps: usize,
    halvings: usize,
) -> Result<Vec<f64>> {
    let finest = base_steps << halvings;
    let fine = suv_reference(model, mode, r, t0, t1, finest * 16)?;
    let finer = suv_reference(model, mode, r, t0, t1, finest * 32)?;
    let reference = [
        (16.0 * finer.s - fine.s) / 15.0,
        (16.0 * finer.u - fine.u) / 15.0,
        (16.0 * finer.v - fine.v) / 15.0,
    ];
    let errors = (0..=halvings)
        .map(|h| {
            let p = suv_reference(model, mode, r, t0, t1, base_steps << h)?;
            Ok([p.s, p.u, p.v]
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.windows(2).map(|w| w[0] / w[1]).collect())
}

/// Central difference with one Richardson level; returns
/// `(derivative, error estimate)`.
pub fn finite_difference_check<F>(f: F, t: f64, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::usage(format!("finite-difference step must be positive, got {h}")));
    }
    let central = |h: f64| -> Result<f64> { Ok((f(t + h)? - f(t - h)?) / (2.0 * h)) };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    Ok((extrapolated, (extrapolated - fine).abs()))
}

/// Compares the analytic rates `ȧ`, `ḃ`, `μ̇` against finite differences of the
/// static coefficients, relative to the larger of the rate and `|f|/t`.
pub fn rates_fd_check(model: &ScaleFactorModel, mode: &ModeDirection, t: f64, tolerance: f64) -> Result<OracleReport> {
    let rates = geometry_rates(model, mode, t)?;
    let h = 1e-5 * t;
    let coef = |sel: fn(&crate::geometry::GeometryCoefficients) -> f64| {
        move |s: f64| -> Result<f64> { Ok(sel(&geometry_coefficients(&evaluate_metric(model, s)?, mode))) }
    };
    let g = geometry_coefficients(&evaluate_metric(model, t)?, mode);
    let checks = [
        (finite_difference_check(coef(|g| g.mu), t, h)?.0, rates.mudot, g.mu),
        (finite_difference_check(coef(|g| g.b), t, h)?.0, rates.bdot, g.b),
        (finite_difference_check(coef(|g| g.a), t, h)?.0, rates.adot, g.a),
    ];
    // Rates are measured against |f|/t as well, so static or vanishing
    // coefficients do not turn round-off into an O(1) relative error.
    let mut dev = Deviation::default();
    for (fd, analytic, value) in checks {
        dev.push(analytic, fd);
        dev.scale = dev.scale.max(value.abs() / t);
    }
    Ok(dev.report("geometry.rates_vs_finite_difference", tolerance))
}

/// Randomized sweep over `Aᵢ ∈ [0.1, 10]` and uniform `(δ, ξ)` of the exact
/// algebraic identities: `a² − bc = −μ²`, transition-formula angles, and
/// transversality of the Cartesian reconstruction.
pub fn identity_sweep<R: Rng>(rng: &mut R, samples: usize, tolerance: f64) -> Vec<OracleReport> {
    let mut mu = 0.0f64;
    let mut angles = 0.0f64;
    let mut transverse = 0.0f64;
    for _ in 0..samples {
        let a = [rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0)];
        let delta = rng.gen_range(0.0..PI);
        let xi = rng.gen_range(0.0..TAU);
        let mode = ModeDirection::new(1.0, delta, xi).expect("sampled angles are in range");
        let ms = MetricState::from_rates(1.0, a, [0.0; 3]);
        let rep = check_identities(&ms, &mode);
        mu = mu.max(rep.mu_identity);
        angles = angles.max(rep.angle_agreement).max(rep.phi_norm).max(rep.theta_norm);

        let s_d = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s_x = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s = reconstruct_cartesian(s_d, s_x, delta, xi);
        let n = mode.unit_vector();
        let dot = s[0] * n[0] + s[1] * n[1] + s[2] * n[2];
        transverse = transverse.max(dot.norm() / s_d.norm().max(s_x.norm()));
    }
    vec![
        OracleReport::new("geometry.mu_identity", mu, mu, samples, tolerance),
        OracleReport::new("geometry.transition_angles", angles, angles, samples, tolerance),
        OracleReport::new("geometry.transversality", transverse, transverse, samples, tolerance),
    ]
}

/// Occupation numbers below this are treated as zero when forming relative
/// deviations.
pub const S_FLOOR: f64 = 1e-12;

/// Runs every formulation from matched vacuum data on one mode and reports
/// pairwise deviations of `S(t)`.
///
/// Hard checks: amplitude pair vs `(S,U,V)`, and first-order pair vs
/// second-order equation. The second-order path vs `(S,U,V)` is a
/// diagnostic, reported both with `W̄ = (H₃ − H₁)/μ` and with `W̄ = Λ⁺/μ`.
pub fn cross_check_evolutions(
    model: &ScaleFactorModel,
    mode: ModeDirection,
    r: Helicity,
    t0: f64,
    t1: f64,
    tolerances: Tolerances,
    n_outputs: usize,
    check_tolerance: f64,
) -> Result<Vec<OracleReport>> {
    let outs: Vec<f64> = (0..n_outputs.max(2))
        .map(|i| t0 + (t1 - t0) * i as f64 / (n_outputs.max(2) - 1) as f64)
        .collect();
    let p = ModeProblem::new(model, mode, r, t0, t1, StepControl::Adaptive(tolerances));
    let s_suv = evolve_suv(&p, &outs)?.occupation(model)?;
    let s_bog = evolve_bogoliubov(&p, &outs)?.occupation(model)?;
    let second = evolve_second_order(&p, None, &outs)?;
    let first = evolve_first_order(&p, None, &outs)?;
    let s_second = second.occupation(model)?;
    let s_first = first.occupation(model)?;
    let s_lambda = evolve_suv(&p.with_coupling(Coupling::FromLambda), &outs)?.occupation(model)?;

    let compare = |a: &[f64], b: &[f64]| {
        let mut d = Deviation::with_floor(S_FLOOR);
        for (x, y) in a.iter().zip(b) {
            d.push(*x, *y);
        }
        d
    };
    let bog = compare(&s_bog, &s_suv);
    let fs = compare(&s_first, &s_second);
    let diag = compare(&s_second, &s_suv);
    let diag_lambda = compare(&s_second, &s_lambda);
    Ok(vec![
        bog.report("modes.bogoliubov_vs_suv", check_tolerance),
        fs.report("modes.first_order_vs_second_order", check_tolerance),
        OracleReport::diagnostic("modes.second_order_vs_suv", diag.max_abs, diag.max_rel(), diag.samples),
        OracleReport::diagnostic(
            "modes.second_order_vs_suv_lambda_coupling",
            diag_lambda.max_abs,
            diag_lambda.max_rel(),
            diag_lambda.samples,
        ),
    ])
}
