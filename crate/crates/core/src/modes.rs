//! Time evolution of a single Fourier mode.
//!
//! Four formulations are provided and cross-checked against each other:
//!
//! * the transverse first-order pair `(S_δ, S_ξ)`:
//!   `r Ṡ_δ = −k a S_δ − k b S_ξ`, `r Ṡ_ξ = k c S_δ + k a S_ξ`;
//! * the second-order equation `𝒴̈ − (ḃ/b) 𝒴̇ + (k²μ² + kΛʳ) 𝒴 = 0`;
//! * the amplitude pair `(Φ, Ψ)` with `𝒴 = (kb/μ)^{1/2} (Φ e₊ + Ψ e₋)`;
//! * the real triple `(S, U, V)`, whose connection formula
//!   `U² + V² = 4S(S+1)` is an exact integral of motion.
//!
//! `e± = exp(±i ∫_{t₀}^{t} K₀ dt′)`.
//!
//! The `(S, U, V)` right-hand side is
//!
//! ```text
//! Ṡ = (W/2) U + r (W̄/2) V
//! U̇ = W (2S + 1) − (r W̄ + 2K₀) V
//! V̇ = r W̄ (2S + 1) + (r W̄ + 2K₀) U
//! ```
//!
//! The compact matrix form of this system that is sometimes quoted carries
//! `W` instead of `W̄` in its third row; that variant does not conserve the
//! connection formula and is not used.
//!
//! For `(Φ, Ψ)` the couplings of the two equations must be complex
//! conjugates of each other for `|Φ|² − |Ψ|²` to be conserved. The
//! conjugation sits in the `Ψ` equation:
//!
//! ```text
//! Ψ̇ = Φ e₊² (W/2 − i r W̄/2) − i r (W̄/2) Ψ
//! Φ̇ = Ψ e₋² (W/2 + i r W̄/2) + i r (W̄/2) Φ
//! ```
//!
//! which is the unique placement for which `S = |Ψ|²`,
//! `U = 2 Re(Ψ* Φ e₊²)`, `V = 2 Im(Ψ* Φ e₊²)` obey the triple above. It is
//! also what substituting the amplitude ansatz into the second-order
//! equation produces, with `r W̄` standing for `Λʳ/μ`.

use std::cell::Cell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{mode_rates, Helicity, ModeDirection, ModeRates};
use crate::metric::{evaluate_metric, ScaleFactorModel};
use crate::ode::{integrate, IntegratorStats, StepControl};

/// Integrals-of-motion triple for one helicity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolarizationState {
    pub s: f64,
    pub u: f64,
    pub v: f64,
}

impl PolarizationState {
    pub const VACUUM: PolarizationState = PolarizationState { s: 0.0, u: 0.0, v: 0.0 };

    pub fn new(s: f64, u: f64, v: f64) -> Self {
        PolarizationState { s, u, v }
    }

    /// `U² + V² − 4S(S+1)`.
    pub fn connection_residual(&self) -> f64 {
        self.u * self.u + self.v * self.v - 4.0 * self.s * (self.s + 1.0)
    }

    fn to_array(self) -> [f64; 3] {
        [self.s, self.u, self.v]
    }

    fn from_array(y: &[f64; 3]) -> Self {
        PolarizationState { s: y[0], u: y[1], v: y[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovPair {
    pub phi: Complex64,
    pub psi: Complex64,
    /// Accumulated `∫ K₀ dt` defining `e₊ = exp(i·phase)`.
    pub phase: f64,
}

impl BogoliubovPair {
    pub const VACUUM: BogoliubovPair = BogoliubovPair {
        phi: Complex64::new(1.0, 0.0),
        psi: Complex64::new(0.0, 0.0),
        phase: 0.0,
    };

    /// `|Φ|² − |Ψ|² − 1`.
    pub fn normalization_residual(&self) -> f64 {
        self.phi.norm_sqr() - self.psi.norm_sqr() - 1.0
    }
}

/// Mode function `𝒴` (or `S_δ`) and its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub y: Complex64,
    pub ydot: Complex64,
}

impl FieldSample {
    /// Positive-frequency adiabatic data `𝒴 = (kb/μ)^{1/2}`, `𝒴̇ = iK₀𝒴`,
    /// equivalent to `Φ = 1, Ψ = 0`.
    pub fn vacuum(model: &ScaleFactorModel, mode: &ModeDirection, t: f64) -> Result<Self> {
        let ms = evaluate_metric(model, t)?;
        let g = mode_rates(&ms, mode);
        let n = (mode.k() * g.b / g.mu).sqrt();
        let y = Complex64::new(n, 0.0);
        Ok(FieldSample {
            y,
            ydot: Complex64::i() * (mode.k() * g.mu) * y,
        })
    }

    /// Projects onto amplitudes and returns `(S, U, V)`; phase-independent.
    pub fn to_polarization(&self, model: &ScaleFactorModel, mode: &ModeDirection, t: f64) -> Result<PolarizationState> {
        let ms = evaluate_metric(model, t)?;
        let g = mode_rates(&ms, mode);
        Ok(self.project(&g, mode.k()))
    }

    fn project(&self, g: &ModeRates, k: f64) -> PolarizationState {
        let k0 = k * g.mu;
        let n = (k * g.b / g.mu).sqrt();
        let q = self.ydot / (Complex64::i() * k0);
        let phi_e = (self.y + q) / (2.0 * n);
        let psi_e = (self.y - q) / (2.0 * n);
        let z = psi_e.conj() * phi_e;
        PolarizationState {
            s: psi_e.norm_sqr(),
            u: 2.0 * z.re,
            v: 2.0 * z.im,
        }
    }

    /// `Im(𝒴* 𝒴̇)/(k² b)`, which equals `|Φ|² − |Ψ|²` and is conserved by
    /// the second-order equation.
    fn normalization(&self, g: &ModeRates, k: f64) -> f64 {
        (self.y.conj() * self.ydot).im / (k * k * g.b)
    }

    /// The conserved normalization `Im(𝒴* 𝒴̇)/(k² b)` at `t`; unity for
    /// vacuum data.
    pub fn normalization_at(&self, model: &ScaleFactorModel, mode: &ModeDirection, t: f64) -> Result<f64> {
        let ms = evaluate_metric(model, t)?;
        Ok(self.normalization(&mode_rates(&ms, mode), mode.k()))
    }

    /// `S_ξ = −(r Ṡ_δ + k a S_δ)/(k b)` from the first-order pair.
    pub fn s_xi(&self, model: &ScaleFactorModel, mode: &ModeDirection, r: Helicity, t: f64) -> Result<Complex64> {
        let ms = evaluate_metric(model, t)?;
        let g = mode_rates(&ms, mode);
        let k = mode.k();
        Ok(-(self.ydot * r.sign() + self.y * (k * g.a)) / (k * g.b))
    }
}

/// Which `W̄` enters the `(S,U,V)` and `(Φ,Ψ)` systems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Coupling {
    /// `W̄ = (H₃ − H₁)/μ`.
    #[default]
    Printed,
    /// `W̄ = Λ⁺/μ`, the coupling implied by the second-order equation. Used
    /// only as a diagnostic.
    FromLambda,
}

impl Coupling {
    fn w_bar(self, g: &ModeRates) -> f64 {
        match self {
            Coupling::Printed => g.w_bar,
            Coupling::FromLambda => g.lambda_plus / g.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Suv,
    FirstOrder,
    SecondOrder,
    Bogoliubov,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Suv => "suv",
            Method::FirstOrder => "first_order",
            Method::SecondOrder => "second_order",
            Method::Bogoliubov => "bogoliubov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Track {
    Suv(Vec<PolarizationState>),
    Field(Vec<FieldSample>),
    Bogoliubov(Vec<BogoliubovPair>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub mode: ModeDirection,
    pub helicity: Helicity,
    pub method: Method,
    pub times: Vec<f64>,
    pub track: Track,
    /// Largest drift of the method's integral of motion over every accepted
    /// step and output: the connection formula for `(S,U,V)`, the
    /// normalization `|Φ|² − |Ψ|² − 1` for the others.
    pub max_residual: f64,
    pub stats: IntegratorStats,
}

impl ModeSolution {
    pub fn polarization(&self) -> Option<&[PolarizationState]> {
        match &self.track {
            Track::Suv(v) => Some(v),
            _ => None,
        }
    }

    pub fn field(&self) -> Option<&[FieldSample]> {
        match &self.track {
            Track::Field(v) => Some(v),
            _ => None,
        }
    }

    pub fn bogoliubov(&self) -> Option<&[BogoliubovPair]> {
        match &self.track {
            Track::Bogoliubov(v) => Some(v),
            _ => None,
        }
    }

    /// `S(t)` at every output, whatever the formulation.
    pub fn occupation(&self, model: &ScaleFactorModel) -> Result<Vec<f64>> {
        match &self.track {
            Track::Suv(v) => Ok(v.iter().map(|p| p.s).collect()),
            Track::Bogoliubov(v) => Ok(v.iter().map(|p| p.psi.norm_sqr()).collect()),
            Track::Field(v) => v
                .iter()
                .zip(&self.times)
                .map(|(f, &t)| f.to_polarization(model, &self.mode, t).map(|p| p.s))
                .collect(),
        }
    }
}

/// One mode, one helicity, one time span.
#[derive(Debug, Clone, Copy)]
pub struct ModeProblem<'a> {
    pub model: &'a ScaleFactorModel,
    pub mode: ModeDirection,
    pub helicity: Helicity,
    pub t0: f64,
    pub t1: f64,
    pub control: StepControl,
    pub coupling: Coupling,
}

impl<'a> ModeProblem<'a> {
    pub fn new(
        model: &'a ScaleFactorModel,
        mode: ModeDirection,
        helicity: Helicity,
        t0: f64,
        t1: f64,
        control: StepControl,
    ) -> Self {
        ModeProblem {
            model,
            mode,
            helicity,
            t0,
            t1,
            control,
            coupling: Coupling::Printed,
        }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    fn validate(&self, output_times: &[f64]) -> Result<()> {
        if !(self.t0 < self.t1) {
            return Err(Error::usage(format!("need t0 < t1, got [{}, {}]", self.t0, self.t1)));
        }
        for t in [self.t0, self.t1] {
            if !self.model.contains(t) {
                let (lo, hi) = self.model.domain();
                return Err(Error::Domain { t, lo, hi });
            }
        }
        if output_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("output times must be strictly increasing"));
        }
        Ok(())
    }

    fn rates(&self, t: f64) -> Result<ModeRates> {
        let ms = evaluate_metric(self.model, t)?;
        Ok(mode_rates(&ms, &self.mode))
    }
}

/// Right-hand side of the `(S, U, V)` system.
pub fn suv_derivative(state: PolarizationState, w: f64, w_bar: f64, k0: f64, r: Helicity) -> [f64; 3] {
    let r = r.sign();
    let PolarizationState { s, u, v } = state;
    let rot = r * w_bar + 2.0 * k0;
    [
        0.5 * w * u + r * 0.5 * w_bar * v,
        w * (2.0 * s + 1.0) - rot * v,
        r * w_bar * (2.0 * s + 1.0) + rot * u,
    ]
}

/// Evolves `(S, U, V)` from the vacuum `S = U = V = 0` at `t₀`.
pub fn evolve_suv(p: &ModeProblem, output_times: &[f64]) -> Result<ModeSolution> {
    p.validate(output_times)?;
    let k = p.mode.k();
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let g = p.rates(t)?;
        Ok(suv_derivative(
            PolarizationState::from_array(y),
            g.w,
            p.coupling.w_bar(&g),
            k * g.mu,
            p.helicity,
        ))
    };
    let mut samples = Vec::with_capacity(output_times.len());
    let max_residual = Cell::new(0.0f64);
    let track = |r: f64| max_residual.set(max_residual.get().max(r.abs()));
    let (_, stats) = integrate(
        rhs,
        p.t0,
        PolarizationState::VACUUM.to_array(),
        p.t1,
        p.control,
        output_times,
        |_, y| {
            let st = PolarizationState::from_array(y);
            track(st.connection_residual());
            samples.push(st);
        },
        |_, y| {
            track(PolarizationState::from_array(y).connection_residual());
        },
    )?;
    Ok(ModeSolution {
        mode: p.mode,
        helicity: p.helicity,
        method: Method::Suv,
        times: output_times.to_vec(),
        track: Track::Suv(samples),
        max_residual: max_residual.get(),
        stats,
    })
}

fn field_to_array(f: &FieldSample) -> [f64; 4] {
    [f.y.re, f.y.im, f.ydot.re, f.ydot.im]
}

/// Integrates the second-order mode equation from `init` (vacuum data when
/// `None`).
pub fn evolve_second_order(p: &ModeProblem, init: Option<FieldSample>, output_times: &[f64]) -> Result<ModeSolution> {
    p.validate(output_times)?;
    let init = match init {
        Some(f) => f,
        None => FieldSample::vacuum(p.model, &p.mode, p.t0)?,
    };
    let k = p.mode.k();
    let r = p.helicity.sign();
    let rhs = |t: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let g = p.rates(t)?;
        let friction = g.bdot_over_b();
        let omega2 = k * k * g.mu * g.mu + k * r * g.lambda_plus;
        Ok([
            y[2],
            y[3],
            friction * y[2] - omega2 * y[0],
            friction * y[3] - omega2 * y[1],
        ])
    };
    let n0 = init.normalization(&p.rates(p.t0)?, k);
    let mut raw = Vec::with_capacity(output_times.len());
    let mut step_states = Vec::new();
    let (_, stats) = integrate(
        rhs,
        p.t0,
        field_to_array(&init),
        p.t1,
        p.control,
        output_times,
        |t, y| raw.push((t, *y)),
        |t, y| step_states.push((t, *y)),
    )?;
    let to_sample = |y: &[f64; 4]| FieldSample {
        y: Complex64::new(y[0], y[1]),
        ydot: Complex64::new(y[2], y[3]),
    };
    let mut max_residual = 0.0f64;
    for (t, y) in raw.iter().chain(&step_states) {
        let n = to_sample(y).normalization(&p.rates(*t)?, k);
        max_residual = max_residual.max((n - n0).abs());
    }
    Ok(ModeSolution {
        mode: p.mode,
        helicity: p.helicity,
        method: Method::SecondOrder,
        times: output_times.to_vec(),
        track: Track::Field(raw.iter().map(|(_, y)| to_sample(y)).collect()),
        max_residual,
        stats,
    })
}

/// Integrates the transverse first-order pair. `init` gives `S_δ` and
/// `Ṡ_δ` at `t₀` (vacuum data when `None`); `S_ξ(t₀)` follows from them.
/// The returned track holds `(S_δ, Ṡ_δ)`.
pub fn evolve_first_order(p: &ModeProblem, init: Option<FieldSample>, output_times: &[f64]) -> Result<ModeSolution> {
    p.validate(output_times)?;
    let init = match init {
        Some(f) => f,
        None => FieldSample::vacuum(p.model, &p.mode, p.t0)?,
    };
    let k = p.mode.k();
    let r = p.helicity.sign();
    let s_xi0 = init.s_xi(p.model, &p.mode, p.helicity, p.t0)?;
    let rhs = |t: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let g = p.rates(t)?;
        let (sd, sx) = (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]));
        let dsd = (sd * (-k * g.a) - sx * (k * g.b)) * r;
        let dsx = (sd * (k * g.c) + sx * (k * g.a)) * r;
        Ok([dsd.re, dsd.im, dsx.re, dsx.im])
    };
    let n0 = init.normalization(&p.rates(p.t0)?, k);
    let mut raw = Vec::with_capacity(output_times.len());
    let mut step_states = Vec::new();
    let (_, stats) = integrate(
        rhs,
        p.t0,
        [init.y.re, init.y.im, s_xi0.re, s_xi0.im],
        p.t1,
        p.control,
        output_times,
        |t, y| raw.push((t, *y)),
        |t, y| step_states.push((t, *y)),
    )?;
    let to_sample = |t: f64, y: &[f64; 4]| -> Result<FieldSample> {
        let g = p.rates(t)?;
        let (sd, sx) = (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]));
        Ok(FieldSample {
            y: sd,
            ydot: (sd * (-k * g.a) - sx * (k * g.b)) * r,
        })
    };
    let mut max_residual = 0.0f64;
    for (t, y) in raw.iter().chain(&step_states) {
        let n = to_sample(*t, y)?.normalization(&p.rates(*t)?, k);
        max_residual = max_residual.max((n - n0).abs());
    }
    let samples = raw.iter().map(|(t, y)| to_sample(*t, y)).collect::<Result<Vec<_>>>()?;
    Ok(ModeSolution {
        mode: p.mode,
        helicity: p.helicity,
        method: Method::FirstOrder,
        times: output_times.to_vec(),
        track: Track::Field(samples),
        max_residual,
        stats,
    })
}

/// Evolves `(Φ, Ψ)` and the phase from `Φ = 1`, `Ψ = 0`, phase `0`.
pub fn evolve_bogoliubov(p: &ModeProblem, output_times: &[f64]) -> Result<ModeSolution> {
    p.validate(output_times)?;
    let k = p.mode.k();
    let r = p.helicity.sign();
    let rhs = |t: f64, y: &[f64; 5]| -> Result<[f64; 5]> {
        let g = p.rates(t)?;
        let w_bar = p.coupling.w_bar(&g);
        let phi = Complex64::new(y[0], y[1]);
        let psi = Complex64::new(y[2], y[3]);
        let e2 = Complex64::from_polar(1.0, 2.0 * y[4]);
        let coupling = Complex64::new(0.5 * g.w, 0.5 * r * w_bar);
        let rot = Complex64::new(0.0, 0.5 * r * w_bar);
        let dpsi = phi * e2 * coupling.conj() - rot * psi;
        let dphi = psi * e2.conj() * coupling + rot * phi;
        Ok([dphi.re, dphi.im, dpsi.re, dpsi.im, k * g.mu])
    };
    let to_pair = |y: &[f64; 5]| BogoliubovPair {
        phi: Complex64::new(y[0], y[1]),
        psi: Complex64::new(y[2], y[3]),
        phase: y[4],
    };
    let mut samples = Vec::with_capacity(output_times.len());
    let max_residual = Cell::new(0.0f64);
    let track = |r: f64| max_residual.set(max_residual.get().max(r.abs()));
    let (_, stats) = integrate(
        rhs,
        p.t0,
        [1.0, 0.0, 0.0, 0.0, 0.0],
        p.t1,
        p.control,
        output_times,
        |_, y| {
            let pair = to_pair(y);
            track(pair.normalization_residual());
            samples.push(pair);
        },
        |_, y| track(to_pair(y).normalization_residual()),
    )?;
    Ok(ModeSolution {
        mode: p.mode,
        helicity: p.helicity,
        method: Method::Bogoliubov,
        times: output_times.to_vec(),
        track: Track::Bogoliubov(samples),
        max_residual: max_residual.get(),
        stats,
    })
}

/// `S = |Ψ|²`, `U = 2 Re(Ψ* Φ e₊²)`, `V = 2 Im(Ψ* Φ e₊²)`.
pub fn suv_from_bogoliubov(pair: &BogoliubovPair) -> PolarizationState {
    let z = pair.psi.conj() * pair.phi * Complex64::from_polar(1.0, 2.0 * pair.phase);
    PolarizationState {
        s: pair.psi.norm_sqr(),
        u: 2.0 * z.re,
        v: 2.0 * z.im,
    }
}

/// Max over outputs of `|𝒴^{r}(t, −k) − 𝒴^{−r}(t, k)|`.
///
/// `mirrored` must be the solution at the reflected momentum with the
/// opposite helicity of `direct`; both must carry field tracks on the same
/// output grid.
pub fn reality_convention_check(mirrored: &ModeSolution, direct: &ModeSolution) -> Result<f64> {
    if mirrored.helicity != direct.helicity.flip() {
        return Err(Error::usage("reality check needs opposite helicities"));
    }
    let expect = direct.mode.mirrored();
    let m = &mirrored.mode;
    if (m.k() - expect.k()).abs() > 1e-12 * expect.k()
        || (m.delta() - expect.delta()).abs() > 1e-12
        || (m.xi() - expect.xi()).abs() > 1e-12
    {
        return Err(Error::usage("reality check needs mirrored momenta"));
    }
    if mirrored.times != direct.times {
        return Err(Error::usage("reality check needs identical output grids"));
    }
    let (a, b) = match (mirrored.field(), direct.field()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::usage("reality check needs mode-function tracks")),
    };
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x.y - y.y).norm())
        .fold(0.0, f64::max))
}
