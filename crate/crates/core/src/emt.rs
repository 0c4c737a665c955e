//! Energy-momentum tensor of the vacuum vector field.
//!
//! The spectral density at `(t, k, δ, ξ)` is built from the two helicity
//! triples `(Sʳ, Uʳ, Vʳ)` and the tetrad angles `(θ, φ)`; the homogeneous
//! tensor is
//!
//! ```text
//! Tᵘᵥ(t) = ∫ dξ ∫ sinδ dδ ∫ dK₀ T̃ᵘᵥ(t, k, δ, ξ),   K₀ = k μ(t, δ, ξ)
//! ```
//!
//! with `dK₀ = μ dk` at fixed angles. Mixed diagonal components are stored as
//! `Tᵘᵤ`; off-diagonal spatial components are contravariant `Tⁱʲ` and carry
//! the `1/(AᵢAⱼ)` factors. `T⁰ⁱ` vanishes by homogeneity and is not stored.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{geometry_coefficients, GeometryCoefficients, Helicity, ModeDirection};
use crate::metric::{evaluate_metric, MetricState, ScaleFactorModel};
use crate::modes::{evolve_suv, ModeProblem, PolarizationState};
use crate::ode::StepControl;
use crate::quadrature::QuadratureGrid;

/// Form of the `T̃³₃` density.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum T33Form {
    /// `Σᵣ[−cos²θ·2Sʳ + sin²θ·Uʳ]`, which makes the trace vanish identically.
    #[default]
    Reconciled,
    /// `Σᵣ[−cosθ·2Sʳ + sin²θ·Uʳ]` as typeset; kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpectralStressTensor {
    pub t: f64,
    pub k: f64,
    pub delta: f64,
    pub xi: f64,
    pub t00: f64,
    pub t11: f64,
    pub t22: f64,
    pub t33: f64,
    pub t12: f64,
    pub t13: f64,
    pub t23: f64,
}

impl SpectralStressTensor {
    /// `T̃⁰₀ + T̃¹₁ + T̃²₂ + T̃³₃`.
    pub fn trace(&self) -> f64 {
        self.t00 + self.t11 + self.t22 + self.t33
    }

    fn components(&self) -> [f64; 7] {
        [self.t00, self.t11, self.t22, self.t33, self.t12, self.t13, self.t23]
    }
}

/// Angle- and frequency-integrated tensor at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StressTensorSample {
    pub t: f64,
    pub t00: f64,
    pub t11: f64,
    pub t22: f64,
    pub t33: f64,
    pub t12: f64,
    pub t13: f64,
    pub t23: f64,
    /// Share of `T⁰₀` coming from the top `k` octave `[k_max/2, k_max]`;
    /// a proxy for the cutoff dependence.
    pub uv_tail_fraction: f64,
}

impl StressTensorSample {
    pub fn trace(&self) -> f64 {
        self.t00 + self.t11 + self.t22 + self.t33
    }
}

/// `X = 2S − (2S + U)(cos²θ + 1)/2`, `Y = −r cosθ V`.
pub fn xy_terms(state: &PolarizationState, theta: f64, r: Helicity) -> (f64, f64) {
    let c = theta.cos();
    let x = 2.0 * state.s - (2.0 * state.s + state.u) * (c * c + 1.0) / 2.0;
    let y = -r.sign() * c * state.v;
    (x, y)
}

/// Spectral components from both helicity states (`states[0]` is `r = +1`).
pub fn spectral_emt(
    states: &[PolarizationState; 2],
    theta: f64,
    phi: f64,
    mode: &ModeDirection,
    ms: &MetricState,
    volume: f64,
    form: T33Form,
) -> SpectralStressTensor {
    let k = mode.k();
    let pref = k * k * k / volume;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (s2p, c2p) = (2.0 * phi).sin_cos();
    let s2t = (2.0 * theta).sin();
    let st2 = st * st;

    let mut acc = [0.0; 7];
    for r in Helicity::BOTH {
        let p = &states[r.index()];
        let (x, y) = xy_terms(p, theta, r);
        let two_s = 2.0 * p.s;
        let two_s_u = two_s + p.u;
        // tanθ·Y, without the cosθ = 0 singularity.
        let tan_y = -r.sign() * st * p.v;
        acc[0] += two_s;
        acc[1] += -c2p * x + s2p * y - 0.5 * st2 * two_s_u;
        acc[2] += c2p * x - s2p * y - 0.5 * st2 * two_s_u;
        acc[3] += match form {
            T33Form::Reconciled => -ct * ct * two_s,
            T33Form::Printed => -ct * two_s,
        } + st2 * p.u;
        acc[4] += s2p * x + c2p * y;
        acc[5] += cp * 0.5 * s2t * two_s_u + sp * tan_y;
        acc[6] += sp * 0.5 * s2t * two_s_u - cp * tan_y;
    }
    let [a1, a2, a3] = ms.a;
    SpectralStressTensor {
        t: ms.t,
        k,
        delta: mode.delta(),
        xi: mode.xi(),
        t00: pref * acc[0],
        t11: pref * acc[1],
        t22: pref * acc[2],
        t33: pref * acc[3],
        t12: pref * acc[4] / (a1 * a2),
        t13: pref * acc[5] / (a1 * a3),
        t23: pref * acc[6] / (a2 * a3),
    }
}

/// `(S, U, V)` for every grid node and helicity at a fixed set of times.
///
/// Layout is `[node][helicity][time]` with nodes ordered as in
/// [`QuadratureGrid::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCache {
    times: Vec<f64>,
    n_nodes: usize,
    states: Vec<PolarizationState>,
}

impl ModeCache {
    /// Memory needed to cache `grid` at `n_times` output times.
    pub fn bytes_required(grid: &QuadratureGrid, n_times: usize) -> usize {
        grid.len() * 2 * n_times * std::mem::size_of::<PolarizationState>()
    }

    /// Every node in vacuum.
    pub fn vacuum(grid: &QuadratureGrid, times: &[f64]) -> Self {
        ModeCache {
            times: times.to_vec(),
            n_nodes: grid.len(),
            states: vec![PolarizationState::VACUUM; grid.len() * 2 * times.len()],
        }
    }

    /// Builds a cache from states laid out as `[node][helicity][time]`.
    pub fn from_states(grid: &QuadratureGrid, times: &[f64], states: Vec<PolarizationState>) -> Result<Self> {
        if states.len() != grid.len() * 2 * times.len() {
            return Err(Error::usage(format!(
                "mode cache holds {} states, grid needs {}",
                states.len(),
                grid.len() * 2 * times.len()
            )));
        }
        Ok(ModeCache {
            times: times.to_vec(),
            n_nodes: grid.len(),
            states,
        })
    }

    /// Evolves every node and both helicities from vacuum at `t0` and
    /// samples them at `times`. Runs on the current rayon pool; the result
    /// does not depend on the pool size.
    pub fn evolve(
        model: &ScaleFactorModel,
        grid: &QuadratureGrid,
        t0: f64,
        control: StepControl,
        times: &[f64],
    ) -> Result<Self> {
        if times.is_empty() {
            return Ok(Self::vacuum(grid, times));
        }
        if times[0] < t0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("cache times must be strictly increasing and not before t0"));
        }
        let t1 = *times.last().unwrap();
        if t1 == t0 {
            return Ok(Self::vacuum(grid, times));
        }
        let per_node: Vec<Vec<PolarizationState>> = (0..grid.len() * 2)
            .into_par_iter()
            .map(|slot| -> Result<Vec<PolarizationState>> {
                let (ik, id, ix) = grid.node(slot / 2);
                let r = if slot % 2 == 0 { Helicity::Plus } else { Helicity::Minus };
                let mode = ModeDirection::new(grid.k[ik], grid.delta[id], grid.xi[ix])?;
                let sol = evolve_suv(&ModeProblem::new(model, mode, r, t0, t1, control), times)?;
                match sol.track {
                    crate::modes::Track::Suv(v) => Ok(v),
                    _ => unreachable!(),
                }
            })
            .collect::<Result<_>>()?;
        Ok(ModeCache {
            times: times.to_vec(),
            n_nodes: grid.len(),
            states: per_node.into_iter().flatten().collect(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn get(&self, node: usize, r: Helicity, time_index: usize) -> Option<PolarizationState> {
        if node >= self.n_nodes || time_index >= self.times.len() {
            return None;
        }
        let nt = self.times.len();
        self.states.get((node * 2 + r.index()) * nt + time_index).copied()
    }

    pub fn states(&self) -> &[PolarizationState] {
        &self.states
    }
}

/// Integrates the spectral tensor over the grid at cached time `t`.
///
/// The reduction runs in ascending grid order, so results are reproducible
/// bit for bit.
pub fn integrate_emt(
    t: f64,
    model: &ScaleFactorModel,
    grid: &QuadratureGrid,
    cache: &ModeCache,
    volume: f64,
    form: T33Form,
) -> Result<StressTensorSample> {
    if cache.n_nodes != grid.len() {
        return Err(Error::usage(format!(
            "mode cache covers {} nodes, grid has {}",
            cache.n_nodes,
            grid.len()
        )));
    }
    let it = cache
        .times
        .iter()
        .position(|&x| x == t)
        .ok_or_else(|| Error::usage(format!("mode cache has no entries at t = {t}")))?;
    if !(volume > 0.0) {
        return Err(Error::usage(format!("volume must be positive, got {volume}")));
    }
    let ms = evaluate_metric(model, t)?;
    let k_tail = 0.5 * grid.k_max();

    let mut total = [0.0; 7];
    let mut tail = 0.0;
    for (ix, &xi) in grid.xi.iter().enumerate() {
        for (id, &delta) in grid.delta.iter().enumerate() {
            let geo = geometry_coefficients(&ms, &ModeDirection::new(1.0, delta, xi)?);
            let mut inner = [0.0; 7];
            let mut inner_tail = 0.0;
            for (ik, &k) in grid.k.iter().enumerate() {
                let node = grid.index(ik, id, ix);
                let states = [
                    cache.get(node, Helicity::Plus, it).unwrap(),
                    cache.get(node, Helicity::Minus, it).unwrap(),
                ];
                let mode = ModeDirection::new(k, delta, xi)?;
                let dens = spectral_emt(&states, geo.theta, geo.phi, &mode, &ms, volume, form);
                let comps = dens.components();
                if comps.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Numerical {
                        t,
                        reason: "non-finite spectral component".into(),
                        detail: format!("node (k, delta, xi) = ({k}, {delta}, {xi}), states = {states:?}"),
                    });
                }
                let wk = grid.k_weights[ik];
                for (acc, c) in inner.iter_mut().zip(comps) {
                    *acc += wk * c;
                }
                if k >= k_tail {
                    inner_tail += wk * comps[0];
                }
            }
            let w = grid.xi_weight * grid.delta_weights[id] * geo.mu;
            for (acc, c) in total.iter_mut().zip(inner) {
                *acc += w * c;
            }
            tail += w * inner_tail;
        }
    }
    Ok(StressTensorSample {
        t,
        t00: total[0],
        t11: total[1],
        t22: total[2],
        t33: total[3],
        t12: total[4],
        t13: total[5],
        t23: total[6],
        uv_tail_fraction: if total[0] != 0.0 { tail / total[0] } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationPoint {
    pub t: f64,
    /// `dT⁰₀/dt + Σᵢ Hᵢ (T⁰₀ − Tⁱᵢ)`.
    pub residual: f64,
    /// `|T⁰₀| · |Σᵢ Hᵢ|`, for relative reporting.
    pub scale: f64,
}

/// Continuity residual along a timeline. Interior points use central
/// differences; the two ends use second-order one-sided stencils.
pub fn conservation_residual(samples: &[StressTensorSample], model: &ScaleFactorModel) -> Result<Vec<ConservationPoint>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::usage(format!(
            "conservation residual needs at least 3 time samples, got {n}"
        )));
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::usage("samples must be strictly increasing in time"));
    }
    let rho: Vec<f64> = samples.iter().map(|s| s.t00).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    (0..n)
        .map(|i| {
            let (a, b, c) = match i {
                0 => (0, 1, 2),
                i if i == n - 1 => (n - 3, n - 2, n - 1),
                i => (i - 1, i, i + 1),
            };
            let drho = three_point_derivative([t[a], t[b], t[c]], [rho[a], rho[b], rho[c]], t[i]);
            let ms = evaluate_metric(model, t[i])?;
            let s = &samples[i];
            let diag = [s.t11, s.t22, s.t33];
            let flux: f64 = (0..3).map(|j| ms.h[j] * (s.t00 - diag[j])).sum();
            Ok(ConservationPoint {
                t: t[i],
                residual: drho + flux,
                scale: s.t00.abs() * ms.h.iter().sum::<f64>().abs(),
            })
        })
        .collect()
}

/// Derivative at `x` of the quadratic through three points.
fn three_point_derivative(t: [f64; 3], y: [f64; 3], x: f64) -> f64 {
    let [t0, t1, t2] = t;
    let l0 = (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1));
    y[0] * l0 + y[1] * l1 + y[2] * l2
}

/// Inner product of the two polarization vectors,
/// `(μ² 𝒴⁺ 𝒴⁻* − k⁻² 𝒴̇⁺ 𝒴̇⁻*) / (b √−g)`.
pub fn polarization_overlap(
    y_plus: Complex64,
    ydot_plus: Complex64,
    y_minus: Complex64,
    ydot_minus: Complex64,
    geo: &GeometryCoefficients,
    ms: &MetricState,
    k: f64,
) -> Complex64 {
    (y_plus * y_minus.conj() * (geo.mu * geo.mu) - ydot_plus * ydot_minus.conj() / (k * k))
        / (geo.b * ms.sqrt_minus_g)
}
