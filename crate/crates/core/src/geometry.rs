//! Direction-dependent coefficients of a single Fourier mode.
//!
//! For a comoving wavevector `k (sinδ cosξ, sinδ sinξ, cosδ)` the mode
//! equations depend on the background only through
//!
//! ```text
//! a = cosδ cosξ sinξ (A₂² − A₁²) / √−g
//! b = (A₂² cos²ξ + A₁² sin²ξ) / √−g
//! c = (A₁² cos²δ cos²ξ + A₂² cos²δ sin²ξ + A₃² sin²δ) / √−g
//! μ² = sin²δ cos²ξ / A₁² + sin²δ sin²ξ / A₂² + cos²δ / A₃²
//! ```
//!
//! which satisfy `a² − bc = −μ²`. Time rates are taken analytically through
//! the Hubble rates, never by differencing.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metric::{evaluate_metric, MetricState, ScaleFactorModel};

/// Circular-polarization branch `r = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub const BOTH: [Helicity; 2] = [Helicity::Plus, Helicity::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Helicity::Plus => 1.0,
            Helicity::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Helicity::Plus => Helicity::Minus,
            Helicity::Minus => Helicity::Plus,
        }
    }

    pub fn from_sign(r: i32) -> Result<Self> {
        match r {
            1 => Ok(Helicity::Plus),
            -1 => Ok(Helicity::Minus),
            _ => Err(Error::usage(format!("helicity must be +1 or -1, got {r}"))),
        }
    }

    /// Index used for per-helicity storage: `+1 → 0`, `−1 → 1`.
    pub fn index(self) -> usize {
        match self {
            Helicity::Plus => 0,
            Helicity::Minus => 1,
        }
    }
}

/// Comoving wavenumber and momentum-space angles, with the trigonometric
/// factors cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDirection {
    k: f64,
    delta: f64,
    xi: f64,
    sin_delta: f64,
    cos_delta: f64,
    sin_xi: f64,
    cos_xi: f64,
}

impl ModeDirection {
    /// `k > 0`, `δ ∈ [0, π]`, `ξ ∈ [0, 2π)`.
    pub fn new(k: f64, delta: f64, xi: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::usage(format!("wavenumber must be positive, got {k}")));
        }
        if !(0.0..=PI).contains(&delta) {
            return Err(Error::usage(format!("delta must lie in [0, pi], got {delta}")));
        }
        if !(0.0..TAU).contains(&xi) {
            return Err(Error::usage(format!("xi must lie in [0, 2pi), got {xi}")));
        }
        let (sin_delta, cos_delta) = delta.sin_cos();
        let (sin_xi, cos_xi) = xi.sin_cos();
        Ok(ModeDirection {
            k,
            delta,
            xi,
            sin_delta,
            cos_delta,
            sin_xi,
            cos_xi,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// The reflected momentum `−k`: `δ' = π − δ`, `ξ' = π + ξ (mod 2π)`.
    pub fn mirrored(&self) -> Self {
        let mut xi = self.xi + PI;
        if xi >= TAU {
            xi -= TAU;
        }
        ModeDirection::new(self.k, PI - self.delta, xi).expect("mirror of a valid direction")
    }

    /// Unit comoving direction `(sinδ cosξ, sinδ sinξ, cosδ)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        [
            self.sin_delta * self.cos_xi,
            self.sin_delta * self.sin_xi,
            self.cos_delta,
        ]
    }
}

/// Full per-mode, per-time coefficient bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
    /// Tetrad polar angle in `[0, π]`.
    pub theta: f64,
    /// Tetrad azimuth in `[0, 2π)`.
    pub phi: f64,
    /// Physical frequency `K₀ = kμ`.
    pub k0: f64,
    /// `Λ⁺ = ȧ − (ḃ/b) a`; the other branch is `Λ⁻ = −Λ⁺`.
    pub lambda_plus: f64,
    /// `W = μ̇/μ − ḃ/b`.
    pub w: f64,
    /// `W̄ = (H₃ − H₁)/μ`, taken verbatim. Not dimensionally homogeneous with
    /// `W` when the scale factors carry units.
    pub w_bar: f64,
    pub adot: f64,
    pub bdot: f64,
    pub mudot: f64,
}

impl GeometryCoefficients {
    /// `Λʳ` for the given helicity.
    pub fn lambda(&self, r: Helicity) -> f64 {
        r.sign() * self.lambda_plus
    }
}

/// Rate part of the coefficient bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryRates {
    pub w: f64,
    pub w_bar: f64,
    pub lambda_plus: f64,
    pub adot: f64,
    pub bdot: f64,
    pub mudot: f64,
}

/// Lean subset of the coefficients needed inside ODE right-hand sides.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeRates {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
    pub adot: f64,
    pub bdot: f64,
    pub mudot: f64,
    pub w: f64,
    pub w_bar: f64,
    pub lambda_plus: f64,
}

impl ModeRates {
    pub fn bdot_over_b(&self) -> f64 {
        self.bdot / self.b
    }
}

pub(crate) fn mode_rates(ms: &MetricState, d: &ModeDirection) -> ModeRates {
    let [a1, a2, a3] = ms.a;
    let [h1, h2, h3] = ms.h;
    let (q1, q2, q3) = (a1 * a1, a2 * a2, a3 * a3);
    let g = ms.sqrt_minus_g;
    let hsum = h1 + h2 + h3;
    let (sd2, cd2) = (d.sin_delta * d.sin_delta, d.cos_delta * d.cos_delta);
    let (sx2, cx2) = (d.sin_xi * d.sin_xi, d.cos_xi * d.cos_xi);
    let angle = d.cos_delta * d.cos_xi * d.sin_xi;

    let a = angle * (q2 - q1) / g;
    let adot = angle * (2.0 * h2 * q2 - 2.0 * h1 * q1) / g - hsum * a;

    let gb = q2 * cx2 + q1 * sx2;
    let b = gb / g;
    let bdot = (2.0 * h2 * q2 * cx2 + 2.0 * h1 * q1 * sx2) / g - hsum * b;

    let c = (q1 * cd2 * cx2 + q2 * cd2 * sx2 + q3 * sd2) / g;

    let (w1, w2, w3) = (sd2 * cx2 / q1, sd2 * sx2 / q2, cd2 / q3);
    let mu2 = w1 + w2 + w3;
    let mu = mu2.sqrt();
    let dmu2 = -2.0 * (h1 * w1 + h2 * w2 + h3 * w3);
    let mudot = dmu2 / (2.0 * mu);

    // W = μ̇/μ − ḃ/b written through Hᵢ − H₁ so it vanishes exactly when
    // the expansion is isotropic.
    let (d2, d3) = (h2 - h1, h3 - h1);
    let w = d2 + d3 - (d2 * w2 + d3 * w3) / mu2 - 2.0 * d2 * q2 * cx2 / gb;
    let w_bar = (h3 - h1) / mu;
    let lambda_plus = adot - (bdot / b) * a;

    ModeRates {
        a,
        b,
        c,
        mu,
        adot,
        bdot,
        mudot,
        w,
        w_bar,
        lambda_plus,
    }
}

/// Tetrad angles `(θ, φ)` from the normalized direction
/// `(sinδ cosξ/A₁, sinδ sinξ/A₂, cosδ/A₃)/μ`.
///
/// The common factor `sinδ/μ ≥ 0` is dropped before the arctangents, so `φ`
/// stays defined (and continuous in `δ`) on the poles.
fn tetrad_angles(ms: &MetricState, d: &ModeDirection) -> (f64, f64) {
    let [a1, a2, a3] = ms.a;
    let ex = d.cos_xi / a1;
    let ey = d.sin_xi / a2;
    let theta = (d.sin_delta * ex.hypot(ey)).atan2(d.cos_delta / a3);
    let mut phi = ey.atan2(ex);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    (theta, phi)
}

/// Static coefficients plus their analytic rates at the given metric state.
pub fn geometry_coefficients(ms: &MetricState, d: &ModeDirection) -> GeometryCoefficients {
    let r = mode_rates(ms, d);
    let (theta, phi) = tetrad_angles(ms, d);
    GeometryCoefficients {
        a: r.a,
        b: r.b,
        c: r.c,
        mu: r.mu,
        theta,
        phi,
        k0: d.k * r.mu,
        lambda_plus: r.lambda_plus,
        w: r.w,
        w_bar: r.w_bar,
        adot: r.adot,
        bdot: r.bdot,
        mudot: r.mudot,
    }
}

pub fn geometry_rates(model: &ScaleFactorModel, d: &ModeDirection, t: f64) -> Result<GeometryRates> {
    let ms = evaluate_metric(model, t)?;
    let r = mode_rates(&ms, d);
    if !(r.b > 0.0) {
        return Err(Error::Numerical {
            t,
            reason: "coefficient b vanished".into(),
            detail: format!("A = {:?}", ms.a),
        });
    }
    Ok(GeometryRates {
        w: r.w,
        w_bar: r.w_bar,
        lambda_plus: r.lambda_plus,
        adot: r.adot,
        bdot: r.bdot,
        mudot: r.mudot,
    })
}

/// Residuals of the exact algebraic identities at one `(metric, direction)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `|a² − bc + μ²| / μ²`.
    pub mu_identity: f64,
    /// `|sin²φ + cos²φ − 1|` with the transition-formula `φ`.
    pub phi_norm: f64,
    /// `|sin²θ + cos²θ − 1|` with the transition-formula `θ`.
    pub theta_norm: f64,
    /// Largest difference between transition-formula and direct sines/cosines.
    pub angle_agreement: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.mu_identity
            .max(self.phi_norm)
            .max(self.theta_norm)
            .max(self.angle_agreement)
    }
}

pub fn check_identities(ms: &MetricState, d: &ModeDirection) -> IdentityReport {
    let geo = geometry_coefficients(ms, d);
    let [a1, a2, a3] = ms.a;
    let mu = geo.mu;
    let mu_identity = (geo.a * geo.a - geo.b * geo.c + mu * mu).abs() / (mu * mu);

    // (−g)^{1/4} = (√−g)^{1/2}
    let g14 = ms.sqrt_minus_g.sqrt();
    let sb = geo.b.sqrt();
    let sin_phi = a1 * d.sin_xi / (g14 * sb);
    let cos_phi = a2 * d.cos_xi / (g14 * sb);
    let sin_theta = a3 * sb * d.sin_delta / (mu * g14);
    let cos_theta = d.cos_delta / (mu * a3);

    let phi_norm = (sin_phi * sin_phi + cos_phi * cos_phi - 1.0).abs();
    let theta_norm = (sin_theta * sin_theta + cos_theta * cos_theta - 1.0).abs();
    let angle_agreement = [
        sin_phi - geo.phi.sin(),
        cos_phi - geo.phi.cos(),
        sin_theta - geo.theta.sin(),
        cos_theta - geo.theta.cos(),
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));

    IdentityReport {
        mu_identity,
        phi_norm,
        theta_norm,
        angle_agreement,
    }
}

/// Cartesian amplitudes from the transverse pair `(S_δ, S_ξ)`.
pub fn reconstruct_cartesian(
    s_delta: Complex64,
    s_xi: Complex64,
    delta: f64,
    xi: f64,
) -> [Complex64; 3] {
    let (sd, cd) = delta.sin_cos();
    let (sx, cx) = xi.sin_cos();
    [
        s_delta * (cx * cd) - s_xi * sx,
        s_delta * (sx * cd) + s_xi * cx,
        -s_delta * sd,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn static_state(a: [f64; 3]) -> MetricState {
        MetricState::from_rates(1.0, a, [0.0; 3])
    }

    #[test]
    fn isotropic_coefficients() {
        let ms = static_state([2.5; 3]);
        for &(delta, xi) in &[(0.3, 0.1), (1.2, 4.0), (2.9, 6.0)] {
            let d = ModeDirection::new(1.0, delta, xi).unwrap();
            let g = geometry_coefficients(&ms, &d);
            assert_eq!(g.a, 0.0);
            assert_relative_eq!(g.b, 1.0 / 2.5, max_relative = 1e-15);
            assert_relative_eq!(g.mu, 1.0 / 2.5, max_relative = 1e-15);
            assert_relative_eq!(g.theta, delta, epsilon = 1e-14);
            assert_relative_eq!(g.phi, xi, epsilon = 1e-14);
        }
    }

    #[test]
    fn axis_aligned_anisotropic() {
        let ms = static_state([2.0, 3.0, 4.0]);
        let d = ModeDirection::new(1.0, 0.0, 0.0).unwrap();
        let g = geometry_coefficients(&ms, &d);
        assert_eq!(g.a, 0.0);
        assert_relative_eq!(g.b, 0.375, max_relative = 1e-15);
        assert_relative_eq!(g.c, 4.0 / 24.0, max_relative = 1e-15);
        assert_relative_eq!(g.mu, 0.25, max_relative = 1e-15);
        assert_relative_eq!(g.a * g.a - g.b * g.c, -0.0625, max_relative = 1e-15);
        assert_eq!(g.k0, g.mu);
    }

    #[test]
    fn rates_vanish_without_expansion_or_anisotropy() {
        let iso = ScaleFactorModel::isotropic_power_law(1.3, 0.7, 1.0).unwrap();
        let d = ModeDirection::new(2.0, 0.7, 0.3).unwrap();
        let r = geometry_rates(&iso, &d, 3.0).unwrap();
        assert!(r.w.abs() < 1e-15);
        assert_eq!(r.w_bar, 0.0);
        assert_eq!(r.lambda_plus, 0.0);

        let ms = static_state([2.0, 3.0, 4.0]);
        let r = mode_rates(&ms, &d);
        assert_eq!((r.w, r.w_bar, r.lambda_plus), (0.0, 0.0, 0.0));
    }

    #[test]
    fn kasner_rates_by_hand() {
        let m = ScaleFactorModel::kasner([2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0], 1.0).unwrap();
        let d = ModeDirection::new(1.0, PI / 2.0, 0.0).unwrap();
        let ms = evaluate_metric(&m, 1.0).unwrap();
        let g = geometry_coefficients(&ms, &d);
        assert_relative_eq!(g.mu, 1.0, max_relative = 1e-15);
        assert_relative_eq!(g.mudot, -2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(g.bdot / g.b, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(g.w, -1.0, max_relative = 1e-14);
        assert_relative_eq!(g.w_bar, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn identities_exact_cases() {
        let ms = static_state([1.7; 3]);
        let d = ModeDirection::new(1.0, 0.7, 0.3).unwrap();
        assert!(check_identities(&ms, &d).max() <= 1e-12);
        let ms = static_state([2.0, 3.0, 4.0]);
        let d = ModeDirection::new(1.0, PI / 3.0, PI / 5.0).unwrap();
        assert!(check_identities(&ms, &d).max() <= 1e-12);
        // Poles and the southern hemisphere use the same conventions.
        for delta in [0.0, PI, 2.5] {
            let d = ModeDirection::new(1.0, delta, 4.0).unwrap();
            assert!(check_identities(&ms, &d).max() <= 1e-12, "delta = {delta}");
        }
    }

    #[test]
    fn mirrored_direction() {
        let d = ModeDirection::new(1.0, PI / 3.0, 1.5 * PI).unwrap().mirrored();
        assert_relative_eq!(d.delta(), 2.0 * PI / 3.0);
        assert_relative_eq!(d.xi(), 0.5 * PI, epsilon = 1e-15);
        let ms = static_state([2.0, 3.0, 4.0]);
        let d = ModeDirection::new(1.0, 0.4, 1.1).unwrap();
        let (g, gm) = (
            geometry_coefficients(&ms, &d),
            geometry_coefficients(&ms, &d.mirrored()),
        );
        assert_relative_eq!(gm.a, -g.a, max_relative = 1e-14);
        assert_relative_eq!(gm.b, g.b, max_relative = 1e-14);
        assert_relative_eq!(gm.mu, g.mu, max_relative = 1e-14);
    }

    #[test]
    fn cartesian_reconstruction() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let s = reconstruct_cartesian(one, zero, 0.0, 0.0);
        assert_eq!(s, [one, zero, -zero]);
        let s = reconstruct_cartesian(zero, one, PI / 2.0, PI / 2.0);
        assert!((s[0] + one).norm() < 1e-15);
        assert!(s[1].norm() < 1e-15 && s[2].norm() < 1e-15);
    }

    #[test]
    fn direction_validation() {
        assert!(ModeDirection::new(0.0, 0.1, 0.1).is_err());
        assert!(ModeDirection::new(1.0, -0.1, 0.1).is_err());
        assert!(ModeDirection::new(1.0, 0.1, TAU).is_err());
        assert!(Helicity::from_sign(0).is_err());
    }
}
