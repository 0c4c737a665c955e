//! Background geometry: scale factors `Aᵢ(t)`, their rates and the volume
//! factor `√−g = A₁A₂A₃`.

use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Scale-factor model for the three spatial axes.
///
/// Power-law models are defined for `t > 0` only; `t = 0` is the curvature
/// singularity. Tabulated models are defined on the closed knot interval.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleFactorModel {
    /// `Aᵢ(t) = R₀ (t/t_ref)^p` on every axis.
    IsotropicPowerLaw { r0: f64, p: f64, t_ref: f64 },
    /// `Aᵢ(t) = (t/t_ref)^{pᵢ}`.
    Kasner { p: [f64; 3], t_ref: f64 },
    Tabulated(Tabulated),
}

/// Tabulated scale factors with a shape-preserving cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    times: Vec<f64>,
    values: Vec<[f64; 3]>,
    /// Knot derivatives of the interpolant, per axis.
    slopes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricState {
    pub t: f64,
    pub a: [f64; 3],
    pub adot: [f64; 3],
    /// Hubble rates `Hᵢ = Ȧᵢ/Aᵢ`.
    pub h: [f64; 3],
    pub sqrt_minus_g: f64,
}

impl MetricState {
    /// Builds the state from scale factors and Hubble rates.
    pub fn from_rates(t: f64, a: [f64; 3], h: [f64; 3]) -> Self {
        let adot = [h[0] * a[0], h[1] * a[1], h[2] * a[2]];
        MetricState {
            t,
            a,
            adot,
            h,
            sqrt_minus_g: a[0] * a[1] * a[2],
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.a[0] == self.a[1] && self.a[1] == self.a[2]
    }
}

impl ScaleFactorModel {
    pub fn isotropic_power_law(r0: f64, p: f64, t_ref: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::model(format!("R0 must be positive, got {r0}")));
        }
        if !p.is_finite() {
            return Err(Error::model("power-law exponent must be finite"));
        }
        check_t_ref(t_ref)?;
        Ok(ScaleFactorModel::IsotropicPowerLaw { r0, p, t_ref })
    }

    pub fn kasner(p: [f64; 3], t_ref: f64) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::model("Kasner exponents must be finite"));
        }
        check_t_ref(t_ref)?;
        Ok(ScaleFactorModel::Kasner { p, t_ref })
    }

    /// Tabulated model from strictly increasing knots and positive samples.
    pub fn tabulated(times: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self> {
        Tabulated::new(times, values).map(ScaleFactorModel::Tabulated)
    }

    /// Reads a tabulated model from CSV with header `t,a1,a2,a3`.
    pub fn tabulated_from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            a1: f64,
            a2: f64,
            a3: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["t", "a1", "a2", "a3"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::model(format!(
                "tabulated CSV header must be `t,a1,a2,a3`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            times.push(row.t);
            values.push([row.a1, row.a2, row.a3]);
        }
        Self::tabulated(times, values)
    }

    /// Open or closed time interval on which the model is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ScaleFactorModel::IsotropicPowerLaw { .. } | ScaleFactorModel::Kasner { .. } => {
                (0.0, f64::INFINITY)
            }
            ScaleFactorModel::Tabulated(tab) => (tab.times[0], *tab.times.last().unwrap()),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        match self {
            ScaleFactorModel::Tabulated(_) => {
                let (lo, hi) = self.domain();
                t >= lo && t <= hi
            }
            _ => t > 0.0 && t.is_finite(),
        }
    }

    /// True when all three axes share one scale factor at every time.
    pub fn is_isotropic(&self) -> bool {
        match self {
            ScaleFactorModel::IsotropicPowerLaw { .. } => true,
            ScaleFactorModel::Kasner { p, .. } => p[0] == p[1] && p[1] == p[2],
            ScaleFactorModel::Tabulated(tab) => {
                tab.values.iter().all(|a| a[0] == a[1] && a[1] == a[2])
            }
        }
    }
}

fn check_t_ref(t_ref: f64) -> Result<()> {
    if t_ref > 0.0 && t_ref.is_finite() {
        Ok(())
    } else {
        Err(Error::model(format!("t_ref must be positive, got {t_ref}")))
    }
}

/// Evaluates scale factors, their derivatives and `√−g` at `t`.
pub fn evaluate_metric(model: &ScaleFactorModel, t: f64) -> Result<MetricState> {
    if !model.contains(t) {
        let (lo, hi) = model.domain();
        return Err(Error::Domain { t, lo, hi });
    }
    match model {
        ScaleFactorModel::IsotropicPowerLaw { r0, p, t_ref } => {
            let r = r0 * (t / t_ref).powf(*p);
            let h = p / t;
            Ok(MetricState::from_rates(t, [r; 3], [h; 3]))
        }
        ScaleFactorModel::Kasner { p, t_ref } => {
            let x = t / t_ref;
            let a = [1.0 * x.powf(p[0]), 1.0 * x.powf(p[1]), 1.0 * x.powf(p[2])];
            let h = [p[0] / t, p[1] / t, p[2] / t];
            Ok(MetricState::from_rates(t, a, h))
        }
        ScaleFactorModel::Tabulated(tab) => {
            let (a, adot) = tab.eval(t);
            if a.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::model(format!(
                    "interpolated scale factor non-positive at t = {t}: {a:?}"
                )));
            }
            let h = [adot[0] / a[0], adot[1] / a[1], adot[2] / a[2]];
            Ok(MetricState {
                t,
                a,
                adot,
                h,
                sqrt_minus_g: a[0] * a[1] * a[2],
            })
        }
    }
}

/// Vacuum Kasner residuals `(Σpᵢ − 1, Σpᵢ² − 1)`. Advisory only.
pub fn kasner_constraint_check(p1: f64, p2: f64, p3: f64) -> (f64, f64) {
    (p1 + p2 + p3 - 1.0, p1 * p1 + p2 * p2 + p3 * p3 - 1.0)
}

impl Tabulated {
    pub fn new(times: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::model("knot and sample counts differ"));
        }
        if times.len() < 4 {
            return Err(Error::model(format!(
                "tabulated model needs at least 4 knots, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::model("non-finite knot time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::model("knot times must be strictly increasing"));
        }
        if values.iter().flatten().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::model("tabulated scale factors must be positive"));
        }
        let mut slopes = vec![[0.0; 3]; times.len()];
        for axis in 0..3 {
            let y: Vec<f64> = values.iter().map(|v| v[axis]).collect();
            for (i, d) in hermite_slopes(&times, &y).into_iter().enumerate() {
                slopes[i][axis] = d;
            }
        }
        Ok(Tabulated {
            times,
            values,
            slopes,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    fn eval(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let n = self.times.len();
        let i = self.times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let mut a = [0.0; 3];
        let mut adot = [0.0; 3];
        for k in 0..3 {
            let (y0, y1) = (self.values[i][k], self.values[i + 1][k]);
            let (d0, d1) = (self.slopes[i][k], self.slopes[i + 1][k]);
            a[k] = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
            adot[k] = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        }
        (a, adot)
    }
}

/// Knot slopes for a monotone-preserving cubic Hermite interpolant.
///
/// Starts from three-point (quadratic-exact) estimates and applies the
/// Fritsch–Carlson limiter: zero slope at local extrema, and rescaling
/// wherever `α² + β² > 9`. Each interval is then monotone, so positive data
/// stays positive.
fn hermite_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];

    d[0] = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
    if d[0].signum() != delta[0].signum() || delta[0] == 0.0 {
        d[0] = 0.0;
    }
    let m = n - 1;
    d[m] = ((2.0 * h[m - 1] + h[m - 2]) * delta[m - 1] - h[m - 1] * delta[m - 2])
        / (h[m - 1] + h[m - 2]);
    if d[m].signum() != delta[m - 1].signum() || delta[m - 1] == 0.0 {
        d[m] = 0.0;
    }
    for i in 1..m {
        d[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            (h[i] * delta[i - 1] + h[i - 1] * delta[i]) / (h[i - 1] + h[i])
        };
    }

    for i in 0..m {
        if delta[i] == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let alpha = d[i] / delta[i];
        let beta = d[i + 1] / delta[i];
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            d[i] = tau * alpha * delta[i];
            d[i + 1] = tau * beta * delta[i];
        }
    }
    d
}
