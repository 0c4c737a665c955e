//! Drivers for `mode`, `emt` and `spectrum`.

use amx_core::{
    conservation_residual, evaluate_metric, evolve_bogoliubov, evolve_first_order, evolve_second_order, evolve_suv,
    geometry_coefficients, integrate_emt, spectral_emt, suv_from_bogoliubov, Helicity, Method, ModeCache,
    ModeDirection, ModeProblem, QuadratureGrid, ScaleFactorModel, StressTensorSample,
};

use crate::config::RunConfig;
use crate::{CliError, CsvText};

/// Single-mode time series.
///
/// `suv` and `bogoliubov` emit `t,S,U,V,invariant_residual`, where the
/// residual is the connection formula or `|Φ|² − |Ψ|² − 1` respectively.
/// `second_order` and `first_order` emit the complex mode function and its
/// derivative with the drift of the conserved normalization.
pub fn run_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let model = cfg.model()?;
    let (mode, r, method) = cfg.mode_direction()?;
    let times = cfg.output_times();
    let p = ModeProblem::new(&model, mode, r, cfg.span.t0, cfg.span.t1, cfg.mode_control()?);
    let out = match method {
        Method::Suv => {
            let sol = evolve_suv(&p, &times)?;
            let mut csv = CsvText::new(&["t", "S", "U", "V", "invariant_residual"]);
            for (t, s) in times.iter().zip(sol.polarization().unwrap_or_default()) {
                csv.row(&[*t, s.s, s.u, s.v, s.connection_residual()]);
            }
            csv
        }
        Method::Bogoliubov => {
            let sol = evolve_bogoliubov(&p, &times)?;
            let mut csv = CsvText::new(&["t", "S", "U", "V", "invariant_residual"]);
            for (t, pair) in times.iter().zip(sol.bogoliubov().unwrap_or_default()) {
                let s = suv_from_bogoliubov(pair);
                csv.row(&[*t, s.s, s.u, s.v, pair.normalization_residual()]);
            }
            csv
        }
        Method::SecondOrder | Method::FirstOrder => {
            let sol = if method == Method::SecondOrder {
                evolve_second_order(&p, None, &times)?
            } else {
                evolve_first_order(&p, None, &times)?
            };
            let field = sol.field().unwrap_or_default();
            let n0 = match field.first() {
                Some(f) => f.normalization_at(&model, &mode, times[0])?,
                None => 0.0,
            };
            let mut csv = CsvText::new(&["t", "re_y", "im_y", "re_ydot", "im_ydot", "invariant_residual"]);
            for (t, f) in times.iter().zip(field) {
                let n = f.normalization_at(&model, &mode, *t)?;
                csv.row(&[*t, f.y.re, f.y.im, f.ydot.re, f.ydot.im, n - n0]);
            }
            csv
        }
    };
    Ok(out.finish())
}

/// Coarse and refined `T⁰₀(t₁)` from a self-convergence run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineReport {
    pub coarse: f64,
    pub fine: f64,
    /// `|fine − coarse| / |fine|`, or the absolute change when `fine = 0`.
    pub rel_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmtRun {
    pub csv: String,
    pub samples: Vec<StressTensorSample>,
    pub refine: Option<RefineReport>,
}

fn check_budget(cfg: &RunConfig, grid: &QuadratureGrid, n_times: usize) -> Result<(), CliError> {
    let need = ModeCache::bytes_required(grid, n_times) as f64 / (1024.0 * 1024.0);
    if need > cfg.emt.memory_budget_mb {
        return Err(CliError::Config(format!(
            "mode cache needs {need:.1} MiB for {} nodes x {n_times} times, budget is {} MiB",
            grid.len(),
            cfg.emt.memory_budget_mb
        )));
    }
    Ok(())
}

fn evolve_grid(cfg: &RunConfig, model: &ScaleFactorModel, grid: &QuadratureGrid, times: &[f64]) -> Result<ModeCache, CliError> {
    check_budget(cfg, grid, times.len())?;
    log::info!("evolving {} modes x 2 helicities to t = {}", grid.len(), times.last().copied().unwrap_or(cfg.span.t0));
    Ok(ModeCache::evolve(model, grid, cfg.span.t0, cfg.emt_control()?, times)?)
}

/// Integrated tensor timeline with conservation residual and scale.
pub fn run_emt(cfg: &RunConfig, refine: bool) -> Result<EmtRun, CliError> {
    let model = cfg.model()?;
    let times = cfg.output_times();
    if times.len() < 3 {
        return Err(CliError::Config(format!(
            "emt needs at least 3 output times for the conservation residual, got {}",
            times.len()
        )));
    }
    let grid = cfg.grid()?;
    if refine {
        check_budget(cfg, &cfg.refined_grid()?, 1)?;
    }
    let cache = evolve_grid(cfg, &model, &grid, &times)?;
    let samples = times
        .iter()
        .map(|&t| integrate_emt(t, &model, &grid, &cache, cfg.emt.volume, cfg.t33_form()))
        .collect::<Result<Vec<_>, _>>()?;
    drop(cache);
    let conservation = conservation_residual(&samples, &model)?;
    let tail = samples.iter().map(|s| s.uv_tail_fraction.abs()).fold(0.0, f64::max);
    if tail > 0.5 {
        log::warn!("top k octave carries up to {:.0}% of T00; results depend on k_max", 100.0 * tail);
    }
    let mut csv = CsvText::new(&[
        "t",
        "T00",
        "T11",
        "T22",
        "T33",
        "T12",
        "T13",
        "T23",
        "conservation_residual",
        "conservation_scale",
        "uv_tail_fraction",
    ]);
    for (s, c) in samples.iter().zip(&conservation) {
        csv.row(&[s.t, s.t00, s.t11, s.t22, s.t33, s.t12, s.t13, s.t23, c.residual, c.scale, s.uv_tail_fraction]);
    }
    let max_res = conservation.iter().map(|c| c.residual.abs()).fold(0.0, f64::max);
    let max_scale = conservation.iter().map(|c| c.scale).fold(0.0, f64::max);
    log::info!("conservation residual: max |r| = {max_res:e}, max scale = {max_scale:e}");

    let refine = if refine {
        let fine_grid = cfg.refined_grid()?;
        let t1 = cfg.span.t1;
        let fine_cache = evolve_grid(cfg, &model, &fine_grid, &[t1])?;
        let fine = integrate_emt(t1, &model, &fine_grid, &fine_cache, cfg.emt.volume, cfg.t33_form())?.t00;
        let coarse = samples.last().map(|s| s.t00).unwrap_or(0.0);
        let rel_delta = if fine != 0.0 {
            (fine - coarse).abs() / fine.abs()
        } else {
            (fine - coarse).abs()
        };
        log::info!("refine: T00(t1) coarse = {coarse:e}, refined = {fine:e}, relative change = {rel_delta:e}");
        Some(RefineReport { coarse, fine, rel_delta })
    } else {
        None
    };
    Ok(EmtRun {
        csv: csv.finish(),
        samples,
        refine,
    })
}

/// Helicity-summed spectral tensor at every grid node at time `t`
/// (default `t₁`), `k` fastest, then `δ`, then `ξ`.
pub fn run_spectrum(cfg: &RunConfig, t: Option<f64>) -> Result<String, CliError> {
    let model = cfg.model()?;
    let t = t.unwrap_or(cfg.span.t1);
    if !(t >= cfg.span.t0 && t <= cfg.span.t1) {
        return Err(CliError::Config(format!(
            "spectrum time {t} is outside the span [{}, {}]",
            cfg.span.t0, cfg.span.t1
        )));
    }
    let grid = cfg.grid()?;
    let cache = evolve_grid(cfg, &model, &grid, &[t])?;
    let ms = evaluate_metric(&model, t)?;
    let mut csv = CsvText::new(&["k", "delta", "xi", "T00", "T11", "T22", "T33", "T12", "T13", "T23", "trace"]);
    for node in 0..grid.len() {
        let (ik, id, ix) = grid.node(node);
        let mode = ModeDirection::new(grid.k[ik], grid.delta[id], grid.xi[ix])?;
        let geo = geometry_coefficients(&ms, &mode);
        let states = [Helicity::Plus, Helicity::Minus].map(|r| cache.get(node, r, 0).expect("cache covers the grid"));
        let d = spectral_emt(&states, geo.theta, geo.phi, &mode, &ms, cfg.emt.volume, cfg.t33_form());
        csv.row(&[d.k, d.delta, d.xi, d.t00, d.t11, d.t22, d.t33, d.t12, d.t13, d.t23, d.trace()]);
    }
    Ok(csv.finish())
}
