//! The `validate` suite: identity sweeps, oracle comparisons and vacuum
//! checks, merged into one JSON report sorted by check identifier.

use std::f64::consts::{PI, TAU};

use amx_core::oracles::{
    cross_check_evolutions, identity_sweep, isotropic_solution, rates_fd_check, suv_order_ratios, suv_reference,
    Deviation, S_FLOOR,
};
use amx_core::{
    conservation_residual, evolve_bogoliubov, evolve_second_order, evolve_suv, integrate_emt, reality_convention_check,
    spectral_emt, FieldSample, Helicity, MetricState, ModeCache, ModeDirection, ModeProblem, OracleReport,
    PolarizationState, QuadratureGrid, ScaleFactorModel, StepControl, T33Form, Tolerances,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, DEFAULT_CHECK_TOLERANCE};
use crate::CliError;

type CheckResult = Result<Vec<OracleReport>, CliError>;

/// Built-in thresholds for checks that do not use the generic default.
fn builtin_tolerance(check: &str) -> f64 {
    match check {
        "geometry.mu_identity" | "geometry.transition_angles" | "geometry.transversality" => 1e-10,
        "modes.connection_formula" | "modes.bogoliubov_normalization" => 1e-9,
        "modes.reality_convention" => 1e-7,
        "modes.helicity_degenerate" => 1e-10,
        "modes.vacuum_isotropic" | "modes.vacuum_static_anisotropic" => 1e-12,
        "emt.vacuum_isotropic" | "emt.vacuum_static_anisotropic" | "emt.trace_reconciled" => 1e-12,
        "emt.conservation_isotropic" | "emt.conservation_static_anisotropic" => 1e-10,
        // |ratio/16 − 1| ≤ 1/4 is the band [12, 20].
        "oracles.rk4_order" => 0.25,
        _ => DEFAULT_CHECK_TOLERANCE,
    }
}

fn kasner_benchmark() -> Result<ScaleFactorModel, CliError> {
    Ok(ScaleFactorModel::kasner([2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0], 1.0)?)
}

struct Suite<'a> {
    cfg: &'a RunConfig,
    model: ScaleFactorModel,
    mode: ModeDirection,
    helicity: Helicity,
    control: StepControl,
}

impl Suite<'_> {
    fn tol(&self, check: &str) -> f64 {
        self.cfg.check_tolerance(check, builtin_tolerance(check))
    }

    fn report(&self, check: &str, dev: &Deviation) -> OracleReport {
        dev.report(check, self.tol(check))
    }

    fn absolute(&self, check: &str, max_abs: f64, samples: usize) -> OracleReport {
        OracleReport::new(check, max_abs, max_abs, samples, self.tol(check))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        rng
    }

    fn times(&self) -> Vec<f64> {
        self.cfg.output_times()
    }

    fn identities(&self) -> CheckResult {
        let tol = self.tol("geometry.mu_identity");
        let mut out = identity_sweep(&mut self.rng(1), 10_000, tol);
        for r in &mut out {
            r.tolerance = self.tol(&r.check);
            r.pass = r.max_rel <= r.tolerance;
        }
        Ok(out)
    }

    fn rates(&self) -> CheckResult {
        let check = "geometry.rates_vs_finite_difference";
        let mut rng = self.rng(2);
        let (t0, t1) = (self.cfg.span.t0, self.cfg.span.t1);
        let mut worst = OracleReport::new(check, 0.0, 0.0, 0, self.tol(check));
        for _ in 0..50 {
            let mode = ModeDirection::new(1.0, rng.gen_range(0.05..PI - 0.05), rng.gen_range(0.0..TAU))?;
            // Keep t ± h inside the domain.
            let t = rng.gen_range(t0 + 0.01 * (t1 - t0)..t1 - 0.01 * (t1 - t0));
            let r = rates_fd_check(&self.model, &mode, t, self.tol(check))?;
            if !(r.max_rel <= worst.max_rel) {
                worst.max_abs = r.max_abs;
                worst.max_rel = r.max_rel;
            }
        }
        worst.samples = 50;
        worst.pass = worst.max_rel <= worst.tolerance;
        Ok(vec![worst])
    }

    fn connection(&self) -> CheckResult {
        let p = ModeProblem::new(&self.model, self.mode, self.helicity, self.cfg.span.t0, self.cfg.span.t1, self.control);
        let times = self.times();
        let sol = evolve_suv(&p, &times)?;
        let n = sol.stats.steps + times.len();
        let mut out = vec![self.absolute("modes.connection_formula", sol.max_residual, n)];

        let s_end = sol.polarization().and_then(|s| s.last()).map(|s| s.s).unwrap_or(0.0);
        let fine = suv_reference(&self.model, &self.mode, self.helicity, p.t0, p.t1, 20_000)?;
        let finer = suv_reference(&self.model, &self.mode, self.helicity, p.t0, p.t1, 40_000)?;
        let reference = (16.0 * finer.s - fine.s) / 15.0;
        let mut d = Deviation::default();
        d.push(s_end, reference);
        out.push(self.report("modes.suv_vs_reference", &d));
        Ok(out)
    }

    fn cross(&self) -> CheckResult {
        let tol = self.tol("modes.bogoliubov_vs_suv");
        let StepControl::Adaptive(tolerances) = self.control else {
            unreachable!("validation runs use adaptive control")
        };
        let mut reps = cross_check_evolutions(
            &self.model,
            self.mode,
            self.helicity,
            self.cfg.span.t0,
            self.cfg.span.t1,
            tolerances,
            self.cfg.span.outputs.max(11),
            tol,
        )?;
        for r in reps.iter_mut().filter(|r| !r.is_diagnostic()) {
            r.tolerance = self.tol(&r.check);
            r.pass = r.max_rel <= r.tolerance;
        }
        let p = ModeProblem::new(&self.model, self.mode, self.helicity, self.cfg.span.t0, self.cfg.span.t1, self.control);
        let times = self.times();
        let bog = evolve_bogoliubov(&p, &times)?;
        reps.push(self.absolute("modes.bogoliubov_normalization", bog.max_residual, bog.stats.steps + times.len()));
        Ok(reps)
    }

    fn closed_form(&self) -> CheckResult {
        let model = ScaleFactorModel::isotropic_power_law(1.0, 1.0, 1.0)?;
        let times: Vec<f64> = (0..=90).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut d = Deviation::default();
        for k in [0.5, 1.0, 5.0] {
            let mode = ModeDirection::new(k, 0.7, 0.3)?;
            let init = FieldSample {
                y: Complex64::new(1.0, 0.25),
                ydot: Complex64::new(0.3, -0.8),
            };
            // Match C₁, C₂ to the initial data at R(1) = 1.
            let q = Complex64::i() * init.ydot / k;
            let (c1, c2) = ((init.y + q) / 2.0, (init.y - q) / 2.0);
            let control = StepControl::Adaptive(Tolerances::new(1e-11, 1e-13)?);
            let p = ModeProblem::new(&model, mode, Helicity::Plus, 1.0, 10.0, control);
            let sol = evolve_second_order(&p, Some(init), &times)?;
            let mut dk = Deviation::default();
            for (t, f) in times.iter().zip(sol.field().unwrap_or_default()) {
                let (y, _) = isotropic_solution(k, &model, c1, c2, 1.0, *t)?;
                dk.push(f.y.re, y.re);
                dk.push(f.y.im, y.im);
            }
            if dk.max_rel() > d.max_rel() || d.samples == 0 {
                d = Deviation {
                    samples: d.samples + dk.samples,
                    ..dk
                };
            } else {
                d.samples += dk.samples;
            }
        }
        Ok(vec![self.report("modes.isotropic_closed_form", &d)])
    }

    fn vacuum_models(&self) -> Result<[(&'static str, ScaleFactorModel); 2], CliError> {
        let (t0, t1) = (self.cfg.span.t0, self.cfg.span.t1);
        let pad = t1 - t0;
        let times = vec![t0 - pad, t0, t1, t1 + pad];
        let fixed = vec![[1.0, 2.0, 3.0]; 4];
        Ok([
            ("isotropic", ScaleFactorModel::isotropic_power_law(2.0, 0.5, t0.max(1e-3))?),
            ("static_anisotropic", ScaleFactorModel::tabulated(times, fixed)?),
        ])
    }

    fn vacuum_modes(&self) -> CheckResult {
        let mut rng = self.rng(3);
        let times = self.times();
        let mut out = Vec::new();
        for (name, model) in self.vacuum_models()? {
            if !model.contains(self.cfg.span.t0) {
                continue;
            }
            let mut worst = 0.0f64;
            let mut n = 0;
            for _ in 0..20 {
                let mode = ModeDirection::new(rng.gen_range(0.1..5.0), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU))?;
                for r in Helicity::BOTH {
                    let p = ModeProblem::new(&model, mode, r, self.cfg.span.t0, self.cfg.span.t1, self.control);
                    for s in evolve_suv(&p, &times)?.polarization().unwrap_or_default() {
                        worst = worst.max(s.s.abs()).max(s.u.abs()).max(s.v.abs());
                        n += 1;
                    }
                }
            }
            out.push(self.absolute(&format!("modes.vacuum_{name}"), worst, n));
        }
        Ok(out)
    }

    fn vacuum_emt(&self) -> CheckResult {
        let grid = self.cfg.grid()?;
        let times = self.times();
        let control = self.cfg.emt_control()?;
        let mut out = Vec::new();
        for (name, model) in self.vacuum_models()? {
            let cache = ModeCache::evolve(&model, &grid, self.cfg.span.t0, control, &times)?;
            let samples = times
                .iter()
                .map(|&t| integrate_emt(t, &model, &grid, &cache, self.cfg.emt.volume, T33Form::Reconciled))
                .collect::<Result<Vec<_>, _>>()?;
            let worst = samples
                .iter()
                .flat_map(|s| [s.t00, s.t11, s.t22, s.t33, s.t12, s.t13, s.t23])
                .fold(0.0f64, |m, x| m.max(x.abs()));
            out.push(self.absolute(&format!("emt.vacuum_{name}"), worst, samples.len() * 7));
            if samples.len() >= 3 {
                let res = conservation_residual(&samples, &model)?;
                let worst = res.iter().fold(0.0f64, |m, c| m.max(c.residual.abs()));
                out.push(self.absolute(&format!("emt.conservation_{name}"), worst, res.len()));
            }
        }
        Ok(out)
    }

    fn conservation_diagnostic(&self) -> CheckResult {
        if self.model.is_isotropic() || self.cfg.span.outputs < 3 {
            return Ok(vec![]);
        }
        let grid = QuadratureGrid::new(16, self.cfg.grid.k_min, self.cfg.grid.k_max, 8, 8)?;
        let times = self.times();
        let cache = ModeCache::evolve(&self.model, &grid, self.cfg.span.t0, self.cfg.emt_control()?, &times)?;
        let samples = times
            .iter()
            .map(|&t| integrate_emt(t, &self.model, &grid, &cache, self.cfg.emt.volume, T33Form::Reconciled))
            .collect::<Result<Vec<_>, _>>()?;
        let res = conservation_residual(&samples, &self.model)?;
        let max_abs = res.iter().fold(0.0f64, |m, c| m.max(c.residual.abs()));
        let scale = res.iter().fold(0.0f64, |m, c| m.max(c.scale));
        let rel = if scale > 0.0 { max_abs / scale } else { max_abs };
        Ok(vec![OracleReport::diagnostic("emt.conservation_anisotropic", max_abs, rel, res.len())])
    }

    fn trace(&self) -> CheckResult {
        let mut rng = self.rng(4);
        let mut worst = [0.0f64; 2];
        let n = 1000;
        for _ in 0..n {
            let a = [rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0)];
            let ms = MetricState::from_rates(1.0, a, [0.0; 3]);
            let mode = ModeDirection::new(rng.gen_range(0.1..5.0), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU))?;
            let mut state = || PolarizationState::new(rng.gen_range(0.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let states = [state(), state()];
            let theta = rng.gen_range(0.0..PI);
            let phi = rng.gen_range(0.0..TAU);
            for (slot, form) in [T33Form::Reconciled, T33Form::Printed].into_iter().enumerate() {
                let d = spectral_emt(&states, theta, phi, &mode, &ms, 1.0, form);
                let scale = [d.t00, d.t11, d.t22, d.t33].iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if scale > 0.0 {
                    worst[slot] = worst[slot].max(d.trace().abs() / scale);
                }
            }
        }
        Ok(vec![
            self.absolute("emt.trace_reconciled", worst[0], n),
            OracleReport::diagnostic("emt.trace_printed", worst[1], worst[1], n),
        ])
    }

    fn order(&self) -> CheckResult {
        let check = "oracles.rk4_order";
        // Always the Kasner benchmark: vacuum backgrounds have no error to halve.
        let model = kasner_benchmark()?;
        let mode = ModeDirection::new(1.0, PI / 3.0, PI / 5.0)?;
        let ratios = suv_order_ratios(&model, &mode, Helicity::Plus, 1.0, 10.0, 100, 3)?;
        let dev = ratios
            .iter()
            .map(|r| (r - 16.0).abs())
            .fold(0.0f64, |m, d| if d.is_nan() || d > m { d } else { m });
        log::info!("fixed-step RK4 halving ratios: {ratios:?}");
        Ok(vec![OracleReport::new(check, dev, dev / 16.0, ratios.len(), self.tol(check))])
    }

    fn reality(&self) -> CheckResult {
        let mut rng = self.rng(5);
        let times = self.times();
        let mut worst = Deviation::default();
        let n = 50;
        for _ in 0..n {
            let mode = ModeDirection::new(rng.gen_range(0.2..3.0), rng.gen_range(0.05..PI - 0.05), rng.gen_range(0.0..PI))?;
            let r = if rng.gen_bool(0.5) { Helicity::Plus } else { Helicity::Minus };
            let init = FieldSample::vacuum(&self.model, &mode, self.cfg.span.t0)?;
            let direct = evolve_second_order(
                &ModeProblem::new(&self.model, mode, r, self.cfg.span.t0, self.cfg.span.t1, self.control),
                Some(init),
                &times,
            )?;
            let mirrored = evolve_second_order(
                &ModeProblem::new(&self.model, mode.mirrored(), r.flip(), self.cfg.span.t0, self.cfg.span.t1, self.control),
                Some(init),
                &times,
            )?;
            let res = reality_convention_check(&mirrored, &direct)?;
            worst.max_abs = worst.max_abs.max(res);
            worst.samples += times.len();
        }
        Ok(vec![OracleReport::new(
            "modes.reality_convention",
            worst.max_abs,
            worst.max_abs,
            worst.samples,
            self.tol("modes.reality_convention"),
        )])
    }

    /// `r = −1` against `r = +1` with `V` negated on the configured mode
    /// (diagnostic), and exact helicity degeneracy when `W̄ ≡ 0` (hard).
    fn helicity(&self) -> CheckResult {
        let times = self.times();
        let (t0, t1) = (self.cfg.span.t0, self.cfg.span.t1);
        let run = |model: &ScaleFactorModel, r: Helicity| -> Result<Vec<PolarizationState>, CliError> {
            let sol = evolve_suv(&ModeProblem::new(model, self.mode, r, t0, t1, self.control), &times)?;
            Ok(sol.polarization().unwrap_or_default().to_vec())
        };
        let compare = |a: &[PolarizationState], b: &[PolarizationState], flip_v: bool| {
            let mut d = Deviation::with_floor(S_FLOOR);
            let sign = if flip_v { -1.0 } else { 1.0 };
            for (x, y) in a.iter().zip(b) {
                d.push(x.s, y.s);
                d.push(x.u, y.u);
                d.push(x.v, sign * y.v);
            }
            d
        };
        let plus = run(&self.model, Helicity::Plus)?;
        let minus = run(&self.model, Helicity::Minus)?;
        let anti = compare(&minus, &plus, true);
        let mut out = vec![OracleReport::diagnostic(
            "modes.helicity_antisymmetry",
            anti.max_abs,
            anti.max_rel(),
            anti.samples,
        )];
        // H₁ = H₃ makes W̄ vanish; the helicity then drops out of the system.
        let degenerate = ScaleFactorModel::kasner([2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0], 1.0)?;
        if degenerate.contains(t0) {
            let d = compare(&run(&degenerate, Helicity::Minus)?, &run(&degenerate, Helicity::Plus)?, false);
            out.push(self.report("modes.helicity_degenerate", &d));
        }
        Ok(out)
    }
}

/// Runs every check. Returns the JSON report and whether all hard checks
/// passed. Checks run in parallel; the report is sorted by identifier.
pub fn run_validate(cfg: &RunConfig) -> Result<(String, Vec<OracleReport>), CliError> {
    let model = cfg.model()?;
    let (mode, helicity, _) = cfg.mode_direction()?;
    let suite = Suite {
        cfg,
        model,
        mode,
        helicity,
        control: cfg.mode_control()?,
    };
    type Check<'a> = fn(&Suite<'a>) -> CheckResult;
    let checks: Vec<Check> = vec![
        Suite::identities,
        Suite::rates,
        Suite::connection,
        Suite::cross,
        Suite::closed_form,
        Suite::vacuum_modes,
        Suite::vacuum_emt,
        Suite::conservation_diagnostic,
        Suite::trace,
        Suite::order,
        Suite::reality,
        Suite::helicity,
    ];
    let results: Vec<CheckResult> = checks.par_iter().map(|c| c(&suite)).collect();
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }
    reports.sort_by(|a, b| a.check.cmp(&b.check));
    let json = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Numerical(format!("report: {e}")))?;
    Ok((json + "\n", reports))
}

/// Hard checks that failed.
pub fn failures(reports: &[OracleReport]) -> Vec<&str> {
    reports
        .iter()
        .filter(|r| !r.is_diagnostic() && !r.pass)
        .map(|r| r.check.as_str())
        .collect()
}
