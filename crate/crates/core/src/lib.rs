//! Per-mode evolution of a massless vector field on a diagonal, spatially
//! homogeneous anisotropic background `ds² = dt² − Σ Aᵢ²(t) dxᵢ²`, and
//! assembly of the resulting energy-momentum tensor.
//!
//! The crate is organised bottom-up:
//!
//! * [`metric`]: scale-factor models and their Hubble rates.
//! * [`geometry`]: direction-dependent mode coefficients (`a`, `b`, `c`, `μ`,
//!   tetrad angles, and the couplings `W`, `W̄`, `Λʳ`).
//! * [`modes`]: the four equivalent per-mode formulations and their
//!   integrals of motion.
//! * [`emt`]: spectral and integrated stress tensor, trace and continuity
//!   diagnostics.
//! * [`oracles`]: closed forms and independent reference integrators used
//!   for validation.

pub mod emt;
pub mod error;
pub mod geometry;
pub mod metric;
pub mod modes;
pub mod ode;
pub mod oracles;
pub mod quadrature;

pub use emt::{
    conservation_residual, integrate_emt, polarization_overlap, spectral_emt, xy_terms,
    ConservationPoint, ModeCache, SpectralStressTensor, StressTensorSample, T33Form,
};
pub use error::{Error, Result};
pub use geometry::{
    check_identities, geometry_coefficients, geometry_rates, reconstruct_cartesian,
    GeometryCoefficients, GeometryRates, Helicity, IdentityReport, ModeDirection,
};
pub use metric::{evaluate_metric, kasner_constraint_check, MetricState, ScaleFactorModel};
pub use modes::{
    evolve_bogoliubov, evolve_first_order, evolve_second_order, evolve_suv,
    reality_convention_check, suv_derivative, suv_from_bogoliubov, BogoliubovPair, Coupling,
    FieldSample, Method, ModeProblem, ModeSolution, PolarizationState, Track,
};
pub use ode::{IntegratorStats, StepControl, Tolerances};
pub use oracles::OracleReport;
pub use quadrature::QuadratureGrid;
