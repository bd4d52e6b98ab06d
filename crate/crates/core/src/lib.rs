//! Spectral solvers for the coupled BPS vortex equations of a product
//! Abelian Higgs theory on a flat torus.
//!
//! Two systems are covered:
//!
//! * the Tong--Wong multi-vortex system, solved by minimizing a strictly
//!   convex functional ([`tw`]);
//! * the extended vortex/anti-vortex system, solved by damped Newton or by
//!   a mean-constrained fixed-point iteration ([`vav`]).
//!
//! [`diagnostics`] reconstructs magnetic fields and checks the quantized
//! integrals, fluxes and topological energies of a solution.

pub mod diagnostics;
mod krylov;
pub mod sources;
pub mod surface;
pub mod tw;
pub mod vav;

pub use sources::{
    background, default_sigma, mollified_delta, BackgroundSet, PointSource, SourceError,
    VortexConfiguration, VortexCounts, DEFAULT_KAPPA,
};
pub use surface::{ScalarField, SurfaceError, TorusGeometry};

/// Exponent arguments above this are clamped and flagged.
pub const EXP_CLAMP: f64 = 500.0;
