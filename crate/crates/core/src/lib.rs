//! Vortex filament dynamics on a slanted plane.
//!
//! The tangent field `v = x_s` of a filament on `[0, 1]` evolves by
//! `v_t = v × v_ss` with `v(0) = a`, `v(1) = e3`. The crate provides the
//! parabolic regularization `v_t = v × v_ss + ε v_ss + ε|v_s|² v`, the
//! corner compatibility algebra and datum corrector, semi-implicit and
//! implicit-midpoint time stepping, and diagnostics (conserved
//! functionals, boundary identities, Hasimoto transform).

pub mod banded;
pub mod compat;
pub mod datum;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod jet;
pub mod snapshot;

pub use compat::{
    check_compat, check_compat_jets, correct_datum, eval_p, eval_q, BoundaryJet, CompatReport,
    CorrectorOptions, Side, M_MAX,
};
pub use datum::{builtin, e3, Datum};
pub use diagnostics::{
    boundary_identity_check, hasimoto, invariants, nls_residual, HasimotoProfile, InvariantEntry,
    InvariantSeries, NlsResidual,
};
pub use dynamics::{
    epsilon_sweep, evolve, reconstruct_position, rhs_lie, rhs_regularized, step_midpoint_sphere,
    step_semi_implicit, FilamentState, Renormalize, Scheme, SolverConfig, SweepReport,
};
pub use error::{FilamentError, Result};
pub use grid::{GridSpec, Quadrature, UnitVecField, Vec3, VecField};
pub use jet::{Jet3, ScalarJet};
