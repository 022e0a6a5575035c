//! Numerical machinery for steady states of activator–inhibitor systems with
//! nonlocal production terms (Gierer–Meinhardt type) on truncated boxes:
//!
//! * closed-form decay-envelope algebra and the explicit constant system
//!   gating existence ([`analytic`]),
//! * uniform grids with a second-order Helmholtz solver that preserves the
//!   discrete comparison principle ([`grid`]),
//! * kernel convolution with singular-cell quadrature, FFT acceleration and
//!   truncation-tail certification ([`convolve`]),
//! * the singular scalar solver and the coupled fixed-point iteration
//!   ([`solvers`]),
//! * numerical verification of the convolution and potential estimates the
//!   construction rests on ([`verify`]).

pub mod analytic;
pub mod convolve;
pub mod error;
pub mod grid;
mod quad;
pub mod solvers;
pub mod verify;

pub use analytic::{
    exponent_ledger, planned_constants, sigma_of, sphere_area, ConstantLedger, Envelope,
    ExponentLedger, Exponents, Kernel, KernelFamily, RatioBounds,
};
pub use convolve::{build_table, holder_diagnostic, tail_correction, ConvMethod, KernelTable};
pub use error::{Error, Result};
pub use grid::{helmholtz_solve, monotone_check, BoundaryRule, Field, Grid};
pub use solvers::{
    decoupled_map, fixed_point_solve, solve_singular, sub_super_constants, CoupledProblem,
    SingularProblem, SolveReport, SolverOptions,
};
pub use verify::{
    certify_condition_e, fit_decay, nonexistence_probe, verify_conv_exp, verify_conv_pow,
    verify_envelope_sandwich, verify_riesz_estimate, ConditionEOutcome, DecayFit, GrowthModel,
    ProbeResult, RatioReport,
};
