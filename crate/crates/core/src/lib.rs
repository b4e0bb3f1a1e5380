//! Numerical laboratory for mean-field vortex equations on the flat
//! two-dimensional torus.
//!
//! The equations studied here couple a scalar stream-like field `v` to a
//! probability measure `P` on the intensity interval `[-1, 1]`:
//!
//! ```text
//!     -Δv = λ ∫ V(α, v) e^{αv} P(dα)  -  λ/|Ω| ∫∫ V(α, v) e^{αv} P(dα) dx
//! ```
//!
//! with `v` mean-zero on the periodic cell `Ω = [0, L)²`. Two normalizations
//! of the potential `V` are supported: one that normalizes each intensity
//! separately ([`Variant::SawadaSuzuki`]) and one with a single shared
//! normalization ([`Variant::Neri`]). Both collapse to the classical
//! mean-field equation when `P` is a unit point mass.
//!
//! The crate provides:
//!
//! * [`measure`]: atomic intensity measures, restriction to the positive and
//!   negative intensity ranges, and the sharp subset constant controlling
//!   boundedness of the two-sided free energy,
//! * [`field`]: periodic grids, spectral calculus (Laplacian, Poisson solve,
//!   gradient), quadrature, and field serialization,
//! * [`meanfield`]: right-hand sides, residuals, free energies and their
//!   gradients, vorticity densities, and structural assumption checks,
//! * [`solver`]: preconditioned descent, damped Newton, parameter
//!   continuation, and a smallest-eigenvalue probe for the linearization,
//! * [`blowup`]: concentration diagnostics (peak detection, local mass
//!   estimates, quantization identities, residual-vanishing probes),
//! * [`tmprober`]: concentration families and bisection estimates of the
//!   sharp coercivity thresholds of the free energies.

pub mod blowup;
pub mod field;
pub mod io;
pub mod meanfield;
pub mod measure;
pub mod numerics;
pub mod rng;
pub mod solver;
pub mod tmprober;

mod spectral;


pub use blowup::{BlowupReport, BubbleSpec, Peak};
pub use field::{Field, TorusGrid};
pub use meanfield::{AssumptionReport, ProblemSpec, Variant};
pub use measure::IntensityMeasure;
pub use solver::{Solution, SolverOptions};
pub use tmprober::{ProbeFamily, SweepResult};


