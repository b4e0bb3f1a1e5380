//! Shared fixtures for the benchmark suite: standard problem setups and a
//! reproducible rough field so every bench exercises the same data.

use std::f64::consts::PI;

use mfelab::field::{Field, TorusGrid};
use mfelab::meanfield::{ProblemSpec, Variant};
use mfelab::measure::IntensityMeasure;
use mfelab::rng::Xoshiro256PlusPlus;

/// 2π-periodic grid, the scale used throughout the tests.
pub fn grid(n: usize) -> TorusGrid {
    TorusGrid::new(2.0 * PI, n).unwrap()
}

/// Two-sided problem at a subcritical coupling.
pub fn standard_spec(variant: Variant, n: usize) -> ProblemSpec {
    ProblemSpec::new(variant, 18.0, IntensityMeasure::two_mass(0.4).unwrap(), grid(n)).unwrap()
}

/// Deterministic mean-zero white noise of unit amplitude.
pub fn rough_field(g: TorusGrid, seed: u64) -> Field {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut f = Field::zeros(g);
    for v in f.values_mut() {
        *v = rng.next_symmetric();
    }
    f.project_mean_zero();
    f
}
