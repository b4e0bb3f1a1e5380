//! Randomized invariants for the spectral calculus and the intensity
//! measure: the Poisson solver inverts the (negated) Laplacian on the
//! mean-zero subspace for arbitrary grid data, and the plain-text measure
//! format round-trips exactly while side restrictions partition the mass.

use mfelab::field::{Field, TorusGrid};
use mfelab::measure::{Atom, IntensityMeasure, Side};
use proptest::prelude::*;

const N: usize = 32;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Applying the negated Laplacian and then the Poisson solver returns
    /// the input minus its mean, for any sample values (not just smooth
    /// ones): both operators are diagonal in the same discrete basis.
    #[test]
    fn poisson_inverts_laplacian_up_to_mean(
        values in prop::collection::vec(-10.0f64..10.0, N * N),
        l in 1.0f64..20.0,
    ) {
        let grid = TorusGrid::new(l, N).unwrap();
        let v = Field::from_values(grid, values).unwrap();
        let back = v.laplacian().solve_poisson();
        let mean = v.mean();
        let scale = 1.0 + v.linf_norm();
        for (a, b) in back.values().iter().zip(v.values()) {
            prop_assert!((a - (b - mean)).abs() <= 1e-10 * scale);
        }
    }

    /// The text form uses shortest-roundtrip decimals, so parsing it back
    /// recovers the measure bit for bit, and the two side restrictions
    /// split the unit mass and the absolute moment without loss.
    #[test]
    fn measure_text_round_trips_and_sides_partition(
        raw in prop::collection::vec((-1.0f64..=1.0, 0.1f64..1.0), 1..6),
    ) {
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let atoms: Vec<Atom> = raw
            .iter()
            .map(|&(alpha, w)| Atom { alpha, weight: w / total })
            .collect();
        let measure = IntensityMeasure::new(atoms).unwrap();

        let reparsed = IntensityMeasure::from_text(&measure.to_text()).unwrap();
        prop_assert_eq!(&reparsed, &measure);

        let plus = measure.restrict(Side::Plus);
        let minus = measure.restrict(Side::Minus);
        prop_assert!((plus.mass() + minus.mass() - 1.0).abs() <= 1e-12);
        let moment_gap = plus.abs_moment() + minus.abs_moment() - measure.abs_moment();
        prop_assert!(moment_gap.abs() <= 1e-12);
        for a in &plus.atoms {
            prop_assert!(a.alpha >= 0.0);
        }
        for a in &minus.atoms {
            prop_assert!(a.alpha < 0.0);
        }
    }
}
