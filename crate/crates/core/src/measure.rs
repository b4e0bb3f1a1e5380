//! Atomic probability measures on the intensity interval [-1, 1].
//!
//! The vorticity intensity of the mean-field models lives on I = [-1, 1],
//! split into the nonnegative range I₊ = [0, 1] and the negative range
//! I₋ = [-1, 0). A measure here is a finite list of weighted atoms; the
//! continuous case is represented by quadrature (see
//! [`IntensityMeasure::uniform_quadrature`]).

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Weight tolerance: atom weights must sum to 1 within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Side-specific subset enumeration is exponential; cap the per-side atom
/// count so `best_constant_j` stays O(2^20) at worst.
pub const MAX_SUBSET_ATOMS: usize = 20;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("no admissible subset: every candidate has zero intensity moment")]
    NoAdmissibleSubset,
    #[error("too many atoms on one side for subset enumeration: {0} > {MAX_SUBSET_ATOMS}")]
    TooManyAtoms(usize),
    #[error("unreadable measure text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One weighted intensity value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub alpha: f64,
    pub weight: f64,
}

/// Which half of the intensity interval. The atom at exactly zero belongs
/// to the plus side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn contains(self, alpha: f64) -> bool {
        match self {
            Side::Plus => alpha >= 0.0,
            Side::Minus => alpha < 0.0,
        }
    }
}

/// Probability measure with finitely many atoms on [-1, 1].
///
/// Invariants enforced at construction: alphas strictly increasing (exact
/// duplicates are merged by summing weights), every weight strictly
/// positive, weights summing to 1 within [`WEIGHT_SUM_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntensityMeasure {
    atoms: Vec<Atom>,
}

impl IntensityMeasure {
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::BadParameter("measure has no atoms".into()));
        }
        for a in &atoms {
            if !a.alpha.is_finite() || !a.weight.is_finite() {
                return Err(MeasureError::BadParameter(
                    "atoms must be finite numbers".into(),
                ));
            }
            if !(-1.0..=1.0).contains(&a.alpha) {
                return Err(MeasureError::BadParameter(format!(
                    "alpha {} outside [-1, 1]",
                    a.alpha
                )));
            }
            if a.weight <= 0.0 {
                return Err(MeasureError::BadParameter(format!(
                    "weight {} is not strictly positive",
                    a.weight
                )));
            }
        }
        atoms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.alpha == a.alpha => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::BadParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms: merged })
    }

    /// Unit point mass at α = 1, the classical single-intensity model.
    pub fn dirac_one() -> Self {
        Self {
            atoms: vec![Atom { alpha: 1.0, weight: 1.0 }],
        }
    }

    /// Two-point measure t·δ₁ + (1-t)·δ₋₁. Degenerates to a single atom at
    /// t = 0 or t = 1.
    pub fn two_mass(t: f64) -> Result<Self, MeasureError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(MeasureError::BadParameter(format!("t ∉ [0,1]: {t}")));
        }
        if t == 0.0 {
            return Self::new(vec![Atom { alpha: -1.0, weight: 1.0 }]);
        }
        if t == 1.0 {
            return Ok(Self::dirac_one());
        }
        Self::new(vec![
            Atom { alpha: -1.0, weight: 1.0 - t },
            Atom { alpha: 1.0, weight: t },
        ])
    }

    /// Midpoint-rule discretization of the normalized Lebesgue measure on
    /// [-1, 1]: n cells of width 2/n, one atom of weight 1/n at each center.
    pub fn uniform_quadrature(n: usize) -> Result<Self, MeasureError> {
        if n == 0 {
            return Err(MeasureError::BadParameter(
                "quadrature needs at least one cell".into(),
            ));
        }
        let w = 1.0 / n as f64;
        let atoms = (0..n)
            .map(|i| Atom {
                alpha: -1.0 + (i as f64 + 0.5) * 2.0 / n as f64,
                weight: w,
            })
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Σᵢ wᵢ f(αᵢ), in ascending-alpha order.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.alpha)).sum()
    }

    /// First absolute moment ∫|α| P(dα).
    pub fn abs_moment(&self) -> f64 {
        self.integrate(f64::abs)
    }

    /// Atoms lying on one side of the intensity interval, weights kept
    /// unnormalized. May be empty.
    pub fn restrict(&self, side: Side) -> Restriction {
        Restriction {
            side,
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|a| side.contains(a.alpha))
                .collect(),
        }
    }

    /// Whether the support touches α = 1 or α = -1, the hypothesis under
    /// which the residual-vanishing statement applies.
    pub fn touches_unit_intensity(&self) -> bool {
        self.atoms
            .iter()
            .any(|a| a.alpha == 1.0 || a.alpha == -1.0)
    }

    /// Sharp coercivity constant of the two-sided free energy:
    ///
    /// ```text
    ///     inf { 8π P(K) / (∫_K α P(dα))² : K ⊆ I₊ or K ⊆ I₋, moment ≠ 0 }
    /// ```
    ///
    /// computed by exhaustive enumeration of atom subsets on each side.
    /// Subsets with zero intensity moment impose no constraint and are
    /// skipped; if every subset is skipped the infimum is vacuous and
    /// [`MeasureError::NoAdmissibleSubset`] is returned.
    pub fn best_constant_j(&self) -> Result<f64, MeasureError> {
        let mut best = f64::INFINITY;
        let mut found = false;
        for side in [Side::Plus, Side::Minus] {
            let part = self.restrict(side);
            if part.atoms.is_empty() {
                continue;
            }
            if part.atoms.len() > MAX_SUBSET_ATOMS {
                return Err(MeasureError::TooManyAtoms(part.atoms.len()));
            }
            for mask in 1u32..(1u32 << part.atoms.len()) {
                let mut mass = 0.0;
                let mut moment = 0.0;
                for (i, a) in part.atoms.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        mass += a.weight;
                        moment += a.weight * a.alpha;
                    }
                }
                if moment == 0.0 {
                    continue;
                }
                found = true;
                let ratio = 8.0 * PI * mass / (moment * moment);
                if ratio < best {
                    best = ratio;
                }
            }
        }
        if found {
            Ok(best)
        } else {
            Err(MeasureError::NoAdmissibleSubset)
        }
    }

    /// Plain-text form: one `alpha weight` pair per line, shortest-roundtrip
    /// decimal so parsing recovers the exact doubles.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for a in &self.atoms {
            s.push_str(&format!("{} {}\n", a.alpha, a.weight));
        }
        s
    }

    /// Parses the [`to_text`](Self::to_text) format. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, MeasureError> {
        let mut atoms = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<f64, MeasureError> {
                tok.ok_or_else(|| MeasureError::Parse {
                    line: idx + 1,
                    reason: format!("missing {what}"),
                })?
                .parse()
                .map_err(|e| MeasureError::Parse {
                    line: idx + 1,
                    reason: format!("{what}: {e}"),
                })
            };
            let alpha = parse(parts.next(), "alpha")?;
            let weight = parse(parts.next(), "weight")?;
            if parts.next().is_some() {
                return Err(MeasureError::Parse {
                    line: idx + 1,
                    reason: "expected exactly two columns".into(),
                });
            }
            atoms.push(Atom { alpha, weight });
        }
        Self::new(atoms)
    }
}

/// Result of restricting a measure to one side; weights are the original
/// ones, so the restriction is generally not a probability measure.
#[derive(Clone, Debug)]
pub struct Restriction {
    pub side: Side,
    pub atoms: Vec<Atom>,
}

impl Restriction {
    /// Total restricted mass P(I±).
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Σ w|α| over the side, the side's contribution to ∫|α| P(dα).
    pub fn abs_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.alpha.abs()).sum()
    }
}
