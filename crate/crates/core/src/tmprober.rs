//! Empirical coercivity thresholds of the free energies.
//!
//! The sharp boundedness constants are probed with the same mechanism the
//! theory uses: a family of concentrating profiles. Along Liouville bubbles
//! of scale μ both free energies behave like (slope)·log μ + O(1), with the
//! slope linear in λ, so the sign of the fitted slope at the sharpest
//! resolvable scales separates "bounded-looking" from "unbounded-looking"
//! and a bisection in λ localizes the crossing.

use crate::blowup::{liouville_bubble, BubbleSpec};
use crate::field::{Field, TorusGrid};
use crate::io::csv_table;
use crate::meanfield::{functional, MeanFieldError, ProblemSpec};
use crate::measure::{IntensityMeasure, Side};
use thiserror::Error;

pub const DEFAULT_SLOPE_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TmError {
    #[error("bad probe parameter: {0}")]
    BadParameter(String),
    #[error("both bracket endpoints look {verdict} for this family; no threshold inside")]
    NoBracket { verdict: Verdict },
    #[error("verdict is indeterminate at lambda = {lambda}; family members overflowed")]
    Indeterminate { lambda: f64 },
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
}

/// Boundedness verdict at one λ. These are one-sided evidence from a single
/// concentration family, never proofs: "bounded-looking" means the family
/// failed to drive the functional down, i.e. consistent with bounded below.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    BoundedLooking,
    UnboundedLooking,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::BoundedLooking => "bounded-looking",
            Verdict::UnboundedLooking => "unbounded-looking",
            Verdict::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// A concentration family: bubbles of increasing sharpness, one sign.
#[derive(Clone, Debug)]
pub struct ProbeFamily {
    pub mus: Vec<f64>,
    pub fields: Vec<Field>,
    pub direction: Side,
    /// Under-resolution notes for members too sharp for the grid.
    pub warnings: Vec<String>,
}

/// Build the bubble family at the domain center. Scales must be positive
/// and strictly increasing; members beyond the grid's resolving power are
/// kept but flagged.
// Negated comparisons are deliberate throughout: `!(x > 0.0)` rejects NaN
// where `x <= 0.0` would let it through.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn probe_family(
    grid: TorusGrid,
    mu_list: &[f64],
    direction: Side,
) -> Result<ProbeFamily, TmError> {
    if mu_list.is_empty() {
        return Err(TmError::BadParameter("scale list must be nonempty".into()));
    }
    for w in mu_list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(TmError::BadParameter(format!(
                "scales must increase strictly, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(mu_list[0] > 0.0) {
        return Err(TmError::BadParameter(format!(
            "scales must be positive, got {}",
            mu_list[0]
        )));
    }
    let sign = match direction {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    let center = (grid.side() / 2.0, grid.side() / 2.0);
    let mut fields = Vec::with_capacity(mu_list.len());
    let mut warnings = Vec::new();
    for &mu in mu_list {
        let spec = BubbleSpec { center, scale: mu, sign };
        if spec.is_under_resolved(grid) {
            warnings.push(format!(
                "scale {mu} exceeds the resolving power of the {n} by {n} grid",
                n = grid.n()
            ));
        }
        fields.push(liouville_bubble(grid, &spec));
    }
    Ok(ProbeFamily { mus: mu_list.to_vec(), fields, direction, warnings })
}

/// Concentration side expected to expose the lowest threshold: the one
/// carrying more of the intensity measure's mass. Ties go to the positive
/// side.
pub fn auto_direction(measure: &IntensityMeasure) -> Side {
    let plus = measure.restrict(Side::Plus).mass();
    let minus = measure.restrict(Side::Minus).mass();
    if minus > plus {
        Side::Minus
    } else {
        Side::Plus
    }
}

/// Free-energy landscape of one family across a λ list.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    /// `values[lambda][member]`; NaN for members skipped on overflow.
    pub values: Vec<Vec<f64>>,
    pub family_infima: Vec<f64>,
    /// Fitted d(value)/d(log μ) over the two sharpest members.
    pub slopes: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

/// Evaluate the variant's free energy on every family member at every λ and
/// classify each λ by the slope at the two sharpest scales. A member whose
/// evaluation overflows is skipped; if one of the two sharpest members is
/// missing the verdict is indeterminate.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn sweep(
    template: &ProblemSpec,
    lambdas: &[f64],
    family: &ProbeFamily,
    slope_tol: f64,
) -> Result<SweepResult, TmError> {
    if !(slope_tol >= 0.0) {
        return Err(TmError::BadParameter(format!(
            "slope tolerance must be nonnegative, got {slope_tol}"
        )));
    }
    let m = family.fields.len();
    let mut values = Vec::with_capacity(lambdas.len());
    let mut infima = Vec::with_capacity(lambdas.len());
    let mut slopes = Vec::with_capacity(lambdas.len());
    let mut verdicts = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let spec =
            ProblemSpec::new(template.variant, lambda, template.measure.clone(), template.grid)?;
        let mut row = Vec::with_capacity(m);
        for field in &family.fields {
            match functional(&spec, field) {
                Ok(val) => row.push(val),
                Err(MeanFieldError::Overflow { .. }) => row.push(f64::NAN),
                Err(e) => return Err(e.into()),
            }
        }
        let inf = row.iter().cloned().filter(|x| !x.is_nan()).fold(f64::NAN, f64::min);
        let (slope, verdict) = if m < 2 || row[m - 1].is_nan() || row[m - 2].is_nan() {
            (f64::NAN, Verdict::Indeterminate)
        } else {
            let slope =
                (row[m - 1] - row[m - 2]) / (family.mus[m - 1].ln() - family.mus[m - 2].ln());
            let verdict = if slope < -slope_tol {
                Verdict::UnboundedLooking
            } else {
                Verdict::BoundedLooking
            };
            (slope, verdict)
        };
        values.push(row);
        infima.push(inf);
        slopes.push(slope);
        verdicts.push(verdict);
    }
    Ok(SweepResult { lambdas: lambdas.to_vec(), values, family_infima: infima, slopes, verdicts })
}

fn verdict_at(
    template: &ProblemSpec,
    lambda: f64,
    family: &ProbeFamily,
    slope_tol: f64,
) -> Result<Verdict, TmError> {
    let result = sweep(template, &[lambda], family, slope_tol)?;
    Ok(result.verdicts[0])
}

/// Bisection estimate of the λ where the family's verdict flips, to 1%
/// relative width. The bracket must be bounded-looking at the low end and
/// unbounded-looking at the high end.
pub fn threshold_estimate(
    template: &ProblemSpec,
    bracket: (f64, f64),
    family: &ProbeFamily,
    slope_tol: f64,
) -> Result<f64, TmError> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(TmError::BadParameter(format!(
            "bracket ({lo}, {hi}) must be positive and increasing"
        )));
    }
    let v_lo = verdict_at(template, lo, family, slope_tol)?;
    let v_hi = verdict_at(template, hi, family, slope_tol)?;
    match (v_lo, v_hi) {
        (Verdict::BoundedLooking, Verdict::UnboundedLooking) => {}
        (Verdict::Indeterminate, _) => return Err(TmError::Indeterminate { lambda: lo }),
        (_, Verdict::Indeterminate) => return Err(TmError::Indeterminate { lambda: hi }),
        (v, w) if v == w => return Err(TmError::NoBracket { verdict: v }),
        _ => {
            return Err(TmError::BadParameter(
                "bracket is inverted: unbounded-looking below bounded-looking".into(),
            ))
        }
    }
    while hi - lo > 0.005 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        match verdict_at(template, mid, family, slope_tol)? {
            Verdict::UnboundedLooking => hi = mid,
            Verdict::BoundedLooking => lo = mid,
            Verdict::Indeterminate => return Err(TmError::Indeterminate { lambda: mid }),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sweep as CSV rows `lambda,mu,value,slope,verdict`, slope and verdict
/// repeated across the members of each λ.
pub fn sweep_to_csv(result: &SweepResult, family: &ProbeFamily) -> String {
    let mut rows = Vec::new();
    for (li, &lambda) in result.lambdas.iter().enumerate() {
        for (mi, &mu) in family.mus.iter().enumerate() {
            rows.push(vec![
                format!("{lambda}"),
                format!("{mu}"),
                format!("{}", result.values[li][mi]),
                format!("{}", result.slopes[li]),
                result.verdicts[li].to_string(),
            ]);
        }
    }
    csv_table(&["lambda", "mu", "value", "slope", "verdict"], rows)
}
