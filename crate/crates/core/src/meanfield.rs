//! Right-hand sides, free energies, and structural diagnostics of the
//! mean-field equations.
//!
//! With `P` an atomic intensity measure and `v` a mean-zero field, both
//! model variants drive
//!
//! ```text
//!     -Δv = λ ∫ V(α, v) e^{αv} P(dα) - λ/|Ω| ∫∫ V(α, v) e^{αv} P(dα) dx
//! ```
//!
//! and differ only in how the potential normalizes the exponential:
//!
//! ```text
//!     V(α, v) = α / ∫_Ω e^{αv} dx            (per-intensity normalization)
//!     V(α, v) = α / ∫∫ e^{αv} P(dα) dx       (single shared normalization)
//! ```
//!
//! Every exponential integral is handled through its logarithm with a max
//! shift, so fields with large amplitude produce graceful results instead of
//! infinities. The only failure mode is genuinely non-finite input.

use crate::field::{Field, TorusGrid};
use crate::measure::{IntensityMeasure, Side};
use crate::numerics::{log_sum_exp, pairwise_sum};
use serde::Serialize;
use thiserror::Error;

/// Relative slack used when checking inequalities that hold with equality
/// in exact arithmetic.
pub const ASSUMPTION_SLACK: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("overflow: exponential integral for intensity {alpha} is not finite")]
    Overflow { alpha: f64 },
}

/// Which normalization the potential uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Each intensity α is normalized by its own ∫ e^{αv} dx.
    SawadaSuzuki,
    /// One shared normalization ∫∫ e^{αv} P(dα) dx for all intensities.
    Neri,
}

/// A fully specified problem instance.
#[derive(Clone, Debug, Serialize)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub lambda: f64,
    pub measure: IntensityMeasure,
    pub grid: TorusGrid,
}

impl ProblemSpec {
    pub fn new(
        variant: Variant,
        lambda: f64,
        measure: IntensityMeasure,
        grid: TorusGrid,
    ) -> Result<Self, MeanFieldError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(MeanFieldError::BadParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { variant, lambda, measure, grid })
    }
}

/// Logarithms of the exponential integrals behind every operation:
/// `log_e[i] = log ∫ e^{αᵢ v}` and `log_ee = log Σᵢ wᵢ ∫ e^{αᵢ v}`.
pub(crate) struct Exponentials {
    pub log_e: Vec<f64>,
    pub log_ee: f64,
}

impl Exponentials {
    pub(crate) fn compute(spec: &ProblemSpec, v: &Field) -> Result<Self, MeanFieldError> {
        assert_eq!(v.grid(), spec.grid, "field and problem grids differ");
        let log_h2 = spec.grid.cell_area().ln();
        let mut log_e = Vec::with_capacity(spec.measure.atoms().len());
        let mut terms = Vec::with_capacity(spec.measure.atoms().len());
        let mut exps = vec![0.0; v.values().len()];
        for atom in spec.measure.atoms() {
            let a = atom.alpha;
            let m = v
                .values()
                .iter()
                .map(|&x| a * x)
                .fold(f64::NEG_INFINITY, f64::max);
            if !m.is_finite() {
                return Err(MeanFieldError::Overflow { alpha: a });
            }
            for (e, &x) in exps.iter_mut().zip(v.values()) {
                *e = (a * x - m).exp();
            }
            let le = m + pairwise_sum(&exps).ln() + log_h2;
            if !le.is_finite() {
                return Err(MeanFieldError::Overflow { alpha: a });
            }
            log_e.push(le);
            terms.push(atom.weight.ln() + le);
        }
        Ok(Self { log_e, log_ee: log_sum_exp(&terms) })
    }

    /// log of the normalization dividing e^{αᵢv} for atom i.
    pub(crate) fn log_norm(&self, variant: Variant, i: usize) -> f64 {
        match variant {
            Variant::SawadaSuzuki => self.log_e[i],
            Variant::Neri => self.log_ee,
        }
    }
}

/// Per-atom values of V(αᵢ, v)/αᵢ, the normalization factors themselves.
/// These are exactly the finite-state stand-ins for the residual profile
/// function of the concentration limit.
pub fn potential_over_alpha(spec: &ProblemSpec, v: &Field) -> Result<Vec<f64>, MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    Ok((0..spec.measure.atoms().len())
        .map(|i| (-ex.log_norm(spec.variant, i)).exp())
        .collect())
}

/// The full right-hand side
/// λ Σᵢ wᵢ (V(αᵢ,v) e^{αᵢv} - |Ω|⁻¹ ∫ V(αᵢ,v) e^{αᵢv}), mean-zero by
/// construction.
pub fn rhs(spec: &ProblemSpec, v: &Field) -> Result<Field, MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    let mut out = Field::zeros(spec.grid);
    for (i, atom) in spec.measure.atoms().iter().enumerate() {
        if atom.alpha == 0.0 {
            continue;
        }
        let coef = spec.lambda * atom.weight * atom.alpha;
        let ln = ex.log_norm(spec.variant, i);
        for (o, &x) in out.values_mut().iter_mut().zip(v.values()) {
            *o += coef * (atom.alpha * x - ln).exp();
        }
    }
    out.project_mean_zero();
    Ok(out)
}

/// -Δv - rhs(v); identically zero exactly when v solves the discrete
/// equation. This is also the L² gradient of the free energy on the
/// mean-zero subspace, see [`functional_gradient`].
pub fn residual(spec: &ProblemSpec, v: &Field) -> Result<Field, MeanFieldError> {
    Ok(v.laplacian().sub(&rhs(spec, v)?))
}

/// Free energy of the problem variant:
///
/// ```text
///     ½‖∇v‖₂² - λ ∫ log ∫ e^{αv} dx P(dα)      (per-intensity)
///     ½‖∇v‖₂² - λ log ∫∫ e^{αv} P(dα) dx       (shared)
/// ```
pub fn functional(spec: &ProblemSpec, v: &Field) -> Result<f64, MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    let entropy = match spec.variant {
        Variant::SawadaSuzuki => spec
            .measure
            .atoms()
            .iter()
            .zip(&ex.log_e)
            .map(|(a, le)| a.weight * le)
            .sum(),
        Variant::Neri => ex.log_ee,
    };
    Ok(0.5 * v.dirichlet_energy() - spec.lambda * entropy)
}

/// L² gradient of [`functional`] restricted to mean-zero variations. It
/// coincides with [`residual`]: the discrete directional derivative of the
/// free energy along any mean-zero φ is exactly ⟨residual, φ⟩.
pub fn functional_gradient(spec: &ProblemSpec, v: &Field) -> Result<Field, MeanFieldError> {
    residual(spec, v)
}

/// Signed vorticity densities:
/// ν± = λ ∫_{I±} |V(α,v)| e^{αv} P(dα), returned as (ν₊, ν₋).
pub fn nu_densities(spec: &ProblemSpec, v: &Field) -> Result<(Field, Field), MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    let mut plus = Field::zeros(spec.grid);
    let mut minus = Field::zeros(spec.grid);
    for (i, atom) in spec.measure.atoms().iter().enumerate() {
        if atom.alpha == 0.0 {
            continue;
        }
        let coef = spec.lambda * atom.weight * atom.alpha.abs();
        let ln = ex.log_norm(spec.variant, i);
        let target = if Side::Plus.contains(atom.alpha) {
            plus.values_mut()
        } else {
            minus.values_mut()
        };
        for (o, &x) in target.iter_mut().zip(v.values()) {
            *o += coef * (atom.alpha * x - ln).exp();
        }
    }
    Ok((plus, minus))
}

/// Per-atom densities of the product measure, μ_{αᵢ}(x) = λ (V/α) e^{αᵢv}.
/// Each is strictly positive, and Σᵢ wᵢ|αᵢ| μ_{αᵢ} reassembles ν₊ + ν₋.
pub fn mu_product_densities(spec: &ProblemSpec, v: &Field) -> Result<Vec<Field>, MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    let mut out = Vec::with_capacity(spec.measure.atoms().len());
    for (i, atom) in spec.measure.atoms().iter().enumerate() {
        let ln = ex.log_norm(spec.variant, i);
        let mut f = Field::zeros(spec.grid);
        for (o, &x) in f.values_mut().iter_mut().zip(v.values()) {
            *o = spec.lambda * (atom.alpha * x - ln).exp();
        }
        out.push(f);
    }
    Ok(out)
}

/// Splits v into potentials of the signed densities: u± = G ⋆ ν±. For an
/// exact solution v = u₊ - u₋; for an approximate one the gap is controlled
/// by the residual norm.
pub fn u_pm_decomposition(spec: &ProblemSpec, v: &Field) -> Result<(Field, Field), MeanFieldError> {
    let (plus, minus) = nu_densities(spec, v)?;
    Ok((plus.green_convolve(), minus.green_convolve()))
}

/// Observed values and verdicts for the structural assumptions the
/// compactness analysis rests on.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// sup over atoms of V/α. Bounded by |Ω|⁻¹ via Jensen.
    pub c1_prime: f64,
    /// ∫∫ |V| e^{αv} P(dα) dx. Bounded by ∫|α| P(dα) ≤ 1.
    pub c2_prime: f64,
    /// Every ∫ e^{αv} ≥ |Ω| (Jensen with mean-zero v).
    pub jensen_ok: bool,
    /// α V(α, v) ≥ 0 for every atom.
    pub sign_ok: bool,
}

impl AssumptionReport {
    /// Flat `key = value` text block, one line per field.
    pub fn to_text_block(&self) -> String {
        format!(
            "c1_prime = {}\nc2_prime = {}\njensen_ok = {}\nsign_ok = {}\n",
            self.c1_prime, self.c2_prime, self.jensen_ok, self.sign_ok
        )
    }
}

/// Evaluates the sign, normalization, and Jensen bounds at (spec, v).
pub fn check_assumptions(spec: &ProblemSpec, v: &Field) -> Result<AssumptionReport, MeanFieldError> {
    let ex = Exponentials::compute(spec, v)?;
    let atoms = spec.measure.atoms();
    let mut c1: f64 = 0.0;
    let mut c2 = 0.0;
    let mut sign_ok = true;
    let log_area = spec.grid.area().ln();
    let mut jensen_ok = true;
    for (i, atom) in atoms.iter().enumerate() {
        let ln = ex.log_norm(spec.variant, i);
        let v_over_alpha = (-ln).exp();
        c1 = c1.max(v_over_alpha);
        c2 += atom.weight * atom.alpha.abs() * (ex.log_e[i] - ln).exp();
        if atom.alpha * (atom.alpha * v_over_alpha) < 0.0 {
            sign_ok = false;
        }
        if ex.log_e[i] < log_area - ASSUMPTION_SLACK {
            jensen_ok = false;
        }
    }
    Ok(AssumptionReport { c1_prime: c1, c2_prime: c2, jensen_ok, sign_ok })
}

/// True when α ↦ ∫ e^{αv} dx is nondecreasing across the supplied ladder.
/// For mean-zero v the map is in fact strictly increasing on (0, 1]; this
/// checks the discrete counterpart with a tiny rounding allowance.
pub fn monotonicity_check(v: &Field, alphas: &[f64]) -> Result<bool, MeanFieldError> {
    if alphas.is_empty() {
        return Err(MeanFieldError::BadParameter("empty alpha ladder".into()));
    }
    for w in alphas.windows(2) {
        if w[1] <= w[0] {
            return Err(MeanFieldError::BadParameter(
                "alpha ladder must be strictly increasing".into(),
            ));
        }
    }
    if !(alphas[0] > 0.0 && *alphas.last().unwrap() <= 1.0) {
        return Err(MeanFieldError::BadParameter(
            "alpha ladder must lie in (0, 1]".into(),
        ));
    }
    let log_h2 = v.grid().cell_area().ln();
    let mut prev = f64::NEG_INFINITY;
    let mut exps = vec![0.0; v.values().len()];
    for &a in alphas {
        let m = v
            .values()
            .iter()
            .map(|&x| a * x)
            .fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(MeanFieldError::Overflow { alpha: a });
        }
        for (e, &x) in exps.iter_mut().zip(v.values()) {
            *e = (a * x - m).exp();
        }
        let le = m + pairwise_sum(&exps).ln() + log_h2;
        if le < prev - 1e-13 {
            return Ok(false);
        }
        prev = le;
    }
    Ok(true)
}
