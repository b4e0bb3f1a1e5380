//! Run configuration: TOML schema, exhaustive validation, and resolution
//! into the library's typed inputs.
//!
//! One file describes one run. Validation collects every violation instead
//! of stopping at the first, so `--validate-only` can report the full list.

use std::fmt;
use std::path::{Path, PathBuf};

use mfelab::field::TorusGrid;
use mfelab::measure::{IntensityMeasure, Side};
use mfelab::meanfield::{ProblemSpec, Variant};
use mfelab::solver::{InitialField, SolverOptions};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Minimize,
    Continue,
    BlowupScan,
    TmSweep,
    Quantize,
    CheckAssumptions,
}

impl Command {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "solve" => Command::Solve,
            "minimize" => Command::Minimize,
            "continue" => Command::Continue,
            "blowup-scan" => Command::BlowupScan,
            "tm-sweep" => Command::TmSweep,
            "quantize" => Command::Quantize,
            "check-assumptions" => Command::CheckAssumptions,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Minimize => "minimize",
            Command::Continue => "continue",
            Command::BlowupScan => "blowup-scan",
            Command::TmSweep => "tm-sweep",
            Command::Quantize => "quantize",
            Command::CheckAssumptions => "check-assumptions",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw TOML shape. Everything but `command` and `[problem]` is optional
/// with library defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: String,
    pub seed: Option<u64>,
    pub problem: RawProblem,
    #[serde(default)]
    pub solver: RawSolver,
    #[serde(default)]
    pub initial: RawInitial,
    #[serde(default)]
    pub diagnostics: RawDiagnostics,
    #[serde(default)]
    pub continuation: RawContinuation,
    #[serde(default)]
    pub tm: RawTm,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    /// "sawada-suzuki" (per-intensity normalization) or "neri" (shared).
    pub variant: String,
    pub lambda: f64,
    /// Samples per axis; must be even and at least 8.
    pub resolution: usize,
    /// Torus side length.
    pub side: f64,
    /// "dirac-one" | "two-mass:<t>" | "uniform-quadrature:<n>" | "file:<path>".
    pub measure: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub linesearch_c: Option<f64>,
    pub fd_eps: Option<f64>,
    pub divergence_floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    /// "zero" | "fourier:<amp>" | "bubble:<mu>[:plus|:minus]" |
    /// "random:<amp>" | "file:<path>". Defaults to "zero".
    pub preset: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiagnostics {
    /// Ball radii for mass extrapolation; defaults to the grid schedule.
    pub radii: Option<Vec<f64>>,
    /// Sample threshold separating peaks from background. Default 1.0.
    pub peak_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawContinuation {
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTm {
    #[serde(default)]
    pub mus: Vec<f64>,
    /// λ table for the landscape sweep; may be empty when only bisecting.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Bisection bracket (low, high).
    pub bracket: Option<[f64; 2]>,
    /// "auto" | "plus" | "minus". Default "auto".
    pub direction: Option<String>,
    pub slope_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<String>,
}

/// Where the starting field comes from.
#[derive(Clone, Debug)]
pub enum InitialSource {
    Preset(InitialField),
    File(PathBuf),
}

/// Fully validated run inputs.
pub struct Resolved {
    pub command: Command,
    pub seed: u64,
    pub spec: ProblemSpec,
    pub opts: SolverOptions,
    pub initial: InitialSource,
    pub radii: Vec<f64>,
    pub peak_threshold: f64,
    pub continuation_lambdas: Vec<f64>,
    pub tm_mus: Vec<f64>,
    pub tm_lambdas: Vec<f64>,
    pub tm_bracket: Option<(f64, f64)>,
    pub tm_direction: Option<Side>,
    pub tm_slope_tol: f64,
    pub output_dir: PathBuf,
}

pub fn parse_measure(text: &str) -> Result<IntensityMeasure, String> {
    if text == "dirac-one" {
        return Ok(IntensityMeasure::dirac_one());
    }
    if let Some(t) = text.strip_prefix("two-mass:") {
        let t: f64 = t.parse().map_err(|e| format!("two-mass parameter: {e}"))?;
        return IntensityMeasure::two_mass(t).map_err(|e| e.to_string());
    }
    if let Some(n) = text.strip_prefix("uniform-quadrature:") {
        let n: usize = n.parse().map_err(|e| format!("quadrature cells: {e}"))?;
        return IntensityMeasure::uniform_quadrature(n).map_err(|e| e.to_string());
    }
    if let Some(path) = text.strip_prefix("file:") {
        let body = std::fs::read_to_string(path)
            .map_err(|e| format!("measure file {path}: {e}"))?;
        return IntensityMeasure::from_text(&body).map_err(|e| e.to_string());
    }
    Err(format!(
        "unknown measure '{text}' (expected dirac-one, two-mass:<t>, \
         uniform-quadrature:<n>, or file:<path>)"
    ))
}

fn parse_initial(text: &str, seed: u64) -> Result<InitialSource, String> {
    if text == "zero" {
        return Ok(InitialSource::Preset(InitialField::Zero));
    }
    if let Some(amp) = text.strip_prefix("fourier:") {
        let amplitude: f64 = amp.parse().map_err(|e| format!("fourier amplitude: {e}"))?;
        return Ok(InitialSource::Preset(InitialField::Fourier { amplitude }));
    }
    if let Some(rest) = text.strip_prefix("bubble:") {
        let (mu_text, side) = match rest.split_once(':') {
            None => (rest, Side::Plus),
            Some((m, "plus")) => (m, Side::Plus),
            Some((m, "minus")) => (m, Side::Minus),
            Some((_, other)) => return Err(format!("bubble side '{other}' (plus or minus)")),
        };
        let mu: f64 = mu_text.parse().map_err(|e| format!("bubble scale: {e}"))?;
        if !(mu.is_finite() && mu > 0.0) {
            return Err(format!("bubble scale must be positive, got {mu}"));
        }
        return Ok(InitialSource::Preset(InitialField::Bubble { mu, side }));
    }
    if let Some(amp) = text.strip_prefix("random:") {
        let amplitude: f64 = amp.parse().map_err(|e| format!("random amplitude: {e}"))?;
        return Ok(InitialSource::Preset(InitialField::Random { amplitude, seed }));
    }
    if let Some(path) = text.strip_prefix("file:") {
        return Ok(InitialSource::File(PathBuf::from(path)));
    }
    Err(format!(
        "unknown initial preset '{text}' (expected zero, fourier:<amp>, \
         bubble:<mu>[:plus|:minus], random:<amp>, or file:<path>)"
    ))
}

/// Validates everything and either returns the resolved inputs or the full
/// list of violations, each prefixed with the offending field's path.
/// Negated comparisons are deliberate: `!(x > 0.0)` flags NaN input where
/// `x <= 0.0` would let it through.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(
    raw: &RawConfig,
    seed_override: Option<u64>,
    output_override: Option<&Path>,
) -> Result<Resolved, Vec<String>> {
    let mut violations = Vec::new();
    let seed = seed_override.or(raw.seed).unwrap_or(0);

    let command = Command::parse(&raw.command);
    if command.is_none() {
        violations.push(format!(
            "command: unknown command '{}' (expected solve, minimize, continue, \
             blowup-scan, tm-sweep, quantize, or check-assumptions)",
            raw.command
        ));
    }

    let variant = match raw.problem.variant.as_str() {
        "sawada-suzuki" => Some(Variant::SawadaSuzuki),
        "neri" => Some(Variant::Neri),
        other => {
            violations.push(format!(
                "problem.variant: unknown variant '{other}' (expected sawada-suzuki or neri)"
            ));
            None
        }
    };

    if !(raw.problem.lambda.is_finite() && raw.problem.lambda > 0.0) {
        violations.push(format!(
            "problem.lambda: must be positive and finite, got {}",
            raw.problem.lambda
        ));
    }

    let grid = match TorusGrid::new(raw.problem.side, raw.problem.resolution) {
        Ok(g) => Some(g),
        Err(e) => {
            violations.push(format!("problem.resolution/side: {e}"));
            None
        }
    };

    let measure = match parse_measure(&raw.problem.measure) {
        Ok(m) => Some(m),
        Err(e) => {
            violations.push(format!("problem.measure: {e}"));
            None
        }
    };

    let defaults = SolverOptions::default();
    let opts = SolverOptions {
        tol: raw.solver.tol.unwrap_or(defaults.tol),
        max_iter: raw.solver.max_iter.unwrap_or(defaults.max_iter),
        damping: raw.solver.damping.unwrap_or(defaults.damping),
        linesearch_c: raw.solver.linesearch_c.unwrap_or(defaults.linesearch_c),
        fd_eps: raw.solver.fd_eps.unwrap_or(defaults.fd_eps),
        divergence_floor: raw.solver.divergence_floor.unwrap_or(defaults.divergence_floor),
    };
    if let Err(e) = opts.validate() {
        violations.push(format!("solver: {e}"));
    }

    let preset_text = raw.initial.preset.as_deref().unwrap_or("zero");
    let initial = match parse_initial(preset_text, seed) {
        Ok(src) => {
            if let InitialSource::File(path) = &src {
                if !path.is_file() {
                    violations.push(format!(
                        "initial.preset: field file {} does not exist",
                        path.display()
                    ));
                }
            }
            Some(src)
        }
        Err(e) => {
            violations.push(format!("initial.preset: {e}"));
            None
        }
    };

    if let Some(radii) = &raw.diagnostics.radii {
        if radii.is_empty() {
            violations.push("diagnostics.radii: schedule must be nonempty".into());
        }
        for &r in radii {
            let half = raw.problem.side / 2.0;
            if !(r > 0.0 && r < half) {
                violations.push(format!(
                    "diagnostics.radii: radius {r} outside (0, side/2 = {half})"
                ));
            }
        }
    }
    let peak_threshold = raw.diagnostics.peak_threshold.unwrap_or(1.0);
    if !(peak_threshold.is_finite() && peak_threshold > 0.0) {
        violations.push(format!(
            "diagnostics.peak_threshold: must be positive, got {peak_threshold}"
        ));
    }

    if command == Some(Command::Continue) && raw.continuation.lambdas.is_empty() {
        violations.push("continuation.lambdas: schedule required for continue".into());
    }
    for &l in &raw.continuation.lambdas {
        if !(l.is_finite() && l > 0.0) {
            violations.push(format!("continuation.lambdas: entry {l} must be positive"));
        }
    }

    let tm_direction = match raw.tm.direction.as_deref().unwrap_or("auto") {
        "auto" => None,
        "plus" => Some(Side::Plus),
        "minus" => Some(Side::Minus),
        other => {
            violations.push(format!(
                "tm.direction: unknown direction '{other}' (expected auto, plus, or minus)"
            ));
            None
        }
    };
    if command == Some(Command::TmSweep) {
        if raw.tm.mus.is_empty() {
            violations.push("tm.mus: scale list required for tm-sweep".into());
        }
        if raw.tm.lambdas.is_empty() && raw.tm.bracket.is_none() {
            violations.push("tm: tm-sweep needs a lambdas table, a bracket, or both".into());
        }
    }
    for w in raw.tm.mus.windows(2) {
        if !(w[1] > w[0]) {
            violations.push(format!(
                "tm.mus: scales must increase strictly, got {} then {}",
                w[0], w[1]
            ));
        }
    }
    if let Some([lo, hi]) = raw.tm.bracket {
        if !(lo > 0.0 && hi > lo) {
            violations.push(format!(
                "tm.bracket: ({lo}, {hi}) must be positive and increasing"
            ));
        }
    }
    let tm_slope_tol = raw.tm.slope_tol.unwrap_or(mfelab::tmprober::DEFAULT_SLOPE_TOL);
    if !(tm_slope_tol.is_finite() && tm_slope_tol > 0.0) {
        violations.push(format!("tm.slope_tol: must be positive, got {tm_slope_tol}"));
    }

    if !violations.is_empty() {
        return Err(violations);
    }
    let (grid, measure, variant) = (grid.unwrap(), measure.unwrap(), variant.unwrap());
    let spec = match ProblemSpec::new(variant, raw.problem.lambda, measure, grid) {
        Ok(s) => s,
        Err(e) => return Err(vec![format!("problem: {e}")]),
    };

    let output_dir = output_override
        .map(Path::to_path_buf)
        .or_else(|| raw.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(Resolved {
        command: command.unwrap(),
        seed,
        spec,
        opts,
        initial: initial.unwrap(),
        radii: raw
            .diagnostics
            .radii
            .clone()
            .unwrap_or_else(|| mfelab::blowup::default_radius_schedule(grid)),
        peak_threshold,
        continuation_lambdas: raw.continuation.lambdas.clone(),
        tm_mus: raw.tm.mus.clone(),
        tm_lambdas: raw.tm.lambdas.clone(),
        tm_bracket: raw.tm.bracket.map(|[lo, hi]| (lo, hi)),
        tm_direction,
        tm_slope_tol,
        output_dir,
    })
}
