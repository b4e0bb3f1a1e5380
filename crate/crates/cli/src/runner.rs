//! Command execution: runs the configured pipeline and collects every
//! artifact as named bytes. The caller writes files and the manifest, so a
//! run that reaches execution always leaves a manifest behind.
//!
//! Exit code convention: 0 for success, 2 for expected analytic outcomes
//! reported as data (divergence, a failed bracket, an unconverged branch),
//! 1 for real errors.

use std::collections::BTreeMap;

use mfelab::blowup::{detect_peaks, estimate_masses, mass_table_csv, quantization_solve, report_to_json, QuantizationSolution};
use mfelab::field::Field;
use mfelab::io::{csv_table, read_field, write_field};
use mfelab::meanfield::{check_assumptions, monotonicity_check, ProblemSpec, Variant};
use mfelab::measure::Side;
use mfelab::solver::{
    continuation, initial_field, minimize, newton_solve, trace_to_csv, Solution, SolverError,
    StepOutcome,
};
use mfelab::tmprober::{auto_direction, probe_family, sweep, threshold_estimate, SweepResult};
use serde_json::{json, Value};

use crate::config::{Command, InitialSource, Resolved};

pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts { files: BTreeMap::new() }
    }

    fn add_bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.add_bytes(name, text.into_bytes());
    }

    fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable value");
        text.push('\n');
        self.add_text(name, text);
    }

    fn add_field(&mut self, name: &str, field: &Field) {
        let mut bytes = Vec::new();
        write_field(&mut bytes, field).expect("in-memory write");
        self.add_bytes(name, bytes);
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::SawadaSuzuki => "sawada-suzuki",
        Variant::Neri => "neri",
    }
}

/// Expected analytic outcomes land in outcome.json with exit 2; anything
/// else is a real error.
fn solver_failure(arts: &mut Artifacts, err: &SolverError) -> i32 {
    let (kind, code) = match err {
        SolverError::Diverged { .. } => ("diverged", 2),
        SolverError::Stalled { .. } => ("stalled", 2),
        SolverError::SingularLinearization { .. } => ("singular-linearization", 2),
        _ => ("error", 1),
    };
    arts.add_json(
        "outcome.json",
        &json!({ "schema_version": 1, "outcome": kind, "detail": err.to_string() }),
    );
    code
}

fn solution_summary(cfg: &Resolved, sol: &Solution) -> Value {
    json!({
        "schema_version": 1,
        "variant": variant_name(cfg.spec.variant),
        "lambda": cfg.spec.lambda,
        "resolution": cfg.spec.grid.n(),
        "side": cfg.spec.grid.side(),
        "seed": cfg.seed,
        "iterations": sol.iterations,
        "residual_norm": sol.residual_norm,
        "functional_value": sol.functional_value,
        "converged": sol.converged,
        "sup_norm": sol.v.linf_norm(),
    })
}

fn resolve_initial(cfg: &Resolved) -> Result<Field, String> {
    match &cfg.initial {
        InitialSource::Preset(preset) => Ok(initial_field(cfg.spec.grid, *preset)),
        InitialSource::File(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| format!("initial field {}: {e}", path.display()))?;
            let field = read_field(std::io::BufReader::new(file))
                .map_err(|e| format!("initial field {}: {e}", path.display()))?;
            if field.grid() != cfg.spec.grid {
                return Err(format!(
                    "initial field {}: grid N = {}, L = {} does not match problem N = {}, L = {}",
                    path.display(),
                    field.grid().n(),
                    field.grid().side(),
                    cfg.spec.grid.n(),
                    cfg.spec.grid.side(),
                ));
            }
            Ok(field)
        }
    }
}

pub fn execute(cfg: &Resolved, threads: usize) -> Result<(i32, Artifacts), String> {
    let mut arts = Artifacts::new();
    let code = match cfg.command {
        Command::Solve => run_rootfind(cfg, &mut arts, false)?,
        Command::Minimize => run_rootfind(cfg, &mut arts, true)?,
        Command::Continue => run_continuation(cfg, &mut arts)?,
        Command::BlowupScan => run_blowup_scan(cfg, &mut arts)?,
        Command::TmSweep => run_tm_sweep(cfg, &mut arts, threads)?,
        Command::Quantize => run_quantize(cfg, &mut arts),
        Command::CheckAssumptions => run_check_assumptions(cfg, &mut arts)?,
    };
    Ok((code, arts))
}

fn run_rootfind(cfg: &Resolved, arts: &mut Artifacts, descend: bool) -> Result<i32, String> {
    let v0 = resolve_initial(cfg)?;
    let (summary_name, result) = if descend {
        ("minimize.json", minimize(&cfg.spec, &v0, &cfg.opts))
    } else {
        ("solve.json", newton_solve(&cfg.spec, &v0, &cfg.opts))
    };
    match result {
        Ok(sol) => {
            arts.add_field("solution.mfe1", &sol.v);
            arts.add_text("trace.csv", trace_to_csv(&sol.trace));
            arts.add_json(summary_name, &solution_summary(cfg, &sol));
            Ok(if sol.converged { 0 } else { 2 })
        }
        Err(e) => Ok(solver_failure(arts, &e)),
    }
}

fn run_continuation(cfg: &Resolved, arts: &mut Artifacts) -> Result<i32, String> {
    let v0 = resolve_initial(cfg)?;
    let run = continuation(&cfg.spec, &cfg.continuation_lambdas, &v0, &cfg.opts)
        .map_err(|e| format!("continuation: {e}"))?;
    let mut rows = Vec::new();
    let mut solved = 0usize;
    for (idx, step) in run.steps.iter().enumerate() {
        let row = match &step.outcome {
            StepOutcome::Solved(sol) => {
                arts.add_field(&format!("solution_{idx:02}.mfe1", idx = idx), &sol.v);
                solved += 1;
                vec![
                    step.lambda.to_string(),
                    "solved".to_string(),
                    sol.iterations.to_string(),
                    sol.residual_norm.to_string(),
                    sol.functional_value.to_string(),
                    sol.v.linf_norm().to_string(),
                ]
            }
            StepOutcome::Failed(e) => vec![
                step.lambda.to_string(),
                format!("failed: {e}"),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
            StepOutcome::Unsolved => vec![
                step.lambda.to_string(),
                "unsolved".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        rows.push(row);
    }
    arts.add_text(
        "continuation.csv",
        csv_table(
            &["lambda", "status", "iterations", "residual_norm", "functional_value", "sup_norm"],
            rows,
        ),
    );
    arts.add_json(
        "continue.json",
        &json!({
            "schema_version": 1,
            "entries": run.steps.len(),
            "solved": solved,
            "seed": cfg.seed,
        }),
    );
    Ok(if solved == run.steps.len() { 0 } else { 2 })
}

fn run_blowup_scan(cfg: &Resolved, arts: &mut Artifacts) -> Result<i32, String> {
    let v = resolve_initial(cfg)?;
    let (peaks_plus, peaks_minus) = detect_peaks(&v, cfg.peak_threshold);
    match estimate_masses(&cfg.spec, &v, &peaks_plus, &peaks_minus, &cfg.radii) {
        Ok(report) => {
            arts.add_json("report.json", &report_to_json(&report));
            arts.add_text("masses.csv", mass_table_csv(&report));
            arts.add_field("s_plus.mfe1", &report.s_plus_field);
            arts.add_field("s_minus.mfe1", &report.s_minus_field);
            Ok(0)
        }
        Err(e) => {
            arts.add_json(
                "outcome.json",
                &json!({
                    "schema_version": 1,
                    "outcome": "scan-rejected",
                    "detail": e.to_string(),
                }),
            );
            Ok(2)
        }
    }
}

/// Sweep λ points across worker threads. Points are independent, so the
/// merged table is identical to a serial sweep.
fn parallel_sweep(
    spec: &ProblemSpec,
    lambdas: &[f64],
    family: &mfelab::tmprober::ProbeFamily,
    slope_tol: f64,
    threads: usize,
) -> Result<SweepResult, String> {
    let threads = threads.max(1).min(lambdas.len().max(1));
    if threads <= 1 {
        return sweep(spec, lambdas, family, slope_tol).map_err(|e| format!("tm sweep: {e}"));
    }
    let chunks: Vec<Vec<f64>> = (0..threads)
        .map(|t| lambdas.iter().copied().skip(t).step_by(threads).collect())
        .collect();
    let partials: Vec<Result<SweepResult, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                scope.spawn(move || {
                    sweep(spec, chunk, family, slope_tol).map_err(|e| format!("tm sweep: {e}"))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker")).collect()
    });
    let mut merged = SweepResult {
        lambdas: vec![0.0; lambdas.len()],
        values: vec![Vec::new(); lambdas.len()],
        family_infima: vec![0.0; lambdas.len()],
        slopes: vec![0.0; lambdas.len()],
        verdicts: vec![mfelab::tmprober::Verdict::Indeterminate; lambdas.len()],
    };
    for (t, partial) in partials.into_iter().enumerate() {
        let partial = partial?;
        for (k, idx) in (t..lambdas.len()).step_by(threads).enumerate() {
            merged.lambdas[idx] = partial.lambdas[k];
            merged.values[idx] = partial.values[k].clone();
            merged.family_infima[idx] = partial.family_infima[k];
            merged.slopes[idx] = partial.slopes[k];
            merged.verdicts[idx] = partial.verdicts[k];
        }
    }
    Ok(merged)
}

fn run_tm_sweep(cfg: &Resolved, arts: &mut Artifacts, threads: usize) -> Result<i32, String> {
    let direction = cfg
        .tm_direction
        .unwrap_or_else(|| auto_direction(&cfg.spec.measure));
    let family = probe_family(cfg.spec.grid, &cfg.tm_mus, direction)
        .map_err(|e| format!("tm family: {e}"))?;

    if !cfg.tm_lambdas.is_empty() {
        let result = parallel_sweep(&cfg.spec, &cfg.tm_lambdas, &family, cfg.tm_slope_tol, threads)?;
        arts.add_text("sweep.csv", mfelab::tmprober::sweep_to_csv(&result, &family));
    }

    if let Some((lo, hi)) = cfg.tm_bracket {
        match threshold_estimate(&cfg.spec, (lo, hi), &family, cfg.tm_slope_tol) {
            Ok(estimate) => {
                let dir_name = match direction {
                    Side::Plus => "plus",
                    Side::Minus => "minus",
                };
                arts.add_text(
                    "threshold.csv",
                    csv_table(
                        &["variant", "direction", "low", "high", "estimate"],
                        [vec![
                            variant_name(cfg.spec.variant).to_string(),
                            dir_name.to_string(),
                            lo.to_string(),
                            hi.to_string(),
                            estimate.to_string(),
                        ]],
                    ),
                );
                arts.add_json(
                    "threshold.json",
                    &json!({
                        "schema_version": 1,
                        "variant": variant_name(cfg.spec.variant),
                        "direction": match direction {
                            Side::Plus => "plus",
                            Side::Minus => "minus",
                        },
                        "bracket": [lo, hi],
                        "mus": family.mus,
                        "slope_tol": cfg.tm_slope_tol,
                        "estimate": estimate,
                        "warnings": family.warnings,
                    }),
                );
            }
            Err(e @ (mfelab::tmprober::TmError::NoBracket { .. }
            | mfelab::tmprober::TmError::Indeterminate { .. })) => {
                arts.add_json(
                    "outcome.json",
                    &json!({
                        "schema_version": 1,
                        "outcome": "bisection-failed",
                        "detail": e.to_string(),
                    }),
                );
                return Ok(2);
            }
            Err(e) => return Err(format!("tm bisection: {e}")),
        }
    }
    Ok(0)
}

fn run_quantize(cfg: &Resolved, arts: &mut Artifacts) -> i32 {
    let support: Vec<(f64, Side)> = cfg
        .spec
        .measure
        .atoms()
        .iter()
        .filter(|a| a.alpha != 0.0)
        .map(|a| {
            let side = if a.alpha >= 0.0 { Side::Plus } else { Side::Minus };
            (a.alpha, side)
        })
        .collect();
    match quantization_solve(&support) {
        Ok(QuantizationSolution::Single { alpha, mass, intensity_mass }) => {
            arts.add_json(
                "quantize.json",
                &json!({
                    "schema_version": 1,
                    "kind": "single",
                    "alpha": alpha,
                    "mass": mass,
                    "intensity_mass": intensity_mass,
                }),
            );
            0
        }
        Ok(sol @ QuantizationSolution::Pair { alpha_a, alpha_b }) => {
            let samples: Vec<Value> = [0.5, 1.0, 1.5]
                .iter()
                .map(|&f| {
                    let mass_a = f * 8.0 * std::f64::consts::PI;
                    json!({ "mass_a": mass_a, "partners": sol.partner_masses(mass_a) })
                })
                .collect();
            arts.add_json(
                "quantize.json",
                &json!({
                    "schema_version": 1,
                    "kind": "pair",
                    "alpha_a": alpha_a,
                    "alpha_b": alpha_b,
                    "samples": samples,
                }),
            );
            0
        }
        Err(e) => {
            arts.add_json(
                "outcome.json",
                &json!({
                    "schema_version": 1,
                    "outcome": "quantization-unsupported",
                    "detail": e.to_string(),
                }),
            );
            2
        }
    }
}

fn run_check_assumptions(cfg: &Resolved, arts: &mut Artifacts) -> Result<i32, String> {
    let v = resolve_initial(cfg)?;
    let report = check_assumptions(&cfg.spec, &v).map_err(|e| format!("assumptions: {e}"))?;
    let ladder = [0.1, 0.3, 0.5, 0.8, 1.0];
    let monotone =
        monotonicity_check(&v, &ladder).map_err(|e| format!("monotonicity: {e}"))?;
    let inv_area = 1.0 / cfg.spec.grid.area();
    let ok = report.jensen_ok && report.sign_ok && report.c1_prime <= inv_area && monotone;

    let mut text = report.to_text_block();
    text.push_str(&format!("monotone = {monotone}\n"));
    arts.add_text("assumptions.txt", text);
    arts.add_json(
        "check-assumptions.json",
        &json!({
            "schema_version": 1,
            "report": report,
            "monotone": monotone,
            "c1_bound": inv_area,
            "c2_bound": 1.0,
            "all_hold": ok,
        }),
    );
    Ok(if ok { 0 } else { 2 })
}
