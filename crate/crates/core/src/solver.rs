//! Variational and root-finding solvers for the discrete mean-field
//! equations, plus parameter continuation and a spectral stability probe.
//!
//! All iterations live on the mean-zero subspace and use the Poisson solve
//! as preconditioner, which turns the L² gradient into the natural descent
//! direction for the gradient part ½‖∇v‖² of the free energy.

use crate::blowup::{self, BubbleSpec};
use crate::field::Field;
use crate::field::TorusGrid;
use crate::io::csv_table;
use crate::meanfield::{functional, functional_gradient, residual, MeanFieldError, ProblemSpec};
use crate::measure::Side;
use crate::rng::Xoshiro256PlusPlus;
use thiserror::Error;

/// Solutions with L² norm below this are treated as the trivial branch
/// when reseeding continuation.
pub const TRIVIAL_BRANCH_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("bad solver options: {0}")]
    BadOptions(String),
    #[error("diverged after {iterations} iterations: free energy {functional_value} fell below the floor")]
    Diverged { iterations: usize, functional_value: f64 },
    #[error("stalled after {iterations} iterations at residual norm {residual_norm}")]
    Stalled { iterations: usize, residual_norm: f64 },
    #[error("singular linearization at iteration {iterations}: inner solve made no progress from residual norm {residual_norm}")]
    SingularLinearization { iterations: usize, residual_norm: f64 },
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Convergence threshold on the L² residual norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step length, in (0, 1].
    pub damping: f64,
    /// Armijo sufficient-decrease constant, in (0, 0.5).
    pub linesearch_c: f64,
    /// Base step for finite-difference Jacobian-vector products.
    pub fd_eps: f64,
    /// A free-energy value below this aborts with
    /// [`SolverError::Diverged`]; the default is far below anything a
    /// bounded problem can reach.
    pub divergence_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            damping: 1.0,
            linesearch_c: 1e-4,
            fd_eps: 1e-7,
            divergence_floor: -1e6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolverError::BadOptions(format!("tol {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolverError::BadOptions("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::BadOptions(format!(
                "damping {} must lie in (0, 1]",
                self.damping
            )));
        }
        if !(self.linesearch_c > 0.0 && self.linesearch_c < 0.5) {
            return Err(SolverError::BadOptions(format!(
                "linesearch_c {} must lie in (0, 0.5)",
                self.linesearch_c
            )));
        }
        if !(self.fd_eps > 0.0 && self.fd_eps.is_finite()) {
            return Err(SolverError::BadOptions(format!(
                "fd_eps {} must be positive",
                self.fd_eps
            )));
        }
        if !self.divergence_floor.is_finite() {
            return Err(SolverError::BadOptions("divergence_floor must be finite".into()));
        }
        Ok(())
    }
}

/// One accepted iteration of either solver.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    pub functional_value: f64,
    pub step_length: f64,
}

/// Terminal state of a solve. `converged` distinguishes a finished
/// iteration budget from an actual solution.
#[derive(Clone, Debug)]
pub struct Solution {
    pub v: Field,
    pub spec: ProblemSpec,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub functional_value: f64,
    pub trace: Vec<IterationRecord>,
}

/// Solver trace as CSV rows `iteration,residual_norm,functional_value,step_length`.
pub fn trace_to_csv(trace: &[IterationRecord]) -> String {
    csv_table(
        &["iteration", "residual_norm", "functional_value", "step_length"],
        trace.iter().map(|r| {
            vec![
                format!("{}", r.iteration),
                format!("{}", r.residual_norm),
                format!("{}", r.functional_value),
                format!("{}", r.step_length),
            ]
        }),
    )
}

/// Free-energy descent: Poisson-preconditioned gradient direction with a
/// backtracking Armijo line search. Robust far from solutions; linear
/// convergence near them.
pub fn minimize(spec: &ProblemSpec, v0: &Field, opts: &SolverOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    let mut v = v0.clone();
    v.project_mean_zero();
    let mut grad = functional_gradient(spec, &v)?;
    let mut rnorm = grad.l2_norm();
    let mut fval = functional(spec, &v)?;
    let mut trace = vec![IterationRecord {
        iteration: 0,
        residual_norm: rnorm,
        functional_value: fval,
        step_length: 0.0,
    }];

    let mut iterations = 0;
    while rnorm > opts.tol && iterations < opts.max_iter {
        let direction = grad.solve_poisson().scaled(-1.0);
        let slope = grad.inner(&direction);
        if slope >= 0.0 {
            // The preconditioned direction stopped being a descent
            // direction; only rounding noise is left.
            return Err(SolverError::Stalled { iterations, residual_norm: rnorm });
        }
        let mut step = opts.damping;
        let mut accepted = None;
        // Near the minimum the true decrease falls below the rounding floor
        // of the functional value itself; the slack keeps full steps
        // acceptable there so the residual can keep contracting.
        let slack = 1e-14 * (1.0 + fval.abs());
        for _ in 0..60 {
            let mut trial = v.clone();
            trial.axpy(step, &direction);
            trial.project_mean_zero();
            let trial_val = functional(spec, &trial)?;
            if trial_val <= fval + opts.linesearch_c * step * slope + slack {
                accepted = Some((trial, trial_val));
                break;
            }
            step *= 0.5;
        }
        let Some((next_v, next_val)) = accepted else {
            return Err(SolverError::Stalled { iterations, residual_norm: rnorm });
        };
        v = next_v;
        fval = next_val;
        grad = functional_gradient(spec, &v)?;
        rnorm = grad.l2_norm();
        iterations += 1;
        trace.push(IterationRecord {
            iteration: iterations,
            residual_norm: rnorm,
            functional_value: fval,
            step_length: step,
        });
        if fval < opts.divergence_floor {
            return Err(SolverError::Diverged { iterations, functional_value: fval });
        }
    }

    Ok(Solution {
        v,
        spec: spec.clone(),
        residual_norm: rnorm,
        iterations,
        converged: rnorm <= opts.tol,
        functional_value: fval,
        trace,
    })
}

/// Central finite-difference Jacobian-vector product of the residual map at
/// v along u. The probe step scales with the field so the same `fd_eps`
/// works across amplitudes.
pub fn jacobian_vector_product(
    spec: &ProblemSpec,
    v: &Field,
    u: &Field,
    fd_eps: f64,
) -> Result<Field, SolverError> {
    let unorm = u.l2_norm();
    if unorm == 0.0 {
        return Ok(Field::zeros(v.grid()));
    }
    let eps = fd_eps * (1.0 + v.l2_norm()) / unorm;
    let mut vp = v.clone();
    vp.axpy(eps, u);
    let mut vm = v.clone();
    vm.axpy(-eps, u);
    let fp = residual(spec, &vp)?;
    let fm = residual(spec, &vm)?;
    let mut out = fp.sub(&fm).scaled(1.0 / (2.0 * eps));
    out.project_mean_zero();
    Ok(out)
}

/// Inner linear solve for the Newton step: preconditioned conjugate
/// gradients on J δ = -F with M⁻¹ = Poisson solve. The Jacobian is
/// symmetric but may be indefinite past the first bifurcation, so the
/// iteration truncates on negative curvature (the partial step is still a
/// useful inexact Newton direction).
fn newton_direction(
    spec: &ProblemSpec,
    v: &Field,
    f: &Field,
    opts: &SolverOptions,
    iterations: usize,
    rnorm: f64,
) -> Result<Field, SolverError> {
    const INNER_MAX: usize = 80;
    const ETA: f64 = 1e-3;

    let mut x = Field::zeros(v.grid());
    let mut r = f.scaled(-1.0);
    let mut z = r.solve_poisson();
    let mut rz = r.inner(&z);
    let mut p = z.clone();
    let target = ETA * rnorm;
    let mut made_progress = false;
    for _ in 0..INNER_MAX {
        let ap = jacobian_vector_product(spec, v, &p, opts.fd_eps)?;
        let pap = p.inner(&ap);
        if pap <= 1e-14 * p.l2_norm().powi(2) {
            if !made_progress {
                // First direction already has nonpositive curvature; fall
                // back to the preconditioned steepest-descent step.
                x = z;
                made_progress = true;
            }
            break;
        }
        let gamma = rz / pap;
        x.axpy(gamma, &p);
        made_progress = true;
        r.axpy(-gamma, &ap);
        if r.l2_norm() <= target {
            break;
        }
        z = r.solve_poisson();
        let rz_new = r.inner(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        let mut p_next = z.clone();
        p_next.axpy(beta, &p);
        p = p_next;
    }
    if !made_progress || r.l2_norm() > 0.99 * rnorm {
        return Err(SolverError::SingularLinearization { iterations, residual_norm: rnorm });
    }
    Ok(x)
}

/// Damped Newton on the residual map with finite-difference linearization.
/// Quadratic convergence near nondegenerate solutions; the step is halved
/// until the residual norm satisfies a sufficient-decrease test.
pub fn newton_solve(spec: &ProblemSpec, v0: &Field, opts: &SolverOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    let mut v = v0.clone();
    v.project_mean_zero();
    let mut f = residual(spec, &v)?;
    let mut rnorm = f.l2_norm();
    let mut fval = functional(spec, &v)?;
    let initial_rnorm = rnorm;
    let mut trace = vec![IterationRecord {
        iteration: 0,
        residual_norm: rnorm,
        functional_value: fval,
        step_length: 0.0,
    }];

    let mut iterations = 0;
    while rnorm > opts.tol && iterations < opts.max_iter {
        let delta = newton_direction(spec, &v, &f, opts, iterations, rnorm)?;
        let mut step = opts.damping;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = v.clone();
            trial.axpy(step, &delta);
            trial.project_mean_zero();
            let trial_f = residual(spec, &trial)?;
            let trial_norm = trial_f.l2_norm();
            if trial_norm <= (1.0 - opts.linesearch_c * step) * rnorm {
                accepted = Some((trial, trial_f, trial_norm));
                break;
            }
            step *= 0.5;
        }
        let Some((next_v, next_f, next_norm)) = accepted else {
            return Err(SolverError::Stalled { iterations, residual_norm: rnorm });
        };
        v = next_v;
        f = next_f;
        rnorm = next_norm;
        fval = functional(spec, &v)?;
        iterations += 1;
        trace.push(IterationRecord {
            iteration: iterations,
            residual_norm: rnorm,
            functional_value: fval,
            step_length: step,
        });
        if fval < opts.divergence_floor || rnorm > 1e8 * (initial_rnorm + 1.0) {
            return Err(SolverError::Diverged { iterations, functional_value: fval });
        }
    }

    Ok(Solution {
        v,
        spec: spec.clone(),
        residual_norm: rnorm,
        iterations,
        converged: rnorm <= opts.tol,
        functional_value: fval,
        trace,
    })
}

/// Outcome of one continuation entry.
#[derive(Debug)]
pub enum StepOutcome {
    Solved(Solution),
    Failed(SolverError),
    /// Skipped because an earlier entry failed hard.
    Unsolved,
}

#[derive(Debug)]
pub struct ContinuationStep {
    pub lambda: f64,
    pub outcome: StepOutcome,
}

#[derive(Debug)]
pub struct ContinuationRun {
    pub steps: Vec<ContinuationStep>,
}

/// Newton continuation along a λ schedule, seeding each solve with the
/// previous solution. When the previous solution is numerically trivial the
/// original seed is reused instead, so a branch that only exists past a
/// bifurcation can still be picked up. Divergence or a singular
/// linearization aborts the rest of the schedule.
pub fn continuation(
    template: &ProblemSpec,
    lambdas: &[f64],
    v0: &Field,
    opts: &SolverOptions,
) -> Result<ContinuationRun, SolverError> {
    opts.validate()?;
    let mut steps = Vec::with_capacity(lambdas.len());
    let mut seed = v0.clone();
    let mut aborted = false;
    for &lambda in lambdas {
        if aborted {
            steps.push(ContinuationStep { lambda, outcome: StepOutcome::Unsolved });
            continue;
        }
        let spec = ProblemSpec::new(template.variant, lambda, template.measure.clone(), template.grid)?;
        match newton_solve(&spec, &seed, opts) {
            Ok(sol) => {
                seed = if sol.v.l2_norm() < TRIVIAL_BRANCH_TOL {
                    v0.clone()
                } else {
                    sol.v.clone()
                };
                steps.push(ContinuationStep { lambda, outcome: StepOutcome::Solved(sol) });
            }
            Err(e @ SolverError::Stalled { .. }) => {
                // A stalled line search is local; keep trying later entries
                // from the same seed.
                steps.push(ContinuationStep { lambda, outcome: StepOutcome::Failed(e) });
            }
            Err(e) => {
                steps.push(ContinuationStep { lambda, outcome: StepOutcome::Failed(e) });
                aborted = true;
            }
        }
    }
    Ok(ContinuationRun { steps })
}

/// Smallest eigenvalue of the Poisson-preconditioned linearization at v,
/// computed by shifted power iteration in the Dirichlet inner product.
///
/// The operator T = (-Δ)⁻¹ J is self-adjoint in that inner product with
/// spectrum bounded above by 1 (the entropy part of the free energy is
/// concave), so iterating on 2I - T isolates the bottom eigenvalue. Signs
/// of the result track stability of v: the value crosses zero exactly at a
/// bifurcation.
pub fn smallest_ritz_value(
    spec: &ProblemSpec,
    v: &Field,
    iters: usize,
    fd_eps: f64,
    seed: u64,
) -> Result<f64, SolverError> {
    const SHIFT: f64 = 2.0;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut u = Field::zeros(v.grid());
    for x in u.values_mut() {
        *x = rng.next_symmetric();
    }
    u.project_mean_zero();
    let dir_norm = |f: &Field| f.dirichlet_energy().sqrt();
    let s = dir_norm(&u);
    if s > 0.0 {
        u = u.scaled(1.0 / s);
    }
    let mut theta = 0.0;
    for _ in 0..iters {
        // T u = P(J u); B u = SHIFT·u - T u.
        let ju = jacobian_vector_product(spec, v, &u, fd_eps)?;
        let tu = ju.solve_poisson();
        let mut bu = u.scaled(SHIFT);
        bu.axpy(-1.0, &tu);
        // Rayleigh quotient of T in the Dirichlet metric:
        // ⟨u, Tu⟩_D = ⟨u, Ju⟩_{L²} for mean-zero u.
        theta = u.inner(&ju);
        let norm = dir_norm(&bu);
        if norm == 0.0 {
            break;
        }
        u = bu.scaled(1.0 / norm);
    }
    Ok(theta)
}

/// Ready-made starting fields for the solvers.
#[derive(Clone, Copy, Debug)]
pub enum InitialField {
    Zero,
    /// amplitude·cos(2π x₁ / L), the lowest nonconstant mode.
    Fourier { amplitude: f64 },
    /// Concentrated Liouville profile at the domain center.
    Bubble { mu: f64, side: Side },
    /// Smoothed seeded noise scaled to the requested sup norm.
    Random { amplitude: f64, seed: u64 },
}

pub fn initial_field(grid: TorusGrid, preset: InitialField) -> Field {
    match preset {
        InitialField::Zero => Field::zeros(grid),
        InitialField::Fourier { amplitude } => {
            let l = grid.side();
            Field::from_fn(grid, move |x1, _| {
                amplitude * (2.0 * std::f64::consts::PI * x1 / l).cos()
            })
        }
        InitialField::Bubble { mu, side } => {
            // Center on the sample nearest the cell midpoint, not the
            // midpoint itself: that lattice corner has four equidistant
            // samples whose exact tie defeats strict peak dominance.
            let mid = grid.side() / 2.0 + grid.spacing() / 2.0;
            let sign = match side {
                Side::Plus => 1.0,
                Side::Minus => -1.0,
            };
            blowup::liouville_bubble(grid, &BubbleSpec { center: (mid, mid), scale: mu, sign })
        }
        InitialField::Random { amplitude, seed } => {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let mut noise = Field::zeros(grid);
            for x in noise.values_mut() {
                *x = rng.next_symmetric();
            }
            // The Poisson solve turns white noise into a smooth mean-zero
            // field; rescale to the requested amplitude.
            let mut v = noise.solve_poisson();
            let sup = v.linf_norm();
            if sup > 0.0 {
                v = v.scaled(amplitude / sup);
            }
            v
        }
    }
}
