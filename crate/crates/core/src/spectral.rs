//! Two-dimensional FFT plumbing on square periodic grids.
//!
//! Plans are cached per grid size behind a mutex; transforms themselves run
//! on per-call buffers, so fields can be processed from several threads. All
//! operators are applied as mode multipliers on the unnormalized forward
//! transform, with the 1/N² normalization folded into the inverse pass.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    let entry = map.entry(n).or_insert_with(|| {
        let mut planner = FftPlanner::new();
        (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
    });
    (entry.0.clone(), entry.1.clone())
}

fn transpose(n: usize, data: &mut [Complex<f64>]) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn fft2(plan: &Plan, n: usize, data: &mut [Complex<f64>]) {
    let mut scratch = vec![Complex::ZERO; plan.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose(n, data);
    for row in data.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose(n, data);
}

/// Signed integer mode for index `i` on a length-`n` transform, with the
/// Nyquist index mapped to +n/2.
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Applies a diagonal operator in mode space: each Fourier coefficient at
/// integer modes (m₁, m₂) is multiplied by `f(m₁, m₂)`. The multiplier must
/// satisfy f(-m) = conj(f(m)) for the output to be real; the imaginary
/// residue is discarded.
pub fn apply_mode_multiplier(
    n: usize,
    values: &[f64],
    f: impl Fn(i64, i64) -> Complex<f64>,
) -> Vec<f64> {
    debug_assert_eq!(values.len(), n * n);
    let (fwd, inv) = plans(n);
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&fwd, n, &mut data);
    for i in 0..n {
        let m1 = signed_mode(i, n);
        for j in 0..n {
            let m2 = signed_mode(j, n);
            data[i * n + j] *= f(m1, m2);
        }
    }
    fft2(&inv, n, &mut data);
    let norm = 1.0 / (n * n) as f64;
    data.iter().map(|c| c.re * norm).collect()
}
