//! Scalar fields on the flat torus [0, L)² and their spectral calculus.
//!
//! Fields are N×N point samples at cell centers, row-major with the first
//! index along x₁. Differential operators act through the discrete Fourier
//! transform, so they are exact on band-limited data. Sign convention: the
//! Laplacian here is the geometer's nonnegative operator -Δ, matching the
//! way it enters the equations; `solve_poisson` is its inverse on the
//! mean-zero subspace.

use crate::numerics::pairwise_sum;
use crate::spectral;
use rustfft::num_complex::Complex;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// |∫f| ≤ MEAN_ZERO_TOL·‖f‖₂ counts as mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("bad grid: {0}")]
    BadGrid(String),
}

/// Square periodic cell [0, L)² sampled on an N×N lattice of cell centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TorusGrid {
    n: usize,
    l: f64,
}

impl TorusGrid {
    /// N must be even (the spectral operators need a well-defined Nyquist
    /// split) and at least 8; L strictly positive.
    pub fn new(l: f64, n: usize) -> Result<Self, FieldError> {
        if !(l.is_finite() && l > 0.0) {
            return Err(FieldError::BadGrid(format!("side length {l} must be positive")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(FieldError::BadGrid(format!(
                "resolution must be even and at least 8, got {n}"
            )));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length L.
    pub fn side(&self) -> f64 {
        self.l
    }

    /// Cell width h = L/N.
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// |Ω| = L².
    pub fn area(&self) -> f64 {
        self.l * self.l
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Coordinates of the (i, j) cell center.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    /// Shortest signed offset from b to a along one axis, in (-L/2, L/2].
    pub fn wrap(&self, delta: f64) -> f64 {
        let mut d = delta.rem_euclid(self.l);
        if d > self.l / 2.0 {
            d -= self.l;
        }
        d
    }

    /// Geodesic distance on the torus.
    pub fn distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let dx = self.wrap(a.0 - b.0);
        let dy = self.wrap(a.1 - b.1);
        dx.hypot(dy)
    }

    /// Angular wavenumber of integer mode m.
    fn wavenumber(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.l
    }

    /// |k|² for the integer mode pair.
    fn k_squared(&self, m1: i64, m2: i64) -> f64 {
        let k1 = self.wavenumber(m1);
        let k2 = self.wavenumber(m2);
        k1 * k1 + k2 * k2
    }
}

/// N×N real samples over a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n * grid.n],
        }
    }

    /// Samples `f(x₁, x₂)` at every cell center.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = grid.cell_center(i, j);
                values.push(f(x1, x2));
            }
        }
        Self { grid, values }
    }

    /// Wraps existing samples; the length must be N².
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.n * grid.n {
            return Err(FieldError::BadGrid(format!(
                "expected {} samples, got {}",
                grid.n * grid.n,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sample at row i (x₁ direction), column j (x₂ direction).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn assert_same_grid(&self, other: &Field) {
        assert_eq!(
            self.grid, other.grid,
            "fields live on different grids"
        );
    }

    /// ∫_Ω f dx by the midpoint rule (pairwise-summed, order-fixed).
    pub fn integrate(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.area()
    }

    /// ∫ fg dx. Exact in the discrete Parseval sense.
    pub fn inner(&self, other: &Field) -> f64 {
        self.assert_same_grid(other);
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        pairwise_sum(&prods) * self.grid.cell_area()
    }

    /// L² norm sqrt(∫ f²).
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// |∫f| ≤ [`MEAN_ZERO_TOL`]·‖f‖₂.
    pub fn is_mean_zero(&self) -> bool {
        self.integrate().abs() <= MEAN_ZERO_TOL * self.l2_norm()
    }

    /// Subtracts the discrete mean in place.
    pub fn project_mean_zero(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// self += a·x.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        self.assert_same_grid(x);
        for (v, xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.assert_same_grid(other);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.assert_same_grid(other);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// The nonnegative Laplacian -Δf, applied spectrally (multiplier |k|²).
    /// Exact on band-limited fields; together with [`solve_poisson`]
    /// (its inverse) it satisfies `f.laplacian().solve_poisson() = f - f̄`.
    ///
    /// [`solve_poisson`]: Self::solve_poisson
    pub fn laplacian(&self) -> Field {
        let g = self.grid;
        Field {
            grid: g,
            values: spectral::apply_mode_multiplier(g.n, &self.values, |m1, m2| {
                Complex::new(g.k_squared(m1, m2), 0.0)
            }),
        }
    }

    /// The unique mean-zero u with -Δu = f - mean(f): nonzero modes divided
    /// by |k|², the constant mode dropped.
    pub fn solve_poisson(&self) -> Field {
        let g = self.grid;
        Field {
            grid: g,
            values: spectral::apply_mode_multiplier(g.n, &self.values, |m1, m2| {
                if m1 == 0 && m2 == 0 {
                    Complex::ZERO
                } else {
                    Complex::new(1.0 / g.k_squared(m1, m2), 0.0)
                }
            }),
        }
    }

    /// Convolution with the mean-zero Green's function of -Δ on the torus,
    /// which is exactly the Poisson solve of the density.
    pub fn green_convolve(&self) -> Field {
        self.solve_poisson()
    }

    /// Spectral partial derivatives (∂₁f, ∂₂f). The Nyquist mode carries no
    /// usable sign information for odd derivatives and is dropped.
    pub fn gradient(&self) -> (Field, Field) {
        let g = self.grid;
        let nyq = (g.n / 2) as i64;
        let d1 = spectral::apply_mode_multiplier(g.n, &self.values, |m1, _| {
            if m1 == nyq {
                Complex::ZERO
            } else {
                Complex::new(0.0, g.wavenumber(m1))
            }
        });
        let d2 = spectral::apply_mode_multiplier(g.n, &self.values, |_, m2| {
            if m2 == nyq {
                Complex::ZERO
            } else {
                Complex::new(0.0, g.wavenumber(m2))
            }
        });
        (
            Field { grid: g, values: d1 },
            Field { grid: g, values: d2 },
        )
    }

    /// ∫|∇f|² dx, evaluated as ⟨f, -Δf⟩ so that it is exactly the quadratic
    /// form differentiated by [`laplacian`](Self::laplacian) (all modes,
    /// Nyquist included).
    pub fn dirichlet_energy(&self) -> f64 {
        self.inner(&self.laplacian()).max(0.0)
    }
}
