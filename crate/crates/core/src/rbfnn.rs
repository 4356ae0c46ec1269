//! Gaussian radial basis function networks with online gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::filters::LowPass;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    /// One center per row (N × n).
    centers: DMatrix<f64>,
    widths: DVector<f64>,
    weights: DVector<f64>,
    learning_rate: f64,
    /// Multiplies every weight step; 1 for the plain discrete update, the
    /// control period for the time-scaled variant.
    step_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStatus {
    Applied,
    /// The error signal was not finite; weights were left untouched.
    Skipped,
}

impl RbfNetwork {
    /// Network with zero initial weights.
    pub fn new(centers: DMatrix<f64>, widths: DVector<f64>, learning_rate: f64) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::InvalidParameter("network needs at least one node and one input".into()));
        }
        if widths.len() != centers.nrows() {
            return Err(Error::Dimension { expected: centers.nrows(), got: widths.len() });
        }
        if widths.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter("basis widths must be positive".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("centers must be finite".into()));
        }
        if !(learning_rate > 0.0 && learning_rate < 1.0) {
            return Err(Error::InvalidParameter(format!("learning rate {learning_rate} outside (0, 1)")));
        }
        let n = centers.nrows();
        Ok(Self { centers, widths, weights: DVector::zeros(n), learning_rate, step_scale: 1.0 })
    }

    /// Scales each weight step by `dt`, approximating `Ẇ = η E S` in continuous time.
    pub fn with_time_scaling(mut self, dt: f64) -> Self {
        self.step_scale = dt;
        self
    }

    pub fn nodes(&self) -> usize {
        self.centers.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: DVector<f64>) -> Result<()> {
        if weights.len() != self.nodes() {
            return Err(Error::Dimension { expected: self.nodes(), got: weights.len() });
        }
        self.weights = weights;
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// `s_i(X) = exp(−‖X − C_i‖² / b_i²)`.
    pub fn basis(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(DVector::from_fn(self.nodes(), |i, _| {
            let d2: f64 = self.centers.row(i).iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
            (-d2 / (self.widths[i] * self.widths[i])).exp()
        }))
    }

    /// `Wᵀ S(X)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.weights.dot(&self.basis(x)?))
    }

    /// One online gradient step `W ← W + η E S(X)`.
    pub fn ogd_update(&mut self, error: f64, x: &[f64]) -> Result<UpdateStatus> {
        let s = self.basis(x)?;
        if !error.is_finite() {
            return Ok(UpdateStatus::Skipped);
        }
        self.weights.axpy(self.learning_rate * self.step_scale * error, &s, 1.0);
        Ok(UpdateStatus::Applied)
    }
}

/// Latin hypercube sample of `n` points inside per-dimension `bounds`,
/// returned one point per row.
pub fn latin_hypercube<R: Rng + ?Sized>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, bounds.len());
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates over the strata
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        for (row, &s) in strata.iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            out[(row, d)] = lo + u * (hi - lo);
        }
    }
    out
}

/// Mean distance from each center to its nearest neighbour.
pub fn mean_nearest_center_distance(centers: &DMatrix<f64>) -> f64 {
    let n = centers.nrows();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (centers.row(i) - centers.row(j)).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / n as f64
}

/// Training signal `E = ż_even + z_odd + k·z_even`, with `ż_even` taken as a
/// backward difference. Returns 0 when there is no previous sample.
pub fn error_signal(z_prev: Option<f64>, z_curr: f64, z_odd: f64, gain: f64, dt: f64) -> f64 {
    match z_prev {
        Some(prev) => (z_curr - prev) / dt + z_odd + gain * z_curr,
        None => 0.0,
    }
}

/// Stateful [`error_signal`] with an optional low-pass on the output.
#[derive(Debug, Clone)]
pub struct ErrorSignal {
    dt: f64,
    gain: f64,
    prev: Option<f64>,
    filter: Option<LowPass<f64>>,
}

impl ErrorSignal {
    pub fn new(gain: f64, dt: f64, filter_cutoff: Option<f64>) -> Self {
        Self { dt, gain, prev: None, filter: filter_cutoff.map(|c| LowPass::new(c, dt, 0.0)) }
    }

    pub fn update(&mut self, z_even: f64, z_odd: f64) -> f64 {
        let e = error_signal(self.prev, z_even, z_odd, self.gain, self.dt);
        let primed = self.prev.is_some();
        self.prev = Some(z_even);
        match (&mut self.filter, primed) {
            (Some(f), true) => f.update(e),
            _ => e,
        }
    }
}
