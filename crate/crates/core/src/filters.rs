//! Discrete first-order filters used by the estimators and controllers.

use std::ops::{Add, Mul, Sub};

/// Exact zero-order-hold discretisation of `ẏ = ω_c (x − y)`.
#[derive(Debug, Clone, Copy)]
pub struct LowPass<T> {
    alpha: f64,
    state: T,
}

impl<T> LowPass<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(cutoff: f64, dt: f64, initial: T) -> Self {
        Self { alpha: 1.0 - (-cutoff * dt).exp(), state: initial }
    }

    pub fn update(&mut self, x: T) -> T {
        self.state = self.state + (x - self.state) * self.alpha;
        self.state
    }

    pub fn value(&self) -> T {
        self.state
    }
}

/// Backward difference followed by a first-order low-pass. The first sample
/// only primes the difference and yields `zero`.
#[derive(Debug, Clone, Copy)]
pub struct FilteredDerivative<T> {
    dt: f64,
    prev: Option<T>,
    filter: Option<LowPass<T>>,
    zero: T,
}

impl<T> FilteredDerivative<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    /// `cutoff = None` leaves the raw backward difference.
    pub fn new(cutoff: Option<f64>, dt: f64, zero: T) -> Self {
        Self { dt, prev: None, filter: cutoff.map(|c| LowPass::new(c, dt, zero)), zero }
    }

    pub fn update(&mut self, x: T) -> T {
        let raw = match self.prev {
            Some(p) => (x - p) * (1.0 / self.dt),
            None => {
                self.prev = Some(x);
                return self.zero;
            }
        };
        self.prev = Some(x);
        match self.filter.as_mut() {
            Some(f) => f.update(raw),
            None => raw,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_pass_step_response_matches_exponential() {
        let (wc, dt) = (50.0, 0.002);
        let mut f = LowPass::new(wc, dt, 0.0);
        let mut y = 0.0;
        for _ in 0..10 {
            y = f.update(1.0);
        }
        assert!((y - (1.0 - (-wc * dt * 10.0_f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn raw_derivative_is_exact_for_ramps() {
        let mut d = FilteredDerivative::new(None, 0.01, 0.0);
        assert_eq!(d.update(1.0), 0.0);
        for k in 1..5 {
            let v = d.update(1.0 + 3.0 * 0.01 * k as f64);
            assert!((v - 3.0).abs() < 1e-12);
        }
    }
}
