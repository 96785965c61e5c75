//! Fourier collocation on the periodic unit interval.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::SolverError;

/// Pairwise sum, so that `M` copies of one value sum exactly when `M` is a power of two.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2..=8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Spatial mean, which is also the integral over the unit interval.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Collocation grid `x_m = m / M` with cached transform plans.
#[derive(Clone)]
pub struct SpectralGrid {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers `2 pi k` in transform order.
    wavenumbers: Vec<f64>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("size", &self.size).finish()
    }
}

impl SpectralGrid {
    pub const MIN_SIZE: usize = 16;

    pub fn new(size: usize) -> Result<Self, SolverError> {
        if size < Self::MIN_SIZE || !size.is_power_of_two() {
            return Err(SolverError::Config {
                field: "grid_size",
                reason: format!("must be a power of two and at least {}, got {size}", Self::MIN_SIZE),
            });
        }
        let mut planner = FftPlanner::new();
        let half = size / 2;
        let wavenumbers = (0..size)
            .map(|j| {
                let k = if j <= half { j as f64 } else { j as f64 - size as f64 };
                2.0 * PI * k
            })
            .collect();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            wavenumbers,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|m| m as f64 / self.size as f64).collect()
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.size as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a per-mode multiplier to the fluctuation `field - mean(field)`.
    fn apply(&self, field: &[f64], multiplier: impl Fn(usize, f64) -> Complex64) -> Vec<f64> {
        let avg = mean(field);
        let centered: Vec<f64> = field.iter().map(|v| v - avg).collect();
        let mut spec = self.forward(&centered);
        for (j, s) in spec.iter_mut().enumerate() {
            *s *= multiplier(j, self.wavenumbers[j]);
        }
        self.inverse(spec)
    }

    fn is_nyquist(&self, j: usize) -> bool {
        j == self.size / 2
    }

    /// Whether mode `j` survives the two-thirds truncation.
    fn keeps_mode(&self, j: usize) -> bool {
        let k = if j <= self.size / 2 { j } else { self.size - j };
        3 * k < self.size
    }

    /// Exact derivative of the trigonometric interpolant.
    pub fn derivative(&self, field: &[f64]) -> Vec<f64> {
        self.derivative_filtered(field, false)
    }

    /// Derivative after optionally discarding the upper third of the spectrum.
    pub fn derivative_filtered(&self, field: &[f64], dealias: bool) -> Vec<f64> {
        self.apply(field, |j, k| {
            if self.is_nyquist(j) || (dealias && !self.keeps_mode(j)) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        })
    }

    pub fn second_derivative(&self, field: &[f64]) -> Vec<f64> {
        self.apply(field, |_, k| Complex64::new(-k * k, 0.0))
    }

    /// Two-thirds low-pass filter; the mean is preserved.
    pub fn dealias(&self, field: &[f64]) -> Vec<f64> {
        let avg = mean(field);
        let filtered = self.apply(field, |j, _| {
            if self.keeps_mode(j) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        filtered.into_iter().map(|v| v + avg).collect()
    }

    /// Zero-mean velocity solving `coefficient * u'' = p'` mode by mode.
    pub fn stokes_solve(&self, pressure: &[f64], coefficient: f64) -> Vec<f64> {
        self.apply(pressure, |j, k| {
            if j == 0 || self.is_nyquist(j) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / (coefficient * k))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpectralGrid::new(8).is_err());
        assert!(SpectralGrid::new(48).is_err());
        assert!(SpectralGrid::new(16).is_ok());
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let g = SpectralGrid::new(64).unwrap();
        for c in [0.0, 1.0, 0.1, 3.7e5, -2.2] {
            assert!(g.derivative(&vec![c; 64]).iter().all(|&v| v == 0.0));
            assert!(g.second_derivative(&vec![c; 64]).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = SpectralGrid::new(64).unwrap();
        let d = g.derivative(&g.sample(|x| (2.0 * PI * x).sin()));
        let exact = g.sample(|x| 2.0 * PI * (2.0 * PI * x).cos());
        assert!(max_err(&d, &exact) <= 1e-12);
        let dd = g.second_derivative(&g.sample(|x| (6.0 * PI * x).cos()));
        let exact = g.sample(|x| -36.0 * PI * PI * (6.0 * PI * x).cos());
        assert!(max_err(&dd, &exact) <= 1e-10);
    }

    #[test]
    fn stokes_single_mode() {
        let g = SpectralGrid::new(64).unwrap();
        let u = g.stokes_solve(&g.sample(|x| (2.0 * PI * x).cos()), 2.0);
        let exact = g.sample(|x| (2.0 * PI * x).sin() / (2.0 * PI * 2.0));
        assert!(max_err(&u, &exact) <= 1e-12);
        assert!(g.stokes_solve(&vec![4.0; 64], 2.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dealias_removes_only_high_modes() {
        let g = SpectralGrid::new(32).unwrap();
        let low = g.sample(|x| 1.0 + (2.0 * PI * 10.0 * x).sin());
        assert!(max_err(&g.dealias(&low), &low) < 1e-14);
        let high = g.sample(|x| (2.0 * PI * 11.0 * x).cos());
        assert!(g.dealias(&high).iter().all(|v| v.abs() < 1e-14));
    }

    proptest! {
        #[test]
        fn linear_operators(
            a in proptest::collection::vec(-1.0f64..1.0, 32),
            b in proptest::collection::vec(-1.0f64..1.0, 32),
            s in -3.0f64..3.0,
        ) {
            let g = SpectralGrid::new(32).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
            let (da, db, ds) = (g.derivative(&a), g.derivative(&b), g.derivative(&sum));
            for k in 0..32 {
                prop_assert!((ds[k] - da[k] - s * db[k]).abs() < 1e-11);
            }
            let (ua, ub, us) = (g.stokes_solve(&a, 3.0), g.stokes_solve(&b, 3.0), g.stokes_solve(&sum, 3.0));
            for k in 0..32 {
                prop_assert!((us[k] - ua[k] - s * ub[k]).abs() < 1e-13);
            }
        }

        #[test]
        fn momentum_residual(p in proptest::collection::vec(0.0f64..2.0, 64), coeff in 0.5f64..4.0) {
            let g = SpectralGrid::new(64).unwrap();
            let u = g.stokes_solve(&p, coeff);
            // residual is measured on the resolved modes; the Nyquist mode has no odd derivative
            let lhs: Vec<f64> = g.second_derivative(&u).iter().map(|v| coeff * v).collect();
            let rhs = g.derivative(&p);
            let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_err(&lhs, &rhs) <= 1e-11 * scale);
        }
    }
}
