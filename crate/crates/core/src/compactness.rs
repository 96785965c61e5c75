//! Logarithmic kernels, the oscillation functional built on them, and the
//! log-Gronwall comparison envelope.

use num_complex::Complex64;

use crate::error::DiagnosticsError;
use crate::spectral::{mean, SpectralGrid};

/// Radius inside which the kernel is exactly `1 / (|x| + h)`.
pub const INNER_RADIUS: f64 = 0.25;
/// Periodic distance beyond which the kernel vanishes.
pub const OUTER_RADIUS: f64 = 0.375;

/// Distance on the unit circle.
#[inline]
pub fn periodic_distance(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `1 - smootherstep`: equals 1 at the inner radius and 0 at the outer, with two
/// vanishing derivatives at both ends.
#[inline]
pub fn cutoff(d: f64) -> f64 {
    if d <= INNER_RADIUS {
        1.0
    } else if d >= OUTER_RADIUS {
        0.0
    } else {
        let s = (d - INNER_RADIUS) / (OUTER_RADIUS - INNER_RADIUS);
        1.0 - s * s * s * (10.0 - s * (15.0 - 6.0 * s))
    }
}

pub fn check_width(h: f64) -> Result<(), DiagnosticsError> {
    if h > 0.0 && h <= 0.125 {
        Ok(())
    } else {
        Err(DiagnosticsError::KernelWidth(h))
    }
}

/// `K_h(x)` evaluated at the periodic distance of `x` from the origin.
#[inline]
pub fn kernel(x: f64, h: f64) -> f64 {
    let d = periodic_distance(x);
    cutoff(d) / (d + h)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integral of `f` over `[a, b]` by Gauss-Legendre on panels geometrically refined toward `a`.
pub fn integrate_graded(f: impl Fn(f64) -> f64, a: f64, b: f64, scale: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mut edges = vec![b];
    let mut e = b;
    while e - a > scale * 0.5 && edges.len() < 200 {
        e = a + (e - a) * 0.25;
        edges.push(e);
    }
    edges.push(a);
    edges.reverse();
    edges
        .windows(2)
        .map(|p| {
            let (lo, hi) = (p[0], p[1]);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            half * x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>()
        })
        .sum()
}

/// `2 ln((1/4 + h) / h)`: the mass of the kernel inside the inner radius.
pub fn kernel_core_mass(h: f64) -> f64 {
    2.0 * ((INNER_RADIUS + h) / h).ln()
}

/// `||K_h||_1` over one period by quadrature.
pub fn kernel_norm(h: f64) -> Result<f64, DiagnosticsError> {
    check_width(h)?;
    let core = integrate_graded(|x| 1.0 / (x + h), 0.0, INNER_RADIUS, h);
    let tail = integrate_graded(|x| cutoff(x) / (x + h), INNER_RADIUS, OUTER_RADIUS, 1.0);
    Ok(2.0 * (core + tail))
}

/// Kernels for a list of widths, with their norms precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelFamily {
    pub h_values: Vec<f64>,
    pub norms: Vec<f64>,
}

impl KernelFamily {
    pub fn new(h_values: &[f64]) -> Result<Self, DiagnosticsError> {
        let norms = h_values.iter().map(|&h| kernel_norm(h)).collect::<Result<_, _>>()?;
        Ok(Self {
            h_values: h_values.to_vec(),
            norms,
        })
    }

    /// `||K_h||_1 / |ln h|` for each width.
    pub fn log_ratios(&self) -> Vec<f64> {
        self.h_values.iter().zip(&self.norms).map(|(h, n)| n / h.ln().abs()).collect()
    }
}

/// Evaluates the oscillation functional on one grid for a fixed width.
#[derive(Clone, Debug)]
pub struct CompactnessFunctional {
    grid: SpectralGrid,
    h: f64,
    norm: f64,
    /// `kappa_0 - Re kappa_k`, the non-negative symbol of the quadratic form.
    symbol: Vec<f64>,
}

impl CompactnessFunctional {
    pub fn new(grid: &SpectralGrid, h: f64) -> Result<Self, DiagnosticsError> {
        let norm = kernel_norm(h)?;
        Self::with_norm(grid, h, norm)
    }

    fn with_norm(grid: &SpectralGrid, h: f64, norm: f64) -> Result<Self, DiagnosticsError> {
        check_width(h)?;
        let m = grid.size();
        let samples: Vec<f64> = (0..m).map(|j| kernel(j as f64 / m as f64, h)).collect();
        let spec = grid.forward(&samples);
        let k0 = spec[0].re;
        let symbol = spec.iter().map(|c| (k0 - c.re).max(0.0)).collect();
        Ok(Self {
            grid: grid.clone(),
            h,
            norm,
            symbol,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel_norm(&self) -> f64 {
        self.norm
    }

    /// `(1 / ||K_h||) (1/M^2) sum_(m,l) K_h(x_m - x_l) (f_m - f_l)^2` via Parseval.
    pub fn evaluate(&self, field: &[f64]) -> f64 {
        let m = self.grid.size() as f64;
        let avg = mean(field);
        let centered: Vec<f64> = field.iter().map(|v| v - avg).collect();
        let spec: Vec<Complex64> = self.grid.forward(&centered);
        let quad: f64 = spec.iter().zip(&self.symbol).map(|(c, s)| s * c.norm_sqr()).sum();
        (2.0 * quad / (self.norm * m * m * m)).max(0.0)
    }
}

/// One-shot evaluation of the functional for `field` on `grid`.
pub fn compactness_functional(grid: &SpectralGrid, field: &[f64], h: f64) -> Result<f64, DiagnosticsError> {
    Ok(CompactnessFunctional::new(grid, h)?.evaluate(field))
}

/// Right side of the comparison ODE `z' = z (|ln z| + 1)`.
#[inline]
pub fn envelope_rate(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        z * (z.ln().abs() + 1.0)
    }
}

/// Dense solution of the comparison ODE on `[0, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    times: Vec<f64>,
    values: Vec<f64>,
    rates: Vec<f64>,
}

impl Envelope {
    /// Classical RK4 on `steps` uniform steps, with cubic Hermite interpolation between nodes.
    pub fn integrate(z0: f64, t_end: f64, steps: usize) -> Self {
        let steps = steps.max(1);
        let dt = t_end / steps as f64;
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        let mut z = z0;
        for s in 0..=steps {
            times.push(s as f64 * dt);
            values.push(z);
            if s == steps {
                break;
            }
            let k1 = envelope_rate(z);
            let k2 = envelope_rate(z + 0.5 * dt * k1);
            let k3 = envelope_rate(z + 0.5 * dt * k2);
            let k4 = envelope_rate(z + dt * k3);
            z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let rates = values.iter().map(|&v| envelope_rate(v)).collect();
        Self { times, values, rates }
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 || t <= 0.0 {
            return self.values[0];
        }
        let dt = self.times[1] - self.times[0];
        let idx = ((t / dt).floor() as usize).min(n - 2);
        let s = ((t - self.times[idx]) / dt).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[idx], self.values[idx + 1]);
        let (d0, d1) = (self.rates[idx] * dt, self.rates[idx + 1] * dt);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

/// Envelope started from `x0 + eps`.
pub fn log_gronwall_envelope(x0: f64, eps: f64, t_end: f64) -> Envelope {
    let steps = ((t_end.abs() * 20_000.0).ceil() as usize).max(1);
    Envelope::integrate(x0 + eps, t_end, steps)
}

/// `e^t z0^(1 - t)`, the explicit upper bound valid while `t < 1`.
pub fn envelope_bound(z0: f64, t: f64) -> f64 {
    t.exp() * z0.powf(1.0 - t)
}

/// Smallest offset `C >= 0` for which the envelope started at `values[0] + C / |ln h|`
/// dominates every sample, found by bisection. `None` if even `C = c_max` fails.
pub fn fit_envelope_offset(times: &[f64], values: &[f64], h: f64, c_max: f64) -> Option<f64> {
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let log_h = h.ln().abs();
    let dominates = |c: f64| {
        let env = log_gronwall_envelope(values[0], c / log_h, t_end);
        times.iter().zip(values).all(|(&t, &v)| env.eval(t) >= v)
    };
    if dominates(0.0) {
        return Some(0.0);
    }
    if !dominates(c_max) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, c_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dominates(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((int - 2.0 / 39.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_is_even_positive_and_cut_off() {
        let h = 0.01;
        for &x in &[0.0, 0.1, 0.26, 0.3, 0.37] {
            assert_eq!(kernel(x, h), kernel(-x, h));
            assert!(kernel(x, h) > 0.0);
        }
        assert_eq!(kernel(0.4, h), 0.0);
        assert_eq!(kernel(0.5, h), 0.0);
        assert!((kernel(0.2, h) - 1.0 / 0.21).abs() < 1e-15);
    }

    #[test]
    fn core_mass_matches_closed_form() {
        for h in [0.125, 1e-2, 1e-4] {
            let core = 2.0 * integrate_graded(|x| 1.0 / (x + h), 0.0, INNER_RADIUS, h);
            assert!((core - kernel_core_mass(h)).abs() <= 1e-12 * core);
        }
        assert!((kernel_core_mass(0.125) - 2.0 * 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn widths_outside_range_are_rejected() {
        assert!(kernel_norm(0.0).is_err());
        assert!(kernel_norm(0.2).is_err());
    }

    #[test]
    fn functional_vanishes_on_constants_and_detects_oscillation() {
        let g = SpectralGrid::new(256).unwrap();
        let f = CompactnessFunctional::new(&g, 1e-2).unwrap();
        assert_eq!(f.evaluate(&[2.5; 256]), 0.0);
        let r4 = f.evaluate(&g.sample(|x| (2.0 * PI * 4.0 * x).sin()));
        let r64 = f.evaluate(&g.sample(|x| (2.0 * PI * 64.0 * x).sin()));
        assert!(r64 >= 0.5 * r4);
    }

    #[test]
    fn envelope_matches_logarithmic_closed_form() {
        // below 1: ln z = 1 - (1 - ln z0) e^(-t)
        let z0: f64 = 1e-4;
        let env = log_gronwall_envelope(z0, 0.0, 0.5);
        let exact = (1.0 - (1.0 - z0.ln()) * (-0.5f64).exp()).exp();
        assert!((env.eval(0.5) - exact).abs() < 1e-10 * exact);
        assert!(env.eval(0.5) <= envelope_bound(z0, 0.5));
        assert!((env.eval(0.123_456) - (1.0 - (1.0 - z0.ln()) * (-0.123_456f64).exp()).exp()).abs() < 1e-10);
    }

    #[test]
    fn envelope_from_one_grows() {
        let env = log_gronwall_envelope(0.5, 0.5, 0.5);
        assert!(env.nodes().skip(1).all(|(_, z)| z > 1.0));
        // above 1: ln z = -1 + e^t
        assert!((env.eval(0.5).ln() - (0.5f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn offset_fit_dominates() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|t| 1e-3 * (1.0 + 40.0 * t)).collect();
        let c = fit_envelope_offset(&times, &values, 1e-2, 10.0).unwrap();
        assert!(c > 0.0);
        let env = log_gronwall_envelope(values[0], c / 1e-2f64.ln().abs(), 0.5);
        assert!(times.iter().zip(&values).all(|(&t, &v)| env.eval(t) >= v));
    }
}
