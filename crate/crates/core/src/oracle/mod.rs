//! Brute-force references for cross-checking the main code path.
//!
//! Nothing here calls into the flux, entropy, spectral or solver modules; each
//! reference is rebuilt from elementary arithmetic so a bug there cannot confirm itself.

pub mod suite;

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;

/// One comparison between a computed and a reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case: String,
    pub computed: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl OracleReport {
    pub fn new(case: impl Into<String>, computed: f64, reference: f64) -> Self {
        let abs_error = (computed - reference).abs();
        let rel_error = if reference != 0.0 {
            abs_error / reference.abs()
        } else {
            abs_error
        };
        Self {
            case: case.into(),
            computed,
            reference,
            abs_error,
            rel_error,
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det_numeric(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    det
}

/// Central-difference Jacobian with per-coordinate steps `step * |x_j|`.
pub fn jacobian_fd(map: impl Fn(&[f64]) -> Vec<f64>, point: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = point.len();
    let m = map(point).len();
    let mut jac = vec![vec![0.0; n]; m];
    for j in 0..n {
        let h = step * point[j].abs().max(f64::MIN_POSITIVE);
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (fp, fm) = (map(&plus), map(&minus));
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (plus[j] - minus[j]);
        }
    }
    jac
}

/// `(z_1, ..., z_N) -> (q_1, ..., q_(N-1), sum z)` written out directly.
pub fn entropy_map_reference(z: &[f64], gamma: &[f64], mass: &[f64]) -> Vec<f64> {
    let n = z.len();
    let h: Vec<f64> = (0..n)
        .map(|i| gamma[i] / ((gamma[i] - 1.0) * mass[i]) * z[i].powf(gamma[i] - 1.0))
        .collect();
    let mut out: Vec<f64> = (0..n - 1).map(|i| h[i] - h[i + 1]).collect();
    out.push(z.iter().sum());
    out
}

/// Flux-matrix entries written from the two-branch definition with plain loops.
pub fn b_matrix_reference(rho: &[f64]) -> Vec<Vec<f64>> {
    let n = rho.len();
    let total: f64 = rho.iter().sum();
    (0..n - 1)
        .map(|i| {
            (0..n - 1)
                .map(|j| {
                    if j < i {
                        -rho[i] / total * (0..=j).map(|k| rho[k]).sum::<f64>()
                    } else {
                        rho[i] / total * (j + 1..n).map(|k| rho[k]).sum::<f64>()
                    }
                })
                .collect()
        })
        .collect()
}

fn reference_kernel(x: f64, h: f64) -> f64 {
    let mut d = x.abs() % 1.0;
    if d > 0.5 {
        d = 1.0 - d;
    }
    if d >= 0.375 {
        return 0.0;
    }
    let weight = if d <= 0.25 {
        1.0
    } else {
        let s = 8.0 * (d - 0.25);
        1.0 - (10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5))
    };
    weight / (d + h)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let (left, right) = (simpson(f, a, c), simpson(f, c, b));
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, c, left, 0.5 * tol, depth - 1) + recurse(f, c, b, right, 0.5 * tol, depth - 1)
        }
    }
    recurse(f, a, b, simpson(f, a, b), tol, depth)
}

/// Kernel mass: closed form inside the inner radius plus adaptive Simpson on the cutoff.
pub fn kernel_norm_reference(h: f64) -> f64 {
    let core = 2.0 * ((0.25 + h) / h).ln();
    let tail = adaptive_simpson(&|x| reference_kernel(x, h), 0.25, 0.375, 1e-17, 40);
    core + 2.0 * tail
}

/// Largest grid accepted by [`rh_double_sum`].
pub const DOUBLE_SUM_LIMIT: usize = 1024;

/// `(1/||K_h||)(1/M^2) sum_(m,l) K_h(x_m - x_l) (f_m - f_l)^2` by direct summation.
pub fn rh_double_sum(field: &[f64], h: f64) -> Result<f64, DiagnosticsError> {
    let m = field.len();
    if m > DOUBLE_SUM_LIMIT {
        return Err(DiagnosticsError::TooLarge {
            size: m,
            limit: DOUBLE_SUM_LIMIT,
        });
    }
    if !(h > 0.0 && h <= 0.125) {
        return Err(DiagnosticsError::KernelWidth(h));
    }
    let weights: Vec<f64> = (0..m).map(|j| reference_kernel(j as f64 / m as f64, h)).collect();
    let mut sum = 0.0;
    for a in 0..m {
        for b in 0..m {
            let d = field[a] - field[b];
            sum += weights[(a + m - b) % m] * d * d;
        }
    }
    Ok(sum / (kernel_norm_reference(h) * (m * m) as f64))
}

/// Mass-action rates of a single irreversible channel, written out directly.
pub fn wellmixed_rates(reagents: &[usize], alpha: &[f64], products: &[usize], weights: &[f64], rho: &[f64]) -> Vec<f64> {
    let mut activity = 1.0;
    for &j in reagents {
        activity *= rho[j];
    }
    let mut w = vec![0.0; rho.len()];
    for (k, &i) in reagents.iter().enumerate() {
        w[i] = -alpha[k] * activity;
    }
    for (k, &c) in products.iter().enumerate() {
        w[c] = weights[k] * activity;
    }
    w
}

/// Adaptive Dormand-Prince 5(4) integration of the well-mixed reaction system.
pub fn ode_reference_wellmixed(
    reagents: &[usize],
    alpha: &[f64],
    products: &[usize],
    weights: &[f64],
    initial: &[f64],
    t_end: f64,
    tol: f64,
) -> Vec<f64> {
    let f = |y: &[f64]| wellmixed_rates(reagents, alpha, products, weights, y);
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = initial.len();
    let mut y = initial.to_vec();
    let mut t = 0.0;
    let mut h = (t_end * 1e-3).max(1e-12);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<f64> = (0..n).map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
            k.push(f(&ys));
        }
        let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>()).collect();
        let y4: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B4[s] * k[s][i]).sum::<f64>()).collect();
        let err = (0..n)
            .map(|i| (y5[i] - y4[i]).abs() / (tol * (1.0 + y[i].abs().max(y5[i].abs()))))
            .fold(0.0f64, f64::max);
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Symmetric closed form for `A + B -> C` with unit rates and `rho(0) = (1, 1, 0)`.
pub fn wellmixed_closed_form(t: f64) -> [f64; 3] {
    let r = 1.0 / (1.0 + t);
    [r, r, 2.0 * t / (1.0 + t)]
}

/// Largest defect of `d/dt rho = omega(rho)` for the closed form, with the derivative
/// taken by a fourth-order central stencil.
pub fn wellmixed_closed_form_residual(times: &[f64]) -> f64 {
    let h = 1e-3;
    times
        .iter()
        .map(|&t| {
            let at = |s: f64| wellmixed_closed_form(s);
            let (a, b, c, d) = (at(t - 2.0 * h), at(t - h), at(t + h), at(t + 2.0 * h));
            let rho = at(t);
            let w = wellmixed_rates(&[0, 1], &[1.0, 1.0], &[2], &[2.0], &rho);
            (0..3)
                .map(|i| {
                    let deriv = (a[i] - 8.0 * b[i] + 8.0 * c[i] - d[i]) / (12.0 * h);
                    (deriv - w[i]).abs()
                })
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max)
}
