//! Cross-diffusion fluxes, their truncated variant, and the flux/entropy identity.
//!
//! All routines here are pointwise. Spatial gradients are inputs computed by the caller.

use crate::error::AlgebraError;
use crate::mixture::{ComponentFields, MixtureParams};

/// Denominator guards for the total densities appearing in the fluxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityFloor {
    /// Below this a denominator is treated as degenerate.
    pub detection: f64,
    /// Below this a denominator is reported but still used.
    pub warning: f64,
}

impl Default for DensityFloor {
    fn default() -> Self {
        Self {
            detection: 1e-300,
            warning: 1e-12,
        }
    }
}

/// Derivative of the truncated pressure `p^cap` at `rho`:
/// `(gamma/m) min(|rho|, cap)^(gamma-1)`. With `cap = inf` this is `p'(|rho|)`.
#[inline]
pub fn truncated_pressure_slope(rho: f64, gamma: f64, m: f64, cap: f64) -> f64 {
    gamma / m * rho.abs().min(cap).powf(gamma - 1.0)
}

/// Truncated pressure: equal to `rho^gamma / m` on `[0, cap]`, continued linearly above
/// and oddly below zero.
pub fn truncated_pressure(rho: f64, gamma: f64, m: f64, cap: f64) -> f64 {
    let r = rho.abs();
    let value = if r <= cap {
        r.powf(gamma) / m
    } else {
        (cap.powf(gamma) + gamma * cap.powf(gamma - 1.0) * (r - cap)) / m
    };
    value.copysign(rho)
}

/// Fluxes at one point of a (possibly signed) state with densities truncated at `cap`.
///
/// `rho` and `grad` hold all `N` components; only the first `n_diffusive` are coupled
/// and the remaining entries of `out` are set to zero. Returns the denominator used.
pub fn truncated_flux_at(
    rho: &[f64],
    grad: &[f64],
    params: &MixtureParams,
    cap: f64,
    out: &mut [f64],
) -> f64 {
    let n1 = params.n_diffusive();
    let mut total = 0.0;
    let mut grad_p = 0.0;
    for i in 0..n1 {
        let gp = truncated_pressure_slope(rho[i], params.gamma[i], params.molar_mass[i], cap) * grad[i];
        out[i] = gp;
        grad_p += gp;
        total += rho[i].abs().min(cap);
    }
    for i in 0..n1 {
        out[i] -= rho[i].abs().min(cap) / total * grad_p;
    }
    out[n1..].iter_mut().for_each(|o| *o = 0.0);
    total
}

fn check_floor(point: usize, value: f64, floor: DensityFloor) -> Result<(), AlgebraError> {
    if !(value >= floor.detection) {
        return Err(AlgebraError::Degenerate {
            point,
            value,
            floor: floor.detection,
        });
    }
    if value < floor.warning {
        log::warn!("total density {value:e} below warning floor at point {point}");
    }
    Ok(())
}

fn flux_field(
    rho: &ComponentFields,
    grad: &ComponentFields,
    params: &MixtureParams,
    cap: f64,
    floor: DensityFloor,
) -> Result<ComponentFields, AlgebraError> {
    let (n, m) = (rho.n_components(), rho.grid_size());
    let mut out = ComponentFields::zeros(n, m);
    let mut r = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut f = vec![0.0; n];
    for k in 0..m {
        rho.gather_point(k, &mut r);
        grad.gather_point(k, &mut g);
        let total = truncated_flux_at(&r, &g, params, cap, &mut f);
        check_floor(k, total, floor)?;
        for (i, &v) in f.iter().enumerate() {
            out.set(i, k, v);
        }
    }
    Ok(out)
}

/// Untruncated fluxes `F_i = p_i' grad rho_i - (rho_i / rho) grad p` over the diffusive
/// block, given density gradients `grad`.
pub fn flux_compute(
    rho: &ComponentFields,
    grad: &ComponentFields,
    params: &MixtureParams,
    floor: DensityFloor,
) -> Result<ComponentFields, AlgebraError> {
    if let Some((i, v)) = (0..rho.n_components())
        .flat_map(|i| rho.component(i).iter().map(move |&v| (i, v)))
        .find(|(_, v)| *v < 0.0)
    {
        return Err(AlgebraError::NonPositive { component: i, value: v });
    }
    flux_field(rho, grad, params, f64::INFINITY, floor)
}

/// Fluxes of the truncated system with densities capped at `1/delta`.
pub fn flux_compute_delta(
    rho: &ComponentFields,
    grad: &ComponentFields,
    params: &MixtureParams,
    delta: f64,
    floor: DensityFloor,
) -> Result<ComponentFields, AlgebraError> {
    if !(delta > 0.0) {
        return Err(AlgebraError::InvalidDelta(delta));
    }
    flux_field(rho, grad, params, 1.0 / delta, floor)
}

/// Pointwise defect of `sum_i grad h_i . F_i = sum_i |F_i|^2 / rho_i` over the diffusive block.
///
/// `grad_pow` holds the gradients of `rho_i^(gamma_i - 1)`; `h_i` is that power times
/// `gamma_i / ((gamma_i - 1) m_i)`. Returns the residual field and the field of the right side.
pub fn entropy_flux_identity_residual(
    rho: &ComponentFields,
    grad_pow: &ComponentFields,
    flux: &ComponentFields,
    params: &MixtureParams,
) -> Result<(Vec<f64>, Vec<f64>), AlgebraError> {
    let m = rho.grid_size();
    let n1 = params.n_diffusive();
    let mut residual = vec![0.0; m];
    let mut dissipation = vec![0.0; m];
    for i in 0..n1 {
        let c = params.enthalpy_prefactor(i);
        for k in 0..m {
            let r = rho.get(i, k);
            if !(r > 0.0) {
                return Err(AlgebraError::NonPositive { component: i, value: r });
            }
            let f = flux.get(i, k);
            let d = f * f / r;
            residual[k] += c * grad_pow.get(i, k) * f - d;
            dissipation[k] += d;
        }
    }
    Ok((residual, dissipation))
}

/// Largest pointwise `|sum_i F_i|` relative to `max |F|`; zero for a vanishing flux.
pub fn cancellation_defect(flux: &ComponentFields, n_diffusive: usize) -> f64 {
    let sums = flux.partial_sum(n_diffusive);
    let worst = sums.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let scale = flux.as_slice().iter().fold(0.0f64, |a, f| a.max(f.abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
