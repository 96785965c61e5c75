//! Energy bookkeeping, pressure/velocity consistency checks, and the per-step record.

use serde::{Deserialize, Serialize};

use crate::mixture::{DensityField, MixtureParams};
use crate::spectral::{mean, SpectralGrid};

/// `sum_i 1/((gamma_i - 1) m_i) int |rho_i|^gamma_i`.
pub fn energy_functional(state: &DensityField, params: &MixtureParams) -> f64 {
    (0..state.n_components())
        .map(|i| {
            let g = params.gamma[i];
            let c = 1.0 / ((g - 1.0) * params.molar_mass[i]);
            let density: Vec<f64> = state.component(i).iter().map(|r| r.abs().powf(g)).collect();
            c * mean(&density)
        })
        .sum()
}

/// `|b|^g - |a|^g` without cancellation when `b` is close to `a`.
fn power_increment(a: f64, b: f64, g: f64) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    if x == 0.0 || y == 0.0 {
        return y.powf(g) - x.powf(g);
    }
    x.powf(g) * (g * ((y - x) / x).ln_1p()).exp_m1()
}

/// `E(after) - E(before)` computed from the increment, accurate even when it is far
/// below the rounding level of `E` itself.
pub fn energy_increment(before: &DensityField, increment: &[f64], params: &MixtureParams) -> f64 {
    let m = before.grid_size();
    (0..before.n_components())
        .map(|i| {
            let g = params.gamma[i];
            let c = 1.0 / ((g - 1.0) * params.molar_mass[i]);
            let inc = &increment[i * m..(i + 1) * m];
            let diffs: Vec<f64> = before
                .component(i)
                .iter()
                .zip(inc)
                .map(|(&r, &d)| power_increment(r, r + d, g))
                .collect();
            c * mean(&diffs)
        })
        .sum()
}

/// Instantaneous energy balance terms, all as spatial integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyRates {
    /// `(2 mu + lambda) int u_x^2`
    pub viscous: f64,
    /// `sum_i int |F_i|^2 / rho_i`
    pub flux: f64,
    /// `eps sum_i (gamma_i / m_i) int |rho_i|^(gamma_i - 2) |d_x rho_i|^2`
    pub eps: f64,
    /// `delta sum_i int rho~^(beta - 2) rho_i h_i`
    pub delta: f64,
    /// `sum_(i in reagents) int h_i omega_i`, non-positive on non-negative states.
    pub reagent_work: f64,
    /// `sum_(c in products) int h_c omega_c`
    pub product_work: f64,
    /// `sum_(c in products) int omega_c`
    pub product_production: f64,
    /// `delta int rho~^(beta - 2) sum_i rho_i`, the mass removed by damping.
    pub delta_leak: f64,
}

impl EnergyRates {
    pub fn dissipation(&self) -> f64 {
        self.viscous + self.flux + self.eps + self.delta
    }

    pub fn reaction_work(&self) -> f64 {
        self.reagent_work + self.product_work
    }

    /// Predicted `dE/dt`.
    pub fn energy_rate(&self) -> f64 {
        self.reaction_work() - self.dissipation()
    }

    /// `sum_s w_s r_s`.
    pub fn weighted(parts: &[(f64, EnergyRates)]) -> Self {
        let mut out = Self::default();
        for (w, r) in parts {
            out.viscous += w * r.viscous;
            out.flux += w * r.flux;
            out.eps += w * r.eps;
            out.delta += w * r.delta;
            out.reagent_work += w * r.reagent_work;
            out.product_work += w * r.product_work;
            out.product_production += w * r.product_production;
            out.delta_leak += w * r.delta_leak;
        }
        out
    }
}

/// `dE/dt + dissipation - reaction work` over one step, with `energy_change = E(after) - E(before)`.
pub fn energy_residual(energy_change: f64, dt: f64, rates: &EnergyRates) -> f64 {
    energy_change / dt + rates.dissipation() - rates.reaction_work()
}

/// `|| (2 mu + lambda) u_x - (p - mean p) ||_inf` together with `|| p - mean p ||_inf`.
pub fn effective_viscous_flux_residual(
    grid: &SpectralGrid,
    pressure: &[f64],
    velocity: &[f64],
    params: &MixtureParams,
) -> (f64, f64) {
    let ux = grid.derivative(velocity);
    let pbar = mean(pressure);
    let coeff = params.stokes_coefficient();
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for (d, p) in ux.iter().zip(pressure) {
        residual = residual.max((coeff * d - (p - pbar)).abs());
        scale = scale.max((p - pbar).abs());
    }
    (residual, scale)
}

/// Residual relative to the pressure fluctuation; zero when both vanish.
pub fn relative_evf_residual(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

/// Grid points with `rho > fraction * max rho` at which `u_x <= 0`.
pub fn divu_positivity_probe(total_density: &[f64], velocity_gradient: &[f64], fraction: f64) -> Vec<usize> {
    let max = total_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    total_density
        .iter()
        .zip(velocity_gradient)
        .enumerate()
        .filter(|(_, (&r, &d))| r > fraction * max && d <= 0.0)
        .map(|(k, _)| k)
        .collect()
}

/// One logged row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub total_mass: f64,
    pub component_masses: Vec<f64>,
    pub min_density: Vec<f64>,
    pub max_density: f64,
    pub energy: f64,
    pub dissipation_viscous: f64,
    pub dissipation_flux: f64,
    pub dissipation_eps: f64,
    pub dissipation_delta: f64,
    pub omega3_cumulative: f64,
    /// Residual of the step that ended at `t`; zero for the initial row.
    pub energy_residual: f64,
    /// Effective viscous flux residual relative to `|| p - mean p ||_inf`.
    pub evf_residual: f64,
    pub divu_max: f64,
    pub r_h: Vec<f64>,
    pub divu_violations: usize,
    pub delta_leak_cumulative: f64,
    pub reaction_work: f64,
}

impl DiagnosticsRecord {
    /// Column names in output order, for `n` components and the given kernel widths.
    pub fn header(n: usize, h_values: &[f64]) -> Vec<String> {
        let mut cols: Vec<String> = ["step", "t", "dt", "total_mass"].iter().map(|s| s.to_string()).collect();
        cols.extend((0..n).map(|i| format!("mass_{i}")));
        cols.extend((0..n).map(|i| format!("min_density_{i}")));
        cols.extend(
            [
                "max_density",
                "energy",
                "dissipation_viscous",
                "dissipation_flux",
                "dissipation_eps",
                "dissipation_delta",
                "omega3_cumulative",
                "energy_residual",
                "evf_residual",
                "divu_max",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        cols.extend(h_values.iter().map(|h| format!("R_h={h:e}")));
        cols.extend(
            ["divu_violations", "delta_leak_cumulative", "reaction_work"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols
    }

    /// Values in the order of [`header`](Self::header), formatted with round-trip precision.
    pub fn values(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:e}");
        let mut out = vec![self.step.to_string(), f(self.t), f(self.dt), f(self.total_mass)];
        out.extend(self.component_masses.iter().map(|&v| f(v)));
        out.extend(self.min_density.iter().map(|&v| f(v)));
        out.extend(
            [
                self.max_density,
                self.energy,
                self.dissipation_viscous,
                self.dissipation_flux,
                self.dissipation_eps,
                self.dissipation_delta,
                self.omega3_cumulative,
                self.energy_residual,
                self.evf_residual,
                self.divu_max,
            ]
            .iter()
            .map(|&v| f(v)),
        );
        out.extend(self.r_h.iter().map(|&v| f(v)));
        out.push(self.divu_violations.to_string());
        out.push(f(self.delta_leak_cumulative));
        out.push(f(self.reaction_work));
        out
    }

    fn numeric_fields(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.dt,
            self.total_mass,
            self.max_density,
            self.energy,
            self.dissipation_viscous,
            self.dissipation_flux,
            self.dissipation_eps,
            self.dissipation_delta,
            self.omega3_cumulative,
            self.energy_residual,
            self.evf_residual,
            self.divu_max,
            self.delta_leak_cumulative,
            self.reaction_work,
        ];
        v.extend(&self.component_masses);
        v.extend(&self.min_density);
        v.extend(&self.r_h);
        v
    }
}

/// Extremes over every accumulated step, not just the logged ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepExtremes {
    pub steps: usize,
    pub max_energy_residual: f64,
    /// Largest residual scaled as `|R| dt / E(0)`.
    pub max_scaled_energy_residual: f64,
    pub max_evf_residual: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub clamped_mass: f64,
    /// Steps after which some density fell below the configured lower bound.
    pub lower_bound_violations: usize,
}

/// Time-ordered diagnostics of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_components: usize,
    pub h_values: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub extremes: StepExtremes,
}

impl DiagnosticsReport {
    pub fn new(n_components: usize, h_values: Vec<f64>) -> Self {
        Self {
            n_components,
            h_values,
            records: Vec::new(),
            extremes: StepExtremes {
                min_density: f64::INFINITY,
                max_density: f64::NEG_INFINITY,
                ..StepExtremes::default()
            },
        }
    }

    pub fn push(&mut self, record: DiagnosticsRecord) {
        self.records.push(record);
    }

    pub fn first(&self) -> Option<&DiagnosticsRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    /// Strictly increasing times and finite entries.
    pub fn is_well_formed(&self) -> bool {
        self.records.windows(2).all(|w| w[1].t > w[0].t)
            && self.records.iter().all(|r| r.numeric_fields().iter().all(|v| v.is_finite()))
    }

    /// Largest relative drift of the total mass from the first record.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.first() else { return 0.0 };
        self.records
            .iter()
            .map(|r| (r.total_mass - first.total_mass).abs() / first.total_mass.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest relative defect of `mass(t) + leaked(t) = mass(0)`.
    pub fn leak_defect(&self) -> f64 {
        let Some(first) = self.first() else { return 0.0 };
        self.records
            .iter()
            .map(|r| (r.total_mass + r.delta_leak_cumulative - first.total_mass).abs() / first.total_mass.abs())
            .fold(0.0, f64::max)
    }

    /// `min_i min_x rho_i / max rho` over the logged rows.
    pub fn worst_relative_min(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.min_density.iter().copied().fold(f64::INFINITY, f64::min) / r.max_density.max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_evf_residual(&self) -> f64 {
        self.records.iter().map(|r| r.evf_residual).fold(0.0, f64::max)
    }

    /// Named minimum and maximum of every scalar column.
    pub fn column_ranges(&self) -> Vec<(String, f64, f64)> {
        let header = DiagnosticsRecord::header(self.n_components, &self.h_values);
        let mut ranges: Vec<(String, f64, f64)> = header
            .into_iter()
            .map(|h| (h, f64::INFINITY, f64::NEG_INFINITY))
            .collect();
        for r in &self.records {
            for (slot, v) in ranges.iter_mut().zip(r.values()) {
                if let Ok(x) = v.parse::<f64>() {
                    slot.1 = slot.1.min(x);
                    slot.2 = slot.2.max(x);
                }
            }
        }
        ranges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn energy_examples() {
        let p = MixtureParams::new(vec![2.0; 3], vec![1.0; 3]);
        assert!((energy_functional(&DensityField::uniform(&[1.0; 3], 16), &p) - 3.0).abs() < 1e-15);
        assert_eq!(energy_functional(&DensityField::uniform(&[0.0; 3], 16), &p), 0.0);
        let g = SpectralGrid::new(32).unwrap();
        let one = g.sample(|x| 1.0 + 0.5 * (2.0 * PI * x).sin());
        let s = DensityField::from_components(vec![one, vec![0.0; 32]], 0.0).unwrap();
        let p2 = MixtureParams::new(vec![2.0, 2.0], vec![1.0, 1.0]);
        assert!((energy_functional(&s, &p2) - 1.125).abs() < 1e-14);
    }

    #[test]
    fn increment_agrees_with_difference() {
        let p = MixtureParams::new(vec![1.4, 2.3], vec![1.0, 2.0]);
        let a = DensityField::from_components(vec![vec![0.7, 1.1], vec![0.0, 2.0]], 0.0).unwrap();
        let inc = [1e-3, -2e-3, 0.5, 1e-4];
        let b = DensityField::from_components(vec![vec![0.701, 1.098], vec![0.5, 2.0001]], 0.0).unwrap();
        let direct = energy_functional(&b, &p) - energy_functional(&a, &p);
        assert!((energy_increment(&a, &inc, &p) - direct).abs() < 1e-13);
    }

    #[test]
    fn evf_single_mode() {
        let g = SpectralGrid::new(64).unwrap();
        let params = MixtureParams::new(vec![2.0, 2.0], vec![1.0, 1.0]);
        let p = g.sample(|x| (2.0 * PI * x).cos());
        let u = g.sample(|x| (2.0 * PI * x).sin() / (4.0 * PI));
        let (r, s) = effective_viscous_flux_residual(&g, &p, &u, &params);
        assert!(r <= 1e-12);
        assert!((s - 1.0).abs() < 1e-15);
        let (r, s) = effective_viscous_flux_residual(&g, &vec![3.0; 64], &vec![0.0; 64], &params);
        assert_eq!((r, s), (0.0, 0.0));
    }

    #[test]
    fn divu_probe() {
        let rho = [1.0, 2.0, 3.0, 2.0];
        assert!(divu_positivity_probe(&rho, &[0.1, 0.2, 0.3, 0.1], 0.5).is_empty());
        assert_eq!(divu_positivity_probe(&rho, &[1.0, -1.0, 0.0, 1.0], 0.5), vec![1, 2]);
    }

    #[test]
    fn header_and_values_align() {
        let r = DiagnosticsRecord {
            step: 0,
            t: 0.0,
            dt: 0.0,
            total_mass: 1.0,
            component_masses: vec![0.5, 0.5],
            min_density: vec![0.1, 0.2],
            max_density: 1.0,
            energy: 1.0,
            dissipation_viscous: 0.0,
            dissipation_flux: 0.0,
            dissipation_eps: 0.0,
            dissipation_delta: 0.0,
            omega3_cumulative: 0.0,
            energy_residual: 0.0,
            evf_residual: 0.0,
            divu_max: 0.0,
            r_h: vec![0.0; 3],
            divu_violations: 0,
            delta_leak_cumulative: 0.0,
            reaction_work: 0.0,
        };
        assert_eq!(DiagnosticsRecord::header(2, &[1e-2, 1e-3, 1e-4]).len(), r.values().len());
    }
}
