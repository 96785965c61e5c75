//! Seeded property suite over the algebraic identities.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::compactness::{kernel_norm, CompactnessFunctional};
use crate::entropy::{
    codomain_membership_at, det_b_closed_form, det_dg_closed_form, invert_g_at, matrix_b, matrix_c, q_at,
    NewtonOptions, SquareMatrix,
};
use crate::error::AlgebraError;
use crate::flux::{cancellation_defect, entropy_flux_identity_residual, flux_compute, DensityFloor};
use crate::mixture::ComponentFields;
use crate::oracle::{det_numeric, entropy_map_reference, jacobian_fd, rh_double_sum};
use crate::sampling::{case_rng, mixed_params, positive_point, smooth_field, smooth_state};
use crate::spectral::SpectralGrid;

/// Builds the entropy-variable flux matrix; swappable to prove the suite catches defects.
pub type BBuilder = fn(&[f64]) -> Result<SquareMatrix, AlgebraError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Invariant {
    FluxCancellation,
    EntropyFluxIdentity,
    BRepresentation,
    DetB,
    DetDg,
    RoundTrip,
    CSymmetry,
    RhCrossCheck,
    KernelScaling,
}

impl Invariant {
    pub const ALL: [Invariant; 9] = [
        Self::FluxCancellation,
        Self::EntropyFluxIdentity,
        Self::BRepresentation,
        Self::DetB,
        Self::DetDg,
        Self::RoundTrip,
        Self::CSymmetry,
        Self::RhCrossCheck,
        Self::KernelScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FluxCancellation => "flux-cancellation",
            Self::EntropyFluxIdentity => "entropy-flux-identity",
            Self::BRepresentation => "b-representation",
            Self::DetB => "det-B",
            Self::DetDg => "det-DG",
            Self::RoundTrip => "G-round-trip",
            Self::CSymmetry => "C-symmetry",
            Self::RhCrossCheck => "R_h-cross-check",
            Self::KernelScaling => "kernel-scaling",
        }
    }

    /// Pass threshold on the measured defect.
    pub fn tolerance(self) -> f64 {
        match self {
            Self::FluxCancellation => 1e-12,
            Self::EntropyFluxIdentity => 1e-10,
            Self::BRepresentation => 1e-9,
            Self::DetB => 1e-12,
            Self::DetDg => 1e-8,
            Self::RoundTrip => 1e-10,
            Self::CSymmetry => 0.0,
            Self::RhCrossCheck => 1e-12,
            Self::KernelScaling => 3.0,
        }
    }

    fn stream(self) -> u64 {
        Self::ALL.iter().position(|&i| i == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measured defect of one case; `passed` compares it to the invariant's tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub invariant: Invariant,
    pub index: u64,
    pub defect: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

/// Aggregate over all cases of one invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantSummary {
    pub invariant: Invariant,
    pub cases: usize,
    pub failures: Vec<u64>,
    pub worst: f64,
    pub tolerance: f64,
}

impl InvariantSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const FLUX_SIZES: [usize; 3] = [2, 3, 5];

fn grid(m: usize) -> SpectralGrid {
    SpectralGrid::new(m).expect("suite grids are valid")
}

fn derivatives(grid: &SpectralGrid, fields: &ComponentFields, f: impl Fn(usize, f64) -> f64) -> ComponentFields {
    let comps = (0..fields.n_components())
        .map(|i| {
            let mapped: Vec<f64> = fields.component(i).iter().map(|&v| f(i, v)).collect();
            grid.derivative(&mapped)
        })
        .collect();
    ComponentFields::from_components(comps).expect("derivatives share the grid")
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Relative error that treats a zero reference as absolute.
fn rel(computed: f64, reference: f64) -> f64 {
    let d = (computed - reference).abs();
    if reference == 0.0 {
        d
    } else {
        d / reference.abs()
    }
}

fn measure(inv: Invariant, seed: u64, index: u64, builder: BBuilder) -> Result<f64, String> {
    let mut rng = case_rng(seed, inv.stream(), index);
    let err = |e: AlgebraError| e.to_string();
    match inv {
        Invariant::FluxCancellation | Invariant::EntropyFluxIdentity => {
            let n = FLUX_SIZES[(index % 3) as usize];
            let g = grid(128);
            let state = smooth_state(&mut rng, &g, n);
            let params = mixed_params(&mut rng, n);
            let grad = derivatives(&g, &state.fields, |_, v| v);
            let flux = flux_compute(&state.fields, &grad, &params, DensityFloor::default()).map_err(err)?;
            if inv == Invariant::FluxCancellation {
                return Ok(cancellation_defect(&flux, n));
            }
            let grad_pow = derivatives(&g, &state.fields, |i, v| v.powf(params.gamma[i] - 1.0));
            let (res, diss) = entropy_flux_identity_residual(&state.fields, &grad_pow, &flux, &params).map_err(err)?;
            Ok(max_abs(&res) / max_abs(&diss).max(f64::MIN_POSITIVE))
        }
        Invariant::BRepresentation => {
            // F_i = sum_j b_ij grad q_j at a point, with grad q from chain-rule gradients
            let n = rng.gen_range(2..=6);
            let params = mixed_params(&mut rng, n);
            let rho = positive_point(&mut rng, n, 0.1, 10.0);
            let grad: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut flux = vec![0.0; n];
            crate::flux::truncated_flux_at(&rho, &grad, &params, f64::INFINITY, &mut flux);
            let grad_h: Vec<f64> = (0..n)
                .map(|i| params.gamma[i] / params.molar_mass[i] * rho[i].powf(params.gamma[i] - 2.0) * grad[i])
                .collect();
            let grad_q: Vec<f64> = grad_h.windows(2).map(|w| w[0] - w[1]).collect();
            let via_b = builder(&rho).map_err(err)?.mul_vec(&grad_q);
            let scale = max_abs(&flux).max(f64::MIN_POSITIVE);
            Ok((0..n - 1).map(|i| (via_b[i] - flux[i]).abs()).fold(0.0, f64::max) / scale)
        }
        Invariant::DetB => {
            let n = 2 + (index % 5) as usize;
            let rho = positive_point(&mut rng, n, 1e-2, 1e2);
            let numeric = det_numeric(&builder(&rho).map_err(err)?.rows());
            Ok(rel(numeric, det_b_closed_form(&rho).map_err(err)?))
        }
        Invariant::DetDg => {
            let n = 2 + (index % 5) as usize;
            let params = mixed_params(&mut rng, n);
            let z = positive_point(&mut rng, n, 0.2, 5.0);
            let (gamma, mass) = (params.gamma.clone(), params.molar_mass.clone());
            let jac = jacobian_fd(|x| entropy_map_reference(x, &gamma, &mass), &z, 1e-5);
            Ok(rel(det_numeric(&jac), det_dg_closed_form(&z, &params).map_err(err)?))
        }
        Invariant::RoundTrip => {
            let n = 2 + (index % 5) as usize;
            let params = mixed_params(&mut rng, n);
            let rho = positive_point(&mut rng, n, 1e-2, 1e1);
            let q = q_at(&rho, &params);
            let total: f64 = rho.iter().sum();
            if !codomain_membership_at(&q, total, &params) {
                return Err("image of a positive state classified outside the codomain".into());
            }
            let z = invert_g_at(&q, total, &params, NewtonOptions::default()).map_err(err)?;
            Ok(z.iter().zip(&rho).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max))
        }
        Invariant::CSymmetry => {
            let n = rng.gen_range(2..=6);
            let c = matrix_c(&positive_point(&mut rng, n, 1e-2, 1e2)).map_err(err)?;
            Ok(if c.is_symmetric() { 0.0 } else { 1.0 })
        }
        Invariant::RhCrossCheck => {
            let g = grid(128);
            let h = [1e-2, 1e-3][(index % 2) as usize];
            let field = smooth_field(&mut rng, &g, 1.0, 0.5, 12);
            let spectral = CompactnessFunctional::new(&g, h).map_err(|e| e.to_string())?.evaluate(&field);
            let direct = rh_double_sum(&field, h).map_err(|e| e.to_string())?;
            Ok(rel(spectral, direct))
        }
        Invariant::KernelScaling => {
            // spread of ||K_h|| / |ln h| across three decades
            let base = 10f64.powf(-rng.gen_range(2.0..3.0));
            let ratios: Vec<f64> = [base, base * 0.1, base * 0.01]
                .iter()
                .map(|&h| kernel_norm(h).map(|n| n / h.ln().abs()))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(hi / lo)
        }
    }
}

/// Runs case `index` of `inv`.
pub fn run_case(inv: Invariant, seed: u64, index: u64, builder: BBuilder) -> CaseOutcome {
    match measure(inv, seed, index, builder) {
        Ok(defect) => {
            let passed = if inv == Invariant::CSymmetry {
                defect == 0.0
            } else {
                defect <= inv.tolerance()
            };
            CaseOutcome {
                invariant: inv,
                index,
                defect,
                passed,
                detail: None,
            }
        }
        Err(detail) => CaseOutcome {
            invariant: inv,
            index,
            defect: f64::INFINITY,
            passed: false,
            detail: Some(detail),
        },
    }
}

/// Groups outcomes by invariant, in the canonical invariant order.
pub fn summarize(outcomes: &[CaseOutcome], invariants: &[Invariant]) -> Vec<InvariantSummary> {
    invariants
        .iter()
        .map(|&inv| {
            let mine: Vec<&CaseOutcome> = outcomes.iter().filter(|o| o.invariant == inv).collect();
            InvariantSummary {
                invariant: inv,
                cases: mine.len(),
                failures: mine.iter().filter(|o| !o.passed).map(|o| o.index).collect(),
                worst: mine.iter().map(|o| o.defect).fold(0.0, f64::max),
                tolerance: inv.tolerance(),
            }
        })
        .collect()
}

/// Every case of every invariant, sequentially.
pub fn run_suite_with(seed: u64, n_cases: u64, builder: BBuilder) -> Vec<InvariantSummary> {
    let outcomes: Vec<CaseOutcome> = Invariant::ALL
        .iter()
        .flat_map(|&inv| (0..n_cases).map(move |i| run_case(inv, seed, i, builder)))
        .collect();
    summarize(&outcomes, &Invariant::ALL)
}

pub fn run_suite(seed: u64, n_cases: u64) -> Vec<InvariantSummary> {
    run_suite_with(seed, n_cases, matrix_b)
}

/// Flux matrix with the lower-triangle sign flipped.
pub fn corrupted_matrix_b(rho: &[f64]) -> Result<SquareMatrix, AlgebraError> {
    let mut b = matrix_b(rho)?;
    for i in 0..b.dim {
        for j in 0..i {
            let v = b.get(i, j);
            b.set(i, j, -v);
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_few_cases() {
        for s in run_suite(11, 6) {
            assert!(s.passed(), "{} failed: worst {:e}", s.invariant, s.worst);
        }
    }

    #[test]
    fn corrupted_b_is_caught() {
        let summary = run_suite_with(3, 10, corrupted_matrix_b);
        let det_b = summary.iter().find(|s| s.invariant == Invariant::DetB).unwrap();
        assert!(!det_b.passed());
    }

    #[test]
    fn empty_suite_passes() {
        assert!(run_suite(0, 0).iter().all(|s| s.passed() && s.cases == 0));
    }
}
