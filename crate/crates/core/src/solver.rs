//! Method-of-lines integrator for the regularized mixture system on a periodic grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::compactness::CompactnessFunctional;
use crate::diagnostics::{
    divu_positivity_probe, effective_viscous_flux_residual, energy_functional, energy_increment, energy_residual,
    relative_evf_residual, DiagnosticsRecord, DiagnosticsReport, EnergyRates,
};
use crate::error::{AlgebraError, SolverError};
use crate::flux::{truncated_flux_at, truncated_pressure_slope, DensityFloor};
use crate::mixture::{validate_gamma_condition, ComponentFields, DensityField, MixtureParams, ReactionNetwork};
use crate::spectral::{mean, SpectralGrid};

/// One Fourier term `amplitude * sin(2 pi mode x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub mode: u32,
    #[serde(default)]
    pub phase: f64,
}

/// Initial profile of one component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant { value: f64 },
    Sinusoidal { mean: f64, terms: Vec<FourierTerm> },
    /// Nodal values; the length must equal the grid size.
    Tabulated { values: Vec<f64> },
}

impl InitialProfile {
    pub fn sample(&self, grid: &SpectralGrid) -> Result<Vec<f64>, SolverError> {
        match self {
            Self::Constant { value } => Ok(vec![*value; grid.size()]),
            Self::Sinusoidal { mean, terms } => Ok(grid.sample(|x| {
                mean + terms
                    .iter()
                    .map(|t| t.amplitude * (2.0 * PI * t.mode as f64 * x + t.phase).sin())
                    .sum::<f64>()
            })),
            Self::Tabulated { values } if values.len() == grid.size() => Ok(values.clone()),
            Self::Tabulated { values } => Err(SolverError::Config {
                field: "initial_data",
                reason: format!("tabulated profile has {} values for {} grid points", values.len(), grid.size()),
            }),
        }
    }
}

/// Switches for the physical terms of the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermSwitches {
    pub transport: bool,
    pub cross_diffusion: bool,
    pub reaction: bool,
}

impl Default for TermSwitches {
    fn default() -> Self {
        Self {
            transport: true,
            cross_diffusion: true,
            reaction: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsOptions {
    /// Log a record every this many steps (the final step is always logged).
    pub every: usize,
    pub h_values: Vec<f64>,
    /// Points with `rho > divu_fraction * max rho` are probed for `u_x <= 0`.
    pub divu_fraction: f64,
    /// Largest acceptable `|R| dt / E(0)` for a step's energy residual.
    pub energy_tolerance: f64,
    /// Largest acceptable relative effective viscous flux residual.
    pub evf_tolerance: f64,
    /// Smallest acceptable `min rho / max rho`.
    pub positivity_tolerance: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            every: 1,
            h_values: vec![1e-2, 1e-3],
            divu_fraction: 0.9,
            energy_tolerance: 1e-6,
            evf_tolerance: 1e-10,
            positivity_tolerance: 1e-8,
        }
    }
}

fn default_cfl() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_detection_floor() -> f64 {
    DensityFloor::default().detection
}
fn default_warning_floor() -> f64 {
    DensityFloor::default().warning
}
fn default_blowup() -> f64 {
    1e6
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid_size: usize,
    pub params: MixtureParams,
    pub network: ReactionNetwork,
    pub t_end: f64,
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    pub initial_data: Vec<InitialProfile>,
    #[serde(default)]
    pub terms: TermSwitches,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
    /// Write a snapshot every this many steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_detection_floor")]
    pub density_floor: f64,
    #[serde(default = "default_warning_floor")]
    pub warning_floor: f64,
    /// Expected positive lower bound on every density; violations are logged.
    #[serde(default)]
    pub lower_bound: Option<f64>,
    /// Clamp negative densities to zero after each step and account for the mass added.
    #[serde(default)]
    pub positivity_clamp: bool,
    /// Abort once a density exceeds this multiple of the initial maximum.
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

impl SimConfig {
    /// A run with default numerics for the given physics.
    pub fn new(
        grid_size: usize,
        params: MixtureParams,
        network: ReactionNetwork,
        initial_data: Vec<InitialProfile>,
        t_end: f64,
    ) -> Self {
        Self {
            grid_size,
            params,
            network,
            t_end,
            dt_max: 1e-2,
            cfl_safety: default_cfl(),
            dealias: true,
            initial_data,
            terms: TermSwitches::default(),
            diagnostics: DiagnosticsOptions::default(),
            snapshot_every: 0,
            density_floor: default_detection_floor(),
            warning_floor: default_warning_floor(),
            lower_bound: None,
            positivity_clamp: false,
            blowup_factor: default_blowup(),
        }
    }

    pub fn floor(&self) -> DensityFloor {
        DensityFloor {
            detection: self.density_floor,
            warning: self.warning_floor,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |field, reason: String| Err(SolverError::Config { field, reason });
        self.params.validate()?;
        self.network.validate(self.params.n_components())?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end", format!("must be finite and non-negative, got {}", self.t_end));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad("dt_max", format!("must be positive, got {}", self.dt_max));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety));
        }
        if self.initial_data.len() != self.params.n_components() {
            return bad(
                "initial_data",
                format!(
                    "{} profiles for {} components",
                    self.initial_data.len(),
                    self.params.n_components()
                ),
            );
        }
        if self.diagnostics.every == 0 {
            return bad("diagnostics.every", "must be at least 1".into());
        }
        if let Some(h) = self.diagnostics.h_values.iter().find(|h| !(**h > 0.0 && **h <= 0.125)) {
            return bad("diagnostics.h_values", format!("widths must lie in (0, 1/8], got {h}"));
        }
        if !(self.density_floor >= 0.0 && self.warning_floor >= self.density_floor) {
            return bad("density_floor", "need 0 <= density_floor <= warning_floor".into());
        }
        if !(self.blowup_factor > 1.0) {
            return bad("blowup_factor", format!("must exceed 1, got {}", self.blowup_factor));
        }
        Ok(())
    }
}

/// Result of one explicit step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: DensityField,
    /// `state - previous`, component-major.
    pub increment: Vec<f64>,
    /// Stage rates combined with the Runge-Kutta weights.
    pub rates: EnergyRates,
}

/// A finished or aborted run. On abort `error` is set and `state` is the last good state.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: DensityField,
    pub report: DiagnosticsReport,
    pub error: Option<SolverError>,
}

/// Solver bound to one validated configuration.
#[derive(Clone, Debug)]
pub struct Solver {
    config: SimConfig,
    grid: SpectralGrid,
    /// Density truncation level, infinite without regularization.
    cap: f64,
    functionals: Vec<CompactnessFunctional>,
    initial: DensityField,
    blowup_limit: f64,
}

impl Solver {
    pub fn new(config: SimConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let grid = SpectralGrid::new(config.grid_size)?;
        let comps = config
            .initial_data
            .iter()
            .map(|p| p.sample(&grid))
            .collect::<Result<Vec<_>, _>>()?;
        let initial = DensityField::from_components(comps, 0.0)?;
        if let Some(i) = (0..initial.n_components()).find(|&i| initial.component(i).iter().any(|v| !v.is_finite())) {
            return Err(SolverError::NonFinite { component: i, time: 0.0 });
        }
        if !validate_gamma_condition(&config.params, &config.network) {
            log::warn!("adiabatic exponents violate 2 gamma_max < 3 gamma_min - gamma_S + 1");
        }
        let functionals = config
            .diagnostics
            .h_values
            .iter()
            .map(|&h| {
                CompactnessFunctional::new(&grid, h).map_err(|e| SolverError::Config {
                    field: "diagnostics.h_values",
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let init_max = initial.fields.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cap = if config.params.delta > 0.0 {
            1.0 / config.params.delta
        } else {
            f64::INFINITY
        };
        Ok(Self {
            blowup_limit: config.blowup_factor * init_max.max(f64::MIN_POSITIVE),
            config,
            grid,
            cap,
            functionals,
            initial,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn initial_state(&self) -> DensityField {
        self.initial.clone()
    }

    /// Pressure of the state evaluated on `|rho_i|`.
    pub fn pressure(&self, state: &DensityField) -> Vec<f64> {
        crate::mixture::pressure_guarded(state, &self.config.params)
    }

    pub fn velocity(&self, state: &DensityField) -> Vec<f64> {
        self.grid
            .stokes_solve(&self.pressure(state), self.config.params.stokes_coefficient())
    }

    /// Densities after truncation at the regularization level, sign preserved.
    fn truncated(&self, rho: f64) -> f64 {
        rho.abs().min(self.cap).copysign(rho)
    }

    pub fn species_rhs(&self, state: &DensityField) -> Result<ComponentFields, SolverError> {
        Ok(self.evaluate(state, false)?.0)
    }

    /// Energy balance terms of the instantaneous right-hand side.
    pub fn energy_rates(&self, state: &DensityField) -> Result<EnergyRates, SolverError> {
        Ok(self.evaluate(state, true)?.1)
    }

    /// Right-hand side, plus the energy balance terms when `with_rates` is set.
    pub fn evaluate(&self, state: &DensityField, with_rates: bool) -> Result<(ComponentFields, EnergyRates), SolverError> {
        let cfg = &self.config;
        let params = &cfg.params;
        let (n, m) = (state.n_components(), state.grid_size());
        let n1 = params.n_diffusive();
        let terms = cfg.terms;
        let mut rhs = ComponentFields::zeros(n, m);
        let mut rates = EnergyRates::default();

        let needs_velocity = terms.transport || with_rates;
        let velocity = if needs_velocity { Some(self.velocity(state)) } else { None };

        let needs_grad = |i: usize| (terms.cross_diffusion && i < n1) || (with_rates && params.epsilon > 0.0);
        let grads: Vec<Option<Vec<f64>>> = (0..n)
            .map(|i| needs_grad(i).then(|| self.grid.derivative(state.component(i))))
            .collect();

        let mut flux = ComponentFields::zeros(n, m);
        if terms.cross_diffusion {
            let floor = cfg.floor();
            let mut r = vec![0.0; n];
            let mut g = vec![0.0; n];
            let mut f = vec![0.0; n];
            for k in 0..m {
                state.fields.gather_point(k, &mut r);
                for i in 0..n1 {
                    g[i] = grads[i].as_ref().map_or(0.0, |d| d[k]);
                }
                let total = truncated_flux_at(&r, &g, params, self.cap, &mut f);
                if !(total >= floor.detection) {
                    return Err(AlgebraError::Degenerate {
                        point: k,
                        value: total,
                        floor: floor.detection,
                    }
                    .into());
                }
                if total < floor.warning {
                    log::warn!("diffusive density {total:e} below warning floor at point {k}, t = {}", state.time);
                }
                for i in 0..n1 {
                    flux.set(i, k, f[i]);
                }
            }
        }

        // divergence part: d_x(-rho_i u + F_i) and eps d_xx rho_i
        for i in 0..n {
            let rho_i = state.component(i);
            let mut combined = vec![0.0; m];
            let mut active = false;
            if terms.transport {
                let u = velocity.as_ref().expect("velocity computed when transport is on");
                for (c, (r, v)) in combined.iter_mut().zip(rho_i.iter().zip(u)) {
                    *c -= r * v;
                }
                active = true;
            }
            if terms.cross_diffusion && i < n1 {
                for (c, f) in combined.iter_mut().zip(flux.component(i)) {
                    *c += f;
                }
                active = true;
            }
            let out = rhs.component_mut(i);
            if active {
                let div = self.grid.derivative_filtered(&combined, cfg.dealias);
                out.copy_from_slice(&div);
            }
            if params.epsilon > 0.0 {
                for (o, d2) in out.iter_mut().zip(self.grid.second_derivative(rho_i)) {
                    *o += params.epsilon * d2;
                }
            }
        }

        // pointwise part: damping and reactions
        let net = &cfg.network;
        let mut r = vec![0.0; n];
        let mut rt = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut damp_field = vec![0.0; m];
        let mut leak_field = vec![0.0; m];
        let mut reagent_field = vec![0.0; m];
        let mut product_field = vec![0.0; m];
        let mut production_field = vec![0.0; m];
        for k in 0..m {
            state.fields.gather_point(k, &mut r);
            if params.delta > 0.0 {
                let rho_abs: f64 = r.iter().map(|v| v.abs()).sum();
                let coeff = params.delta * rho_abs.powf(params.beta - 2.0);
                for i in 0..n {
                    let d = coeff * r[i];
                    rhs.set(i, k, rhs.get(i, k) - d);
                    if with_rates {
                        damp_field[k] += d * self.potential(i, r[i]);
                        leak_field[k] += d;
                    }
                }
            }
            if terms.reaction {
                for (t, v) in rt.iter_mut().zip(&r) {
                    *t = self.truncated(*v);
                }
                net.extended_rates_at(&rt, &mut w);
                for i in 0..n {
                    if w[i] != 0.0 {
                        rhs.set(i, k, rhs.get(i, k) + w[i]);
                    }
                }
                if with_rates {
                    for &i in &net.reagents {
                        reagent_field[k] += self.potential(i, r[i]) * w[i];
                    }
                    for &c in &net.products {
                        product_field[k] += self.potential(c, r[c]) * w[c];
                        production_field[k] += w[c];
                    }
                }
            }
        }

        if with_rates {
            rates.delta = mean(&damp_field);
            rates.delta_leak = mean(&leak_field);
            rates.reagent_work = mean(&reagent_field);
            rates.product_work = mean(&product_field);
            rates.product_production = mean(&production_field);
            let u = velocity.as_ref().expect("velocity computed for rates");
            let ux = self.grid.derivative(u);
            rates.viscous = params.stokes_coefficient() * mean(&ux.iter().map(|v| v * v).collect::<Vec<_>>());
            if terms.cross_diffusion {
                rates.flux = (0..n1)
                    .map(|i| {
                        let dens: Vec<f64> = state
                            .component(i)
                            .iter()
                            .zip(flux.component(i))
                            .map(|(&r, &f)| {
                                let rt = r.abs().min(self.cap);
                                if rt > 0.0 {
                                    f * f / rt
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        mean(&dens)
                    })
                    .sum();
            }
            if params.epsilon > 0.0 {
                rates.eps = params.epsilon
                    * (0..n)
                        .map(|i| {
                            let g = params.gamma[i];
                            let grad = grads[i].as_ref().expect("gradients computed for rates");
                            let dens: Vec<f64> = state
                                .component(i)
                                .iter()
                                .zip(grad)
                                .map(|(&r, &d)| {
                                    if r == 0.0 || d == 0.0 {
                                        0.0
                                    } else {
                                        r.abs().powf(g - 2.0) * d * d
                                    }
                                })
                                .collect();
                            g / params.molar_mass[i] * mean(&dens)
                        })
                        .sum::<f64>();
            }
        }
        Ok((rhs, rates))
    }

    /// `dE/drho_i = gamma_i/((gamma_i - 1) m_i) |rho|^(gamma_i - 2) rho`.
    fn potential(&self, i: usize, rho: f64) -> f64 {
        let p = &self.config.params;
        if rho == 0.0 {
            return 0.0;
        }
        p.enthalpy_prefactor(i) * rho.abs().powf(p.gamma[i] - 1.0).copysign(rho)
    }

    /// Stable step from the transport, diffusion and reaction time scales, capped by `dt_max`.
    pub fn cfl_dt(&self, state: &DensityField) -> f64 {
        let cfg = &self.config;
        let params = &cfg.params;
        let dx = self.grid.dx();
        let mut bound = f64::INFINITY;
        if cfg.terms.transport {
            let umax = self.velocity(state).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if umax > 0.0 {
                bound = bound.min(dx / umax);
            }
        }
        let mut diffusivity = params.epsilon;
        if cfg.terms.cross_diffusion {
            let mut slope = 0.0f64;
            for i in 0..params.n_diffusive() {
                for &r in state.component(i) {
                    slope = slope.max(truncated_pressure_slope(r, params.gamma[i], params.molar_mass[i], self.cap));
                }
            }
            diffusivity += 2.0 * slope;
        }
        if diffusivity > 0.0 {
            bound = bound.min(dx * dx / (2.0 * diffusivity));
        }
        let mut rate = 0.0f64;
        let net = &cfg.network;
        let mut r = vec![0.0; state.n_components()];
        for k in 0..state.grid_size() {
            state.fields.gather_point(k, &mut r);
            let mut local = 0.0;
            if cfg.terms.reaction {
                for (a, &i) in net.reagents.iter().enumerate() {
                    let others: f64 = net
                        .reagents
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| r[j].abs().min(self.cap))
                        .product();
                    local += net.alpha[a] * others;
                }
            }
            if params.delta > 0.0 {
                let total: f64 = r.iter().map(|v| v.abs()).sum();
                local += params.delta * total.powf(params.beta - 2.0);
            }
            rate = rate.max(local);
        }
        if rate > 0.0 {
            bound = bound.min(1.0 / rate);
        }
        let dt = cfg.cfl_safety * bound;
        if dt.is_finite() && dt > 0.0 {
            dt.min(cfg.dt_max)
        } else {
            cfg.dt_max
        }
    }

    fn check_state(&self, state: &DensityField) -> Result<(), SolverError> {
        for i in 0..state.n_components() {
            for &v in state.component(i) {
                if !v.is_finite() {
                    return Err(SolverError::NonFinite {
                        component: i,
                        time: state.time,
                    });
                }
                if v.abs() > self.blowup_limit {
                    return Err(SolverError::BlowUp {
                        time: state.time,
                        value: v,
                        limit: self.blowup_limit,
                    });
                }
            }
        }
        Ok(())
    }

    /// One classical Runge-Kutta step; the velocity is recomputed at every stage.
    pub fn step_rk4(&self, state: &DensityField, dt: f64) -> Result<StepOutcome, SolverError> {
        let stage = |base: &DensityField, k: &ComponentFields, h: f64| {
            let mut f = base.fields.clone();
            for (v, d) in f.as_mut_slice().iter_mut().zip(k.as_slice()) {
                *v += h * d;
            }
            DensityField::new(f, base.time + h)
        };
        let (k1, r1) = self.evaluate(state, true)?;
        let (k2, r2) = self.evaluate(&stage(state, &k1, 0.5 * dt), true)?;
        let (k3, r3) = self.evaluate(&stage(state, &k2, 0.5 * dt), true)?;
        let (k4, r4) = self.evaluate(&stage(state, &k3, dt), true)?;
        let increment: Vec<f64> = k1
            .as_slice()
            .iter()
            .zip(k2.as_slice())
            .zip(k3.as_slice())
            .zip(k4.as_slice())
            .map(|(((a, b), c), d)| dt / 6.0 * (a + 2.0 * b + 2.0 * c + d))
            .collect();
        let mut fields = state.fields.clone();
        for (v, d) in fields.as_mut_slice().iter_mut().zip(&increment) {
            *v += d;
        }
        let next = DensityField::new(fields, state.time + dt);
        self.check_state(&next)?;
        let rates = EnergyRates::weighted(&[(1.0 / 6.0, r1), (1.0 / 3.0, r2), (1.0 / 3.0, r3), (1.0 / 6.0, r4)]);
        Ok(StepOutcome {
            state: next,
            increment,
            rates,
        })
    }

    fn make_record(
        &self,
        state: &DensityField,
        step: usize,
        dt: f64,
        energy_residual: f64,
        ledger: &Ledger,
    ) -> Result<DiagnosticsRecord, SolverError> {
        let params = &self.config.params;
        let n = state.n_components();
        let rates = self.energy_rates(state)?;
        let pressure = self.pressure(state);
        let velocity = self.grid.stokes_solve(&pressure, params.stokes_coefficient());
        let ux = self.grid.derivative(&velocity);
        let (evf, evf_scale) = effective_viscous_flux_residual(&self.grid, &pressure, &velocity, params);
        let total = state.total_density();
        let component_masses: Vec<f64> = (0..n).map(|i| mean(state.component(i))).collect();
        Ok(DiagnosticsRecord {
            step,
            t: state.time,
            dt,
            total_mass: mean(&total),
            min_density: (0..n)
                .map(|i| state.component(i).iter().copied().fold(f64::INFINITY, f64::min))
                .collect(),
            component_masses,
            max_density: total.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            energy: energy_functional(state, params),
            dissipation_viscous: rates.viscous,
            dissipation_flux: rates.flux,
            dissipation_eps: rates.eps,
            dissipation_delta: rates.delta,
            omega3_cumulative: ledger.production,
            energy_residual,
            evf_residual: relative_evf_residual(evf, evf_scale),
            divu_max: ux.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            r_h: self.functionals.iter().map(|f| f.evaluate(&total)).collect(),
            divu_violations: divu_positivity_probe(&total, &ux, self.config.diagnostics.divu_fraction).len(),
            delta_leak_cumulative: ledger.leak,
            reaction_work: rates.reaction_work(),
        })
    }

    /// Integrates to `t_end`, calling `snapshot` at the configured cadence (and at both ends).
    pub fn run_with(&self, mut snapshot: impl FnMut(&DensityField)) -> RunOutcome {
        let cfg = &self.config;
        let mut report = DiagnosticsReport::new(self.initial.n_components(), cfg.diagnostics.h_values.clone());
        let mut state = self.initial.clone();
        let mut ledger = Ledger::default();
        let e0 = energy_functional(&state, &cfg.params);
        track_extremes(&mut report, &state, cfg.lower_bound);

        let abort = |state: DensityField, report: DiagnosticsReport, e: SolverError| {
            log::error!("run aborted: {e}");
            RunOutcome {
                state,
                report,
                error: Some(e),
            }
        };

        match self.make_record(&state, 0, 0.0, 0.0, &ledger) {
            Ok(r) => report.push(r),
            Err(e) => return abort(state, report, e),
        }
        if cfg.snapshot_every > 0 {
            snapshot(&state);
        }

        let min_dt = 1e-14 * cfg.t_end.max(1.0);
        let mut step = 0usize;
        while state.time < cfg.t_end {
            let mut dt = self.cfl_dt(&state);
            let remaining = cfg.t_end - state.time;
            let last = dt >= remaining;
            if last {
                dt = remaining;
            } else if 2.0 * dt > remaining {
                // split the tail evenly instead of leaving a sliver of a step
                dt = 0.5 * remaining;
            } else if dt < min_dt {
                return abort(state.clone(), report, SolverError::StepCollapse { time: state.time, dt });
            }
            let outcome = match self.step_rk4(&state, dt) {
                Ok(o) => o,
                Err(e) => return abort(state, report, e),
            };
            let change = energy_increment(&state, &outcome.increment, &cfg.params);
            let residual = energy_residual(change, dt, &outcome.rates);
            ledger.production += dt * outcome.rates.product_production;
            ledger.leak += dt * outcome.rates.delta_leak;
            step += 1;
            let mut next = outcome.state;
            if last {
                next.time = cfg.t_end;
            }
            if cfg.positivity_clamp {
                report.extremes.clamped_mass += clamp_negative(&mut next);
            }
            state = next;

            let ex = &mut report.extremes;
            ex.steps = step;
            ex.max_energy_residual = ex.max_energy_residual.max(residual.abs());
            let scaled = residual.abs() * dt / e0.abs().max(f64::MIN_POSITIVE);
            ex.max_scaled_energy_residual = ex.max_scaled_energy_residual.max(scaled);
            if scaled > cfg.diagnostics.energy_tolerance {
                log::warn!("energy residual {residual:e} at t = {} exceeds tolerance", state.time);
            }
            track_extremes(&mut report, &state, cfg.lower_bound);

            if step.is_multiple_of(cfg.diagnostics.every) || last {
                match self.make_record(&state, step, dt, residual, &ledger) {
                    Ok(r) => {
                        report.extremes.max_evf_residual = report.extremes.max_evf_residual.max(r.evf_residual);
                        report.push(r)
                    }
                    Err(e) => return abort(state, report, e),
                }
            }
            if cfg.snapshot_every > 0 && (step.is_multiple_of(cfg.snapshot_every) || last) {
                snapshot(&state);
            }
        }
        if let Some(first) = report.records.first() {
            report.extremes.max_evf_residual = report.extremes.max_evf_residual.max(first.evf_residual);
        }
        RunOutcome {
            state,
            report,
            error: None,
        }
    }

    pub fn run(&self) -> RunOutcome {
        self.run_with(|_| {})
    }
}

#[derive(Default)]
struct Ledger {
    production: f64,
    leak: f64,
}

fn track_extremes(report: &mut DiagnosticsReport, state: &DensityField, lower_bound: Option<f64>) {
    let (lo, hi) = state
        .fields
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let ex = &mut report.extremes;
    ex.min_density = ex.min_density.min(lo);
    ex.max_density = ex.max_density.max(hi);
    if let Some(c) = lower_bound {
        if lo < c {
            ex.lower_bound_violations += 1;
            log::warn!("density {lo:e} below the configured lower bound {c:e} at t = {}", state.time);
        }
    }
}

/// Sets negative densities to zero and returns the mass added.
fn clamp_negative(state: &mut DensityField) -> f64 {
    let m = state.grid_size() as f64;
    let mut added = 0.0;
    for v in state.fields.as_mut_slice() {
        if *v < 0.0 {
            added -= *v;
            *v = 0.0;
        }
    }
    if added > 0.0 {
        log::info!("positivity clamp added mass {:e} at t = {}", added / m, state.time);
    }
    added / m
}

/// Validates `config`, then integrates it.
pub fn run_simulation(config: SimConfig) -> Result<RunOutcome, SolverError> {
    Ok(Solver::new(config)?.run())
}
