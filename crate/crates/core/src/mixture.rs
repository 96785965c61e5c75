//! Physical parameters, the power-law pressure, and the irreversible reaction network.
//!
//! Everything here is a value type. Component indices are zero-based.

use serde::{Deserialize, Serialize};

use crate::error::MixtureError;

/// Default damping exponent of the `delta` regularization.
pub const DEFAULT_BETA: f64 = 6.0;

/// An `N x M` block of per-component grid data stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentFields {
    n_components: usize,
    grid_size: usize,
    data: Vec<f64>,
}

impl ComponentFields {
    pub fn zeros(n_components: usize, grid_size: usize) -> Self {
        Self {
            n_components,
            grid_size,
            data: vec![0.0; n_components * grid_size],
        }
    }

    /// Builds from one vector per component; all must share a length.
    pub fn from_components(components: Vec<Vec<f64>>) -> Result<Self, MixtureError> {
        let n_components = components.len();
        let grid_size = components.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_components * grid_size);
        for c in components {
            if c.len() != grid_size {
                return Err(MixtureError::Shape {
                    expected: grid_size,
                    got: c.len(),
                });
            }
            data.extend(c);
        }
        Ok(Self {
            n_components,
            grid_size,
            data,
        })
    }

    /// Wraps a flat component-major buffer.
    pub fn from_flat(n_components: usize, grid_size: usize, data: Vec<f64>) -> Result<Self, MixtureError> {
        if data.len() != n_components * grid_size {
            return Err(MixtureError::Shape {
                expected: n_components * grid_size,
                got: data.len(),
            });
        }
        Ok(Self {
            n_components,
            grid_size,
            data,
        })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.data[i * self.grid_size..(i + 1) * self.grid_size]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.grid_size..(i + 1) * self.grid_size]
    }

    #[inline]
    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.data[i * self.grid_size + m]
    }

    #[inline]
    pub fn set(&mut self, i: usize, m: usize, value: f64) {
        self.data[i * self.grid_size + m] = value;
    }

    /// Copies the `N` values at grid point `m` into `out`.
    pub fn gather_point(&self, m: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_components) {
            *o = self.data[i * self.grid_size + m];
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Pointwise sum over components `0..upto`.
    pub fn partial_sum(&self, upto: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid_size];
        for i in 0..upto.min(self.n_components) {
            for (o, v) in out.iter_mut().zip(self.component(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// The mixture state: `N` component densities on a periodic grid at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub fields: ComponentFields,
    pub time: f64,
}

impl DensityField {
    pub fn new(fields: ComponentFields, time: f64) -> Self {
        Self { fields, time }
    }

    pub fn from_components(components: Vec<Vec<f64>>, time: f64) -> Result<Self, MixtureError> {
        Ok(Self {
            fields: ComponentFields::from_components(components)?,
            time,
        })
    }

    /// Spatially uniform state with the given component values.
    pub fn uniform(values: &[f64], grid_size: usize) -> Self {
        let comps = values.iter().map(|&v| vec![v; grid_size]).collect();
        Self::from_components(comps, 0.0).expect("uniform components share a length")
    }

    pub fn n_components(&self) -> usize {
        self.fields.n_components()
    }

    pub fn grid_size(&self) -> usize {
        self.fields.grid_size()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        self.fields.component(i)
    }

    /// Total density `rho = sum_i rho_i` at every point.
    pub fn total_density(&self) -> Vec<f64> {
        self.fields.partial_sum(self.n_components())
    }

    pub fn min_value(&self) -> f64 {
        self.fields.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Physical constants for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureParams {
    /// Adiabatic exponents `gamma_i > 1`; their count fixes `N`.
    pub gamma: Vec<f64>,
    /// Molar masses `m_i > 0`.
    pub molar_mass: Vec<f64>,
    /// Number of diffusive components; they occupy indices `0..n_diffusive`.
    #[serde(default)]
    pub n_diffusive: Option<usize>,
    pub mu: f64,
    pub lambda: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl MixtureParams {
    /// Fully diffusive mixture with `mu = 1`, `lambda = 0` and no regularization.
    pub fn new(gamma: Vec<f64>, molar_mass: Vec<f64>) -> Self {
        Self {
            gamma,
            molar_mass,
            n_diffusive: None,
            mu: 1.0,
            lambda: 0.0,
            epsilon: 0.0,
            delta: 0.0,
            beta: DEFAULT_BETA,
        }
    }

    pub fn with_viscosity(mut self, mu: f64, lambda: f64) -> Self {
        self.mu = mu;
        self.lambda = lambda;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_diffusive(mut self, n_diffusive: usize) -> Self {
        self.n_diffusive = Some(n_diffusive);
        self
    }

    pub fn n_components(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_diffusive(&self) -> usize {
        self.n_diffusive.unwrap_or(self.gamma.len())
    }

    /// `2 mu + lambda`, the coefficient of the one-dimensional Stokes operator.
    pub fn stokes_coefficient(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }

    /// Enthalpy prefactor `gamma_i / ((gamma_i - 1) m_i)`.
    pub fn enthalpy_prefactor(&self, i: usize) -> f64 {
        let g = self.gamma[i];
        g / ((g - 1.0) * self.molar_mass[i])
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        let n = self.gamma.len();
        let bad = |field, reason: String| Err(MixtureError::InvalidParameter { field, reason });
        if n < 2 {
            return bad("gamma", format!("need at least 2 components, got {n}"));
        }
        if self.molar_mass.len() != n {
            return bad(
                "molar_mass",
                format!("expected {n} entries, got {}", self.molar_mass.len()),
            );
        }
        let n1 = self.n_diffusive();
        if n1 < 1 || n1 > n {
            return bad("n_diffusive", format!("must lie in 1..={n}, got {n1}"));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g > 1.0 && g.is_finite())) {
            return bad("gamma", format!("every exponent must exceed 1, got {g}"));
        }
        if let Some(m) = self.molar_mass.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return bad("molar_mass", format!("every mass must be positive, got {m}"));
        }
        if !(self.mu > 0.0) {
            return bad("mu", format!("must be positive, got {}", self.mu));
        }
        if !(self.lambda + 2.0 / 3.0 * self.mu > 0.0) {
            return bad(
                "lambda",
                format!("lambda + 2 mu / 3 must be positive, got {}", self.lambda + 2.0 / 3.0 * self.mu),
            );
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be non-negative, got {}", self.epsilon));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta", format!("must be non-negative, got {}", self.delta));
        }
        if !(self.beta.is_finite() && self.beta >= 2.0) {
            return bad("beta", format!("must be at least 2, got {}", self.beta));
        }
        Ok(())
    }
}

/// A single irreversible channel `A_1 + ... + A_K -> C_1 + ... + C_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionNetwork {
    pub reagents: Vec<usize>,
    /// Rate coefficient per reagent, same order as `reagents`.
    pub alpha: Vec<f64>,
    pub products: Vec<usize>,
    /// Share of the consumed mass assigned to each product.
    pub prod_weight: Vec<f64>,
}

impl ReactionNetwork {
    /// `A + B -> C` on components 0, 1 and 2.
    pub fn abc(alpha_a: f64, alpha_b: f64) -> Self {
        Self {
            reagents: vec![0, 1],
            alpha: vec![alpha_a, alpha_b],
            products: vec![2],
            prod_weight: vec![alpha_a + alpha_b],
        }
    }

    /// A channel with zero rates: `reagent -> product` that never fires.
    pub fn inert(reagent: usize, product: usize) -> Self {
        Self {
            reagents: vec![reagent],
            alpha: vec![0.0],
            products: vec![product],
            prod_weight: vec![0.0],
        }
    }

    pub fn validate(&self, n_components: usize) -> Result<(), MixtureError> {
        let bad = |m: String| Err(MixtureError::InvalidNetwork(m));
        if self.reagents.is_empty() || self.products.is_empty() {
            return bad("reagent and product sets must be nonempty".into());
        }
        if self.alpha.len() != self.reagents.len() {
            return bad(format!(
                "{} rate coefficients for {} reagents",
                self.alpha.len(),
                self.reagents.len()
            ));
        }
        if self.prod_weight.len() != self.products.len() {
            return bad(format!(
                "{} product weights for {} products",
                self.prod_weight.len(),
                self.products.len()
            ));
        }
        let mut seen = vec![false; n_components];
        for &i in self.reagents.iter().chain(&self.products) {
            if i >= n_components {
                return bad(format!("component index {i} out of range for N = {n_components}"));
            }
            if seen[i] {
                return bad(format!("component {i} listed twice (reagents and products must be disjoint)"));
            }
            seen[i] = true;
        }
        if self.alpha.iter().chain(&self.prod_weight).any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad("rate coefficients and product weights must be non-negative".into());
        }
        let sa: f64 = self.alpha.iter().sum();
        let sb: f64 = self.prod_weight.iter().sum();
        if (sa - sb).abs() > 4.0 * f64::EPSILON * sa.max(sb) {
            return bad(format!("product weights sum to {sb}, reagent rates to {sa}"));
        }
        Ok(())
    }

    pub fn is_reagent(&self, i: usize) -> bool {
        self.reagents.contains(&i)
    }

    pub fn is_product(&self, i: usize) -> bool {
        self.products.contains(&i)
    }

    /// Mass-action product `prod_{j in R} rho_j`.
    fn activity(&self, rho: &[f64]) -> f64 {
        self.reagents.iter().map(|&j| rho[j]).product()
    }

    /// Production rates at one point of a non-negative state.
    pub fn rates_at(&self, rho: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let a = self.activity(rho);
        for (&i, &al) in self.reagents.iter().zip(&self.alpha) {
            out[i] = -al * a;
        }
        for (&c, &w) in self.products.iter().zip(&self.prod_weight) {
            out[c] = w * a;
        }
    }

    /// Extension to signed states: rates are evaluated on `|rho|` and clipped
    /// from below at zero for every component that is negative.
    pub fn extended_rates_at(&self, rho: &[f64], out: &mut [f64]) {
        let abs: Vec<f64> = rho.iter().map(|r| r.abs()).collect();
        self.rates_at(&abs, out);
        for (o, r) in out.iter_mut().zip(rho) {
            if *r < 0.0 {
                *o = o.max(0.0);
            }
        }
    }
}

/// `2 gamma_max < 3 gamma_min - gamma_S + 1`, `gamma_S` the largest product exponent.
pub fn validate_gamma_condition(params: &MixtureParams, network: &ReactionNetwork) -> bool {
    let gmax = params.gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gmin = params.gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let gs = network
        .products
        .iter()
        .map(|&j| params.gamma[j])
        .fold(f64::NEG_INFINITY, f64::max);
    2.0 * gmax < 3.0 * gmin - gs + 1.0
}

/// Partial pressure `rho^gamma / m`.
pub fn pressure_partial(rho: f64, gamma: f64, m: f64) -> Result<f64, MixtureError> {
    if rho < 0.0 {
        return Err(MixtureError::NegativeDensity { value: rho });
    }
    Ok(rho.powf(gamma) / m)
}

/// Total pressure and the diffusive-part pressure `p^(1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField {
    pub total: Vec<f64>,
    pub diffusive: Vec<f64>,
}

pub fn pressure_total(state: &DensityField, params: &MixtureParams) -> Result<PressureField, MixtureError> {
    let m = state.grid_size();
    let n1 = params.n_diffusive();
    let mut total = vec![0.0; m];
    let mut diffusive = vec![0.0; m];
    for i in 0..state.n_components() {
        let (g, mm) = (params.gamma[i], params.molar_mass[i]);
        for (k, &r) in state.component(i).iter().enumerate() {
            let p = pressure_partial(r, g, mm)?;
            total[k] += p;
            if i < n1 {
                diffusive[k] += p;
            }
        }
    }
    Ok(PressureField { total, diffusive })
}

/// Pressure of a possibly signed state, evaluated on `|rho_i|`.
pub fn pressure_guarded(state: &DensityField, params: &MixtureParams) -> Vec<f64> {
    let mut total = vec![0.0; state.grid_size()];
    for i in 0..state.n_components() {
        let (g, mm) = (params.gamma[i], params.molar_mass[i]);
        for (t, &r) in total.iter_mut().zip(state.component(i)) {
            *t += r.abs().powf(g) / mm;
        }
    }
    total
}

/// Production rates on every grid point of a non-negative state.
pub fn reaction_rates(state: &DensityField, network: &ReactionNetwork) -> ComponentFields {
    let (n, m) = (state.n_components(), state.grid_size());
    let mut out = ComponentFields::zeros(n, m);
    let mut rho = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..m {
        state.fields.gather_point(k, &mut rho);
        network.rates_at(&rho, &mut w);
        for (i, &v) in w.iter().enumerate() {
            out.set(i, k, v);
        }
    }
    out
}

/// Pointwise extended rates for an arbitrary signed vector.
pub fn omega_extended(rho: &[f64], network: &ReactionNetwork) -> Vec<f64> {
    let mut out = vec![0.0; rho.len()];
    network.extended_rates_at(rho, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params3(gamma: [f64; 3]) -> MixtureParams {
        MixtureParams::new(gamma.to_vec(), vec![1.0; 3])
    }

    #[test]
    fn gamma_condition_examples() {
        let net = ReactionNetwork::abc(1.0, 1.0);
        assert!(validate_gamma_condition(&params3([2.0, 2.0, 2.0]), &net));
        assert!(!validate_gamma_condition(&params3([3.0, 1.1, 1.1]), &net));
        assert!(!validate_gamma_condition(&params3([2.0, 2.0, 2.5]), &net));
    }

    #[test]
    fn pressure_partial_values() {
        assert_eq!(pressure_partial(2.0, 2.0, 1.0).unwrap(), 4.0);
        assert_eq!(pressure_partial(0.0, 1.7, 3.0).unwrap(), 0.0);
        // 1.5^1.4 / 2 from a high-precision evaluation
        let reference = 0.882_059_266_893_505_2_f64;
        let got = pressure_partial(1.5, 1.4, 2.0).unwrap();
        assert!((got - reference).abs() < 1e-12, "{got}");
        assert!(matches!(
            pressure_partial(-0.1, 2.0, 1.0),
            Err(MixtureError::NegativeDensity { .. })
        ));
    }

    #[test]
    fn pressure_total_and_diffusive_part() {
        let p2 = MixtureParams::new(vec![2.0, 2.0], vec![1.0, 1.0]);
        let s = DensityField::uniform(&[1.0, 1.0], 16);
        assert!(pressure_total(&s, &p2).unwrap().total.iter().all(|&p| p == 2.0));

        let p3 = params3([2.0; 3]).with_diffusive(2);
        let s = DensityField::uniform(&[1.0, 2.0, 3.0], 16);
        let p = pressure_total(&s, &p3).unwrap();
        assert!(p.total.iter().all(|&v| v == 14.0));
        assert!(p.diffusive.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn abc_rates() {
        let net = ReactionNetwork::abc(1.0, 1.0);
        let mut w = [0.0; 3];
        net.rates_at(&[1.0, 1.0, 0.3], &mut w);
        assert_eq!(w, [-1.0, -1.0, 2.0]);
        net.rates_at(&[0.0, 2.0, 1.0], &mut w);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extended_rates_examples() {
        let net = ReactionNetwork::abc(1.0, 1.0);
        let w = omega_extended(&[-0.5, 1.0, 0.0], &net);
        assert_eq!(w[0], 0.0);
        let w = omega_extended(&[1.0, -2.0, 0.0], &net);
        assert_eq!(w[2], 2.0 * 1.0 * 2.0);
        let mut plain = [0.0; 3];
        net.rates_at(&[0.4, 0.7, 1.1], &mut plain);
        assert_eq!(omega_extended(&[0.4, 0.7, 1.1], &net), plain.to_vec());
    }

    #[test]
    fn network_validation() {
        assert!(ReactionNetwork::abc(1.0, 2.0).validate(3).is_ok());
        let mut bad = ReactionNetwork::abc(1.0, 2.0);
        bad.prod_weight = vec![2.5];
        assert!(bad.validate(3).is_err());
        let mut overlap = ReactionNetwork::abc(1.0, 1.0);
        overlap.products = vec![1];
        assert!(overlap.validate(3).is_err());
        assert!(ReactionNetwork::abc(1.0, 1.0).validate(2).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(params3([2.0; 3]).validate().is_ok());
        assert!(params3([1.0, 2.0, 2.0]).validate().is_err());
        assert!(params3([2.0; 3]).with_viscosity(1.0, -0.7).validate().is_err());
        assert!(params3([2.0; 3]).with_diffusive(0).validate().is_err());
        assert!(MixtureParams::new(vec![2.0], vec![1.0]).validate().is_err());
    }

    fn network_strategy() -> impl Strategy<Value = (usize, ReactionNetwork)> {
        (3usize..7).prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(0.1f64..3.0, 2),
                proptest::collection::vec(0.1f64..1.0, 2),
            )
                .prop_map(|(n, alpha, w)| {
                    // reagents 0,1; products spread over 2..n
                    let products: Vec<usize> = (2..n).collect();
                    let sa: f64 = alpha.iter().sum();
                    let raw: Vec<f64> = (0..products.len()).map(|k| w[k % 2] + k as f64).collect();
                    let sr: f64 = raw.iter().sum();
                    let mut prod_weight: Vec<f64> = raw.iter().map(|r| r / sr * sa).collect();
                    // absorb rounding into the last weight
                    let head: f64 = prod_weight[..prod_weight.len() - 1].iter().sum();
                    *prod_weight.last_mut().unwrap() = sa - head;
                    (
                        n,
                        ReactionNetwork {
                            reagents: vec![0, 1],
                            alpha,
                            products,
                            prod_weight,
                        },
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn rates_sum_to_zero_with_fixed_signs(
            (n, net) in network_strategy(),
            raw in proptest::collection::vec(0.0f64..5.0, 6),
        ) {
            let rho = &raw[..n];
            let mut w = vec![0.0; n];
            net.rates_at(rho, &mut w);
            let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let sum: f64 = w.iter().sum();
            prop_assert!(sum.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE));
            for &i in &net.reagents { prop_assert!(w[i] <= 0.0); }
            for &c in &net.products { prop_assert!(w[c] >= 0.0); }
        }

        #[test]
        fn extension_is_nonnegative_on_negative_entries(
            raw in proptest::collection::vec(-3.0f64..3.0, 3),
            a1 in 0.1f64..2.0, a2 in 0.1f64..2.0,
        ) {
            let net = ReactionNetwork::abc(a1, a2);
            let w = omega_extended(&raw, &net);
            for (wi, ri) in w.iter().zip(&raw) {
                if *ri < 0.0 { prop_assert!(*wi >= 0.0); }
            }
        }

        #[test]
        fn gamma_condition_monotone_in_gamma_min(
            gamma in proptest::collection::vec(1.05f64..3.5, 3..6),
            frac in 0.0f64..1.0,
            product in 0usize..3,
        ) {
            let n = gamma.len();
            let net = ReactionNetwork { reagents: vec![(product + 1) % n], alpha: vec![1.0],
                products: vec![product], prod_weight: vec![1.0] };
            let p = MixtureParams::new(gamma.clone(), vec![1.0; n]);
            let gmin = gamma.iter().copied().fold(f64::INFINITY, f64::min);
            let next = gamma.iter().copied().filter(|&g| g > gmin).fold(f64::INFINITY, f64::min);
            let lift = if next.is_finite() { frac * (next - gmin) } else { frac };
            let lifted: Vec<f64> = gamma.iter().map(|&g| g.max(gmin + lift)).collect();
            let q = MixtureParams::new(lifted, vec![1.0; n]);
            if validate_gamma_condition(&p, &net) {
                prop_assert!(validate_gamma_condition(&q, &net));
            }
        }
    }
}
