//! Entropy variables, the flux matrices in those variables, and the map
//! `G: rho_vec -> (q, rho)` with its Newton inverse.

use crate::error::AlgebraError;
use crate::mixture::{ComponentFields, DensityField, MixtureParams};

/// Enthalpy-like potentials `h_i = gamma_i / ((gamma_i - 1) m_i) rho_i^(gamma_i - 1)`.
pub fn potentials_at(rho: &[f64], params: &MixtureParams) -> Vec<f64> {
    rho.iter()
        .enumerate()
        .map(|(i, &r)| params.enthalpy_prefactor(i) * r.powf(params.gamma[i] - 1.0))
        .collect()
}

/// Consecutive differences `q_i = h_i - h_(i+1)` at one point.
pub fn q_at(rho: &[f64], params: &MixtureParams) -> Vec<f64> {
    let h = potentials_at(rho, params);
    h.windows(2).map(|w| w[0] - w[1]).collect()
}

/// The `N - 1` entropy variables on a grid together with the total density.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyVars {
    pub q: ComponentFields,
    pub rho_total: Vec<f64>,
}

impl EntropyVars {
    pub fn point(&self, k: usize) -> (Vec<f64>, f64) {
        let mut q = vec![0.0; self.q.n_components()];
        self.q.gather_point(k, &mut q);
        (q, self.rho_total[k])
    }
}

pub fn q_from_rho(state: &DensityField, params: &MixtureParams) -> EntropyVars {
    let (n, m) = (state.n_components(), state.grid_size());
    let mut q = ComponentFields::zeros(n - 1, m);
    let mut rho = vec![0.0; n];
    for k in 0..m {
        state.fields.gather_point(k, &mut rho);
        for (j, v) in q_at(&rho, params).into_iter().enumerate() {
            q.set(j, k, v);
        }
    }
    EntropyVars {
        q,
        rho_total: state.total_density(),
    }
}

fn require_positive(rho: &[f64]) -> Result<(), AlgebraError> {
    match rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        Some((i, &r)) => Err(AlgebraError::NonPositive { component: i, value: r }),
        None => Ok(()),
    }
}

/// A dense square matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Flux matrix in the entropy variables: `F_i = sum_j b_ij grad q_j` for `i < N - 1`.
pub fn matrix_b(rho: &[f64]) -> Result<SquareMatrix, AlgebraError> {
    require_positive(rho)?;
    let n = rho.len();
    let total: f64 = rho.iter().sum();
    // prefix[j] = rho_0 + ... + rho_j
    let prefix: Vec<f64> = rho
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    // suffix[j] = rho_(j+1) + ... + rho_(N-1), accumulated from the right for accuracy
    let mut suffix = vec![0.0; n];
    for j in (0..n - 1).rev() {
        suffix[j] = suffix[j + 1] + rho[j + 1];
    }
    let mut b = SquareMatrix::zeros(n - 1);
    for i in 0..n - 1 {
        let w = rho[i] / total;
        for j in 0..n - 1 {
            let v = if j < i { -w * prefix[j] } else { w * suffix[j] };
            b.set(i, j, lower_sign(j < i) * v);
        }
    }
    Ok(b)
}

#[cfg(not(feature = "mutation-b-sign"))]
#[inline]
fn lower_sign(_lower: bool) -> f64 {
    1.0
}

/// Flips the sign of the lower triangle so the check suite can prove it notices.
#[cfg(feature = "mutation-b-sign")]
#[inline]
fn lower_sign(lower: bool) -> f64 {
    if lower {
        -1.0
    } else {
        1.0
    }
}

/// `rho_1 ... rho_N / rho`.
pub fn det_b_closed_form(rho: &[f64]) -> Result<f64, AlgebraError> {
    require_positive(rho)?;
    let total: f64 = rho.iter().sum();
    Ok(rho.iter().product::<f64>() / total)
}

/// Symmetric flux matrix in the potentials: `F_i = sum_j c_ij grad h_j`.
pub fn matrix_c(rho: &[f64]) -> Result<SquareMatrix, AlgebraError> {
    require_positive(rho)?;
    let n = rho.len();
    let total: f64 = rho.iter().sum();
    let mut c = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                rho[i] / total * (total - rho[i])
            } else {
                -(rho[i] * rho[j]) / total
            };
            c.set(i, j, v);
        }
    }
    // enforce exact symmetry of the constructed off-diagonal products
    for i in 0..n {
        for j in 0..i {
            let v = c.get(i, j);
            c.set(j, i, v);
        }
    }
    Ok(c)
}

/// Diagonal slopes `a_i = (gamma_i / m_i) z_i^(gamma_i - 2)` of the potentials.
fn slopes(z: &[f64], params: &MixtureParams) -> Vec<f64> {
    z.iter()
        .enumerate()
        .map(|(i, &zi)| params.gamma[i] / params.molar_mass[i] * zi.powf(params.gamma[i] - 2.0))
        .collect()
}

/// `det DG = sum_i prod_(j != i) a_j`.
pub fn det_dg_closed_form(z: &[f64], params: &MixtureParams) -> Result<f64, AlgebraError> {
    require_positive(z)?;
    let a = slopes(z, params);
    Ok((0..a.len())
        .map(|i| a.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).product::<f64>())
        .sum())
}

/// `G(z) = (q(z), sum z)` at one point.
pub fn map_g(z: &[f64], params: &MixtureParams) -> Vec<f64> {
    let mut out = q_at(z, params);
    out.push(z.iter().sum());
    out
}

/// Solves `DG(z) dz = r` in `O(N)` using the bidiagonal-plus-sum structure.
fn solve_dg(a: &[f64], r: &[f64]) -> Vec<f64> {
    let n = a.len();
    // w_i = a_i dz_i satisfies w_i - w_(i+1) = r_i and sum w_i / a_i = r_(N-1).
    let mut tail = vec![0.0; n];
    for i in (0..n - 1).rev() {
        tail[i] = tail[i + 1] + r[i];
    }
    let inv_sum: f64 = a.iter().map(|ai| 1.0 / ai).sum();
    let weighted: f64 = tail.iter().zip(a).map(|(t, ai)| t / ai).sum();
    let w_last = (r[n - 1] - weighted) / inv_sum;
    tail.iter().zip(a).map(|(t, ai)| (w_last + t) / ai).collect()
}

/// Tolerances for the Newton inversion of `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged once the residual is below `tolerance * (1 + |rho| + max |h|)`.
    pub tolerance: f64,
    /// Extra full steps taken after convergence.
    pub polish: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-12,
            polish: 2,
        }
    }
}

fn residual_norm(z: &[f64], target: &[f64], params: &MixtureParams) -> (Vec<f64>, f64) {
    let g = map_g(z, params);
    let r: Vec<f64> = target.iter().zip(&g).map(|(t, v)| t - v).collect();
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r, norm)
}

/// Inverts `G` at one point by damped Newton from `z = rho / N`.
///
/// Steps are halved until every iterate stays strictly positive and the residual
/// does not grow. If that stalls, Newton is restarted from the solution of the
/// scalar problem in the common potential shift.
pub fn invert_g_at(
    q: &[f64],
    rho: f64,
    params: &MixtureParams,
    opts: NewtonOptions,
) -> Result<Vec<f64>, AlgebraError> {
    if !codomain_membership_at(q, rho, params) {
        return Err(AlgebraError::OutsideCodomain {
            rho,
            boundary: codomain_boundary(q, params),
        });
    }
    let n = q.len() + 1;
    let mut target = q.to_vec();
    target.push(rho);
    let start = vec![rho / n as f64; n];
    match newton_from(start, &target, params, opts) {
        Ok(z) => Ok(z),
        Err(first) => {
            log::debug!("Newton from the uniform split stalled ({first}); restarting on the potential shift");
            let z = shift_solve(q, rho, params).ok_or(first)?;
            newton_from(z, &target, params, opts)
        }
    }
}

/// Offsets `S_j = q_j + ... + q_(N-2)`, so that `h_j = c + S_j` for a common shift `c`.
fn potential_offsets(q: &[f64]) -> Vec<f64> {
    let n = q.len() + 1;
    let mut s = vec![0.0; n];
    for j in (0..n - 1).rev() {
        s[j] = s[j + 1] + q[j];
    }
    s
}

/// Solves the one-parameter problem `sum_j z_j(c) = rho` with `h_j(z_j) = c + S_j`,
/// which is increasing in `c`, by safeguarded Newton on a bracket.
fn shift_solve(q: &[f64], rho: f64, params: &MixtureParams) -> Option<Vec<f64>> {
    let s = potential_offsets(q);
    let floor = -s.iter().copied().fold(f64::INFINITY, f64::min);
    let densities = |c: f64| -> Vec<f64> {
        s.iter()
            .enumerate()
            .map(|(j, sj)| {
                let alpha = params.gamma[j] - 1.0;
                ((c + sj).max(0.0) / params.enthalpy_prefactor(j)).powf(1.0 / alpha)
            })
            .collect()
    };
    let excess = |c: f64| -> (f64, f64) {
        let z = densities(c);
        let value = z.iter().sum::<f64>() - rho;
        let slope = z
            .iter()
            .zip(&s)
            .enumerate()
            .map(|(j, (zj, sj))| if *zj > 0.0 { zj / ((params.gamma[j] - 1.0) * (c + sj)) } else { 0.0 })
            .sum::<f64>();
        (value, slope)
    };
    let mut lo = floor;
    let mut span = 1.0f64.max(floor.abs());
    let mut hi = floor + span;
    while excess(hi).0 < 0.0 {
        lo = hi;
        span *= 2.0;
        hi = floor + span;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (value, slope) = excess(c);
        if value == 0.0 {
            break;
        }
        if value < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        let newton = c - value / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == c || hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        c = next;
    }
    let z = densities(c);
    z.iter().all(|v| *v > 0.0 && v.is_finite()).then_some(z)
}

fn newton_from(
    mut z: Vec<f64>,
    target: &[f64],
    params: &MixtureParams,
    opts: NewtonOptions,
) -> Result<Vec<f64>, AlgebraError> {
    let rho = target[target.len() - 1];
    let (mut r, mut norm) = residual_norm(&z, target, params);
    let mut polished = 0;
    for _ in 0..opts.max_iterations {
        let h_scale = potentials_at(&z, params).iter().fold(0.0f64, |a, h| a.max(h.abs()));
        let converged = norm <= opts.tolerance * (1.0 + rho.abs() + h_scale);
        if converged {
            if polished >= opts.polish {
                return Ok(z);
            }
            polished += 1;
        }
        let dz = solve_dg(&slopes(&z, params), &r);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(zi, d)| zi + step * d).collect();
            if trial.iter().all(|t| *t > 0.0 && t.is_finite()) {
                let (rt, nt) = residual_norm(&trial, target, params);
                if nt <= norm || converged {
                    z = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            if converged {
                return Ok(z);
            }
            break;
        }
    }
    let h_scale = potentials_at(&z, params).iter().fold(0.0f64, |a, h| a.max(h.abs()));
    if norm <= opts.tolerance * (1.0 + rho.abs() + h_scale) {
        return Ok(z);
    }
    Err(AlgebraError::NoConvergence {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

pub fn rho_from_q(vars: &EntropyVars, params: &MixtureParams) -> Result<DensityField, AlgebraError> {
    let n = vars.q.n_components() + 1;
    let m = vars.rho_total.len();
    let mut out = ComponentFields::zeros(n, m);
    for k in 0..m {
        let (q, rho) = vars.point(k);
        let z = invert_g_at(&q, rho, params, NewtonOptions::default())?;
        for (i, v) in z.into_iter().enumerate() {
            out.set(i, k, v);
        }
    }
    Ok(DensityField::new(out, 0.0))
}

/// Lower boundary `g(q)` of the admissible total densities for entropy variables `q`.
///
/// Writing `h_j = c + S_j` with `S_j = q_j + ... + q_(N-2)`, positivity of every `z_j`
/// requires `c > -min S`, and the total density increases with `c`.
pub fn codomain_boundary(q: &[f64], params: &MixtureParams) -> f64 {
    let n = q.len() + 1;
    let s = potential_offsets(q);
    let (sector, s_min) = s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    (0..n)
        .filter(|&j| j != sector)
        .map(|j| {
            let alpha = params.gamma[j] - 1.0;
            let kappa = params.enthalpy_prefactor(j).powf(-1.0 / alpha);
            kappa * (s[j] - s_min).max(0.0).powf(1.0 / alpha)
        })
        .sum()
}

pub fn codomain_membership_at(q: &[f64], rho: f64, params: &MixtureParams) -> bool {
    q.iter().all(|v| v.is_finite()) && rho.is_finite() && rho > codomain_boundary(q, params)
}

/// True when every grid point of `vars` lies in the image of the positive orthant.
pub fn codomain_membership(vars: &EntropyVars, params: &MixtureParams) -> bool {
    (0..vars.rho_total.len()).all(|k| {
        let (q, rho) = vars.point(k);
        codomain_membership_at(&q, rho, params)
    })
}
