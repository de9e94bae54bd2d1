//! Exact linear-algebra reference for the contact process on a small ring.
//!
//! States are the non-empty subsets of the `n` ring sites; the generator
//! restricted to those states is sub-Markovian (mass leaks to the absorbing
//! empty set). From it we compute the decay rate, the quasi-stationary
//! distribution (left principal eigenvector), the survival prefactor
//! values (right principal eigenvector), and the absorption-time law, all
//! to near machine precision. These validate the Monte Carlo estimator
//! pipeline end to end — not any infinite-lattice constant.
//!
//! Conventions: the left eigenvector is normalized to total mass one, the
//! right eigenvector so that their inner product is one; with these
//! normalizations `e^{αt}·P(survival from A at t) → h(A)` holds exactly on
//! the chain.

use crate::lattice::Site;
use crate::process::{ring_canonical_form, CanonicalConfig, Configuration};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Dense sub-generator of the ring contact process on non-empty states.
/// State with bitmask `m` has matrix index `m - 1`.
#[derive(Clone, Debug)]
pub struct FiniteChain {
    pub n: usize,
    pub lambda: f64,
    dim: usize,
    q: Vec<f64>,
}

impl FiniteChain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.dim + j]
    }

    pub fn state_of_mask(&self, mask: u32) -> Configuration {
        Configuration::new(
            (0..self.n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| Site(vec![i as i32]))
                .collect(),
        )
    }

    pub fn mask_of_state(&self, config: &Configuration) -> Result<u32> {
        let mut mask = 0u32;
        for s in config.sites() {
            let x = s.0[0];
            if x < 0 || x as usize >= self.n {
                return Err(Error::InvalidParameter(format!(
                    "site {x} outside ring of size {}",
                    self.n
                )));
            }
            mask |= 1 << x;
        }
        Ok(mask)
    }

    /// Index of the origin singleton state.
    pub fn origin_index(&self) -> usize {
        0 // mask 1 - 1
    }

    /// Rotation class (canonical form) of the state at matrix index `i`.
    pub fn class_of_index(&self, i: usize) -> CanonicalConfig {
        ring_canonical_form(&self.state_of_mask(i as u32 + 1), self.n)
    }
}

/// Build the exact generator: infected sites heal at rate 1; a healthy
/// site is infected at rate λ times its number of infected ring neighbors,
/// counted with multiplicity (so on a 2-ring the pair rate is 2λ).
pub fn build_chain(n: usize, lambda: f64) -> Result<FiniteChain> {
    if !(2..=12).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "ring size {n} outside supported range 2..=12"
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter("lambda must be non-negative".into()));
    }
    let dim = (1usize << n) - 1;
    let mut q = vec![0.0; dim * dim];
    for mask in 1u32..=(dim as u32) {
        let i = (mask - 1) as usize;
        let mut out_rate = 0.0;
        for site in 0..n {
            if mask >> site & 1 == 1 {
                // Heal.
                let target = mask & !(1 << site);
                out_rate += 1.0;
                if target != 0 {
                    q[i * dim + (target - 1) as usize] += 1.0;
                }
            } else {
                // Infect: neighbors with multiplicity.
                let mut infected_neighbors = 0u32;
                for d in [1usize, n - 1] {
                    let nb = (site + d) % n;
                    if mask >> nb & 1 == 1 {
                        infected_neighbors += 1;
                    }
                }
                if infected_neighbors > 0 {
                    let rate = lambda * infected_neighbors as f64;
                    let target = mask | (1 << site);
                    q[i * dim + (target - 1) as usize] += rate;
                    out_rate += rate;
                }
            }
        }
        q[i * dim + i] = -out_rate;
    }
    Ok(FiniteChain { n, lambda, dim, q })
}

/// Principal spectral data and the absorption-time law on a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub n: usize,
    pub lambda: f64,
    /// Decay rate: negative of the principal eigenvalue.
    pub alpha: f64,
    /// Quasi-stationary distribution over rotation classes.
    #[serde(with = "crate::stats::mark_map")]
    pub qsd: BTreeMap<CanonicalConfig, f64>,
    /// Right-eigenvector values over rotation classes (survival prefactors).
    #[serde(with = "crate::stats::mark_map")]
    pub h: BTreeMap<CanonicalConfig, f64>,
    /// Residuals of the two eigen-relations, `‖νQ + αν‖∞` and `‖Qh + αh‖∞`.
    pub left_residual: f64,
    pub right_residual: f64,
    /// Absorption CDF from the origin singleton on `time_grid`.
    pub time_grid: Vec<f64>,
    pub absorption_cdf: Vec<f64>,
}

/// Full spectral summary via shifted power iteration and a
/// scaling-and-squaring matrix exponential for the absorption law.
pub fn spectral_summary(chain: &FiniteChain, time_grid: &[f64]) -> Result<SpectralSummary> {
    let (alpha, nu, h, left_res, right_res) = principal_pair(chain)?;
    let mut qsd = BTreeMap::new();
    let mut h_map = BTreeMap::new();
    for i in 0..chain.dim() {
        let class = chain.class_of_index(i);
        *qsd.entry(class.clone()).or_insert(0.0) += nu[i];
        // h is constant on rotation classes; keep one representative value.
        h_map.entry(class).or_insert(h[i]);
    }
    let mut cdf = Vec::with_capacity(time_grid.len());
    for &t in time_grid {
        if t < 0.0 {
            return Err(Error::InvalidParameter("negative time in grid".into()));
        }
        let p = matrix_exponential(&chain.q, chain.dim(), t);
        // Survival = row sum from the origin singleton.
        let row = chain.origin_index();
        let survive: f64 = (0..chain.dim()).map(|j| p[row * chain.dim() + j]).sum();
        cdf.push((1.0 - survive).clamp(0.0, 1.0));
    }
    Ok(SpectralSummary {
        n: chain.n,
        lambda: chain.lambda,
        alpha,
        qsd,
        h: h_map,
        left_residual: left_res,
        right_residual: right_res,
        time_grid: time_grid.to_vec(),
        absorption_cdf: cdf,
    })
}

/// Shifted power iteration for the principal eigen-triple of `Q`.
/// `Q + cI` is nonnegative for `c` past the largest exit rate, so its
/// dominant eigenvector pair is the principal pair of `Q`.
fn principal_pair(chain: &FiniteChain) -> Result<(f64, Vec<f64>, Vec<f64>, f64, f64)> {
    let dim = chain.dim();
    let q = &chain.q;
    let c = 1.0
        + (0..dim)
            .map(|i| -q[i * dim + i])
            .fold(0.0f64, f64::max);
    let mut nu = vec![1.0 / dim as f64; dim];
    let mut h = vec![1.0; dim];
    let tol = 1e-13;
    let max_iter = 200_000;
    let mut converged = false;
    for _ in 0..max_iter {
        // nu ← nu (Q + cI), normalized to unit mass.
        let mut nu_next = vec![0.0; dim];
        for i in 0..dim {
            let w = nu[i];
            if w == 0.0 {
                continue;
            }
            let row = &q[i * dim..(i + 1) * dim];
            for (j, &qij) in row.iter().enumerate() {
                nu_next[j] += w * qij;
            }
            nu_next[i] += w * c;
        }
        let mass: f64 = nu_next.iter().sum();
        for v in &mut nu_next {
            *v /= mass;
        }
        // h ← (Q + cI) h, sup-normalized.
        let mut h_next = vec![0.0; dim];
        for i in 0..dim {
            let row = &q[i * dim..(i + 1) * dim];
            let mut acc = c * h[i];
            for (j, &qij) in row.iter().enumerate() {
                acc += qij * h[j];
            }
            h_next[i] = acc;
        }
        let sup = h_next.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for v in &mut h_next {
            *v /= sup;
        }
        let delta: f64 = nu_next
            .iter()
            .zip(&nu)
            .map(|(a, b)| (a - b).abs())
            .chain(h_next.iter().zip(&h).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        nu = nu_next;
        h = h_next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    // Rayleigh quotient for the eigenvalue: alpha = -(nu Q 1)/(nu 1).
    let mut nu_q = vec![0.0; dim];
    for i in 0..dim {
        let w = nu[i];
        let row = &q[i * dim..(i + 1) * dim];
        for (j, &qij) in row.iter().enumerate() {
            nu_q[j] += w * qij;
        }
    }
    let alpha = -nu_q.iter().sum::<f64>();
    // Normalize h by ν·h = 1.
    let inner: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
    for v in &mut h {
        *v /= inner;
    }
    let left_res = nu_q
        .iter()
        .zip(&nu)
        .map(|(x, v)| (x + alpha * v).abs())
        .fold(0.0f64, f64::max);
    let mut right_res = 0.0f64;
    for i in 0..dim {
        let row = &q[i * dim..(i + 1) * dim];
        let qh: f64 = row.iter().zip(&h).map(|(a, b)| a * b).sum();
        right_res = right_res.max((qh + alpha * h[i]).abs());
    }
    if !converged || left_res > 1e-10 || right_res > 1e-10 {
        return Err(Error::Numeric(format!(
            "power iteration residuals ({left_res:.3e}, {right_res:.3e}) above 1e-10"
        )));
    }
    Ok((alpha, nu, h, left_res, right_res))
}

/// `e^{Qt}` by scaling and squaring with a Taylor core.
pub fn matrix_exponential(q: &[f64], dim: usize, t: f64) -> Vec<f64> {
    let norm: f64 = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (q[i * dim + j] * t).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = t / (1u64 << s) as f64;
    // Taylor series on the scaled matrix.
    let mut result = identity(dim);
    let mut term = identity(dim);
    for k in 1..=30 {
        term = mat_mul_scaled(&term, q, dim, scale / k as f64);
        let mut max_term = 0.0f64;
        for (r, &v) in result.iter_mut().zip(&term) {
            *r += v;
            max_term = max_term.max(v.abs());
        }
        if max_term < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = mat_mul(&result, &result, dim);
    }
    result
}

fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * dim..(k + 1) * dim];
            let orow = &mut out[i * dim..(i + 1) * dim];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

fn mat_mul_scaled(a: &[f64], b: &[f64], dim: usize, scale: f64) -> Vec<f64> {
    let mut out = mat_mul(a, b, dim);
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// Absorption-time CDF evaluator from the origin singleton, by
/// uniformization: `P(τ ≤ t) = 1 - Σ_k pois(k; Λt) · (P^k 1)[o]` with
/// `P = I + Q/Λ`. Exact to truncation error; cheap at many time points.
/// An independent route from the matrix exponential (cross-checked in
/// tests and used for the summary grid).
#[derive(Clone, Debug)]
pub struct AbsorptionCdf {
    rate: f64,
    /// `v_k[o] = (P^k 1)(origin)` for k = 0, 1, 2, ...
    survive_weights: Vec<f64>,
}

impl AbsorptionCdf {
    pub fn new(chain: &FiniteChain, t_max: f64) -> Self {
        let dim = chain.dim();
        let rate = 1.0
            + (0..dim)
                .map(|i| -chain.q[i * dim + i])
                .fold(0.0f64, f64::max);
        // P v computed iteratively; keep only the origin coordinate.
        let k_max = (rate * t_max + 12.0 * (rate * t_max).sqrt() + 50.0) as usize;
        let mut v = vec![1.0; dim];
        let mut weights = Vec::with_capacity(k_max + 1);
        let row = chain.origin_index();
        weights.push(v[row]);
        for _ in 0..k_max {
            let mut next = vec![0.0; dim];
            for i in 0..dim {
                let qrow = &chain.q[i * dim..(i + 1) * dim];
                let mut acc = v[i];
                for (j, &qij) in qrow.iter().enumerate() {
                    acc += qij * v[j] / rate;
                }
                next[i] = acc;
            }
            v = next;
            weights.push(v[row]);
        }
        AbsorptionCdf {
            rate,
            survive_weights: weights,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mu = self.rate * t;
        // Poisson weights around the mode, expanded outward for stability.
        let mode = mu.floor().min((self.survive_weights.len() - 1) as f64) as usize;
        let ln_pmf_mode = mode as f64 * mu.ln() - mu - crate::stats::ln_gamma(mode as f64 + 1.0);
        let pmf_mode = ln_pmf_mode.exp();
        let mut survive = pmf_mode * self.survive_weights[mode];
        let mut pmf = pmf_mode;
        let mut k = mode;
        while k + 1 < self.survive_weights.len() {
            k += 1;
            pmf *= mu / k as f64;
            survive += pmf * self.survive_weights[k];
            if pmf < 1e-16 * pmf_mode {
                break;
            }
        }
        pmf = pmf_mode;
        k = mode;
        while k > 0 {
            pmf *= k as f64 / mu;
            k -= 1;
            survive += pmf * self.survive_weights[k];
            if pmf < 1e-16 * pmf_mode {
                break;
            }
        }
        (1.0 - survive).clamp(0.0, 1.0)
    }
}

/// Rotation-quotient generator: states are rotation classes, rates are
/// summed over the members of the destination class. Consistency with the
/// full chain (equal decay rate, projected QSD) is a test invariant.
pub fn quotient_generator(chain: &FiniteChain) -> (Vec<CanonicalConfig>, Vec<f64>) {
    let dim = chain.dim();
    let mut class_of = vec![0usize; dim];
    let mut classes: Vec<CanonicalConfig> = Vec::new();
    let mut index: BTreeMap<CanonicalConfig, usize> = BTreeMap::new();
    let mut rep_of_class: Vec<usize> = Vec::new();
    for i in 0..dim {
        let class = chain.class_of_index(i);
        let entry = index.entry(class.clone()).or_insert_with(|| {
            classes.push(class);
            rep_of_class.push(i);
            classes.len() - 1
        });
        class_of[i] = *entry;
    }
    let c = classes.len();
    let mut qq = vec![0.0; c * c];
    for (ci, &rep) in rep_of_class.iter().enumerate() {
        for j in 0..dim {
            qq[ci * c + class_of[j]] += chain.q(rep, j);
        }
    }
    (classes, qq)
}

/// Decay rate of an arbitrary dense sub-generator by the same shifted
/// power iteration (left vector only).
pub fn generator_decay_rate(q: &[f64], dim: usize) -> Result<f64> {
    let c = 1.0 + (0..dim).map(|i| -q[i * dim + i]).fold(0.0f64, f64::max);
    let mut nu = vec![1.0 / dim as f64; dim];
    for _ in 0..200_000 {
        let mut next = vec![0.0; dim];
        for i in 0..dim {
            let w = nu[i];
            if w == 0.0 {
                continue;
            }
            let row = &q[i * dim..(i + 1) * dim];
            for (j, &qij) in row.iter().enumerate() {
                next[j] += w * qij;
            }
            next[i] += w * c;
        }
        let mass: f64 = next.iter().sum();
        for v in &mut next {
            *v /= mass;
        }
        let delta: f64 = next
            .iter()
            .zip(&nu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        nu = next;
        if delta < 1e-14 {
            break;
        }
    }
    let mut nu_q = vec![0.0; dim];
    for i in 0..dim {
        let w = nu[i];
        let row = &q[i * dim..(i + 1) * dim];
        for (j, &qij) in row.iter().enumerate() {
            nu_q[j] += w * qij;
        }
    }
    Ok(-nu_q.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ring_generator_rows() {
        // State {0} on a 2-ring: heal to ∅ at rate 1 (leak), infect the
        // other site at rate 2λ (both directed edges coincide).
        let chain = build_chain(2, 0.7).unwrap();
        // Masks: 1 = {0}, 2 = {1}, 3 = {0,1}; indices 0, 1, 2.
        assert_eq!(chain.q(0, 0), -(1.0 + 1.4));
        assert_eq!(chain.q(0, 2), 1.4);
        assert_eq!(chain.q(0, 1), 0.0);
        // Full state: only healing.
        assert_eq!(chain.q(2, 0), 1.0);
        assert_eq!(chain.q(2, 1), 1.0);
        assert_eq!(chain.q(2, 2), -2.0);
        // Off-diagonals nonnegative, row sums ≤ 0.
        for i in 0..chain.dim() {
            let mut row_sum = 0.0;
            for j in 0..chain.dim() {
                if i != j {
                    assert!(chain.q(i, j) >= 0.0);
                }
                row_sum += chain.q(i, j);
            }
            assert!(row_sum <= 1e-12);
        }
        assert!(build_chain(1, 1.0).is_err());
        assert!(build_chain(13, 1.0).is_err());
    }

    #[test]
    fn pure_death_chain_spectrum() {
        // λ = 0: every site dies independently; slowest decay comes from
        // singleton states at rate 1, and the QSD sits on singletons.
        let chain = build_chain(2, 0.0).unwrap();
        let summary = spectral_summary(&chain, &[1.0]).unwrap();
        assert!((summary.alpha - 1.0).abs() < 1e-9, "alpha {}", summary.alpha);
        let singleton = chain.class_of_index(0);
        assert!((summary.qsd[&singleton] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigen_residuals_meet_tolerance() {
        let chain = build_chain(6, 0.5).unwrap();
        let summary = spectral_summary(&chain, &[]).unwrap();
        assert!(summary.left_residual < 1e-10);
        assert!(summary.right_residual < 1e-10);
        assert!(summary.alpha > 0.0);
        let mass: f64 = summary.qsd.values().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(summary.qsd.values().all(|&p| p >= 0.0));
    }

    #[test]
    fn quotient_chain_has_same_decay_rate() {
        let chain = build_chain(6, 0.5).unwrap();
        let summary = spectral_summary(&chain, &[]).unwrap();
        let (classes, qq) = quotient_generator(&chain);
        let alpha_q = generator_decay_rate(&qq, classes.len()).unwrap();
        assert!(
            (alpha_q - summary.alpha).abs() < 1e-9,
            "full {} vs quotient {}",
            summary.alpha,
            alpha_q
        );
        assert!(classes.len() < chain.dim());
    }

    #[test]
    fn qsd_is_stationary_under_conditioning() {
        // ν e^{Qs} renormalized returns ν, for several s.
        let chain = build_chain(5, 0.6).unwrap();
        let (_, nu, _, _, _) = principal_pair(&chain).unwrap();
        for &s in &[0.5, 1.0, 2.0] {
            let p = matrix_exponential(&chain.q, chain.dim(), s);
            let mut evolved = vec![0.0; chain.dim()];
            for i in 0..chain.dim() {
                for j in 0..chain.dim() {
                    evolved[j] += nu[i] * p[i * chain.dim() + j];
                }
            }
            let mass: f64 = evolved.iter().sum();
            for (e, &v) in evolved.iter().zip(&nu) {
                assert!(
                    (e / mass - v).abs() < 1e-8,
                    "stationarity violated at s={s}"
                );
            }
        }
    }

    #[test]
    fn matrix_exponential_against_uniformization() {
        let chain = build_chain(5, 0.45).unwrap();
        let cdf = AbsorptionCdf::new(&chain, 12.0);
        let summary = spectral_summary(&chain, &[0.5, 1.0, 3.0, 7.0, 12.0]).unwrap();
        for (&t, &f) in summary.time_grid.iter().zip(&summary.absorption_cdf) {
            assert!(
                (cdf.eval(t) - f).abs() < 1e-10,
                "mismatch at t={t}: {} vs {f}",
                cdf.eval(t)
            );
        }
        // CDF is monotone and starts at 0.
        assert_eq!(cdf.eval(0.0), 0.0);
        let mut prev = 0.0;
        for i in 0..=120 {
            let v = cdf.eval(i as f64 * 0.1);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn decay_rate_matches_survival_slope() {
        // For large t, -log P(survival) / t approaches alpha.
        let chain = build_chain(6, 0.5).unwrap();
        let summary = spectral_summary(&chain, &[30.0, 40.0]).unwrap();
        let s30 = 1.0 - summary.absorption_cdf[0];
        let s40 = 1.0 - summary.absorption_cdf[1];
        let slope = (s30.ln() - s40.ln()) / 10.0;
        assert!(
            (slope - summary.alpha).abs() < 1e-6,
            "slope {slope} vs alpha {}",
            summary.alpha
        );
    }
}
