//! Monte Carlo estimators: survival curves and the decay rate, the
//! survival prefactor, conditioned configuration laws, mean cluster size,
//! and the intensity constant linking them, with confidence intervals.
//!
//! Replica runs are embarrassingly parallel; results are collected in
//! replica order and reduced sequentially, so every estimate is a
//! deterministic function of `(seed, parameters, replica count)`
//! regardless of thread scheduling. Replicas whose infection touches the
//! window boundary are excluded from estimates and reported as a
//! contamination rate.

use crate::lattice::Window;
use crate::process::{
    canonical_form_in, simulate_lazy, simulate_lazy_opts, Absorption, Configuration, LazyOptions,
};
use crate::stats::{wilson_ci, EmpiricalLaw};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// A point estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.se, self.value + z * self.se)
    }

    /// |a - b| within `z` joint standard errors.
    pub fn agrees_with(&self, other: &Estimate, z: f64) -> bool {
        let joint = (self.se * self.se + other.se * other.se).sqrt();
        (self.value - other.value).abs() <= z * joint
    }
}

/// Final configuration of one replica.
#[derive(Clone, Debug)]
pub struct FinalState {
    pub replica: u64,
    pub config: Configuration,
    pub contaminated: bool,
}

/// Absorption outcome of one replica.
#[derive(Clone, Debug)]
pub struct AbsorptionSample {
    pub replica: u64,
    pub absorption: Absorption,
    pub contaminated: bool,
}

/// Simulate final configurations at time `t` for a replica range.
///
/// `obs_radius` selects the contamination semantics: `None` flags the
/// infection cloud touching the window shell (finite interior starts),
/// `Some(r)` flags inbound boundary influence reaching the centered ball
/// of radius `r` (full-occupancy starts).
pub fn sample_final_states(
    window: &Window,
    lambda: f64,
    t: f64,
    seed: u64,
    replicas: Range<u64>,
    initial: &Configuration,
    obs_radius: Option<i32>,
) -> Result<Vec<FinalState>> {
    let opts = LazyOptions {
        inbound_radius: obs_radius,
    };
    replicas
        .into_par_iter()
        .map(|r| {
            let out = simulate_lazy_opts(window, lambda, t, seed, r, initial, opts)?;
            Ok(FinalState {
                replica: r,
                config: out.config(window),
                contaminated: out.contaminated(),
            })
        })
        .collect()
}

/// Simulate absorption times up to `horizon` for a replica range.
pub fn sample_absorptions(
    window: &Window,
    lambda: f64,
    horizon: f64,
    seed: u64,
    replicas: Range<u64>,
    initial: &Configuration,
) -> Result<Vec<AbsorptionSample>> {
    replicas
        .into_par_iter()
        .map(|r| {
            let out = simulate_lazy(window, lambda, horizon, seed, r, initial)?;
            Ok(AbsorptionSample {
                replica: r,
                absorption: out.absorption(),
                contaminated: out.touched_boundary,
            })
        })
        .collect()
}

/// Empirical survival probabilities on a time grid with Wilson intervals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub surviving: Vec<u64>,
    /// Uncontaminated replicas entering the estimates.
    pub replicas: u64,
    pub contaminated_rate: f64,
    pub initial: String,
}

pub fn survival_curve_from(
    samples: &[AbsorptionSample],
    time_grid: &[f64],
    initial: &str,
) -> Result<SurvivalCurve> {
    let total = samples.len() as u64;
    if total == 0 {
        return Err(Error::InsufficientData("no replicas simulated".into()));
    }
    let clean: Vec<&AbsorptionSample> = samples.iter().filter(|s| !s.contaminated).collect();
    let n = clean.len() as u64;
    if n == 0 {
        return Err(Error::InsufficientData(
            "every replica was boundary-contaminated".into(),
        ));
    }
    let mut times = time_grid.to_vec();
    times.sort_by(f64::total_cmp);
    let mut survival = Vec::with_capacity(times.len());
    let mut ci_lo = Vec::with_capacity(times.len());
    let mut ci_hi = Vec::with_capacity(times.len());
    let mut surviving = Vec::with_capacity(times.len());
    for &t in &times {
        let alive = clean
            .iter()
            .filter(|s| s.absorption.survived_past(t))
            .count() as u64;
        let (lo, hi) = wilson_ci(alive, n, 1.96);
        survival.push(alive as f64 / n as f64);
        ci_lo.push(lo);
        ci_hi.push(hi);
        surviving.push(alive);
    }
    Ok(SurvivalCurve {
        times,
        survival,
        ci_lo,
        ci_hi,
        surviving,
        replicas: n,
        contaminated_rate: 1.0 - n as f64 / total as f64,
        initial: initial.into(),
    })
}

/// Simulate and tabulate a survival curve in one call.
#[allow(clippy::too_many_arguments)]
pub fn survival_curve(
    window: &Window,
    lambda: f64,
    seed: u64,
    replicas: Range<u64>,
    initial: &Configuration,
    initial_label: &str,
    time_grid: &[f64],
) -> Result<SurvivalCurve> {
    let horizon = time_grid.iter().fold(0.0f64, |m, &t| m.max(t));
    let samples = sample_absorptions(window, lambda, horizon, seed, replicas, initial)?;
    survival_curve_from(&samples, time_grid, initial_label)
}

/// Options for the tail-window weighted fit of the decay rate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AlphaFitOptions {
    /// Tail starts at the first grid point with survival below this.
    pub start_below: f64,
    /// Tail ends at the last grid point with at least this many survivors.
    pub min_tail_survivors: u64,
}

impl Default for AlphaFitOptions {
    fn default() -> Self {
        AlphaFitOptions {
            start_below: 0.5,
            min_tail_survivors: 100,
        }
    }
}

/// Result of the log-survival slope fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: Estimate,
    pub intercept: f64,
    pub r2: f64,
    /// Grid index range `[start, end)` used by the fit.
    pub window_indices: (usize, usize),
}

/// Weighted least squares of `ln p̂(t)` against `t` on the tail window;
/// the early transient is dropped because the prefactor biases early
/// slopes. Weights are the inverse variances of `ln p̂`.
pub fn estimate_alpha(curve: &SurvivalCurve, opts: AlphaFitOptions) -> Result<AlphaFit> {
    let start = curve
        .survival
        .iter()
        .position(|&p| p < opts.start_below)
        .ok_or_else(|| {
            Error::InsufficientData("survival never dropped below the fit threshold".into())
        })?;
    let mut end = start;
    for i in start..curve.times.len() {
        if curve.surviving[i] >= opts.min_tail_survivors {
            end = i + 1;
        } else {
            break;
        }
    }
    if end - start < 3 {
        return Err(Error::InsufficientData(format!(
            "alpha fit needs ≥ 3 tail points with ≥ {} survivors, found {}",
            opts.min_tail_survivors,
            end - start
        )));
    }
    let n = curve.replicas as f64;
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    for i in start..end {
        let p = curve.survival[i];
        let w = n * p / (1.0 - p).max(1e-12);
        sw += w;
        swx += w * curve.times[i];
        swy += w * p.ln();
    }
    let xbar = swx / sw;
    let ybar = swy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut ss_tot = 0.0;
    for i in start..end {
        let p = curve.survival[i];
        let w = n * p / (1.0 - p).max(1e-12);
        let dx = curve.times[i] - xbar;
        let dy = p.ln() - ybar;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        ss_tot += w * dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate fit window".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = 0.0;
    for i in start..end {
        let p = curve.survival[i];
        let w = n * p / (1.0 - p).max(1e-12);
        let fitted = intercept + slope * curve.times[i];
        ss_res += w * (p.ln() - fitted) * (p.ln() - fitted);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(AlphaFit {
        alpha: Estimate::new(-slope, (1.0 / sxx).sqrt()),
        intercept,
        r2,
        window_indices: (start, end),
    })
}

/// Tail-averaged `e^{α̂t}·p̂(t)` over the fit window. The grid points share
/// replicas, so their errors are treated as fully correlated (standard
/// errors averaged, not shrunk).
pub fn estimate_h(curve: &SurvivalCurve, alpha: &AlphaFit) -> Result<Estimate> {
    let (start, end) = alpha.window_indices;
    if end <= start {
        return Err(Error::InsufficientData("empty prefactor window".into()));
    }
    let n = curve.replicas as f64;
    let mut sum = 0.0;
    let mut sum_se = 0.0;
    for i in start..end {
        let p = curve.survival[i];
        let t = curve.times[i];
        let h = (alpha.alpha.value * t).exp() * p;
        let var_p = p * (1.0 - p) / n;
        let se = ((alpha.alpha.value * t).exp().powi(2) * var_p
            + (t * h * alpha.alpha.se).powi(2))
        .sqrt();
        sum += h;
        sum_se += se;
    }
    let k = (end - start) as f64;
    Ok(Estimate::new(sum / k, sum_se / k))
}

/// Outcome of a conditioned final-configuration study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionedLaw {
    pub law: EmpiricalLaw,
    /// Conditional mean number of infected sites (no width pooling).
    pub mean_size: Estimate,
    /// Probability of the conditioning event among clean replicas.
    pub p_event: Estimate,
    pub surviving: u64,
    pub contaminated_rate: f64,
}

/// Law of the canonical final configuration conditioned on survival.
pub fn yaglom_law_from(
    window: &Window,
    states: &[FinalState],
    width_cap: i32,
    conditioning: &str,
) -> Result<ConditionedLaw> {
    conditioned_law(window, states, None, width_cap, conditioning)
}

/// Law of the canonical configuration inside the centered ball of radius
/// `box_radius`, conditioned on that intersection being non-empty.
pub fn conditioned_box_law_from(
    window: &Window,
    states: &[FinalState],
    box_radius: i32,
    width_cap: i32,
) -> Result<ConditionedLaw> {
    conditioned_law(
        window,
        states,
        Some(box_radius),
        width_cap,
        &format!("intersection with centered ball of radius {box_radius}, non-empty"),
    )
}

fn conditioned_law(
    window: &Window,
    states: &[FinalState],
    box_radius: Option<i32>,
    width_cap: i32,
    conditioning: &str,
) -> Result<ConditionedLaw> {
    let total = states.len() as u64;
    if total == 0 {
        return Err(Error::InsufficientData("no replicas simulated".into()));
    }
    let center = crate::lattice::Site::origin(window.dim());
    let mut observations = Vec::new();
    let mut sizes = Vec::new();
    let mut clean = 0u64;
    for s in states {
        if s.contaminated {
            continue;
        }
        clean += 1;
        let restricted = match box_radius {
            Some(r) => s.config.intersect_ball(&center, r),
            None => s.config.clone(),
        };
        if restricted.is_empty() {
            continue;
        }
        sizes.push(restricted.len() as f64);
        observations.push(canonical_form_in(window, &restricted));
    }
    if clean == 0 {
        return Err(Error::InsufficientData(
            "every replica was boundary-contaminated".into(),
        ));
    }
    if observations.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no replica satisfied the conditioning ({conditioning})"
        )));
    }
    let law = EmpiricalLaw::from_observations(&observations, width_cap, conditioning)?;
    let k = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / k;
    let var = if sizes.len() > 1 {
        sizes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let p = k / clean as f64;
    Ok(ConditionedLaw {
        law,
        mean_size: Estimate::new(mean, (var / k).sqrt()),
        p_event: Estimate::new(p, (p * (1.0 - p) / clean as f64).sqrt()),
        surviving: sizes.len() as u64,
        contaminated_rate: 1.0 - clean as f64 / total as f64,
    })
}

/// `ρ̂ = ĥ / Ê|ζ|` with first-order error propagation.
pub fn estimate_rho(h0: &Estimate, mean_size: &Estimate) -> Estimate {
    let rho = h0.value / mean_size.value;
    let se = rho
        * ((h0.se / h0.value).powi(2) + (mean_size.se / mean_size.value).powi(2)).sqrt();
    Estimate::new(rho, se)
}

/// Direct intensity estimate `ρ̃ = P(box hit) / (e^{-α̂t}·|box|)`.
pub fn rho_direct(p_event: &Estimate, alpha: &Estimate, t: f64, box_cardinality: u64) -> Estimate {
    let denom = (-alpha.value * t).exp() * box_cardinality as f64;
    let rho = p_event.value / denom;
    let rel = ((p_event.se / p_event.value).powi(2) + (t * alpha.se).powi(2)).sqrt();
    Estimate::new(rho, rho * rel)
}

/// Bundle of the headline estimates produced by the box-law experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorOutputs {
    pub alpha: Estimate,
    pub h0: Estimate,
    pub mean_size: Estimate,
    pub rho: Estimate,
    pub rho_direct: Estimate,
    pub fit_r2: f64,
    pub contamination_rate: f64,
}

/// Two-sided comparison of occupancy and survival probabilities at equal
/// time: `P(o ∈ η_t from full occupancy) = P(η_t^o ≠ ∅)`. The two sides
/// use disjoint replica indices, hence independent randomness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityReport {
    pub t: f64,
    pub p_occupied: Estimate,
    pub p_survival: Estimate,
    pub diff: f64,
    pub z: f64,
    pub passed: bool,
    pub contaminated_rate: f64,
}

pub fn duality_check(
    window: &Window,
    lambda: f64,
    t: f64,
    seed: u64,
    replicas: u64,
) -> Result<DualityReport> {
    let origin = crate::lattice::Site::origin(window.dim());
    let full = Configuration::full(window);
    let single = Configuration::singleton(origin.clone());

    let occupied_states =
        sample_final_states(window, lambda, t, seed, 0..replicas, &full, Some(0))?;
    let survival_samples =
        sample_absorptions(window, lambda, t, seed, replicas..2 * replicas, &single)?;

    let clean_occ: Vec<_> = occupied_states.iter().filter(|s| !s.contaminated).collect();
    let clean_sur: Vec<_> = survival_samples
        .iter()
        .filter(|s| !s.contaminated)
        .collect();
    if clean_occ.is_empty() || clean_sur.is_empty() {
        return Err(Error::InsufficientData(
            "all replicas contaminated in duality check".into(),
        ));
    }
    let n1 = clean_occ.len() as f64;
    let n2 = clean_sur.len() as f64;
    let k1 = clean_occ
        .iter()
        .filter(|s| s.config.contains(&origin))
        .count() as f64;
    let k2 = clean_sur
        .iter()
        .filter(|s| s.absorption.survived_past(t - 1e-12))
        .count() as f64;
    let p1 = k1 / n1;
    let p2 = k2 / n2;
    let se1 = (p1 * (1.0 - p1) / n1).sqrt();
    let se2 = (p2 * (1.0 - p2) / n2).sqrt();
    let joint = (se1 * se1 + se2 * se2).sqrt();
    let diff = p1 - p2;
    let z = if joint > 0.0 { diff / joint } else { 0.0 };
    let total = (occupied_states.len() + survival_samples.len()) as f64;
    let clean_total = n1 + n2;
    Ok(DualityReport {
        t,
        p_occupied: Estimate::new(p1, se1),
        p_survival: Estimate::new(p2, se2),
        diff,
        z,
        passed: diff.abs() <= 3.0 * joint,
        contaminated_rate: 1.0 - clean_total / total,
    })
}

/// Build an evenly spaced time grid `step, 2·step, …` up to `t_max`.
pub fn uniform_grid(step: f64, t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = step;
    while t <= t_max + 1e-9 {
        out.push(t);
        t += step;
    }
    out
}
