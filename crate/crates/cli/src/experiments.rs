//! Experiment implementations: each takes a validated config, runs its
//! simulation phases, and produces a [`ResultsDoc`] plus CSV artifacts.

use crate::config::{ExperimentConfig, ExperimentParams, InitialSpec, MarkClassSpec};
use crate::results::{write_csv, write_lines, Diagnostics, ResultsDoc};
use cpsim_core::clusters::{box_statistics, extract_clusters, marked_measure, MesoGrid, Norm};
use cpsim_core::estimators::{
    self, conditioned_box_law_from, estimate_alpha, estimate_h, estimate_rho, rho_direct,
    sample_absorptions, sample_final_states, survival_curve_from, AlphaFit, AlphaFitOptions,
    Estimate, SurvivalCurve,
};
use cpsim_core::lattice::{Site, Window};
use cpsim_core::oracle::{build_chain, spectral_summary, AbsorptionCdf};
use cpsim_core::process::{ring_canonical_form, Absorption, CanonicalConfig, Configuration};
use cpsim_core::stats::{ks_test, poisson_suite, tv_distance, EmpiricalLaw, TestReport};
use cpsim_core::{Error, Result};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeSet;
use std::path::Path;

pub struct RunOutcome {
    pub doc: ResultsDoc,
    pub artifacts: Vec<std::path::PathBuf>,
}

/// Dispatch a full experiment run and write all artifacts. `out_dir`
/// overrides the config's output directory (the config echo embedded in
/// the results document is unaffected, so artifacts stay byte-identical
/// wherever they are written).
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let dir = out_dir
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| std::path::PathBuf::from(&cfg.output.dir));
    let (estimates, tests, diagnostics, mut artifacts) = match &cfg.params {
        ExperimentParams::Survival { .. } => run_survival(cfg, &dir)?,
        ExperimentParams::Yaglom { .. } => run_yaglom(cfg, &dir)?,
        ExperimentParams::BoxLaw { .. } => run_boxlaw(cfg, &dir)?,
        ExperimentParams::Duality { .. } => run_duality(cfg)?,
        ExperimentParams::Poisson { .. } => run_poisson(cfg, &dir)?,
        ExperimentParams::Clusters { .. } => run_clusters(cfg, &dir)?,
        ExperimentParams::GoodPoints { .. } => run_goodpoints(cfg)?,
        ExperimentParams::OracleCheck { .. } => run_oracle_check(cfg)?,
    };
    let doc = ResultsDoc {
        experiment: cfg.params.kind().into(),
        seed: cfg.seed,
        generated_at: cfg.output.stamp.then(timestamp),
        config: cfg.serialize(),
        estimates,
        tests,
        diagnostics,
    };
    artifacts.push(doc.write(&dir)?);
    Ok(RunOutcome { doc, artifacts })
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{now}")
}

fn initial_config(window: &Window, spec: &InitialSpec) -> Configuration {
    let origin = Site::origin(window.dim());
    match spec {
        InitialSpec::Origin => Configuration::singleton(origin),
        InitialSpec::Ball(r) => Configuration::new(
            window
                .ball_indices(&origin, *r)
                .into_iter()
                .map(|i| window.site_at(i))
                .collect(),
        ),
        InitialSpec::Full => Configuration::full(window),
    }
}

fn law_to_json(law: &EmpiricalLaw) -> serde_json::Value {
    serde_json::to_value(law).expect("law serializes")
}

type Phase = (serde_json::Value, Vec<TestReport>, Diagnostics, Vec<std::path::PathBuf>);

// ---------------------------------------------------------------------------
// survival
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HTarget {
    initial: String,
    alpha: Estimate,
    h: Estimate,
    r2: f64,
}

fn run_survival(cfg: &ExperimentConfig, dir: &Path) -> Result<Phase> {
    let ExperimentParams::Survival {
        initial,
        times,
        replicas,
        fit_start_below,
        fit_min_survivors,
        h_targets,
    } = &cfg.params
    else {
        unreachable!()
    };
    let window = cfg.sim.window()?;
    let fit_opts = AlphaFitOptions {
        start_below: *fit_start_below,
        min_tail_survivors: *fit_min_survivors,
    };
    let run_one = |spec: &InitialSpec| -> Result<(SurvivalCurve, AlphaFit, Estimate)> {
        let init = initial_config(&window, spec);
        let horizon = times.iter().fold(0.0f64, |m, &t| m.max(t));
        let samples = sample_absorptions(
            &window,
            cfg.sim.lambda,
            horizon,
            cfg.seed,
            0..*replicas,
            &init,
        )?;
        let curve = survival_curve_from(&samples, times, &spec.text())?;
        let fit = estimate_alpha(&curve, fit_opts)?;
        let h = estimate_h(&curve, &fit)?;
        Ok((curve, fit, h))
    };

    let (curve, fit, h) = run_one(initial)?;
    let mut tests = Vec::new();
    let mut targets = Vec::new();
    for spec in h_targets {
        let (_, t_fit, t_h) = run_one(spec)?;
        targets.push(HTarget {
            initial: spec.text(),
            alpha: t_fit.alpha,
            h: t_h,
            r2: t_fit.r2,
        });
    }
    // Common decay rate across initial conditions (same replica streams,
    // so the coupling keeps the comparison tight).
    for t in &targets {
        let agrees = fit.alpha.agrees_with(&t.alpha, 3.0);
        tests.push(TestReport {
            name: format!("decay-rate equality: {} vs {}", initial.text(), t.initial),
            statistic: (fit.alpha.value - t.alpha.value).abs(),
            p_value: None,
            passed: agrees,
            level: 0.0,
            sample_size: *replicas,
            notes: Default::default(),
        });
    }
    // Survival prefactor grows with the initial set.
    for t in &targets {
        if matches!(initial, InitialSpec::Origin) && t.initial.starts_with("ball") {
            tests.push(TestReport {
                name: format!("prefactor monotone: h({}) ≥ h(origin)", t.initial),
                statistic: t.h.value - h.value,
                p_value: None,
                passed: t.h.value >= h.value,
                level: 0.0,
                sample_size: *replicas,
                notes: Default::default(),
            });
        }
    }

    let rows: Vec<String> = (0..curve.times.len())
        .map(|i| {
            format!(
                "{},{},{},{},{}",
                curve.times[i],
                curve.survival[i],
                curve.ci_lo[i],
                curve.ci_hi[i],
                curve.surviving[i]
            )
        })
        .collect();
    let csv = write_csv(dir, "survival.csv", "t,p_hat,ci_lo,ci_hi,n_surviving", &rows)?;

    let contamination = curve.contaminated_rate;
    let estimates = json!({
        "alpha": fit.alpha,
        "h": h,
        "fit_r2": fit.r2,
        "fit_window": fit.window_indices,
        "curve": serde_json::to_value(&curve)?,
        "h_targets": serde_json::to_value(&targets)?,
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contamination,
            notes: vec![],
        },
        vec![csv],
    ))
}

// ---------------------------------------------------------------------------
// yaglom
// ---------------------------------------------------------------------------

fn run_yaglom(cfg: &ExperimentConfig, dir: &Path) -> Result<Phase> {
    let ExperimentParams::Yaglom {
        t_values,
        replicas,
        width_cap,
    } = &cfg.params
    else {
        unreachable!()
    };
    let window = cfg.sim.window()?;
    let origin = Configuration::singleton(Site::origin(window.dim()));
    let mut laws = Vec::new();
    let mut contamination: f64 = 0.0;
    let mut raw_paths = Vec::new();
    for (i, &t) in t_values.iter().enumerate() {
        let n = replicas[i.min(replicas.len() - 1)];
        let states = sample_final_states(
            &window,
            cfg.sim.lambda,
            t,
            cfg.seed.wrapping_add(i as u64),
            0..n,
            &origin,
            None,
        )?;
        if cfg.output.keep_raw {
            let mut lines = Vec::new();
            for s in &states {
                lines.push(serde_json::to_string(&json!({
                    "replica": s.replica,
                    "config": s.config,
                    "contaminated": s.contaminated,
                }))?);
            }
            raw_paths.push(write_lines(dir, &format!("raw_t{t}.jsonl"), &lines)?);
        }
        let out = estimators::yaglom_law_from(&window, &states, *width_cap, &format!("t={t}"))?;
        contamination = contamination.max(out.contaminated_rate);
        laws.push((t, out));
    }
    // Self-consistency: total variation between consecutive laws shrinks.
    let mut tests = Vec::new();
    let mut tv_rows = Vec::new();
    let mut tvs = Vec::new();
    for pair in laws.windows(2) {
        let tv = tv_distance(&pair[0].1.law, &pair[1].1.law)?;
        tvs.push(((pair[0].0, pair[1].0), tv));
        tv_rows.push(format!("{},{}", pair[1].0, tv));
    }
    if tvs.len() >= 2 {
        let decreasing = tvs.windows(2).all(|w| w[1].1 <= w[0].1);
        tests.push(TestReport {
            name: "law convergence: TV decreasing along the time ladder".into(),
            statistic: tvs.last().unwrap().1,
            p_value: None,
            passed: decreasing,
            level: 0.0,
            sample_size: replicas.iter().copied().max().unwrap_or(0),
            notes: Default::default(),
        });
    }
    let mut artifacts = raw_paths;
    if !tv_rows.is_empty() {
        artifacts.push(write_csv(dir, "tv_vs_t.csv", "t,tv", &tv_rows)?);
    }
    let estimates = json!({
        "laws": laws
            .iter()
            .map(|(t, out)| {
                json!({
                    "t": t,
                    "law": law_to_json(&out.law),
                    "mean_size": out.mean_size,
                    "surviving": out.surviving,
                })
            })
            .collect::<Vec<_>>(),
        "tv_vs_t": tvs
            .iter()
            .map(|((a, b), tv)| json!({"t": b, "from": a, "tv": tv}))
            .collect::<Vec<_>>(),
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contamination,
            notes: vec![],
        },
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// box-law
// ---------------------------------------------------------------------------

fn run_boxlaw(cfg: &ExperimentConfig, dir: &Path) -> Result<Phase> {
    let ExperimentParams::BoxLaw {
        t_values,
        rt,
        width_cap,
        replicas,
        min_surviving,
        tv_threshold,
        alpha_times,
        alpha_replicas,
        yaglom_replicas,
        fit_start_below,
        fit_min_survivors,
    } = &cfg.params
    else {
        unreachable!()
    };
    let fit_opts = AlphaFitOptions {
        start_below: *fit_start_below,
        min_tail_survivors: *fit_min_survivors,
    };
    let window = cfg.sim.window()?;
    let origin_site = Site::origin(window.dim());
    let origin = Configuration::singleton(origin_site.clone());
    let full = Configuration::full(&window);

    // Phase 1: decay rate and prefactor from single-site survival.
    let horizon = alpha_times.iter().fold(0.0f64, |m, &t| m.max(t));
    let samples = sample_absorptions(
        &window,
        cfg.sim.lambda,
        horizon,
        cfg.seed,
        0..*alpha_replicas,
        &origin,
    )?;
    let curve = survival_curve_from(&samples, alpha_times, "origin")?;
    let fit = estimate_alpha(&curve, fit_opts)?;
    let h0 = estimate_h(&curve, &fit)?;

    let mut tests = Vec::new();
    let mut per_t = Vec::new();
    let mut tv_by_t = Vec::new();
    let mut contamination: f64 = curve.contaminated_rate;

    for (i, &t) in t_values.iter().enumerate() {
        let r_t = rt.eval(t);
        // Phase 2: reference law from a single site at the same time.
        let yaglom_states = sample_final_states(
            &window,
            cfg.sim.lambda,
            t,
            cfg.seed.wrapping_add(1000 + i as u64),
            0..*yaglom_replicas,
            &origin,
            None,
        )?;
        let yaglom =
            estimators::yaglom_law_from(&window, &yaglom_states, *width_cap, &format!("t={t}"))?;
        // Phase 3: full-occupancy box law.
        let box_states = sample_final_states(
            &window,
            cfg.sim.lambda,
            t,
            cfg.seed.wrapping_add(2000 + i as u64),
            0..*replicas,
            &full,
            Some(r_t),
        )?;
        let boxlaw = conditioned_box_law_from(&window, &box_states, r_t, *width_cap)?;
        contamination = contamination.max(boxlaw.contaminated_rate);
        if boxlaw.surviving < *min_surviving {
            return Err(Error::InsufficientData(format!(
                "box law at t={t}: {} surviving replicas below the required {min_surviving}",
                boxlaw.surviving
            )));
        }
        let tv = tv_distance(&boxlaw.law, &yaglom.law)?;
        tv_by_t.push((t, tv));
        tests.push(TestReport {
            name: format!("box law vs reference law: TV at t={t} ≤ {tv_threshold}"),
            statistic: tv,
            p_value: None,
            passed: tv <= *tv_threshold,
            level: *tv_threshold,
            sample_size: boxlaw.surviving,
            notes: Default::default(),
        });
        // Conditional mean size against the reference-law mean.
        let agrees = boxlaw.mean_size.agrees_with(&yaglom.mean_size, 3.0);
        tests.push(TestReport {
            name: format!("conditional mean size vs Σ|ζ|ν̂ at t={t} (3σ)"),
            statistic: (boxlaw.mean_size.value - yaglom.mean_size.value).abs(),
            p_value: None,
            passed: agrees,
            level: 0.0,
            sample_size: boxlaw.surviving,
            notes: [
                ("box_mean".to_string(), boxlaw.mean_size.value),
                ("reference_mean".to_string(), yaglom.mean_size.value),
            ]
            .into_iter()
            .collect(),
        });
        // Intensity constant, two routes.
        let rho = estimate_rho(&h0, &yaglom.mean_size);
        let box_card = window.ball_indices(&origin_site, r_t).len() as u64;
        let rho2 = rho_direct(&boxlaw.p_event, &fit.alpha, t, box_card);
        tests.push(TestReport {
            name: format!("intensity ratio vs direct box estimate at t={t} (3σ)"),
            statistic: (rho.value - rho2.value).abs(),
            p_value: None,
            passed: rho.agrees_with(&rho2, 3.0),
            level: 0.0,
            sample_size: boxlaw.surviving,
            notes: [
                ("rho_ratio".to_string(), rho.value),
                ("rho_direct".to_string(), rho2.value),
            ]
            .into_iter()
            .collect(),
        });
        tests.push(TestReport {
            name: format!("intensity positive at t={t} (CI excludes 0)"),
            statistic: rho.value,
            p_value: None,
            passed: rho.value - 3.0 * rho.se > 0.0,
            level: 0.0,
            sample_size: boxlaw.surviving,
            notes: Default::default(),
        });
        per_t.push(json!({
            "t": t,
            "r_t": r_t,
            "tv": tv,
            "box_law": law_to_json(&boxlaw.law),
            "reference_law": law_to_json(&yaglom.law),
            "box_mean_size": boxlaw.mean_size,
            "reference_mean_size": yaglom.mean_size,
            "p_box_nonempty": boxlaw.p_event,
            "surviving": boxlaw.surviving,
            "rho_ratio": rho,
            "rho_direct": rho2,
        }));
    }
    if tv_by_t.len() >= 2 {
        let last = tv_by_t.len() - 1;
        tests.push(TestReport {
            name: format!(
                "TV decreases from t={} to t={}",
                tv_by_t[last - 1].0,
                tv_by_t[last].0
            ),
            statistic: tv_by_t[last].1 - tv_by_t[last - 1].1,
            p_value: None,
            passed: tv_by_t[last].1 <= tv_by_t[last - 1].1,
            level: 0.0,
            sample_size: *replicas,
            notes: Default::default(),
        });
    }
    let tv_rows: Vec<String> = tv_by_t.iter().map(|(t, tv)| format!("{t},{tv}")).collect();
    let csv = write_csv(dir, "tv_vs_t.csv", "t,tv", &tv_rows)?;
    let estimates = json!({
        "alpha": fit.alpha,
        "h": h0,
        "fit_r2": fit.r2,
        "curve": serde_json::to_value(&curve)?,
        "per_t": per_t,
        "tv_vs_t": tv_by_t
            .iter()
            .map(|(t, tv)| json!({"t": t, "tv": tv}))
            .collect::<Vec<_>>(),
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contamination,
            notes: vec![],
        },
        vec![csv],
    ))
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

fn run_duality(cfg: &ExperimentConfig) -> Result<Phase> {
    let ExperimentParams::Duality { t_values, replicas } = &cfg.params else {
        unreachable!()
    };
    let window = cfg.sim.window()?;
    let mut tests = Vec::new();
    let mut reports = Vec::new();
    let mut contamination: f64 = 0.0;
    for (i, &t) in t_values.iter().enumerate() {
        let rep = estimators::duality_check(
            &window,
            cfg.sim.lambda,
            t,
            cfg.seed.wrapping_add(i as u64),
            *replicas,
        )?;
        contamination = contamination.max(rep.contaminated_rate);
        tests.push(TestReport {
            name: format!("occupancy equals survival probability at t={t} (3σ)"),
            statistic: rep.z,
            p_value: None,
            passed: rep.passed,
            level: 0.0,
            sample_size: *replicas,
            notes: [
                ("p_occupied".to_string(), rep.p_occupied.value),
                ("p_survival".to_string(), rep.p_survival.value),
            ]
            .into_iter()
            .collect(),
        });
        reports.push(rep);
    }
    let estimates = json!({ "duality": serde_json::to_value(&reports)? });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contamination,
            notes: vec![],
        },
        vec![],
    ))
}

// ---------------------------------------------------------------------------
// poisson
// ---------------------------------------------------------------------------

fn mark_class_set(
    spec: &MarkClassSpec,
    law: &EmpiricalLaw,
) -> (Option<BTreeSet<CanonicalConfig>>, f64) {
    match spec {
        MarkClassSpec::All => (None, 1.0),
        MarkClassSpec::SizeExactly(k) => {
            let class: BTreeSet<CanonicalConfig> = law
                .probs
                .keys()
                .filter(|c| c.size() == *k)
                .cloned()
                .collect();
            let mass = law.class_mass(&class);
            (Some(class), mass)
        }
        MarkClassSpec::SizeAtMost(k) => {
            let class: BTreeSet<CanonicalConfig> = law
                .probs
                .keys()
                .filter(|c| c.size() <= *k)
                .cloned()
                .collect();
            let mass = law.class_mass(&class);
            (Some(class), mass)
        }
    }
}

fn run_poisson(cfg: &ExperimentConfig, dir: &Path) -> Result<Phase> {
    let ExperimentParams::Poisson {
        t,
        rt,
        boxes,
        void_boxes,
        level,
        retry_seed,
        mark_class,
        replicas,
        width_cap,
        alpha_times,
        alpha_replicas,
        yaglom_replicas,
        fit_start_below,
        fit_min_survivors,
    } = &cfg.params
    else {
        unreachable!()
    };
    let fit_opts = AlphaFitOptions {
        start_below: *fit_start_below,
        min_tail_survivors: *fit_min_survivors,
    };
    let first = poisson_attempt(
        cfg,
        dir,
        cfg.seed,
        *t,
        rt.eval(*t),
        *boxes,
        *void_boxes,
        *level,
        mark_class,
        *replicas,
        *width_cap,
        alpha_times,
        *alpha_replicas,
        *yaglom_replicas,
        fit_opts,
    )?;
    if first.1.iter().all(|r| r.passed) {
        return Ok(first);
    }
    // Documented flake policy: one retry with the alternate fixed seed;
    // the retry verdict stands.
    let mut retry = poisson_attempt(
        cfg,
        dir,
        *retry_seed,
        *t,
        rt.eval(*t),
        *boxes,
        *void_boxes,
        *level,
        mark_class,
        *replicas,
        *width_cap,
        alpha_times,
        *alpha_replicas,
        *yaglom_replicas,
        fit_opts,
    )?;
    retry
        .2
        .notes
        .push(format!("first attempt with seed {} failed; retried with seed {retry_seed}", cfg.seed));
    Ok(retry)
}

#[allow(clippy::too_many_arguments)]
fn poisson_attempt(
    cfg: &ExperimentConfig,
    dir: &Path,
    seed: u64,
    t: f64,
    r_t: i32,
    boxes: usize,
    void_boxes: usize,
    level: f64,
    mark_class: &MarkClassSpec,
    replicas: u64,
    width_cap: i32,
    alpha_times: &[f64],
    alpha_replicas: u64,
    yaglom_replicas: u64,
    fit_opts: AlphaFitOptions,
) -> Result<Phase> {
    let window = cfg.sim.window()?;
    let dim = window.dim();
    let origin = Configuration::singleton(Site::origin(dim));
    let full = Configuration::full(&window);

    // Decay rate.
    let horizon = alpha_times.iter().fold(0.0f64, |m, &x| m.max(x));
    let samples = sample_absorptions(&window, cfg.sim.lambda, horizon, seed, 0..alpha_replicas, &origin)?;
    let curve = survival_curve_from(&samples, alpha_times, "origin")?;
    let fit = estimate_alpha(&curve, fit_opts)?;
    let h0 = estimate_h(&curve, &fit)?;
    let alpha = fit.alpha.value;

    // Reference configuration law for the mark distribution and mean size.
    let yaglom_states = sample_final_states(
        &window,
        cfg.sim.lambda,
        t,
        seed.wrapping_add(5000),
        0..yaglom_replicas,
        &origin,
        None,
    )?;
    let yaglom = estimators::yaglom_law_from(&window, &yaglom_states, width_cap, "reference")?;
    let rho = estimate_rho(&h0, &yaglom.mean_size);
    let (class, class_mass) = mark_class_set(mark_class, &yaglom.law);

    // Mesoscopic geometry: the viewing window tiles an odd number of boxes
    // exactly (≈ the requested count), so no box is clipped by the window
    // edge and every box carries the same intensity.
    let scale = (-alpha * t / dim as f64).exp();
    let spacing = (2.0 * r_t as f64 + 1.0) * scale;
    let reach = (boxes / 2).max(1) as f64;
    let half_width = (reach + 0.5) * spacing;
    let grid = MesoGrid::new(r_t, scale, reach * spacing + spacing / 4.0, dim)?;
    let obs_radius = (half_width / scale).ceil() as i32 + r_t;

    // Cluster phase.
    let states = sample_final_states(
        &window,
        cfg.sim.lambda,
        t,
        seed.wrapping_add(9000),
        0..replicas,
        &full,
        Some(obs_radius),
    )?;
    let mut counts: Vec<Vec<u64>> = Vec::new();
    let mut contaminated = 0u64;
    for s in &states {
        if s.contaminated {
            contaminated += 1;
            continue;
        }
        let clusters = extract_clusters(&s.config, r_t, Norm::LInf)?;
        let measure = marked_measure(&clusters, alpha, t, half_width)?;
        let stats = box_statistics(&measure, &grid, class.as_ref());
        counts.push(stats.counts);
    }
    if counts.len() < 500 {
        return Err(Error::InsufficientData(format!(
            "poisson suite needs ≥ 500 clean replicas, got {}",
            counts.len()
        )));
    }
    let mu_box = rho.value * class_mass * grid.box_volume();
    let intensity = vec![mu_box; grid.n_boxes()];
    let mut tests = poisson_suite(&counts, &intensity, void_boxes, level)?;
    for t_ in &mut tests {
        t_.notes.insert("box_intensity".into(), mu_box);
    }

    // Void comparison rows for plotting: empirical vs theory per prefix
    // rectangle.
    let mut void_rows = Vec::new();
    let mut void_cmp = Vec::new();
    for k in 1..=grid.n_boxes() {
        let empirical = counts
            .iter()
            .filter(|row| row[..k].iter().all(|&c| c == 0))
            .count() as f64
            / counts.len() as f64;
        let theory = (-(mu_box * k as f64)).exp();
        let se = (theory * (1.0 - theory) / counts.len() as f64).sqrt().max(1e-12);
        let z = (empirical - theory) / se;
        void_rows.push(format!("{k},{empirical},{theory},{z}"));
        void_cmp.push(json!({"rect": k, "empirical": empirical, "theory": theory, "z": z}));
    }
    let csv = write_csv(dir, "voids.csv", "rect,empirical,theory,z", &void_rows)?;

    let contamination = contaminated as f64 / states.len() as f64;
    let estimates = json!({
        "alpha": fit.alpha,
        "h": h0,
        "rho": rho,
        "mark_class_mass": class_mass,
        "box_intensity": mu_box,
        "grid": {
            "r_t": r_t,
            "boxes": grid.n_boxes(),
            "spacing": grid.spacing(),
            "half_width": grid.half_width,
        },
        "void_comparison": void_cmp,
        "reference_mean_size": yaglom.mean_size,
        "clean_replicas": counts.len(),
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contamination,
            notes: vec![],
        },
        vec![csv],
    ))
}

// ---------------------------------------------------------------------------
// clusters
// ---------------------------------------------------------------------------

fn run_clusters(cfg: &ExperimentConfig, dir: &Path) -> Result<Phase> {
    let ExperimentParams::Clusters {
        t,
        rt,
        replicas,
        alpha_times,
        alpha_replicas,
        half_width,
    } = &cfg.params
    else {
        unreachable!()
    };
    let window = cfg.sim.window()?;
    let dim = window.dim();
    let origin = Configuration::singleton(Site::origin(dim));
    let full = Configuration::full(&window);
    let r_t = rt.eval(*t);

    let horizon = alpha_times.iter().fold(0.0f64, |m, &x| m.max(x));
    let samples = sample_absorptions(
        &window,
        cfg.sim.lambda,
        horizon,
        cfg.seed,
        0..*alpha_replicas,
        &origin,
    )?;
    let curve = survival_curve_from(&samples, alpha_times, "origin")?;
    let fit = estimate_alpha(&curve, AlphaFitOptions::default())?;
    let alpha = fit.alpha.value;

    let window_radius = match &window {
        Window::BoxWindow { radius, .. } => *radius,
        Window::Ring { .. } => {
            return Err(Error::Usage("clusters experiment requires a box window".into()))
        }
    };
    let states = sample_final_states(
        &window,
        cfg.sim.lambda,
        *t,
        cfg.seed.wrapping_add(400),
        0..*replicas,
        &full,
        Some(window_radius - (cfg.sim.beta * t).ceil() as i32),
    )?;
    let mut max_diameter = 0i32;
    let mut total_clusters = 0u64;
    let mut contaminated = 0u64;
    let mut scatter = Vec::new();
    let mut raw = Vec::new();
    for s in states.iter() {
        if s.contaminated {
            contaminated += 1;
            continue;
        }
        let clusters = extract_clusters(&s.config, r_t, Norm::LInf)?;
        max_diameter = max_diameter.max(clusters.max_diameter());
        total_clusters += clusters.len() as u64;
        let measure = marked_measure(&clusters, alpha, *t, *half_width)?;
        // Scatter sample: the first replica whose measure is non-empty.
        if scatter.is_empty() {
            for p in &measure.points {
                scatter.push(json!({
                    "location": p.location,
                    "mark_size": p.mark.size(),
                }));
            }
        }
        if cfg.output.keep_raw {
            let mut line = Vec::new();
            measure.dump_jsonl(&mut line)?;
            raw.push(String::from_utf8_lossy(&line).trim_end().to_string());
        }
    }
    let clean = states.len() as u64 - contaminated;
    if clean == 0 {
        return Err(Error::InsufficientData("all replicas contaminated".into()));
    }
    // No giant components: every cluster stays far below the window scale.
    let bound = window_radius / 2;
    let tests = vec![TestReport {
        name: format!("largest component diameter {max_diameter} ≤ window/2 = {bound}"),
        statistic: max_diameter as f64,
        p_value: None,
        passed: max_diameter <= bound,
        level: 0.0,
        sample_size: clean,
        notes: Default::default(),
    }];
    let mut artifacts = Vec::new();
    let rows: Vec<String> = scatter
        .iter()
        .filter_map(|p| {
            let loc = p.get("location")?.as_array()?;
            let coords: Vec<String> = loc.iter().map(|c| c.to_string()).collect();
            Some(format!("{},{}", coords.join(","), p.get("mark_size")?))
        })
        .collect();
    artifacts.push(write_csv(dir, "scatter.csv", "x0,mark_size", &rows)?);
    if cfg.output.keep_raw {
        artifacts.push(write_lines(dir, "measures.jsonl", &raw)?);
    }
    let estimates = json!({
        "alpha": fit.alpha,
        "r_t": r_t,
        "max_component_diameter": max_diameter,
        "mean_clusters_per_replica": total_clusters as f64 / clean as f64,
        "scatter": scatter,
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: contaminated as f64 / states.len() as f64,
            notes: vec![],
        },
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// goodpoints
// ---------------------------------------------------------------------------

fn run_goodpoints(cfg: &ExperimentConfig) -> Result<Phase> {
    let ExperimentParams::GoodPoints {
        t_values,
        replicas_per_t,
        path_t,
        path_beta,
        path_count,
    } = &cfg.params
    else {
        unreachable!()
    };
    use cpsim_core::graphical::{backward_reachable_set, generate_events, SimParams};
    use cpsim_core::lattice::PriorityOrder;
    use cpsim_core::workpath::{favorable_intervals_from_jumps, minimal_path};
    use rayon::prelude::*;

    // (a) Bad-point rate shrinks with the horizon.
    let mut rates = Vec::new();
    for (i, &t) in t_values.iter().enumerate() {
        let radius = (cfg.sim.beta * t).ceil() as i32 * 2 + 4;
        let bad: u64 = (0..*replicas_per_t)
            .into_par_iter()
            .map(|r| {
                let p = SimParams {
                    dim: cfg.sim.dimension,
                    lambda: cfg.sim.lambda,
                    horizon: t,
                    window_radius: radius,
                    beta: cfg.sim.beta,
                    seed: cfg.seed.wrapping_add(i as u64),
                    replica_index: r,
                    margin: None,
                };
                let ev = generate_events(&p).expect("events");
                let rep = cpsim_core::workpath::classify_good(
                    &ev,
                    &Site::origin(cfg.sim.dimension),
                    0.0,
                    cfg.sim.beta,
                    t,
                    false,
                )
                .expect("classify");
                u64::from(!rep.is_good)
            })
            .sum();
        rates.push((t, bad as f64 / *replicas_per_t as f64));
    }
    let monotone = rates.windows(2).all(|w| w[1].1 <= w[0].1);
    let mut tests = vec![TestReport {
        name: "bad-point rate decreasing in t".into(),
        statistic: rates.last().map(|r| r.1).unwrap_or(0.0),
        p_value: None,
        passed: monotone,
        level: 0.0,
        sample_size: *replicas_per_t,
        notes: rates
            .iter()
            .map(|(t, r)| (format!("rate_t{t}"), *r))
            .collect(),
    }];

    // (b) Favorable-interval count bound on simulated minimal paths plus
    // synthetic jump patterns.
    let bound = (path_t.sqrt() / 4.0 - 1.0).max(0.0);
    let max_jumps = (path_beta * path_t) as usize;
    let mut checked = 0u64;
    let mut min_count = usize::MAX;
    let order = PriorityOrder::RadialLex;
    let mut sim_paths = 0u64;
    let mut seed_i = 0u64;
    while checked < *path_count {
        seed_i += 1;
        // Alternate real minimal paths and synthetic jump sets.
        let jumps: Vec<f64> = if checked % 2 == 0 {
            let radius = (cfg.sim.beta * path_t).ceil() as i32 + 8;
            let p = SimParams {
                dim: 1,
                lambda: cfg.sim.lambda,
                horizon: *path_t,
                window_radius: radius,
                beta: cfg.sim.beta,
                seed: cfg.seed.wrapping_add(7777),
                replica_index: seed_i,
                margin: None,
            };
            let ev = generate_events(&p)?;
            let full = Configuration::full(ev.window());
            let targets: Vec<Site> = ev.window().iter_sites().collect();
            let index = backward_reachable_set(&ev, &targets, *path_t)?;
            match minimal_path(&ev, &full, &index, &order)? {
                Some(path) if path.jump_count() <= max_jumps => {
                    sim_paths += 1;
                    path.jump_times()
                }
                _ => continue,
            }
        } else {
            synthetic_jumps(cfg.seed.wrapping_add(seed_i), *path_t, max_jumps)
        };
        let intervals = favorable_intervals_from_jumps(&jumps, *path_beta, *path_t);
        min_count = min_count.min(intervals.len());
        if (intervals.len() as f64) < bound {
            tests.push(TestReport {
                name: "favorable-interval count bound".into(),
                statistic: intervals.len() as f64,
                p_value: None,
                passed: false,
                level: bound,
                sample_size: checked,
                notes: Default::default(),
            });
            break;
        }
        checked += 1;
    }
    if checked >= *path_count {
        tests.push(TestReport {
            name: format!("favorable intervals ≥ √t/4 - 1 = {bound} on {path_count} paths"),
            statistic: min_count as f64,
            p_value: None,
            passed: true,
            level: bound,
            sample_size: checked,
            notes: [("simulated_paths".to_string(), sim_paths as f64)]
                .into_iter()
                .collect(),
        });
    }
    let estimates = json!({
        "bad_point_rates": rates.iter().map(|(t, r)| json!({"t": t, "rate": r})).collect::<Vec<_>>(),
        "min_favorable_intervals": min_count,
        "interval_bound": bound,
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: 0.0,
            notes: vec![],
        },
        vec![],
    ))
}

fn synthetic_jumps(seed: u64, t: f64, max_jumps: usize) -> Vec<f64> {
    let mut st = cpsim_core::rng::Stream::new(seed ^ 0x0dd_ba11);
    let n = st.next_index(max_jumps + 1);
    let clustered = st.next_f64() < 0.5;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if clustered {
            let center = st.next_range(0.0, 0.9 * t);
            out.push((center + st.next_range(0.0, 0.4)).min(t));
        } else {
            out.push(st.next_range(0.0, t));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

// ---------------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------------

fn run_oracle_check(cfg: &ExperimentConfig) -> Result<Phase> {
    let ExperimentParams::OracleCheck {
        n,
        ks_replicas,
        ks_horizon,
        alpha_times,
        alpha_replicas,
        yaglom_t,
        yaglom_replicas,
        tv_threshold,
        level,
        fit_start_below,
        fit_min_survivors,
    } = &cfg.params
    else {
        unreachable!()
    };
    let fit_opts = AlphaFitOptions {
        start_below: *fit_start_below,
        min_tail_survivors: *fit_min_survivors,
    };
    let window = Window::ring(*n);
    let origin = Configuration::singleton(Site(vec![0]));
    let chain = build_chain(*n, cfg.sim.lambda)?;
    let grid: Vec<f64> = alpha_times.clone();
    let summary = spectral_summary(&chain, &grid)?;
    let cdf = AbsorptionCdf::new(&chain, *ks_horizon);

    let mut tests = Vec::new();

    // (1) Absorption-time law against the matrix-exponential CDF.
    let samples = sample_absorptions(
        &window,
        cfg.sim.lambda,
        *ks_horizon,
        cfg.seed,
        0..*ks_replicas,
        &origin,
    )?;
    let mut times = Vec::with_capacity(samples.len());
    for s in &samples {
        match s.absorption {
            Absorption::Absorbed(t) => times.push(t),
            Absorption::SurvivedToHorizon => {
                return Err(Error::InsufficientData(
                    "a replica outlived the absorption horizon; raise ks_horizon".into(),
                ))
            }
        }
    }
    tests.push(ks_test(
        "absorption times vs exact chain CDF",
        &times,
        |x| cdf.eval(x),
        *level,
    )?);

    // (2) Fitted decay rate against the spectral rate.
    let curve = survival_curve_from(
        &sample_absorptions(
            &window,
            cfg.sim.lambda,
            grid.iter().fold(0.0f64, |m, &t| m.max(t)),
            cfg.seed.wrapping_add(1),
            0..*alpha_replicas,
            &origin,
        )?,
        &grid,
        "origin",
    )?;
    let fit = estimate_alpha(&curve, fit_opts)?;
    let alpha_gap = (fit.alpha.value - summary.alpha).abs();
    tests.push(TestReport {
        name: "fitted decay rate vs spectral rate (3σ)".into(),
        statistic: alpha_gap,
        p_value: None,
        passed: alpha_gap <= 3.0 * fit.alpha.se,
        level: 0.0,
        sample_size: *alpha_replicas,
        notes: [
            ("alpha_hat".to_string(), fit.alpha.value),
            ("alpha_oracle".to_string(), summary.alpha),
            ("se".to_string(), fit.alpha.se),
        ]
        .into_iter()
        .collect(),
    });

    // (3) Conditioned law at a fixed time against the exact QSD.
    let states = sample_final_states(
        &window,
        cfg.sim.lambda,
        *yaglom_t,
        cfg.seed.wrapping_add(2),
        0..*yaglom_replicas,
        &origin,
        None,
    )?;
    let width_cap = *n as i32;
    let empirical = estimators::yaglom_law_from(&window, &states, width_cap, "ring")?;
    let oracle_law = EmpiricalLaw::from_probabilities(
        summary.qsd.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        width_cap,
        "oracle QSD",
    );
    let tv = tv_distance(&empirical.law, &oracle_law)?;
    tests.push(TestReport {
        name: format!("conditioned law vs exact QSD: TV ≤ {tv_threshold}"),
        statistic: tv,
        p_value: None,
        passed: tv <= *tv_threshold,
        level: *tv_threshold,
        sample_size: empirical.surviving,
        notes: Default::default(),
    });

    // (4) Survival prefactor against the right eigenvector at the origin.
    let h_hat = estimate_h(&curve, &fit)?;
    let h_oracle = summary.h[&ring_canonical_form(&origin, *n)];
    tests.push(TestReport {
        name: "survival prefactor vs right eigenvector (3σ)".into(),
        statistic: (h_hat.value - h_oracle).abs(),
        p_value: None,
        passed: (h_hat.value - h_oracle).abs() <= 3.0 * h_hat.se,
        level: 0.0,
        sample_size: *alpha_replicas,
        notes: [
            ("h_hat".to_string(), h_hat.value),
            ("h_oracle".to_string(), h_oracle),
        ]
        .into_iter()
        .collect(),
    });

    let estimates = json!({
        "oracle": serde_json::to_value(&summary)?,
        "alpha_hat": fit.alpha,
        "h_hat": h_hat,
        "tv_vs_qsd": tv,
        "curve": serde_json::to_value(&curve)?,
        "ks_samples": times.len(),
    });
    Ok((
        estimates,
        tests,
        Diagnostics {
            contamination_rate: 0.0,
            notes: vec![],
        },
        vec![],
    ))
}

/// Raw per-replica simulation records (`simulate` subcommand).
pub fn simulate_raw(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let dir = out_dir
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| std::path::PathBuf::from(&cfg.output.dir));
    let window = cfg.sim.window()?;
    // Derive (initial, time, replicas) from the experiment parameters.
    let (initial, t, replicas): (Configuration, f64, u64) = match &cfg.params {
        ExperimentParams::Survival {
            initial,
            times,
            replicas,
            ..
        } => (
            initial_config(&window, initial),
            times.iter().fold(0.0f64, |m, &x| m.max(x)),
            *replicas,
        ),
        ExperimentParams::Yaglom {
            t_values, replicas, ..
        } => (
            Configuration::singleton(Site::origin(window.dim())),
            t_values.iter().fold(0.0f64, |m, &x| m.max(x)),
            replicas.iter().copied().max().unwrap_or(0),
        ),
        ExperimentParams::Duality { t_values, replicas } => (
            Configuration::full(&window),
            t_values.iter().fold(0.0f64, |m, &x| m.max(x)),
            *replicas,
        ),
        _ => {
            return Err(Error::Usage(
                "simulate supports survival, yaglom and duality configs".into(),
            ))
        }
    };
    let states = sample_final_states(&window, cfg.sim.lambda, t, cfg.seed, 0..replicas, &initial, None)?;
    let mut lines = Vec::with_capacity(states.len());
    for s in &states {
        lines.push(serde_json::to_string(&json!({
            "replica": s.replica,
            "config": s.config,
            "contaminated": s.contaminated,
        }))?);
    }
    let raw = write_lines(&dir, "replicas.jsonl", &lines)?;
    let doc = ResultsDoc {
        experiment: format!("simulate:{}", cfg.params.kind()),
        seed: cfg.seed,
        generated_at: cfg.output.stamp.then(timestamp),
        config: cfg.serialize(),
        estimates: json!({"replicas": states.len(), "t": t}),
        tests: vec![],
        diagnostics: Diagnostics {
            contamination_rate: states.iter().filter(|s| s.contaminated).count() as f64
                / states.len().max(1) as f64,
            notes: vec![],
        },
    };
    let json_path = doc.write(&dir)?;
    Ok(RunOutcome {
        doc,
        artifacts: vec![raw, json_path],
    })
}

/// Spectral summary dump (`oracle` subcommand).
pub fn oracle_dump(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let ExperimentParams::OracleCheck { n, alpha_times, .. } = &cfg.params else {
        return Err(Error::Usage("oracle subcommand needs an oracle-check config".into()));
    };
    let dir = out_dir
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| std::path::PathBuf::from(&cfg.output.dir));
    let chain = build_chain(*n, cfg.sim.lambda)?;
    let summary = spectral_summary(&chain, alpha_times)?;
    let doc = ResultsDoc {
        experiment: "oracle".into(),
        seed: cfg.seed,
        generated_at: cfg.output.stamp.then(timestamp),
        config: cfg.serialize(),
        estimates: serde_json::to_value(&summary)?,
        tests: vec![],
        diagnostics: Diagnostics {
            contamination_rate: 0.0,
            notes: vec![],
        },
    };
    let path = doc.write(&dir)?;
    Ok(RunOutcome {
        doc,
        artifacts: vec![path],
    })
}
