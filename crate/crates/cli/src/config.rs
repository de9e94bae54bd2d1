//! Experiment configuration: a flat sectioned key-value text format.
//!
//! ```text
//! # comment
//! [experiment]
//! name = survival
//! seed = 42
//!
//! [sim]
//! dimension = 1
//! lambda = 1.0
//! window_radius = 120
//! beta = 2.0
//! ```
//!
//! Sections: `[experiment]` (name, seed), `[sim]` (shared simulation
//! parameters), one section named after the experiment carrying its knobs,
//! and `[output]` (dir, keep_raw, stamp). Unknown sections or keys are
//! rejected; every value is validated before any simulation starts.
//! Radius rules are expressions `c`, `c*t` or `c*t^k`.

use cpsim_core::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// `c·t^k` radius schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct RtRule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl RtRule {
    pub fn parse(text: &str) -> Result<RtRule> {
        let text = text.trim();
        let (coeff_str, exponent) = match text.split_once('*') {
            None => (text, 0.0),
            Some((c, rest)) => {
                let rest = rest.trim();
                let exp = if rest == "t" {
                    1.0
                } else if let Some(e) = rest.strip_prefix("t^") {
                    e.trim().parse::<f64>().map_err(|_| {
                        Error::Usage(format!("bad exponent in radius rule '{text}'"))
                    })?
                } else {
                    return Err(Error::Usage(format!(
                        "radius rule '{text}' must be 'c', 'c*t' or 'c*t^k'"
                    )));
                };
                (c, exp)
            }
        };
        let coefficient = coeff_str
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Usage(format!("bad coefficient in radius rule '{text}'")))?;
        if !(coefficient > 0.0) {
            return Err(Error::Usage("radius rule coefficient must be positive".into()));
        }
        Ok(RtRule {
            coefficient,
            exponent,
        })
    }

    pub fn eval(&self, t: f64) -> i32 {
        (self.coefficient * t.powf(self.exponent)).round().max(1.0) as i32
    }

    pub fn text(&self) -> String {
        if self.exponent == 0.0 {
            format!("{}", self.coefficient)
        } else if self.exponent == 1.0 {
            format!("{}*t", self.coefficient)
        } else {
            format!("{}*t^{}", self.coefficient, self.exponent)
        }
    }
}

/// Time grid: `start:stop:step` or a comma list.
pub fn parse_times(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    let values = if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|_| bad_times(text))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad_times(text))?;
        let step: f64 = parts[2].trim().parse().map_err(|_| bad_times(text))?;
        if !(step > 0.0) || stop < start {
            return Err(bad_times(text));
        }
        let mut out = Vec::new();
        let mut t = start;
        while t <= stop + 1e-9 {
            out.push(t);
            t += step;
        }
        out
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad_times(text)))
            .collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(bad_times(text));
    }
    Ok(values)
}

fn bad_times(text: &str) -> Error {
    Error::Usage(format!("bad time grid '{text}' (use start:stop:step or a comma list)"))
}

pub fn format_times(times: &[f64]) -> String {
    times
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Initial condition of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Origin,
    Ball(i32),
    Full,
}

impl InitialSpec {
    pub fn parse(text: &str) -> Result<InitialSpec> {
        let text = text.trim();
        match text {
            "origin" => Ok(InitialSpec::Origin),
            "full" => Ok(InitialSpec::Full),
            _ => {
                if let Some(r) = text.strip_prefix("ball:") {
                    let r: i32 = r
                        .trim()
                        .parse()
                        .map_err(|_| Error::Usage(format!("bad ball radius in '{text}'")))?;
                    if r < 0 {
                        return Err(Error::Usage("ball radius must be non-negative".into()));
                    }
                    Ok(InitialSpec::Ball(r))
                } else {
                    Err(Error::Usage(format!(
                        "bad initial condition '{text}' (origin | ball:R | full)"
                    )))
                }
            }
        }
    }

    pub fn text(&self) -> String {
        match self {
            InitialSpec::Origin => "origin".into(),
            InitialSpec::Ball(r) => format!("ball:{r}"),
            InitialSpec::Full => "full".into(),
        }
    }
}

/// Mark class selector for point-pattern tests.
#[derive(Clone, Debug, PartialEq)]
pub enum MarkClassSpec {
    All,
    SizeExactly(usize),
    SizeAtMost(usize),
}

impl MarkClassSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "all" {
            return Ok(MarkClassSpec::All);
        }
        if let Some(k) = text.strip_prefix("size<=") {
            return Ok(MarkClassSpec::SizeAtMost(k.trim().parse().map_err(|_| {
                Error::Usage(format!("bad mark class '{text}'"))
            })?));
        }
        if let Some(k) = text.strip_prefix("size:") {
            return Ok(MarkClassSpec::SizeExactly(k.trim().parse().map_err(
                |_| Error::Usage(format!("bad mark class '{text}'")),
            )?));
        }
        Err(Error::Usage(format!(
            "bad mark class '{text}' (all | size:K | size<=K)"
        )))
    }

    pub fn text(&self) -> String {
        match self {
            MarkClassSpec::All => "all".into(),
            MarkClassSpec::SizeExactly(k) => format!("size:{k}"),
            MarkClassSpec::SizeAtMost(k) => format!("size<={k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    BoxWindow,
    Ring,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSection {
    pub dimension: usize,
    pub lambda: f64,
    pub topology: TopologyKind,
    pub ring_size: Option<usize>,
    pub window_radius: Option<i32>,
    pub beta: f64,
    pub margin: Option<i32>,
}

impl SimSection {
    pub fn window(&self) -> Result<cpsim_core::lattice::Window> {
        match self.topology {
            TopologyKind::Ring => {
                let n = self.ring_size.ok_or_else(|| {
                    Error::Usage("ring topology requires ring_size".into())
                })?;
                Ok(cpsim_core::lattice::Window::ring(n))
            }
            TopologyKind::BoxWindow => {
                let r = self.window_radius.ok_or_else(|| {
                    Error::Usage("box topology requires window_radius".into())
                })?;
                Ok(cpsim_core::lattice::Window::boxed(self.dimension, r))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: String,
    pub keep_raw: bool,
    pub stamp: bool,
}

/// Per-experiment parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentParams {
    Survival {
        initial: InitialSpec,
        times: Vec<f64>,
        replicas: u64,
        fit_start_below: f64,
        fit_min_survivors: u64,
        h_targets: Vec<InitialSpec>,
    },
    Yaglom {
        t_values: Vec<f64>,
        /// One entry per time value (or a single shared count).
        replicas: Vec<u64>,
        width_cap: i32,
    },
    BoxLaw {
        t_values: Vec<f64>,
        rt: RtRule,
        width_cap: i32,
        replicas: u64,
        min_surviving: u64,
        tv_threshold: f64,
        alpha_times: Vec<f64>,
        alpha_replicas: u64,
        yaglom_replicas: u64,
        fit_start_below: f64,
        fit_min_survivors: u64,
    },
    Duality {
        t_values: Vec<f64>,
        replicas: u64,
    },
    Poisson {
        t: f64,
        rt: RtRule,
        boxes: usize,
        void_boxes: usize,
        level: f64,
        retry_seed: u64,
        mark_class: MarkClassSpec,
        replicas: u64,
        width_cap: i32,
        alpha_times: Vec<f64>,
        alpha_replicas: u64,
        yaglom_replicas: u64,
        fit_start_below: f64,
        fit_min_survivors: u64,
    },
    Clusters {
        t: f64,
        rt: RtRule,
        replicas: u64,
        alpha_times: Vec<f64>,
        alpha_replicas: u64,
        half_width: f64,
    },
    GoodPoints {
        t_values: Vec<f64>,
        replicas_per_t: u64,
        path_t: f64,
        path_beta: f64,
        path_count: u64,
    },
    OracleCheck {
        n: usize,
        ks_replicas: u64,
        ks_horizon: f64,
        alpha_times: Vec<f64>,
        alpha_replicas: u64,
        yaglom_t: f64,
        yaglom_replicas: u64,
        tv_threshold: f64,
        level: f64,
        fit_start_below: f64,
        fit_min_survivors: u64,
    },
}

impl ExperimentParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentParams::Survival { .. } => "survival",
            ExperimentParams::Yaglom { .. } => "yaglom",
            ExperimentParams::BoxLaw { .. } => "box-law",
            ExperimentParams::Duality { .. } => "duality",
            ExperimentParams::Poisson { .. } => "poisson",
            ExperimentParams::Clusters { .. } => "clusters",
            ExperimentParams::GoodPoints { .. } => "goodpoints",
            ExperimentParams::OracleCheck { .. } => "oracle-check",
        }
    }

    fn section_name(&self) -> &'static str {
        match self {
            ExperimentParams::Survival { .. } => "survival",
            ExperimentParams::Yaglom { .. } => "yaglom",
            ExperimentParams::BoxLaw { .. } => "boxlaw",
            ExperimentParams::Duality { .. } => "duality",
            ExperimentParams::Poisson { .. } => "poisson",
            ExperimentParams::Clusters { .. } => "clusters",
            ExperimentParams::GoodPoints { .. } => "goodpoints",
            ExperimentParams::OracleCheck { .. } => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sim: SimSection,
    pub params: ExperimentParams,
    pub output: OutputSection,
}

// ---------------------------------------------------------------------------
// Raw section parsing
// ---------------------------------------------------------------------------

struct Section {
    keys: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        let v = self.keys.get(key).map(|s| s.as_str());
        if v.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Usage(format!("missing key '{key}' in section [{section}]")))
    }

    fn unconsumed(&self) -> Vec<String> {
        self.keys
            .keys()
            .filter(|k| !self.consumed.borrow().contains(*k))
            .cloned()
            .collect()
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Usage(format!("line {}: malformed section header", lineno + 1)))?
                .trim()
                .to_string();
            if out.contains_key(&name) {
                return Err(Error::Usage(format!("duplicate section [{name}]")));
            }
            out.insert(
                name.clone(),
                Section {
                    keys: BTreeMap::new(),
                    consumed: Default::default(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let section = current
            .as_ref()
            .ok_or_else(|| Error::Usage(format!("line {}: key outside any section", lineno + 1)))?;
        let prev = out
            .get_mut(section)
            .unwrap()
            .keys
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            return Err(Error::Usage(format!(
                "duplicate key '{}' in section [{}]",
                key.trim(),
                section
            )));
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::Usage(format!("bad value '{value}' for '{key}' in section [{section}]"))
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Usage(format!(
            "bad boolean '{value}' for '{key}' in section [{section}]"
        ))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let sections = parse_sections(text)?;
        let get_section = |name: &str| -> Result<&Section> {
            sections
                .get(name)
                .ok_or_else(|| Error::Usage(format!("missing section [{name}]")))
        };

        let exp = get_section("experiment")?;
        let name = exp.require("experiment", "name")?.to_string();
        let seed: u64 = parse_num("experiment", "seed", exp.require("experiment", "seed")?)?;

        let sim = get_section("sim")?;
        let dimension: usize = parse_num("sim", "dimension", sim.require("sim", "dimension")?)?;
        let lambda: f64 = parse_num("sim", "lambda", sim.require("sim", "lambda")?)?;
        let topology = match sim.get("topology").unwrap_or("box") {
            "box" => TopologyKind::BoxWindow,
            "ring" => TopologyKind::Ring,
            other => {
                return Err(Error::Usage(format!(
                    "bad topology '{other}' (box | ring)"
                )))
            }
        };
        let ring_size = sim
            .get("ring_size")
            .map(|v| parse_num("sim", "ring_size", v))
            .transpose()?;
        let window_radius = sim
            .get("window_radius")
            .map(|v| parse_num("sim", "window_radius", v))
            .transpose()?;
        let beta: f64 = sim
            .get("beta")
            .map(|v| parse_num("sim", "beta", v))
            .transpose()?
            .unwrap_or(2.0);
        let margin = sim
            .get("margin")
            .map(|v| parse_num("sim", "margin", v))
            .transpose()?;
        let sim = SimSection {
            dimension,
            lambda,
            topology,
            ring_size,
            window_radius,
            beta,
            margin,
        };

        let output = match sections.get("output") {
            None => OutputSection {
                dir: default_output_dir(),
                keep_raw: false,
                stamp: false,
            },
            Some(sec) => OutputSection {
                dir: sec
                    .get("dir")
                    .map(|s| s.to_string())
                    .unwrap_or_else(default_output_dir),
                keep_raw: sec
                    .get("keep_raw")
                    .map(|v| parse_bool("output", "keep_raw", v))
                    .transpose()?
                    .unwrap_or(false),
                stamp: sec
                    .get("stamp")
                    .map(|v| parse_bool("output", "stamp", v))
                    .transpose()?
                    .unwrap_or(false),
            },
        };

        let params = Self::parse_experiment(&name, &sections)?;

        // Reject unknown sections and keys.
        let expected_section = params.section_name();
        for (sec_name, sec) in &sections {
            let known = matches!(sec_name.as_str(), "experiment" | "sim" | "output")
                || sec_name == expected_section;
            if !known {
                return Err(Error::Usage(format!("unknown section [{sec_name}]")));
            }
            let leftover = sec.unconsumed();
            if !leftover.is_empty() {
                return Err(Error::Usage(format!(
                    "unknown keys in section [{sec_name}]: {}",
                    leftover.join(", ")
                )));
            }
        }

        let cfg = ExperimentConfig {
            seed,
            sim,
            params,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_experiment(
        name: &str,
        sections: &BTreeMap<String, Section>,
    ) -> Result<ExperimentParams> {
        let section_name = match name {
            "survival" => "survival",
            "yaglom" => "yaglom",
            "box-law" => "boxlaw",
            "duality" => "duality",
            "poisson" => "poisson",
            "clusters" => "clusters",
            "goodpoints" => "goodpoints",
            "oracle-check" => "oracle",
            other => {
                return Err(Error::Usage(format!(
                    "unknown experiment '{other}' (survival, yaglom, box-law, duality, \
                     poisson, clusters, goodpoints, oracle-check)"
                )))
            }
        };
        let sec = sections
            .get(section_name)
            .ok_or_else(|| Error::Usage(format!("missing section [{section_name}]")))?;
        let s = section_name;
        let num_u64 = |key: &str| -> Result<u64> { parse_num(s, key, sec.require(s, key)?) };
        let num_f64 = |key: &str| -> Result<f64> { parse_num(s, key, sec.require(s, key)?) };
        let opt_f64 = |key: &str, default: f64| -> Result<f64> {
            sec.get(key).map(|v| parse_num(s, key, v)).transpose().map(|o| o.unwrap_or(default))
        };
        let opt_u64 = |key: &str, default: u64| -> Result<u64> {
            sec.get(key).map(|v| parse_num(s, key, v)).transpose().map(|o| o.unwrap_or(default))
        };
        Ok(match name {
            "survival" => ExperimentParams::Survival {
                initial: InitialSpec::parse(sec.require(s, "initial")?)?,
                times: parse_times(sec.require(s, "times")?)?,
                replicas: num_u64("replicas")?,
                fit_start_below: opt_f64("fit_start_below", 0.5)?,
                fit_min_survivors: opt_u64("fit_min_survivors", 100)?,
                h_targets: sec
                    .get("h_targets")
                    .map(|v| {
                        v.split(',')
                            .map(InitialSpec::parse)
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?
                    .unwrap_or_default(),
            },
            "yaglom" => {
                let t_values = parse_times(sec.require(s, "t_values")?)?;
                let replicas: Vec<u64> = sec
                    .require(s, "replicas")?
                    .split(',')
                    .map(|v| parse_num(s, "replicas", v))
                    .collect::<Result<Vec<u64>>>()?;
                if replicas.len() != 1 && replicas.len() != t_values.len() {
                    return Err(Error::Usage(
                        "yaglom replicas must be a single count or one per t".into(),
                    ));
                }
                ExperimentParams::Yaglom {
                    t_values,
                    replicas,
                    width_cap: parse_num(s, "width_cap", sec.get("width_cap").unwrap_or("20"))?,
                }
            }
            "box-law" => ExperimentParams::BoxLaw {
                t_values: parse_times(sec.require(s, "t_values")?)?,
                rt: RtRule::parse(sec.require(s, "rt")?)?,
                width_cap: parse_num(s, "width_cap", sec.get("width_cap").unwrap_or("20"))?,
                replicas: num_u64("replicas")?,
                min_surviving: opt_u64("min_surviving", 2000)?,
                tv_threshold: opt_f64("tv_threshold", 0.1)?,
                alpha_times: parse_times(sec.require(s, "alpha_times")?)?,
                alpha_replicas: num_u64("alpha_replicas")?,
                yaglom_replicas: num_u64("yaglom_replicas")?,
                fit_start_below: opt_f64("fit_start_below", 0.5)?,
                fit_min_survivors: opt_u64("fit_min_survivors", 100)?,
            },
            "duality" => ExperimentParams::Duality {
                t_values: parse_times(sec.require(s, "t_values")?)?,
                replicas: num_u64("replicas")?,
            },
            "poisson" => ExperimentParams::Poisson {
                t: num_f64("t")?,
                rt: RtRule::parse(sec.require(s, "rt")?)?,
                boxes: parse_num(s, "boxes", sec.get("boxes").unwrap_or("20"))?,
                void_boxes: parse_num(s, "void_boxes", sec.get("void_boxes").unwrap_or("2"))?,
                level: opt_f64("level", 0.01)?,
                retry_seed: num_u64("retry_seed")?,
                mark_class: MarkClassSpec::parse(sec.get("mark_class").unwrap_or("all"))?,
                replicas: num_u64("replicas")?,
                width_cap: parse_num(s, "width_cap", sec.get("width_cap").unwrap_or("20"))?,
                alpha_times: parse_times(sec.require(s, "alpha_times")?)?,
                alpha_replicas: num_u64("alpha_replicas")?,
                yaglom_replicas: num_u64("yaglom_replicas")?,
                fit_start_below: opt_f64("fit_start_below", 0.5)?,
                fit_min_survivors: opt_u64("fit_min_survivors", 100)?,
            },
            "clusters" => ExperimentParams::Clusters {
                t: num_f64("t")?,
                rt: RtRule::parse(sec.require(s, "rt")?)?,
                replicas: num_u64("replicas")?,
                alpha_times: parse_times(sec.require(s, "alpha_times")?)?,
                alpha_replicas: num_u64("alpha_replicas")?,
                half_width: num_f64("half_width")?,
            },
            "goodpoints" => ExperimentParams::GoodPoints {
                t_values: parse_times(sec.require(s, "t_values")?)?,
                replicas_per_t: num_u64("replicas_per_t")?,
                path_t: num_f64("path_t")?,
                path_beta: num_f64("path_beta")?,
                path_count: num_u64("path_count")?,
            },
            "oracle-check" => ExperimentParams::OracleCheck {
                n: parse_num(s, "n", sec.require(s, "n")?)?,
                ks_replicas: num_u64("ks_replicas")?,
                ks_horizon: opt_f64("ks_horizon", 200.0)?,
                alpha_times: parse_times(sec.require(s, "alpha_times")?)?,
                alpha_replicas: num_u64("alpha_replicas")?,
                yaglom_t: num_f64("yaglom_t")?,
                yaglom_replicas: num_u64("yaglom_replicas")?,
                tv_threshold: opt_f64("tv_threshold", 0.05)?,
                level: opt_f64("level", 0.01)?,
                fit_start_below: opt_f64("fit_start_below", 0.5)?,
                fit_min_survivors: opt_u64("fit_min_survivors", 100)?,
            },
            _ => unreachable!(),
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.sim.lambda > 0.0) {
            return Err(Error::Usage("lambda must be positive".into()));
        }
        if self.sim.dimension == 0 {
            return Err(Error::Usage("dimension must be ≥ 1".into()));
        }
        match self.sim.topology {
            TopologyKind::Ring => {
                if self.sim.ring_size.is_none() {
                    return Err(Error::Usage("ring topology requires ring_size".into()));
                }
                if self.sim.dimension != 1 {
                    return Err(Error::Usage("ring topology requires dimension = 1".into()));
                }
            }
            TopologyKind::BoxWindow => {
                if self.sim.window_radius.is_none()
                    && !matches!(self.params, ExperimentParams::OracleCheck { .. })
                {
                    return Err(Error::Usage("box topology requires window_radius".into()));
                }
            }
        }
        // Subcriticality: box-window experiments must stay below the
        // reference critical value.
        if self.sim.topology == TopologyKind::BoxWindow {
            let lc = cpsim_core::graphical::lambda_c_reference(self.sim.dimension);
            if self.sim.lambda >= lc {
                return Err(Error::Usage(format!(
                    "lambda {} is not subcritical (reference λ_c = {lc} for d = {})",
                    self.sim.lambda, self.sim.dimension
                )));
            }
        }
        match &self.params {
            ExperimentParams::BoxLaw { t_values, rt, .. } => {
                let w = self.sim.window_radius.unwrap_or(0);
                for &t in t_values {
                    let r = rt.eval(t);
                    let moat = (self.sim.beta * t).ceil() as i32;
                    if w < r + moat {
                        return Err(Error::Usage(format!(
                            "window radius {w} below R_t + beta·t = {} at t = {t}",
                            r + moat
                        )));
                    }
                }
            }
            ExperimentParams::Poisson { t, rt, boxes, .. } => {
                let w = self.sim.window_radius.unwrap_or(0);
                let r = rt.eval(*t);
                let need = ((*boxes as i32) * (2 * r + 1)) / 2 + (self.sim.beta * t).ceil() as i32;
                if w < need {
                    return Err(Error::Usage(format!(
                        "window radius {w} below viewing half-width + moat = {need}"
                    )));
                }
            }
            ExperimentParams::OracleCheck { n, .. } => {
                if !(2..=12).contains(n) {
                    return Err(Error::Usage("oracle ring size must be in 2..=12".into()));
                }
                if self.sim.topology != TopologyKind::Ring {
                    return Err(Error::Usage(
                        "oracle-check requires ring topology".into(),
                    ));
                }
                if self.sim.ring_size != Some(*n) {
                    return Err(Error::Usage(
                        "oracle-check requires ring_size = n".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Normalized text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[experiment]");
        let _ = writeln!(out, "name = {}", self.params.kind());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out);
        let _ = writeln!(out, "[sim]");
        let _ = writeln!(out, "dimension = {}", self.sim.dimension);
        let _ = writeln!(out, "lambda = {}", self.sim.lambda);
        let _ = writeln!(
            out,
            "topology = {}",
            match self.sim.topology {
                TopologyKind::BoxWindow => "box",
                TopologyKind::Ring => "ring",
            }
        );
        if let Some(n) = self.sim.ring_size {
            let _ = writeln!(out, "ring_size = {n}");
        }
        if let Some(w) = self.sim.window_radius {
            let _ = writeln!(out, "window_radius = {w}");
        }
        let _ = writeln!(out, "beta = {}", self.sim.beta);
        if let Some(m) = self.sim.margin {
            let _ = writeln!(out, "margin = {m}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[{}]", self.params.section_name());
        match &self.params {
            ExperimentParams::Survival {
                initial,
                times,
                replicas,
                fit_start_below,
                fit_min_survivors,
                h_targets,
            } => {
                let _ = writeln!(out, "initial = {}", initial.text());
                let _ = writeln!(out, "times = {}", format_times(times));
                let _ = writeln!(out, "replicas = {replicas}");
                let _ = writeln!(out, "fit_start_below = {fit_start_below}");
                let _ = writeln!(out, "fit_min_survivors = {fit_min_survivors}");
                if !h_targets.is_empty() {
                    let list: Vec<String> = h_targets.iter().map(|h| h.text()).collect();
                    let _ = writeln!(out, "h_targets = {}", list.join(","));
                }
            }
            ExperimentParams::Yaglom {
                t_values,
                replicas,
                width_cap,
            } => {
                let _ = writeln!(out, "t_values = {}", format_times(t_values));
                let list: Vec<String> = replicas.iter().map(|r| r.to_string()).collect();
                let _ = writeln!(out, "replicas = {}", list.join(","));
                let _ = writeln!(out, "width_cap = {width_cap}");
            }
            ExperimentParams::BoxLaw {
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
            } => {
                let _ = writeln!(out, "t_values = {}", format_times(t_values));
                let _ = writeln!(out, "rt = {}", rt.text());
                let _ = writeln!(out, "width_cap = {width_cap}");
                let _ = writeln!(out, "replicas = {replicas}");
                let _ = writeln!(out, "min_surviving = {min_surviving}");
                let _ = writeln!(out, "tv_threshold = {tv_threshold}");
                let _ = writeln!(out, "alpha_times = {}", format_times(alpha_times));
                let _ = writeln!(out, "alpha_replicas = {alpha_replicas}");
                let _ = writeln!(out, "yaglom_replicas = {yaglom_replicas}");
                let _ = writeln!(out, "fit_start_below = {fit_start_below}");
                let _ = writeln!(out, "fit_min_survivors = {fit_min_survivors}");
            }
            ExperimentParams::Duality { t_values, replicas } => {
                let _ = writeln!(out, "t_values = {}", format_times(t_values));
                let _ = writeln!(out, "replicas = {replicas}");
            }
            ExperimentParams::Poisson {
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
            } => {
                let _ = writeln!(out, "t = {t}");
                let _ = writeln!(out, "rt = {}", rt.text());
                let _ = writeln!(out, "boxes = {boxes}");
                let _ = writeln!(out, "void_boxes = {void_boxes}");
                let _ = writeln!(out, "level = {level}");
                let _ = writeln!(out, "retry_seed = {retry_seed}");
                let _ = writeln!(out, "mark_class = {}", mark_class.text());
                let _ = writeln!(out, "replicas = {replicas}");
                let _ = writeln!(out, "width_cap = {width_cap}");
                let _ = writeln!(out, "alpha_times = {}", format_times(alpha_times));
                let _ = writeln!(out, "alpha_replicas = {alpha_replicas}");
                let _ = writeln!(out, "yaglom_replicas = {yaglom_replicas}");
                let _ = writeln!(out, "fit_start_below = {fit_start_below}");
                let _ = writeln!(out, "fit_min_survivors = {fit_min_survivors}");
            }
            ExperimentParams::Clusters {
                t,
                rt,
                replicas,
                alpha_times,
                alpha_replicas,
                half_width,
            } => {
                let _ = writeln!(out, "t = {t}");
                let _ = writeln!(out, "rt = {}", rt.text());
                let _ = writeln!(out, "replicas = {replicas}");
                let _ = writeln!(out, "alpha_times = {}", format_times(alpha_times));
                let _ = writeln!(out, "alpha_replicas = {alpha_replicas}");
                let _ = writeln!(out, "half_width = {half_width}");
            }
            ExperimentParams::GoodPoints {
                t_values,
                replicas_per_t,
                path_t,
                path_beta,
                path_count,
            } => {
                let _ = writeln!(out, "t_values = {}", format_times(t_values));
                let _ = writeln!(out, "replicas_per_t = {replicas_per_t}");
                let _ = writeln!(out, "path_t = {path_t}");
                let _ = writeln!(out, "path_beta = {path_beta}");
                let _ = writeln!(out, "path_count = {path_count}");
            }
            ExperimentParams::OracleCheck {
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
            } => {
                let _ = writeln!(out, "n = {n}");
                let _ = writeln!(out, "ks_replicas = {ks_replicas}");
                let _ = writeln!(out, "ks_horizon = {ks_horizon}");
                let _ = writeln!(out, "alpha_times = {}", format_times(alpha_times));
                let _ = writeln!(out, "alpha_replicas = {alpha_replicas}");
                let _ = writeln!(out, "yaglom_t = {yaglom_t}");
                let _ = writeln!(out, "yaglom_replicas = {yaglom_replicas}");
                let _ = writeln!(out, "tv_threshold = {tv_threshold}");
                let _ = writeln!(out, "level = {level}");
                let _ = writeln!(out, "fit_start_below = {fit_start_below}");
                let _ = writeln!(out, "fit_min_survivors = {fit_min_survivors}");
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[output]");
        let _ = writeln!(out, "dir = {}", self.output.dir);
        let _ = writeln!(out, "keep_raw = {}", self.output.keep_raw);
        let _ = writeln!(out, "stamp = {}", self.output.stamp);
        out
    }
}

pub fn default_output_dir() -> String {
    std::env::var("CPSIM_OUT_DIR").unwrap_or_else(|_| "out".into())
}
