//! Harris-style graphical construction on a bounded space-time window.
//!
//! The randomness of the dynamics is realized once as a family of Poisson
//! lanes: a rate-1 lane of *recovery marks* per site and a rate-λ lane of
//! *infection arrows* per directed nearest-neighbor edge. All evolutions,
//! path constructions and couplings are deterministic functions of this
//! event set.
//!
//! Time conventions. A path may occupy a site on a half-open interval
//! `(t0, t1]`; a recovery mark inside that interval kills it, a mark at
//! exactly `t0` does not. Simultaneous events have probability zero under
//! the construction; for hand-built fixtures the tie-break is the global
//! event index (recovery lanes enumerate before arrow lanes, then by lane
//! order), and every query below is defined with respect to that total
//! order.

use crate::lattice::{Coord, Site, Window};
use crate::rng::{self, Stream};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, Write};

/// Reference critical values `λ_c(d)`; experiments must stay strictly
/// below. The `d = 1` and `d = 2` entries are standard numerical values
/// for the nearest-neighbor model; for `d ≥ 3` we fall back to the
/// rigorous lower bound `1/(2d-1)`, which is conservative.
pub fn lambda_c_reference(dim: usize) -> f64 {
    match dim {
        0 => f64::NAN,
        1 => 1.6489,
        2 => 0.4119,
        d => 1.0 / (2.0 * d as f64 - 1.0),
    }
}

/// Parameters of one simulation realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dim: usize,
    pub lambda: f64,
    pub horizon: f64,
    pub window_radius: Coord,
    /// Good-point parameter; also drives the default window margin.
    pub beta: f64,
    pub seed: u64,
    pub replica_index: u64,
    /// Extra window slack beyond `⌈beta·horizon⌉`; defaults to twice that.
    pub margin: Option<Coord>,
}

impl SimParams {
    pub fn window(&self) -> Window {
        Window::boxed(self.dim, self.window_radius)
    }

    pub fn effective_margin(&self) -> Coord {
        self.margin
            .unwrap_or(2 * (self.beta * self.horizon).ceil() as Coord)
    }

    /// Basic structural validation.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be non-negative and finite, got {}",
                self.horizon
            )));
        }
        if self.window_radius < 1 {
            return Err(Error::InvalidParameter(format!(
                "window radius must be positive, got {}",
                self.window_radius
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        Ok(())
    }

    /// Validation for subcritical experiments: λ strictly below the
    /// reference critical value and a window wide enough that influence
    /// rarely reaches the boundary within the horizon.
    pub fn validate_subcritical(&self) -> Result<()> {
        self.validate()?;
        let lc = lambda_c_reference(self.dim);
        if self.lambda >= lc {
            return Err(Error::InvalidParameter(format!(
                "lambda {} is not below the reference critical value {} for d={}",
                self.lambda, lc, self.dim
            )));
        }
        let need = (self.beta * self.horizon).ceil() as Coord + self.effective_margin();
        if self.window_radius < need {
            return Err(Error::InvalidParameter(format!(
                "window radius {} below required ⌈beta·horizon⌉ + margin = {}",
                self.window_radius, need
            )));
        }
        Ok(())
    }
}

/// A point of the space-time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub site: Site,
    pub time: f64,
}

impl SpaceTimePoint {
    pub fn new(site: Site, time: f64) -> Self {
        SpaceTimePoint { site, time }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Recovery { site: u32 },
    Arrow { from: u32, to: u32 },
}

/// One realized event; its `index` is its position in the global timeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Lane identity used to derive per-lane random streams.
pub(crate) enum LaneId<'a> {
    Recovery(&'a Site),
    Arrow(&'a Site, usize),
}

pub(crate) fn lane_stream(seed: u64, replica: u64, window: &Window, lane: LaneId) -> Stream {
    let mut words: Vec<u64> = Vec::with_capacity(8);
    match window {
        Window::BoxWindow { dim, .. } => {
            words.push(0);
            words.push(*dim as u64);
        }
        Window::Ring { len } => {
            words.push(1);
            words.push(*len as u64);
        }
    }
    match lane {
        LaneId::Recovery(site) => {
            words.push(2);
            words.extend(site.0.iter().map(|&c| rng::coord_word(c)));
        }
        LaneId::Arrow(site, dir) => {
            words.push(3);
            words.extend(site.0.iter().map(|&c| rng::coord_word(c)));
            words.push(dir as u64);
        }
    }
    Stream::new(rng::derive_key(seed, replica, &words))
}

/// Draw one lane: strictly increasing exponential-spacing times in
/// `(0, horizon]`.
fn draw_lane(stream: &mut Stream, rate: f64, horizon: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += stream.next_exp(rate);
        if t > horizon {
            return times;
        }
        times.push(t);
    }
}

/// The realized event set on a window, with a global timeline and per-site
/// actor indices for path queries.
#[derive(Clone, Debug)]
pub struct GraphicalEvents {
    window: Window,
    horizon: f64,
    lambda: f64,
    recovery: Vec<Vec<f64>>,
    arrows: Vec<Vec<f64>>,
    timeline: Vec<Event>,
    /// For each site, timeline positions where the site acts: its own
    /// recovery marks and arrows out of it.
    site_events: Vec<Vec<u32>>,
    fingerprint: u64,
}

impl GraphicalEvents {
    fn assemble(
        window: Window,
        horizon: f64,
        lambda: f64,
        recovery: Vec<Vec<f64>>,
        arrows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let sites = window.site_count();
        let deg = window.out_degree();
        // Lane order: all recovery lanes first, then arrow lanes.
        let mut tagged: Vec<(f64, usize, EventKind)> = Vec::new();
        for (s, lane) in recovery.iter().enumerate() {
            for ts in lane.windows(2) {
                if ts[1] <= ts[0] {
                    return Err(Error::InvalidParameter(
                        "recovery lane times must be strictly increasing".into(),
                    ));
                }
            }
            for &t in lane {
                if t < 0.0 || t > horizon {
                    return Err(Error::InvalidParameter(format!(
                        "event time {t} outside [0, {horizon}]"
                    )));
                }
                tagged.push((t, s, EventKind::Recovery { site: s as u32 }));
            }
        }
        for (lane_idx, lane) in arrows.iter().enumerate() {
            let from = lane_idx / deg;
            let dir = lane_idx % deg;
            if lane.is_empty() {
                continue;
            }
            let to = window.arrow_target(from, dir).ok_or_else(|| {
                Error::InvalidParameter("arrow lane points outside the window".into())
            })?;
            for ts in lane.windows(2) {
                if ts[1] <= ts[0] {
                    return Err(Error::InvalidParameter(
                        "arrow lane times must be strictly increasing".into(),
                    ));
                }
            }
            for &t in lane {
                if t < 0.0 || t > horizon {
                    return Err(Error::InvalidParameter(format!(
                        "event time {t} outside [0, {horizon}]"
                    )));
                }
                tagged.push((
                    t,
                    sites + lane_idx,
                    EventKind::Arrow {
                        from: from as u32,
                        to: to as u32,
                    },
                ));
            }
        }
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let timeline: Vec<Event> = tagged
            .into_iter()
            .map(|(time, _, kind)| Event { time, kind })
            .collect();
        let mut site_events = vec![Vec::new(); sites];
        let mut fp = rng::mix64(0x6776_0000 ^ sites as u64);
        for (pos, ev) in timeline.iter().enumerate() {
            let actor = match ev.kind {
                EventKind::Recovery { site } => {
                    fp = rng::mix64(fp ^ ev.time.to_bits() ^ (site as u64));
                    site
                }
                EventKind::Arrow { from, to } => {
                    fp = rng::mix64(fp ^ ev.time.to_bits() ^ ((from as u64) << 32 | to as u64));
                    from
                }
            };
            site_events[actor as usize].push(pos as u32);
        }
        Ok(GraphicalEvents {
            window,
            horizon,
            lambda,
            recovery,
            arrows,
            timeline,
            site_events,
            fingerprint: fp,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn timeline(&self) -> &[Event] {
        &self.timeline
    }

    pub fn len(&self) -> usize {
        self.timeline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timeline.is_empty()
    }

    /// First timeline position with `time > t`.
    pub fn position_after(&self, t: f64) -> usize {
        self.timeline.partition_point(|e| e.time <= t)
    }

    pub fn recovery_lane(&self, site_idx: usize) -> &[f64] {
        &self.recovery[site_idx]
    }

    pub fn arrow_lane(&self, from_idx: usize, dir: usize) -> &[f64] {
        &self.arrows[from_idx * self.window.out_degree() + dir]
    }

    /// Timeline positions where `site` acts (recovers or emits an arrow).
    pub fn acting_positions(&self, site_idx: usize) -> &[u32] {
        &self.site_events[site_idx]
    }

    /// Identity of this realization; used to detect mismatched inputs.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Debug dump, one JSON object per line.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, ev) in self.timeline.iter().enumerate() {
            let rec = match ev.kind {
                EventKind::Recovery { site } => EventRecord {
                    index: i,
                    kind: "recovery".into(),
                    site: Some(self.window.site_at(site as usize)),
                    from: None,
                    to: None,
                    time: ev.time,
                },
                EventKind::Arrow { from, to } => EventRecord {
                    index: i,
                    kind: "arrow".into(),
                    site: None,
                    from: Some(self.window.site_at(from as usize)),
                    to: Some(self.window.site_at(to as usize)),
                    time: ev.time,
                },
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Load a fixture previously written by [`dump_jsonl`](Self::dump_jsonl).
    pub fn load_jsonl<R: BufRead>(
        window: Window,
        horizon: f64,
        lambda: f64,
        input: R,
    ) -> Result<Self> {
        let mut builder = FixtureBuilder::new(window, horizon).lambda(lambda);
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EventRecord = serde_json::from_str(&line)?;
            match rec.kind.as_str() {
                "recovery" => {
                    let site = rec.site.ok_or_else(|| {
                        Error::InvalidParameter("recovery record missing site".into())
                    })?;
                    builder = builder.recovery(site, rec.time);
                }
                "arrow" => {
                    let from = rec
                        .from
                        .ok_or_else(|| Error::InvalidParameter("arrow record missing from".into()))?;
                    let to = rec
                        .to
                        .ok_or_else(|| Error::InvalidParameter("arrow record missing to".into()))?;
                    builder = builder.arrow(from, to, rec.time);
                }
                k => {
                    return Err(Error::InvalidParameter(format!("unknown event kind {k}")));
                }
            }
        }
        builder.build()
    }
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    index: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    site: Option<Site>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<Site>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<Site>,
    time: f64,
}

/// Generate the full event set for a box window described by `params`.
pub fn generate_events(params: &SimParams) -> Result<GraphicalEvents> {
    params.validate()?;
    generate_events_in(
        &params.window(),
        params.lambda,
        params.horizon,
        params.seed,
        params.replica_index,
    )
}

/// Generate events on an arbitrary window (box or ring).
pub fn generate_events_in(
    window: &Window,
    lambda: f64,
    horizon: f64,
    seed: u64,
    replica: u64,
) -> Result<GraphicalEvents> {
    if !(lambda > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(
            "lambda must be positive, horizon non-negative finite".into(),
        ));
    }
    let sites = window.site_count();
    let deg = window.out_degree();
    let mut recovery = Vec::with_capacity(sites);
    let mut arrows = vec![Vec::new(); sites * deg];
    for idx in 0..sites {
        let site = window.site_at(idx);
        let mut st = lane_stream(seed, replica, window, LaneId::Recovery(&site));
        recovery.push(draw_lane(&mut st, 1.0, horizon));
        for dir in 0..deg {
            if window.arrow_target(idx, dir).is_none() {
                continue;
            }
            let mut st = lane_stream(seed, replica, window, LaneId::Arrow(&site, dir));
            arrows[idx * deg + dir] = draw_lane(&mut st, lambda, horizon);
        }
    }
    GraphicalEvents::assemble(window.clone(), horizon, lambda, recovery, arrows)
}

/// Hand-built event sets for tests and fixtures.
#[derive(Clone, Debug)]
pub struct FixtureBuilder {
    window: Window,
    horizon: f64,
    lambda: f64,
    recoveries: Vec<(Site, f64)>,
    arrows: Vec<(Site, Site, f64)>,
}

impl FixtureBuilder {
    pub fn new(window: Window, horizon: f64) -> Self {
        FixtureBuilder {
            window,
            horizon,
            lambda: 1.0,
            recoveries: Vec::new(),
            arrows: Vec::new(),
        }
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn recovery(mut self, site: Site, time: f64) -> Self {
        self.recoveries.push((site, time));
        self
    }

    pub fn arrow(mut self, from: Site, to: Site, time: f64) -> Self {
        self.arrows.push((from, to, time));
        self
    }

    pub fn build(self) -> Result<GraphicalEvents> {
        let sites = self.window.site_count();
        let deg = self.window.out_degree();
        let mut recovery = vec![Vec::new(); sites];
        let mut arrows = vec![Vec::new(); sites * deg];
        for (site, t) in &self.recoveries {
            let idx = self.window.index_of(site).ok_or_else(|| {
                Error::InvalidParameter(format!("recovery site {site:?} outside window"))
            })?;
            recovery[idx].push(*t);
        }
        for (from, to, t) in &self.arrows {
            let fi = self.window.index_of(from).ok_or_else(|| {
                Error::InvalidParameter(format!("arrow source {from:?} outside window"))
            })?;
            let ti = self.window.index_of(to).ok_or_else(|| {
                Error::InvalidParameter(format!("arrow target {to:?} outside window"))
            })?;
            let dir = (0..deg)
                .find(|&d| self.window.arrow_target(fi, d) == Some(ti))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "sites {from:?} and {to:?} are not nearest neighbors"
                    ))
                })?;
            arrows[fi * deg + dir].push(*t);
        }
        for lane in recovery.iter_mut().chain(arrows.iter_mut()) {
            lane.sort_by(f64::total_cmp);
        }
        GraphicalEvents::assemble(self.window, self.horizon, self.lambda, recovery, arrows)
    }
}

/// Is there an open path from `from` to `to`? Direct depth-first search
/// over the event structure; recovery marks block on half-open intervals,
/// arrows branch. Independent of the reachability sweep, so the two can
/// cross-check each other.
pub fn open_path_exists(
    events: &GraphicalEvents,
    from: &SpaceTimePoint,
    to: &SpaceTimePoint,
) -> Result<bool> {
    if from.time > to.time {
        return Err(Error::TimeOrdering(format!(
            "path start time {} exceeds end time {}",
            from.time, to.time
        )));
    }
    let w = events.window();
    let from_idx = w
        .index_of(&from.site)
        .ok_or_else(|| Error::InvalidParameter("path start outside window".into()))? as u32;
    let to_idx = w
        .index_of(&to.site)
        .ok_or_else(|| Error::InvalidParameter("path end outside window".into()))? as u32;
    let end_pos = events.position_after(to.time) as u32;
    let start_pos = events.position_after(from.time) as u32;

    let mut visited: HashSet<(u32, u32)> = HashSet::new();
    let mut stack = vec![(from_idx, start_pos)];
    while let Some((x, p)) = stack.pop() {
        if !visited.insert((x, p)) {
            continue;
        }
        let acts = events.acting_positions(x as usize);
        let start = acts.partition_point(|&q| q < p);
        let mut alive = true;
        for &q in &acts[start..] {
            if q >= end_pos {
                break;
            }
            match events.timeline()[q as usize].kind {
                EventKind::Recovery { .. } => {
                    alive = false;
                    break;
                }
                EventKind::Arrow { to: y, .. } => {
                    stack.push((y, q + 1));
                }
            }
        }
        if alive && x == to_idx {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Answers "(x, s) reaches the target set at the target time" for every
/// space-time point at once, built by one backward sweep over the
/// timeline. Membership is stored as a piecewise-constant function of the
/// timeline position, so queries cost one binary search.
#[derive(Clone, Debug)]
pub struct ReachabilityIndex {
    window: Window,
    target_sites: Vec<u32>,
    target_time: f64,
    event_times: Vec<f64>,
    /// Per site, ascending `(pos, value)`: membership for positions `q`
    /// equals the value at the smallest stored `pos ≥ q`.
    segments: Vec<Vec<(u32, bool)>>,
    events_fingerprint: u64,
}

impl ReachabilityIndex {
    pub fn target_time(&self) -> f64 {
        self.target_time
    }

    pub fn target_sites(&self) -> &[u32] {
        &self.target_sites
    }

    pub fn events_fingerprint(&self) -> u64 {
        self.events_fingerprint
    }

    fn is_target(&self, site: u32) -> bool {
        self.target_sites.binary_search(&site).is_ok()
    }

    /// Reachability when all timeline events at positions `≥ pos` (and time
    /// within the target horizon) are available.
    pub fn reachable_from_position(&self, site_idx: usize, pos: u32) -> bool {
        let segs = &self.segments[site_idx];
        match segs.binary_search_by(|&(p, _)| p.cmp(&pos)) {
            Ok(i) => segs[i].1,
            Err(i) => {
                if i < segs.len() {
                    segs[i].1
                } else {
                    self.is_target(site_idx as u32)
                }
            }
        }
    }

    /// Does `(site, time) ⇝ target`? Events strictly after `time` are
    /// available.
    pub fn reachable_at(&self, site: &Site, time: f64) -> bool {
        assert!(
            time <= self.target_time,
            "reachability query at {} past target time {}",
            time,
            self.target_time
        );
        let idx = match self.window.index_of(site) {
            Some(i) => i,
            None => return false,
        };
        let pos = self.event_times.partition_point(|&t| t <= time) as u32;
        self.reachable_from_position(idx, pos)
    }
}

/// Build the backward-reachability index for `target_sites × {target_time}`.
pub fn backward_reachable_set(
    events: &GraphicalEvents,
    target_sites: &[Site],
    target_time: f64,
) -> Result<ReachabilityIndex> {
    if target_time > events.horizon() {
        return Err(Error::TimeOrdering(format!(
            "target time {} beyond horizon {}",
            target_time,
            events.horizon()
        )));
    }
    let w = events.window();
    let mut targets = Vec::with_capacity(target_sites.len());
    for s in target_sites {
        let idx = w
            .index_of(s)
            .ok_or_else(|| Error::InvalidParameter(format!("target site {s:?} outside window")))?;
        targets.push(idx as u32);
    }
    targets.sort_unstable();
    targets.dedup();

    let sites = w.site_count();
    let end_pos = events.position_after(target_time);
    let mut member = vec![false; sites];
    for &t in &targets {
        member[t as usize] = true;
    }
    // Collected in descending position order, reversed at the end.
    let mut segments: Vec<Vec<(u32, bool)>> = vec![Vec::new(); sites];
    for p in (0..end_pos).rev() {
        let ev = &events.timeline()[p];
        match ev.kind {
            EventKind::Recovery { site } => {
                let s = site as usize;
                if member[s] {
                    member[s] = false;
                    segments[s].push((p as u32, false));
                }
            }
            EventKind::Arrow { from, to } => {
                let f = from as usize;
                let new = member[f] || member[to as usize];
                if new != member[f] {
                    member[f] = new;
                    segments[f].push((p as u32, new));
                }
            }
        }
    }
    for segs in &mut segments {
        segs.reverse();
    }
    Ok(ReachabilityIndex {
        window: w.clone(),
        target_sites: targets,
        target_time,
        event_times: events.timeline().iter().map(|e| e.time).collect(),
        segments,
        events_fingerprint: events.fingerprint(),
    })
}

/// Maximum number of jumps over all λ-paths (recovery marks ignored)
/// starting at `from` within `[from.time, from.time + duration]`, by a
/// forward dynamic program over arrows in timeline order.
///
/// Errors with [`Error::WindowOverflow`] as soon as a λ-path reaches the
/// outermost shell of a box window, since jumps continuing outside the
/// window would be invisible.
pub fn max_lambda_path_jumps(
    events: &GraphicalEvents,
    from: &SpaceTimePoint,
    duration: f64,
) -> Result<u64> {
    if from.time + duration > events.horizon() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "λ-path horizon {} beyond event horizon {}",
            from.time + duration,
            events.horizon()
        )));
    }
    let w = events.window();
    let from_idx = w
        .index_of(&from.site)
        .ok_or_else(|| Error::InvalidParameter("λ-path start outside window".into()))?;
    if w.is_boundary(from_idx) {
        return Err(Error::WindowOverflow(
            "λ-path starts on the window boundary".into(),
        ));
    }
    let mut jumps: Vec<i64> = vec![-1; w.site_count()];
    jumps[from_idx] = 0;
    let mut best: i64 = 0;
    let lo = events.position_after(from.time);
    let hi = events.position_after(from.time + duration);
    for ev in &events.timeline()[lo..hi] {
        if let EventKind::Arrow { from: x, to: y } = ev.kind {
            let (x, y) = (x as usize, y as usize);
            if jumps[x] >= 0 && jumps[x] + 1 > jumps[y] {
                jumps[y] = jumps[x] + 1;
                if w.is_boundary(y) {
                    return Err(Error::WindowOverflow(format!(
                        "λ-path reached window boundary at site {:?}",
                        w.site_at(y)
                    )));
                }
                best = best.max(jumps[y]);
            }
        }
    }
    Ok(best as u64)
}

/// Evolve two nested initial sets on the same realization; the coupling is
/// monotone, so the first component stays inside the second.
pub fn coupled_evolve(
    events: &GraphicalEvents,
    a: &crate::process::Configuration,
    b: &crate::process::Configuration,
    s: f64,
    t: f64,
) -> Result<(crate::process::Configuration, crate::process::Configuration)> {
    if !a.is_subset_of(b) {
        return Err(Error::Usage(
            "coupled_evolve requires the first initial set to be contained in the second".into(),
        ));
    }
    let ea = crate::process::evolve(events, a, s, t)?;
    let eb = crate::process::evolve(events, b, s, t)?;
    Ok((ea, eb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Site, Window};

    fn p1(seed: u64, replica: u64) -> SimParams {
        SimParams {
            dim: 1,
            lambda: 1.0,
            horizon: 10.0,
            window_radius: 50,
            beta: 2.0,
            seed,
            replica_index: replica,
            margin: None,
        }
    }

    #[test]
    fn zero_horizon_means_no_events() {
        let mut p = p1(1, 0);
        p.horizon = 0.0;
        let ev = generate_events(&p).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn negative_horizon_rejected() {
        let mut p = p1(1, 0);
        p.horizon = -1.0;
        assert!(generate_events(&p).is_err());
        p.horizon = 1.0;
        p.window_radius = 0;
        assert!(generate_events(&p).is_err());
    }

    #[test]
    fn same_seed_and_replica_is_bit_identical() {
        let a = generate_events(&p1(99, 7)).unwrap();
        let b = generate_events(&p1(99, 7)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.timeline().iter().zip(b.timeline()) {
            assert_eq!(x.time.to_bits(), y.time.to_bits());
            assert_eq!(x.kind, y.kind);
        }
        let c = generate_events(&p1(99, 8)).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn window_enlargement_preserves_existing_lanes() {
        let small = generate_events(&p1(5, 0)).unwrap();
        let mut big_params = p1(5, 0);
        big_params.window_radius = 60;
        let big = generate_events(&big_params).unwrap();
        let ws = small.window().clone();
        for idx in 0..ws.site_count() {
            let site = ws.site_at(idx);
            let big_idx = big.window().index_of(&site).unwrap();
            assert_eq!(small.recovery_lane(idx), big.recovery_lane(big_idx));
        }
    }

    #[test]
    fn mean_recovery_count_matches_rate() {
        // d=1, λ=1, t=10: recovery lane count per site has mean 10.
        let mut total = 0u64;
        let mut lanes = 0u64;
        let replicas = 400;
        for r in 0..replicas {
            let mut p = p1(123, r);
            p.window_radius = 10;
            let ev = generate_events(&p).unwrap();
            for idx in 0..ev.window().site_count() {
                total += ev.recovery_lane(idx).len() as u64;
                lanes += 1;
            }
        }
        let mean = total as f64 / lanes as f64;
        let sigma = (10.0f64 / lanes as f64).sqrt();
        assert!(
            (mean - 10.0).abs() < 3.0 * sigma,
            "mean {mean}, band {}",
            3.0 * sigma
        );
    }

    #[test]
    fn recovery_lane_counts_pass_poisson_chi_square() {
        // Per-lane recovery counts over many replicas against Poisson(t).
        let mut counts = Vec::new();
        for r in 0..10_000u64 {
            let mut p = p1(2024, r);
            p.window_radius = 1;
            p.horizon = 3.0;
            let ev = generate_events(&p).unwrap();
            counts.push(ev.recovery_lane(1).len() as u64);
        }
        let report = crate::stats::poisson_gof_test("recovery lane", &counts, 3.0, 0.01).unwrap();
        assert!(report.passed, "{report:?}");
        // Arrow lanes at rate λ·t.
        let mut acounts = Vec::new();
        for r in 0..10_000u64 {
            let mut p = p1(77, r);
            p.window_radius = 1;
            p.horizon = 3.0;
            p.lambda = 0.8;
            let ev = generate_events(&p).unwrap();
            acounts.push(ev.arrow_lane(1, 0).len() as u64);
        }
        let report = crate::stats::poisson_gof_test("arrow lane", &acounts, 2.4, 0.01).unwrap();
        assert!(report.passed, "{report:?}");
    }

    fn two_site_fixture() -> GraphicalEvents {
        // Arrow 0→1 at time 1, recovery at (0, 2).
        FixtureBuilder::new(Window::boxed(1, 3), 5.0)
            .arrow(Site(vec![0]), Site(vec![1]), 1.0)
            .recovery(Site(vec![0]), 2.0)
            .build()
            .unwrap()
    }

    #[test]
    fn open_path_basic_cases() {
        let w = Window::boxed(1, 3);
        let empty = FixtureBuilder::new(w.clone(), 5.0).build().unwrap();
        let at = |x: i32, t: f64| SpaceTimePoint::new(Site(vec![x]), t);
        assert!(open_path_exists(&empty, &at(0, 0.0), &at(0, 5.0)).unwrap());
        assert!(!open_path_exists(&empty, &at(0, 0.0), &at(1, 5.0)).unwrap());

        let blocked = FixtureBuilder::new(w.clone(), 5.0)
            .recovery(Site(vec![0]), 2.0)
            .build()
            .unwrap();
        assert!(!open_path_exists(&blocked, &at(0, 0.0), &at(0, 5.0)).unwrap());
        // Departing before the mark is fine.
        assert!(open_path_exists(&blocked, &at(0, 0.0), &at(0, 1.5)).unwrap());

        let ev = two_site_fixture();
        assert!(open_path_exists(&ev, &at(0, 0.0), &at(1, 5.0)).unwrap());
        assert!(!open_path_exists(&ev, &at(0, 0.0), &at(0, 5.0)).unwrap());
        assert!(open_path_exists(&ev, &at(0, 1.5), &at(0, 2.0)).unwrap() == false);
        assert!(open_path_exists(&ev, &at(1, 1.0), &at(1, 5.0)).unwrap());

        assert!(matches!(
            open_path_exists(&ev, &at(0, 3.0), &at(0, 1.0)),
            Err(Error::TimeOrdering(_))
        ));
    }

    #[test]
    fn reachability_empty_events_targets_only() {
        let w = Window::boxed(1, 3);
        let empty = FixtureBuilder::new(w, 5.0).build().unwrap();
        let idx = backward_reachable_set(&empty, &[Site(vec![0])], 5.0).unwrap();
        assert!(idx.reachable_at(&Site(vec![0]), 0.0));
        assert!(idx.reachable_at(&Site(vec![0]), 5.0));
        assert!(!idx.reachable_at(&Site(vec![1]), 0.0));
    }

    #[test]
    fn reachability_blocked_lane_unless_arrow_route() {
        // Recovery at (0,3), target {0} at 5: below time 3 site 0 is cut off.
        let w = Window::boxed(1, 3);
        let ev = FixtureBuilder::new(w, 6.0)
            .recovery(Site(vec![0]), 3.0)
            .build()
            .unwrap();
        let idx = backward_reachable_set(&ev, &[Site(vec![0])], 5.0).unwrap();
        assert!(!idx.reachable_at(&Site(vec![0]), 2.0));
        assert!(idx.reachable_at(&Site(vec![0]), 3.0));
        // An arrow detour 0→1 at 1, 1→0 at 4 restores reachability from below.
        let ev2 = FixtureBuilder::new(Window::boxed(1, 3), 6.0)
            .recovery(Site(vec![0]), 3.0)
            .arrow(Site(vec![0]), Site(vec![1]), 1.0)
            .arrow(Site(vec![1]), Site(vec![0]), 4.0)
            .build()
            .unwrap();
        let idx2 = backward_reachable_set(&ev2, &[Site(vec![0])], 5.0).unwrap();
        assert!(idx2.reachable_at(&Site(vec![0]), 0.5));
    }

    #[test]
    fn reachability_agrees_with_open_path_on_random_instances() {
        let mut checked = 0u32;
        for seed in 0..40u64 {
            let p = SimParams {
                dim: 1,
                lambda: 1.3,
                horizon: 4.0,
                window_radius: 4,
                beta: 2.0,
                seed: 1000 + seed,
                replica_index: 0,
                margin: None,
            };
            let ev = generate_events(&p).unwrap();
            let target = Site(vec![(seed % 3) as i32 - 1]);
            let ridx = backward_reachable_set(&ev, &[target.clone()], 4.0).unwrap();
            let mut qs = Stream::new(seed.wrapping_mul(31) + 5);
            for _ in 0..25 {
                let x = qs.next_index(9) as i32 - 4;
                let s = qs.next_range(0.0, 4.0);
                let from = SpaceTimePoint::new(Site(vec![x]), s);
                let to = SpaceTimePoint::new(target.clone(), 4.0);
                let direct = open_path_exists(&ev, &from, &to).unwrap();
                assert_eq!(
                    ridx.reachable_at(&from.site, s),
                    direct,
                    "mismatch at {from:?} seed {seed}"
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn lambda_path_jump_examples() {
        let w = Window::boxed(1, 6);
        let at = |x: i32, t: f64| SpaceTimePoint::new(Site(vec![x]), t);
        let empty = FixtureBuilder::new(w.clone(), 5.0).build().unwrap();
        assert_eq!(max_lambda_path_jumps(&empty, &at(0, 0.0), 5.0).unwrap(), 0);

        // Chain of 3 forward arrows: recovery marks are ignored by λ-paths.
        let chain = FixtureBuilder::new(w.clone(), 5.0)
            .arrow(Site(vec![0]), Site(vec![1]), 1.0)
            .arrow(Site(vec![1]), Site(vec![2]), 2.0)
            .arrow(Site(vec![2]), Site(vec![3]), 3.0)
            .recovery(Site(vec![0]), 0.5)
            .recovery(Site(vec![1]), 1.5)
            .build()
            .unwrap();
        assert_eq!(max_lambda_path_jumps(&chain, &at(0, 0.0), 5.0).unwrap(), 3);

        // Back and forth counts both jumps.
        let pingpong = FixtureBuilder::new(w.clone(), 5.0)
            .arrow(Site(vec![0]), Site(vec![1]), 1.0)
            .arrow(Site(vec![1]), Site(vec![0]), 2.0)
            .build()
            .unwrap();
        assert_eq!(
            max_lambda_path_jumps(&pingpong, &at(0, 0.0), 5.0).unwrap(),
            2
        );

        // Arrows before the start or after the duration do not count.
        assert_eq!(
            max_lambda_path_jumps(&chain, &at(0, 1.5), 1.0).unwrap(),
            0
        );
    }

    #[test]
    fn lambda_path_boundary_overflow() {
        let w = Window::boxed(1, 2);
        let ev = FixtureBuilder::new(w, 5.0)
            .arrow(Site(vec![0]), Site(vec![1]), 1.0)
            .arrow(Site(vec![1]), Site(vec![2]), 2.0)
            .build()
            .unwrap();
        let from = SpaceTimePoint::new(Site(vec![0]), 0.0);
        assert!(matches!(
            max_lambda_path_jumps(&ev, &from, 5.0),
            Err(Error::WindowOverflow(_))
        ));
    }

    #[test]
    fn jsonl_roundtrip() {
        let ev = two_site_fixture();
        let mut buf = Vec::new();
        ev.dump_jsonl(&mut buf).unwrap();
        let loaded = GraphicalEvents::load_jsonl(
            ev.window().clone(),
            ev.horizon(),
            ev.lambda(),
            std::io::BufReader::new(buf.as_slice()),
        )
        .unwrap();
        assert_eq!(loaded.fingerprint(), ev.fingerprint());
    }
}
