//! Forward contact-process evolution and the modulo-translation quotient.
//!
//! Two interchangeable engines produce the same realization:
//!
//! * [`evolve`] replays a fully materialized [`GraphicalEvents`] timeline,
//!   optionally recording the occupancy trajectory (needed by path and
//!   break-point constructions);
//! * [`simulate_lazy`] draws the per-lane event streams on demand through a
//!   priority queue, touching only lanes near the infection. For sparse
//!   configurations this is much cheaper than materializing the window, and
//!   because lane streams are keyed by lane identity alone, the realization
//!   is identical event for event.

use crate::graphical::{lane_stream, EventKind, GraphicalEvents, LaneId};
use crate::lattice::{Site, Window};
use crate::rng::Stream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A finite set of infected sites, kept sorted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    sites: Vec<Site>,
}

impl Configuration {
    pub fn new(mut sites: Vec<Site>) -> Self {
        sites.sort();
        sites.dedup();
        Configuration { sites }
    }

    pub fn empty() -> Self {
        Configuration { sites: Vec::new() }
    }

    pub fn singleton(site: Site) -> Self {
        Configuration { sites: vec![site] }
    }

    pub fn from_indices(window: &Window, indices: &[usize]) -> Self {
        Configuration::new(indices.iter().map(|&i| window.site_at(i)).collect())
    }

    /// Every site of the window.
    pub fn full(window: &Window) -> Self {
        Configuration {
            sites: window.iter_sites().collect(),
        }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }

    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        Configuration::new(sites)
    }

    /// Sites with all coordinates shifted by `by`.
    pub fn translate(&self, by: &Site) -> Configuration {
        Configuration {
            sites: self.sites.iter().map(|s| s.add(by)).collect(),
        }
    }

    /// Restrict to the closed ball `B_r(center)` in `ℓ∞`.
    pub fn intersect_ball(&self, center: &Site, r: i32) -> Configuration {
        Configuration {
            sites: self
                .sites
                .iter()
                .filter(|s| s.dist_inf(center) <= r)
                .cloned()
                .collect(),
        }
    }
}

/// Translation class of a finite configuration: the representative whose
/// lexicographic minimum sits at the origin. The empty class is the
/// absorbing sentinel.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalConfig {
    sites: Vec<Site>,
}

impl CanonicalConfig {
    pub fn empty() -> Self {
        CanonicalConfig { sites: Vec::new() }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn size(&self) -> usize {
        self.sites.len()
    }

    /// `ℓ∞` diameter of the representative.
    pub fn diameter(&self) -> i32 {
        if self.sites.is_empty() {
            return 0;
        }
        let dim = self.sites[0].dim();
        (0..dim)
            .map(|k| {
                let lo = self.sites.iter().map(|s| s.0[k]).min().unwrap();
                let hi = self.sites.iter().map(|s| s.0[k]).max().unwrap();
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    /// Rebuild a concrete configuration anchored at `anchor`.
    pub fn realize_at(&self, anchor: &Site) -> Configuration {
        Configuration::new(self.sites.iter().map(|s| s.add(anchor)).collect())
    }
}

/// Project onto the translation quotient: empty stays the sentinel,
/// otherwise shift so the lexicographic minimum is the origin.
pub fn canonical_form(c: &Configuration) -> CanonicalConfig {
    match c.sites().first() {
        None => CanonicalConfig::empty(),
        Some(min) => {
            let min = min.clone();
            CanonicalConfig {
                sites: c.sites().iter().map(|s| s.sub(&min)).collect(),
            }
        }
    }
}

/// Rotation quotient for ring configurations: among all `n` rotations pick
/// the one with the lexicographically least sorted site list. The result
/// always contains the origin, so it doubles as a translation-style
/// canonical representative.
pub fn ring_canonical_form(c: &Configuration, n: usize) -> CanonicalConfig {
    if c.is_empty() {
        return CanonicalConfig::empty();
    }
    let mut best: Option<Vec<Site>> = None;
    for r in 0..n {
        let mut rotated: Vec<Site> = c
            .sites()
            .iter()
            .map(|s| Site(vec![(s.0[0] + r as i32).rem_euclid(n as i32)]))
            .collect();
        rotated.sort();
        if best.as_ref().map_or(true, |b| rotated < *b) {
            best = Some(rotated);
        }
    }
    CanonicalConfig {
        sites: best.unwrap(),
    }
}

/// Canonicalize with respect to the window's symmetry group.
pub fn canonical_form_in(window: &Window, c: &Configuration) -> CanonicalConfig {
    match window {
        Window::BoxWindow { .. } => canonical_form(c),
        Window::Ring { len } => ring_canonical_form(c, *len),
    }
}

/// One occupancy change along a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryChange {
    pub position: u32,
    pub time: f64,
    pub site: u32,
    pub added: bool,
}

/// Event-resolution record of the evolution, for consumers that need the
/// occupied set as a function of time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub window: Window,
    pub start_time: f64,
    pub end_time: f64,
    pub initial: Vec<u32>,
    pub changes: Vec<TrajectoryChange>,
    pub events_fingerprint: u64,
}

impl Trajectory {
    /// Replay cursor starting at the initial occupancy.
    pub fn cursor(&self) -> TrajectoryCursor<'_> {
        let mut occupied = vec![false; self.window.site_count()];
        for &i in &self.initial {
            occupied[i as usize] = true;
        }
        TrajectoryCursor {
            traj: self,
            occupied,
            next: 0,
        }
    }
}

/// Forward-only replay of a trajectory; occupancy is right-continuous, so
/// `advance_to(s)` applies every change with `time ≤ s`.
pub struct TrajectoryCursor<'a> {
    traj: &'a Trajectory,
    occupied: Vec<bool>,
    next: usize,
}

impl<'a> TrajectoryCursor<'a> {
    pub fn advance_to(&mut self, s: f64) {
        while self.next < self.traj.changes.len() && self.traj.changes[self.next].time <= s {
            let ch = self.traj.changes[self.next];
            self.occupied[ch.site as usize] = ch.added;
            self.next += 1;
        }
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn is_occupied(&self, idx: usize) -> bool {
        self.occupied[idx]
    }
}

/// Outcome of an evolution run.
#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    pub config: Configuration,
    /// Infection touched the outermost shell of a box window at some point.
    pub contaminated: bool,
    pub trajectory: Option<Trajectory>,
}

/// Evolve `a` from time `s` to `t` on the realized events (timeline replay).
pub fn evolve(
    events: &GraphicalEvents,
    a: &Configuration,
    s: f64,
    t: f64,
) -> Result<Configuration> {
    Ok(evolve_full(events, a, s, t, false)?.config)
}

/// Evolution with contamination flag and optional trajectory recording.
pub fn evolve_full(
    events: &GraphicalEvents,
    a: &Configuration,
    s: f64,
    t: f64,
    record_trajectory: bool,
) -> Result<EvolveOutcome> {
    if s > t {
        return Err(Error::TimeOrdering(format!(
            "evolution start {s} after end {t}"
        )));
    }
    if t > events.horizon() + 1e-12 {
        return Err(Error::TimeOrdering(format!(
            "evolution end {t} beyond horizon {}",
            events.horizon()
        )));
    }
    let w = events.window();
    let mut occupied = vec![false; w.site_count()];
    let mut count = 0usize;
    let mut contaminated = false;
    let mut initial = Vec::with_capacity(a.len());
    for site in a.sites() {
        let idx = w.index_of(site).ok_or_else(|| {
            Error::InvalidParameter(format!("initial site {site:?} outside window"))
        })?;
        if !occupied[idx] {
            occupied[idx] = true;
            count += 1;
            initial.push(idx as u32);
            contaminated |= w.is_boundary(idx);
        }
    }
    initial.sort_unstable();
    let mut changes = Vec::new();
    let lo = events.position_after(s);
    let hi = events.position_after(t);
    for p in lo..hi {
        let ev = events.timeline()[p];
        match ev.kind {
            EventKind::Recovery { site } => {
                let i = site as usize;
                if occupied[i] {
                    occupied[i] = false;
                    count -= 1;
                    if record_trajectory {
                        changes.push(TrajectoryChange {
                            position: p as u32,
                            time: ev.time,
                            site,
                            added: false,
                        });
                    }
                }
            }
            EventKind::Arrow { from, to } => {
                let (f, g) = (from as usize, to as usize);
                if occupied[f] && !occupied[g] {
                    occupied[g] = true;
                    count += 1;
                    contaminated |= w.is_boundary(g);
                    if record_trajectory {
                        changes.push(TrajectoryChange {
                            position: p as u32,
                            time: ev.time,
                            site: to,
                            added: true,
                        });
                    }
                }
            }
        }
        if count == 0 && !record_trajectory {
            break;
        }
    }
    let config = Configuration::new(
        occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| w.site_at(i))
            .collect(),
    );
    Ok(EvolveOutcome {
        config,
        contaminated,
        trajectory: record_trajectory.then(|| Trajectory {
            window: w.clone(),
            start_time: s,
            end_time: t,
            initial,
            changes,
            events_fingerprint: events.fingerprint(),
        }),
    })
}

/// First time the evolved set is empty, or a survived-horizon marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Absorption {
    Absorbed(f64),
    SurvivedToHorizon,
}

impl Absorption {
    pub fn time_or(&self, fallback: f64) -> f64 {
        match self {
            Absorption::Absorbed(t) => *t,
            Absorption::SurvivedToHorizon => fallback,
        }
    }

    pub fn survived_past(&self, t: f64) -> bool {
        match self {
            Absorption::Absorbed(s) => *s > t,
            Absorption::SurvivedToHorizon => true,
        }
    }
}

/// Absorption time of the evolution started from `a` at time `s`.
pub fn absorption_time(events: &GraphicalEvents, a: &Configuration, s: f64) -> Result<Absorption> {
    if a.is_empty() {
        return Ok(Absorption::Absorbed(s));
    }
    let w = events.window();
    let mut occupied = vec![false; w.site_count()];
    let mut count = 0usize;
    for site in a.sites() {
        let idx = w.index_of(site).ok_or_else(|| {
            Error::InvalidParameter(format!("initial site {site:?} outside window"))
        })?;
        if !occupied[idx] {
            occupied[idx] = true;
            count += 1;
        }
    }
    for p in events.position_after(s)..events.len() {
        let ev = events.timeline()[p];
        match ev.kind {
            EventKind::Recovery { site } => {
                let i = site as usize;
                if occupied[i] {
                    occupied[i] = false;
                    count -= 1;
                    if count == 0 {
                        return Ok(Absorption::Absorbed(ev.time));
                    }
                }
            }
            EventKind::Arrow { from, to } => {
                let (f, g) = (from as usize, to as usize);
                if occupied[f] && !occupied[g] {
                    occupied[g] = true;
                    count += 1;
                }
            }
        }
    }
    Ok(Absorption::SurvivedToHorizon)
}

// ---------------------------------------------------------------------------
// Lazy engine
// ---------------------------------------------------------------------------

struct HeapEntry {
    time: f64,
    lane: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.lane == other.lane
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Min-heap by (time, lane): recovery lanes carry smaller ids, matching
    // the timeline tie-break of the eager engine.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.lane.cmp(&self.lane))
    }
}

/// Contamination accounting for a bounded window standing in for the
/// infinite lattice.
///
/// For a finite interior initial set the relevant failure is *outbound*:
/// the infection cloud touching the outermost shell means the true
/// process could differ beyond that moment. For a full-window start the
/// relevant failure is *inbound*: influence entering through the shell
/// could alter the observation region, so we track λ-reachability (arrows
/// only, recoveries ignored — a conservative over-flag) from the shell
/// into a centered observation ball.
#[derive(Clone, Copy, Debug, Default)]
pub struct LazyOptions {
    /// Track inbound boundary influence into the ball of this radius.
    /// Requires all lanes active, so every lane is activated up front;
    /// intended for full-occupancy starts.
    pub inbound_radius: Option<i32>,
}

/// Result of a lazy run.
#[derive(Clone, Debug)]
pub struct LazyOutcome {
    pub final_indices: Vec<u32>,
    /// Outbound flag: a boundary-shell site was infected (initially or by
    /// an arrow).
    pub touched_boundary: bool,
    /// Inbound flag, present when requested via [`LazyOptions`].
    pub inbound_contaminated: Option<bool>,
    pub absorbed_at: Option<f64>,
}

impl LazyOutcome {
    pub fn config(&self, window: &Window) -> Configuration {
        Configuration::new(
            self.final_indices
                .iter()
                .map(|&i| window.site_at(i as usize))
                .collect(),
        )
    }

    pub fn absorption(&self) -> Absorption {
        match self.absorbed_at {
            Some(t) => Absorption::Absorbed(t),
            None => Absorption::SurvivedToHorizon,
        }
    }

    /// The contamination flag relevant to the run's options.
    pub fn contaminated(&self) -> bool {
        self.inbound_contaminated.unwrap_or(self.touched_boundary)
    }
}

/// Evolve `initial` from time 0 to `t_end`, drawing lane streams lazily.
/// Produces the exact realization of [`crate::graphical::generate_events_in`]
/// with the same `(seed, replica)` on the same window.
pub fn simulate_lazy(
    window: &Window,
    lambda: f64,
    t_end: f64,
    seed: u64,
    replica: u64,
    initial: &Configuration,
) -> Result<LazyOutcome> {
    simulate_lazy_opts(
        window,
        lambda,
        t_end,
        seed,
        replica,
        initial,
        LazyOptions::default(),
    )
}

/// [`simulate_lazy`] with contamination-tracking options.
#[allow(clippy::too_many_arguments)]
pub fn simulate_lazy_opts(
    window: &Window,
    lambda: f64,
    t_end: f64,
    seed: u64,
    replica: u64,
    initial: &Configuration,
    opts: LazyOptions,
) -> Result<LazyOutcome> {
    let sites = window.site_count();
    let deg = window.out_degree();
    let lanes = sites * (deg + 1);
    // Lane id: site * (deg + 1) + slot, slot 0 = recovery, 1 + dir = arrow.
    // Recovery-before-arrow at equal times holds because slot 0 sorts first
    // within a site; across sites ties are broken by site order, consistent
    // with lane enumeration in the eager engine only up to permutations of
    // distinct sites, which cannot interact at equal times.
    let mut next_time: Vec<f64> = vec![f64::INFINITY; lanes];
    let mut streams: Vec<Option<Stream>> = Vec::new();
    streams.resize_with(lanes, || None);
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut occupied = vec![false; sites];
    let mut count = 0usize;
    let mut touched_boundary = false;

    // Inbound tracking: λ-reachable-from-shell set and observation ball.
    let mut inbound = opts.inbound_radius.map(|r| {
        let reachable: Vec<bool> = (0..sites).map(|i| window.is_boundary(i)).collect();
        let center = crate::lattice::Site::origin(window.dim());
        let in_obs: Vec<bool> = (0..sites)
            .map(|i| window.dist(&window.site_at(i), &center) <= r)
            .collect();
        let hit = reachable
            .iter()
            .zip(&in_obs)
            .any(|(&a, &b)| a && b);
        (reachable, in_obs, hit)
    });

    // Activating a lane at time `from` draws its stream from lane origin
    // and discards events at or before `from`: those fired while the site
    // was untracked and had no effect. This reproduces the eager replay of
    // the same lane realization exactly (up to zero-probability ties).
    let activate = |site_idx: usize,
                    from: f64,
                    heap: &mut BinaryHeap<HeapEntry>,
                    streams: &mut Vec<Option<Stream>>,
                    next_time: &mut Vec<f64>| {
        let base = site_idx * (deg + 1);
        if streams[base].is_some() {
            return;
        }
        let site = window.site_at(site_idx);
        let mut st = lane_stream(seed, replica, window, LaneId::Recovery(&site));
        let mut t0 = st.next_exp(1.0);
        while t0 <= from {
            t0 += st.next_exp(1.0);
        }
        streams[base] = Some(st);
        next_time[base] = t0;
        heap.push(HeapEntry {
            time: t0,
            lane: base as u32,
        });
        for dir in 0..deg {
            if window.arrow_target(site_idx, dir).is_none() {
                continue;
            }
            let mut st = lane_stream(seed, replica, window, LaneId::Arrow(&site, dir));
            let mut t0 = st.next_exp(lambda);
            while t0 <= from {
                t0 += st.next_exp(lambda);
            }
            let lane = base + 1 + dir;
            streams[lane] = Some(st);
            next_time[lane] = t0;
            heap.push(HeapEntry {
                time: t0,
                lane: lane as u32,
            });
        }
    };

    for site in initial.sites() {
        let idx = window.index_of(site).ok_or_else(|| {
            Error::InvalidParameter(format!("initial site {site:?} outside window"))
        })?;
        if !occupied[idx] {
            occupied[idx] = true;
            count += 1;
            touched_boundary |= window.is_boundary(idx);
            activate(idx, 0.0, &mut heap, &mut streams, &mut next_time);
        }
    }
    if inbound.is_some() {
        // λ-reachability needs every arrow event, so all lanes go live.
        for idx in 0..sites {
            activate(idx, 0.0, &mut heap, &mut streams, &mut next_time);
        }
    }

    let mut absorbed_at = if count == 0 { Some(0.0) } else { None };
    // With inbound tracking the sweep continues past absorption; the
    // λ-reachability set keeps evolving on empty occupancy.
    while absorbed_at.is_none() || inbound.is_some() {
        let entry = match heap.pop() {
            Some(e) => e,
            None => break,
        };
        if entry.time > t_end {
            // Not consumed; push back so the heap stays a faithful frontier.
            heap.push(entry);
            break;
        }
        let lane = entry.lane as usize;
        if entry.time != next_time[lane] {
            continue; // stale entry
        }
        // Refill the lane.
        let site_idx = lane / (deg + 1);
        let slot = lane % (deg + 1);
        let rate = if slot == 0 { 1.0 } else { lambda };
        let t1 = entry.time + streams[lane].as_mut().unwrap().next_exp(rate);
        next_time[lane] = t1;
        heap.push(HeapEntry {
            time: t1,
            lane: entry.lane,
        });

        if slot == 0 {
            if occupied[site_idx] {
                occupied[site_idx] = false;
                count -= 1;
                if count == 0 {
                    absorbed_at = Some(entry.time);
                }
            }
        } else {
            let dir = slot - 1;
            let target = window.arrow_target(site_idx, dir).unwrap();
            if let Some((reachable, in_obs, hit)) = inbound.as_mut() {
                if reachable[site_idx] && !reachable[target] {
                    reachable[target] = true;
                    *hit |= in_obs[target];
                }
            }
            if occupied[site_idx] && !occupied[target] {
                occupied[target] = true;
                count += 1;
                touched_boundary |= window.is_boundary(target);
                activate(target, entry.time, &mut heap, &mut streams, &mut next_time);
            }
        }
    }

    let final_indices = if absorbed_at.is_some() {
        Vec::new()
    } else {
        occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| i as u32)
            .collect()
    };
    Ok(LazyOutcome {
        final_indices,
        touched_boundary,
        inbound_contaminated: inbound.map(|(_, _, hit)| hit),
        absorbed_at,
    })
}

/// Inbound-influence check on a materialized event set: does any λ-path
/// from the boundary shell reach the centered ball of radius `obs_radius`
/// by time `t`? One forward pass over arrows; recoveries are ignored, so
/// the answer is a conservative contamination flag.
pub fn boundary_influence_reaches(
    events: &GraphicalEvents,
    obs_radius: i32,
    t: f64,
) -> bool {
    let w = events.window();
    let sites = w.site_count();
    let center = crate::lattice::Site::origin(w.dim());
    let mut reachable: Vec<bool> = (0..sites).map(|i| w.is_boundary(i)).collect();
    let in_obs: Vec<bool> = (0..sites)
        .map(|i| w.dist(&w.site_at(i), &center) <= obs_radius)
        .collect();
    if reachable.iter().zip(&in_obs).any(|(&a, &b)| a && b) {
        return true;
    }
    for ev in &events.timeline()[..events.position_after(t)] {
        if let EventKind::Arrow { from, to } = ev.kind {
            let (f, g) = (from as usize, to as usize);
            if reachable[f] && !reachable[g] {
                reachable[g] = true;
                if in_obs[g] {
                    return true;
                }
            }
        }
    }
    false
}
