//! Path constructions on the realized event set: the canonical minimal
//! path to a space-time target, its first break point, good-point
//! classification, and favorable time intervals.
//!
//! The minimal path starts at the highest-priority initial site whose
//! infection reaches the target and then resolves every outgoing arrow of
//! the current site with a four-way rule: jump to a higher-priority site
//! when that site still reaches the target (`a`), refuse a jump to a
//! higher-priority site that does not (`b`), stay on a higher-priority
//! current site that still reaches the target (`c`), and otherwise follow
//! the arrow because staying would strand the path (`d`).

use crate::graphical::{max_lambda_path_jumps, EventKind, GraphicalEvents, ReachabilityIndex, SpaceTimePoint};
use crate::lattice::{PriorityOrder, Site};
use crate::process::{Configuration, Trajectory};
use crate::{Error, Result};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

/// Branch decision recorded at each step of the minimal path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepCase {
    /// The starting site at time 0.
    #[serde(rename = "start")]
    Start,
    /// Case `a`: arrow to a higher-priority site that reaches the target.
    #[serde(rename = "a")]
    JumpToHigher,
    /// Case `b`: arrow to a higher-priority site that does not reach it.
    #[serde(rename = "b")]
    StayHigherUnreachable,
    /// Case `c`: current site has priority and still reaches the target.
    #[serde(rename = "c")]
    StayConnected,
    /// Case `d`: staying would strand the path, so the arrow is followed.
    #[serde(rename = "d")]
    JumpForced,
    /// Final vertical segment meeting the target.
    #[serde(rename = "terminal")]
    Terminal,
}

impl StepCase {
    pub fn is_jump(self) -> bool {
        matches!(self, StepCase::JumpToHigher | StepCase::JumpForced)
    }
}

/// One step of a [`WorkPath`]: the site occupied from `entry_time` on.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct PathStep {
    pub site: Site,
    pub entry_time: f64,
    pub case: StepCase,
}

impl Serialize for PathStep {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(3))?;
        seq.serialize_element(&self.site)?;
        seq.serialize_element(&self.entry_time)?;
        seq.serialize_element(&self.case)?;
        seq.end()
    }
}

/// The minimal path: start site, the step sequence (stays included, one
/// step per outgoing arrow of the current site), and the target time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkPath {
    pub start: Site,
    pub target_time: f64,
    pub steps: Vec<PathStep>,
}

impl WorkPath {
    /// Site occupied at time `s` (right-continuous step function).
    pub fn site_at(&self, s: f64) -> &Site {
        let mut cur = &self.steps[0].site;
        for step in &self.steps {
            if step.entry_time <= s {
                cur = &step.site;
            } else {
                break;
            }
        }
        cur
    }

    /// Times of actual site changes (horizontal segments).
    pub fn jump_times(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.case.is_jump())
            .map(|s| s.entry_time)
            .collect()
    }

    pub fn jump_count(&self) -> usize {
        self.steps.iter().filter(|s| s.case.is_jump()).count()
    }
}

/// Build the minimal path from `a × {0}` to the target of `index`.
/// Returns `None` when no initial site reaches the target.
pub fn minimal_path(
    events: &GraphicalEvents,
    a: &Configuration,
    index: &ReachabilityIndex,
    order: &PriorityOrder,
) -> Result<Option<WorkPath>> {
    if a.is_empty() {
        return Err(Error::InvalidParameter(
            "minimal path needs a non-empty initial set".into(),
        ));
    }
    if index.events_fingerprint() != events.fingerprint() {
        return Err(Error::Usage(
            "reachability index was built for a different event realization".into(),
        ));
    }
    let w = events.window();
    let target_time = index.target_time();

    // Highest-priority site of `a` whose infection reaches the target.
    let mut start: Option<(usize, &Site)> = None;
    for site in a.sites() {
        if w.index_of(site).is_none() {
            return Err(Error::InvalidParameter(format!(
                "initial site {site:?} outside window"
            )));
        }
        if !index.reachable_at(site, 0.0) {
            continue;
        }
        match start {
            Some((_, best)) if !order.precedes(site, best) => {}
            _ => start = Some((w.index_of(site).unwrap(), site)),
        }
    }
    let (start_idx, start_site) = match start {
        Some(s) => s,
        None => return Ok(None),
    };

    let mut steps = vec![PathStep {
        site: start_site.clone(),
        entry_time: 0.0,
        case: StepCase::Start,
    }];
    let mut cur = start_idx;
    let mut pos = events.position_after(0.0) as u32;
    let end_pos = events.position_after(target_time) as u32;
    let is_target = |idx: usize| index.target_sites().binary_search(&(idx as u32)).is_ok();

    loop {
        // Next event in which the current site acts, at or after `pos`.
        let acts = events.acting_positions(cur);
        let from = acts.partition_point(|&q| q < pos);
        let mut next_arrow: Option<(u32, u32, f64)> = None; // (position, to, time)
        for &q in &acts[from..] {
            let ev = events.timeline()[q as usize];
            match ev.kind {
                EventKind::Recovery { .. } => {
                    if q < end_pos {
                        // The construction invariant guarantees the current
                        // site reaches the target, so a recovery cannot
                        // precede the next decision point.
                        assert!(
                            is_target(cur),
                            "minimal path invariant violated: recovery before next arrow"
                        );
                    }
                    break;
                }
                EventKind::Arrow { to, .. } => {
                    next_arrow = Some((q, to, ev.time));
                    break;
                }
            }
        }

        // Terminal rule: the vertical segment from here meets the target
        // slab before the next outgoing arrow.
        let terminal = match next_arrow {
            None => true,
            Some((q, _, _)) => q >= end_pos,
        };
        if terminal {
            assert!(
                is_target(cur) && index.reachable_from_position(cur, pos),
                "minimal path invariant violated at terminal step"
            );
            steps.push(PathStep {
                site: w.site_at(cur),
                entry_time: target_time,
                case: StepCase::Terminal,
            });
            return Ok(Some(WorkPath {
                start: start_site.clone(),
                target_time,
                steps,
            }));
        }

        let (q, to, tau) = next_arrow.unwrap();
        // Also terminal when the current site is itself a target site and
        // the target time falls inside the current vertical segment.
        if is_target(cur) && target_time <= tau {
            steps.push(PathStep {
                site: w.site_at(cur),
                entry_time: target_time,
                case: StepCase::Terminal,
            });
            return Ok(Some(WorkPath {
                start: start_site.clone(),
                target_time,
                steps,
            }));
        }

        let to_idx = to as usize;
        let reach_to = index.reachable_from_position(to_idx, q + 1);
        let reach_cur = index.reachable_from_position(cur, q + 1);
        assert!(
            reach_to || reach_cur,
            "minimal path invariant violated: neither branch reaches the target"
        );
        let to_site = w.site_at(to_idx);
        let cur_site = w.site_at(cur);
        let case = if order.precedes(&to_site, &cur_site) {
            if reach_to {
                StepCase::JumpToHigher
            } else {
                StepCase::StayHigherUnreachable
            }
        } else if reach_cur {
            StepCase::StayConnected
        } else {
            StepCase::JumpForced
        };
        if case.is_jump() {
            cur = to_idx;
        }
        steps.push(PathStep {
            site: w.site_at(cur),
            entry_time: tau,
            case,
        });
        pos = q + 1;
    }
}

/// Convenience wrapper building the reachability index internally.
pub fn minimal_path_to(
    events: &GraphicalEvents,
    a: &Configuration,
    target_sites: &[Site],
    target_time: f64,
    order: &PriorityOrder,
) -> Result<Option<WorkPath>> {
    let index = crate::graphical::backward_reachable_set(events, target_sites, target_time)?;
    minimal_path(events, a, &index, order)
}

/// Replay a path against the event set: every jump must consume the next
/// outgoing arrow of its site, no recovery may interrupt a vertical
/// segment, and the final segment must survive to the target time.
pub fn verify_open(events: &GraphicalEvents, path: &WorkPath) -> bool {
    let w = events.window();
    let mut cur = match w.index_of(&path.start) {
        Some(i) => i,
        None => return false,
    };
    let mut pos = events.position_after(0.0) as u32;
    let end_pos = events.position_after(path.target_time) as u32;
    for step in &path.steps[1..] {
        let acts = events.acting_positions(cur);
        let from = acts.partition_point(|&q| q < pos);
        if step.case == StepCase::Terminal {
            // Vertical segment to the target time: no recovery may occur.
            for &q in &acts[from..] {
                if q >= end_pos {
                    break;
                }
                if matches!(events.timeline()[q as usize].kind, EventKind::Recovery { .. }) {
                    return false;
                }
            }
            return w.index_of(&step.site) == Some(cur);
        }
        // The step is anchored at the next outgoing arrow.
        let mut anchored = None;
        for &q in &acts[from..] {
            match events.timeline()[q as usize].kind {
                EventKind::Recovery { .. } => return false,
                EventKind::Arrow { to, .. } => {
                    anchored = Some((q, to));
                    break;
                }
            }
        }
        let (q, to) = match anchored {
            Some(x) => x,
            None => return false,
        };
        if events.timeline()[q as usize].time != step.entry_time {
            return false;
        }
        if step.case.is_jump() {
            if w.index_of(&step.site) != Some(to as usize) {
                return false;
            }
            cur = to as usize;
        } else if w.index_of(&step.site) != Some(cur) {
            return false;
        }
        pos = q + 1;
    }
    false
}

/// First break point on the path: the earliest scan time at which the
/// path's site is the only infected site in its surrounding ball of radius
/// `⌊2βt⌋` (occupancy from the full-window trajectory). Falls back to the
/// path's endpoint when no earlier break point exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakPoint {
    pub site: Site,
    pub time: f64,
    /// True when the ball condition actually holds at `(site, time)`;
    /// false only for the endpoint fallback.
    pub found: bool,
}

pub fn break_point(
    events: &GraphicalEvents,
    path: &WorkPath,
    trajectory: &Trajectory,
    beta: f64,
    t: f64,
) -> Result<BreakPoint> {
    if trajectory.events_fingerprint != events.fingerprint() {
        return Err(Error::Usage(
            "trajectory was recorded on a different event realization".into(),
        ));
    }
    if trajectory.start_time != 0.0 || trajectory.end_time + 1e-12 < t.min(path.target_time) {
        return Err(Error::Usage(
            "trajectory must cover [0, t] from time 0".into(),
        ));
    }
    let w = events.window();
    let radius = (2.0 * beta * t).floor() as i32;
    let scan_end = t.min(path.target_time);

    // Scan points: occupancy changes and path step times, plus endpoints.
    let mut scan: Vec<f64> = vec![0.0, scan_end];
    scan.extend(
        trajectory
            .changes
            .iter()
            .map(|c| c.time)
            .filter(|&u| u <= scan_end),
    );
    scan.extend(
        path.steps
            .iter()
            .map(|s| s.entry_time)
            .filter(|&u| u <= scan_end),
    );
    scan.sort_by(f64::total_cmp);
    scan.dedup();

    let mut cursor = trajectory.cursor();
    for &s in &scan {
        cursor.advance_to(s);
        let y = path.site_at(s);
        let y_idx = w.index_of(y).ok_or_else(|| {
            Error::Usage("path site outside trajectory window".into())
        })?;
        debug_assert!(cursor.is_occupied(y_idx), "path site not infected at {s}");
        let mut alone = true;
        for idx in w.ball_indices(y, radius) {
            if idx != y_idx && cursor.is_occupied(idx) {
                alone = false;
                break;
            }
        }
        if alone {
            return Ok(BreakPoint {
                site: y.clone(),
                time: s,
                found: true,
            });
        }
    }
    Ok(BreakPoint {
        site: path.site_at(scan_end).clone(),
        time: scan_end,
        found: false,
    })
}

/// Good-point verdict for a space-time point: every λ-path starting there
/// makes fewer than `⌊βt⌋` jumps within time `t`. The sphere variant
/// additionally requires every point of the radius-`⌊2βt⌋` sphere to be
/// good, and the composite verdict requires both.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodPointReport {
    pub site: Site,
    pub time: f64,
    pub beta: f64,
    pub t: f64,
    pub max_jumps: u64,
    pub is_good: bool,
    pub sphere_good: Option<bool>,
    pub composite_good: Option<bool>,
}

pub fn classify_good(
    events: &GraphicalEvents,
    site: &Site,
    s: f64,
    beta: f64,
    t: f64,
    with_sphere: bool,
) -> Result<GoodPointReport> {
    let threshold = (beta * t).floor() as u64;
    let max_jumps = max_lambda_path_jumps(events, &SpaceTimePoint::new(site.clone(), s), t)?;
    let is_good = max_jumps < threshold;
    let (sphere_good, composite_good) = if with_sphere {
        let w = events.window();
        let radius = (2.0 * beta * t).floor() as i32;
        let outer = w.ball_indices(site, radius);
        let inner = w.ball_indices(site, radius - 1);
        let mut sphere_ok = true;
        for idx in outer {
            if inner.binary_search(&idx).is_ok() {
                continue;
            }
            let x = w.site_at(idx);
            let jumps =
                max_lambda_path_jumps(events, &SpaceTimePoint::new(x, s), t)?;
            if jumps >= threshold {
                sphere_ok = false;
                break;
            }
        }
        (Some(sphere_ok), Some(sphere_ok && is_good))
    } else {
        (None, None)
    };
    Ok(GoodPointReport {
        site: site.clone(),
        time: s,
        beta,
        t,
        max_jumps,
        is_good,
        sphere_good,
        composite_good,
    })
}

/// Disjoint favorable intervals `[s - √t, s) ⊆ [0, t/2]` for a path given
/// by its jump times: an interval is favorable when for every `u` inside
/// it the number of jumps in `[u, s)` is at most `4β(s - u)`.
///
/// Selection is greedy from the right edge `t/2` downward; on failure the
/// scan skips to the latest violating jump, which places the offending
/// jumps beyond every later candidate. For a path with at most `βt` jumps
/// this yields more than `√t/4 - 1` intervals: skipped length is bounded
/// by (jumps skipped)/(4β), so at most `t/4` in total.
pub fn favorable_intervals_from_jumps(jump_times: &[f64], beta: f64, t: f64) -> Vec<(f64, f64)> {
    let mut jumps = jump_times.to_vec();
    jumps.sort_by(f64::total_cmp);
    let rt = t.sqrt();
    let mut out = Vec::new();
    if rt <= 0.0 {
        return out;
    }
    let mut s = t / 2.0;
    while s - rt >= -1e-12 {
        let lo = jumps.partition_point(|&u| u < s - rt);
        let hi = jumps.partition_point(|&u| u < s);
        let m = hi - lo;
        let mut violating: Option<f64> = None;
        for (k, &u) in jumps[lo..hi].iter().enumerate() {
            let count = (m - k) as f64;
            if count > 4.0 * beta * (s - u) {
                violating = Some(u);
            }
        }
        match violating {
            None => {
                out.push(((s - rt).max(0.0), s));
                s -= rt;
            }
            Some(u) => {
                s = u;
            }
        }
    }
    out.reverse();
    out
}

pub fn favorable_intervals(path: &WorkPath, beta: f64, t: f64) -> Vec<(f64, f64)> {
    favorable_intervals_from_jumps(&path.jump_times(), beta, t)
}
