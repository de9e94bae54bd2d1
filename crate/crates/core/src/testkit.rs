//! Test-support oracles: brute-force reference implementations used by the
//! test suites to cross-check the production code paths. Nothing here is
//! used by the simulator itself.

use crate::graphical::{
    open_path_exists, EventKind, FixtureBuilder, GraphicalEvents, SpaceTimePoint,
};
use crate::lattice::{Coord, PriorityOrder, Site, Window};
use crate::process::Configuration;
use crate::rng::Stream;
use crate::workpath::{StepCase, WorkPath};
use std::collections::BTreeSet;

/// Random small event fixture on a box window: `n_events` events with
/// uniform times and uniformly chosen kinds/sites.
pub fn random_fixture(
    seed: u64,
    dim: usize,
    radius: Coord,
    horizon: f64,
    n_events: usize,
) -> GraphicalEvents {
    let window = Window::boxed(dim, radius);
    let mut st = Stream::new(seed.wrapping_mul(0x9e3779b9).wrapping_add(17));
    let mut b = FixtureBuilder::new(window.clone(), horizon);
    let sites = window.site_count();
    let deg = window.out_degree();
    let mut placed = 0;
    let mut used: BTreeSet<u64> = BTreeSet::new();
    while placed < n_events {
        let time = st.next_range(0.0, horizon);
        if !used.insert(time.to_bits()) {
            continue; // keep all event times distinct
        }
        let idx = st.next_index(sites);
        let site = window.site_at(idx);
        if st.next_f64() < 0.45 {
            b = b.recovery(site, time);
            placed += 1;
        } else {
            let dir = st.next_index(deg);
            if let Some(to) = window.arrow_target(idx, dir) {
                b = b.arrow(site, window.site_at(to), time);
                placed += 1;
            }
        }
    }
    b.build().expect("random fixture assembles")
}

/// A path identity for enumeration: starting site plus the jump sequence.
pub type JumpPath = (Site, Vec<(Site, u64)>);

/// Enumerate every distinct open path from `a × {0}` to
/// `targets × {target_time}`, identified by start site and jump sequence.
pub fn enumerate_open_paths(
    events: &GraphicalEvents,
    a: &Configuration,
    targets: &[Site],
    target_time: f64,
) -> BTreeSet<JumpPath> {
    let w = events.window();
    let target_idx: BTreeSet<usize> = targets
        .iter()
        .filter_map(|s| w.index_of(s))
        .collect();
    let end_pos = events.position_after(target_time) as u32;
    let mut found = BTreeSet::new();
    for start in a.sites() {
        let start_idx = match w.index_of(start) {
            Some(i) => i,
            None => continue,
        };
        // Depth-first over (site, position, jumps).
        let mut stack: Vec<(usize, u32, Vec<(Site, u64)>)> =
            vec![(start_idx, events.position_after(0.0) as u32, Vec::new())];
        while let Some((site, pos, jumps)) = stack.pop() {
            let acts = events.acting_positions(site);
            let from = acts.partition_point(|&q| q < pos);
            let mut alive = true;
            for &q in &acts[from..] {
                if q >= end_pos {
                    break;
                }
                match events.timeline()[q as usize].kind {
                    EventKind::Recovery { .. } => {
                        alive = false;
                        break;
                    }
                    EventKind::Arrow { to, .. } => {
                        let mut taken = jumps.clone();
                        let time = events.timeline()[q as usize].time;
                        taken.push((w.site_at(to as usize), time.to_bits()));
                        stack.push((to as usize, q + 1, taken));
                    }
                }
            }
            if alive && target_idx.contains(&site) {
                found.insert((start.clone(), jumps));
            }
        }
    }
    found
}

/// Exhaustive maximum λ-path jump count by branching over every arrow
/// (recoveries ignored). Mirrors the window-overflow rule of the dynamic
/// program: `None` when some λ-path reaches the boundary shell.
pub fn brute_max_lambda_jumps(
    events: &GraphicalEvents,
    from: &SpaceTimePoint,
    duration: f64,
) -> Option<u64> {
    let w = events.window();
    let start = w.index_of(&from.site)?;
    if w.is_boundary(start) {
        return None;
    }
    let end_pos = events.position_after(from.time + duration) as u32;
    let mut best = 0u64;
    let mut stack = vec![(start, events.position_after(from.time) as u32, 0u64)];
    while let Some((site, pos, jumps)) = stack.pop() {
        best = best.max(jumps);
        let acts = events.acting_positions(site);
        let from_i = acts.partition_point(|&q| q < pos);
        for &q in &acts[from_i..] {
            if q >= end_pos {
                break;
            }
            if let EventKind::Arrow { to, .. } = events.timeline()[q as usize].kind {
                if w.is_boundary(to as usize) {
                    return None;
                }
                stack.push((to as usize, q + 1, jumps + 1));
            }
        }
    }
    Some(best)
}

/// Break-point predicate by direct path search: `(y, s)` qualifies iff no
/// window site at time 0 has an open path to any other site of the
/// radius-`radius` ball around `y` at time `s`.
pub fn brute_is_break_point(
    events: &GraphicalEvents,
    y: &Site,
    s: f64,
    radius: Coord,
) -> bool {
    let w = events.window();
    for idx in w.ball_indices(y, radius) {
        let x = w.site_at(idx);
        if x == *y {
            continue;
        }
        let target = SpaceTimePoint::new(x, s);
        for a_idx in 0..w.site_count() {
            let from = SpaceTimePoint::new(w.site_at(a_idx), 0.0);
            if open_path_exists(events, &from, &target).unwrap() {
                return false;
            }
        }
    }
    true
}

/// Re-derive every branch decision of a minimal path through
/// [`open_path_exists`] alone and compare with the recorded labels; also
/// checks the starting site is the highest-priority survivor.
pub fn replay_case_labels(
    events: &GraphicalEvents,
    path: &WorkPath,
    a: &Configuration,
    targets: &[Site],
    target_time: f64,
    order: &PriorityOrder,
) -> bool {
    let w = events.window();
    let reaches = |site: &Site, time: f64| -> bool {
        targets.iter().any(|tgt| {
            open_path_exists(
                events,
                &SpaceTimePoint::new(site.clone(), time),
                &SpaceTimePoint::new(tgt.clone(), target_time),
            )
            .unwrap()
        })
    };
    // Start: highest-priority site of `a` reaching the target.
    let mut best: Option<&Site> = None;
    for site in a.sites() {
        if reaches(site, 0.0) {
            match best {
                Some(b) if !order.precedes(site, b) => {}
                _ => best = Some(site),
            }
        }
    }
    if best != Some(&path.start) {
        return false;
    }
    // Walk the acting positions to recover each step's offered arrow.
    let mut cur = match w.index_of(&path.start) {
        Some(i) => i,
        None => return false,
    };
    let mut pos = events.position_after(0.0) as u32;
    for step in &path.steps[1..] {
        if step.case == StepCase::Terminal {
            return w.index_of(&step.site) == Some(cur) && step.entry_time == target_time;
        }
        let acts = events.acting_positions(cur);
        let from_i = acts.partition_point(|&q| q < pos);
        let mut anchor = None;
        for &q in &acts[from_i..] {
            if let EventKind::Arrow { to, .. } = events.timeline()[q as usize].kind {
                anchor = Some((q, to as usize));
                break;
            }
            // A recovery before the next arrow would falsify openness,
            // which `verify_open` covers; here it just ends the walk.
            return false;
        }
        let (q, to) = match anchor {
            Some(x) => x,
            None => return false,
        };
        let tau = events.timeline()[q as usize].time;
        if tau != step.entry_time {
            return false;
        }
        let cur_site = w.site_at(cur);
        let to_site = w.site_at(to);
        let reach_to = reaches(&to_site, tau);
        let reach_cur = reaches(&cur_site, tau);
        let expected = if order.precedes(&to_site, &cur_site) {
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
        if expected != step.case {
            return false;
        }
        if step.case.is_jump() {
            cur = to;
        }
        pos = q + 1;
    }
    false
}

/// Synthetic jump-time sequences for interval tests: mixtures of uniform
/// and clustered patterns with at most `max_jumps` jumps on `[0, t]`.
pub fn random_jump_times(seed: u64, t: f64, max_jumps: usize) -> Vec<f64> {
    let mut st = Stream::new(seed ^ 0xfee1_dead_cafe);
    let n = st.next_index(max_jumps + 1);
    let clustered = st.next_f64() < 0.5;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if clustered {
            let center = st.next_range(0.0, t * 0.9);
            out.push((center + st.next_range(0.0, 0.4)).min(t));
        } else {
            out.push(st.next_range(0.0, t));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
