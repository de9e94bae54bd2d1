//! Lattice geometry: sites, bounded windows, neighborhoods, priority orders.
//!
//! Simulation runs on a finite window, either a centered box in `Z^d` or a
//! ring (periodic, one-dimensional). Sites are addressed both as coordinate
//! vectors ([`Site`]) and as dense linear indices into the window, which the
//! event-driven code uses throughout.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

pub type Coord = i32;

/// A lattice site; coordinates are compared lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Site(pub Vec<Coord>);

impl Site {
    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_inf(&self) -> Coord {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm_l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs() as i64).sum()
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `ℓ∞` distance between two sites of equal dimension.
    pub fn dist_inf(&self, other: &Site) -> Coord {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn dist_l1(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs() as i64)
            .sum()
    }
}

/// The finite window the construction lives on.
///
/// `BoxWindow` is `{x : ‖x‖∞ ≤ radius}` in `Z^d`; `Ring` is `Z/nZ` with
/// nearest-neighbor edges (for `n = 2` the two directed edges between the
/// two sites coincide in target, so the pair infection rate doubles).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    BoxWindow { dim: usize, radius: Coord },
    Ring { len: usize },
}

impl Window {
    pub fn boxed(dim: usize, radius: Coord) -> Self {
        Window::BoxWindow { dim, radius }
    }

    pub fn ring(len: usize) -> Self {
        Window::Ring { len }
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::BoxWindow { dim, .. } => *dim,
            Window::Ring { .. } => 1,
        }
    }

    pub fn site_count(&self) -> usize {
        match self {
            Window::BoxWindow { dim, radius } => {
                let side = 2 * (*radius as usize) + 1;
                side.pow(*dim as u32)
            }
            Window::Ring { len } => *len,
        }
    }

    /// Directed out-degree of every site (arrow lanes per site).
    pub fn out_degree(&self) -> usize {
        2 * self.dim()
    }

    pub fn contains(&self, site: &Site) -> bool {
        match self {
            Window::BoxWindow { dim, radius } => {
                site.dim() == *dim && site.norm_inf() <= *radius
            }
            Window::Ring { len } => {
                site.dim() == 1 && site.0[0] >= 0 && (site.0[0] as usize) < *len
            }
        }
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        match self {
            Window::BoxWindow { dim, radius } => {
                let side = 2 * (*radius as usize) + 1;
                let mut idx = 0usize;
                for k in 0..*dim {
                    idx = idx * side + (site.0[k] + radius) as usize;
                }
                Some(idx)
            }
            Window::Ring { .. } => Some(site.0[0] as usize),
        }
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        match self {
            Window::BoxWindow { dim, radius } => {
                let side = 2 * (*radius as usize) + 1;
                let mut coords = vec![0; *dim];
                for k in (0..*dim).rev() {
                    coords[k] = (idx % side) as Coord - radius;
                    idx /= side;
                }
                Site(coords)
            }
            Window::Ring { .. } => Site(vec![idx as Coord]),
        }
    }

    /// Target of the directed arrow lane `dir` out of `from`, if it stays in
    /// the window. Directions are `axis * 2 + {0: +e_axis, 1: -e_axis}`.
    pub fn arrow_target(&self, from: usize, dir: usize) -> Option<usize> {
        match self {
            Window::BoxWindow { dim, radius } => {
                let mut site = self.site_at(from);
                let axis = dir / 2;
                debug_assert!(axis < *dim);
                let delta = if dir % 2 == 0 { 1 } else { -1 };
                site.0[axis] += delta;
                if site.0[axis].abs() <= *radius {
                    self.index_of(&site)
                } else {
                    None
                }
            }
            Window::Ring { len } => {
                let delta = if dir % 2 == 0 { 1 } else { *len - 1 };
                Some((from + delta) % *len)
            }
        }
    }

    /// True when the site sits on the outermost shell of a box window.
    /// Infection reaching such a site means the bounded window may no longer
    /// represent the infinite-lattice realization faithfully.
    pub fn is_boundary(&self, idx: usize) -> bool {
        match self {
            Window::BoxWindow { radius, .. } => self.site_at(idx).norm_inf() == *radius,
            Window::Ring { .. } => false,
        }
    }

    pub fn iter_sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count()).map(move |i| self.site_at(i))
    }

    /// Linear indices of window sites in the closed ball `B_r(center)`
    /// (`ℓ∞`), clipped to the window.
    pub fn ball_indices(&self, center: &Site, r: Coord) -> Vec<usize> {
        let mut out = Vec::new();
        match self {
            Window::BoxWindow { dim, .. } => {
                for_each_offset(*dim, r, |off| {
                    let site = Site(
                        center
                            .0
                            .iter()
                            .zip(off)
                            .map(|(c, o)| c + o)
                            .collect::<Vec<_>>(),
                    );
                    if let Some(idx) = self.index_of(&site) {
                        out.push(idx);
                    }
                });
            }
            Window::Ring { len } => {
                let n = *len as i64;
                if 2 * (r as i64) + 1 >= n {
                    out.extend(0..*len);
                } else {
                    for off in -(r as i64)..=(r as i64) {
                        let x = (center.0[0] as i64 + off).rem_euclid(n) as usize;
                        out.push(x);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Window distance used for ball membership: `ℓ∞` on the box, cyclic on
    /// the ring.
    pub fn dist(&self, a: &Site, b: &Site) -> Coord {
        match self {
            Window::BoxWindow { .. } => a.dist_inf(b),
            Window::Ring { len } => {
                let n = *len as i64;
                let d = (a.0[0] as i64 - b.0[0] as i64).rem_euclid(n);
                d.min(n - d) as Coord
            }
        }
    }
}

/// Enumerate all offsets in `[-r, r]^dim`.
pub fn for_each_offset<F: FnMut(&[Coord])>(dim: usize, r: Coord, mut f: F) {
    let mut off = vec![-r; dim];
    loop {
        f(&off);
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if off[k] < r {
                off[k] += 1;
                for o in off.iter_mut().skip(k + 1) {
                    *o = -r;
                }
                break;
            }
        }
    }
}

/// Total order on sites used to pick the "highest priority" branch of the
/// minimal-path construction. `RadialLex` compares `(‖x‖∞, coordinates)`,
/// which restricts to a well-order on any window and is center-biased.
/// `Table` assigns explicit ranks (used for hand-built fixtures), falling
/// back to `RadialLex` between unranked sites.
#[derive(Clone, Debug)]
pub enum PriorityOrder {
    RadialLex,
    Lex,
    Table(BTreeMap<Site, u32>),
}

impl PriorityOrder {
    /// `Ordering::Less` means "higher priority" (precedes).
    pub fn cmp(&self, a: &Site, b: &Site) -> Ordering {
        match self {
            PriorityOrder::RadialLex => a
                .norm_inf()
                .cmp(&b.norm_inf())
                .then_with(|| a.cmp(b)),
            PriorityOrder::Lex => a.cmp(b),
            PriorityOrder::Table(t) => match (t.get(a), t.get(b)) {
                (Some(ra), Some(rb)) => ra.cmp(rb).then_with(|| a.cmp(b)),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => PriorityOrder::RadialLex.cmp(a, b),
            },
        }
    }

    pub fn precedes(&self, a: &Site, b: &Site) -> bool {
        self.cmp(a, b) == Ordering::Less
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_index_roundtrip() {
        let w = Window::boxed(2, 3);
        for idx in 0..w.site_count() {
            let s = w.site_at(idx);
            assert_eq!(w.index_of(&s), Some(idx));
        }
        assert_eq!(w.site_count(), 49);
    }

    #[test]
    fn ring_neighbors_wrap() {
        let w = Window::ring(6);
        assert_eq!(w.arrow_target(5, 0), Some(0));
        assert_eq!(w.arrow_target(0, 1), Some(5));
        // On a 2-ring both directions hit the same site.
        let w2 = Window::ring(2);
        assert_eq!(w2.arrow_target(0, 0), Some(1));
        assert_eq!(w2.arrow_target(0, 1), Some(1));
    }

    #[test]
    fn box_boundary_detection() {
        let w = Window::boxed(1, 2);
        let boundary: Vec<bool> = (0..5).map(|i| w.is_boundary(i)).collect();
        assert_eq!(boundary, vec![true, false, false, false, true]);
    }

    #[test]
    fn ball_indices_clip_to_window() {
        let w = Window::boxed(1, 3);
        let ball = w.ball_indices(&Site(vec![2]), 2);
        let sites: Vec<Coord> = ball.iter().map(|&i| w.site_at(i).0[0]).collect();
        assert_eq!(sites, vec![0, 1, 2, 3]);
    }

    #[test]
    fn radial_lex_is_total_and_center_first() {
        let ord = PriorityOrder::RadialLex;
        let o = Site(vec![0, 0]);
        let a = Site(vec![1, 0]);
        let b = Site(vec![0, 1]);
        assert!(ord.precedes(&o, &a));
        assert!(ord.precedes(&o, &b));
        assert_ne!(ord.cmp(&a, &b), Ordering::Equal);
    }

    #[test]
    fn ring_cyclic_distance() {
        let w = Window::ring(10);
        assert_eq!(w.dist(&Site(vec![1]), &Site(vec![9])), 2);
        assert_eq!(w.dist(&Site(vec![0]), &Site(vec![5])), 5);
    }
}
