//! Percolation clustering of a configuration at a connection radius,
//! rescaling of cluster anchors to the macroscopic lattice, and per-box
//! statistics of the resulting marked point pattern.

use crate::lattice::{Coord, Site};
use crate::process::{canonical_form, CanonicalConfig, Configuration};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Norm used for the connection radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    LInf,
    L1,
}

impl Norm {
    fn dist(&self, a: &Site, b: &Site) -> i64 {
        match self {
            Norm::LInf => a.dist_inf(b) as i64,
            Norm::L1 => a.dist_l1(b),
        }
    }
}

/// Weighted union-find with path halving.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// One connected component: its lexicographically minimal site and the
/// translation class of its sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub anchor: Site,
    pub mark: CanonicalConfig,
}

/// Components of a configuration under `distance < radius` percolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub radius: Coord,
    pub norm: Norm,
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total_sites(&self) -> usize {
        self.clusters.iter().map(|c| c.mark.size()).sum()
    }

    pub fn max_diameter(&self) -> i32 {
        self.clusters
            .iter()
            .map(|c| c.mark.diameter())
            .max()
            .unwrap_or(0)
    }
}

/// Cluster decomposition; pairs are examined bucket-locally (bucket side =
/// radius), so runtime stays near-linear for sparse subcritical configs.
pub fn extract_clusters(eta: &Configuration, radius: Coord, norm: Norm) -> Result<ClusterSet> {
    if radius < 1 {
        return Err(Error::InvalidParameter(
            "connection radius must be positive".into(),
        ));
    }
    let sites = eta.sites();
    let n = sites.len();
    let mut uf = UnionFind::new(n);
    if n > 0 {
        let dim = sites[0].dim();
        // Bucket key: floor-divided coordinates. Sites closer than `radius`
        // land in the same or an adjacent bucket.
        let bucket_of = |s: &Site| -> Vec<Coord> {
            s.0.iter().map(|&c| c.div_euclid(radius)).collect()
        };
        let mut buckets: BTreeMap<Vec<Coord>, Vec<usize>> = BTreeMap::new();
        for (i, s) in sites.iter().enumerate() {
            buckets.entry(bucket_of(s)).or_default().push(i);
        }
        for (key, members) in &buckets {
            // Same bucket.
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if norm.dist(&sites[i], &sites[j]) < radius as i64 {
                        uf.union(i, j);
                    }
                }
            }
            // Adjacent buckets, visited once per unordered pair.
            crate::lattice::for_each_offset(dim, 1, |off| {
                if off.iter().all(|&o| o == 0) {
                    return;
                }
                let nb: Vec<Coord> = key.iter().zip(off).map(|(k, o)| k + o).collect();
                if nb <= *key {
                    return;
                }
                if let Some(others) = buckets.get(&nb) {
                    for &i in members {
                        for &j in others {
                            if norm.dist(&sites[i], &sites[j]) < radius as i64 {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            });
        }
    }
    let mut groups: BTreeMap<usize, Vec<Site>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(sites[i].clone());
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| {
            let cfg = Configuration::new(members);
            let anchor = cfg.sites()[0].clone();
            Cluster {
                anchor,
                mark: canonical_form(&cfg),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.anchor.cmp(&b.anchor));
    Ok(ClusterSet {
        radius,
        norm,
        clusters,
    })
}

/// One point of the rescaled marked pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub location: Vec<f64>,
    pub mark: CanonicalConfig,
}

/// Cluster anchors rescaled by `e^{-αt/d}`, clipped to the viewing window
/// `[-K, K]^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkedMeasure {
    pub scale: f64,
    pub half_width: f64,
    pub points: Vec<MarkedPoint>,
}

impl MarkedMeasure {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One JSON object per point.
    pub fn dump_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for p in &self.points {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Rescale cluster anchors by `e^{-alpha_hat * t / d}` and keep those inside
/// `[-K, K]^d`.
pub fn marked_measure(
    clusters: &ClusterSet,
    alpha_hat: f64,
    t: f64,
    half_width: f64,
) -> Result<MarkedMeasure> {
    if !(alpha_hat > 0.0) {
        return Err(Error::InvalidParameter(
            "marked measure needs a positive rate estimate".into(),
        ));
    }
    let dim = clusters
        .clusters
        .first()
        .map(|c| c.anchor.dim())
        .unwrap_or(1);
    let scale = (-alpha_hat * t / dim as f64).exp();
    let points = clusters
        .clusters
        .iter()
        .filter_map(|c| {
            let loc: Vec<f64> = c.anchor.0.iter().map(|&x| x as f64 * scale).collect();
            let inside = loc.iter().all(|&v| v.abs() <= half_width);
            inside.then(|| MarkedPoint {
                location: loc,
                mark: c.mark.clone(),
            })
        })
        .collect();
    Ok(MarkedMeasure {
        scale,
        half_width,
        points,
    })
}

/// Mesoscopic box grid covering the viewing window: boxes of rescaled side
/// `(2R_t + 1)·e^{-αt/d}` centered on the rescaled lattice `(2R_t+1)·scale·Z^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MesoGrid {
    pub box_radius: Coord,
    pub scale: f64,
    pub half_width: f64,
    pub dim: usize,
    /// Box labels (integer grid coordinates) intersecting the window,
    /// in lexicographic order.
    pub labels: Vec<Vec<i64>>,
}

impl MesoGrid {
    pub fn new(box_radius: Coord, scale: f64, half_width: f64, dim: usize) -> Result<Self> {
        if box_radius < 1 || !(scale > 0.0) || !(half_width > 0.0) {
            return Err(Error::InvalidParameter("degenerate mesoscopic grid".into()));
        }
        let spacing = (2.0 * box_radius as f64 + 1.0) * scale;
        let reach = (half_width / spacing).ceil() as i64;
        let mut labels = Vec::new();
        let mut label = vec![-reach; dim];
        loop {
            // Box centered at label*spacing intersects [-K, K]^d iff each
            // center coordinate is within K + spacing/2.
            let intersects = label
                .iter()
                .all(|&l| (l as f64 * spacing).abs() <= half_width + spacing / 2.0);
            if intersects {
                labels.push(label.clone());
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    labels.sort();
                    return Ok(MesoGrid {
                        box_radius,
                        scale,
                        half_width,
                        dim,
                        labels,
                    });
                }
                k -= 1;
                if label[k] < reach {
                    label[k] += 1;
                    for l in label.iter_mut().skip(k + 1) {
                        *l = -reach;
                    }
                    break;
                }
            }
        }
    }

    pub fn spacing(&self) -> f64 {
        (2.0 * self.box_radius as f64 + 1.0) * self.scale
    }

    pub fn n_boxes(&self) -> usize {
        self.labels.len()
    }

    /// Rescaled Lebesgue volume of one box.
    pub fn box_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Label of the box containing a rescaled location.
    pub fn box_of(&self, location: &[f64]) -> Vec<i64> {
        location
            .iter()
            .map(|&v| (v / self.spacing()).round() as i64)
            .collect()
    }

    pub fn label_index(&self, label: &[i64]) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_slice().cmp(label)).ok()
    }
}

/// Per-box counts of measure points whose mark lies in `mark_class`
/// (`None` = all marks), plus void indicators and the count of points
/// outside the grid cover.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxStats {
    pub counts: Vec<u64>,
    pub voids: Vec<bool>,
    pub outside: u64,
}

impl BoxStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count over a sub-rectangle of boxes given by label bounds
    /// (inclusive), for assembling larger test rectangles.
    pub fn rect_count(&self, grid: &MesoGrid, lo: &[i64], hi: &[i64]) -> u64 {
        grid.labels
            .iter()
            .zip(&self.counts)
            .filter(|(label, _)| {
                label
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&l, (&a, &b))| a <= l && l <= b)
            })
            .map(|(_, &c)| c)
            .sum()
    }
}

pub fn box_statistics(
    measure: &MarkedMeasure,
    grid: &MesoGrid,
    mark_class: Option<&BTreeSet<CanonicalConfig>>,
) -> BoxStats {
    let mut counts = vec![0u64; grid.n_boxes()];
    let mut outside = 0u64;
    for p in &measure.points {
        if let Some(class) = mark_class {
            if !class.contains(&p.mark) {
                continue;
            }
        }
        match grid.label_index(&grid.box_of(&p.location)) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    let voids = counts.iter().map(|&c| c == 0).collect();
    BoxStats {
        counts,
        voids,
        outside,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn s1(x: i32) -> Site {
        Site(vec![x])
    }

    fn cfg1(xs: &[i32]) -> Configuration {
        Configuration::new(xs.iter().map(|&x| s1(x)).collect())
    }

    #[test]
    fn cluster_examples() {
        // {0, 2, 100} at radius 3: 2 < 3 ≤ 98 splits into two components.
        let set = extract_clusters(&cfg1(&[0, 2, 100]), 3, Norm::LInf).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.clusters[0].anchor, s1(0));
        assert_eq!(
            set.clusters[0].mark.sites(),
            &[s1(0), s1(2)]
        );
        assert_eq!(set.clusters[1].anchor, s1(100));
        assert_eq!(set.clusters[1].mark.sites(), &[s1(0)]);

        let empty = extract_clusters(&Configuration::empty(), 3, Norm::LInf).unwrap();
        assert!(empty.is_empty());
    }

    /// All-pairs quadratic union-find, the independent reference.
    fn quadratic_clusters(eta: &Configuration, radius: Coord, norm: Norm) -> ClusterSet {
        let sites = eta.sites();
        let n = sites.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in i + 1..n {
                if norm.dist(&sites[i], &sites[j]) < radius as i64 {
                    uf.union(i, j);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<Site>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(uf.find(i)).or_default().push(sites[i].clone());
        }
        let mut clusters: Vec<Cluster> = groups
            .into_values()
            .map(|members| {
                let cfg = Configuration::new(members);
                Cluster {
                    anchor: cfg.sites()[0].clone(),
                    mark: canonical_form(&cfg),
                }
            })
            .collect();
        clusters.sort_by(|a, b| a.anchor.cmp(&b.anchor));
        ClusterSet {
            radius,
            norm,
            clusters,
        }
    }

    #[test]
    fn bucketed_equals_quadratic_oracle() {
        let mut st = Stream::new(2025);
        for trial in 0..500 {
            let dim = 1 + (trial % 2);
            let n = st.next_index(50);
            let mut sites = Vec::with_capacity(n);
            for _ in 0..n {
                let coords: Vec<Coord> =
                    (0..dim).map(|_| st.next_index(81) as Coord - 40).collect();
                sites.push(Site(coords));
            }
            let eta = Configuration::new(sites);
            let radius = 1 + st.next_index(7) as Coord;
            let norm = if st.next_f64() < 0.5 {
                Norm::LInf
            } else {
                Norm::L1
            };
            let fast = extract_clusters(&eta, radius, norm).unwrap();
            let slow = quadratic_clusters(&eta, radius, norm);
            assert_eq!(fast, slow, "trial {trial}");
        }
    }

    #[test]
    fn clustering_is_order_independent() {
        let mut st = Stream::new(77);
        for _ in 0..100 {
            let n = 2 + st.next_index(30);
            let mut sites: Vec<Site> = (0..n)
                .map(|_| s1(st.next_index(60) as i32 - 30))
                .collect();
            let base = extract_clusters(&Configuration::new(sites.clone()), 4, Norm::LInf).unwrap();
            // Shuffle.
            for i in (1..sites.len()).rev() {
                let j = st.next_index(i + 1);
                sites.swap(i, j);
            }
            let shuffled =
                extract_clusters(&Configuration::new(sites.clone()), 4, Norm::LInf).unwrap();
            assert_eq!(base, shuffled);
        }
    }

    #[test]
    fn anchors_reconstruct_components() {
        let mut st = Stream::new(901);
        for _ in 0..100 {
            let n = st.next_index(40);
            let sites: Vec<Site> = (0..n).map(|_| s1(st.next_index(200) as i32 - 100)).collect();
            let eta = Configuration::new(sites);
            let set = extract_clusters(&eta, 5, Norm::LInf).unwrap();
            let mut rebuilt = Configuration::empty();
            for c in &set.clusters {
                rebuilt = rebuilt.union(&c.mark.realize_at(&c.anchor));
            }
            assert_eq!(rebuilt, eta);
            assert_eq!(set.total_sites(), eta.len());
        }
    }

    #[test]
    fn separated_components_are_distant() {
        let mut st = Stream::new(555);
        for _ in 0..50 {
            let n = st.next_index(30);
            let sites: Vec<Site> = (0..n).map(|_| s1(st.next_index(100) as i32 - 50)).collect();
            let eta = Configuration::new(sites);
            let radius = 4;
            let set = extract_clusters(&eta, radius, Norm::LInf).unwrap();
            for (i, a) in set.clusters.iter().enumerate() {
                for b in set.clusters.iter().skip(i + 1) {
                    let ca = a.mark.realize_at(&a.anchor);
                    let cb = b.mark.realize_at(&b.anchor);
                    for x in ca.sites() {
                        for y in cb.sites() {
                            assert!(x.dist_inf(y) as i64 >= radius as i64);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn marked_measure_rescales_and_clips() {
        let set = extract_clusters(&cfg1(&[0, 100]), 3, Norm::LInf).unwrap();
        // scale = e^{-1·2/1} ≈ 0.1353: 100 → 13.53 clipped at K = 5.
        let m = marked_measure(&set, 1.0, 2.0, 5.0).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.points[0].location, vec![0.0]);
        // t = 0 leaves anchors in place.
        let m0 = marked_measure(&set, 1.0, 0.0, 1000.0).unwrap();
        assert_eq!(m0.points[1].location, vec![100.0]);
        // Empty cluster set.
        let empty = extract_clusters(&Configuration::empty(), 3, Norm::LInf).unwrap();
        assert!(marked_measure(&empty, 1.0, 2.0, 5.0).unwrap().is_empty());
        // alpha must be positive.
        assert!(marked_measure(&set, 0.0, 2.0, 5.0).is_err());
    }

    #[test]
    fn box_statistics_conservation() {
        let mut st = Stream::new(4004);
        let grid = MesoGrid::new(10, 0.01, 1.0, 1).unwrap();
        let mut points = Vec::new();
        for _ in 0..200 {
            points.push(MarkedPoint {
                location: vec![st.next_range(-1.0, 1.0)],
                mark: canonical_form(&cfg1(&[0])),
            });
        }
        let measure = MarkedMeasure {
            scale: 0.01,
            half_width: 1.0,
            points,
        };
        let stats = box_statistics(&measure, &grid, None);
        assert_eq!(stats.total() + stats.outside, 200);
        // Refinement into two half-rectangles conserves counts.
        let lo = grid.labels.first().unwrap().clone();
        let hi = grid.labels.last().unwrap().clone();
        let mid = (lo[0] + hi[0]) / 2;
        let left = stats.rect_count(&grid, &lo, &[mid]);
        let right = stats.rect_count(&grid, &[mid + 1], &hi);
        assert_eq!(left + right, stats.total());
        // Single point lands in exactly one box.
        let single = MarkedMeasure {
            scale: 0.01,
            half_width: 1.0,
            points: vec![MarkedPoint {
                location: vec![0.4],
                mark: canonical_form(&cfg1(&[0])),
            }],
        };
        let st1 = box_statistics(&single, &grid, None);
        assert_eq!(st1.total(), 1);
        assert_eq!(st1.voids.iter().filter(|&&v| !v).count(), 1);
        // Empty measure: all voids.
        let st0 = box_statistics(
            &MarkedMeasure {
                scale: 0.01,
                half_width: 1.0,
                points: vec![],
            },
            &grid,
            None,
        );
        assert!(st0.voids.iter().all(|&v| v));
    }

    #[test]
    fn mark_class_filters_counts() {
        let grid = MesoGrid::new(10, 0.01, 1.0, 1).unwrap();
        let singleton = canonical_form(&cfg1(&[0]));
        let pair = canonical_form(&cfg1(&[0, 1]));
        let measure = MarkedMeasure {
            scale: 0.01,
            half_width: 1.0,
            points: vec![
                MarkedPoint {
                    location: vec![0.1],
                    mark: singleton.clone(),
                },
                MarkedPoint {
                    location: vec![0.2],
                    mark: pair,
                },
            ],
        };
        let class: BTreeSet<CanonicalConfig> = [singleton].into_iter().collect();
        let stats = box_statistics(&measure, &grid, Some(&class));
        assert_eq!(stats.total(), 1);
    }

    #[test]
    fn meso_grid_box_count_tracks_window() {
        // n_t ≈ (2K)^d / spacing^d within rounding.
        let grid = MesoGrid::new(7, 0.002, 1.0, 1).unwrap();
        let expect = 2.0 / grid.spacing();
        assert!((grid.n_boxes() as f64 - expect).abs() <= 2.0);
    }
}
