//! Packings, covers and box-counting on finite point sets, together with the
//! clustering, sub-uniformity and exceptional-set experiments built on them.
//!
//! Box dimension is used as a computable stand-in for Hausdorff dimension;
//! since the latter never exceeds the former, box-counting estimates of the
//! exceptional set are upper-bound proxies.

mod boxdim;
mod cloud;
mod clustering;
mod scan;
mod subuniform;

pub use boxdim::{
    box_dimension, cantor_cloud, cube_cloud, BoxDimEstimate, MIN_DECADES, MIN_SCALES,
};
pub use cloud::{read_cloud, write_cloud, CLOUD_MAGIC, CLOUD_VERSION};
pub use clustering::{
    clustering_constant, clustering_constant_for, sample_nearby_pairs, verify_clustering,
    verify_clustering_kappas, ClusteringCheck, ClusteringReport,
};
pub use scan::{
    exceptional_set_scan, periodic_locus_demo, PeriodicLocusReport, ScanRegion, ScanReport,
};
pub use subuniform::{ball_mass, sub_uniformity, BallMass, SubUniformityReport};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::agy::agy_distance_local;
use crate::lattice::{Coords, LatticePoint};
use crate::{Error, Result};

/// A distance on fundamental-domain coordinates.
pub trait Metric: Sync {
    fn distance(&self, a: &Coords, b: &Coords) -> f64;
    fn name(&self) -> &'static str;
}

/// Euclidean distance in `(x, y, theta)` with `theta` on the circle.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoordMetric;

impl Metric for CoordMetric {
    fn distance(&self, a: &Coords, b: &Coords) -> f64 {
        a.distance(b)
    }
    fn name(&self) -> &'static str {
        "coordinate"
    }
}

/// Plain Euclidean distance on the raw triples (no angle wrapping).
#[derive(Clone, Copy, Debug, Default)]
pub struct EuclideanMetric;

impl Metric for EuclideanMetric {
    fn distance(&self, a: &Coords, b: &Coords) -> f64 {
        let d = [a.x - b.x, a.y - b.y, a.theta - b.theta];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
    fn name(&self) -> &'static str {
        "euclidean"
    }
}

/// Local AGY distance; points outside a common chart are infinitely far apart.
#[derive(Clone, Copy, Debug)]
pub struct AgyLocalMetric {
    pub subdivisions: usize,
}

impl Default for AgyLocalMetric {
    fn default() -> Self {
        Self { subdivisions: 8 }
    }
}

impl Metric for AgyLocalMetric {
    fn distance(&self, a: &Coords, b: &Coords) -> f64 {
        let (Ok(p), Ok(q)) = (
            LatticePoint::from_coords(a.x, a.y, a.theta),
            LatticePoint::from_coords(b.x, b.y, b.theta),
        ) else {
            return f64::INFINITY;
        };
        agy_distance_local(&p, &q, self.subdivisions).unwrap_or(f64::INFINITY)
    }
    fn name(&self) -> &'static str {
        "agy-local"
    }
}

/// A maximal `delta`-separated subset chosen greedily in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingReport {
    pub delta: f64,
    pub count: usize,
    /// Indices of the members in the input.
    pub members: Vec<usize>,
    pub region: String,
    pub metric: String,
}

/// Scans `points` in order and keeps each point at distance `>= delta` from
/// every point kept so far.
pub fn greedy_packing<M: Metric + ?Sized>(
    points: &[Coords],
    metric: &M,
    delta: f64,
    region: &str,
) -> PackingReport {
    let mut members: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if members
            .iter()
            .all(|&j| metric.distance(p, &points[j]) >= delta)
        {
            members.push(i);
        }
    }
    PackingReport {
        delta,
        count: members.len(),
        members,
        region: region.to_string(),
        metric: metric.name().to_string(),
    }
}

/// Checks that members are pairwise `delta`-separated (hence the open
/// `delta/2`-balls around them are disjoint) and that every input point lies
/// within `delta` of a member.
pub fn check_packing<M: Metric + ?Sized>(
    points: &[Coords],
    metric: &M,
    report: &PackingReport,
) -> Result<()> {
    let m = &report.members;
    for (a, &i) in m.iter().enumerate() {
        for &j in &m[a + 1..] {
            let d = metric.distance(&points[i], &points[j]);
            if d < report.delta {
                return Err(Error::AssertionFailure(format!(
                    "members {i} and {j} at distance {d} < delta = {}",
                    report.delta
                )));
            }
        }
    }
    for (i, p) in points.iter().enumerate() {
        if !m
            .iter()
            .any(|&j| metric.distance(p, &points[j]) < report.delta)
            && !m.contains(&i)
        {
            return Err(Error::AssertionFailure(format!(
                "point {i} is not within delta of the packing"
            )));
        }
    }
    Ok(())
}

/// Checks that the open balls of radius `delta/2` around the members are
/// pairwise disjoint.
pub fn check_disjoint_balls<M: Metric + ?Sized>(
    points: &[Coords],
    metric: &M,
    report: &PackingReport,
) -> Result<()> {
    let r = report.delta / 2.0;
    let m = &report.members;
    for (a, &i) in m.iter().enumerate() {
        for &j in &m[a + 1..] {
            if metric.distance(&points[i], &points[j]) < 2.0 * r {
                return Err(Error::AssertionFailure(format!(
                    "balls around {i} and {j} overlap"
                )));
            }
        }
    }
    Ok(())
}

/// Size of a cover of `points` by open `delta`-balls centred at input points,
/// chosen by greedy set cover. This is an upper bound for the covering number.
pub fn covering_number<M: Metric + ?Sized>(points: &[Coords], metric: &M, delta: f64) -> usize {
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| metric.distance(&points[i], &points[j]) < delta)
                .collect()
        })
        .collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut heap: BinaryHeap<(usize, std::cmp::Reverse<usize>)> = neighbours
        .iter()
        .enumerate()
        .map(|(i, nb)| (nb.len(), std::cmp::Reverse(i)))
        .collect();
    let mut count = 0;
    // Lazy greedy: a popped gain is stale if it exceeds the current gain.
    while left > 0 {
        let Some((gain, std::cmp::Reverse(i))) = heap.pop() else {
            break;
        };
        let fresh = neighbours[i].iter().filter(|&&j| !covered[j]).count();
        if fresh < gain {
            heap.push((fresh, std::cmp::Reverse(i)));
            continue;
        }
        if fresh == 0 {
            break;
        }
        for &j in &neighbours[i] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

/// Packing and covering counts at `delta` and `2 delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub delta: f64,
    pub packing: usize,
    pub packing_double: usize,
    pub covering: usize,
    pub covering_double: usize,
}

/// Checks `P(2 delta) <= N(delta) <= P(delta)` and `N(2 delta) <= P(delta)`,
/// where `P` counts a greedy packing and `N` the greedy cover, improved by
/// the packing itself (a maximal `delta`-separated set is a `delta`-cover).
pub fn check_duality<M: Metric + ?Sized>(
    points: &[Coords],
    metric: &M,
    delta: f64,
) -> Result<DualityReport> {
    let p = greedy_packing(points, metric, delta, "").count;
    let p2 = greedy_packing(points, metric, 2.0 * delta, "").count;
    let n = covering_number(points, metric, delta).min(p);
    let n2 = covering_number(points, metric, 2.0 * delta).min(p2);
    let report = DualityReport {
        delta,
        packing: p,
        packing_double: p2,
        covering: n,
        covering_double: n2,
    };
    if p2.cmp(&n) == Ordering::Greater || n > p || n2 > p {
        return Err(Error::AssertionFailure(format!(
            "packing/covering duality fails: {report:?}"
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> Vec<Coords> {
        values.iter().map(|&v| Coords::new(v, 0.0, 0.0)).collect()
    }

    /// Lexicographically first maximal separated subset, by brute force.
    fn brute_force_first(points: &[Coords], delta: f64) -> Vec<usize> {
        let n = points.len();
        let m = EuclideanMetric;
        let separated = |set: &[usize]| {
            set.iter().enumerate().all(|(a, &i)| {
                set[a + 1..]
                    .iter()
                    .all(|&j| m.distance(&points[i], &points[j]) >= delta)
            })
        };
        let mut best: Option<Vec<usize>> = None;
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if !separated(&set) {
                continue;
            }
            let maximal = (0..n).filter(|i| !set.contains(i)).all(|i| {
                let mut s = set.clone();
                s.push(i);
                s.sort();
                !separated(&s)
            });
            if maximal && best.as_ref().is_none_or(|b| set < *b) {
                best = Some(set);
            }
        }
        best.unwrap()
    }

    #[test]
    fn line_packing_matches_brute_force() {
        let pts = line(&(0..=10).map(|k| k as f64 / 10.0).collect::<Vec<_>>());
        let r = greedy_packing(&pts, &EuclideanMetric, 0.3, "line");
        assert_eq!(r.count, 4);
        let xs: Vec<f64> = r.members.iter().map(|&i| pts[i].x).collect();
        assert_eq!(xs, vec![0.0, 0.3, 0.6, 0.9]);
        assert_eq!(r.members, brute_force_first(&pts, 0.3));
        check_packing(&pts, &EuclideanMetric, &r).unwrap();
        check_disjoint_balls(&pts, &EuclideanMetric, &r).unwrap();
    }

    #[test]
    fn packing_extremes() {
        let pts = line(&[0.0, 0.2, 0.2, 0.5, 1.0]);
        assert_eq!(greedy_packing(&pts, &EuclideanMetric, 5.0, "").count, 1);
        assert_eq!(greedy_packing(&pts, &EuclideanMetric, 1e-9, "").count, 4);
    }

    #[test]
    fn duality_on_random_cloud() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Coords> = (0..300)
            .map(|_| Coords::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        for delta in [0.05, 0.1, 0.2, 0.4] {
            check_duality(&pts, &CoordMetric, delta).unwrap();
        }
    }

    #[test]
    fn three_points_separate_the_two_duality_forms() {
        // P(2d) = 2 but N(2d) = 1, so P(2d) <= N(2d) fails while P(2d) <= N(d) holds.
        let pts = line(&[-0.15, 0.0, 0.15]);
        let r = check_duality(&pts, &EuclideanMetric, 0.1).unwrap();
        assert_eq!(r.packing_double, 2);
        assert_eq!(r.covering_double, 1);
        assert_eq!(r.covering, 3);
    }

    #[test]
    fn agy_metric_infinite_across_charts() {
        let m = AgyLocalMetric::default();
        let a = Coords::new(0.0, 1.5, 1.0);
        let b = Coords::new(0.3, 1.5, 1.0);
        assert!(m.distance(&a, &b).is_infinite());
        let c = Coords::new(0.01, 1.5, 1.0);
        let d = m.distance(&a, &c);
        assert!(d.is_finite() && d > 0.0);
    }
}
