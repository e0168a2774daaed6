//! The AGY norm on period coordinates of the torus and the differential of
//! the horocycle flow.
//!
//! A tangent vector at a lattice with basis holonomies `(m1, m2)` is a pair
//! `w = (w1, w2)` of complex numbers; it pairs with the saddle connection
//! `p` as `v(p) = p1 w1 + p2 w2`. The AGY norm is
//! `sup_p |v(p)| / |hol(p)|`. The ratio only depends on the direction of `p`,
//! and primitive directions are dense, so the supremum is taken over real
//! directions `(cos a, sin a)`, `a in [0, pi)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{basis_from_coords, wrap_angle, LatticePoint, Unimodular};
use crate::{Error, Result};

/// Grid resolution used to bracket the maximising direction.
pub const NORM_GRID: usize = 4096;
/// Default coordinate radius inside which [`agy_distance_local`] applies.
pub const DEFAULT_CHART_RADIUS: f64 = 0.1;
/// The constant of the infinitesimal bound `||du_t v|| <= 8 t^2 ||v||`.
pub const PROOF_CONSTANT: f64 = 8.0;
/// Relative slack allowed before a sub-divergence violation is reported.
pub const VIOLATION_SLACK: f64 = 1e-9;

const MIN_DENOMINATOR: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-10;

/// A tangent vector at `base`, given by its values on the reduced basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    pub w: [Complex64; 2],
    pub base: LatticePoint,
}

impl TangentVec {
    pub fn new(w: [Complex64; 2], base: LatticePoint) -> Self {
        Self { w, base }
    }

    /// The tautological vector `v(p) = hol(p)`.
    pub fn identity(base: LatticePoint) -> Self {
        Self {
            w: base.basis(),
            base,
        }
    }

    /// `v(p) = p1 w1 + p2 w2`.
    pub fn pairing(&self, p: [i64; 2]) -> Complex64 {
        self.w[0] * p[0] as f64 + self.w[1] * p[1] as f64
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            w: [self.w[0] * c, self.w[1] * c],
            base: self.base,
        }
    }

    /// Sum of two vectors at the same basepoint.
    pub fn add(&self, other: &TangentVec) -> Self {
        Self {
            w: [self.w[0] + other.w[0], self.w[1] + other.w[1]],
            base: self.base,
        }
    }

    /// A Gaussian direction rescaled to unit AGY norm.
    pub fn random_unit<R: Rng>(base: LatticePoint, rng: &mut R) -> Self {
        loop {
            let mut g = || rng.sample::<f64, _>(StandardNormal);
            let w = [Complex64::new(g(), g()), Complex64::new(g(), g())];
            let v = Self { w, base };
            if let Ok(n) = agy_norm(&v) {
                if n > 1e-6 {
                    return v.scale(1.0 / n);
                }
            }
        }
    }
}

fn direction_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..NORM_GRID)
            .map(|k| (PI * k as f64 / NORM_GRID as f64).sin_cos())
            .map(|(s, c)| (c, s))
            .collect()
    })
}

/// Real quadratic form `z^* G z` restricted to real directions.
#[derive(Clone, Copy)]
struct Form {
    g11: f64,
    g12: f64,
    g22: f64,
}

impl Form {
    fn of(z: [Complex64; 2]) -> Self {
        Self {
            g11: z[0].norm_sqr(),
            g12: (z[0] * z[1].conj()).re,
            g22: z[1].norm_sqr(),
        }
    }

    fn at(&self, c: f64, s: f64) -> f64 {
        self.g11 * c * c + 2.0 * self.g12 * c * s + self.g22 * s * s
    }
}

/// AGY norm of `v` at its basepoint.
pub fn agy_norm(v: &TangentVec) -> Result<f64> {
    agy_norm_in_basis(v.w, v.base.basis())
}

/// AGY norm of `w` relative to an arbitrary (not necessarily reduced or
/// unimodular) basis `m` of holonomies; used along straight segments in
/// period coordinates.
pub fn agy_norm_in_basis(w: [Complex64; 2], m: [Complex64; 2]) -> Result<f64> {
    let num = Form::of(w);
    let den = Form::of(m);
    let ratio = |a: f64| {
        let (s, c) = a.sin_cos();
        num.at(c, s) / den.at(c, s)
    };

    let mut best = (0usize, f64::NEG_INFINITY);
    let mut min_den = f64::INFINITY;
    for (k, &(c, s)) in direction_table().iter().enumerate() {
        let d = den.at(c, s);
        min_den = min_den.min(d);
        let r = num.at(c, s) / d;
        if r > best.1 {
            best = (k, r);
        }
    }
    let min_den = min_den.sqrt();
    if !(min_den >= MIN_DENOMINATOR) {
        return Err(Error::DegenerateLattice {
            min_denominator: min_den,
        });
    }
    if best.1 <= 0.0 {
        return Ok(0.0);
    }

    // the ratio of two quadratic forms has a single maximum on RP^1, so the
    // grid neighbours bracket it
    let step = PI / NORM_GRID as f64;
    let centre = best.0 as f64 * step;
    let (mut lo, mut hi) = (centre - step, centre + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (ratio(x1), ratio(x2));
    while hi - lo > GOLDEN_TOL * step {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = ratio(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = ratio(x1);
        }
    }
    Ok(best.1.max(f1).max(f2).sqrt())
}

/// Differential of the horocycle flow: `w -> Re w + t Im w + i Im w`, with
/// the basepoint advanced to `u_t` of it and the result re-expressed in the
/// reduced basis there.
pub fn flow_differential(v: &TangentVec, t: f64) -> TangentVec {
    let (base, u) = v.base.horocycle_with_transform(t);
    let shear = |z: Complex64| Complex64::new(z.re + t * z.im, z.im);
    TangentVec {
        w: change_basis([shear(v.w[0]), shear(v.w[1])], u),
        base,
    }
}

/// Values on the basis `M U` given values on `M`.
pub fn change_basis(w: [Complex64; 2], u: Unimodular) -> [Complex64; 2] {
    [
        w[0] * u[0][0] as f64 + w[1] * u[1][0] as f64,
        w[0] * u[0][1] as f64 + w[1] * u[1][1] as f64,
    ]
}

/// The elementary two-sided estimate for the horocycle shear of a single
/// complex number: both `|u_t z| <= sqrt2 (1+|t|) |z|` and
/// `|z| <= sqrt2 (1+|t|) |u_t z|`.
pub fn elementary_bound_holds(z: Complex64, t: f64) -> bool {
    let sheared = Complex64::new(z.re + t * z.im, z.im).norm();
    let k = 2f64.sqrt() * (1.0 + t.abs()) * (1.0 + 1e-12);
    sheared <= k * z.norm() && z.norm() <= k * sheared
}

/// Length of the straight segment from `p` to `q` in period coordinates,
/// integrated by the midpoint rule with `subdivisions` pieces.
pub fn agy_distance_local(p: &LatticePoint, q: &LatticePoint, subdivisions: usize) -> Result<f64> {
    agy_distance_local_with_radius(p, q, subdivisions, DEFAULT_CHART_RADIUS)
}

pub fn agy_distance_local_with_radius(
    p: &LatticePoint,
    q: &LatticePoint,
    subdivisions: usize,
    radius: f64,
) -> Result<f64> {
    let distance = p.coord_distance(q);
    if distance > radius {
        return Err(Error::ChartViolation { distance, radius });
    }
    if subdivisions == 0 {
        return Err(Error::InvalidInput("subdivisions must be positive".into()));
    }
    let (cp, cq) = (p.coords(), q.coords());
    let start = columns(basis_from_coords(cp.x, cp.y, cp.theta));
    let end = columns(basis_from_coords(
        cq.x,
        cq.y,
        cp.theta + wrap_angle(cq.theta - cp.theta),
    ));
    let delta = [end[0] - start[0], end[1] - start[1]];
    if delta[0].norm() == 0.0 && delta[1].norm() == 0.0 {
        return Ok(0.0);
    }
    let n = subdivisions as f64;
    let piece = [delta[0] / n, delta[1] / n];
    let mut total = 0.0;
    for i in 0..subdivisions {
        let s = (i as f64 + 0.5) / n;
        let m = [start[0] + delta[0] * s, start[1] + delta[1] * s];
        total += agy_norm_in_basis(piece, m)?;
    }
    Ok(total)
}

fn columns(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    [
        Complex64::new(m[0][0], m[1][0]),
        Complex64::new(m[0][1], m[1][1]),
    ]
}

/// Empirical sub-divergence certificate for the compact set `{systole >= s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubDivergenceCert {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub s: f64,
    pub n_samples: usize,
    /// Largest observed `||du_t v|| / (t^2 ||v||)`.
    pub max_ratio: f64,
    pub seed: u64,
}

/// Checks `||du_t v|| <= 8 t^2 ||v||` for every sample and time, together
/// with the intermediate estimate `2 (1+t)^2` and the elementary shear bound
/// on the basis and tangent components.
pub fn check_subdivergence(
    samples: &[TangentVec],
    t_grid: &[f64],
    s: f64,
    seed: u64,
) -> Result<SubDivergenceCert> {
    if let Some(t) = t_grid.iter().find(|&&t| !(t > 1.0)) {
        return Err(Error::InvalidInput(format!("times must exceed 1, got {t}")));
    }
    if let Some(i) = samples.iter().position(|v| v.base.systole() < s) {
        return Err(Error::InvalidInput(format!(
            "sample {i} has systole below {s}"
        )));
    }

    let per_sample: Vec<Result<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let n0 = agy_norm(v)?;
            let mut worst: f64 = 0.0;
            for &t in t_grid {
                let n1 = agy_norm(&flow_differential(v, t))?;
                let ratio = n1 / n0;
                let bound = PROOF_CONSTANT * t * t;
                if ratio > bound * (1.0 + VIOLATION_SLACK) {
                    return Err(Error::ViolationFound {
                        sample: i,
                        t,
                        ratio,
                        bound,
                    });
                }
                let intermediate = 2.0 * (1.0 + t) * (1.0 + t);
                if ratio > intermediate * (1.0 + VIOLATION_SLACK) {
                    return Err(Error::AssertionFailure(format!(
                        "sample {i}, t = {t}: ratio {ratio} exceeds 2(1+t)^2 = {intermediate}"
                    )));
                }
                let zs = v.base.basis().into_iter().chain(v.w);
                if let Some(z) = zs
                    .into_iter()
                    .find(|&z| z.norm() > 0.0 && !elementary_bound_holds(z, t))
                {
                    return Err(Error::AssertionFailure(format!(
                        "sample {i}, t = {t}: shear bound fails for {z}"
                    )));
                }
                worst = worst.max(ratio / (t * t));
            }
            Ok(worst)
        })
        .collect();

    let mut max_ratio: f64 = 0.0;
    for r in per_sample {
        max_ratio = max_ratio.max(r?);
    }
    Ok(SubDivergenceCert {
        alpha: 2.0,
        c: max_ratio.max(1.0),
        s,
        n_samples: samples.len(),
        max_ratio,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed form: square root of the top generalised eigenvalue of the
    /// pair of real Gram matrices.
    fn closed_form(w: [Complex64; 2], m: [Complex64; 2]) -> f64 {
        let a = Form::of(w);
        let b = Form::of(m);
        // det(A - l B) = 0
        let qa = b.g11 * b.g22 - b.g12 * b.g12;
        let qb = -(a.g11 * b.g22 + a.g22 * b.g11 - 2.0 * a.g12 * b.g12);
        let qc = a.g11 * a.g22 - a.g12 * a.g12;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        ((-qb + disc.sqrt()) / (2.0 * qa)).sqrt()
    }

    #[test]
    fn identity_class_has_norm_one() {
        let p = LatticePoint::from_coords(0.2, 1.9, 2.5).unwrap();
        assert!((agy_norm(&TangentVec::identity(p)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_lattice_diagonal() {
        let v = TangentVec::new([c(1.0, 0.0), c(1.0, 0.0)], LatticePoint::square());
        assert!((agy_norm(&v).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_vector() {
        let v = TangentVec::new([c(0.0, 0.0); 2], LatticePoint::square());
        assert_eq!(agy_norm(&v).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_basis_is_rejected() {
        let r = agy_norm_in_basis([c(1.0, 0.0); 2], [c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::DegenerateLattice { .. })));
    }

    #[test]
    fn grid_search_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let base = crate::lattice::HaarSampler::new(9).chunk(rng.gen_range(0..50), 1)[0].point;
            let v = TangentVec::random_unit(base, &mut rng).scale(rng.gen_range(0.1..10.0));
            let got = agy_norm(&v).unwrap();
            let want = closed_form(v.w, base.basis());
            assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn differential_shears_components() {
        let v = TangentVec::new([c(0.0, 1.0), c(0.0, 0.0)], LatticePoint::square());
        // undo the reduction to read off the sheared values on the old basis
        let (q, u) = v.base.horocycle_with_transform(3.0);
        let dv = flow_differential(&v, 3.0);
        assert!(q.coord_distance(&dv.base) < 1e-15);
        let inv = [[u[1][1], -u[0][1]], [-u[1][0], u[0][0]]];
        let back = change_basis(dv.w, inv);
        assert!((back[0] - c(3.0, 1.0)).norm() < 1e-12 && back[1].norm() < 1e-12);
    }

    #[test]
    fn differential_at_zero_is_identity_and_linear() {
        let base = LatticePoint::from_coords(0.1, 1.3, 0.7).unwrap();
        let v = TangentVec::new([c(0.3, -1.0), c(2.0, 0.5)], base);
        let d0 = flow_differential(&v, 0.0);
        assert!((d0.w[0] - v.w[0]).norm() < 1e-15 && (d0.w[1] - v.w[1]).norm() < 1e-15);
        let a = flow_differential(&v.scale(2.0), 4.5);
        let b = flow_differential(&v, 4.5).scale(2.0);
        assert!((a.w[0] - b.w[0]).norm() < 1e-12 && (a.w[1] - b.w[1]).norm() < 1e-12);
    }

    #[test]
    fn differential_is_a_cocycle() {
        let base = LatticePoint::from_coords(-0.4, 1.1, 5.0).unwrap();
        let v = TangentVec::new([c(0.3, -1.0), c(2.0, 0.5)], base);
        let a = flow_differential(&flow_differential(&v, 1.7), 2.4);
        let b = flow_differential(&v, 4.1);
        assert!(a.base.coord_distance(&b.base) < 1e-10);
        let (na, nb) = (agy_norm(&a).unwrap(), agy_norm(&b).unwrap());
        assert!((na - nb).abs() < 1e-9 * nb);
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_diagonal() {
        let p = LatticePoint::from_coords(0.1, 1.5, 6.25).unwrap();
        let q = LatticePoint::from_coords(0.12, 1.49, 0.02).unwrap();
        assert_eq!(agy_distance_local(&p, &p, 8).unwrap(), 0.0);
        let d1 = agy_distance_local(&p, &q, 8).unwrap();
        let d2 = agy_distance_local(&q, &p, 8).unwrap();
        assert!((d1 - d2).abs() < 1e-12, "{d1} vs {d2}");
    }

    #[test]
    fn distance_converges_under_refinement() {
        let p = LatticePoint::from_coords(0.0, 1.2, 1.0).unwrap();
        let q = LatticePoint::from_coords(0.0006, 1.2008, 1.0).unwrap();
        let d1 = agy_distance_local(&p, &q, 4).unwrap();
        let d2 = agy_distance_local(&p, &q, 8).unwrap();
        assert!((d1 - d2).abs() < 1e-6, "{d1} vs {d2}");
    }

    #[test]
    fn chart_radius_is_enforced() {
        let p = LatticePoint::from_coords(0.0, 1.2, 1.0).unwrap();
        let q = LatticePoint::from_coords(0.0, 1.5, 1.0).unwrap();
        assert!(matches!(
            agy_distance_local(&p, &q, 4),
            Err(Error::ChartViolation { .. })
        ));
    }

    #[test]
    fn ratio_at_unit_time_is_below_eight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<_> = crate::lattice::sample_haar(5, 200)
            .into_iter()
            .map(|s| TangentVec::random_unit(s.point, &mut rng))
            .collect();
        // t = 1 is outside the certificate's domain; check directly
        for v in &samples {
            let r = agy_norm(&flow_differential(v, 1.0)).unwrap() / agy_norm(v).unwrap();
            assert!(r <= 8.0);
        }
        let cert = check_subdivergence(&samples, &[2.0, 10.0, 100.0], 0.0, 5).unwrap();
        assert!(cert.c >= 1.0 && cert.max_ratio <= 8.0);
        let json = serde_json::to_value(cert).unwrap();
        for key in ["alpha", "C", "s", "n_samples", "max_ratio", "seed"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn real_tangent_vectors_stay_below_bound() {
        let base = LatticePoint::from_coords(0.3, 2.0, 0.4).unwrap();
        let v = TangentVec::new([c(1.0, 0.0), c(-0.5, 0.0)], base);
        for t in [2.0, 10.0, 100.0, 1e4] {
            let r = agy_norm(&flow_differential(&v, t)).unwrap() / agy_norm(&v).unwrap();
            let elementary = 2.0 * (1.0 + t) * (1.0 + t);
            assert!(r <= elementary && r <= 8.0 * t * t, "t = {t}: {r}");
        }
    }

    #[test]
    fn shear_bound_on_unit_circle() {
        for k in 0..360 {
            let z = Complex64::from_polar(1.0, k as f64 * PI / 180.0);
            for t in [-100.0, -3.3, 0.0, 0.5, 42.0] {
                assert!(elementary_bound_holds(z, t));
            }
        }
    }
}
