use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agy::agy_distance_local;
use crate::dynamics::{orbit_average, OrbitAverageRecord};
use crate::lattice::{HaarSampler, LatticePoint};
use crate::observables::{point_in_domain, Observable};
use crate::{Error, Result};

/// `D = 1 + 2 sup + C lip / (alpha + 1)`.
pub fn clustering_constant(sup_norm: f64, lip: f64, c: f64, alpha: f64) -> f64 {
    1.0 + 2.0 * sup_norm + c * lip / (alpha + 1.0)
}

/// [`clustering_constant`] with the observable's AGY Lipschitz constant.
pub fn clustering_constant_for(f: &Observable, alpha: f64, c: f64) -> Result<f64> {
    if !(alpha > 0.0 && c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need alpha > 0 and C > 0, got {alpha}, {c}"
        )));
    }
    let lip = f
        .lip_agy
        .ok_or_else(|| Error::InvalidObservable("AGY Lipschitz constant not certified".into()))?;
    Ok(clustering_constant(f.sup_norm, lip, c, alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringCheck {
    #[serde(rename = "D")]
    pub d: f64,
    pub kappa: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// `kappa - log_T D`.
    pub kappa_prime: f64,
    /// `kappa + log_T D`, for the complement form.
    pub kappa_prime_corollary: f64,
}

impl ClusteringCheck {
    pub fn new(d: f64, kappa: f64, t: f64) -> Self {
        let shift = d.ln() / t.ln();
        Self {
            d,
            kappa,
            t,
            kappa_prime: kappa - shift,
            kappa_prime_corollary: kappa + shift,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub check: ClusteringCheck,
    pub alpha: f64,
    pub pairs: usize,
    /// Pairs with `x` certified in `G(T, kappa)` and `d(x,y) <= T^(-alpha-kappa)`.
    pub proposition_tested: usize,
    /// Pairs with `x` certified outside `G(T, kappa)` and
    /// `d(x,y) <= T^(-alpha-kappa) / D`.
    pub corollary_tested: usize,
    /// Largest `(|A_T f(y)| - err) / T^-kappa'` over proposition pairs; at most 1.
    pub worst_proposition_ratio: f64,
    /// Largest `(|A_T f(y) - A_T f(x)| - 2 err) / ((D - 1) T^-kappa)`; at most 1.
    pub worst_difference_ratio: f64,
    /// Smallest `(|A_T f(y)| + err) / T^-kappa'` over corollary pairs; at least 1.
    pub worst_corollary_ratio: f64,
}

/// Haar points `x` with systole `>= s` and partners `y` in the same chart
/// with AGY distance at most `bound`, also with systole `>= s`.
pub fn sample_nearby_pairs(
    n: usize,
    bound: f64,
    s: f64,
    seed: u64,
    subdivisions: usize,
) -> Result<Vec<(LatticePoint, LatticePoint, f64)>> {
    if !(bound > 0.0) {
        return Err(Error::InvalidInput(format!(
            "distance bound must be positive, got {bound}"
        )));
    }
    let sampler = HaarSampler::new(seed);
    let mut rng = sampler.rng(u64::MAX);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = crate::lattice::draw(&mut rng);
        if x.systole() < s {
            continue;
        }
        let c = x.coords().as_array();
        let dir: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let mut ell = bound * rng.gen_range(0.1..1.0);
        for _ in 0..60 {
            let q: [f64; 3] = std::array::from_fn(|i| c[i] + ell * dir[i] / norm);
            let Ok(y) = point_in_domain(q) else { break };
            let Ok(d) = agy_distance_local(&x, &y, subdivisions) else {
                break;
            };
            if d <= bound {
                if y.systole() >= s {
                    out.push((x, y, d));
                }
                break;
            }
            ell *= 0.5;
        }
    }
    Ok(out)
}

/// Tests the clustering implication on each pair at time `T`: if `x` is in
/// `G(T, kappa)` and close enough then `y` is in `G(T, kappa - log_T D)`, and
/// if `x` is outside `G(T, kappa)` and `D` times closer then `y` is outside
/// `G(T, kappa + log_T D)`. Memberships of `x` count only when the margin
/// exceeds the quadrature error; conclusions are judged with the quadrature
/// error in their favour.
pub fn verify_clustering(
    f: &Observable,
    pairs: &[(LatticePoint, LatticePoint, f64)],
    t: f64,
    kappa: f64,
    alpha: f64,
    c: f64,
    step: f64,
) -> Result<ClusteringReport> {
    verify_clustering_kappas(f, pairs, t, &[kappa], alpha, c, step).map(|mut v| v.remove(0))
}

/// [`verify_clustering`] for several `kappa`, sharing the orbit averages.
pub fn verify_clustering_kappas(
    f: &Observable,
    pairs: &[(LatticePoint, LatticePoint, f64)],
    t: f64,
    kappas: &[f64],
    alpha: f64,
    c: f64,
    step: f64,
) -> Result<Vec<ClusteringReport>> {
    if !(t > 1.0) || kappas.iter().any(|k| !(*k > 0.0 && *k < 1.0)) || kappas.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need T > 1 and kappa in (0,1), got {t}, {kappas:?}"
        )));
    }
    let d = clustering_constant_for(f, alpha, c)?;
    let averages: Vec<Result<_>> = pairs
        .par_iter()
        .map(|(x, y, dist)| {
            Ok((
                *dist,
                orbit_average(f, x, t, step)?,
                orbit_average(f, y, t, step)?,
            ))
        })
        .collect();
    let averages = averages.into_iter().collect::<Result<Vec<_>>>()?;
    kappas
        .iter()
        .map(|&kappa| judge(&averages, ClusteringCheck::new(d, kappa, t), alpha))
        .collect()
}

fn judge(
    averages: &[(f64, OrbitAverageRecord, OrbitAverageRecord)],
    check: ClusteringCheck,
    alpha: f64,
) -> Result<ClusteringReport> {
    let (d, t, kappa) = (check.d, check.t, check.kappa);
    let near = t.powf(-alpha - kappa);
    let level = t.powf(-kappa);
    let level_prop = t.powf(-check.kappa_prime);
    let level_cor = t.powf(-check.kappa_prime_corollary);
    let mut report = ClusteringReport {
        check,
        alpha,
        pairs: averages.len(),
        proposition_tested: 0,
        corollary_tested: 0,
        worst_proposition_ratio: 0.0,
        worst_difference_ratio: 0.0,
        worst_corollary_ratio: f64::INFINITY,
    };
    for (i, (dist, rx, ry)) in averages.iter().enumerate() {
        let dist = *dist;
        let (ax, ay, ex, ey) = (rx.value, ry.value, rx.quad_error_bound, ry.quad_error_bound);
        if ax.abs() + ex <= level && dist <= near {
            report.proposition_tested += 1;
            let ratio = (ay.abs() - ey) / level_prop;
            let diff = ((ay - ax).abs() - ex - ey) / ((d - 1.0) * level);
            report.worst_proposition_ratio = report.worst_proposition_ratio.max(ratio);
            report.worst_difference_ratio = report.worst_difference_ratio.max(diff);
            if ratio > 1.0 {
                return Err(Error::AssertionFailure(format!(
                    "pair {i}: |A_T f(y)| = {ay} exceeds T^-kappa' = {level_prop} (x average {ax}, d = {dist})"
                )));
            }
        } else if ax.abs() - ex > level && dist <= near / d {
            report.corollary_tested += 1;
            let ratio = (ay.abs() + ey) / level_cor;
            report.worst_corollary_ratio = report.worst_corollary_ratio.min(ratio);
            if ratio < 1.0 {
                return Err(Error::AssertionFailure(format!(
                    "pair {i}: |A_T f(y)| = {ay} below T^-kappa' = {level_cor} (x average {ax}, d = {dist})"
                )));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::preset;

    #[test]
    fn constant_formula() {
        assert!((clustering_constant(1.0, 2.0, 1.0, 2.0) - 11.0 / 3.0).abs() < 1e-12);
        assert_eq!(clustering_constant(1.5, 0.0, 4.0, 2.0), 4.0);
        assert_eq!(clustering_constant(0.0, 0.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn kappa_prime_at_t_e() {
        let c = ClusteringCheck::new(3.0, 0.5, std::f64::consts::E);
        assert!((c.kappa_prime - (0.5 - 3f64.ln())).abs() < 1e-12);
        assert!((c.kappa_prime_corollary - (0.5 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn identical_pairs_and_small_sweep() {
        let f = preset("central-smooth")
            .unwrap()
            .normalize_zero_mean(20_000, 1)
            .unwrap()
            .certify_agy(500, 2, 8)
            .unwrap();
        let x = LatticePoint::from_coords(0.1, 1.4, 2.5).unwrap();
        let same = verify_clustering(&f, &[(x, x, 0.0)], 10.0, 0.5, 2.0, 1.0, 0.002).unwrap();
        assert_eq!(same.proposition_tested + same.corollary_tested, 1);
        let t: f64 = 10.0;
        let d = clustering_constant_for(&f, 2.0, 1.0).unwrap();
        let pairs = sample_nearby_pairs(40, t.powf(-2.5) / d, 0.6, 9, 8).unwrap();
        assert_eq!(pairs.len(), 40);
        let r = verify_clustering(&f, &pairs, t, 0.5, 2.0, 1.0, 0.002).unwrap();
        assert!(r.proposition_tested > 0);
        assert!(r.worst_difference_ratio <= 1.0);
    }
}
