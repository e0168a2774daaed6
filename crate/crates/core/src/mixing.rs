//! Correlations, orbit-average variances and power-law rates.
//!
//! Every Monte Carlo estimator here draws its sample from
//! [`HaarSampler`] chunks and merges per-chunk accumulators with
//! [`tree_reduce`], so results depend only on the seed.

use serde::{Deserialize, Serialize};

use crate::dynamics::{orbit_averages, LacunaryGrid};
use crate::lattice::HaarSampler;
use crate::observables::Observable;
use crate::stats::{linear_fit, par_chunks, reduce_acc_vectors, MeanAcc};
use crate::{Error, Result};

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 10_000;
/// Points with `|value| <= NOISE_FLOOR * stderr` are excluded from fits.
pub const NOISE_FLOOR: f64 = 3.0;
/// Fewest usable points for a rate fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Monte Carlo estimate of `<f, f o u_t>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

/// `|<f, f o u_t>| ~ C t^-gamma` fitted on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub gamma_hat: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub r_squared: f64,
    pub t_range: (f64, f64),
    pub n_points: usize,
}

/// Monte Carlo estimate of `||A_T f||^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    #[serde(rename = "T")]
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

fn check_inputs(f: &Observable, n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if f.mean.is_none() {
        return Err(Error::InvalidInput(
            "observable must be normalised to zero mean first".into(),
        ));
    }
    Ok(())
}

/// `<f, f o u_t>` for every `t` in `t_grid`, reusing one Haar sample across
/// all times.
pub fn estimate_correlation(
    f: &Observable,
    t_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<CorrelationEstimate>> {
    correlation_impl(f, t_grid, n, seed, 1.0)
}

/// `<f o u_-t, f>` on the sample; equal to the forward correlation by
/// invariance of Haar measure.
pub fn estimate_reversed_correlation(
    f: &Observable,
    t_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<CorrelationEstimate>> {
    correlation_impl(f, t_grid, n, seed, -1.0)
}

fn correlation_impl(
    f: &Observable,
    t_grid: &[f64],
    n: usize,
    seed: u64,
    sign: f64,
) -> Result<Vec<CorrelationEstimate>> {
    check_inputs(f, n)?;
    let sampler = HaarSampler::new(seed);
    let width = t_grid.len();
    let parts = par_chunks(n, |c, r| {
        let mut acc = vec![MeanAcc::new(); width];
        for s in sampler.chunk(c, r.len()) {
            let fx = f.evaluate(&s.point);
            for (a, &t) in acc.iter_mut().zip(t_grid) {
                let v = if fx == 0.0 {
                    0.0
                } else {
                    fx * f.evaluate(&s.point.horocycle(sign * t))
                };
                a.push(v);
            }
        }
        acc
    });
    Ok(reduce_acc_vectors(parts, width)
        .into_iter()
        .zip(t_grid)
        .map(|(a, &t)| CorrelationEstimate {
            t,
            value: a.mean(),
            stderr: a.stderr(),
            n,
        })
        .collect())
}

/// Least-squares fit of `log |value| = log C - gamma log t` over the
/// estimates with `t > 0` and `|value| > 3 stderr`.
pub fn fit_rate(estimates: &[CorrelationEstimate]) -> Result<RateFit> {
    let usable: Vec<_> = estimates
        .iter()
        .filter(|e| e.t > 0.0 && e.value.abs() > NOISE_FLOOR * e.stderr && e.value != 0.0)
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSignal {
            usable: usable.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let xs: Vec<f64> = usable.iter().map(|e| e.t.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|e| e.value.abs().ln()).collect();
    let fit = linear_fit(&xs, &ys).ok_or(Error::InsufficientSignal {
        usable: usable.len(),
        required: MIN_FIT_POINTS,
    })?;
    let t_min = usable.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
    let t_max = usable.iter().map(|e| e.t).fold(0.0, f64::max);
    Ok(RateFit {
        gamma_hat: -fit.slope,
        c_hat: fit.intercept.exp(),
        r_squared: fit.r_squared,
        t_range: (t_min, t_max),
        n_points: usable.len(),
    })
}

/// `||A_T f||^2` for each `T` (ascending), by midpoint orbit averages with
/// step `step` along each sampled orbit.
pub fn estimate_variance(
    f: &Observable,
    t_grid: &[f64],
    n: usize,
    step: f64,
    seed: u64,
) -> Result<Vec<VarianceEstimate>> {
    check_inputs(f, n)?;
    let sampler = HaarSampler::new(seed);
    let width = t_grid.len();
    let parts: Vec<Result<Vec<MeanAcc>>> = par_chunks(n, |c, r| {
        let mut acc = vec![MeanAcc::new(); width];
        for s in sampler.chunk(c, r.len()) {
            let recs = orbit_averages(f, &s.point, t_grid, step)?;
            for (a, rec) in acc.iter_mut().zip(&recs) {
                a.push(rec.value * rec.value);
            }
        }
        Ok(acc)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reduce_acc_vectors(parts, width)
        .into_iter()
        .zip(t_grid)
        .map(|(a, &t)| VarianceEstimate {
            t,
            value: a.mean(),
            stderr: a.stderr(),
            n,
        })
        .collect())
}

/// `2 ||f||_inf^2 + 2 C / ((1 - gamma)(2 - gamma))`, the constant in
/// `||A_T f||^2 <= K T^-gamma` when `|<f, f o u_t>| <= C t^-gamma` for `t >= 1`.
pub fn variance_bound_constant(sup_norm: f64, c: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::RangeError(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    Ok(2.0 * sup_norm * sup_norm + 2.0 * c / ((1.0 - gamma) * (2.0 - gamma)))
}

/// Variance estimates together with the constant they are compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<f64>,
    pub variance: Vec<VarianceEstimate>,
    pub bound_constant: f64,
}

impl VarianceCheck {
    pub fn new(variance: Vec<VarianceEstimate>, sup_norm: f64, fit: &RateFit) -> Result<Self> {
        let bound_constant = variance_bound_constant(sup_norm, fit.c_hat, fit.gamma_hat)?;
        Ok(Self {
            t_grid: variance.iter().map(|v| v.t).collect(),
            variance,
            bound_constant,
        })
    }
}

/// One row of [`check_variance_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBoundRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub variance: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `bound + 3 stderr - variance`.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub gamma_hat: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub bound_constant: f64,
    pub rows: Vec<VarianceBoundRow>,
}

/// Checks `variance(T) <= K T^-gamma_hat + 3 stderr` at every `T`.
pub fn check_variance_bound(fit: &RateFit, check: &VarianceCheck) -> Result<VarianceReport> {
    if !(fit.gamma_hat > 0.0 && fit.gamma_hat < 1.0) {
        return Err(Error::RangeError(format!(
            "gamma_hat must lie in (0, 1), got {}",
            fit.gamma_hat
        )));
    }
    let mut rows = Vec::new();
    for v in &check.variance {
        let bound = check.bound_constant * v.t.powf(-fit.gamma_hat);
        let slack = bound + NOISE_FLOOR * v.stderr - v.value;
        if slack < 0.0 {
            return Err(Error::BoundViolation {
                t: v.t,
                variance: v.value,
                bound,
            });
        }
        rows.push(VarianceBoundRow {
            t: v.t,
            variance: v.value,
            stderr: v.stderr,
            bound,
            slack,
        });
    }
    Ok(VarianceReport {
        gamma_hat: fit.gamma_hat,
        c_hat: fit.c_hat,
        bound_constant: check.bound_constant,
        rows,
    })
}

/// One `(epsilon, kappa, m)` cell of the Chebyshev comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevRow {
    pub epsilon: f64,
    pub kappa: f64,
    pub m: u32,
    #[serde(rename = "T")]
    pub t: f64,
    /// `(1 + epsilon)^-kappa m`.
    pub threshold: f64,
    /// Haar mass of `{|A_T f| > threshold}`.
    pub mass: f64,
    pub mass_stderr: f64,
    /// `threshold^-2 * ||A_T f||^2` on the same sample.
    pub bound: f64,
    /// Same bound from an independent sample.
    pub independent_bound: f64,
    pub independent_bound_stderr: f64,
    /// Sample points where `1{|A| > c} > A^2 / c^2`.
    pub hard_violations: u64,
    /// `mass <= independent_bound` within three combined standard errors.
    pub passes: bool,
}

/// Measures the exceptional sets `E(epsilon, kappa, m)` for each kappa and
/// `m` in `ms` and compares with `threshold^-2 ||A_{T_m} f||^2`.
pub fn chebyshev_check(
    f: &Observable,
    grid: &LacunaryGrid,
    kappas: &[f64],
    ms: &[u32],
    n: usize,
    step: f64,
    seed: u64,
) -> Result<Vec<ChebyshevRow>> {
    check_inputs(f, n)?;
    if let Some(&k) = kappas.iter().find(|&&k| !(k > 0.0 && k < 1.0)) {
        return Err(Error::InvalidInput(format!(
            "kappa must lie in (0, 1), got {k}"
        )));
    }
    let times: Vec<f64> = ms.iter().map(|&m| grid.time(m)).collect();
    // per m: variance accumulator; per (kappa, m): indicator accumulator and hard violation count
    let width = ms.len() * (1 + kappas.len());
    let run = |seed: u64| -> Result<(Vec<MeanAcc>, Vec<u64>)> {
        let sampler = HaarSampler::new(seed);
        let parts: Vec<Result<(Vec<MeanAcc>, Vec<u64>)>> = par_chunks(n, |c, r| {
            let mut acc = vec![MeanAcc::new(); width];
            let mut hard = vec![0u64; ms.len() * kappas.len()];
            for s in sampler.chunk(c, r.len()) {
                let recs = orbit_averages(f, &s.point, &times, step)?;
                for (j, rec) in recs.iter().enumerate() {
                    let a2 = rec.value * rec.value;
                    acc[j].push(a2);
                    for (k, &kappa) in kappas.iter().enumerate() {
                        let c = rec.t.powf(-kappa);
                        let ind = if rec.value.abs() > c { 1.0 } else { 0.0 };
                        acc[ms.len() * (1 + k) + j].push(ind);
                        if ind > a2 / (c * c) {
                            hard[k * ms.len() + j] += 1;
                        }
                    }
                }
            }
            Ok((acc, hard))
        });
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        let hard = parts
            .iter()
            .fold(vec![0u64; ms.len() * kappas.len()], |mut h, (_, p)| {
                h.iter_mut().zip(p).for_each(|(a, b)| *a += b);
                h
            });
        Ok((
            reduce_acc_vectors(parts.into_iter().map(|p| p.0).collect(), width),
            hard,
        ))
    };
    let (acc, hard) = run(seed)?;
    let (indep, _) = run(seed.wrapping_add(1))?;

    let mut rows = Vec::new();
    for (k, &kappa) in kappas.iter().enumerate() {
        for (j, &m) in ms.iter().enumerate() {
            let t = times[j];
            let threshold = t.powf(-kappa);
            let ind = acc[ms.len() * (1 + k) + j];
            let c2 = threshold * threshold;
            let bound = acc[j].mean() / c2;
            let independent_bound = indep[j].mean() / c2;
            let independent_bound_stderr = indep[j].stderr() / c2;
            let combined = ind.stderr().hypot(independent_bound_stderr);
            rows.push(ChebyshevRow {
                epsilon: grid.epsilon,
                kappa,
                m,
                t,
                threshold,
                mass: ind.mean(),
                mass_stderr: ind.stderr(),
                bound,
                independent_bound,
                independent_bound_stderr,
                hard_violations: hard[k * ms.len() + j],
                passes: ind.mean() <= independent_bound + NOISE_FLOOR * combined,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Coords;

    fn synthetic(c: f64, gamma: f64) -> Vec<CorrelationEstimate> {
        (2..=100)
            .map(|t| t as f64)
            .map(|t| CorrelationEstimate {
                t,
                value: c * t.powf(-gamma),
                stderr: 1e-6,
                n: 1,
            })
            .collect()
    }

    fn observable() -> Observable {
        Observable::hat(Coords::new(0.0, 1.6, 3.0), [0.45, 0.55, 3.0], 1.0)
            .unwrap()
            .normalize_zero_mean(20_000, 1)
            .unwrap()
    }

    #[test]
    fn synthetic_rates_are_recovered() {
        let fit = fit_rate(&synthetic(1.0, 0.7)).unwrap();
        assert!((fit.gamma_hat - 0.7).abs() < 0.01);
        let fit = fit_rate(&synthetic(5.0, 0.3)).unwrap();
        assert!((fit.gamma_hat - 0.3).abs() < 0.01);
        assert!((fit.c_hat / 5.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_series_has_no_decay() {
        let fit = fit_rate(&synthetic(0.4, 0.0)).unwrap();
        assert!(fit.gamma_hat.abs() < 1e-12);
        let noisy: Vec<_> = synthetic(1.0, 0.5)
            .into_iter()
            .map(|e| CorrelationEstimate { stderr: 1.0, ..e })
            .collect();
        assert!(matches!(
            fit_rate(&noisy),
            Err(Error::InsufficientSignal { .. })
        ));
    }

    #[test]
    fn bound_constant_arithmetic() {
        let k = variance_bound_constant(1.0, 1.0, 0.5).unwrap();
        assert!((k - (2.0 + 2.0 / 0.75)).abs() < 1e-12);
        assert!(matches!(
            variance_bound_constant(1.0, 1.0, 1.0),
            Err(Error::RangeError(_))
        ));
        assert!(matches!(
            variance_bound_constant(1.0, 1.0, 0.0),
            Err(Error::RangeError(_))
        ));
    }

    #[test]
    fn synthetic_variance_passes_with_slack() {
        let fit = fit_rate(&synthetic(1.0, 0.5)).unwrap();
        let var: Vec<_> = [10.0, 50.0, 250.0]
            .into_iter()
            .map(|t: f64| VarianceEstimate {
                t,
                value: t.powf(-0.5),
                stderr: 0.0,
                n: 1,
            })
            .collect();
        let check = VarianceCheck::new(var, 1.0, &fit).unwrap();
        let report = check_variance_bound(&fit, &check).unwrap();
        assert!(report.rows.iter().all(|r| r.slack > 0.0));
    }

    #[test]
    fn requires_normalised_observable() {
        let raw = Observable::hat(Coords::new(0.0, 1.6, 3.0), [0.45, 0.55, 3.0], 1.0).unwrap();
        assert!(estimate_correlation(&raw, &[1.0], 20_000, 1).is_err());
        assert!(estimate_correlation(&observable(), &[1.0], 100, 1).is_err());
    }

    #[test]
    fn self_correlation_is_nonnegative_and_bounded() {
        let f = observable();
        let est = estimate_correlation(&f, &[0.0, 0.5, 50.0], 10_240, 2).unwrap();
        assert!(est[0].value >= -2.0 * est[0].stderr);
        for e in &est {
            assert!(e.value.abs() <= f.sup_norm * f.sup_norm);
        }
        let rev = estimate_reversed_correlation(&f, &[0.5, 50.0], 10_240, 3).unwrap();
        for (a, b) in est[1..].iter().zip(&rev) {
            assert!(
                (a.value - b.value).abs() <= 3.0 * a.stderr.hypot(b.stderr),
                "{a:?} {b:?}"
            );
        }
    }

    #[test]
    fn zero_observable_has_zero_variance() {
        let f = Observable::zero().normalize_zero_mean(10_000, 1).unwrap();
        let v = estimate_variance(&f, &[1.0, 10.0], 10_000, 0.1, 4).unwrap();
        assert!(v.iter().all(|e| e.value == 0.0));
    }

    #[test]
    fn chebyshev_rows_have_no_hard_violations() {
        let f = observable();
        let grid = LacunaryGrid::new(0.5, 6).unwrap();
        let rows = chebyshev_check(&f, &grid, &[0.2, 0.5], &[2, 4, 6], 10_000, 0.05, 5).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows {
            assert_eq!(r.hard_violations, 0);
            assert!(r.mass <= r.bound + 1e-12);
            assert!(r.passes, "{r:?}");
        }
    }
}
