//! Closed-form dimension bounds for the exceptional set.
//!
//! Every bound is reported as a function of the exponents `(alpha, beta,
//! gamma)` and, where relevant, the lacunarity `epsilon`, the threshold
//! exponent `kappa`, the clustering slack `xi` and the time-change exponent
//! `rho`. Mixing rates `gamma >= 1` are accepted and clamped to 1 with a
//! warning.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub xi: f64,
    pub rho: f64,
}

impl BoundParams {
    /// `epsilon = kappa = 0.1`, `xi = 0`, `rho = 1`.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            epsilon: 0.1,
            kappa: 0.1,
            xi: 0.0,
            rho: 1.0,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("kappa", self.kappa),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DomainError(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::DomainError(format!(
                "xi must be nonnegative, got {}",
                self.xi
            )));
        }
        Ok(())
    }

    /// `min(1, gamma)`, warning when the clamp is active.
    pub fn effective_gamma(&self) -> f64 {
        if self.gamma >= 1.0 {
            log::warn!("mixing rate gamma = {} >= 1 clamped to 1", self.gamma);
        }
        self.gamma.min(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub params: BoundParams,
    pub main_bound: f64,
    pub critical_eta: f64,
    pub intermediate: f64,
    pub time_change_bound: f64,
    /// `beta - main_bound`.
    pub sigma: f64,
    pub gamma_clamped: bool,
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DomainError(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::DomainError(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// `beta - min(1, gamma) / alpha`.
pub fn main_bound(p: &BoundParams) -> Result<f64> {
    check_alpha_beta(p.alpha, p.beta)?;
    if !(p.gamma > 0.0) {
        return Err(Error::DomainError(format!(
            "gamma must be positive, got {}",
            p.gamma
        )));
    }
    Ok(p.beta - p.effective_gamma() / p.alpha)
}

/// `beta - gamma / 2`, the `alpha = 2` case of [`main_bound`].
pub fn teichmuller_bound(beta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::DomainError(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    check_alpha_beta(2.0, beta)?;
    Ok(beta - gamma / 2.0)
}

/// Threshold exponent `(alpha beta + kappa beta + 2 kappa + 2 xi - gamma) / (alpha + kappa)`
/// above which the lacunary Chebyshev series converges.
pub fn critical_eta(p: &BoundParams) -> Result<f64> {
    let den = p.alpha + p.kappa;
    if !(den > 0.0) {
        return Err(Error::DomainError(format!(
            "alpha + kappa must be positive, got {den}"
        )));
    }
    Ok((p.alpha * p.beta + p.kappa * p.beta + 2.0 * p.kappa + 2.0 * p.xi - p.gamma) / den)
}

/// [`critical_eta`] with `xi = 0`.
pub fn intermediate(p: &BoundParams) -> Result<f64> {
    critical_eta(&p.with_xi(0.0))
}

/// `beta - min(1, rho gamma) / (rho alpha)`.
pub fn time_change_bound(p: &BoundParams) -> Result<f64> {
    check_alpha_beta(p.alpha, p.beta)?;
    if !(p.rho > 0.0 && p.rho.is_finite()) {
        return Err(Error::DomainError(format!(
            "rho must be positive, got {}",
            p.rho
        )));
    }
    if !(p.gamma > 0.0) {
        return Err(Error::DomainError(format!(
            "gamma must be positive, got {}",
            p.gamma
        )));
    }
    Ok(p.beta - (p.rho * p.gamma).min(1.0) / (p.rho * p.alpha))
}

pub fn evaluate(p: &BoundParams) -> Result<BoundResult> {
    p.validate()?;
    let main = main_bound(p)?;
    Ok(BoundResult {
        params: *p,
        main_bound: main,
        critical_eta: critical_eta(p)?,
        intermediate: intermediate(p)?,
        time_change_bound: time_change_bound(p)?,
        sigma: p.beta - main,
        gamma_clamped: p.gamma >= 1.0,
    })
}

/// Per-step exponent of the lacunary series at `eta`:
/// `(alpha beta + kappa beta + 2 kappa + 2 xi - gamma - alpha eta - kappa eta) ln(1 + epsilon)`.
pub fn series_exponent(p: &BoundParams, eta: f64) -> f64 {
    let a = p.alpha * p.beta + p.kappa * p.beta + 2.0 * p.kappa + 2.0 * p.xi
        - p.gamma
        - p.alpha * eta
        - p.kappa * eta;
    a * p.epsilon.ln_1p()
}

/// Partial sums `S_M = sum_{m=0}^{M} (1+epsilon)^{a m}` for `M = 0..=m_max`.
pub fn partial_sums(p: &BoundParams, eta: f64, m_max: usize) -> Vec<f64> {
    let a = series_exponent(p, eta);
    let mut s = 0.0;
    (0..=m_max)
        .map(|m| {
            s += (a * m as f64).exp();
            s
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityFlip {
    pub critical_eta: f64,
    pub delta: f64,
    pub m_max: usize,
    /// `S_M` and `S_{M/2}` just above the critical value.
    pub above: (f64, f64),
    /// `S_M` and `S_{M/2}` just below the critical value.
    pub below: (f64, f64),
    pub converges_above: bool,
    pub diverges_below: bool,
}

impl SummabilityFlip {
    pub fn passed(&self) -> bool {
        self.converges_above && self.diverges_below
    }
}

/// Partial sums at `critical_eta +- delta`. Above, the second half of the
/// sum must add less than `1e-3` of the total; below, it must add more than
/// the first half.
pub fn summability_flip(p: &BoundParams, delta: f64, m_max: usize) -> Result<SummabilityFlip> {
    p.validate()?;
    if !(delta > 0.0) || m_max < 2 {
        return Err(Error::DomainError(format!(
            "need delta > 0 and m_max >= 2, got {delta}, {m_max}"
        )));
    }
    let eta = critical_eta(p)?;
    let half = m_max / 2;
    let up = partial_sums(p, eta + delta, m_max);
    let down = partial_sums(p, eta - delta, m_max);
    let above = (up[m_max], up[half]);
    let below = (down[m_max], down[half]);
    Ok(SummabilityFlip {
        critical_eta: eta,
        delta,
        m_max,
        above,
        below,
        converges_above: above.0 - above.1 < 1e-3 * above.0,
        diverges_below: below.0 - below.1 > below.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_values() {
        let p = BoundParams::new(2.0, 3.0, 0.5);
        assert!(close(main_bound(&p).unwrap(), 2.75, 1e-12));
        assert!(close(teichmuller_bound(3.0, 0.5).unwrap(), 2.75, 1e-12));
        assert!(close(
            time_change_bound(&p.with_rho(4.0)).unwrap(),
            2.875,
            1e-12
        ));
        assert!(close(time_change_bound(&p).unwrap(), 2.75, 1e-12));
        let c = critical_eta(&p.with_kappa(0.1)).unwrap();
        assert!(close(c, 6.0 / 2.1, 1e-12));
    }

    #[test]
    fn clamp_and_limits() {
        let p = BoundParams::new(2.0, 3.0, 1.7);
        assert_eq!(main_bound(&p).unwrap(), 2.5);
        assert!(evaluate(&p).unwrap().gamma_clamped);
        let tiny = BoundParams::new(2.0, 3.0, 1e-12);
        assert!(close(main_bound(&tiny).unwrap(), 3.0, 1e-11));
        assert!(close(
            teichmuller_bound(3.0, 0.999).unwrap(),
            3.0 - 0.4995,
            1e-12
        ));
        assert!(teichmuller_bound(3.0, 1.0).is_err());
        assert!(main_bound(&BoundParams::new(0.0, 3.0, 0.5)).is_err());
        assert!(main_bound(&BoundParams::new(2.0, -1.0, 0.5)).is_err());
        let big_rho = BoundParams::new(2.0, 3.0, 0.5).with_rho(1e6);
        assert!(close(time_change_bound(&big_rho).unwrap(), 3.0, 1e-6));
    }

    #[test]
    fn critical_eta_limit_and_monotonicity() {
        let base = BoundParams::new(2.0, 3.0, 0.5);
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let kappa = 10f64.powi(-k);
            let c = critical_eta(&base.with_kappa(kappa)).unwrap();
            assert!((c - 2.75).abs() < prev);
            prev = (c - 2.75).abs();
        }
        assert!(prev < 1e-6);
        let p = base.with_kappa(0.1);
        let a = critical_eta(&p.with_xi(0.0)).unwrap();
        let b = critical_eta(&p.with_xi(0.3)).unwrap();
        assert!(b > a);
        assert_eq!(intermediate(&p.with_xi(0.3)).unwrap(), a);
    }

    #[test]
    fn sigma_matches_teichmuller_gap() {
        let r = evaluate(&BoundParams::new(2.0, 3.0, 0.4)).unwrap();
        assert!(r.sigma > 0.0);
        assert!(close(r.sigma, 0.2, 1e-12));
        assert!(r.main_bound <= 3.0);
    }

    #[test]
    fn flip_at_critical_eta() {
        let p = BoundParams::new(2.0, 3.0, 0.5).with_kappa(0.1);
        let f = summability_flip(&p, 0.01, 10_000).unwrap();
        assert!(f.passed(), "{f:?}");
    }
}
