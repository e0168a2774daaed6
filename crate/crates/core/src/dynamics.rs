//! Orbit averages along the horocycle flow, lacunary time grids, and
//! membership in the good sets `G(T, kappa) = {|A_T f| <= T^-kappa}`.
//!
//! Averages use the composite midpoint rule on the exact orbit, stepping the
//! lattice by `u_h` and reducing after every step. Since `f` is constant off
//! its support and the coordinate speed of the flow is at most
//! `sqrt(y^2 + 4)`, the integrand is Lipschitz in time with constant
//! `lip_coord * sqrt(y_max^2 + 4)`, which gives the recorded error bound.

use serde::{Deserialize, Serialize};

use crate::lattice::LatticePoint;
use crate::observables::Observable;
use crate::{Error, Result};

/// `(A_T f)(x)` with its quadrature error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitAverageRecord {
    pub point: LatticePoint,
    #[serde(rename = "T")]
    pub t: f64,
    pub value: f64,
    pub quad_step: f64,
    pub quad_error_bound: f64,
}

/// Upper bound for the coordinate speed of the flow where `f` varies.
pub fn orbit_speed_bound(f: &Observable) -> f64 {
    let y_max = f.support_systole.powi(-2);
    (y_max * y_max + 4.0).sqrt()
}

/// Quadrature error bound for step `h`.
pub fn quad_error_bound(f: &Observable, h: f64) -> f64 {
    f.lip_coord * orbit_speed_bound(f) * h
}

/// `(1/T) int_0^T f(u_t x) dt` by the composite midpoint rule with
/// `ceil(T/step)` equal pieces.
pub fn orbit_average(
    f: &Observable,
    pt: &LatticePoint,
    t: f64,
    step: f64,
) -> Result<OrbitAverageRecord> {
    check_step(t, step)?;
    let n = (t / step).ceil().max(1.0);
    Ok(orbit_averages(f, pt, &[t], t / n)?[0])
}

/// Averages at several times along one orbit with a common step `h`. The
/// interval `[0, T]` is cut at multiples of `h`; a final shorter piece is
/// integrated by its own midpoint. `times` must be ascending.
pub fn orbit_averages(
    f: &Observable,
    pt: &LatticePoint,
    times: &[f64],
    h: f64,
) -> Result<Vec<OrbitAverageRecord>> {
    for &t in times {
        check_step(t, h)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be ascending".into()));
    }
    let err = quad_error_bound(f, h);
    let mut out = Vec::with_capacity(times.len());
    let mut q = pt.horocycle(0.5 * h); // midpoint of the current piece
    let mut k = 0u64; // pieces integrated so far
    let mut integral = 0.0;
    let mut fq = f.evaluate(&q);
    for &t in times {
        // whole pieces that fit before t (with a little rounding allowance)
        let whole = ((t / h) * (1.0 + 1e-12)).floor() as u64;
        while k < whole {
            integral += h * fq;
            q = q.horocycle(h);
            fq = f.evaluate(&q);
            k += 1;
        }
        let rest = t - k as f64 * h;
        let tail = if rest > 1e-12 * h {
            // q sits at (k + 1/2) h; move to the midpoint of [k h, t]
            rest * f.evaluate(&q.horocycle(0.5 * rest - 0.5 * h))
        } else {
            0.0
        };
        out.push(OrbitAverageRecord {
            point: *pt,
            t,
            value: (integral + tail) / t,
            quad_step: h,
            quad_error_bound: err,
        });
    }
    Ok(out)
}

fn check_step(t: f64, step: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "averaging time must be positive, got {t}"
        )));
    }
    if !(step > 0.0) || step > t / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "step {step} must lie in (0, T/10] for T = {t}"
        )));
    }
    Ok(())
}

/// Geometric times `T_m = (1 + epsilon)^m`, `m = 0..=m_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunaryGrid {
    pub epsilon: f64,
    pub m_max: u32,
    pub times: Vec<f64>,
}

impl LacunaryGrid {
    pub fn new(epsilon: f64, m_max: u32) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let times = (0..=m_max)
            .map(|m| (1.0 + epsilon).powi(m as i32))
            .collect();
        Ok(Self {
            epsilon,
            m_max,
            times,
        })
    }

    pub fn time(&self, m: u32) -> f64 {
        (1.0 + self.epsilon).powi(m as i32)
    }

    /// The `m` with `T_m <= t < T_{m+1}`.
    pub fn index_of(&self, t: f64) -> u32 {
        let r = 1.0 + self.epsilon;
        let mut m = (t.ln() / r.ln()).floor().max(0.0) as u32;
        while m > 0 && r.powi(m as i32) > t {
            m -= 1;
        }
        while r.powi(m as i32 + 1) <= t {
            m += 1;
        }
        m
    }
}

/// Outcome of a lacunary comparison `|A_T f - A_{T_m} f|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunaryGap {
    #[serde(rename = "T")]
    pub t: f64,
    pub epsilon: f64,
    pub m: u32,
    pub t_m: f64,
    pub gap: f64,
    /// `2 sup_norm epsilon + 2 quad_error_bound`.
    pub bound: f64,
}

/// Compares the average at `T` with the one at the lacunary time below it;
/// fails if `gap > 2 ||f||_inf epsilon + 2 * quadrature error`.
pub fn lacunary_gap_check(
    f: &Observable,
    pt: &LatticePoint,
    t: f64,
    epsilon: f64,
    step: f64,
) -> Result<LacunaryGap> {
    if !(t > 1.0) {
        return Err(Error::InvalidInput(format!("T must exceed 1, got {t}")));
    }
    let grid = LacunaryGrid::new(epsilon, 0)?;
    let m = grid.index_of(t);
    let t_m = grid.time(m);
    let recs = orbit_averages(f, pt, &[t_m, t], step)?;
    let gap = (recs[1].value - recs[0].value).abs();
    let bound = 2.0 * f.sup_norm * epsilon + 2.0 * recs[0].quad_error_bound;
    let out = LacunaryGap {
        t,
        epsilon,
        m,
        t_m,
        gap,
        bound,
    };
    if gap > bound {
        return Err(Error::AssertionFailure(format!(
            "lacunary gap exceeds bound: {out:?} at {:?}",
            pt.coords()
        )));
    }
    Ok(out)
}

/// Membership of a point in `G(T, kappa)`; its complement at `T = T_m`
/// is the exceptional set `E(epsilon, kappa, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMembership {
    pub kappa: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub value: f64,
    pub in_good: bool,
    /// `T^-kappa - |A_T f|`.
    pub margin: f64,
    pub error_bound: f64,
    /// The margin is within the quadrature error of zero.
    pub boundary_uncertain: bool,
}

impl SetMembership {
    pub fn from_record(rec: &OrbitAverageRecord, kappa: f64) -> Self {
        let margin = rec.t.powf(-kappa) - rec.value.abs();
        Self {
            kappa,
            t: rec.t,
            value: rec.value,
            in_good: margin >= 0.0,
            margin,
            error_bound: rec.quad_error_bound,
            boundary_uncertain: margin.abs() <= rec.quad_error_bound,
        }
    }

    pub fn in_exceptional(&self) -> bool {
        !self.in_good
    }
}

/// Membership in `G(T, kappa)` at an arbitrary time.
pub fn membership_at(
    f: &Observable,
    pt: &LatticePoint,
    t: f64,
    kappa: f64,
    step: f64,
) -> Result<SetMembership> {
    check_kappa(kappa)?;
    Ok(SetMembership::from_record(
        &orbit_average(f, pt, t, step)?,
        kappa,
    ))
}

/// Membership test for `E(epsilon, kappa, m)`:
/// `|A_{T_m} f| > T_m^-kappa`.
pub fn exceptional_indicator(
    f: &Observable,
    pt: &LatticePoint,
    grid: &LacunaryGrid,
    kappa: f64,
    m: u32,
    step: f64,
) -> Result<SetMembership> {
    if m > grid.m_max {
        return Err(Error::InvalidInput(format!(
            "m = {m} exceeds grid m_max = {}",
            grid.m_max
        )));
    }
    membership_at(f, pt, grid.time(m), kappa, step)
}

/// Memberships at `T_m` for every `m` in `ms` (ascending) along one orbit,
/// with a common step.
pub fn exceptional_profile(
    f: &Observable,
    pt: &LatticePoint,
    grid: &LacunaryGrid,
    kappa: f64,
    ms: &[u32],
    step: f64,
) -> Result<Vec<SetMembership>> {
    check_kappa(kappa)?;
    if let Some(&m) = ms.iter().find(|&&m| m > grid.m_max) {
        return Err(Error::InvalidInput(format!(
            "m = {m} exceeds grid m_max = {}",
            grid.m_max
        )));
    }
    let times: Vec<f64> = ms.iter().map(|&m| grid.time(m)).collect();
    Ok(orbit_averages(f, pt, &times, step)?
        .iter()
        .map(|r| SetMembership::from_record(r, kappa))
        .collect())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Coords;

    fn bump() -> Observable {
        Observable::hat(Coords::new(0.0, 1.6, 3.0), [0.45, 0.55, 2.5], 1.0).unwrap()
    }

    #[test]
    fn zero_integrand() {
        let f = Observable::zero();
        let r = orbit_average(&f, &LatticePoint::square(), 10.0, 0.01).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn orbit_outside_support_averages_to_zero() {
        // a closed horocycle high in the cusp stays far above the support
        let pt = LatticePoint::from_coords(0.0, 20.0, 0.0).unwrap();
        let r = orbit_average(&bump(), &pt, 5.0, 0.01).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn plateau_orbit_is_constant() {
        // theta = 0 orbits move only in x (closed horocycles at height y);
        // a wide plateau in x makes the integrand constant for a short time
        let f = Observable::bump(crate::observables::Bump {
            center: Coords::new(0.0, 2.0, 0.0),
            radii: [0.5, 0.5, 1.0],
            amplitude: 0.7,
            plateau: 0.8,
            profile: crate::observables::Profile::Hat,
        })
        .unwrap();
        let pt = LatticePoint::from_coords(-0.1, 2.0, 0.0).unwrap();
        // x stays within +-0.4 for t <= 0.1, and y, theta are fixed
        let r = orbit_average(&f, &pt, 0.1, 0.01).unwrap();
        assert!((r.value - 0.7).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn halving_step_agrees_within_bound() {
        let f = crate::observables::preset("central-hat").unwrap();
        let pt = LatticePoint::square();
        let a = orbit_average(&f, &pt, 10.0, 1e-2).unwrap();
        let b = orbit_average(&f, &pt, 10.0, 1e-3).unwrap();
        assert!(
            (a.value - b.value).abs() <= a.quad_error_bound,
            "{a:?} {b:?}"
        );
        let c = orbit_average(&f, &pt, 10.0, 5e-3).unwrap();
        assert!((a.value - c.value).abs() <= 2.0 * a.quad_error_bound);
        assert!(c.quad_error_bound < a.quad_error_bound);
    }

    #[test]
    fn shared_step_matches_single_time() {
        let f = bump();
        let pt = LatticePoint::from_coords(0.2, 1.3, 5.0).unwrap();
        let many = orbit_averages(&f, &pt, &[2.0, 3.5, 7.25], 0.05).unwrap();
        for r in &many {
            let single = orbit_average(&f, &pt, r.t, 0.05).unwrap();
            assert!((single.value - r.value).abs() < 1e-9, "{r:?} vs {single:?}");
        }
    }

    #[test]
    fn step_precondition() {
        assert!(orbit_average(&bump(), &LatticePoint::square(), 1.0, 0.2).is_err());
    }

    #[test]
    fn periodic_orbit_average_is_exact() {
        // theta = 0: closed horocycle of period 1/y, x advances at speed y
        let f = Observable::hat(Coords::new(0.0, 2.0, 0.0), [0.4, 0.5, 1.0], 1.0).unwrap();
        let pt = LatticePoint::from_coords(-0.5, 2.0, 0.0).unwrap();
        // over one period x sweeps [-1/2, 1/2]: average of a hat over x = 0.4
        let r = orbit_average(&f, &pt, 0.5, 0.0005).unwrap();
        assert!(
            (r.value - 0.4).abs() <= r.quad_error_bound + 1e-9,
            "{}",
            r.value
        );
    }

    #[test]
    fn lacunary_grid_indexing() {
        let g = LacunaryGrid::new(0.1, 30).unwrap();
        assert_eq!(g.times.len(), 31);
        for m in 1..30 {
            assert_eq!(g.index_of(g.time(m)), m);
            assert_eq!(g.index_of(g.time(m) * 1.05), m);
            assert!((g.times[m as usize + 1] / g.times[m as usize] - 1.1).abs() < 1e-14);
        }
    }

    #[test]
    fn lacunary_gap_is_bounded() {
        let f = bump();
        for (i, t) in [1.7, 13.0, 40.0].into_iter().enumerate() {
            let pt = LatticePoint::from_coords(0.1 * i as f64, 1.2 + i as f64, 1.0).unwrap();
            for eps in [0.5, 0.1, 0.01] {
                let g = lacunary_gap_check(&f, &pt, t, eps, 0.01).unwrap();
                assert!(g.gap <= g.bound);
                assert!(g.t_m <= t && t < g.t_m * (1.0 + eps));
            }
        }
        let g =
            lacunary_gap_check(&f, &LatticePoint::square(), 1.1f64.powi(20), 0.1, 0.01).unwrap();
        assert_eq!(g.gap, 0.0);
    }

    #[test]
    fn membership_edge_cases() {
        let grid = LacunaryGrid::new(0.5, 10).unwrap();
        let pt = LatticePoint::from_coords(-0.5, 2.0, 0.0).unwrap();
        let f = Observable::hat(Coords::new(0.0, 2.0, 0.0), [0.4, 0.5, 1.0], 1.0).unwrap();
        // the periodic average 0.4 exceeds T^-kappa once kappa > ln(2.5)/ln(T)
        for kappa in [0.3, 0.5, 0.95] {
            let s = exceptional_indicator(&f, &pt, &grid, kappa, 10, 0.01).unwrap();
            assert!(s.in_exceptional(), "{s:?}");
        }
        let zero = Observable::zero();
        let s = exceptional_indicator(&zero, &pt, &grid, 1e-6, 10, 0.01).unwrap();
        assert!(s.in_good);
        assert!(exceptional_indicator(&f, &pt, &grid, 1.5, 1, 0.01).is_err());
        assert!(exceptional_indicator(&f, &pt, &grid, 0.5, 11, 0.01).is_err());
    }
}
