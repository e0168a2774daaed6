//! Primitive lattice vectors (saddle connections of the flat torus).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LatticePoint;
use crate::{Error, Result};

/// Default ceiling on the predicted number of connections.
pub const DEFAULT_ENUMERATION_LIMIT: f64 = 1e7;

/// A primitive vector `p` (coefficients in the reduced basis) and its holonomy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleConnection {
    pub p: [i64; 2],
    pub hol: Complex64,
}

impl SaddleConnection {
    pub fn length(&self) -> f64 {
        self.hol.norm()
    }
}

/// All primitive vectors with `|hol| <= cutoff`, sorted by length and then by
/// coefficients. Coefficients refer to the stored reduced basis.
pub fn enumerate_saddle_connections(
    pt: &LatticePoint,
    cutoff: f64,
) -> Result<Vec<SaddleConnection>> {
    enumerate_saddle_connections_with_limit(pt, cutoff, DEFAULT_ENUMERATION_LIMIT)
}

pub fn enumerate_saddle_connections_with_limit(
    pt: &LatticePoint,
    cutoff: f64,
    limit: f64,
) -> Result<Vec<SaddleConnection>> {
    if !cutoff.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cutoff must be finite, got {cutoff}"
        )));
    }
    let predicted = 6.0 * cutoff * cutoff / PI;
    if predicted > limit {
        return Err(Error::CutoffTooLarge {
            cutoff,
            predicted,
            limit,
        });
    }
    let mut out = Vec::new();
    if cutoff <= 0.0 {
        return Ok(out);
    }
    let [m1, m2] = pt.basis();
    let g11 = m1.norm_sqr();
    let g12 = (m1 * m2.conj()).re;
    let g22 = m2.norm_sqr();
    let det_g = g11 * g22 - g12 * g12;
    let l2 = cutoff * cutoff * (1.0 + 1e-12);

    let p2_max = (l2 * g11 / det_g).sqrt().floor() as i64;
    for p2 in -p2_max..=p2_max {
        let p2f = p2 as f64;
        let disc = g11 * l2 - det_g * p2f * p2f;
        if disc < 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let lo = ((-g12 * p2f - root) / g11).ceil() as i64;
        let hi = ((-g12 * p2f + root) / g11).floor() as i64;
        for p1 in lo..=hi {
            if gcd(p1.unsigned_abs(), p2.unsigned_abs()) != 1 {
                continue;
            }
            let hol = m1 * p1 as f64 + m2 * p2f;
            if hol.norm_sqr() <= l2 {
                out.push(SaddleConnection { p: [p1, p2], hol });
            }
        }
    }
    out.sort_by(|a, b| {
        a.hol
            .norm_sqr()
            .total_cmp(&b.hol.norm_sqr())
            .then(a.p.cmp(&b.p))
    });
    Ok(out)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(pt: &LatticePoint, cutoff: f64, range: i64) -> Vec<[i64; 2]> {
        let mut v = Vec::new();
        for p1 in -range..=range {
            for p2 in -range..=range {
                if gcd(p1.unsigned_abs(), p2.unsigned_abs()) == 1
                    && pt.holonomy([p1, p2]).norm() <= cutoff
                {
                    v.push([p1, p2]);
                }
            }
        }
        v.sort();
        v
    }

    #[test]
    fn square_lattice_counts() {
        let sq = LatticePoint::square();
        let short = enumerate_saddle_connections(&sq, 1.05).unwrap();
        assert_eq!(short.len(), 4);
        let wider = enumerate_saddle_connections(&sq, 1.5).unwrap();
        // (+-1, 0), (0, +-1), (+-1, +-1); the next primitive length is sqrt(5)
        assert_eq!(wider.len(), 8);
        let mut ps: Vec<_> = wider.iter().map(|s| s.p).collect();
        ps.sort();
        assert_eq!(ps, brute_force(&sq, 1.5, 3));
    }

    #[test]
    fn below_systole_is_empty() {
        let p = LatticePoint::from_coords(0.3, 2.5, 1.0).unwrap();
        assert!(enumerate_saddle_connections(&p, 0.99 * p.systole())
            .unwrap()
            .is_empty());
        assert!(!enumerate_saddle_connections(&p, p.systole() + 1e-9)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn skew_lattice_matches_brute_force() {
        let p = LatticePoint::from_coords(0.47, 1.02, 5.5).unwrap();
        let found: Vec<_> = {
            let mut v: Vec<_> = enumerate_saddle_connections(&p, 4.0)
                .unwrap()
                .iter()
                .map(|s| s.p)
                .collect();
            v.sort();
            v
        };
        assert_eq!(found, brute_force(&p, 4.0, 12));
    }

    #[test]
    fn sorted_and_long_enough() {
        let p = LatticePoint::from_coords(-0.2, 3.0, 0.3).unwrap();
        let list = enumerate_saddle_connections(&p, 6.0).unwrap();
        for w in list.windows(2) {
            assert!(w[0].length() <= w[1].length());
        }
        assert!(list
            .iter()
            .all(|s| s.length() >= p.systole() * (1.0 - 1e-12)));
    }

    #[test]
    fn limit_is_enforced() {
        let sq = LatticePoint::square();
        assert!(matches!(
            enumerate_saddle_connections(&sq, 1e4),
            Err(Error::CutoffTooLarge { .. })
        ));
    }
}
