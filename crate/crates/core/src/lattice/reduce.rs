//! Gauss reduction to the canonical coset representative.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use num_complex::Complex64;

use super::{Coords, LatticePoint, DET_TOLERANCE, MAX_CONDITION};
use crate::{Error, Result};

/// Integer change of basis with determinant one.
pub type Unimodular = [[i64; 2]; 2];

const IDENTITY: Unimodular = [[1, 0], [0, 1]];
const BOUNDARY_TOL: f64 = 1e-12;
const ELLIPTIC_TOL: f64 = 1e-9;
const ANGLE_TOL: f64 = 1e-13;
const MAX_ITERATIONS: usize = 10_000;

/// Reduces a unimodular basis matrix to its canonical representative.
pub fn reduce(m: [[f64; 2]; 2]) -> Result<LatticePoint> {
    reduce_with_transform(m).map(|(p, _)| p)
}

/// As [`reduce`], also returning `U` with `reduced = M U / sqrt(det M)`.
pub fn reduce_with_transform(m: [[f64; 2]; 2]) -> Result<(LatticePoint, Unimodular)> {
    let [[a, b], [c, d]] = m;
    let det = a * d - b * c;
    if !det.is_finite() || (det - 1.0).abs() > DET_TOLERANCE {
        return Err(Error::NonUnimodular { det });
    }
    let frob = a * a + b * b + c * c + d * d;
    let sigma_max_sq = 0.5 * (frob + (frob * frob - 4.0 * det * det).max(0.0).sqrt());
    let condition = sigma_max_sq / det;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Degenerate { condition });
    }
    reduce_unconditioned(m)
}

/// Reduction without the determinant window or the conditioning check; used
/// by the flows, whose images are exact lattices however sheared.
pub(crate) fn reduce_unconditioned(m: [[f64; 2]; 2]) -> Result<(LatticePoint, Unimodular)> {
    let [[a, b], [c, d]] = m;
    let det = a * d - b * c;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::NonUnimodular { det });
    }
    let scale = det.sqrt().recip();
    let mut m1 = Complex64::new(a * scale, c * scale);
    let mut m2 = Complex64::new(b * scale, d * scale);
    let mut u = IDENTITY;

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let tau = m2 / m1;
        // x - n in (-1/2, 1/2], preferring +1/2 on the vertical edges
        let n = (tau.re - 0.5 - BOUNDARY_TOL).ceil();
        if n != 0.0 {
            m2 -= m1 * n;
            u = mul(u, [[1, -(n as i64)], [0, 1]]);
        }
        let tau = m2 / m1;
        let r2 = tau.norm_sqr();
        let on_arc_left = (r2 - 1.0).abs() <= BOUNDARY_TOL && tau.re < -BOUNDARY_TOL;
        if r2 < 1.0 - BOUNDARY_TOL || on_arc_left {
            (m1, m2) = (m2, -m1);
            u = mul(u, [[0, -1], [1, 0]]);
            continue;
        }
        converged = true;
        break;
    }
    if !converged {
        return Err(Error::Degenerate {
            condition: f64::INFINITY,
        });
    }

    canonical_angle(&mut m1, &mut m2, &mut u);
    let tau = m2 / m1;
    if (tau - Complex64::new(0.0, 1.0)).norm() < ELLIPTIC_TOL && angle(m1) >= FRAC_PI_2 - ANGLE_TOL
    {
        // stabiliser of i: quarter turn of the square lattice
        (m1, m2) = (-m2, m1);
        u = mul(u, [[0, 1], [-1, 0]]);
        canonical_angle(&mut m1, &mut m2, &mut u);
    }
    let rho = Complex64::new(0.5, 3f64.sqrt() / 2.0);
    if (tau - rho).norm() < ELLIPTIC_TOL {
        // stabiliser of rho: sixth turns of the hexagonal lattice
        while angle(m1) >= FRAC_PI_3 - ANGLE_TOL {
            (m1, m2) = (m1 - m2, m1);
            u = mul(u, [[1, 1], [-1, 0]]);
            canonical_angle(&mut m1, &mut m2, &mut u);
        }
    }

    let tau = m2 / m1;
    let mut theta = 2.0 * angle(m1);
    if theta >= 2.0 * PI {
        theta -= 2.0 * PI;
    }
    let coords = Coords {
        x: tau.re,
        y: tau.im,
        theta: theta + 0.0,
    };
    let matrix = [[m1.re, m2.re], [m1.im, m2.im]];
    Ok((LatticePoint::from_parts(matrix, coords), u))
}

/// Argument of `z` in `[0, 2 pi)`, with rounding noise around zero snapped
/// to zero so the `[0, pi)` test below is stable.
fn angle(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a.abs() <= ANGLE_TOL {
        0.0
    } else if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Uses `-I` to bring `arg(m1)` into `[0, pi)`.
fn canonical_angle(m1: &mut Complex64, m2: &mut Complex64, u: &mut Unimodular) {
    if angle(*m1) >= PI - ANGLE_TOL {
        *m1 = -*m1;
        *m2 = -*m2;
        *u = mul(*u, [[-1, 0], [0, -1]]);
    }
}

fn mul(u: Unimodular, e: Unimodular) -> Unimodular {
    [
        [
            u[0][0] * e[0][0] + u[0][1] * e[1][0],
            u[0][0] * e[0][1] + u[0][1] * e[1][1],
        ],
        [
            u[1][0] * e[0][0] + u[1][1] * e[1][0],
            u[1][0] * e[0][1] + u[1][1] * e[1][1],
        ],
    ]
}
