//! Unimodular lattices in the plane, i.e. points of `SL(2,Z)\SL(2,R)`.
//!
//! A lattice is stored through a basis matrix `M = [[a, b], [c, d]]` whose
//! columns are the holonomies of the two basis vectors, read as complex
//! numbers `m1 = a + i c` and `m2 = b + i d`. The holonomy of the integer
//! vector `p` is `(M p)_1 + i (M p)_2`.
//!
//! Fundamental-domain coordinates `(x, y, theta)` are defined from a reduced
//! basis by
//!
//! * `x + i y = m2 / m1`, the lattice shape, lying in the modular fundamental
//!   domain `|x| <= 1/2`, `x^2 + y^2 >= 1`;
//! * `theta = 2 arg(m1)` taken in `[0, 2 pi)`. The basis `(-m1, -m2)` spans the
//!   same lattice, so only `arg(m1) mod pi` is an invariant; doubling it makes
//!   `theta` a full circle coordinate.
//!
//! In these coordinates the reduced basis is
//! `m1 = y^{-1/2} e^{i theta/2}` and `m2 = (x + i y) m1`, the shortest vector
//! has length `y^{-1/2}`, and normalised Haar measure has density
//! `3 / (2 pi^2) * y^{-2} dx dy dtheta`.

mod enumerate;
mod haar;
mod reduce;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use enumerate::{
    enumerate_saddle_connections, enumerate_saddle_connections_with_limit, SaddleConnection,
    DEFAULT_ENUMERATION_LIMIT,
};
pub use haar::{draw, haar_density, sample_haar, HaarSample, HaarSampler};
pub use reduce::{reduce, reduce_with_transform, Unimodular};

/// Tolerance on `|det M - 1|` accepted by [`reduce`].
pub const DET_TOLERANCE: f64 = 1e-9;
/// Condition number above which a basis is rejected as collinear.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest |s| accepted by the geodesic flow.
pub const GEODESIC_GUARD: f64 = 700.0;

/// Fundamental-domain coordinates of a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coords {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Coords {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    /// Euclidean distance in `(x, y, theta)` with `theta` read on the circle.
    pub fn distance(&self, other: &Coords) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dt = wrap_angle(self.theta - other.theta);
        (dx * dx + dy * dy + dt * dt).sqrt()
    }

    /// Whether `x + i y` lies in the closed modular fundamental domain.
    pub fn in_fundamental_domain(&self, tol: f64) -> bool {
        self.x.abs() <= 0.5 + tol && self.x * self.x + self.y * self.y >= 1.0 - tol && self.y > 0.0
    }
}

/// Maps an angle difference into `[-pi, pi]`.
pub fn wrap_angle(delta: f64) -> f64 {
    let mut d = delta.rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

/// A point of the torus stratum.
///
/// Constructed only through [`reduce`] (or the flows, which reduce), so the
/// stored basis is always the canonical reduced representative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticePointRepr", into = "LatticePointRepr")]
pub struct LatticePoint {
    m: [[f64; 2]; 2],
    coords: Coords,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct LatticePointRepr {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    x: f64,
    y: f64,
    theta: f64,
}

impl From<LatticePoint> for LatticePointRepr {
    fn from(p: LatticePoint) -> Self {
        let [[a, b], [c, d]] = p.m;
        let Coords { x, y, theta } = p.coords;
        Self {
            a,
            b,
            c,
            d,
            x,
            y,
            theta,
        }
    }
}

impl TryFrom<LatticePointRepr> for LatticePoint {
    type Error = Error;

    fn try_from(r: LatticePointRepr) -> Result<Self> {
        reduce([[r.a, r.b], [r.c, r.d]])
    }
}

impl LatticePoint {
    /// The square lattice `Z^2`.
    pub fn square() -> Self {
        reduce([[1.0, 0.0], [0.0, 1.0]]).expect("identity is unimodular")
    }

    /// The hexagonal lattice of covolume one.
    pub fn hexagonal() -> Self {
        Self::from_coords(0.5, 3f64.sqrt() / 2.0, 0.0).expect("hexagonal shape is valid")
    }

    /// Builds the lattice with shape `x + i y` and angle `theta`. The shape
    /// need not lie in the fundamental domain; the result is reduced.
    pub fn from_coords(x: f64, y: f64, theta: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid shape x={x}, y={y}, theta={theta}"
            )));
        }
        reduce(basis_from_coords(x, y, theta))
    }

    pub(crate) fn from_parts(m: [[f64; 2]; 2], coords: Coords) -> Self {
        Self { m, coords }
    }

    /// Basis matrix `[[a, b], [c, d]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn coords(&self) -> Coords {
        self.coords
    }

    /// Always true: every `LatticePoint` holds its canonical representative.
    pub fn is_reduced(&self) -> bool {
        true
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        a * d - b * c
    }

    /// Basis holonomies `(m1, m2)`.
    pub fn basis(&self) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.m;
        [Complex64::new(a, c), Complex64::new(b, d)]
    }

    /// Holonomy of the integer vector `p` in the stored basis.
    pub fn holonomy(&self, p: [i64; 2]) -> Complex64 {
        let [m1, m2] = self.basis();
        m1 * p[0] as f64 + m2 * p[1] as f64
    }

    /// Length of the shortest nonzero lattice vector.
    pub fn systole(&self) -> f64 {
        self.basis()[0].norm()
    }

    /// Horocycle flow `u_t = [[1, t], [0, 1]]` acting on holonomies by
    /// `(x, y) -> (x + t y, y)`.
    pub fn horocycle(&self, t: f64) -> LatticePoint {
        self.horocycle_with_transform(t).0
    }

    /// Horocycle flow returning also the change of basis `U` such that the
    /// new basis is `u_t M U` (up to determinant renormalisation).
    pub fn horocycle_with_transform(&self, t: f64) -> (LatticePoint, Unimodular) {
        let m = horocycle_matrix(self.m, t);
        reduce::reduce_unconditioned(m).expect("horocycle preserves unimodularity")
    }

    /// Geodesic flow `g_s = diag(e^s, e^-s)`.
    pub fn geodesic(&self, s: f64) -> Result<LatticePoint> {
        if !(s.abs() <= GEODESIC_GUARD) {
            return Err(Error::Overflow(s));
        }
        let (es, ems) = (s.exp(), (-s).exp());
        let [[a, b], [c, d]] = self.m;
        reduce::reduce_unconditioned([[es * a, es * b], [ems * c, ems * d]]).map(|(p, _)| p)
    }

    /// Coordinate distance between two lattice points.
    pub fn coord_distance(&self, other: &LatticePoint) -> f64 {
        self.coords.distance(&other.coords)
    }
}

/// `u_t M` without reduction.
pub fn horocycle_matrix(m: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let [[a, b], [c, d]] = m;
    [[a + t * c, b + t * d], [c, d]]
}

/// The basis `m1 = y^{-1/2} e^{i theta/2}`, `m2 = (x + i y) m1`, as a matrix;
/// `theta` is not wrapped, which keeps nearby angles on the same branch.
pub fn basis_from_coords(x: f64, y: f64, theta: f64) -> [[f64; 2]; 2] {
    let r = y.sqrt().recip();
    let (s, c) = (0.5 * theta).sin_cos();
    [[r * c, r * (x * c - y * s)], [r * s, r * (x * s + y * c)]]
}

/// Velocity `d/dt (x, y, theta)` of the horocycle flow in fundamental-domain
/// coordinates: `x' = y cos theta`, `y' = -y sin theta`, `theta' = cos theta - 1`.
pub fn horocycle_orbit_speed(coords: &Coords) -> [f64; 3] {
    let (s, c) = coords.theta.sin_cos();
    [coords.y * c, -coords.y * s, c - 1.0]
}
