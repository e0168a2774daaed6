//! A countable family of hat bumps and piecewise-trilinear interpolants in
//! its span.
//!
//! Members are tensor products of one-dimensional dyadic hats on the
//! reference box `x in [-1/2, 1/2]`, `y in [1, 3]`, `theta in [0, 2 pi]`.
//! Along each axis, level `k` has `2^k` hats with centres at
//! `lo + (j + 1/2) ext / 2^k` and half-width `ext / 2^(k+1)`. A family of
//! depth `D` uses levels `0..=D` on every axis independently, so it has
//! `(2^(D+1) - 1)^3` members. Finite combinations of members up to level `K`
//! are exactly the trilinear interpolants on the grid of spacing
//! `ext / 2^(K+1)` vanishing on the box faces.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Observable, Profile};
use crate::lattice::Coords;
use crate::{Error, Result};

/// `[lo, hi]` per coordinate of the box carrying the family.
pub const REFERENCE_BOX: [[f64; 2]; 3] = [[-0.5, 0.5], [1.0, 3.0], [0.0, TAU]];
/// Largest supported depth.
pub const MAX_DEPTH: u32 = 8;

/// Deterministic enumeration of the hat family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseFamily {
    pub depth: u32,
}

pub fn dense_family(depth: u32) -> Result<DenseFamily> {
    if depth > MAX_DEPTH {
        return Err(Error::InvalidInput(format!(
            "depth {depth} exceeds {MAX_DEPTH}"
        )));
    }
    Ok(DenseFamily { depth })
}

impl DenseFamily {
    /// One-dimensional hats per axis, `2^(D+1) - 1`.
    pub fn per_axis(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    /// `(2^(D+1) - 1)^3`.
    pub fn len(&self) -> usize {
        self.per_axis().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(level, index)` per axis of member `i`. Axes are ordered
    /// `x, y, theta`, and within an axis hats are ordered by level then index.
    pub fn decode(&self, i: usize) -> [(u32, usize); 3] {
        let p = self.per_axis();
        let flat = [i / (p * p), (i / p) % p, i % p];
        flat.map(|a| {
            let k = usize::BITS - 1 - (a + 1).leading_zeros();
            (k, a + 1 - (1 << k))
        })
    }

    pub fn encode(&self, levels: [(u32, usize); 3]) -> usize {
        let p = self.per_axis();
        let flat = levels.map(|(k, j)| (1usize << k) - 1 + j);
        (flat[0] * p + flat[1]) * p + flat[2]
    }

    /// Member `i` as an observable.
    pub fn member(&self, i: usize) -> Observable {
        let axes = self.decode(i);
        let mut center = [0.0; 3];
        let mut radii = [0.0; 3];
        for a in 0..3 {
            let (k, j) = axes[a];
            let [lo, hi] = REFERENCE_BOX[a];
            let width = (hi - lo) / (1u64 << k) as f64;
            center[a] = lo + (j as f64 + 0.5) * width;
            radii[a] = 0.5 * width;
        }
        Observable::bump(super::Bump {
            center: Coords::new(center[0], center[1], center[2]),
            radii,
            amplitude: 1.0,
            plateau: 0.0,
            profile: Profile::Hat,
        })
        .expect("family members fit the reference box")
    }

    pub fn iter(&self) -> impl Iterator<Item = Observable> + '_ {
        (0..self.len()).map(|i| self.member(i))
    }

    /// Interpolant of `f` on the level-`level` grid (a finite combination of
    /// members of level at most `level`).
    pub fn approximate(&self, f: &Observable, level: u32) -> Result<NodalGrid> {
        if level > self.depth {
            return Err(Error::InvalidInput(format!(
                "level {level} exceeds depth {}",
                self.depth
            )));
        }
        Ok(NodalGrid::sample(level, |c| f.eval_coords(c)))
    }

    /// Expansion of a grid in the family: `(member index, coefficient)` for
    /// every nonzero hierarchical surplus.
    pub fn coefficients(&self, grid: &NodalGrid) -> Result<Vec<(usize, f64)>> {
        if grid.level > self.depth {
            return Err(Error::InvalidInput(format!(
                "grid level {} exceeds depth {}",
                grid.level, self.depth
            )));
        }
        let n = grid.intervals();
        let s = grid.surpluses();
        let mut out = Vec::new();
        for ix in 1..n {
            for iy in 1..n {
                for it in 1..n {
                    let v = s[grid.idx(ix, iy, it)];
                    if v != 0.0 {
                        let lv = [ix, iy, it].map(|i| node_level(grid.level, i));
                        out.push((self.encode(lv), v));
                    }
                }
            }
        }
        out.sort_by_key(|&(i, _)| i);
        Ok(out)
    }
}

/// `(level, index)` of the hat centred at interior node `i` of a level-`top` grid.
fn node_level(top: u32, i: usize) -> (u32, usize) {
    let tz = i.trailing_zeros();
    (top - tz, ((i >> tz) - 1) / 2)
}

/// Piecewise-trilinear function on the reference box, zero on its faces and
/// outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalGrid {
    pub level: u32,
    /// Node values, `theta` fastest, on `(2^(level+1) + 1)^3` nodes.
    pub values: Vec<f64>,
}

impl NodalGrid {
    /// Nodal values from `f`, with the faces set to zero.
    pub fn sample(level: u32, f: impl Fn(&Coords) -> f64) -> Self {
        let n = 1usize << (level + 1);
        let mut values = vec![0.0; (n + 1).pow(3)];
        let h = spacing(level);
        for ix in 1..n {
            for iy in 1..n {
                for it in 1..n {
                    let c = Coords::new(
                        REFERENCE_BOX[0][0] + ix as f64 * h[0],
                        REFERENCE_BOX[1][0] + iy as f64 * h[1],
                        REFERENCE_BOX[2][0] + it as f64 * h[2],
                    );
                    values[(ix * (n + 1) + iy) * (n + 1) + it] = f(&c);
                }
            }
        }
        Self { level, values }
    }

    pub fn intervals(&self) -> usize {
        1 << (self.level + 1)
    }

    fn idx(&self, ix: usize, iy: usize, it: usize) -> usize {
        let m = self.intervals() + 1;
        (ix * m + iy) * m + it
    }

    pub fn bounds(&self) -> [[f64; 2]; 3] {
        REFERENCE_BOX
    }

    pub fn y_max(&self) -> f64 {
        REFERENCE_BOX[1][1]
    }

    /// Minimum and maximum nodal value (the faces contribute zero).
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn eval_coords(&self, c: &Coords) -> f64 {
        let n = self.intervals();
        let h = spacing(self.level);
        let pos = [c.x, c.y, c.theta];
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let [lo, hi] = REFERENCE_BOX[a];
            if !(pos[a] >= lo && pos[a] <= hi) {
                return 0.0;
            }
            let s = (pos[a] - lo) / h[a];
            let i = (s.floor() as usize).min(n - 1);
            cell[a] = i;
            frac[a] = s - i as f64;
        }
        let mut v = 0.0;
        for corner in 0..8 {
            let d = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
            let mut w = 1.0;
            for a in 0..3 {
                w *= if d[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                v += w * self.values[self.idx(cell[0] + d[0], cell[1] + d[1], cell[2] + d[2])];
            }
        }
        v
    }

    /// `sqrt(sum_a (max edge slope along a)^2)`; trilinear partial derivatives
    /// are convex combinations of edge slopes.
    pub fn lipschitz(&self) -> f64 {
        let n = self.intervals();
        let h = spacing(self.level);
        let mut slope = [0.0f64; 3];
        for ix in 0..=n {
            for iy in 0..=n {
                for it in 0..=n {
                    let v = self.values[self.idx(ix, iy, it)];
                    if ix < n {
                        slope[0] =
                            slope[0].max((self.values[self.idx(ix + 1, iy, it)] - v).abs() / h[0]);
                    }
                    if iy < n {
                        slope[1] =
                            slope[1].max((self.values[self.idx(ix, iy + 1, it)] - v).abs() / h[1]);
                    }
                    if it < n {
                        slope[2] =
                            slope[2].max((self.values[self.idx(ix, iy, it + 1)] - v).abs() / h[2]);
                    }
                }
            }
        }
        slope.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Hierarchical surpluses: one-dimensional hierarchisation applied along
    /// each axis in turn.
    pub fn surpluses(&self) -> Vec<f64> {
        let n = self.intervals();
        let mut s = self.values.clone();
        let m = n + 1;
        let strides = [m * m, m, 1];
        for &stride in &strides {
            for base in 0..s.len() {
                // visit each line along axis `a` once, from its first node
                if (base / stride) % m != 0 {
                    continue;
                }
                let mut tz = 0;
                while (1usize << tz) < n {
                    let step = 1usize << tz;
                    let mut i = step;
                    while i < n {
                        let left = s[base + (i - step) * stride];
                        let right = s[base + (i + step) * stride];
                        s[base + i * stride] -= 0.5 * (left + right);
                        i += 2 * step;
                    }
                    tz += 1;
                }
            }
        }
        s
    }
}

fn spacing(level: u32) -> [f64; 3] {
    let n = (1u64 << (level + 1)) as f64;
    REFERENCE_BOX.map(|[lo, hi]| (hi - lo) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn member_counts() {
        assert_eq!(dense_family(0).unwrap().len(), 1);
        // three levels-0/1 hats per axis
        assert_eq!(dense_family(1).unwrap().len(), 27);
        assert_eq!(dense_family(3).unwrap().len(), 15usize.pow(3));
        assert!(dense_family(9).is_err());
    }

    #[test]
    fn decode_inverts_encode() {
        let fam = dense_family(3).unwrap();
        for i in (0..fam.len()).step_by(37) {
            assert_eq!(fam.encode(fam.decode(i)), i);
        }
        assert_eq!(fam.decode(0), [(0, 0); 3]);
    }

    #[test]
    fn members_are_valid_bumps() {
        let fam = dense_family(2).unwrap();
        for f in fam.iter() {
            assert!(f.support_systole > 0.0);
            assert_eq!(f.sup_norm, 1.0);
        }
    }

    #[test]
    fn coefficients_reproduce_the_interpolant() {
        let fam = dense_family(2).unwrap();
        let f = Observable::hat(Coords::new(0.05, 1.9, 2.0), [0.3, 0.7, 1.2], 1.0).unwrap();
        let grid = fam.approximate(&f, 2).unwrap();
        let coeffs = fam.coefficients(&grid).unwrap();
        let members: Vec<_> = coeffs.iter().map(|&(i, c)| (fam.member(i), c)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let c = Coords::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(1.0..3.0),
                rng.gen_range(0.0..TAU),
            );
            let direct = grid.eval_coords(&c);
            let expanded: f64 = members.iter().map(|(g, w)| w * g.eval_coords(&c)).sum();
            assert!((direct - expanded).abs() < 1e-12, "{direct} vs {expanded}");
        }
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_lipschitz() {
        let f = Observable::hat(Coords::new(0.0, 2.0, 3.0), [0.25, 0.5, 1.0], 2.0).unwrap();
        let grid = NodalGrid::sample(3, |c| f.eval_coords(c));
        let g = Observable::interpolant(grid);
        assert!(g.lip_coord <= f.lip_coord * (1.0 + 1e-12));
        assert!(g.sup_norm <= f.sup_norm);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let p = Coords::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(1.0..3.0),
                rng.gen_range(0.0..TAU),
            );
            let q = Coords::new(p.x + 1e-3, p.y - 2e-3, p.theta + 1e-3);
            assert!(
                (g.eval_coords(&p) - g.eval_coords(&q)).abs()
                    <= g.lip_coord * p.distance(&q) * (1.0 + 1e-12)
            );
        }
    }
}
