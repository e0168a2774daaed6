//! Compactly supported Lipschitz test functions on the torus stratum.
//!
//! All observables are functions of the fundamental-domain coordinates
//! `(x, y, theta)`. Their supports sit strictly inside the fundamental domain,
//! so they are continuous on the quotient and the coordinate Lipschitz
//! constant is a Lipschitz constant along any orbit or chart path.

mod family;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agy::agy_distance_local;
use crate::lattice::{wrap_angle, Coords, HaarSampler, LatticePoint};
use crate::stats::{par_chunks, tree_reduce, MeanAcc};
use crate::{Error, Result};

pub use family::{dense_family, DenseFamily, NodalGrid, REFERENCE_BOX};

/// Smallest sample count accepted for a Monte Carlo mean.
pub const MIN_MEAN_SAMPLES: usize = 10_000;
/// Pairs sampled when certifying the AGY Lipschitz constant.
pub const DEFAULT_DISTORTION_PAIRS: usize = 10_000;

/// One-dimensional profile of a bump, as a function of the normalised
/// distance `u = |coord - centre| / radius`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `1` on the plateau, then linear down to `0` at `u = 1`.
    Hat,
    /// As `Hat` with the ramp replaced by `1 - S(s)`, `S(s) = 3s^2 - 2s^3`.
    Smoothstep,
}

impl Profile {
    /// Value at normalised distance `u >= 0` with plateau `p in [0, 1)`.
    pub fn eval(self, u: f64, plateau: f64) -> f64 {
        if u <= plateau {
            return 1.0;
        }
        if u >= 1.0 {
            return 0.0;
        }
        let s = (u - plateau) / (1.0 - plateau);
        match self {
            Profile::Hat => 1.0 - s,
            Profile::Smoothstep => 1.0 - s * s * (3.0 - 2.0 * s),
        }
    }

    /// Largest slope of the ramp as a function of `s`.
    pub fn max_slope(self) -> f64 {
        match self {
            Profile::Hat => 1.0,
            Profile::Smoothstep => 1.5,
        }
    }
}

/// Product bump `amplitude * phi(|dx|/rx) phi(|dy|/ry) phi(|dtheta|/rtheta)`,
/// with the angle difference read on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Coords,
    pub radii: [f64; 3],
    pub amplitude: f64,
    #[serde(default)]
    pub plateau: f64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

fn default_profile() -> Profile {
    Profile::Hat
}

impl Bump {
    pub fn eval_coords(&self, c: &Coords) -> f64 {
        let d = [
            (c.x - self.center.x).abs(),
            (c.y - self.center.y).abs(),
            wrap_angle(c.theta - self.center.theta).abs(),
        ];
        let mut v = self.amplitude;
        for (di, ri) in d.iter().zip(&self.radii) {
            let u = di / ri;
            if u >= 1.0 {
                return 0.0;
            }
            v *= self.profile.eval(u, self.plateau);
        }
        v
    }

    fn validate(&self) -> Result<()> {
        let Coords { x, y, theta } = self.center;
        let [rx, ry, rt] = self.radii;
        let bad = |msg: String| Err(Error::InvalidObservable(msg));
        if ![x, y, theta, rx, ry, rt, self.amplitude, self.plateau]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite parameter".into());
        }
        if !(rx > 0.0 && ry > 0.0 && rt > 0.0) {
            return bad(format!("radii must be positive, got {:?}", self.radii));
        }
        if !(0.0..1.0).contains(&self.plateau) {
            return bad(format!("plateau {} outside [0, 1)", self.plateau));
        }
        if x.abs() + rx > 0.5 + 1e-12 {
            return bad(format!(
                "x-support [{}, {}] leaves |x| <= 1/2",
                x - rx,
                x + rx
            ));
        }
        let x_near = if x.abs() <= rx { 0.0 } else { x.abs() - rx };
        let floor = (1.0 - x_near * x_near).sqrt();
        if y - ry < floor - 1e-12 {
            return bad(format!(
                "y-support starts at {} below the unit circle ({floor})",
                y - ry
            ));
        }
        if rt > std::f64::consts::PI {
            return bad(format!("angular radius {rt} exceeds pi"));
        }
        Ok(())
    }

    fn lip_coord(&self) -> f64 {
        let k = self.profile.max_slope() / (1.0 - self.plateau);
        self.amplitude.abs() * k * self.radii.iter().map(|r| r.powi(-2)).sum::<f64>().sqrt()
    }
}

/// What an observable evaluates before the zero-mean offset is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ObservableKind {
    Bump(Bump),
    Interpolant(NodalGrid),
}

/// Monte Carlo estimate of a Haar average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Sampled ratio `coordinate distance / AGY distance` on the support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub min: f64,
    pub max: f64,
    pub pairs: usize,
}

/// A Lipschitz function, constant (equal to `-offset`) outside a compact set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub kind: ObservableKind,
    /// Subtracted from the raw value; set by [`Observable::normalize_zero_mean`].
    #[serde(default)]
    pub offset: f64,
    pub sup_norm: f64,
    pub lip_coord: f64,
    #[serde(default)]
    pub lip_agy: Option<f64>,
    #[serde(default)]
    pub distortion: Option<Distortion>,
    /// The support lies in `{systole >= support_systole}`.
    pub support_systole: f64,
    /// Haar average of the observable as it evaluates (after the offset).
    #[serde(default)]
    pub mean: Option<MeanEstimate>,
}

impl Observable {
    pub fn bump(b: Bump) -> Result<Self> {
        b.validate()?;
        Ok(Self {
            sup_norm: b.amplitude.abs(),
            lip_coord: b.lip_coord(),
            support_systole: (b.center.y + b.radii[1]).sqrt().recip(),
            kind: ObservableKind::Bump(b),
            offset: 0.0,
            lip_agy: None,
            distortion: None,
            mean: None,
        })
    }

    /// Hat bump with no plateau.
    pub fn hat(center: Coords, radii: [f64; 3], amplitude: f64) -> Result<Self> {
        Self::bump(Bump {
            center,
            radii,
            amplitude,
            plateau: 0.0,
            profile: Profile::Hat,
        })
    }

    pub fn interpolant(grid: NodalGrid) -> Self {
        let (lo, hi) = grid.range();
        Self {
            sup_norm: hi.max(-lo),
            lip_coord: grid.lipschitz(),
            support_systole: grid.y_max().sqrt().recip(),
            kind: ObservableKind::Interpolant(grid),
            offset: 0.0,
            lip_agy: None,
            distortion: None,
            mean: None,
        }
    }

    /// The observable identically zero; a hat of zero amplitude.
    pub fn zero() -> Self {
        Self::hat(Coords::new(0.0, 2.0, 0.0), [0.25, 0.5, 1.0], 0.0).expect("valid zero bump")
    }

    /// Value at fundamental-domain coordinates.
    pub fn eval_coords(&self, c: &Coords) -> f64 {
        let raw = match &self.kind {
            ObservableKind::Bump(b) => b.eval_coords(c),
            ObservableKind::Interpolant(g) => g.eval_coords(c),
        };
        raw - self.offset
    }

    pub fn evaluate(&self, pt: &LatticePoint) -> f64 {
        self.eval_coords(&pt.coords())
    }

    /// Axis-aligned coordinate box containing the support.
    pub fn support_box(&self) -> [[f64; 2]; 3] {
        match &self.kind {
            ObservableKind::Bump(b) => {
                let c = b.center.as_array();
                std::array::from_fn(|i| [c[i] - b.radii[i], c[i] + b.radii[i]])
            }
            ObservableKind::Interpolant(g) => g.bounds(),
        }
    }

    /// Range of raw values (before the offset).
    fn raw_range(&self) -> (f64, f64) {
        match &self.kind {
            ObservableKind::Bump(b) => (b.amplitude.min(0.0), b.amplitude.max(0.0)),
            ObservableKind::Interpolant(g) => {
                let (lo, hi) = g.range();
                (lo.min(0.0), hi.max(0.0))
            }
        }
    }

    /// `f - c`; the constant is carried as an offset so the support and the
    /// Lipschitz constant are unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.offset += c;
        let (lo, hi) = out.raw_range();
        out.sup_norm = (hi - out.offset).abs().max((lo - out.offset).abs());
        out.mean = self.mean.map(|m| MeanEstimate {
            value: m.value - c,
            ..m
        });
        out
    }

    /// Haar Monte Carlo average using streams of `seed`.
    pub fn estimate_mean(&self, n: usize, seed: u64) -> Result<MeanEstimate> {
        if n < MIN_MEAN_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_MEAN_SAMPLES} samples, got {n}"
            )));
        }
        let sampler = HaarSampler::new(seed);
        let parts = par_chunks(n, |c, r| {
            let mut acc = MeanAcc::new();
            for s in sampler.chunk(c, r.len()) {
                acc.push(self.evaluate(&s.point));
            }
            acc
        });
        let acc = tree_reduce(parts, MeanAcc::merge).unwrap_or_default();
        Ok(MeanEstimate {
            value: acc.mean(),
            stderr: acc.stderr(),
            n,
        })
    }

    /// `f - mean`, with the mean estimated from `n` Haar samples. The result
    /// records a mean of zero with the estimate's standard error.
    pub fn normalize_zero_mean(&self, n: usize, seed: u64) -> Result<Self> {
        let est = self.estimate_mean(n, seed)?;
        let mut out = self.shifted(est.value);
        out.mean = Some(MeanEstimate { value: 0.0, ..est });
        Ok(out)
    }

    /// Samples `pairs` nearby pairs in the support and records the range of
    /// `d_coord / d_AGY`; the AGY Lipschitz constant is then
    /// `lip_coord * max ratio`.
    pub fn certify_agy(&self, pairs: usize, seed: u64, subdivisions: usize) -> Result<Self> {
        let bx = self.support_box();
        let sampler = HaarSampler::new(seed);
        let parts = par_chunks(pairs, |c, r| {
            let mut rng = sampler.rng(c);
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            let mut n = 0;
            while n < r.len() {
                let p: [f64; 3] = std::array::from_fn(|i| rng.gen_range(bx[i][0]..=bx[i][1]));
                let scale = rng.gen_range(1e-4..1e-2);
                let dir: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    continue;
                }
                let q: [f64; 3] = std::array::from_fn(|i| p[i] + scale * dir[i] / norm);
                let (Ok(a), Ok(b)) = (point_in_domain(p), point_in_domain(q)) else {
                    continue;
                };
                let dc = a.coord_distance(&b);
                let Ok(da) = agy_distance_local(&a, &b, subdivisions) else {
                    continue;
                };
                if dc == 0.0 || da == 0.0 {
                    continue;
                }
                lo = lo.min(dc / da);
                hi = hi.max(dc / da);
                n += 1;
            }
            (lo, hi)
        });
        let (lo, hi) =
            tree_reduce(parts, |a, b| (a.0.min(b.0), a.1.max(b.1))).unwrap_or((1.0, 1.0));
        let mut out = self.clone();
        out.distortion = Some(Distortion {
            min: lo,
            max: hi,
            pairs,
        });
        out.lip_agy = Some(self.lip_coord * hi);
        Ok(out)
    }
}

/// Lattice with the given coordinates, provided they already lie in the
/// fundamental domain (so reduction does not move them).
pub(crate) fn point_in_domain(c: [f64; 3]) -> Result<LatticePoint> {
    let coords = Coords::new(c[0], c[1], c[2].rem_euclid(std::f64::consts::TAU));
    if !coords.in_fundamental_domain(0.0) || coords.x.abs() >= 0.5 {
        return Err(Error::InvalidInput(
            "outside the open fundamental domain".into(),
        ));
    }
    let p = LatticePoint::from_coords(coords.x, coords.y, coords.theta)?;
    if p.coords().distance(&coords) > 1e-9 {
        return Err(Error::InvalidInput(
            "on the boundary of the fundamental domain".into(),
        ));
    }
    Ok(p)
}

/// Named observable descriptors shipped with the crate.
pub const PRESETS_TOML: &str = include_str!("../../presets/observables.toml");

#[derive(Deserialize)]
struct PresetFile {
    presets: BTreeMap<String, Bump>,
}

/// Parses a presets file (the bundled one is [`PRESETS_TOML`]).
pub fn parse_presets(text: &str) -> Result<BTreeMap<String, Bump>> {
    toml::from_str::<PresetFile>(text)
        .map(|f| f.presets)
        .map_err(|e| Error::InvalidInput(format!("presets: {e}")))
}

/// Looks up a bundled preset by name.
pub fn preset(name: &str) -> Result<Observable> {
    let all = parse_presets(PRESETS_TOML)?;
    let b = all.get(name).ok_or_else(|| {
        let names: Vec<_> = all.keys().cloned().collect();
        Error::InvalidInput(format!(
            "unknown preset {name:?}; known: {}",
            names.join(", ")
        ))
    })?;
    Observable::bump(*b)
}

/// Names of the bundled presets.
pub fn preset_names() -> Vec<String> {
    parse_presets(PRESETS_TOML)
        .map(|m| m.into_keys().collect())
        .unwrap_or_default()
}
