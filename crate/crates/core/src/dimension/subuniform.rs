use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{haar_density, Coords, HaarSampler};
use crate::stats::{linear_fit, MeanAcc};
use crate::{Error, Result};

/// Haar mass of a coordinate ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMass {
    pub center: Coords,
    pub r: f64,
    pub mass: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubUniformityReport {
    pub beta: f64,
    pub radii: Vec<f64>,
    pub n_centers: usize,
    /// Centres are Haar points with systole at least this.
    pub s: f64,
    pub masses: Vec<BallMass>,
    /// `min mass / r^beta`.
    pub c: f64,
    /// Slope and `r^2` of `log mass` on `log r` with one intercept per centre.
    pub slope: f64,
    pub r_squared: f64,
}

/// Monte Carlo mass of the coordinate ball `B(center, r)` by sampling the
/// ball uniformly and averaging the Haar density (zero off the domain).
pub fn ball_mass<R: Rng>(center: &Coords, r: f64, n: usize, rng: &mut R) -> BallMass {
    let volume = 4.0 / 3.0 * PI * r * r * r;
    let mut acc = MeanAcc::new();
    while (acc.count() as usize) < n {
        let u: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if u.iter().map(|v| v * v).sum::<f64>() > 1.0 {
            continue;
        }
        let p = Coords::new(
            center.x + r * u[0],
            center.y + r * u[1],
            (center.theta + r * u[2]).rem_euclid(TAU),
        );
        acc.push(volume * haar_density(&p));
    }
    BallMass {
        center: *center,
        r,
        mass: acc.mean(),
        stderr: acc.stderr(),
    }
}

/// Ball masses at each radius around `n_centers` Haar points with systole
/// `>= s`, each estimated from `n_mc` draws.
pub fn sub_uniformity(
    n_centers: usize,
    radii: &[f64],
    s: f64,
    n_mc: usize,
    beta: f64,
    seed: u64,
) -> Result<SubUniformityReport> {
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput(
            "need at least two positive radii".into(),
        ));
    }
    let sampler = HaarSampler::new(seed);
    let mut rng = sampler.rng(0);
    let mut centers = Vec::with_capacity(n_centers);
    while centers.len() < n_centers {
        let p = crate::lattice::draw(&mut rng);
        if p.systole() >= s {
            centers.push(p.coords());
        }
    }
    let masses: Vec<BallMass> = centers
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, c)| {
            let mut rng = sampler.rng(1 + i as u64);
            radii
                .iter()
                .map(move |&r| ball_mass(c, r, n_mc, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    let c = masses
        .iter()
        .map(|m| m.mass / m.r.powf(beta))
        .fold(f64::INFINITY, f64::min);

    let k = radii.len();
    let mean_lr = radii.iter().map(|r| r.ln()).sum::<f64>() / k as f64;
    let mut xs = Vec::with_capacity(masses.len());
    let mut ys = Vec::with_capacity(masses.len());
    for chunk in masses.chunks(k) {
        let mean_lm = chunk.iter().map(|m| m.mass.ln()).sum::<f64>() / k as f64;
        for m in chunk {
            xs.push(m.r.ln() - mean_lr);
            ys.push(m.mass.ln() - mean_lm);
        }
    }
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::InvalidInput("radii coincide".into()))?;
    Ok(SubUniformityReport {
        beta,
        radii: radii.to_vec(),
        n_centers,
        s,
        masses,
        c,
        slope: fit.slope,
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn interior_ball_matches_density() {
        let c = Coords::new(0.0, 2.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = ball_mass(&c, 0.05, 20_000, &mut rng);
        let expected = 4.0 / 3.0 * PI * 0.05f64.powi(3) * 3.0 / (2.0 * PI * PI) / 4.0;
        assert!((m.mass - expected).abs() < 0.01 * expected, "{m:?}");
    }

    #[test]
    fn cubic_scaling() {
        let r = sub_uniformity(20, &[0.05, 0.02, 0.01], 0.5, 2_000, 3.0, 4).unwrap();
        assert!(r.c > 0.0);
        assert!((r.slope - 3.0).abs() < 0.2, "{}", r.slope);
        assert!(r.r_squared >= 0.95);
    }
}
