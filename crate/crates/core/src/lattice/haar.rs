//! Exact sampling from normalised Haar measure.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{basis_from_coords, reduce::reduce_unconditioned, Coords, LatticePoint};
use crate::stats::par_chunks;

/// A Haar-distributed lattice together with where it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarSample {
    pub point: LatticePoint,
    /// RNG stream (chunk) the sample was drawn from.
    pub stream: u64,
    /// Position within the stream.
    pub index: u32,
}

/// Probability density of Haar measure in `(x, y, theta)`; zero off the
/// fundamental domain.
pub fn haar_density(c: &Coords) -> f64 {
    if c.in_fundamental_domain(0.0) && (0.0..TAU).contains(&c.theta) {
        3.0 / (2.0 * PI * PI) / (c.y * c.y)
    } else {
        0.0
    }
}

/// Deterministic sampler; chunk `c` always uses ChaCha stream `c`.
#[derive(Clone, Copy, Debug)]
pub struct HaarSampler {
    seed: u64,
}

impl HaarSampler {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// The first `len` samples of stream `c`.
    pub fn chunk(&self, c: u64, len: usize) -> Vec<HaarSample> {
        let mut rng = self.rng(c);
        (0..len)
            .map(|i| HaarSample {
                point: draw(&mut rng),
                stream: c,
                index: i as u32,
            })
            .collect()
    }

    /// `n` samples: chunks of [`crate::stats::CHUNK`] drawn in parallel and concatenated.
    pub fn sample(&self, n: usize) -> Vec<HaarSample> {
        par_chunks(n, |c, r| self.chunk(c, r.len()))
            .into_iter()
            .flatten()
            .collect()
    }
}

/// `n` Haar samples from `seed`; see [`HaarSampler`].
pub fn sample_haar(seed: u64, n: usize) -> Vec<HaarSample> {
    HaarSampler::new(seed).sample(n)
}

/// One draw: `x` by rejection against `1/sqrt(1 - x^2)`, `y` by inverting the
/// conditional CDF `1 - sqrt(1 - x^2)/y`, `theta` uniform.
pub fn draw<R: Rng>(rng: &mut R) -> LatticePoint {
    let envelope = 2.0 / 3f64.sqrt();
    let x = loop {
        let x: f64 = rng.gen_range(-0.5..0.5);
        let w = 1.0 / (1.0 - x * x).sqrt();
        if rng.gen::<f64>() * envelope < w {
            break x;
        }
    };
    let u: f64 = rng.gen();
    let y = (1.0 - x * x).sqrt() / (1.0 - u);
    let theta = TAU * rng.gen::<f64>();
    reduce_unconditioned(basis_from_coords(x, y, theta))
        .expect("fundamental-domain basis is unimodular")
        .0
}
