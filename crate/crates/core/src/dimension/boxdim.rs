use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::linear_fit;
use crate::{Error, Result};

pub const MIN_SCALES: usize = 4;
/// Required span `log10(max scale / min scale)`.
pub const MIN_DECADES: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDimEstimate {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Slope of `log N(delta)` against `log(1/delta)`.
    pub dim_hat: f64,
    pub r_squared: f64,
}

/// Box-counting dimension of a point cloud with boxes `prod [k delta, (k+1) delta)`
/// anchored at the origin. Counts are nonincreasing in `delta` when the
/// scales are nested (each an integer multiple of the next smaller one).
/// An empty cloud has dimension 0.
pub fn box_dimension(points: &[[f64; 3]], scales: &[f64]) -> Result<BoxDimEstimate> {
    if scales.len() < MIN_SCALES {
        return Err(Error::DegenerateScales(format!(
            "{} scales given, need {MIN_SCALES}",
            scales.len()
        )));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::DegenerateScales(format!(
            "scale {s} is not positive"
        )));
    }
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().cloned().fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    if decades < MIN_DECADES {
        return Err(Error::DegenerateScales(format!(
            "scales span {decades:.3} decades, need {MIN_DECADES}"
        )));
    }
    let mut order: Vec<usize> = (0..scales.len()).collect();
    order.sort_by(|&a, &b| scales[b].total_cmp(&scales[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| scales[i]).collect();
    let counts: Vec<u64> = sorted
        .iter()
        .map(|&d| {
            let boxes: HashSet<[i64; 3]> = points
                .iter()
                .map(|p| {
                    [
                        (p[0] / d).floor() as i64,
                        (p[1] / d).floor() as i64,
                        (p[2] / d).floor() as i64,
                    ]
                })
                .collect();
            boxes.len() as u64
        })
        .collect();
    if points.is_empty() {
        return Ok(BoxDimEstimate {
            scales: sorted,
            counts,
            dim_hat: 0.0,
            r_squared: 1.0,
        });
    }
    let xs: Vec<f64> = sorted.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit =
        linear_fit(&xs, &ys).ok_or_else(|| Error::DegenerateScales("scales coincide".into()))?;
    Ok(BoxDimEstimate {
        scales: sorted,
        counts,
        dim_hat: fit.slope.max(0.0),
        r_squared: fit.r_squared,
    })
}

/// Midpoints of the `2^depth` intervals of the middle-thirds construction,
/// placed on the segment `x = 0, y = 1 + c, theta = 0`.
pub fn cantor_cloud(depth: u32) -> Vec<[f64; 3]> {
    let mut intervals = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        intervals = intervals
            .into_iter()
            .flat_map(|(a, b)| {
                let w = (b - a) / 3.0;
                [(a, a + w), (b - w, b)]
            })
            .collect();
    }
    intervals
        .into_iter()
        .map(|(a, b)| [0.0, 1.0 + 0.5 * (a + b), 0.0])
        .collect()
}

/// `n` uniform points in the unit cube.
pub fn cube_cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
}
