//! Small statistical kernels shared by the estimators.
//!
//! Monte Carlo work is split into fixed-size chunks. Chunk `c` always draws
//! from RNG stream `c`, and partial results are merged by a pairwise tree whose
//! shape depends only on the number of chunks. Results are therefore
//! bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of samples per RNG stream / work unit.
pub const CHUNK: usize = 1024;

/// Running mean and second central moment (Welford, Chan et al. merge).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAcc {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAcc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(mut self, other: MeanAcc) -> MeanAcc {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
        self
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Splits `0..n` into `CHUNK`-sized ranges and maps them in parallel.
/// The output vector is in chunk order.
pub fn par_chunks<A, F>(n: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(u64, std::ops::Range<usize>) -> A + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            f(c as u64, start..end)
        })
        .collect()
}

/// Pairwise reduction with fixed arity two; the tree shape depends only on
/// `items.len()`.
pub fn tree_reduce<A, F>(mut items: Vec<A>, merge: F) -> Option<A>
where
    F: Fn(A, A) -> A,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Merges per-chunk vectors of accumulators elementwise.
pub fn reduce_acc_vectors(parts: Vec<Vec<MeanAcc>>, width: usize) -> Vec<MeanAcc> {
    tree_reduce(parts, |a, b| {
        a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
    })
    .unwrap_or_else(|| vec![MeanAcc::new(); width])
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a line through `(x, y)` pairs. Returns `None` for fewer than two
/// points or when all `x` coincide. A perfect fit (including a flat series)
/// reports `r_squared = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if syy <= f64::EPSILON * nf * (1.0 + my * my) {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let data: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 * 0.25 - 3.0)
            .collect();
        let mut acc = MeanAcc::new();
        data.iter().for_each(|&v| acc.push(v));
        let mean = data.iter().sum::<f64>() / 1000.0;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((acc.mean() - mean).abs() < 1e-12);
        assert!((acc.variance() - var).abs() < 1e-9);
    }

    #[test]
    fn merge_is_equivalent_to_sequential_push() {
        let mut left = MeanAcc::new();
        let mut right = MeanAcc::new();
        let mut all = MeanAcc::new();
        for i in 0..50 {
            let v = (i as f64).sin();
            if i < 20 {
                left.push(v)
            } else {
                right.push(v)
            }
            all.push(v);
        }
        let merged = left.merge(right);
        assert_eq!(merged.count(), 50);
        assert!((merged.mean() - all.mean()).abs() < 1e-14);
        assert!((merged.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn tree_reduce_shape_is_fixed() {
        let v: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let out = tree_reduce(v, |a, b| format!("({a}{b})")).unwrap();
        assert_eq!(out, "(((01)(23))4)");
    }

    #[test]
    fn exact_line_is_recovered() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_needs_spread_in_x() {
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_none());
        assert!(linear_fit(&[1.0], &[0.0]).is_none());
    }
}
