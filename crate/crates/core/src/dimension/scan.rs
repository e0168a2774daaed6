use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boxdim::{box_dimension, BoxDimEstimate};
use crate::bounds::{main_bound, BoundParams};
use crate::dynamics::{exceptional_indicator, LacunaryGrid};
use crate::lattice::{wrap_angle, LatticePoint};
use crate::observables::{point_in_domain, Observable};
use crate::{Error, Result};

/// A box in `(x, y, theta)` sampled at cell centres; cells outside the open
/// fundamental domain are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRegion {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub resolution: [usize; 3],
}

impl ScanRegion {
    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|i| (self.hi[i] - self.lo[i]) / self.resolution[i] as f64)
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        let h = self.spacing();
        let [nx, ny, nt] = self.resolution;
        let mut out = Vec::with_capacity(nx * ny * nt);
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nt {
                    let c = [
                        self.lo[0] + (i as f64 + 0.5) * h[0],
                        self.lo[1] + (j as f64 + 0.5) * h[1],
                        self.lo[2] + (k as f64 + 0.5) * h[2],
                    ];
                    if let Ok(p) = point_in_domain(c) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub region: ScanRegion,
    pub epsilon: f64,
    pub kappa: f64,
    pub m: u32,
    #[serde(rename = "T")]
    pub t: f64,
    pub grid_points: usize,
    pub members: usize,
    /// Members whose classification is within the quadrature error.
    pub uncertain: usize,
    pub estimate: BoxDimEstimate,
    /// `3 - min(1, gamma_hat) / 2` when a rate is supplied.
    pub ceiling: Option<f64>,
    #[serde(skip)]
    pub cloud: Vec<[f64; 3]>,
}

fn classify(
    f: &Observable,
    pts: &[LatticePoint],
    grid: &LacunaryGrid,
    kappa: f64,
    m: u32,
    step: f64,
) -> Result<Vec<(bool, bool)>> {
    pts.par_iter()
        .map(|p| {
            exceptional_indicator(f, p, grid, kappa, m, step)
                .map(|s| (s.in_exceptional(), s.boundary_uncertain))
        })
        .collect()
}

/// Evaluates the indicator of `E(epsilon, kappa, m)` on the region and
/// box-counts the members in coordinates. The finite-`m` set is only a proxy
/// for the exceptional set; `ceiling` is the dimension bound it is set
/// against.
#[allow(clippy::too_many_arguments)]
pub fn exceptional_set_scan(
    f: &Observable,
    region: &ScanRegion,
    grid: &LacunaryGrid,
    kappa: f64,
    m: u32,
    scales: &[f64],
    step: f64,
    gamma_hat: Option<f64>,
) -> Result<ScanReport> {
    let finest = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let coarse = region.spacing().iter().cloned().fold(0.0, f64::max);
    if coarse > finest {
        return Err(Error::InvalidInput(format!(
            "grid spacing {coarse} exceeds the finest scale {finest}"
        )));
    }
    let pts = region.points();
    let flags = classify(f, &pts, grid, kappa, m, step)?;
    let cloud: Vec<[f64; 3]> = pts
        .iter()
        .zip(&flags)
        .filter(|(_, fl)| fl.0)
        .map(|(p, _)| p.coords().as_array())
        .collect();
    let uncertain = flags.iter().filter(|fl| fl.0 && fl.1).count();
    let estimate = box_dimension(&cloud, scales)?;
    let ceiling = gamma_hat
        .map(|g| main_bound(&BoundParams::new(2.0, 3.0, g)))
        .transpose()?;
    Ok(ScanReport {
        region: *region,
        epsilon: grid.epsilon,
        kappa,
        m,
        t: grid.time(m),
        grid_points: pts.len(),
        members: cloud.len(),
        uncertain,
        estimate,
        ceiling,
        cloud,
    })
}

/// Concentration of exceptional points near `theta = 0`, where the short
/// vector is horizontal and the horocycle orbit is closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLocusReport {
    pub band: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub grid_points: usize,
    pub members: usize,
    pub band_points: usize,
    pub band_members: usize,
    /// Share of members in the band divided by the band's share of the grid.
    pub enrichment: f64,
}

pub fn periodic_locus_demo(
    f: &Observable,
    region: &ScanRegion,
    grid: &LacunaryGrid,
    kappa: f64,
    m: u32,
    step: f64,
    band: f64,
) -> Result<PeriodicLocusReport> {
    let pts = region.points();
    let flags = classify(f, &pts, grid, kappa, m, step)?;
    let in_band: Vec<bool> = pts
        .iter()
        .map(|p| wrap_angle(p.coords().theta).abs() < band)
        .collect();
    let members = flags.iter().filter(|fl| fl.0).count();
    let band_points = in_band.iter().filter(|&&b| b).count();
    let band_members = flags
        .iter()
        .zip(&in_band)
        .filter(|(fl, &b)| fl.0 && b)
        .count();
    let enrichment = if members == 0 || band_points == 0 {
        0.0
    } else {
        (band_members as f64 / members as f64) / (band_points as f64 / pts.len() as f64)
    };
    Ok(PeriodicLocusReport {
        band,
        t: grid.time(m),
        grid_points: pts.len(),
        members,
        band_points,
        band_members,
        enrichment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Coords;
    use crate::observables::{preset, Bump, Profile};
    use std::f64::consts::PI;

    #[test]
    fn zero_function_has_empty_set() {
        let region = ScanRegion {
            lo: [-0.4, 1.0, 0.0],
            hi: [0.4, 1.8, 2.0 * PI],
            resolution: [4, 4, 40],
        };
        let grid = LacunaryGrid::new(0.1, 20).unwrap();
        let scales = [8.0, 4.0, 2.0, 1.0, 0.5, 0.2];
        let r = exceptional_set_scan(
            &Observable::zero(),
            &region,
            &grid,
            0.5,
            20,
            &scales,
            0.05,
            Some(0.5),
        )
        .unwrap();
        assert_eq!(r.members, 0);
        assert_eq!(r.estimate.dim_hat, 0.0);
        assert_eq!(r.ceiling, Some(2.75));
    }

    #[test]
    fn large_function_fills_grid() {
        let b = Bump {
            center: Coords::new(0.0, 3.0, PI),
            radii: [0.5, 2.0, PI],
            amplitude: 100.0,
            plateau: 0.9,
            profile: Profile::Hat,
        };
        let f = Observable::bump(b)
            .unwrap()
            .normalize_zero_mean(20_000, 3)
            .unwrap();
        let region = ScanRegion {
            lo: [-0.3, 1.4, 2.84],
            hi: [0.3, 2.0, 3.44],
            resolution: [60, 60, 60],
        };
        let grid = LacunaryGrid::new(0.1, 5).unwrap();
        let scales = [0.32, 0.16, 0.08, 0.04, 0.02, 0.0101];
        let r = exceptional_set_scan(&f, &region, &grid, 0.9, 0, &scales, 0.01, None).unwrap();
        assert!(
            r.members as f64 > 0.95 * r.grid_points as f64,
            "{} of {}",
            r.members,
            r.grid_points
        );
        // Edge effects of the finite box pull the slope below 3 at coarse scales.
        assert!(r.estimate.dim_hat > 2.5, "{:?}", r.estimate);
    }

    #[test]
    fn rejects_coarse_grid() {
        let region = ScanRegion {
            lo: [-0.4, 1.0, 0.0],
            hi: [0.4, 1.8, 2.0 * PI],
            resolution: [4, 4, 4],
        };
        let grid = LacunaryGrid::new(0.1, 5).unwrap();
        let f = preset("central-hat").unwrap();
        assert!(exceptional_set_scan(
            &f,
            &region,
            &grid,
            0.5,
            2,
            &[1.0, 0.5, 0.1, 0.01],
            0.05,
            None
        )
        .is_err());
    }

    #[test]
    fn exceptional_points_gather_near_closed_orbits() {
        let f = preset("mixing")
            .unwrap()
            .normalize_zero_mean(20_000, 3)
            .unwrap();
        let region = ScanRegion {
            lo: [-0.45, 1.1, 0.0],
            hi: [0.45, 2.5, 2.0 * PI],
            resolution: [10, 10, 64],
        };
        let grid = LacunaryGrid::new(0.1, 40).unwrap();
        let r = periodic_locus_demo(&f, &region, &grid, 0.5, 40, 0.05, 0.1).unwrap();
        assert!(r.band_members > 0);
        assert!(r.enrichment > 2.0, "{r:?}");
    }
}
