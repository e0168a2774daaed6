//! The invariant suite behind `verify-all`, one function per criterion.
//! `Scale::Full` uses the published sample sizes; `Scale::Quick` shrinks
//! them for a smoke run.

use std::f64::consts::{PI, TAU};

use anyhow::{anyhow, Result};
use horolab::agy::{check_subdivergence, elementary_bound_holds};
use horolab::bounds::{
    critical_eta, main_bound, summability_flip, teichmuller_bound, time_change_bound, BoundParams,
};
use horolab::dimension::{
    box_dimension, cantor_cloud, clustering_constant, cube_cloud, sub_uniformity,
};
use horolab::dynamics::{lacunary_gap_check, LacunaryGrid};
use horolab::lattice::{draw, sample_haar, HaarSampler};
use horolab::mixing::{
    chebyshev_check, check_variance_bound, estimate_correlation, estimate_variance, fit_rate,
    variance_bound_constant, CorrelationEstimate, VarianceCheck,
};
use horolab::observables::{parse_presets, preset, PRESETS_TOML};
use horolab::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::commands::{clustering_run, run, tangent_samples, ClusteringSummary};
use crate::config::{
    default_correlation_grid, sub_seed, BoundArgs, ClusteringArgs, CommandConfig, MixingArgs,
    ObservableSpec, RunConfig, SampleArgs, ScanArgs,
};
use crate::output::Manifest;
use crate::rerun_manifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn judged(id: u32, name: &str, outcome: Result<(bool, String)>) -> CriterionResult {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    CriterionResult {
        id,
        name: name.to_string(),
        passed,
        detail,
    }
}

pub const NAMES: [&str; 10] = [
    "sub-divergence",
    "elementary shear inequality",
    "lacunary gap",
    "clustering",
    "variance bound",
    "chebyshev step",
    "bound formulas",
    "estimator oracles",
    "sub-uniformity",
    "determinism",
];

/// Runs criterion `id` (1-based).
pub fn criterion(id: u32, scale: Scale, seed: u64) -> CriterionResult {
    let s = sub_seed(seed, 100 + id as u64);
    let outcome = match id {
        1 => subdivergence(scale, s),
        2 => elementary(scale),
        3 => lacunary(scale, s),
        4 => clustering(scale, s),
        5 => variance(scale, s),
        6 => chebyshev(scale, s),
        7 => bound_formulas(),
        8 => oracles(scale, s),
        9 => subuniform(scale, s),
        10 => determinism(scale, s),
        _ => Err(anyhow!("no criterion {id}")),
    };
    judged(
        id,
        NAMES.get(id as usize - 1).copied().unwrap_or("unknown"),
        outcome,
    )
}

pub fn run_suite(scale: Scale, seed: u64) -> Vec<CriterionResult> {
    (1..=10).map(|id| criterion(id, scale, seed)).collect()
}

fn subdivergence(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let n = scale.pick(2_000, 10_000);
    let samples = tangent_samples(n, 0.0, seed);
    let cert = check_subdivergence(&samples, &[2.0, 10.0, 100.0], 0.0, seed)?;
    Ok((
        cert.max_ratio <= 8.0 * (1.0 + 1e-9),
        format!(
            "{n} samples, max |du_t v| / (t^2 |v|) = {:.6} <= 8",
            cert.max_ratio
        ),
    ))
}

fn elementary(scale: Scale) -> Result<(bool, String)> {
    let (angles, step): (usize, f64) = scale.pick((720, 0.1), (3600, 0.01));
    let nt = (200.0 / step).round() as i64;
    let mut violations = 0u64;
    let mut checked = 0u64;
    for k in 0..angles {
        let z = Complex64::from_polar(1.0, TAU * k as f64 / angles as f64);
        for j in 0..=nt {
            let t = -100.0 + j as f64 * step;
            checked += 1;
            if !elementary_bound_holds(z, t) {
                violations += 1;
            }
        }
    }
    Ok((
        violations == 0,
        format!("{checked} (z, t) grid points, {violations} violations"),
    ))
}

fn lacunary(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let n = scale.pick(100, 1000);
    let f = preset("central-smooth")?;
    let mut rng = HaarSampler::new(seed).rng(0);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let pt = draw(&mut rng);
        let t = 10f64.powf(rng.gen_range(1.0..3.0));
        let eps = rng.gen_range(0.05..0.5);
        match lacunary_gap_check(&f, &pt, t, eps, 0.05) {
            Ok(g) => worst = worst.max(g.gap / g.bound),
            Err(horolab::Error::AssertionFailure(_)) => violations += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok((
        violations == 0,
        format!("{n} configurations, {violations} violations, worst gap/bound = {worst:.4}"),
    ))
}

fn clustering(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let d_ref = clustering_constant(1.0, 2.0, 1.0, 2.0);
    let args = ClusteringArgs {
        pairs: Some(scale.pick(100, 1000)),
        distortion_pairs: Some(scale.pick(2_000, 10_000)),
        mean_samples: Some(scale.pick(20_000, 100_000)),
        ..Default::default()
    };
    let CommandConfig::ClusteringCheck(args) = CommandConfig::ClusteringCheck(args).resolved()
    else {
        unreachable!()
    };
    let sum = clustering_run(seed, &args)?;
    // Amplitude scales |A_T f| and the quadrature error alike while the
    // thresholds stay put, so a tall copy has certified exceptional points
    // for the complement form.
    let mut tall = parse_presets(PRESETS_TOML)?
        .remove("central-smooth")
        .ok_or_else(|| anyhow!("preset missing"))?;
    tall.amplitude *= 10.0;
    let tall_args = ClusteringArgs {
        observable: Some(ObservableSpec::Inline(tall)),
        ..args.clone()
    };
    let tall_sum = clustering_run(sub_seed(seed, 1), &tall_args)?;
    let cells = |s: &ClusteringSummary| -> String {
        s.reports
            .iter()
            .map(|r| {
                format!(
                    "T={} k={}: {}/{}",
                    r.check.t, r.check.kappa, r.proposition_tested, r.corollary_tested
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let passed = (d_ref - 11.0 / 3.0).abs() <= 1e-6
        && sum.reports.iter().all(|r| r.proposition_tested > 0)
        && tall_sum
            .reports
            .iter()
            .map(|r| r.corollary_tested)
            .sum::<usize>()
            > 0;
    Ok((
        passed,
        format!(
            "D(1,2,1,2) = {d_ref:.6}; D = {:.4} (C = {:.4}, lip = {:.4}); pairs tested (proposition/complement) {}; tall copy D = {:.4}: {}",
            sum.d,
            sum.c,
            sum.lip_agy,
            cells(&sum),
            tall_sum.d,
            cells(&tall_sum)
        ),
    ))
}

fn variance(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let k_ref = variance_bound_constant(1.0, 1.0, 0.5)?;
    let (n_corr, n_var, step) = scale.pick((20_000, 10_000, 0.1), (100_000, 20_000, 0.05));
    let f = preset("mixing")?.normalize_zero_mean(100_000, sub_seed(seed, 1))?;
    let est = estimate_correlation(&f, &default_correlation_grid(), n_corr, sub_seed(seed, 2))?;
    let fit = fit_rate(&est)?;
    let var = estimate_variance(&f, &[10.0, 50.0, 250.0], n_var, step, sub_seed(seed, 3))?;
    let report = check_variance_bound(&fit, &VarianceCheck::new(var, f.sup_norm, &fit)?)?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("T={}: {:.5} <= {:.4}", r.t, r.variance, r.bound))
        .collect();
    Ok((
        (k_ref - 14.0 / 3.0).abs() <= 1e-6,
        format!(
            "K(1,1,0.5) = {k_ref:.6}; gamma_hat = {:.4}, C_hat = {:.4}, r^2 = {:.3}; {}",
            fit.gamma_hat,
            fit.c_hat,
            fit.r_squared,
            rows.join(", ")
        ),
    ))
}

fn chebyshev(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let (n, step) = scale.pick((10_000, 0.1), (20_000, 0.05));
    let f = preset("mixing")?.normalize_zero_mean(100_000, sub_seed(seed, 1))?;
    let mut rows = Vec::new();
    for (eps, ms) in [(0.1, vec![10, 25, 48]), (0.25, vec![5, 10, 20])] {
        let grid = LacunaryGrid::new(eps, 48)?;
        rows.extend(chebyshev_check(
            &f,
            &grid,
            &[0.1, 0.3],
            &ms,
            n,
            step,
            sub_seed(seed, 2),
        )?);
    }
    let hard: u64 = rows.iter().map(|r| r.hard_violations).sum();
    let failing = rows.iter().filter(|r| !r.passes).count();
    let worst = rows
        .iter()
        .map(|r| r.mass - r.independent_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        hard == 0 && failing == 0,
        format!("{} cells, {failing} outside 3 se, {hard} hard violations, max mass - bound = {worst:.4}", rows.len()),
    ))
}

fn bound_formulas() -> Result<(bool, String)> {
    let p = BoundParams::new(2.0, 3.0, 0.5);
    let main = main_bound(&p)?;
    let teich = teichmuller_bound(3.0, 0.5)?;
    let tc = time_change_bound(&p.with_rho(4.0))?;
    let eta = critical_eta(&p.with_kappa(0.1).with_xi(0.0))?;
    let flip = summability_flip(&p.with_kappa(0.1), 0.01, 10_000)?;
    let passed = (main - 2.75).abs() < 1e-12
        && (teich - 2.75).abs() < 1e-12
        && (tc - 2.875).abs() < 1e-12
        && (eta - 2.857143).abs() <= 1e-6
        && flip.passed();
    Ok((
        passed,
        format!(
            "main {main}, teichmuller {teich}, time change {tc}, critical eta {eta:.6}, flip {}",
            flip.passed()
        ),
    ))
}

fn oracles(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let mut fits = Vec::new();
    for gamma in [0.7, 0.3] {
        let est: Vec<CorrelationEstimate> = (0..40)
            .map(|k| 1.5f64.powi(k))
            .map(|t| CorrelationEstimate {
                t,
                value: 0.8 * t.powf(-gamma),
                stderr: 1e-9,
                n: 1,
            })
            .collect();
        fits.push((gamma, fit_rate(&est)?.gamma_hat));
    }
    let cantor = box_dimension(
        &cantor_cloud(12),
        &(1..=7).map(|k| 3f64.powi(-k)).collect::<Vec<_>>(),
    )?
    .dim_hat;
    let cube = box_dimension(
        &cube_cloud(200_000, seed),
        &[1.0, 0.5, 0.25, 0.125, 0.0625, 1.0 / 32.0],
    )?
    .dim_hat;
    let n = scale.pick(200_000, 1_000_000);
    let tail = sample_haar(seed, n)
        .iter()
        .filter(|s| s.point.coords().y > 2.0)
        .count() as f64
        / n as f64;
    let expected = 3.0 / (2.0 * PI);
    let passed = fits.iter().all(|(g, h)| (g - h).abs() <= 0.01)
        && (cantor - 2f64.ln() / 3f64.ln()).abs() <= 0.05
        && (cube - 3.0).abs() <= 0.1
        && (tail - expected).abs() <= 0.002;
    Ok((
        passed,
        format!(
            "rate fits {:.4}/{:.4}; cantor {cantor:.4}; cube {cube:.4}; P(y>2) = {tail:.5} vs {expected:.5} (n = {n})",
            fits[0].1, fits[1].1
        ),
    ))
}

fn subuniform(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let (centers, n_mc) = scale.pick((30, 2_000), (100, 5_000));
    let r = sub_uniformity(centers, &[0.05, 0.02, 0.01], 0.5, n_mc, 3.0, seed)?;
    Ok((
        r.c > 0.0 && r.r_squared >= 0.95,
        format!(
            "{centers} centres, c = {:.5}, slope = {:.4}, r^2 = {:.4}",
            r.c, r.slope, r.r_squared
        ),
    ))
}

/// Runs a few small configurations twice, then re-runs each from its
/// serialised manifest and compares artifact hashes.
fn determinism(scale: Scale, seed: u64) -> Result<(bool, String)> {
    let mut commands = vec![
        CommandConfig::Sample(SampleArgs {
            n: Some(500),
            ..Default::default()
        }),
        CommandConfig::Bound(BoundArgs {
            gamma: Some(vec![0.25, 0.5, 0.9]),
            rho: Some(vec![1.0, 4.0]),
            ..Default::default()
        }),
        CommandConfig::Mixing(MixingArgs {
            n: Some(10_000),
            mean_samples: Some(10_000),
            ..Default::default()
        }),
    ];
    if scale == Scale::Full {
        commands.push(CommandConfig::ScanExceptional(ScanArgs {
            observable: Some(ObservableSpec::Preset("central-smooth".into())),
            resolution: Some(vec![10, 10, 32]),
            scales: Some(vec![6.4, 3.2, 1.6, 0.8, 0.4, 0.2]),
            m: Some(20),
            mean_samples: Some(10_000),
            ..Default::default()
        }));
    }
    let mut checked = 0;
    for cmd in commands {
        let cfg = RunConfig::new(seed, rayon::current_num_threads(), cmd);
        let first = run(&cfg)?;
        let second = run(&cfg)?;
        if first.artifacts != second.artifacts {
            return Ok((
                false,
                format!("{}: repeated run differs", cfg.command.name()),
            ));
        }
        let text = serde_json::to_string(&Manifest::new(&cfg, &first.artifacts))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let (_, mismatches) = rerun_manifest(&manifest)?;
        if !mismatches.is_empty() {
            return Ok((
                false,
                format!(
                    "{}: manifest re-run differs in {}",
                    cfg.command.name(),
                    mismatches.join(", ")
                ),
            ));
        }
        checked += first.artifacts.len();
    }
    Ok((
        true,
        format!("{checked} artifacts byte-identical across repeats and manifest re-runs"),
    ))
}
