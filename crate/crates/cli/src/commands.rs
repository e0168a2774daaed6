//! One runner per subcommand. Runners are pure: they return artifacts and a
//! summary, and never touch the filesystem except to read an input cloud.

use std::fs::File;
use std::io::BufReader;

use anyhow::{anyhow, bail, Context, Result};
use horolab::agy::{check_subdivergence, TangentVec};
use horolab::bounds::{evaluate, BoundParams};
use horolab::dimension::{
    box_dimension, cantor_cloud, check_duality, clustering_constant_for, cube_cloud,
    exceptional_set_scan, read_cloud, sample_nearby_pairs, verify_clustering_kappas, write_cloud,
    BoxDimEstimate, CoordMetric, ScanRegion,
};
use horolab::dynamics::{orbit_averages, LacunaryGrid};
use horolab::lattice::{Coords, HaarSampler};
use horolab::mixing::{
    check_variance_bound, estimate_correlation, estimate_variance, fit_rate, CorrelationEstimate,
    VarianceCheck,
};
use horolab::observables::Observable;
use serde::Serialize;

use crate::config::*;
use crate::output::{json_report, Artifact, Csv, Meta};
use crate::verify;

/// Result of a run before it is written out.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// False when a check ran to completion but did not pass.
    pub ok: bool,
}

impl RunOutcome {
    fn passed(artifacts: Vec<Artifact>, summary: Vec<String>) -> Self {
        Self {
            artifacts,
            summary,
            ok: true,
        }
    }
}

fn req<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| anyhow!("missing argument `{name}`"))
}

/// Runs a resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let meta = Meta::of(cfg);
    let seed = cfg.seed;
    let cmd = cfg.command.clone().resolved();
    log::info!("running {} with seed {seed}", cmd.name());
    match &cmd {
        CommandConfig::Sample(a) => sample(&meta, seed, a),
        CommandConfig::OrbitAverage(a) => orbit_average(&meta, seed, a),
        CommandConfig::Mixing(a) => mixing(&meta, seed, a),
        CommandConfig::Variance(a) => variance(&meta, seed, a),
        CommandConfig::SubdivCheck(a) => subdiv(&meta, seed, a),
        CommandConfig::ClusteringCheck(a) => clustering(&meta, seed, a),
        CommandConfig::CoverDim(a) => cover_dim(&meta, seed, a),
        CommandConfig::ScanExceptional(a) => scan(&meta, seed, a),
        CommandConfig::Bound(a) => bound(&meta, a),
        CommandConfig::VerifyAll(a) => verify_all(&meta, seed, a),
    }
    .with_context(|| format!("command {}", cmd.name()))
}

fn coords_cells(c: &Coords) -> [String; 3] {
    [c.x.to_string(), c.y.to_string(), c.theta.to_string()]
}

fn sample(meta: &Meta, seed: u64, a: &SampleArgs) -> Result<RunOutcome> {
    let n = req(&a.n, "n")?;
    let s = req(&a.systole_min, "systole_min")?;
    let mut csv = Csv::new(
        meta,
        &[
            "stream", "index", "x", "y", "theta", "systole", "a", "b", "c", "d",
        ],
    );
    let mut kept = 0;
    for h in HaarSampler::new(seed).sample(n) {
        let sys = h.point.systole();
        if sys < s {
            continue;
        }
        kept += 1;
        let m = h.point.matrix();
        let [x, y, t] = coords_cells(&h.point.coords());
        csv.row(
            [
                h.stream.to_string(),
                h.index.to_string(),
                x,
                y,
                t,
                sys.to_string(),
            ]
            .into_iter()
            .chain(
                [m[0][0], m[0][1], m[1][0], m[1][1]]
                    .iter()
                    .map(|v| v.to_string()),
            ),
        );
    }
    Ok(RunOutcome::passed(
        vec![csv.finish("samples.csv")],
        vec![format!("{kept} of {n} samples with systole >= {s}")],
    ))
}

fn orbit_average(meta: &Meta, seed: u64, a: &OrbitArgs) -> Result<RunOutcome> {
    let f = req(&a.observable, "observable")?.build()?;
    let times = req(&a.times, "times")?;
    let step = req(&a.step, "step")?;
    let mut csv = Csv::new(
        meta,
        &[
            "point",
            "x",
            "y",
            "theta",
            "T",
            "value",
            "quad_step",
            "quad_error_bound",
        ],
    );
    for (i, h) in HaarSampler::new(seed)
        .sample(req(&a.n, "n")?)
        .iter()
        .enumerate()
    {
        for r in orbit_averages(&f, &h.point, &times, step)? {
            let [x, y, t] = coords_cells(&h.point.coords());
            csv.row([
                i.to_string(),
                x,
                y,
                t,
                r.t.to_string(),
                r.value.to_string(),
                r.quad_step.to_string(),
                r.quad_error_bound.to_string(),
            ]);
        }
    }
    Ok(RunOutcome::passed(
        vec![csv.finish("orbit_averages.csv")],
        vec![],
    ))
}

fn normalised(
    spec: &Option<ObservableSpec>,
    mean_samples: &Option<usize>,
    seed: u64,
) -> Result<Observable> {
    let f = req(spec, "observable")?.build()?;
    Ok(f.normalize_zero_mean(req(mean_samples, "mean_samples")?, sub_seed(seed, 1))?)
}

fn correlation_csv(meta: &Meta, est: &[CorrelationEstimate]) -> Artifact {
    let mut csv = Csv::new(meta, &["t", "value", "stderr", "n"]);
    for e in est {
        csv.row([
            e.t.to_string(),
            e.value.to_string(),
            e.stderr.to_string(),
            e.n.to_string(),
        ]);
    }
    csv.finish("correlations.csv")
}

#[derive(Serialize)]
struct MixingReport<'a> {
    observable: &'a Observable,
    fit: Option<horolab::mixing::RateFit>,
    fit_error: Option<String>,
}

fn mixing_parts(
    meta: &Meta,
    seed: u64,
    a: &MixingArgs,
) -> Result<(
    Observable,
    Vec<Artifact>,
    Result<horolab::mixing::RateFit, String>,
)> {
    let f = normalised(&a.observable, &a.mean_samples, seed)?;
    let est = estimate_correlation(
        &f,
        &req(&a.t_grid, "t_grid")?,
        req(&a.n, "n")?,
        sub_seed(seed, 2),
    )?;
    let fit = fit_rate(&est).map_err(|e| e.to_string());
    let report = MixingReport {
        observable: &f,
        fit: fit.clone().ok(),
        fit_error: fit.clone().err(),
    };
    let arts = vec![
        correlation_csv(meta, &est),
        json_report(meta, "mixing.json", &report)?,
    ];
    Ok((f, arts, fit))
}

fn mixing(meta: &Meta, seed: u64, a: &MixingArgs) -> Result<RunOutcome> {
    let (_, artifacts, fit) = mixing_parts(meta, seed, a)?;
    Ok(match fit {
        Ok(fit) => RunOutcome::passed(
            artifacts,
            vec![format!(
                "gamma_hat = {:.4}, C_hat = {:.4}, r^2 = {:.3}",
                fit.gamma_hat, fit.c_hat, fit.r_squared
            )],
        ),
        Err(e) => RunOutcome {
            artifacts,
            summary: vec![format!("rate fit failed: {e}")],
            ok: false,
        },
    })
}

#[derive(Serialize)]
struct VarianceOut {
    report: Option<horolab::mixing::VarianceReport>,
    error: Option<String>,
    estimates: Vec<horolab::mixing::VarianceEstimate>,
}

fn variance(meta: &Meta, seed: u64, a: &VarianceArgs) -> Result<RunOutcome> {
    let (f, mut artifacts, fit) = mixing_parts(meta, seed, &a.mixing)?;
    let fit = match fit {
        Ok(fit) => fit,
        Err(e) => {
            return Ok(RunOutcome {
                artifacts,
                summary: vec![format!("rate fit failed: {e}")],
                ok: false,
            })
        }
    };
    let est = estimate_variance(
        &f,
        &req(&a.times, "times")?,
        req(&a.variance_n, "variance_n")?,
        req(&a.step, "step")?,
        sub_seed(seed, 3),
    )?;
    let mut csv = Csv::new(meta, &["T", "value", "stderr", "n"]);
    for e in &est {
        csv.row([
            e.t.to_string(),
            e.value.to_string(),
            e.stderr.to_string(),
            e.n.to_string(),
        ]);
    }
    artifacts.push(csv.finish("variance.csv"));
    let checked = VarianceCheck::new(est.clone(), f.sup_norm, &fit)
        .and_then(|c| check_variance_bound(&fit, &c));
    let out = VarianceOut {
        report: checked.as_ref().ok().cloned(),
        error: checked.as_ref().err().map(|e| e.to_string()),
        estimates: est,
    };
    artifacts.push(json_report(meta, "variance.json", &out)?);
    Ok(match checked {
        Ok(r) => {
            let lines = r
                .rows
                .iter()
                .map(|row| format!("T = {}: {:.5} <= {:.5}", row.t, row.variance, row.bound))
                .collect();
            RunOutcome::passed(artifacts, lines)
        }
        Err(e) => RunOutcome {
            artifacts,
            summary: vec![format!("variance check failed: {e}")],
            ok: false,
        },
    })
}

/// Haar basepoints with systole `>= s` and random unit tangent vectors.
pub fn tangent_samples(n: usize, s: f64, seed: u64) -> Vec<TangentVec> {
    let sampler = HaarSampler::new(seed);
    let mut rng = sampler.rng(0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = horolab::lattice::draw(&mut rng);
        if p.systole() >= s {
            out.push(TangentVec::random_unit(p, &mut rng));
        }
    }
    out
}

fn subdiv(meta: &Meta, seed: u64, a: &SubdivArgs) -> Result<RunOutcome> {
    let s = req(&a.systole_min, "systole_min")?;
    let samples = tangent_samples(req(&a.n, "n")?, s, seed);
    let cert = check_subdivergence(&samples, &req(&a.times, "times")?, s, seed)?;
    let line = format!(
        "C = {}, max ratio {:.4} over {} samples",
        cert.c, cert.max_ratio, cert.n_samples
    );
    Ok(RunOutcome::passed(
        vec![json_report(meta, "subdivergence.json", &cert)?],
        vec![line],
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusteringSummary {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub lip_agy: f64,
    pub sup_norm: f64,
    pub reports: Vec<horolab::dimension::ClusteringReport>,
}

/// Clustering checks on one pair set per time, shared across `kappas`.
pub fn clustering_run(seed: u64, a: &ClusteringArgs) -> Result<ClusteringSummary> {
    let alpha = req(&a.alpha, "alpha")?;
    let s = req(&a.systole_min, "systole_min")?;
    let kappas = req(&a.kappas, "kappas")?;
    let step = req(&a.step, "step")?;
    let f = normalised(&a.observable, &a.mean_samples, seed)?.certify_agy(
        req(&a.distortion_pairs, "distortion_pairs")?,
        sub_seed(seed, 4),
        8,
    )?;
    let cert = check_subdivergence(
        &tangent_samples(
            req(&a.subdiv_samples, "subdiv_samples")?,
            s,
            sub_seed(seed, 5),
        ),
        &[2.0, 10.0, 100.0],
        s,
        seed,
    )?;
    let d = clustering_constant_for(&f, alpha, cert.c)?;
    let kmax = kappas.iter().cloned().fold(0.0, f64::max);
    let mut reports = Vec::new();
    for (i, &t) in req(&a.times, "times")?.iter().enumerate() {
        let bound = t.powf(-alpha - kmax) / d;
        let pairs = sample_nearby_pairs(
            req(&a.pairs, "pairs")?,
            bound,
            s,
            sub_seed(seed, 10 + i as u64),
            8,
        )?;
        reports.extend(verify_clustering_kappas(
            &f, &pairs, t, &kappas, alpha, cert.c, step,
        )?);
    }
    Ok(ClusteringSummary {
        d,
        c: cert.c,
        lip_agy: f.lip_agy.unwrap_or(f64::NAN),
        sup_norm: f.sup_norm,
        reports,
    })
}

fn clustering(meta: &Meta, seed: u64, a: &ClusteringArgs) -> Result<RunOutcome> {
    let sum = clustering_run(seed, a)?;
    let mut csv = Csv::new(
        meta,
        &[
            "T",
            "kappa",
            "kappa_prime",
            "pairs",
            "proposition_tested",
            "corollary_tested",
            "worst_proposition_ratio",
            "worst_corollary_ratio",
        ],
    );
    for r in &sum.reports {
        csv.row([
            r.check.t.to_string(),
            r.check.kappa.to_string(),
            r.check.kappa_prime.to_string(),
            r.pairs.to_string(),
            r.proposition_tested.to_string(),
            r.corollary_tested.to_string(),
            r.worst_proposition_ratio.to_string(),
            r.worst_corollary_ratio.to_string(),
        ]);
    }
    let line = format!("D = {:.6}, all conclusions hold", sum.d);
    Ok(RunOutcome::passed(
        vec![
            csv.finish("clustering.csv"),
            json_report(meta, "clustering.json", &sum)?,
        ],
        vec![line],
    ))
}

fn box_csv(meta: &Meta, est: &BoxDimEstimate) -> Artifact {
    let mut csv = Csv::new(meta, &["scale", "count"]);
    for (s, c) in est.scales.iter().zip(&est.counts) {
        csv.row([s.to_string(), c.to_string()]);
    }
    csv.finish("box_counts.csv")
}

/// Points used for the packing and covering counts.
const DUALITY_POINTS: usize = 2000;

#[derive(Serialize)]
struct CoverReport {
    source: String,
    points: usize,
    estimate: BoxDimEstimate,
    duality: Option<horolab::dimension::DualityReport>,
}

fn cover_dim(meta: &Meta, seed: u64, a: &CoverArgs) -> Result<RunOutcome> {
    let (source, cloud) = match (&a.cloud, &a.oracle) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("opening {path}"))?;
            (path.clone(), read_cloud(BufReader::new(file))?)
        }
        (None, Some(o)) => {
            let cloud = match o.as_str() {
                "cantor" => cantor_cloud(req(&a.depth, "depth")?),
                "cube" => cube_cloud(req(&a.n, "n")?, seed),
                "point" => vec![[0.0, 2.0, 1.0]],
                other => bail!("unknown oracle `{other}`; expected cantor, cube or point"),
            };
            (format!("oracle:{o}"), cloud)
        }
        (None, None) => bail!("give either `cloud` or `oracle`"),
    };
    let est = box_dimension(&cloud, &req(&a.scales, "scales")?)?;
    let duality = match a.delta {
        Some(delta) => {
            let pts: Vec<Coords> = cloud
                .iter()
                .take(DUALITY_POINTS)
                .map(|p| Coords::new(p[0], p[1], p[2]))
                .collect();
            Some(check_duality(&pts, &CoordMetric, delta)?)
        }
        None => None,
    };
    let line = format!(
        "dim_hat = {:.4}, r^2 = {:.4} on {} points",
        est.dim_hat,
        est.r_squared,
        cloud.len()
    );
    let report = CoverReport {
        source,
        points: cloud.len(),
        estimate: est.clone(),
        duality,
    };
    Ok(RunOutcome::passed(
        vec![
            box_csv(meta, &est),
            json_report(meta, "cover_dim.json", &report)?,
        ],
        vec![line],
    ))
}

fn arr3<T: Copy>(v: &[T], name: &str) -> Result<[T; 3]> {
    v.try_into()
        .map_err(|_| anyhow!("`{name}` needs exactly three entries"))
}

fn scan(meta: &Meta, seed: u64, a: &ScanArgs) -> Result<RunOutcome> {
    let f = normalised(&a.observable, &a.mean_samples, seed)?;
    let region = ScanRegion {
        lo: arr3(&req(&a.lo, "lo")?, "lo")?,
        hi: arr3(&req(&a.hi, "hi")?, "hi")?,
        resolution: arr3(&req(&a.resolution, "resolution")?, "resolution")?,
    };
    let m = req(&a.m, "m")?;
    let grid = LacunaryGrid::new(req(&a.epsilon, "epsilon")?, m)?;
    let report = exceptional_set_scan(
        &f,
        &region,
        &grid,
        req(&a.kappa, "kappa")?,
        m,
        &req(&a.scales, "scales")?,
        req(&a.step, "step")?,
        a.gamma,
    )?;
    let mut cloud = Vec::new();
    write_cloud(&mut cloud, &report.cloud)?;
    let line = format!(
        "{} of {} grid points exceptional at T = {:.3}; dim_hat = {:.3}",
        report.members, report.grid_points, report.t, report.estimate.dim_hat
    );
    Ok(RunOutcome::passed(
        vec![
            box_csv(meta, &report.estimate),
            json_report(meta, "scan.json", &report)?,
            Artifact {
                name: "members.hlab".into(),
                bytes: cloud,
            },
        ],
        vec![line],
    ))
}

fn bound(meta: &Meta, a: &BoundArgs) -> Result<RunOutcome> {
    let lists = [
        req(&a.alpha, "alpha")?,
        req(&a.beta, "beta")?,
        req(&a.gamma, "gamma")?,
        req(&a.epsilon, "epsilon")?,
        req(&a.kappa, "kappa")?,
        req(&a.xi, "xi")?,
        req(&a.rho, "rho")?,
    ];
    if lists.iter().any(|l| l.is_empty()) {
        bail!("every bound parameter list needs at least one value");
    }
    let mut results = Vec::new();
    let mut idx = [0usize; 7];
    'outer: loop {
        let v: [f64; 7] = std::array::from_fn(|i| lists[i][idx[i]]);
        let p = BoundParams::new(v[0], v[1], v[2])
            .with_epsilon(v[3])
            .with_kappa(v[4])
            .with_xi(v[5])
            .with_rho(v[6]);
        results.push(evaluate(&p)?);
        for i in (0..7).rev() {
            idx[i] += 1;
            if idx[i] < lists[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    let mut csv = Csv::new(
        meta,
        &[
            "alpha",
            "beta",
            "gamma",
            "epsilon",
            "kappa",
            "xi",
            "rho",
            "main_bound",
            "critical_eta",
            "intermediate",
            "time_change_bound",
            "sigma",
            "gamma_clamped",
        ],
    );
    for r in &results {
        let p = r.params;
        csv.row(
            [
                p.alpha,
                p.beta,
                p.gamma,
                p.epsilon,
                p.kappa,
                p.xi,
                p.rho,
                r.main_bound,
                r.critical_eta,
                r.intermediate,
                r.time_change_bound,
                r.sigma,
            ]
            .iter()
            .map(|v| v.to_string())
            .chain(std::iter::once(r.gamma_clamped.to_string())),
        );
    }
    let summary = if results.len() == 1 {
        vec![results[0].main_bound.to_string()]
    } else {
        results
            .iter()
            .map(|r| {
                format!(
                    "alpha={} beta={} gamma={} rho={}: {}",
                    r.params.alpha, r.params.beta, r.params.gamma, r.params.rho, r.main_bound
                )
            })
            .collect()
    };
    Ok(RunOutcome::passed(
        vec![
            csv.finish("bounds.csv"),
            json_report(meta, "bounds.json", &results)?,
        ],
        summary,
    ))
}

fn verify_all(meta: &Meta, seed: u64, a: &VerifyArgs) -> Result<RunOutcome> {
    let scale = if req(&a.quick, "quick")? {
        verify::Scale::Quick
    } else {
        verify::Scale::Full
    };
    let results = verify::run_suite(scale, seed);
    let mut csv = Csv::new(meta, &["id", "name", "passed", "detail"]);
    for r in &results {
        csv.row([
            r.id.to_string(),
            r.name.clone(),
            r.passed.to_string(),
            format!("\"{}\"", r.detail.replace('"', "'")),
        ]);
    }
    let ok = results.iter().all(|r| r.passed);
    let summary = results.iter().map(|r| r.line()).collect();
    Ok(RunOutcome {
        artifacts: vec![
            csv.finish("verify.csv"),
            json_report(meta, "verify.json", &results)?,
        ],
        summary,
        ok,
    })
}
