//! Run configuration: global settings plus one argument table per command.
//!
//! Every argument is optional so that a TOML file, command-line flags and
//! built-in defaults can be layered; [`CommandConfig::resolved`] fills the
//! remaining gaps. Manifests store the resolved form.

use std::f64::consts::TAU;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use horolab::observables::{preset, Bump, Observable};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A preset name, or an inline bump given as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Preset(String),
    Inline(Bump),
}

impl FromStr for ObservableSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim_start().starts_with('{') {
            serde_json::from_str(s)
                .map(ObservableSpec::Inline)
                .map_err(|e| e.to_string())
        } else {
            Ok(ObservableSpec::Preset(s.to_string()))
        }
    }
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable> {
        match self {
            ObservableSpec::Preset(name) => Ok(preset(name)?),
            ObservableSpec::Inline(b) => Ok(Observable::bump(*b)?),
        }
    }
}

fn preset_spec(name: &str) -> Option<ObservableSpec> {
    Some(ObservableSpec::Preset(name.to_string()))
}

/// `0` followed by `2^(k/3)` for `k = -10..=21`.
pub fn default_correlation_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((-10..=21).map(|k| 2f64.powf(k as f64 / 3.0)))
        .collect()
}

macro_rules! fill {
    ($self:ident, $($field:ident = $default:expr),* $(,)?) => {
        {
            $( if $self.$field.is_none() { $self.$field = Some($default); } )*
        }
    };
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    /// Number of Haar samples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Keep only samples with systole at least this.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub systole_min: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitArgs {
    /// Preset name or inline JSON bump.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    /// Number of Haar starting points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Averaging times, ascending.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    /// Samples for the correlation estimates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Samples for the zero-mean normalisation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub mixing: MixingArgs,
    /// Averaging times for the variance estimates.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Samples for the variance estimates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdivArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub systole_min: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    /// Nearby pairs per time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// The compact set is `{systole >= systole_min}`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub systole_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Samples for the sub-divergence constant.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subdiv_samples: Option<usize>,
    /// Pairs for the AGY distortion certificate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion_pairs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverArgs {
    /// Point cloud file in the HLAB binary format.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
    /// Built-in cloud when no file is given: cantor, cube or point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    /// Depth of the Cantor oracle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Points in the cube oracle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Also report packing and covering counts at this radius.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    /// Lower corner `x,y,theta`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Mixing rate for the reported dimension ceiling.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// Reduced sample sizes.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quick: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum CommandConfig {
    Sample(SampleArgs),
    OrbitAverage(OrbitArgs),
    Mixing(MixingArgs),
    Variance(VarianceArgs),
    SubdivCheck(SubdivArgs),
    ClusteringCheck(ClusteringArgs),
    CoverDim(CoverArgs),
    ScanExceptional(ScanArgs),
    Bound(BoundArgs),
    VerifyAll(VerifyArgs),
}

impl MixingArgs {
    fn fill(&mut self) {
        fill!(
            self,
            observable = preset_spec("mixing").unwrap(),
            n = 100_000,
            t_grid = default_correlation_grid(),
            mean_samples = 100_000
        );
    }
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Sample(_) => "sample",
            CommandConfig::OrbitAverage(_) => "orbit-average",
            CommandConfig::Mixing(_) => "mixing",
            CommandConfig::Variance(_) => "variance",
            CommandConfig::SubdivCheck(_) => "subdiv-check",
            CommandConfig::ClusteringCheck(_) => "clustering-check",
            CommandConfig::CoverDim(_) => "cover-dim",
            CommandConfig::ScanExceptional(_) => "scan-exceptional",
            CommandConfig::Bound(_) => "bound",
            CommandConfig::VerifyAll(_) => "verify-all",
        }
    }

    /// Fills every unset argument with its default.
    pub fn resolved(mut self) -> Self {
        match &mut self {
            CommandConfig::Sample(a) => fill!(a, n = 1000, systole_min = 0.0),
            CommandConfig::OrbitAverage(a) => {
                fill!(
                    a,
                    observable = preset_spec("central-hat").unwrap(),
                    n = 10,
                    times = vec![10.0, 100.0],
                    step = 0.05
                )
            }
            CommandConfig::Mixing(a) => a.fill(),
            CommandConfig::Variance(a) => {
                a.mixing.fill();
                fill!(
                    a,
                    times = vec![10.0, 50.0, 250.0],
                    variance_n = 20_000,
                    step = 0.05
                );
            }
            CommandConfig::SubdivCheck(a) => fill!(
                a,
                n = 10_000,
                times = vec![2.0, 10.0, 100.0],
                systole_min = 0.0
            ),
            CommandConfig::ClusteringCheck(a) => fill!(
                a,
                observable = preset_spec("central-smooth").unwrap(),
                pairs = 1000,
                times = vec![10.0, 100.0],
                kappas = vec![0.2, 0.5],
                alpha = 2.0,
                systole_min = 0.6,
                step = 0.004,
                subdiv_samples = 2000,
                distortion_pairs = 10_000,
                mean_samples = 100_000,
            ),
            CommandConfig::CoverDim(a) => {
                if a.cloud.is_none() {
                    fill!(a, oracle = "cantor".to_string(), depth = 12, n = 200_000);
                }
                fill!(a, scales = (1..=7).map(|k| 3f64.powi(-k)).collect());
            }
            CommandConfig::ScanExceptional(a) => fill!(
                a,
                observable = preset_spec("mixing").unwrap(),
                lo = vec![-0.45, 1.1, 0.0],
                hi = vec![0.45, 2.5, TAU],
                resolution = vec![10, 10, 64],
                epsilon = 0.1,
                kappa = 0.5,
                m = 40,
                step = 0.05,
                scales = vec![6.4, 3.2, 1.6, 0.8, 0.4, 0.2],
                mean_samples = 100_000,
            ),
            CommandConfig::Bound(a) => fill!(
                a,
                alpha = vec![2.0],
                beta = vec![3.0],
                gamma = vec![0.5],
                epsilon = vec![0.1],
                kappa = vec![0.1],
                xi = vec![0.0],
                rho = vec![1.0],
            ),
            CommandConfig::VerifyAll(a) => fill!(a, quick = false),
        }
        self
    }
}

/// Everything that determines the outputs of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Worker threads; recorded for audit, results do not depend on it.
    pub workers: usize,
    #[serde(flatten)]
    pub command: CommandConfig,
}

impl RunConfig {
    pub fn new(seed: u64, workers: usize, command: CommandConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            workers,
            command: command.resolved(),
        }
    }
}

/// Contents of a `--config` file: global keys plus one table per command,
/// named as on the command line.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
    #[serde(flatten)]
    pub commands: std::collections::BTreeMap<String, toml::Value>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).context("config file")?;
        for key in file.commands.keys() {
            if !COMMAND_NAMES.contains(&key.as_str()) {
                bail!("config file: unknown table or key `{key}`");
            }
        }
        Ok(file)
    }
}

pub const COMMAND_NAMES: [&str; 10] = [
    "sample",
    "orbit-average",
    "mixing",
    "variance",
    "subdiv-check",
    "clustering-check",
    "cover-dim",
    "scan-exceptional",
    "bound",
    "verify-all",
];

/// Overlays the flags given on the command line on the file's table for the
/// same command.
pub fn merge(file: &ConfigFile, cli: CommandConfig) -> Result<CommandConfig> {
    let name = cli.name();
    let mut cli_json = serde_json::to_value(&cli)?;
    let Some(table) = file.commands.get(name) else {
        return Ok(cli);
    };
    let mut base = serde_json::to_value(table).context("config table")?;
    let (Some(base_map), Some(over)) = (
        base.as_object_mut(),
        cli_json.get_mut("args").and_then(|a| a.as_object_mut()),
    ) else {
        bail!("config table `{name}` must be a table");
    };
    for (k, v) in std::mem::take(over) {
        base_map.insert(k, v);
    }
    let merged = serde_json::json!({ "command": name, "args": base });
    serde_json::from_value(merged).with_context(|| format!("config table `{name}`"))
}

/// Sub-seed `k` of a run seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ k.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}
