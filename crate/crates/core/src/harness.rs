//! Experiment configuration, seeded execution and CSV reporting.
//!
//! Replication `r` uses seed `seed + r`. Its topology is drawn from stream 0
//! of a ChaCha8 generator with that seed and every search of that
//! replication restarts from stream 1, so all schemes and all sweep values
//! of one replication see the same devices and the same sample sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{self, BaselineKind};
use crate::cross_entropy::{CEParams, CETrace};
use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, sample_topology, Point3, SystemParams, Topology};
use crate::schemes::{self, Evaluator, OuterSearch, SchemeConfig};

const TOPOLOGY_STREAM: u64 = 0;
const SEARCH_STREAM: u64 = 1;

/// A primary configuration or a baseline, named as in the config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeEntry {
    Config(SchemeConfig),
    Baseline(BaselineKind),
}

impl SchemeEntry {
    pub fn all() -> Vec<SchemeEntry> {
        SchemeConfig::ALL
            .into_iter()
            .map(Self::Config)
            .chain(BaselineKind::ALL.into_iter().map(Self::Baseline))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Config(c) => c.name(),
            Self::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for SchemeEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<SchemeConfig>()
            .map(Self::Config)
            .or_else(|_| s.parse::<BaselineKind>().map(Self::Baseline))
            .map_err(|_| Error::Config(format!("unknown scheme `{s}`")))
    }
}

impl TryFrom<String> for SchemeEntry {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeEntry> for String {
    fn from(e: SchemeEntry) -> String {
        e.name().to_owned()
    }
}

/// System parameters as written in a config file. Omitted fields take the
/// default simulation values; power and noise are given in exactly one unit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub pb_dbm: Option<f64>,
    pub pb_watts: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub noise_watts: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub frame_s: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub intensity_cycles_per_bit: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub refractive_index: Option<f64>,
    pub height_m: Option<f64>,
    pub region_m: Option<[f64; 2]>,
}

fn one_of(name: &str, dbm: Option<f64>, watts: Option<f64>, default: f64) -> Result<f64> {
    match (dbm, watts) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give only one of {name}_dbm and {name}_watts"
        ))),
        (Some(d), None) => Ok(dbm_to_watts(d)),
        (None, Some(w)) => Ok(w),
        (None, None) => Ok(default),
    }
}

impl ParamsConfig {
    pub fn resolve(&self) -> Result<SystemParams> {
        let d = SystemParams::standard();
        let region = self.region_m.map_or(d.region_m, |[x, y]| (x, y));
        let params = SystemParams {
            pb_watts: one_of("pb", self.pb_dbm, self.pb_watts, d.pb_watts)?,
            noise_watts: one_of("noise", self.noise_dbm, self.noise_watts, d.noise_watts)?,
            bandwidth_hz: self.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            frame_s: self.frame_s.unwrap_or(d.frame_s),
            gamma: self.gamma.unwrap_or(d.gamma),
            kappa: self.kappa.unwrap_or(d.kappa),
            intensity_cycles_per_bit: self
                .intensity_cycles_per_bit
                .unwrap_or(d.intensity_cycles_per_bit),
            carrier_hz: self.carrier_hz.unwrap_or(d.carrier_hz),
            refractive_index: self.refractive_index.unwrap_or(d.refractive_index),
            height_m: self.height_m.unwrap_or(d.height_m),
            region_m: region,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    /// Antennas evenly spaced along the waveguide, devices drawn per seed.
    #[default]
    Sampled,
    Explicit {
        pa_x_m: Vec<f64>,
        /// Device (x, y) positions on the ground.
        devices: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "pb_dbm")]
    PbDbm,
    #[serde(rename = "N")]
    Antennas,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "bandwidth_hz")]
    Bandwidth,
    #[serde(rename = "intensity")]
    Intensity,
    #[serde(rename = "height_m")]
    Height,
    #[serde(rename = "L")]
    Devices,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PbDbm => "pb_dbm",
            Self::Antennas => "N",
            Self::Gamma => "gamma",
            Self::Bandwidth => "bandwidth_hz",
            Self::Intensity => "intensity",
            Self::Height => "height_m",
            Self::Devices => "L",
        }
    }

    fn is_count(&self) -> bool {
        matches!(self, Self::Antennas | Self::Devices)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKind {
    #[default]
    CrossEntropy,
    Exhaustive,
}

fn default_antennas() -> usize {
    40
}

fn default_devices() -> usize {
    3
}

fn default_replications() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    #[serde(default = "default_devices")]
    pub devices: usize,
    #[serde(default)]
    pub topology: TopologySource,
    #[serde(default = "SchemeEntry::all")]
    pub schemes: Vec<SchemeEntry>,
    #[serde(default)]
    pub search: SearchKind,
    /// `ce.seed` is ignored here; searches draw from the replication seed.
    #[serde(default)]
    pub ce: CEParams,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config takes every default")
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.resolve()?;
        self.ce.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("scheme list is empty".into()));
        }
        match &self.topology {
            TopologySource::Sampled => {
                if self.antennas == 0 || self.devices == 0 {
                    return Err(Error::Config(
                        "antennas and devices must be at least 1".into(),
                    ));
                }
            }
            TopologySource::Explicit { pa_x_m, devices } => {
                if pa_x_m.is_empty() || devices.is_empty() {
                    return Err(Error::Config(
                        "explicit topology needs antennas and devices".into(),
                    ));
                }
                if self.sweep.as_ref().is_some_and(|s| s.variable.is_count()) {
                    return Err(Error::Config(
                        "cannot sweep N or L over an explicit topology".into(),
                    ));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                if !v.is_finite() {
                    return Err(Error::Config(format!(
                        "sweep value {v} for {} is not finite",
                        sweep.variable.name()
                    )));
                }
                if sweep.variable.is_count() && !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(Error::Config(format!(
                        "{} must be a positive integer, got {v}",
                        sweep.variable.name()
                    )));
                }
            }
            let base = self.params.resolve()?;
            for &v in &sweep.values {
                self.point(&base, Some((sweep.variable, v)))?.0.validate()?;
            }
        }
        Ok(())
    }

    pub fn search(&self) -> OuterSearch {
        match self.search {
            SearchKind::CrossEntropy => OuterSearch::CrossEntropy(self.ce.clone()),
            SearchKind::Exhaustive => OuterSearch::Exhaustive,
        }
    }

    /// Sweep points as `(value, params, antennas, devices)`; a config
    /// without a sweep has one point with no value.
    fn point(
        &self,
        base: &SystemParams,
        setting: Option<(SweepVariable, f64)>,
    ) -> Result<(SystemParams, usize, usize)> {
        let mut params = base.clone();
        let (mut antennas, mut devices) = (self.antennas, self.devices);
        if let Some((variable, v)) = setting {
            match variable {
                SweepVariable::PbDbm => params.pb_watts = dbm_to_watts(v),
                SweepVariable::Gamma => params.gamma = v,
                SweepVariable::Bandwidth => params.bandwidth_hz = v,
                SweepVariable::Intensity => params.intensity_cycles_per_bit = v,
                SweepVariable::Height => params.height_m = v,
                SweepVariable::Antennas => antennas = v as usize,
                SweepVariable::Devices => devices = v as usize,
            }
        }
        Ok((params, antennas, devices))
    }

    fn sweep_points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            None => vec![None],
            Some(s) => s.values.iter().copied().map(Some).collect(),
        }
    }

    pub fn replication_seeds(&self) -> Vec<u64> {
        (0..self.replications as u64)
            .map(|r| self.seed.wrapping_add(r))
            .collect()
    }
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn search_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, SEARCH_STREAM)
}

/// The topology a replication sees at one sweep point.
pub fn build_topology(
    config: &ExperimentConfig,
    params: &SystemParams,
    antennas: usize,
    devices: usize,
    seed: u64,
) -> Result<Topology> {
    match &config.topology {
        TopologySource::Sampled => sample_topology(
            params,
            antennas,
            devices,
            &mut stream(seed, TOPOLOGY_STREAM),
        ),
        TopologySource::Explicit { pa_x_m, devices } => Topology::new(
            pa_x_m.clone(),
            params.height_m,
            devices
                .iter()
                .map(|&[x, y]| Point3::new(x, y, 0.0))
                .collect(),
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub scheme: String,
    pub objective_bits: f64,
    pub avg_bits_per_device: f64,
    pub t0: f64,
    pub t1: f64,
    pub offload_ratio: f64,
    /// Mean over devices of harvested energy divided by the frame length.
    pub harvested_power_avg: f64,
    pub ce_iterations: usize,
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "seed",
    "sweep_value",
    "scheme",
    "objective_bits",
    "avg_bits_per_device",
    "t0",
    "t1",
    "offload_ratio",
    "harvested_power_avg",
    "ce_iterations",
];

#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub scheme: SchemeEntry,
    pub trace: CETrace,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub sweep_variable: Option<SweepVariable>,
    pub schemes: Vec<SchemeEntry>,
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
}

struct Summary {
    objective_bits: f64,
    offload_bits: f64,
    t0: f64,
    t1: f64,
    harvested_j: Vec<f64>,
    converged_at: usize,
    trace: Option<CETrace>,
}

fn run_entry(
    evaluator: &Evaluator,
    entry: SchemeEntry,
    search: &OuterSearch,
    seed: u64,
) -> Result<Summary> {
    let mut rng = search_rng(seed);
    match entry {
        SchemeEntry::Config(config) => {
            let r = schemes::optimize_config(evaluator, config, search, &mut rng)?;
            let s = &r.solution;
            Ok(Summary {
                objective_bits: s.objective_bits,
                offload_bits: s.offload_bits(),
                t0: s.inner.t0_s,
                t1: s.t1_s(),
                harvested_j: s.inner.harvested_j.clone(),
                converged_at: r.converged_at,
                trace: r.trace,
            })
        }
        SchemeEntry::Baseline(kind) => {
            let r = baselines::optimize_baseline(evaluator, kind, search, &mut rng)?;
            let o = r.outcome;
            Ok(Summary {
                objective_bits: o.objective_bits,
                offload_bits: o.offload_bits,
                t0: o.t0_s,
                t1: o.t1_s,
                harvested_j: o.harvested_j,
                converged_at: r.converged_at,
                trace: None,
            })
        }
    }
}

fn row(
    seed: u64,
    sweep_value: Option<f64>,
    entry: SchemeEntry,
    s: &Summary,
    frame_s: f64,
) -> ResultRow {
    let devices = s.harvested_j.len() as f64;
    let ratio = if s.objective_bits > 0.0 {
        (s.offload_bits / s.objective_bits).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ResultRow {
        seed,
        sweep_value,
        scheme: entry.name().to_owned(),
        objective_bits: s.objective_bits,
        avg_bits_per_device: s.objective_bits / devices,
        t0: s.t0,
        t1: s.t1,
        offload_ratio: ratio,
        harvested_power_avg: s.harvested_j.iter().sum::<f64>() / devices / frame_s,
        ce_iterations: s.converged_at,
    }
}

/// Runs every (sweep value, replication, scheme) job. Rows come back ordered
/// by sweep value, then seed, then scheme, as listed in the config.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let base = config.params.resolve()?;
    let search = config.search();
    let jobs: Vec<(Option<f64>, u64)> = config
        .sweep_points()
        .into_iter()
        .flat_map(|v| config.replication_seeds().into_iter().map(move |s| (v, s)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let setting = config
                .sweep
                .as_ref()
                .zip(value)
                .map(|(s, v)| (s.variable, v));
            let (params, antennas, devices) = config.point(&base, setting)?;
            let topology = build_topology(config, &params, antennas, devices, seed)?;
            let evaluator = Evaluator::new(&topology, &params)?;
            let mut rows = Vec::with_capacity(config.schemes.len());
            let mut traces = Vec::new();
            for &entry in &config.schemes {
                let summary = run_entry(&evaluator, entry, &search, seed)?;
                rows.push(row(seed, value, entry, &summary, params.frame_s));
                if let Some(trace) = summary.trace {
                    traces.push(TraceRecord {
                        seed,
                        sweep_value: value,
                        scheme: entry,
                        trace,
                    });
                }
            }
            Ok((rows, traces))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = RunOutput {
        sweep_variable: config.sweep.as_ref().map(|s| s.variable),
        schemes: config.schemes.clone(),
        ..RunOutput::default()
    };
    for (rows, traces) in per_job {
        out.rows.extend(rows);
        out.traces.extend(traces);
    }
    Ok(out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?)
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-figure metric: which column is averaged and which sweep produces it.
struct Figure {
    file: &'static str,
    variable: Option<SweepVariable>,
    metric: &'static str,
    value: fn(&ResultRow) -> f64,
}

const FIGURES: [Figure; 6] = [
    Figure {
        file: "fig4_bits_vs_pb.csv",
        variable: Some(SweepVariable::PbDbm),
        metric: "avg_bits_per_device",
        value: |r| r.avg_bits_per_device,
    },
    Figure {
        file: "fig5_bits_vs_N.csv",
        variable: Some(SweepVariable::Antennas),
        metric: "avg_bits_per_device",
        value: |r| r.avg_bits_per_device,
    },
    Figure {
        file: "fig6_bits_vs_config.csv",
        variable: None,
        metric: "avg_bits_per_device",
        value: |r| r.avg_bits_per_device,
    },
    Figure {
        file: "fig7_t0_vs_gamma.csv",
        variable: Some(SweepVariable::Gamma),
        metric: "t0",
        value: |r| r.t0,
    },
    Figure {
        file: "fig8_offload_ratio_vs_B.csv",
        variable: Some(SweepVariable::Bandwidth),
        metric: "offload_ratio",
        value: |r| r.offload_ratio,
    },
    Figure {
        file: "fig9_harvest_vs_pb.csv",
        variable: Some(SweepVariable::PbDbm),
        metric: "harvested_power_avg",
        value: |r| r.harvested_power_avg,
    },
];

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub sweep_value: Option<f64>,
    pub scheme: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Averages `value` over seeds for every (sweep value, scheme) pair, in row
/// order of first appearance.
pub fn aggregate(rows: &[ResultRow], value: impl Fn(&ResultRow) -> f64) -> Vec<Aggregate> {
    let mut order: Vec<(Option<u64>, String)> = Vec::new();
    let mut groups: BTreeMap<(Option<u64>, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.sweep_value.map(f64::to_bits), r.scheme.clone());
        let slot = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        slot.push(value(r));
    }
    order
        .into_iter()
        .map(|key| {
            let v = &groups[&key];
            Aggregate {
                sweep_value: key.0.map(f64::from_bits),
                scheme: key.1,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                count: v.len(),
            }
        })
        .collect()
}

fn write_aggregate(path: &Path, x_name: &str, metric: &str, rows: &[Aggregate]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = [
        x_name.to_owned(),
        "scheme".to_owned(),
        format!("{metric}_mean"),
        format!("{metric}_min"),
        format!("{metric}_max"),
        "replications".to_owned(),
    ];
    w.write_record(&header)?;
    for a in rows {
        w.serialize((a.sweep_value, &a.scheme, a.mean, a.min, a.max, a.count))?;
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_COLUMNS: [&str; 7] = [
    "seed",
    "sweep_value",
    "scheme",
    "iteration",
    "best_bits",
    "mean_elite",
    "entropy_bits",
];

pub fn write_traces(traces: &[TraceRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for t in traces {
        for it in &t.trace.iterations {
            w.serialize((
                t.seed,
                t.sweep_value,
                t.scheme.name(),
                it.iteration,
                it.best_bits,
                it.mean_elite,
                it.entropy_bits,
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, the convergence traces, the figure tables that
/// match the sweep, and `summary.txt`. Returns the summary text.
pub fn report(output: &RunOutput, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir)?;
    write_results(&output.rows, &dir.join("results.csv"))?;
    write_traces(&output.traces, &dir.join("fig3_convergence.csv"))?;
    let x_name = output.sweep_variable.map_or("sweep_value", |v| v.name());
    for fig in &FIGURES {
        let wanted = fig.variable.is_none() || fig.variable == output.sweep_variable;
        if wanted {
            let rows = aggregate(&output.rows, fig.value);
            write_aggregate(&dir.join(fig.file), x_name, fig.metric, &rows)?;
        }
    }
    let summary = summary_text(output);
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

pub fn summary_text(output: &RunOutput) -> String {
    let mut text = String::new();
    let x_name = output.sweep_variable.map_or("point", |v| v.name());
    let aggregates = aggregate(&output.rows, |r| r.avg_bits_per_device);
    let ratio = aggregate(&output.rows, |r| r.offload_ratio);
    let seeds = output
        .rows
        .iter()
        .map(|r| r.seed)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let _ = writeln!(
        text,
        "{} rows, {} schemes, {} seeds",
        output.rows.len(),
        output.schemes.len(),
        seeds
    );
    let _ = writeln!(
        text,
        "{:>14} {:>20} {:>22} {:>14}",
        x_name, "scheme", "avg bits per device", "offload ratio"
    );
    for (a, r) in aggregates.iter().zip(&ratio) {
        let x = a
            .sweep_value
            .map_or_else(|| "-".to_owned(), |v| v.to_string());
        let _ = writeln!(
            text,
            "{:>14} {:>20} {:>22.6e} {:>14.4}",
            x, a.scheme, a.mean, r.mean
        );
    }
    text
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum SolvedDetail {
    Scheme(schemes::SchemeSolution),
    Baseline(baselines::BaselineOutcome),
}

#[derive(Clone, Debug, Serialize)]
pub struct SolvedScheme {
    pub scheme: SchemeEntry,
    pub objective_bits: f64,
    pub ce_iterations: usize,
    pub detail: SolvedDetail,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub seed: u64,
    pub params: SystemParams,
    pub topology: Topology,
    pub solutions: Vec<SolvedScheme>,
}

/// Full solutions for the first replication at the first sweep point.
pub fn solve(config: &ExperimentConfig) -> Result<SolveReport> {
    config.validate()?;
    let base = config.params.resolve()?;
    let setting = config
        .sweep
        .as_ref()
        .and_then(|s| s.values.first().map(|&v| (s.variable, v)));
    let (params, antennas, devices) = config.point(&base, setting)?;
    let seed = config.seed;
    let topology = build_topology(config, &params, antennas, devices, seed)?;
    let evaluator = Evaluator::new(&topology, &params)?;
    let search = config.search();
    let solutions = config
        .schemes
        .iter()
        .map(|&entry| {
            let mut rng = search_rng(seed);
            Ok(match entry {
                SchemeEntry::Config(c) => {
                    let r = schemes::optimize_config(&evaluator, c, &search, &mut rng)?;
                    SolvedScheme {
                        scheme: entry,
                        objective_bits: r.solution.objective_bits,
                        ce_iterations: r.converged_at,
                        detail: SolvedDetail::Scheme(r.solution),
                    }
                }
                SchemeEntry::Baseline(kind) => {
                    let r = baselines::optimize_baseline(&evaluator, kind, &search, &mut rng)?;
                    SolvedScheme {
                        scheme: entry,
                        objective_bits: r.outcome.objective_bits,
                        ce_iterations: r.converged_at,
                        detail: SolvedDetail::Baseline(r.outcome),
                    }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolveReport {
        seed,
        params,
        topology: topology.clone(),
        solutions,
    })
}

/// Six-configuration comparison for every replication at the base point.
/// Cross-entropy searches use the replication seed.
pub fn compare(config: &ExperimentConfig) -> Result<Vec<(u64, schemes::ChainReport)>> {
    config.validate()?;
    let params = config.params.resolve()?;
    config
        .replication_seeds()
        .into_par_iter()
        .map(|seed| {
            let topology = build_topology(config, &params, config.antennas, config.devices, seed)?;
            let search = match config.search() {
                OuterSearch::CrossEntropy(ce) => OuterSearch::CrossEntropy(CEParams { seed, ..ce }),
                exhaustive => exhaustive,
            };
            Ok((seed, schemes::theorem_chain(&topology, &params, &search)?))
        })
        .collect()
}

pub fn write_compare(reports: &[(u64, schemes::ChainReport)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["seed", "scheme", "objective_bits", "t0", "t1"])?;
    for (seed, report) in reports {
        for r in &report.rows {
            w.serialize((seed, r.config.name(), r.objective_bits, r.t0_s, r.t1_s))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_setup() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.antennas, 40);
        assert_eq!(c.devices, 3);
        assert_eq!(c.schemes.len(), 11);
        assert_eq!(c.params.resolve().unwrap(), SystemParams::standard());
        assert_eq!(c.ce, CEParams::default());
    }

    #[test]
    fn power_units_are_exclusive() {
        let err = ExperimentConfig::from_json(r#"{"params": {"pb_dbm": 40, "pb_watts": 10}}"#);
        assert!(matches!(err, Err(Error::Config(_))));
        let ok = ExperimentConfig::from_json(r#"{"params": {"pb_watts": 10}}"#).unwrap();
        assert_eq!(ok.params.resolve().unwrap().pb_watts, 10.0);
    }

    #[test]
    fn errors_name_the_line() {
        let text =
            "{\n  \"antennas\": 4,\n  \"sweep\": {\"variable\": \"speed\", \"values\": []}\n}";
        let msg = ExperimentConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let unknown = ExperimentConfig::from_json("{\"antenas\": 4}")
            .unwrap_err()
            .to_string();
        assert!(unknown.contains("line 1"), "{unknown}");
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"replications": 0}"#,
            r#"{"schemes": []}"#,
            r#"{"schemes": ["tdma_best"]}"#,
            r#"{"sweep": {"variable": "N", "values": [2.5]}}"#,
            r#"{"sweep": {"variable": "gamma", "values": [1.5]}}"#,
            r#"{"topology": {"kind": "explicit", "pa_x_m": [1.0], "devices": [[1.0, 1.0]]},
                "sweep": {"variable": "L", "values": [2]}}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn scheme_names_roundtrip() {
        for e in SchemeEntry::all() {
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(serde_json::from_str::<SchemeEntry>(&json).unwrap(), e);
        }
    }

    #[test]
    fn replications_extend_without_perturbing() {
        let mut c = ExperimentConfig::default();
        c.seed = 9;
        c.replications = 2;
        let short = c.replication_seeds();
        c.replications = 5;
        assert_eq!(&c.replication_seeds()[..2], &short[..]);
    }

    #[test]
    fn aggregate_groups_in_order() {
        let mk = |seed, v: f64, scheme: &str, bits| ResultRow {
            seed,
            sweep_value: Some(v),
            scheme: scheme.into(),
            objective_bits: bits,
            avg_bits_per_device: bits,
            t0: 0.0,
            t1: 0.0,
            offload_ratio: 0.0,
            harvested_power_avg: 0.0,
            ce_iterations: 0,
        };
        let rows = vec![
            mk(0, 2.0, "b", 1.0),
            mk(0, 2.0, "a", 3.0),
            mk(1, 2.0, "b", 3.0),
        ];
        let a = aggregate(&rows, |r| r.objective_bits);
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].scheme.as_str(), a[0].mean, a[0].count), ("b", 2.0, 2));
        assert_eq!((a[0].min, a[0].max), (1.0, 3.0));
        assert_eq!(a[1].scheme, "a");
    }
}
