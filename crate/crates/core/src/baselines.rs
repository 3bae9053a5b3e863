//! Comparison schemes.
//!
//! Every baseline restricts the TDMA design somewhere: fixed patterns, fixed
//! slot lengths, or no offloading / no local computing. The conventional
//! array keeps the same channel model but moves the radiating points to a
//! half-wavelength-spaced array at the feed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use crate::cross_entropy::{self, FieldShape, Layout};
use crate::error::{Error, Result};
use crate::inner_solver::{self, InnerProblem};
use crate::model::{derive_wavelengths, ActivationPattern, SystemParams, Topology};
use crate::numeric::{bisect, expand_upper};
use crate::oracle;
use crate::schemes::{
    Access, ActivationLevel, ActivationSet, Evaluator, OuterSearch, SchemeConfig,
};

const SPLIT_TOL: f64 = 1e-14;
const MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    FullPa,
    ConventionalArray,
    FixedTdma,
    FullOffload,
    FullLocal,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        Self::FullPa,
        Self::ConventionalArray,
        Self::FixedTdma,
        Self::FullOffload,
        Self::FullLocal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::FullPa => "full_pa",
            Self::ConventionalArray => "conventional_array",
            Self::FixedTdma => "fixed_tdma",
            Self::FullOffload => "full_offload",
            Self::FullLocal => "full_local",
        }
    }

    /// Shape of the patterns this baseline still optimises, if any.
    pub fn field_shape(&self, antennas: usize) -> Option<FieldShape> {
        let layout = match self {
            Self::FullPa | Self::ConventionalArray => return None,
            Self::FixedTdma | Self::FullOffload => Layout::DownUp,
            Self::FullLocal => Layout::Shared,
        };
        Some(FieldShape { antennas, layout })
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineOutcome {
    pub kind: BaselineKind,
    pub objective_bits: f64,
    pub offload_bits: f64,
    pub t0_s: f64,
    pub t1_s: f64,
    pub harvested_j: Vec<f64>,
    pub activations: ActivationSet,
}

/// Allocation for fixed coefficients; the caller attaches kind and patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub objective_bits: f64,
    pub offload_bits: f64,
    pub t0_s: f64,
    pub t1_s: f64,
    pub harvested_j: Vec<f64>,
}

impl Allocation {
    fn into_outcome(self, kind: BaselineKind, activations: ActivationSet) -> BaselineOutcome {
        BaselineOutcome {
            kind,
            objective_bits: self.objective_bits,
            offload_bits: self.offload_bits,
            t0_s: self.t0_s,
            t1_s: self.t1_s,
            harvested_j: self.harvested_j,
            activations,
        }
    }
}

fn tdma_pd() -> SchemeConfig {
    SchemeConfig::new(Access::Tdma, ActivationLevel::PartialDynamic)
}

fn flexible(problem: &InnerProblem) -> Result<Allocation> {
    let sol = inner_solver::solve(problem)?;
    Ok(Allocation {
        objective_bits: sol.objective_bits,
        offload_bits: sol.offload_bits,
        t0_s: sol.t0_s,
        t1_s: sol.t1_s(),
        harvested_j: sol.harvested_j,
    })
}

/// Best offload fraction of one device's energy `e` for an uplink slot of
/// length `tau`, the rest feeding the local CPU for the whole frame.
pub fn best_split(e: f64, gamma_snr: f64, tau: f64, params: &SystemParams) -> Result<f64> {
    if !(e > 0.0 && gamma_snr > 0.0 && tau > 0.0) {
        return Ok(0.0);
    }
    let b = params.bandwidth_hz / LN_2;
    let local_scale = params.frame_s / params.intensity_cycles_per_bit
        * (e / (params.frame_s * params.kappa)).cbrt();
    // derivative of the per-device bits in the split; decreasing, -inf at 1
    let slope = |s: f64| -> Result<f64> {
        let offload = b * tau * e * gamma_snr / (tau + s * e * gamma_snr);
        let local = local_scale / (3.0 * (1.0 - s).powf(2.0 / 3.0));
        Ok(local - offload)
    };
    if slope(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    bisect(slope, 0.0, 1.0, SPLIT_TOL, MAX_ITER)
}

/// Bits delivered by one device under [`fixed_tdma`] at offload fraction `s`.
pub fn split_bits(s: f64, e: f64, gamma_snr: f64, tau: f64, params: &SystemParams) -> f64 {
    let offload = if tau > 0.0 {
        params.bandwidth_hz * tau * (s * e * gamma_snr / tau).ln_1p() / LN_2
    } else {
        0.0
    };
    let f = ((1.0 - s) * e / (params.frame_s * params.kappa)).cbrt();
    offload + params.frame_s * f / params.intensity_cycles_per_bit
}

/// Charging time and every uplink slot fixed at `T / (L + 1)`.
pub fn fixed_tdma_allocation(problem: &InnerProblem) -> Result<Allocation> {
    let p = problem.params;
    let slot = p.frame_s / (problem.device_count() + 1) as f64;
    let mut offload_bits = 0.0;
    let mut objective_bits = 0.0;
    let mut harvested_j = Vec::with_capacity(problem.device_count());
    for (&ups, &gam) in problem.upsilon.iter().zip(&problem.gamma_snr) {
        let e = slot * ups;
        let s = best_split(e, gam, slot, p)?;
        let total = split_bits(s, e, gam, slot, p);
        let local = split_bits(s, e, 0.0, slot, p);
        offload_bits += total - local;
        objective_bits += total;
        harvested_j.push(e);
    }
    Ok(Allocation {
        objective_bits,
        offload_bits,
        t0_s: slot,
        t1_s: p.frame_s - slot,
        harvested_j,
    })
}

/// Root of `(1 + z) ln(1 + z) - z = s`, the common SNR when all harvested
/// energy is offloaded.
pub fn full_offload_snr(s: f64) -> Result<f64> {
    let g = |z: f64| Ok((1.0 + z) * z.ln_1p() - z - s);
    let (lo, hi) = expand_upper(g, 0.0, 1.0, 1100)?;
    bisect(g, lo, hi, 1e-15, MAX_ITER)
}

/// All harvested energy offloaded, no local computing.
pub fn full_offload_allocation(problem: &InnerProblem) -> Result<Allocation> {
    let p = problem.params;
    let s: f64 = problem
        .upsilon
        .iter()
        .zip(&problem.gamma_snr)
        .map(|(u, g)| u * g)
        .sum();
    if !(s > 0.0) {
        return Ok(Allocation {
            objective_bits: 0.0,
            offload_bits: 0.0,
            t0_s: p.frame_s,
            t1_s: 0.0,
            harvested_j: problem.upsilon.iter().map(|u| u * p.frame_s).collect(),
        });
    }
    let z = full_offload_snr(s)?;
    let t0 = z * p.frame_s / (z + s);
    let t1 = p.frame_s - t0;
    let bits = p.bandwidth_hz * t1 * z.ln_1p() / LN_2;
    Ok(Allocation {
        objective_bits: bits,
        offload_bits: bits,
        t0_s: t0,
        t1_s: t1,
        harvested_j: problem.upsilon.iter().map(|u| u * t0).collect(),
    })
}

/// Whole frame spent charging, everything computed locally.
pub fn full_local_allocation(problem: &InnerProblem) -> Allocation {
    let p = problem.params;
    let objective_bits = problem
        .upsilon
        .iter()
        .map(|u| p.frame_s * (u / p.kappa).cbrt() / p.intensity_cycles_per_bit)
        .sum();
    Allocation {
        objective_bits,
        offload_bits: 0.0,
        t0_s: p.frame_s,
        t1_s: 0.0,
        harvested_j: problem.upsilon.iter().map(|u| u * p.frame_s).collect(),
    }
}

/// Allocation of `kind` for the given patterns on this evaluator's topology.
pub fn evaluate_with(
    evaluator: &Evaluator,
    kind: BaselineKind,
    activations: &ActivationSet,
) -> Result<BaselineOutcome> {
    let problem = evaluator.problem(activations)?;
    let allocation = match kind {
        BaselineKind::FullPa | BaselineKind::ConventionalArray => flexible(&problem)?,
        BaselineKind::FixedTdma => fixed_tdma_allocation(&problem)?,
        BaselineKind::FullOffload => full_offload_allocation(&problem)?,
        BaselineKind::FullLocal => full_local_allocation(&problem),
    };
    Ok(allocation.into_outcome(kind, activations.clone()))
}

fn all_on(antennas: usize) -> ActivationSet {
    ActivationSet::shared(ActivationPattern::ones(antennas))
}

/// TDMA with every pinching antenna active in both phases.
pub fn full_pa(topology: &Topology, params: &SystemParams) -> Result<BaselineOutcome> {
    let evaluator = Evaluator::new(topology, params)?;
    evaluate_with(
        &evaluator,
        BaselineKind::FullPa,
        &all_on(topology.antennas()),
    )
}

/// The same antennas packed at half-wavelength spacing from the feed.
pub fn conventional_topology(topology: &Topology, params: &SystemParams) -> Result<Topology> {
    let half = 0.5 * derive_wavelengths(params).lambda_m;
    let xs = (0..topology.antennas()).map(|n| n as f64 * half).collect();
    Topology::new(xs, topology.feed.z, topology.devices.clone())
}

pub fn conventional_array(topology: &Topology, params: &SystemParams) -> Result<BaselineOutcome> {
    let array = conventional_topology(topology, params)?;
    let evaluator = Evaluator::new(&array, params)?;
    evaluate_with(
        &evaluator,
        BaselineKind::ConventionalArray,
        &all_on(array.antennas()),
    )
}

pub fn fixed_tdma(
    topology: &Topology,
    params: &SystemParams,
    activations: &ActivationSet,
) -> Result<BaselineOutcome> {
    check_partial(activations)?;
    evaluate_with(
        &Evaluator::new(topology, params)?,
        BaselineKind::FixedTdma,
        activations,
    )
}

pub fn full_offload(
    topology: &Topology,
    params: &SystemParams,
    activations: &ActivationSet,
) -> Result<BaselineOutcome> {
    check_partial(activations)?;
    evaluate_with(
        &Evaluator::new(topology, params)?,
        BaselineKind::FullOffload,
        activations,
    )
}

pub fn full_local(
    topology: &Topology,
    params: &SystemParams,
    beta_dl: &ActivationPattern,
) -> Result<BaselineOutcome> {
    evaluate_with(
        &Evaluator::new(topology, params)?,
        BaselineKind::FullLocal,
        &ActivationSet::shared(beta_dl.clone()),
    )
}

fn check_partial(activations: &ActivationSet) -> Result<()> {
    if activations.uplink.len() != 1 {
        return Err(Error::ConfigMismatch(
            "baseline takes one downlink and one uplink pattern".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub outcome: BaselineOutcome,
    pub converged_at: usize,
}

/// Runs a baseline, optimising whatever patterns it still leaves free.
pub fn optimize_baseline<R: Rng + ?Sized>(
    evaluator: &Evaluator,
    kind: BaselineKind,
    search: &OuterSearch,
    rng: &mut R,
) -> Result<BaselineRun> {
    if kind == BaselineKind::ConventionalArray {
        return Ok(BaselineRun {
            outcome: conventional_array(evaluator.topology, evaluator.params)?,
            converged_at: 0,
        });
    }
    let Some(shape) = kind.field_shape(evaluator.antennas()) else {
        return Ok(BaselineRun {
            outcome: evaluate_with(evaluator, kind, &all_on(evaluator.antennas()))?,
            converged_at: 0,
        });
    };
    let objective = |set: &ActivationSet| Ok(evaluate_with(evaluator, kind, set)?.objective_bits);
    let (set, converged_at) = match search {
        OuterSearch::Exhaustive => (
            oracle::enumerate(&shape, oracle::MAX_EVALUATIONS, objective)?.0,
            0,
        ),
        OuterSearch::CrossEntropy(ce) => {
            let outcome = cross_entropy::optimize(objective, &shape, ce, rng)?;
            (outcome.best, outcome.converged_at)
        }
    };
    Ok(BaselineRun {
        outcome: evaluate_with(evaluator, kind, &set)?,
        converged_at,
    })
}

/// The flexible TDMA objective for the same patterns, for comparisons.
pub fn flexible_objective(evaluator: &Evaluator, activations: &ActivationSet) -> Result<f64> {
    evaluator.objective(tdma_pd(), activations)
}
