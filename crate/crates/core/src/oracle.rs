//! Brute-force verifiers for small instances.
//!
//! Nothing here uses the KKT structure: the inner oracle grids the charging
//! time and each device's energy split, and the outer oracle enumerates
//! activation patterns.

use rayon::prelude::*;
use std::f64::consts::LN_2;

use crate::cross_entropy::{FieldShape, Layout};
use crate::error::{Error, Result};
use crate::inner_solver::{self, InnerProblem};
use crate::model::{ActivationPattern, SystemParams, Topology};
use crate::schemes::{Access, ActivationLevel, ActivationSet, Evaluator, SchemeConfig};

/// Largest number of objective evaluations a single enumeration may take.
pub const MAX_EVALUATIONS: u64 = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub t0_points: usize,
    pub split_points: usize,
    pub z_points: usize,
}

impl GridSpec {
    pub fn new(t0_points: usize, split_points: usize, z_points: usize) -> Result<Self> {
        if t0_points < 2 || split_points < 2 || z_points < 2 {
            return Err(Error::InvalidParams("grid sizes must be at least 2".into()));
        }
        Ok(Self {
            t0_points,
            split_points,
            z_points,
        })
    }

    pub fn t0_values(&self, frame_s: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.t0_points;
        (1..=n).map(move |i| frame_s * i as f64 / n as f64)
    }

    pub fn split_values(&self) -> Vec<f64> {
        let m = self.split_points - 1;
        (0..=m).map(|j| j as f64 / m as f64).collect()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0_points: 400,
            split_points: 400,
            z_points: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OraclePoint {
    pub objective_bits: f64,
    pub t0_s: f64,
    /// Fraction of each device's harvested energy spent on offloading.
    pub split: Vec<f64>,
}

/// Objective of one feasible point: uplink time shared in proportion to
/// `e_l * Gamma_l`, which makes every offloading device see the same SNR.
pub fn grid_point_objective(problem: &InnerProblem, t0: f64, split: &[f64]) -> f64 {
    let p = problem.params;
    let remaining = p.frame_s - t0;
    let mut received = 0.0;
    let mut local = 0.0;
    for ((&s, &ups), &gam) in split.iter().zip(&problem.upsilon).zip(&problem.gamma_snr) {
        let harvested = t0 * ups;
        received += s * harvested * gam;
        let f = ((1.0 - s) * harvested / (p.frame_s * p.kappa)).cbrt();
        local += p.frame_s * f / p.intensity_cycles_per_bit;
    }
    let offload = if remaining > 0.0 && received > 0.0 {
        p.bandwidth_hz * remaining * (received / remaining).ln_1p() / LN_2
    } else {
        0.0
    };
    offload + local
}

/// Grid search over `t0` and every device's energy split.
///
/// Costs `t0_points * split_points^L` evaluations; meant for `L <= 2`.
pub fn brute_force_inner(problem: &InnerProblem, grid: &GridSpec) -> OraclePoint {
    let splits = grid.split_values();
    let devices = problem.device_count();
    let t0s: Vec<f64> = grid.t0_values(problem.params.frame_s).collect();
    t0s.par_iter()
        .map(|&t0| {
            let mut best = OraclePoint {
                objective_bits: f64::NEG_INFINITY,
                t0_s: t0,
                split: vec![0.0; devices],
            };
            let mut index = vec![0usize; devices];
            let mut current = vec![0.0; devices];
            loop {
                for (c, &i) in current.iter_mut().zip(&index) {
                    *c = splits[i];
                }
                let value = grid_point_objective(problem, t0, &current);
                if value > best.objective_bits {
                    best.objective_bits = value;
                    best.split.copy_from_slice(&current);
                }
                if !advance(&mut index, splits.len()) {
                    break;
                }
            }
            best
        })
        .reduce_with(|a, b| {
            if b.objective_bits > a.objective_bits {
                b
            } else {
                a
            }
        })
        .expect("grid has at least one t0 point")
}

fn advance(index: &mut [usize], radix: usize) -> bool {
    for digit in index.iter_mut() {
        *digit += 1;
        if *digit < radix {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Best TDMA offload bits for two devices with received energies
/// `e_l * Gamma_l` over an uplink window `window_s`, by gridding the slot split.
pub fn tau_grid_offload(
    received: [f64; 2],
    window_s: f64,
    bandwidth_hz: f64,
    points: usize,
) -> f64 {
    let rate = |tau: f64, r: f64| {
        if tau > 0.0 {
            bandwidth_hz * tau * (r / tau).ln_1p() / LN_2
        } else {
            0.0
        }
    };
    (0..=points)
        .map(|i| {
            let tau1 = window_s * i as f64 / points as f64;
            rate(tau1, received[0]) + rate(window_s - tau1, received[1])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Offload bits when the window is shared in proportion to received energy.
pub fn equal_snr_offload(received: &[f64], window_s: f64, bandwidth_hz: f64) -> f64 {
    let total: f64 = received.iter().sum();
    bandwidth_hz * window_s * (total / window_s).ln_1p() / LN_2
}

/// Sign changes of the stationarity residual over a log-spaced SNR grid
/// spanning `[z_lo, z_hi]`, with the solver's final active set.
pub fn residual_sign_changes(
    problem: &InnerProblem,
    active: &[bool],
    z_lo: f64,
    z_hi: f64,
    grid: &GridSpec,
) -> Result<usize> {
    let ratio = (z_hi / z_lo).ln();
    let mut changes = 0;
    let mut prev: Option<bool> = None;
    for i in 0..grid.z_points {
        let z = z_lo * (ratio * i as f64 / (grid.z_points - 1) as f64).exp();
        let positive = inner_solver::residual(z, problem, active)? > 0.0;
        if prev.is_some_and(|p| p != positive) {
            changes += 1;
        }
        prev = Some(positive);
    }
    Ok(changes)
}

/// Maximises `objective` over every activation set of the given shape with
/// all learned vectors nonzero. Ties go to the lowest enumeration index.
pub fn enumerate<F>(shape: &FieldShape, budget: u64, objective: F) -> Result<(ActivationSet, f64)>
where
    F: Fn(&ActivationSet) -> Result<f64> + Sync,
{
    let patterns = nonzero_patterns(shape.antennas)?;
    let total = checked_count(patterns, shape.vectors() as u32, budget)?;
    let decode = |mut index: u64| {
        let vectors = (0..shape.vectors())
            .map(|_| {
                let mask = index % patterns + 1;
                index /= patterns;
                ActivationPattern::from_mask(shape.antennas, mask)
            })
            .collect();
        shape.assemble(vectors)
    };
    let (index, value) = (0..total)
        .into_par_iter()
        .map(|i| objective(&decode(i)).map(|v| (i, v)))
        .try_reduce_with(|a, b| Ok(better(a, b)))
        .expect("enumeration is non-empty")?;
    Ok((decode(index), value))
}

fn better(a: (u64, f64), b: (u64, f64)) -> (u64, f64) {
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

fn nonzero_patterns(antennas: usize) -> Result<u64> {
    if antennas == 0 || antennas >= 63 {
        return Err(Error::BudgetExceeded(format!(
            "cannot enumerate patterns over {antennas} antennas"
        )));
    }
    Ok((1u64 << antennas) - 1)
}

fn checked_count(patterns: u64, vectors: u32, budget: u64) -> Result<u64> {
    match patterns.checked_pow(vectors) {
        Some(n) if n <= budget => Ok(n),
        _ => Err(Error::BudgetExceeded(format!(
            "{patterns}^{vectors} evaluations exceed the budget of {budget}"
        ))),
    }
}

/// Exact optimum over activation patterns for one configuration.
pub fn exhaustive_outer(
    topology: &Topology,
    params: &SystemParams,
    config: SchemeConfig,
) -> Result<(ActivationSet, f64)> {
    exhaustive_outer_with(&Evaluator::new(topology, params)?, config)
}

/// As [`exhaustive_outer`], reusing an evaluator.
///
/// TDMA with per-slot patterns enumerates full tuples when they fit in the
/// budget. Otherwise it uses the fact that the inner optimum is
/// nondecreasing in every SNR coefficient: for a fixed downlink pattern the
/// best choice for slot `l` is the pattern maximising device `l`'s SNR
/// coefficient, so only downlink patterns are enumerated.
///
/// NOMA with per-slot patterns is enumerated over (downlink, uplink) pairs
/// with every slot using the same uplink pattern; its evaluation already
/// takes the best slot, so longer tuples cannot do better.
pub fn exhaustive_outer_with(
    evaluator: &Evaluator,
    config: SchemeConfig,
) -> Result<(ActivationSet, f64)> {
    let antennas = evaluator.antennas();
    let devices = evaluator.device_count();
    let objective = |set: &ActivationSet| evaluator.objective(config, set);
    match (config.access, config.level) {
        (Access::Tdma, ActivationLevel::FullDynamic) => {
            let shape = config.field_shape(antennas, devices);
            match enumerate(&shape, MAX_EVALUATIONS, objective) {
                Err(Error::BudgetExceeded(_)) => per_slot_by_best_uplink(evaluator),
                other => other,
            }
        }
        (Access::Noma, ActivationLevel::FullDynamic) => {
            let shape = FieldShape {
                antennas,
                layout: Layout::DownUp,
            };
            let (set, value) = enumerate(&shape, MAX_EVALUATIONS, |set| {
                objective(&ActivationSet::per_slot(
                    set.downlink.clone(),
                    vec![set.uplink[0].clone(); devices],
                ))
            })?;
            let uplink = vec![set.uplink[0].clone(); devices];
            Ok((ActivationSet::per_slot(set.downlink, uplink), value))
        }
        _ => enumerate(
            &config.field_shape(antennas, devices),
            MAX_EVALUATIONS,
            objective,
        ),
    }
}

/// Per-slot uplink pattern with the largest normalised gain for each device.
pub fn best_uplink_per_slot(evaluator: &Evaluator) -> Result<Vec<ActivationPattern>> {
    let antennas = evaluator.antennas();
    let patterns = nonzero_patterns(antennas)?;
    checked_count(patterns, 1, MAX_EVALUATIONS)?;
    let table = evaluator.table();
    (0..evaluator.device_count())
        .map(|l| {
            let mut best = (0u64, f64::NEG_INFINITY);
            for mask in 1..=patterns {
                let g = table.normalized_gain(&ActivationPattern::from_mask(antennas, mask), l)?;
                if g > best.1 {
                    best = (mask, g);
                }
            }
            Ok(ActivationPattern::from_mask(antennas, best.0))
        })
        .collect()
}

/// TDMA with per-slot patterns: every slot takes its device's best uplink
/// pattern and only the downlink pattern is enumerated.
pub fn per_slot_by_best_uplink(evaluator: &Evaluator) -> Result<(ActivationSet, f64)> {
    let config = SchemeConfig::new(Access::Tdma, ActivationLevel::FullDynamic);
    let uplink = best_uplink_per_slot(evaluator)?;
    let shape = FieldShape {
        antennas: evaluator.antennas(),
        layout: Layout::Shared,
    };
    let (set, value) = enumerate(&shape, MAX_EVALUATIONS, |set| {
        evaluator.objective(
            config,
            &ActivationSet::per_slot(set.downlink.clone(), uplink.clone()),
        )
    })?;
    Ok((ActivationSet::per_slot(set.downlink, uplink), value))
}
