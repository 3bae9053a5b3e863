//! Cross-entropy search over binary activation vectors.
//!
//! Each learned vector is modelled as a product of independent Bernoulli
//! bits. Every iteration draws `samples` candidates, keeps the `elites` best,
//! refits each bit probability to the elite mean and blends it with the
//! previous probability using the smoothing factor.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::ActivationPattern;
use crate::schemes::ActivationSet;

const ZERO_REDRAWS: usize = 32;
const STALL_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CEParams {
    pub samples: usize,
    pub elites: usize,
    pub smoothing: f64,
    pub max_iters: usize,
    pub stall_iters: usize,
    pub seed: u64,
}

impl Default for CEParams {
    fn default() -> Self {
        Self {
            samples: 500,
            elites: 50,
            smoothing: 0.9,
            max_iters: 50,
            stall_iters: 5,
            seed: 0,
        }
    }
}

impl CEParams {
    pub fn validate(&self) -> Result<()> {
        if self.elites == 0 || self.elites > self.samples {
            return Err(Error::InvalidParams(format!(
                "need 1 <= elites <= samples, got elites={} samples={}",
                self.elites, self.samples
            )));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "smoothing must lie in (0, 1], got {}",
                self.smoothing
            )));
        }
        if self.max_iters == 0 || self.stall_iters == 0 {
            return Err(Error::InvalidParams(
                "max_iters and stall_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How the learned vectors map onto an [`ActivationSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// One vector used for both downlink and uplink.
    Shared,
    /// A downlink vector and one shared uplink vector.
    DownUp,
    /// A downlink vector and one uplink vector per device slot.
    PerSlot { devices: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldShape {
    pub antennas: usize,
    pub layout: Layout,
}

impl FieldShape {
    pub fn vectors(&self) -> usize {
        match self.layout {
            Layout::Shared => 1,
            Layout::DownUp => 2,
            Layout::PerSlot { devices } => devices + 1,
        }
    }

    /// Vector 0 is the downlink; the rest are uplink patterns in slot order.
    pub fn assemble(&self, mut vectors: Vec<ActivationPattern>) -> ActivationSet {
        debug_assert_eq!(vectors.len(), self.vectors());
        match self.layout {
            Layout::Shared => ActivationSet::shared(vectors.remove(0)),
            _ => {
                let downlink = vectors.remove(0);
                ActivationSet {
                    downlink,
                    uplink: vectors,
                }
            }
        }
    }

    pub fn vectors_of<'s>(&self, set: &'s ActivationSet) -> Vec<&'s ActivationPattern> {
        match self.layout {
            Layout::Shared => vec![&set.downlink],
            _ => std::iter::once(&set.downlink).chain(&set.uplink).collect(),
        }
    }
}

/// Per-bit activation probabilities, one row per learned vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernoulliField {
    pub probs: Vec<Vec<f64>>,
}

impl BernoulliField {
    pub fn uniform(shape: &FieldShape, p: f64) -> Self {
        Self {
            probs: vec![vec![p; shape.antennas]; shape.vectors()],
        }
    }

    /// Sum of the binary entropies of every bit, in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .map(|&p| {
                let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
                h(p) + h(1.0 - p)
            })
            .sum()
    }
}

fn sample_vector<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> ActivationPattern {
    let mut bits: Vec<bool> = probs.iter().map(|&p| rng.gen::<f64>() < p).collect();
    let mut redraws = 0;
    while !bits.iter().any(|&b| b) && redraws < ZERO_REDRAWS {
        bits = probs.iter().map(|&p| rng.gen::<f64>() < p).collect();
        redraws += 1;
    }
    if !bits.iter().any(|&b| b) {
        let forced = rng.gen_range(0..bits.len());
        bits[forced] = true;
    }
    ActivationPattern::from_bits(bits)
}

/// Draws one candidate; an all-zero vector is redrawn, then repaired.
pub fn sample<R: Rng + ?Sized>(
    field: &BernoulliField,
    shape: &FieldShape,
    rng: &mut R,
) -> ActivationSet {
    let vectors = field
        .probs
        .iter()
        .map(|row| sample_vector(row, rng))
        .collect();
    shape.assemble(vectors)
}

/// Indices of the `count` largest objectives; earlier samples win ties.
pub fn select_elite(objectives: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (objectives[a], objectives[b]);
        y.partial_cmp(&x)
            .unwrap_or_else(|| x.is_nan().cmp(&y.is_nan()))
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Elite mean of every bit.
pub fn update(shape: &FieldShape, elites: &[&ActivationSet]) -> BernoulliField {
    let mut counts = vec![vec![0usize; shape.antennas]; shape.vectors()];
    for set in elites {
        for (row, pattern) in counts.iter_mut().zip(shape.vectors_of(set)) {
            for (c, &bit) in row.iter_mut().zip(pattern.bits()) {
                *c += usize::from(bit);
            }
        }
    }
    let total = elites.len() as f64;
    BernoulliField {
        probs: counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / total).collect())
            .collect(),
    }
}

pub fn smooth(old: &BernoulliField, updated: &BernoulliField, zeta: f64) -> BernoulliField {
    let probs = old
        .probs
        .iter()
        .zip(&updated.probs)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| ((1.0 - zeta) * x + zeta * y).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    BernoulliField { probs }
}

#[derive(Clone, Debug, Serialize)]
pub struct CEIteration {
    pub iteration: usize,
    pub best_bits: f64,
    pub mean_elite: f64,
    pub entropy_bits: f64,
    #[serde(skip)]
    pub field: BernoulliField,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CETrace {
    pub iterations: Vec<CEIteration>,
}

impl CETrace {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iteration", "best_bits", "mean_elite", "entropy_bits"])?;
        for it in &self.iterations {
            out.serialize((it.iteration, it.best_bits, it.mean_elite, it.entropy_bits))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CEOutcome {
    pub best: ActivationSet,
    pub best_objective: f64,
    pub trace: CETrace,
    /// Iteration (1-based) of the last improvement larger than the stall tolerance.
    pub converged_at: usize,
}

/// Runs the search and returns the best sample ever evaluated.
///
/// Candidates are drawn serially from `rng`; only the objective evaluations
/// run in parallel, so results do not depend on the thread count.
pub fn optimize<F, R>(
    objective: F,
    shape: &FieldShape,
    params: &CEParams,
    rng: &mut R,
) -> Result<CEOutcome>
where
    F: Fn(&ActivationSet) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    params.validate()?;
    if shape.antennas == 0 {
        return Err(Error::InvalidParams("field has no antennas".into()));
    }
    let mut field = BernoulliField::uniform(shape, 0.5);
    let mut best: Option<(ActivationSet, f64)> = None;
    let mut trace = CETrace::default();
    let mut converged_at = 0;
    let mut stall = 0;

    for iteration in 1..=params.max_iters {
        let candidates: Vec<ActivationSet> = (0..params.samples)
            .map(|_| sample(&field, shape, rng))
            .collect();
        let objectives = candidates
            .par_iter()
            .map(&objective)
            .collect::<Result<Vec<f64>>>()?;
        let elite_idx = select_elite(&objectives, params.elites);

        let top = elite_idx[0];
        let improved_by = match &best {
            None => f64::INFINITY,
            Some((_, b)) => (objectives[top] - b) / b.abs().max(f64::MIN_POSITIVE),
        };
        if best.as_ref().map_or(true, |(_, b)| objectives[top] > *b) {
            best = Some((candidates[top].clone(), objectives[top]));
        }
        if improved_by > STALL_REL_TOL {
            converged_at = iteration;
            stall = 0;
        } else {
            stall += 1;
        }

        let elites: Vec<&ActivationSet> = elite_idx.iter().map(|&i| &candidates[i]).collect();
        let mean_elite =
            elite_idx.iter().map(|&i| objectives[i]).sum::<f64>() / elites.len() as f64;
        field = smooth(&field, &update(shape, &elites), params.smoothing);
        trace.iterations.push(CEIteration {
            iteration,
            best_bits: best.as_ref().map_or(f64::NAN, |(_, b)| *b),
            mean_elite,
            entropy_bits: field.entropy_bits(),
            field: field.clone(),
        });
        if stall >= params.stall_iters {
            break;
        }
    }

    let (best, best_objective) = best.expect("at least one iteration runs");
    Ok(CEOutcome {
        best,
        best_objective,
        trace,
        converged_at,
    })
}
