//! The six access/activation configurations.
//!
//! Every configuration reduces to the same inner problem once its activation
//! patterns are fixed: the downlink pattern sets the harvest coefficients and
//! the pattern active during each device's uplink slot sets its SNR
//! coefficient. NOMA solutions are rebuilt from the TDMA optimum by letting
//! every device spread its offload energy over the whole uplink window, and
//! their objective is re-evaluated with the SIC sum-rate formula.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::cross_entropy::{self, CEParams, CETrace, FieldShape, Layout};
use crate::error::{Error, Result};
use crate::inner_solver::{self, InnerProblem, InnerSolution};
use crate::model::{
    self, derive_wavelengths, ActivationPattern, ChannelTable, Coefficients, SystemParams, Topology,
};
use crate::oracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Tdma,
    Noma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationLevel {
    Static,
    PartialDynamic,
    FullDynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub access: Access,
    pub level: ActivationLevel,
}

impl SchemeConfig {
    pub const fn new(access: Access, level: ActivationLevel) -> Self {
        Self { access, level }
    }

    pub const ALL: [SchemeConfig; 6] = [
        Self::new(Access::Tdma, ActivationLevel::Static),
        Self::new(Access::Tdma, ActivationLevel::PartialDynamic),
        Self::new(Access::Tdma, ActivationLevel::FullDynamic),
        Self::new(Access::Noma, ActivationLevel::Static),
        Self::new(Access::Noma, ActivationLevel::PartialDynamic),
        Self::new(Access::Noma, ActivationLevel::FullDynamic),
    ];

    pub fn name(&self) -> &'static str {
        use {Access::*, ActivationLevel::*};
        match (self.access, self.level) {
            (Tdma, Static) => "tdma_static",
            (Tdma, PartialDynamic) => "tdma_pd",
            (Tdma, FullDynamic) => "tdma_fd",
            (Noma, Static) => "noma_static",
            (Noma, PartialDynamic) => "noma_pd",
            (Noma, FullDynamic) => "noma_fd",
        }
    }

    /// Layout of the vectors the outer search learns for this configuration.
    /// NOMA with per-slot activation is searched as partially dynamic.
    pub fn field_shape(&self, antennas: usize, devices: usize) -> FieldShape {
        let layout = match (self.access, self.level) {
            (_, ActivationLevel::Static) => Layout::Shared,
            (_, ActivationLevel::PartialDynamic) | (Access::Noma, ActivationLevel::FullDynamic) => {
                Layout::DownUp
            }
            (Access::Tdma, ActivationLevel::FullDynamic) => Layout::PerSlot { devices },
        };
        FieldShape { antennas, layout }
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown configuration `{s}`")))
    }
}

/// Downlink pattern plus the uplink pattern(s).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationSet {
    pub downlink: ActivationPattern,
    pub uplink: Vec<ActivationPattern>,
}

impl ActivationSet {
    pub fn shared(pattern: ActivationPattern) -> Self {
        Self {
            uplink: vec![pattern.clone()],
            downlink: pattern,
        }
    }

    pub fn partial(downlink: ActivationPattern, uplink: ActivationPattern) -> Self {
        Self {
            downlink,
            uplink: vec![uplink],
        }
    }

    pub fn per_slot(downlink: ActivationPattern, uplink: Vec<ActivationPattern>) -> Self {
        Self { downlink, uplink }
    }

    pub fn check(&self, config: SchemeConfig, antennas: usize, devices: usize) -> Result<()> {
        let expected = match config.level {
            ActivationLevel::Static | ActivationLevel::PartialDynamic => 1,
            ActivationLevel::FullDynamic => devices,
        };
        if self.uplink.len() != expected {
            return Err(Error::ConfigMismatch(format!(
                "{config} needs {expected} uplink pattern(s), got {}",
                self.uplink.len()
            )));
        }
        if config.level == ActivationLevel::Static && self.uplink[0] != self.downlink {
            return Err(Error::ConfigMismatch(
                "static activation uses the downlink pattern for the uplink".into(),
            ));
        }
        for pattern in std::iter::once(&self.downlink).chain(&self.uplink) {
            if pattern.len() != antennas {
                return Err(Error::ConfigMismatch(format!(
                    "pattern has {} entries for {antennas} antennas",
                    pattern.len()
                )));
            }
            if pattern.popcount() == 0 {
                return Err(Error::ZeroActivation);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NomaView {
    pub t1_s: f64,
    pub power_w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeSolution {
    pub config: SchemeConfig,
    /// Patterns that produced `inner`. For NOMA with per-slot activation this
    /// is the downlink plus the single best slot pattern.
    pub activations: ActivationSet,
    pub inner: InnerSolution,
    pub noma_view: Option<NomaView>,
    pub objective_bits: f64,
}

impl SchemeSolution {
    pub fn t1_s(&self) -> f64 {
        self.noma_view
            .as_ref()
            .map_or_else(|| self.inner.t1_s(), |v| v.t1_s)
    }

    pub fn offload_bits(&self) -> f64 {
        self.objective_bits - self.inner.local_bits()
    }
}

/// Time-sharing to NOMA: one uplink window of length sum(tau), each device
/// spending its TDMA offload energy across it.
pub fn reconstruct_noma(tdma: &InnerSolution) -> Result<NomaView> {
    let t1 = tdma.t1_s();
    if !(t1 > 0.0) {
        return Err(Error::DegenerateUplink);
    }
    Ok(NomaView {
        t1_s: t1,
        power_w: tdma.offload_energy_j.iter().map(|e| e / t1).collect(),
    })
}

/// SIC sum rate over a shared uplink window, in bits.
pub fn noma_rate(t1: f64, power_w: &[f64], gamma_snr: &[f64], bandwidth_hz: f64) -> f64 {
    let received: f64 = power_w.iter().zip(gamma_snr).map(|(p, g)| p * g).sum();
    bandwidth_hz * t1 * received.ln_1p() / std::f64::consts::LN_2
}

/// Channel table bound to one topology; evaluates activation sets.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    pub topology: &'a Topology,
    pub params: &'a SystemParams,
    table: ChannelTable,
}

impl<'a> Evaluator<'a> {
    pub fn new(topology: &'a Topology, params: &'a SystemParams) -> Result<Self> {
        params.validate()?;
        topology.validate()?;
        let table = ChannelTable::new(topology, &derive_wavelengths(params));
        Ok(Self {
            topology,
            params,
            table,
        })
    }

    pub fn antennas(&self) -> usize {
        self.topology.antennas()
    }

    pub fn device_count(&self) -> usize {
        self.topology.device_count()
    }

    pub fn table(&self) -> &ChannelTable {
        &self.table
    }

    pub fn coefficients(&self, set: &ActivationSet) -> Result<Coefficients> {
        model::coefficients_from_table(&self.table, self.params, &set.downlink, &set.uplink)
    }

    pub fn problem(&self, set: &ActivationSet) -> Result<InnerProblem<'a>> {
        InnerProblem::from_coefficients(self.coefficients(set)?, self.params)
    }

    pub fn evaluate(&self, config: SchemeConfig, set: &ActivationSet) -> Result<SchemeSolution> {
        set.check(config, self.antennas(), self.device_count())?;
        match (config.access, config.level) {
            (Access::Noma, ActivationLevel::FullDynamic) => self.evaluate_noma_per_slot(set),
            (Access::Tdma, _) => {
                let inner = inner_solver::solve(&self.problem(set)?)?;
                Ok(SchemeSolution {
                    config,
                    activations: set.clone(),
                    objective_bits: inner.objective_bits,
                    inner,
                    noma_view: None,
                })
            }
            (Access::Noma, _) => self.evaluate_noma_shared(config, set),
        }
    }

    pub fn objective(&self, config: SchemeConfig, set: &ActivationSet) -> Result<f64> {
        Ok(self.evaluate(config, set)?.objective_bits)
    }

    fn evaluate_noma_shared(
        &self,
        config: SchemeConfig,
        set: &ActivationSet,
    ) -> Result<SchemeSolution> {
        let problem = self.problem(set)?;
        let inner = inner_solver::solve(&problem)?;
        let (noma_view, objective_bits) = match reconstruct_noma(&inner) {
            Ok(view) => {
                let rate = noma_rate(
                    view.t1_s,
                    &view.power_w,
                    &problem.gamma_snr,
                    self.params.bandwidth_hz,
                );
                let total = rate + inner.local_bits();
                (Some(view), total)
            }
            Err(Error::DegenerateUplink) => (None, inner.objective_bits),
            Err(e) => return Err(e),
        };
        Ok(SchemeSolution {
            config,
            activations: set.clone(),
            inner,
            noma_view,
            objective_bits,
        })
    }

    /// With per-slot patterns and fixed powers the NOMA sum rate is linear in
    /// the slot lengths, so all uplink time goes to the best slot pattern:
    /// the value is the best partially dynamic value over the slot patterns.
    fn evaluate_noma_per_slot(&self, set: &ActivationSet) -> Result<SchemeSolution> {
        let pd = SchemeConfig::new(Access::Noma, ActivationLevel::PartialDynamic);
        let mut best: Option<SchemeSolution> = None;
        for uplink in &set.uplink {
            let candidate = ActivationSet::partial(set.downlink.clone(), uplink.clone());
            let sol = self.evaluate_noma_shared(pd, &candidate)?;
            if best
                .as_ref()
                .map_or(true, |b| sol.objective_bits > b.objective_bits)
            {
                best = Some(sol);
            }
        }
        let mut sol = best.expect("full dynamic set has at least one slot");
        sol.config = SchemeConfig::new(Access::Noma, ActivationLevel::FullDynamic);
        Ok(sol)
    }
}

pub fn evaluate(
    topology: &Topology,
    params: &SystemParams,
    config: SchemeConfig,
    activations: &ActivationSet,
) -> Result<SchemeSolution> {
    Evaluator::new(topology, params)?.evaluate(config, activations)
}

/// Outer search strategy over activation patterns.
#[derive(Clone, Debug, PartialEq)]
pub enum OuterSearch {
    Exhaustive,
    CrossEntropy(CEParams),
}

#[derive(Clone, Debug)]
pub struct OuterResult {
    pub solution: SchemeSolution,
    pub trace: Option<CETrace>,
    pub converged_at: usize,
}

/// Optimises the activation patterns of one configuration.
pub fn optimize_config<R: Rng + ?Sized>(
    evaluator: &Evaluator,
    config: SchemeConfig,
    search: &OuterSearch,
    rng: &mut R,
) -> Result<OuterResult> {
    match search {
        OuterSearch::Exhaustive => {
            let (set, _) = oracle::exhaustive_outer_with(evaluator, config)?;
            Ok(OuterResult {
                solution: evaluator.evaluate(config, &set)?,
                trace: None,
                converged_at: 0,
            })
        }
        OuterSearch::CrossEntropy(ce) => {
            let devices = evaluator.device_count();
            let shape = config.field_shape(evaluator.antennas(), devices);
            let searched = match (config.access, config.level) {
                (Access::Noma, ActivationLevel::FullDynamic) => {
                    SchemeConfig::new(Access::Noma, ActivationLevel::PartialDynamic)
                }
                _ => config,
            };
            let outcome =
                cross_entropy::optimize(|set| evaluator.objective(searched, set), &shape, ce, rng)?;
            let set = if searched == config {
                outcome.best
            } else {
                let uplink = outcome.best.uplink[0].clone();
                ActivationSet::per_slot(outcome.best.downlink, vec![uplink; devices])
            };
            Ok(OuterResult {
                solution: evaluator.evaluate(config, &set)?,
                trace: Some(outcome.trace),
                converged_at: outcome.converged_at,
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainRow {
    pub config: SchemeConfig,
    pub objective_bits: f64,
    pub t0_s: f64,
    pub t1_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub rows: Vec<ChainRow>,
    pub violations: Vec<String>,
}

impl ChainReport {
    pub fn objective(&self, config: SchemeConfig) -> f64 {
        self.rows
            .iter()
            .find(|r| r.config == config)
            .map(|r| r.objective_bits)
            .expect("chain report covers all configurations")
    }
}

/// Relative tolerance for the TDMA/NOMA equalities under exhaustive search.
pub const EXACT_EQ_TOL: f64 = 1e-9;
/// Slack for comparisons between independently optimised configurations
/// under the stochastic search.
pub const CE_SLACK: f64 = 5e-3;

/// Optimises all six configurations and checks the ordering
/// S <= PD <= FD (TDMA), S <= PD = FD (NOMA), and TDMA = NOMA for S and PD.
///
/// Under cross-entropy search every configuration starts from the same seed.
pub fn theorem_chain(
    topology: &Topology,
    params: &SystemParams,
    search: &OuterSearch,
) -> Result<ChainReport> {
    use rand::SeedableRng;
    let evaluator = Evaluator::new(topology, params)?;
    let seed = match search {
        OuterSearch::CrossEntropy(ce) => ce.seed,
        OuterSearch::Exhaustive => 0,
    };
    let rows = SchemeConfig::ALL
        .iter()
        .map(|&config| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sol = optimize_config(&evaluator, config, search, &mut rng)?.solution;
            Ok(ChainRow {
                config,
                objective_bits: sol.objective_bits,
                t0_s: sol.inner.t0_s,
                t1_s: sol.t1_s(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (eq_tol, slack) = match search {
        OuterSearch::Exhaustive => (EXACT_EQ_TOL, 0.0),
        OuterSearch::CrossEntropy(_) => (CE_SLACK, CE_SLACK),
    };
    let objectives: Vec<f64> = rows.iter().map(|r| r.objective_bits).collect();
    let violations = check_chain(&objectives, eq_tol, slack);
    Ok(ChainReport { rows, violations })
}

/// `objectives` follows [`SchemeConfig::ALL`].
pub fn check_chain(objectives: &[f64], eq_tol: f64, slack: f64) -> Vec<String> {
    let name = |i: usize| SchemeConfig::ALL[i].name();
    let mut violations = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (3, 4)] {
        if objectives[a] > objectives[b] * (1.0 + slack) {
            violations.push(format!(
                "{} = {:e} exceeds {} = {:e}",
                name(a),
                objectives[a],
                name(b),
                objectives[b]
            ));
        }
    }
    for (a, b) in [(0, 3), (1, 4), (4, 5)] {
        let scale = objectives[a]
            .abs()
            .max(objectives[b].abs())
            .max(f64::MIN_POSITIVE);
        if (objectives[a] - objectives[b]).abs() > eq_tol * scale {
            violations.push(format!(
                "{} = {:e} differs from {} = {:e}",
                name(a),
                objectives[a],
                name(b),
                objectives[b]
            ));
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn instance(seed: u64, n: usize, l: usize) -> (Topology, SystemParams) {
        let p = SystemParams::standard();
        let t = sample_topology(&p, n, l, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (t, p)
    }

    fn cfg(access: Access, level: ActivationLevel) -> SchemeConfig {
        SchemeConfig::new(access, level)
    }

    #[test]
    fn names_roundtrip() {
        for c in SchemeConfig::ALL {
            assert_eq!(c.name().parse::<SchemeConfig>().unwrap(), c);
        }
        assert!("tdma_xx".parse::<SchemeConfig>().is_err());
    }

    #[test]
    fn static_equals_partial_with_same_pattern() {
        let (t, p) = instance(1, 8, 3);
        let ev = Evaluator::new(&t, &p).unwrap();
        let beta = ActivationPattern::from_mask(8, 0b0110_1001);
        let s = ev
            .objective(
                cfg(Access::Tdma, ActivationLevel::Static),
                &ActivationSet::shared(beta.clone()),
            )
            .unwrap();
        let pd = ev
            .objective(
                cfg(Access::Tdma, ActivationLevel::PartialDynamic),
                &ActivationSet::partial(beta.clone(), beta.clone()),
            )
            .unwrap();
        let fd = ev
            .objective(
                cfg(Access::Tdma, ActivationLevel::FullDynamic),
                &ActivationSet::per_slot(beta.clone(), vec![beta; 3]),
            )
            .unwrap();
        assert_eq!(s, pd);
        assert_eq!(pd, fd);
    }

    #[test]
    fn tdma_and_noma_agree_on_shared_patterns() {
        for seed in 0..10 {
            let (t, p) = instance(seed, 8, 3);
            let ev = Evaluator::new(&t, &p).unwrap();
            let set = ActivationSet::partial(
                ActivationPattern::from_mask(8, 0b1011_0001 ^ seed),
                ActivationPattern::from_mask(8, 0b0100_1110 | seed),
            );
            let tdma = ev
                .evaluate(cfg(Access::Tdma, ActivationLevel::PartialDynamic), &set)
                .unwrap();
            let noma = ev
                .evaluate(cfg(Access::Noma, ActivationLevel::PartialDynamic), &set)
                .unwrap();
            assert!(rel(noma.objective_bits, tdma.objective_bits) < 1e-9);
            let view = noma.noma_view.as_ref().unwrap();
            assert!(rel(view.t1_s, tdma.inner.t1_s()) < 1e-15);
            let gamma = ev.coefficients(&set).unwrap().gamma_snr;
            let rate = noma_rate(view.t1_s, &view.power_w, &gamma, p.bandwidth_hz);
            assert!(rel(rate, tdma.inner.offload_bits) < 1e-9);
            for (pw, e) in view.power_w.iter().zip(&tdma.inner.offload_energy_j) {
                assert!((pw * view.t1_s - e).abs() <= 1e-15 * e.max(1e-300));
            }
        }
    }

    #[test]
    fn reconstruction_arithmetic() {
        let mut inner = inner_solver::solve(
            &InnerProblem::new(vec![1e-6], vec![1e7], &SystemParams::standard()).unwrap(),
        )
        .unwrap();
        inner.tau_s = vec![0.2, 0.3];
        inner.offload_energy_j = vec![1e-6, 2e-6];
        let view = reconstruct_noma(&inner).unwrap();
        assert!(rel(view.t1_s, 0.5) < 1e-15);
        assert!(rel(view.power_w[0], 2e-6) < 1e-12);
        assert!(rel(view.power_w[1], 4e-6) < 1e-12);

        inner.tau_s = vec![0.0, 0.0];
        assert!(matches!(
            reconstruct_noma(&inner),
            Err(Error::DegenerateUplink)
        ));
    }

    #[test]
    fn noma_rate_examples() {
        let b = 5e7;
        assert_eq!(noma_rate(0.4, &[0.0, 0.0], &[1e7, 2e7], b), 0.0);
        let single = noma_rate(0.4, &[1e-6], &[3e7], b);
        assert!(rel(single, b * 0.4 * (1.0f64 + 30.0).log2()) < 1e-14);
        let (e, g, t1) = ([2e-7, 5e-7], [3e7, 1e7], 0.6);
        let p = [e[0] / t1, e[1] / t1];
        let direct = b * t1 * (1.0 + (e[0] * g[0] + e[1] * g[1]) / t1).log2();
        assert!(rel(noma_rate(t1, &p, &g, b), direct) < 1e-14);
    }

    #[test]
    fn all_local_noma_has_no_view() {
        let p = SystemParams::standard();
        let mut far = p.clone();
        far.noise_watts = 1e3; // uplink hopeless
        let (t, _) = instance(3, 4, 2);
        let ev = Evaluator::new(&t, &far).unwrap();
        let set = ActivationSet::shared(ActivationPattern::ones(4));
        let sol = ev
            .evaluate(cfg(Access::Noma, ActivationLevel::Static), &set)
            .unwrap();
        assert!(sol.noma_view.is_none());
        assert_eq!(sol.objective_bits, sol.inner.objective_bits);
        assert_eq!(sol.inner.t0_s, p.frame_s);
    }

    #[test]
    fn config_mismatch_detected() {
        let (t, p) = instance(2, 6, 3);
        let ev = Evaluator::new(&t, &p).unwrap();
        let a = ActivationPattern::from_mask(6, 3);
        let b = ActivationPattern::from_mask(6, 12);
        let bad_static = ActivationSet::partial(a.clone(), b.clone());
        assert!(matches!(
            ev.evaluate(cfg(Access::Tdma, ActivationLevel::Static), &bad_static),
            Err(Error::ConfigMismatch(_))
        ));
        let bad_fd = ActivationSet::per_slot(a.clone(), vec![b.clone(); 2]);
        assert!(matches!(
            ev.evaluate(cfg(Access::Tdma, ActivationLevel::FullDynamic), &bad_fd),
            Err(Error::ConfigMismatch(_))
        ));
        let short = ActivationSet::shared(ActivationPattern::ones(5));
        assert!(ev
            .evaluate(cfg(Access::Tdma, ActivationLevel::Static), &short)
            .is_err());
        let zero = ActivationSet::partial(a, ActivationPattern::from_mask(6, 0));
        assert!(matches!(
            ev.evaluate(cfg(Access::Tdma, ActivationLevel::PartialDynamic), &zero),
            Err(Error::ZeroActivation)
        ));
    }

    #[test]
    fn per_slot_noma_never_beats_best_shared_slot() {
        // Any split of the uplink window over slot patterns, with the powers
        // of the best shared solution, gives no more than that solution.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..10 {
            let (t, p) = instance(seed, 6, 3);
            let ev = Evaluator::new(&t, &p).unwrap();
            let dl = ActivationPattern::from_mask(6, rng.gen_range(1..64));
            let slots: Vec<ActivationPattern> = (0..3)
                .map(|_| ActivationPattern::from_mask(6, rng.gen_range(1..64)))
                .collect();
            let fd_set = ActivationSet::per_slot(dl.clone(), slots.clone());
            let fd = ev
                .evaluate(cfg(Access::Noma, ActivationLevel::FullDynamic), &fd_set)
                .unwrap();
            let view = fd.noma_view.as_ref().unwrap();
            for _ in 0..20 {
                let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = w.iter().sum();
                let rate: f64 = slots
                    .iter()
                    .zip(&w)
                    .map(|(beta, wk)| {
                        let gamma = ev
                            .coefficients(&ActivationSet::partial(dl.clone(), beta.clone()))
                            .unwrap()
                            .gamma_snr;
                        noma_rate(
                            view.t1_s * wk / total,
                            &view.power_w,
                            &gamma,
                            p.bandwidth_hz,
                        )
                    })
                    .sum();
                assert!(rate + fd.inner.local_bits() <= fd.objective_bits * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn single_antenna_all_configs_coincide() {
        let (t, p) = instance(4, 1, 2);
        let report = theorem_chain(&t, &p, &OuterSearch::Exhaustive).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        let first = report.rows[0].objective_bits;
        for row in &report.rows {
            assert!(rel(row.objective_bits, first) < 1e-9);
        }
    }

    #[test]
    fn chain_checker_flags_violations() {
        let ok = [1.0, 2.0, 3.0, 1.0, 2.0, 2.0];
        assert!(check_chain(&ok, 1e-9, 0.0).is_empty());
        let bad = [2.5, 2.0, 3.0, 1.0, 2.0, 2.1];
        let v = check_chain(&bad, 1e-9, 0.0);
        assert_eq!(v.len(), 3, "{v:?}");
    }
}
