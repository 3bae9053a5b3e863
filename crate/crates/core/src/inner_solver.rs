//! Closed-form KKT solution of the resource-allocation problem for fixed
//! activation patterns.
//!
//! For fixed harvest coefficients `upsilon` and SNR coefficients `gamma_snr`
//! the problem is
//!
//! ```text
//! max  B * sum_l tau_l log2(1 + e_l * Gamma_l / tau_l) + sum_l T f_l / I_c
//! s.t. e_l + T kappa f_l^3 <= t0 * Upsilon_l,   t0 + sum_l tau_l <= T
//! ```
//!
//! It is jointly concave, so the KKT point is the global optimum. Every
//! offloading ("active") device sees the same received SNR `z`. Given `z`,
//! the active CPU frequencies, the charging time `t0`, and the offload
//! energies follow in closed form; `z` itself is the root of a scalar
//! stationarity residual. Devices whose offload energy comes out
//! non-positive are dropped from the active set and the root is recomputed.

use serde::Serialize;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{Coefficients, SystemParams};
use crate::numeric::{bisect, expand_upper};

const BRACKET_LO: f64 = 1e-12;
const BRACKET_HI: f64 = 1.0;
const MAX_DOUBLINGS: usize = 1100;
const BISECT_REL_TOL: f64 = 1e-15;
const BISECT_MAX_ITER: usize = 200;
const SIGN_SCAN_POINTS: usize = 64;

#[derive(Clone, Debug)]
pub struct InnerProblem<'a> {
    pub upsilon: Vec<f64>,
    pub gamma_snr: Vec<f64>,
    pub params: &'a SystemParams,
}

impl<'a> InnerProblem<'a> {
    pub fn new(upsilon: Vec<f64>, gamma_snr: Vec<f64>, params: &'a SystemParams) -> Result<Self> {
        if upsilon.is_empty() || upsilon.len() != gamma_snr.len() {
            return Err(Error::InvalidParams(format!(
                "need matching non-empty coefficient vectors, got {} and {}",
                upsilon.len(),
                gamma_snr.len()
            )));
        }
        if upsilon
            .iter()
            .chain(&gamma_snr)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidParams(
                "coefficients must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            upsilon,
            gamma_snr,
            params,
        })
    }

    pub fn from_coefficients(coeffs: Coefficients, params: &'a SystemParams) -> Result<Self> {
        Self::new(coeffs.upsilon, coeffs.gamma_snr, params)
    }

    pub fn device_count(&self) -> usize {
        self.upsilon.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerSolution {
    pub t0_s: f64,
    pub tau_s: Vec<f64>,
    pub power_w: Vec<f64>,
    pub freq_hz: Vec<f64>,
    pub offload_energy_j: Vec<f64>,
    pub harvested_j: Vec<f64>,
    pub active: Vec<bool>,
    /// Common received SNR of the active devices; 0 when nobody offloads.
    pub z_star: f64,
    pub objective_bits: f64,
    pub offload_bits: f64,
    /// Multiplier of the frame-length constraint.
    pub lambda: f64,
    /// Multipliers of the per-device energy constraints; infinite for a
    /// device that harvests nothing.
    pub alpha: Vec<f64>,
}

impl InnerSolution {
    pub fn t1_s(&self) -> f64 {
        self.tau_s.iter().sum()
    }

    pub fn local_bits(&self) -> f64 {
        self.objective_bits - self.offload_bits
    }
}

fn ensure_positive_z(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("SNR must be positive, got {z}")))
    }
}

/// Optimal CPU frequency of an offloading device at common SNR `z`.
pub fn freq_active(z: f64, gamma_l: f64, params: &SystemParams) -> Result<f64> {
    ensure_positive_z(z)?;
    if !(gamma_l > 0.0) {
        return Err(Error::Domain(
            "active device needs a positive SNR coefficient".into(),
        ));
    }
    let alpha = energy_multiplier_active(z, gamma_l, params);
    Ok((1.0 / (3.0 * params.kappa * params.intensity_cycles_per_bit * alpha)).sqrt())
}

/// CPU frequency of a local-only device that spends its whole harvest.
pub fn freq_inactive(t0: f64, upsilon_l: f64, params: &SystemParams) -> f64 {
    (t0 * upsilon_l / (params.kappa * params.frame_s)).cbrt()
}

fn energy_multiplier_active(z: f64, gamma_l: f64, params: &SystemParams) -> f64 {
    params.bandwidth_hz / LN_2 * gamma_l / (1.0 + z)
}

fn energy_multiplier_inactive(t0: f64, upsilon_l: f64, params: &SystemParams) -> f64 {
    if upsilon_l > 0.0 && t0 > 0.0 {
        let p = params;
        (p.frame_s * p.kappa / (t0 * upsilon_l)).powf(2.0 / 3.0)
            / (3.0 * p.kappa * p.intensity_cycles_per_bit)
    } else {
        f64::INFINITY
    }
}

/// Charging time implied by the time budget at common SNR `z`.
pub fn t0_of_z(z: f64, problem: &InnerProblem, active: &[bool]) -> Result<f64> {
    ensure_positive_z(z)?;
    let p = problem.params;
    let mut numer_local = 0.0;
    let mut harvest_snr = 0.0;
    for l in active_indices(active) {
        let gamma = problem.gamma_snr[l];
        numer_local += gamma * freq_active(z, gamma, p)?.powi(3);
        harvest_snr += problem.upsilon[l] * gamma;
    }
    let denom = z + harvest_snr;
    if !(denom > 0.0) {
        return Err(Error::Domain("t0 denominator vanished".into()));
    }
    Ok((z * p.frame_s + p.frame_s * p.kappa * numer_local) / denom)
}

/// Stationarity residual whose root is the common optimal SNR.
pub fn residual(z: f64, problem: &InnerProblem, active: &[bool]) -> Result<f64> {
    ensure_positive_z(z)?;
    let p = problem.params;
    let harvest_snr: f64 = active_indices(active)
        .map(|l| problem.upsilon[l] * problem.gamma_snr[l])
        .sum();
    let lhs = z.ln_1p() - z / (1.0 + z);
    let mut rhs = harvest_snr / (1.0 + z);
    let inactive_cbrt: f64 = (0..problem.device_count())
        .filter(|&l| !active[l])
        .map(|l| problem.upsilon[l].cbrt())
        .sum();
    if inactive_cbrt > 0.0 {
        let t0 = t0_of_z(z, problem, active)?;
        rhs += LN_2 * inactive_cbrt / (3.0 * p.bandwidth_hz * p.kappa * p.intensity_cycles_per_bit)
            * (p.frame_s * p.kappa / t0).powf(2.0 / 3.0);
    }
    Ok(lhs - rhs)
}

fn active_indices(active: &[bool]) -> impl Iterator<Item = usize> + '_ {
    active
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(l, _)| l)
}

/// Root of the residual for a fixed active set, or `None` when the residual
/// is already non-negative at the bottom of the bracket (offloading is worth
/// nothing at any SNR).
fn common_snr(problem: &InnerProblem, active: &[bool]) -> Result<Option<f64>> {
    let f = |z: f64| residual(z, problem, active);
    if f(BRACKET_LO)? >= 0.0 {
        return Ok(None);
    }
    let (lo, hi) = expand_upper(f, BRACKET_LO, BRACKET_HI, MAX_DOUBLINGS)?;
    let mixed = active.iter().any(|a| !a);
    if mixed {
        // The all-active residual is provably increasing; a mixed set is
        // checked for a single sign change over the bracket.
        let span = (hi / BRACKET_LO).ln();
        let mut seen_positive = false;
        for i in 0..=SIGN_SCAN_POINTS {
            let z = BRACKET_LO * (span * i as f64 / SIGN_SCAN_POINTS as f64).exp();
            let r = f(z.min(hi))?;
            if r > 0.0 {
                seen_positive = true;
            } else if seen_positive {
                return Err(Error::NoConvergence(
                    "stationarity residual changes sign more than once".into(),
                ));
            }
        }
    }
    bisect(f, lo, hi, BISECT_REL_TOL, BISECT_MAX_ITER).map(Some)
}

/// Solves the inner problem with the active-set iteration.
pub fn solve(problem: &InnerProblem) -> Result<InnerSolution> {
    let devices = problem.device_count();
    let mut active: Vec<bool> = (0..devices)
        .map(|l| problem.gamma_snr[l] > 0.0 && problem.upsilon[l] > 0.0)
        .collect();
    let p = problem.params;

    for _ in 0..=2 * devices {
        if !active.iter().any(|&a| a) {
            return Ok(all_local(problem));
        }
        let Some(z) = common_snr(problem, &active)? else {
            return Ok(all_local(problem));
        };
        let t0 = t0_of_z(z, problem, &active)?;
        let mut next = active.clone();
        for l in active_indices(&active) {
            let f = freq_active(z, problem.gamma_snr[l], p)?;
            let offload = t0 * problem.upsilon[l] - p.frame_s * p.kappa * f.powi(3);
            next[l] = offload > 0.0;
        }
        if next == active {
            return build_solution(problem, z, t0, active);
        }
        active = next;
    }
    Err(Error::NoConvergence(format!(
        "active set did not settle within {} rounds",
        2 * devices
    )))
}

fn build_solution(
    problem: &InnerProblem,
    z: f64,
    t0: f64,
    active: Vec<bool>,
) -> Result<InnerSolution> {
    let p = problem.params;
    let devices = problem.device_count();
    let mut sol = empty_solution(devices, t0);
    sol.z_star = z;
    sol.lambda = p.bandwidth_hz * (z.ln_1p() - z / (1.0 + z)) / LN_2;
    for l in 0..devices {
        let harvested = t0 * problem.upsilon[l];
        sol.harvested_j[l] = harvested;
        if active[l] {
            let gamma = problem.gamma_snr[l];
            let f = freq_active(z, gamma, p)?;
            let offload = harvested - p.frame_s * p.kappa * f.powi(3);
            let tau = offload * gamma / z;
            sol.freq_hz[l] = f;
            sol.offload_energy_j[l] = offload;
            sol.tau_s[l] = tau;
            sol.power_w[l] = offload / tau;
            sol.alpha[l] = energy_multiplier_active(z, gamma, p);
        } else {
            sol.freq_hz[l] = freq_inactive(t0, problem.upsilon[l], p);
            sol.alpha[l] = energy_multiplier_inactive(t0, problem.upsilon[l], p);
        }
    }
    sol.active = active;
    sol.offload_bits = p.bandwidth_hz * sol.t1_s() * z.ln_1p() / LN_2;
    sol.objective_bits = sol.offload_bits + local_bits(&sol.freq_hz, p);
    Ok(sol)
}

fn all_local(problem: &InnerProblem) -> InnerSolution {
    let p = problem.params;
    let devices = problem.device_count();
    let t0 = p.frame_s;
    let mut sol = empty_solution(devices, t0);
    for l in 0..devices {
        sol.harvested_j[l] = t0 * problem.upsilon[l];
        sol.freq_hz[l] = freq_inactive(t0, problem.upsilon[l], p);
        sol.alpha[l] = energy_multiplier_inactive(t0, problem.upsilon[l], p);
    }
    sol.objective_bits = local_bits(&sol.freq_hz, p);
    sol
}

fn empty_solution(devices: usize, t0: f64) -> InnerSolution {
    InnerSolution {
        t0_s: t0,
        tau_s: vec![0.0; devices],
        power_w: vec![0.0; devices],
        freq_hz: vec![0.0; devices],
        offload_energy_j: vec![0.0; devices],
        harvested_j: vec![0.0; devices],
        active: vec![false; devices],
        z_star: 0.0,
        objective_bits: 0.0,
        offload_bits: 0.0,
        lambda: 0.0,
        alpha: vec![0.0; devices],
    }
}

fn local_bits(freq_hz: &[f64], params: &SystemParams) -> f64 {
    freq_hz
        .iter()
        .map(|f| params.frame_s * f / params.intensity_cycles_per_bit)
        .sum()
}

/// Total bits of an arbitrary allocation, evaluated slot by slot.
pub fn objective(solution: &InnerSolution, problem: &InnerProblem) -> f64 {
    let p = problem.params;
    let offload: f64 = (0..problem.device_count())
        .filter(|&l| solution.tau_s[l] > 0.0)
        .map(|l| {
            let tau = solution.tau_s[l];
            let snr = solution.offload_energy_j[l] * problem.gamma_snr[l] / tau;
            tau * (1.0 + snr).log2()
        })
        .sum();
    p.bandwidth_hz * offload + local_bits(&solution.freq_hz, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_wavelengths, sample_topology, ActivationPattern, ChannelTable};
    use crate::model::{gamma_from_gain, upsilon_from_gain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Coefficients of a random geometry with random activation patterns.
    fn random_coefficients(
        seed: u64,
        devices: usize,
        params: &SystemParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = sample_topology(params, 16, devices, &mut rng).unwrap();
        let table = ChannelTable::new(&topo, &derive_wavelengths(params));
        let dl = ActivationPattern::from_mask(16, rng.gen_range(1..1 << 16));
        let ul = ActivationPattern::from_mask(16, rng.gen_range(1..1 << 16));
        let ups = (0..devices)
            .map(|l| upsilon_from_gain(table.normalized_gain(&dl, l).unwrap(), params))
            .collect();
        let gam = (0..devices)
            .map(|l| gamma_from_gain(table.normalized_gain(&ul, l).unwrap(), params))
            .collect();
        (ups, gam)
    }

    /// Newton iteration on (1+z)ln(1+z) - z = s.
    fn scalar_root(s: f64) -> f64 {
        let mut z = s.max(1.0);
        for _ in 0..200 {
            let g = (1.0 + z) * z.ln_1p() - z - s;
            z -= g / z.ln_1p();
        }
        z
    }

    #[test]
    fn all_active_residual_matches_scalar_equation() {
        let p = SystemParams::standard();
        let prob = InnerProblem::new(vec![7e-7, 2e-7], vec![4.5e7, 9e7], &p).unwrap();
        let s: f64 = 7e-7 * 4.5e7 + 2e-7 * 9e7;
        let z = scalar_root(s);
        let r = residual(z, &prob, &[true, true]).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
        let grid: Vec<f64> = (1..2000).map(|i| 1e-6 * 1.01f64.powi(i)).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&z| residual(z, &prob, &[true, true]).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_harvest_residual_has_root_at_zero() {
        let p = SystemParams::standard();
        let prob = InnerProblem::new(vec![0.0], vec![1e7], &p).unwrap();
        for z in [1e-6, 1e-3, 1.0, 100.0] {
            assert!(residual(z, &prob, &[true]).unwrap() > 0.0);
        }
        assert!(residual(1e-9, &prob, &[true]).unwrap() < 1e-17);
        assert!(matches!(
            residual(0.0, &prob, &[true]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn frequency_branches() {
        let p = SystemParams::standard();
        assert_eq!(freq_inactive(0.0, 1e-6, &p), 0.0);
        let f = freq_inactive(0.3, 5e-7, &p);
        let spent = p.frame_s * p.kappa * f.powi(3);
        assert!(rel(spent, 0.3 * 5e-7) < 1e-14);

        let f = freq_active(10.0, 4.54e7, &p).unwrap();
        assert!(rel(f, 236_603.15) < 1e-6);
        assert!(freq_active(10.0, 0.0, &p).is_err());

        // Maximise T f / I_c - alpha T kappa f^3 by golden-section search.
        let alpha = p.bandwidth_hz / LN_2 * 4.54e7 / 11.0;
        let lag = |f: f64| {
            p.frame_s * f / p.intensity_cycles_per_bit - alpha * p.frame_s * p.kappa * f.powi(3)
        };
        let (mut a, mut b) = (0.0, 1e7);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if lag(c) > lag(d) {
                b = d
            } else {
                a = c
            }
        }
        assert!(rel(0.5 * (a + b), f) < 1e-6);
    }

    #[test]
    fn t0_with_local_computing_priced_out() {
        // Active-device local energy scales as kappa^(-1/2), so a huge kappa
        // removes it from the time budget.
        let mut p = SystemParams::standard();
        p.kappa = 1e-4;
        let prob = InnerProblem::new(vec![7e-7, 3e-7], vec![4e7, 6e7], &p).unwrap();
        let s = 7e-7 * 4e7 + 3e-7 * 6e7;
        for z in [0.5, 3.0, 20.0] {
            let t0 = t0_of_z(z, &prob, &[true, true]).unwrap();
            assert!(rel(t0, z / (z + s)) < 1e-9);
        }
    }

    #[test]
    fn no_uplink_single_device_is_all_local() {
        let p = SystemParams::standard();
        let prob = InnerProblem::new(vec![7e-7], vec![0.0], &p).unwrap();
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.t0_s, p.frame_s);
        assert_eq!(sol.active, vec![false]);
        let f = (7e-7 / p.kappa).cbrt();
        assert!(rel(sol.freq_hz[0], f) < 1e-14);
        assert!(
            rel(
                sol.objective_bits,
                p.frame_s * f / p.intensity_cycles_per_bit
            ) < 1e-14
        );
        assert_eq!(sol.offload_bits, 0.0);
        assert_eq!(sol.tau_s, vec![0.0]);
    }

    #[test]
    fn symmetric_devices_get_symmetric_allocations() {
        let p = SystemParams::standard();
        let prob = InnerProblem::new(vec![5e-7, 5e-7], vec![3e7, 3e7], &p).unwrap();
        let sol = solve(&prob).unwrap();
        assert!(rel(sol.tau_s[0], sol.tau_s[1]) < 1e-14);
        assert!(rel(sol.power_w[0], sol.power_w[1]) < 1e-14);
        assert!(rel(sol.freq_hz[0], sol.freq_hz[1]) < 1e-14);
    }

    #[test]
    fn objective_paths_agree() {
        let p = SystemParams::standard();
        let (ups, gam) = random_coefficients(5, 3, &p);
        let prob = InnerProblem::new(ups, gam, &p).unwrap();
        let sol = solve(&prob).unwrap();
        assert!(rel(objective(&sol, &prob), sol.objective_bits) < 1e-12);
        let zero = empty_solution(3, 0.5);
        assert_eq!(objective(&zero, &prob), 0.0);
    }

    #[test]
    fn weak_uplink_device_drops_out() {
        // Device 1 has a usable harvest but a hopeless uplink, so it computes
        // locally while device 0 offloads.
        let p = SystemParams::standard();
        let prob = InnerProblem::new(vec![7e-7, 7e-7], vec![5e7, 1e-6], &p).unwrap();
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.active, vec![true, false]);
        assert_eq!(sol.tau_s[1], 0.0);
        assert_eq!(sol.power_w[1], 0.0);
        assert!(residual(sol.z_star, &prob, &sol.active).unwrap().abs() < 1e-10);
        let spent = p.frame_s * p.kappa * sol.freq_hz[1].powi(3);
        assert!(rel(spent, sol.harvested_j[1]) < 1e-12);
    }

    fn check_invariants(
        prob: &InnerProblem,
        sol: &InnerSolution,
    ) -> std::result::Result<(), TestCaseError> {
        let p = prob.params;
        let t_used = sol.t0_s + sol.t1_s();
        prop_assert!((t_used - p.frame_s).abs() <= 1e-9 * p.frame_s);
        for l in 0..prob.device_count() {
            let e = sol.harvested_j[l];
            let spent = sol.offload_energy_j[l] + p.frame_s * p.kappa * sol.freq_hz[l].powi(3);
            prop_assert!((e - spent).abs() <= 1e-12 * e.max(1e-300));
            for v in [
                sol.tau_s[l],
                sol.power_w[l],
                sol.freq_hz[l],
                sol.offload_energy_j[l],
            ] {
                prop_assert!(v.is_finite() && v >= 0.0);
            }
            if sol.active[l] {
                let snr = sol.offload_energy_j[l] * prob.gamma_snr[l] / sol.tau_s[l];
                prop_assert!((snr - sol.z_star).abs() <= 1e-9 * sol.z_star);
            } else {
                prop_assert_eq!(sol.tau_s[l], 0.0);
                prop_assert_eq!(sol.offload_energy_j[l], 0.0);
            }
        }
        if sol.active.iter().any(|&a| a) {
            prop_assert!(residual(sol.z_star, prob, &sol.active).unwrap().abs() <= 1e-10);
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn solution_invariants(seed in 0u64..10_000, devices in 1usize..=3) {
            let p = SystemParams::standard();
            let (ups, gam) = random_coefficients(seed, devices, &p);
            let prob = InnerProblem::new(ups, gam, &p).unwrap();
            let sol = solve(&prob).unwrap();
            check_invariants(&prob, &sol)?;
        }

        #[test]
        fn t0_in_frame_below_optimum(seed in 0u64..10_000, devices in 1usize..=3, frac in 0.001f64..1.0) {
            let p = SystemParams::standard();
            let (ups, gam) = random_coefficients(seed, devices, &p);
            let prob = InnerProblem::new(ups, gam, &p).unwrap();
            let sol = solve(&prob).unwrap();
            prop_assume!(sol.z_star > 0.0);
            let t0 = t0_of_z(frac * sol.z_star, &prob, &sol.active).unwrap();
            prop_assert!(t0 > 0.0 && t0 <= p.frame_s);
        }

        #[test]
        fn objective_monotone_in_inputs(seed in 0u64..10_000, devices in 1usize..=3, k in 1.0f64..3.0, which in 0usize..4) {
            let p = SystemParams::standard();
            let (ups, gam) = random_coefficients(seed, devices, &p);
            let base = solve(&InnerProblem::new(ups.clone(), gam.clone(), &p).unwrap()).unwrap();
            let mut q = p.clone();
            let (mut ups2, mut gam2) = (ups.clone(), gam.clone());
            match which {
                // P_b and gamma both scale every harvest coefficient.
                0 => { q.pb_watts *= k; ups2.iter_mut().for_each(|u| *u *= k); }
                1 => { q.gamma = (q.gamma * k).min(1.0); let s = q.gamma / p.gamma; ups2.iter_mut().for_each(|u| *u *= s); }
                2 => q.bandwidth_hz *= k,
                _ => gam2[seed as usize % devices] *= k,
            }
            let better = solve(&InnerProblem::new(ups2, gam2, &q).unwrap()).unwrap();
            prop_assert!(better.objective_bits >= base.objective_bits * (1.0 - 1e-12));
        }
    }
}
