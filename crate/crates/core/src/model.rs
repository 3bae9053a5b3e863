//! Geometry, channel and energy primitives.
//!
//! Antennas sit on a waveguide at height `d` along the x axis, fed from
//! `(0, 0, d)`. Devices lie on the ground plane. Each antenna contributes a
//! spherical-wave coefficient whose phase has a free-space part (device to
//! antenna) and an in-waveguide part (feed to antenna, at the guided
//! wavelength). Downlink and uplink coefficients coincide, so a single gain
//! routine serves both directions.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Physical and hardware constants of one system instance, in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub pb_watts: f64,
    pub noise_watts: f64,
    pub bandwidth_hz: f64,
    pub frame_s: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub intensity_cycles_per_bit: f64,
    pub carrier_hz: f64,
    pub refractive_index: f64,
    pub height_m: f64,
    pub region_m: (f64, f64),
}

impl SystemParams {
    /// Default simulation setup: 43 dBm, -120 dBm noise, 50 MHz at 28 GHz,
    /// 4 m waveguide height, 30 m x 10 m device region.
    pub fn standard() -> Self {
        Self {
            pb_watts: dbm_to_watts(43.0),
            noise_watts: dbm_to_watts(-120.0),
            bandwidth_hz: 50e6,
            frame_s: 1.0,
            gamma: 0.8,
            kappa: 1e-28,
            intensity_cycles_per_bit: 200.0,
            carrier_hz: 28e9,
            refractive_index: 1.4,
            height_m: 4.0,
            region_m: (30.0, 10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pb_watts", self.pb_watts),
            ("noise_watts", self.noise_watts),
            ("bandwidth_hz", self.bandwidth_hz),
            ("frame_s", self.frame_s),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("intensity_cycles_per_bit", self.intensity_cycles_per_bit),
            ("carrier_hz", self.carrier_hz),
            ("refractive_index", self.refractive_index),
            ("height_m", self.height_m),
            ("region_m.0", self.region_m.0),
            ("region_m.1", self.region_m.1),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.gamma > 1.0 {
            return Err(Error::InvalidParams(format!(
                "gamma must be <= 1, got {}",
                self.gamma
            )));
        }
        if self.refractive_index < 1.0 {
            return Err(Error::InvalidParams(format!(
                "refractive_index must be >= 1, got {}",
                self.refractive_index
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Antenna placement along the waveguide plus device positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// x-coordinate of each pinching antenna; antenna `n` sits at `(x_n, 0, feed.z)`.
    pub pa_x_m: Vec<f64>,
    pub feed: Point3,
    pub devices: Vec<Point3>,
}

impl Topology {
    pub fn new(pa_x_m: Vec<f64>, height_m: f64, devices: Vec<Point3>) -> Result<Self> {
        let topology = Self {
            pa_x_m,
            feed: Point3::new(0.0, 0.0, height_m),
            devices,
        };
        topology.validate()?;
        Ok(topology)
    }

    pub fn antennas(&self) -> usize {
        self.pa_x_m.len()
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn antenna_position(&self, n: usize) -> Point3 {
        Point3::new(self.pa_x_m[n], 0.0, self.feed.z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pa_x_m.is_empty() {
            return Err(Error::InvalidParams(
                "topology needs at least one antenna".into(),
            ));
        }
        if self.devices.is_empty() {
            return Err(Error::InvalidParams(
                "topology needs at least one device".into(),
            ));
        }
        if self.pa_x_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(
                "antenna x-coordinates must be strictly increasing".into(),
            ));
        }
        let coords = self
            .pa_x_m
            .iter()
            .chain(self.devices.iter().flat_map(|d| [&d.x, &d.y, &d.z]))
            .chain([&self.feed.x, &self.feed.y, &self.feed.z]);
        if coords.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "topology coordinates must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Binary antenna activation vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<bool>", into = "Vec<bool>")]
pub struct ActivationPattern {
    bits: Vec<bool>,
    popcount: usize,
}

impl From<Vec<bool>> for ActivationPattern {
    fn from(bits: Vec<bool>) -> Self {
        Self::from_bits(bits)
    }
}

impl From<ActivationPattern> for Vec<bool> {
    fn from(pattern: ActivationPattern) -> Self {
        pattern.bits
    }
}

impl ActivationPattern {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let popcount = bits.iter().filter(|&&b| b).count();
        Self { bits, popcount }
    }

    pub fn ones(n: usize) -> Self {
        Self::from_bits(vec![true; n])
    }

    pub fn single(n: usize, index: usize) -> Self {
        let mut bits = vec![false; n];
        bits[index] = true;
        Self::from_bits(bits)
    }

    /// Bit `i` of `mask` drives antenna `i`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self::from_bits((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.popcount
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.bits[n]
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    fn require_active(&self) -> Result<()> {
        if self.popcount == 0 {
            Err(Error::ZeroActivation)
        } else {
            Ok(())
        }
    }
}

impl std::fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedWavelengths {
    /// c / (4 pi f_c)
    pub eta_m: f64,
    pub lambda_m: f64,
    pub lambda_g_m: f64,
}

pub fn derive_wavelengths(params: &SystemParams) -> DerivedWavelengths {
    let lambda_m = SPEED_OF_LIGHT / params.carrier_hz;
    DerivedWavelengths {
        eta_m: SPEED_OF_LIGHT / (4.0 * PI * params.carrier_hz),
        lambda_m,
        lambda_g_m: lambda_m / params.refractive_index,
    }
}

/// Channel between antenna `n` and device `l` (0-based), zero if the antenna is off.
pub fn channel_coefficient(
    topology: &Topology,
    wavelengths: &DerivedWavelengths,
    pattern: &ActivationPattern,
    n: usize,
    l: usize,
) -> Complex64 {
    if !pattern.is_active(n) {
        return Complex64::new(0.0, 0.0);
    }
    raw_coefficient(topology, wavelengths, n, l)
}

fn raw_coefficient(
    topology: &Topology,
    wavelengths: &DerivedWavelengths,
    n: usize,
    l: usize,
) -> Complex64 {
    let antenna = topology.antenna_position(n);
    let r = topology.devices[l].distance(&antenna);
    let w = topology.feed.distance(&antenna);
    let phase = -2.0 * PI * r / wavelengths.lambda_m - 2.0 * PI * w / wavelengths.lambda_g_m;
    Complex64::from_polar(wavelengths.eta_m / r, phase)
}

/// |sum_n h_nl|^2 for device `l`.
pub fn gain(
    topology: &Topology,
    wavelengths: &DerivedWavelengths,
    pattern: &ActivationPattern,
    l: usize,
) -> Result<f64> {
    pattern.require_active()?;
    let sum: Complex64 = (0..topology.antennas())
        .map(|n| channel_coefficient(topology, wavelengths, pattern, n, l))
        .sum();
    Ok(sum.norm_sqr())
}

/// Per-antenna, per-device coefficients with the activation factored out.
///
/// Gains for many patterns over one topology reuse the same table.
#[derive(Clone, Debug)]
pub struct ChannelTable {
    antennas: usize,
    // row-major: coeffs[l * antennas + n]
    coeffs: Vec<Complex64>,
}

impl ChannelTable {
    pub fn new(topology: &Topology, wavelengths: &DerivedWavelengths) -> Self {
        let antennas = topology.antennas();
        let coeffs = (0..topology.device_count())
            .flat_map(|l| (0..antennas).map(move |n| (l, n)))
            .map(|(l, n)| raw_coefficient(topology, wavelengths, n, l))
            .collect();
        Self { antennas, coeffs }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn device_count(&self) -> usize {
        self.coeffs.len() / self.antennas
    }

    pub fn coefficient(&self, n: usize, l: usize) -> Complex64 {
        self.coeffs[l * self.antennas + n]
    }

    pub fn gain(&self, pattern: &ActivationPattern, l: usize) -> Result<f64> {
        pattern.require_active()?;
        let row = &self.coeffs[l * self.antennas..(l + 1) * self.antennas];
        let sum: Complex64 = pattern.active_indices().map(|n| row[n]).sum();
        Ok(sum.norm_sqr())
    }

    /// Gain divided by the active-antenna count, i.e. the per-antenna-power
    /// normalised gain that both the harvest and the SNR coefficients use.
    pub fn normalized_gain(&self, pattern: &ActivationPattern, l: usize) -> Result<f64> {
        Ok(self.gain(pattern, l)? / pattern.popcount() as f64)
    }
}

/// E_l = gamma * t0 * (P_b / ||beta||_0) * G_l.
pub fn harvested_energy(
    gain_dl: f64,
    pattern: &ActivationPattern,
    t0: f64,
    params: &SystemParams,
) -> Result<f64> {
    pattern.require_active()?;
    Ok(params.gamma * t0 * params.pb_watts / pattern.popcount() as f64 * gain_dl)
}

/// Bits processed and energy spent by a CPU running at `f_hz` for the frame.
pub fn local_computation(f_hz: f64, params: &SystemParams) -> (f64, f64) {
    let bits = params.frame_s * f_hz / params.intensity_cycles_per_bit;
    let joules = params.frame_s * params.kappa * f_hz.powi(3);
    (bits, joules)
}

/// Per-device coefficients consumed by the inner solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Harvest power per second of charging (W).
    pub upsilon: Vec<f64>,
    /// Received SNR per watt of transmit power (1/W).
    pub gamma_snr: Vec<f64>,
}

pub(crate) fn upsilon_from_gain(normalized_gain: f64, params: &SystemParams) -> f64 {
    params.gamma * params.pb_watts * normalized_gain
}

pub(crate) fn gamma_from_gain(normalized_gain: f64, params: &SystemParams) -> f64 {
    normalized_gain / params.noise_watts
}

/// Builds the harvest and SNR coefficients.
///
/// `beta_ul_per_slot` holds either one shared uplink pattern or one pattern
/// per device (the pattern active during that device's slot).
pub fn coefficients(
    topology: &Topology,
    params: &SystemParams,
    beta_dl: &ActivationPattern,
    beta_ul_per_slot: &[ActivationPattern],
) -> Result<Coefficients> {
    let table = ChannelTable::new(topology, &derive_wavelengths(params));
    coefficients_from_table(&table, params, beta_dl, beta_ul_per_slot)
}

pub(crate) fn coefficients_from_table(
    table: &ChannelTable,
    params: &SystemParams,
    beta_dl: &ActivationPattern,
    beta_ul_per_slot: &[ActivationPattern],
) -> Result<Coefficients> {
    let devices = table.device_count();
    if beta_ul_per_slot.len() != 1 && beta_ul_per_slot.len() != devices {
        return Err(Error::ConfigMismatch(format!(
            "expected 1 or {devices} uplink patterns, got {}",
            beta_ul_per_slot.len()
        )));
    }
    for pattern in std::iter::once(beta_dl).chain(beta_ul_per_slot) {
        if pattern.len() != table.antennas() {
            return Err(Error::ConfigMismatch(format!(
                "pattern length {} does not match {} antennas",
                pattern.len(),
                table.antennas()
            )));
        }
    }
    let upsilon = (0..devices)
        .map(|l| {
            Ok(upsilon_from_gain(
                table.normalized_gain(beta_dl, l)?,
                params,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let gamma_snr = (0..devices)
        .map(|l| {
            let pattern = &beta_ul_per_slot[if beta_ul_per_slot.len() == 1 { 0 } else { l }];
            Ok(gamma_from_gain(table.normalized_gain(pattern, l)?, params))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coefficients { upsilon, gamma_snr })
}

/// Evenly spaced antennas over `[0, D_x]` (endpoints included) and devices
/// drawn uniformly over the region.
///
/// Devices are drawn first, so for a given RNG state the device layout does
/// not depend on `antennas`.
pub fn sample_topology<R: Rng + ?Sized>(
    params: &SystemParams,
    antennas: usize,
    devices: usize,
    rng: &mut R,
) -> Result<Topology> {
    if antennas == 0 || devices == 0 {
        return Err(Error::InvalidParams(
            "need at least one antenna and one device".into(),
        ));
    }
    let (dx, dy) = params.region_m;
    let positions = (0..devices)
        .map(|_| Point3::new(rng.gen::<f64>() * dx, rng.gen::<f64>() * dy, 0.0))
        .collect();
    Topology::new(uniform_positions(antennas, dx), params.height_m, positions)
}

pub fn uniform_positions(antennas: usize, length_m: f64) -> Vec<f64> {
    if antennas == 1 {
        return vec![0.5 * length_m];
    }
    let spacing = length_m / (antennas - 1) as f64;
    (0..antennas).map(|n| n as f64 * spacing).collect()
}
