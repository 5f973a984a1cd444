//! Behavioral device models.
//!
//! Two device families are simulated:
//!
//! * a volatile short-term-memory cell used as a reservoir neuron. Its hidden
//!   state `w` relaxes toward zero every pulse slot and is pushed toward one
//!   by every high write pulse. Reading the cell after each of four write
//!   slots yields a 4-vector of read currents per 4-bit input stream.
//! * a nonvolatile analog synapse whose conductance follows saturating
//!   exponential potentiation and depression curves under identical pulses.
//!
//! Cycle-to-cycle (C2C) variation is multiplicative Gaussian noise on read
//! currents and programmed conductances. Device-to-device (D2D) variation is
//! a frozen multiplicative perturbation of the conductance bounds, seeded by
//! the device id.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::reservoir::{Code4, ReservoirLookup};
use crate::scalar::{clamp, mean, sample_std, Scalar};
use crate::seed::SeedTree;

const DEFAULT_D2D_SEED: u64 = 0x4d6f_5332_d2d0_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct VolatileDeviceParams<T> {
    /// Fraction of the remaining headroom `1 - w` gained per high write pulse.
    pub w_write_gain: T,
    /// Retention multiplier applied to `w` at the start of every slot.
    pub decay_factor: T,
    pub g_off: T,
    pub g_on: T,
    pub v_read: T,
    pub v_write: T,
    pub pulse_width: T,
    /// Relative std of read-current noise.
    pub c2c_sigma: T,
    /// Relative std of the per-device perturbation of `g_on` / `g_off`.
    pub d2d_sigma: T,
    pub d2d_seed: u64,
}

impl<T: Scalar> Default for VolatileDeviceParams<T> {
    fn default() -> Self {
        Self {
            w_write_gain: T::lit(0.5),
            decay_factor: T::lit(0.8),
            g_off: T::lit(5e-9),
            // 300 nA at full state under a 2 V read.
            g_on: T::lit(150e-9),
            v_read: T::lit(2.0),
            v_write: T::lit(6.0),
            pulse_width: T::lit(10e-6),
            c2c_sigma: T::lit(0.02),
            d2d_sigma: T::lit(0.05),
            d2d_seed: DEFAULT_D2D_SEED,
        }
    }
}

impl<T: Scalar> VolatileDeviceParams<T> {
    /// Defaults with both noise sources disabled.
    pub fn noiseless() -> Self {
        Self {
            c2c_sigma: T::zero(),
            d2d_sigma: T::zero(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (z, one) = (T::zero(), T::one());
        if !(self.decay_factor > z && self.decay_factor < one) {
            return Err(invalid("decay_factor", "must lie in (0, 1)"));
        }
        if !(self.w_write_gain > z && self.w_write_gain <= one) {
            return Err(invalid("w_write_gain", "must lie in (0, 1]"));
        }
        if !(self.g_off > z) {
            return Err(invalid("g_off", "must be positive"));
        }
        if !(self.g_on > self.g_off) {
            return Err(invalid("g_on", "must exceed g_off"));
        }
        if !(self.v_read > z && self.v_write > z && self.pulse_width > z) {
            return Err(invalid("v_read/v_write/pulse_width", "must be positive"));
        }
        if !(self.c2c_sigma >= z && self.d2d_sigma >= z) {
            return Err(invalid("c2c_sigma/d2d_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Parameters of physical device `device_id`: `g_on` and `g_off` scaled by
    /// independent frozen factors `1 + d2d_sigma * z`.
    pub fn instance(&self, device_id: u32) -> Self {
        if self.d2d_sigma == T::zero() {
            return *self;
        }
        let mut rng = SeedTree::new(self.d2d_seed).rng(&format!("device/{device_id}"));
        // Factors are kept within +-50% so the bounds stay ordered and positive.
        let lo = T::lit(0.5);
        let hi = T::lit(1.5);
        let f_off = clamp(T::noise_factor(self.d2d_sigma, &mut rng), lo, hi);
        let f_on = clamp(T::noise_factor(self.d2d_sigma, &mut rng), lo, hi);
        let g_off = self.g_off * f_off;
        let g_on = (self.g_on * f_on).max(g_off * T::lit(1.01));
        Self { g_off, g_on, ..*self }
    }

    fn conductance(&self, w: T) -> T {
        self.g_off + w * (self.g_on - self.g_off)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatileState<T> {
    pub w: T,
    pub device_id: u32,
}

impl<T: Scalar> VolatileState<T> {
    pub fn fresh(device_id: u32) -> Self {
        Self {
            w: T::zero(),
            device_id,
        }
    }
}

/// One write/read slot: decay, optional write, then a noisy read.
///
/// `params` are used as given; callers wanting D2D variation pass
/// [`VolatileDeviceParams::instance`] for the state's device.
pub fn step_slot<T: Scalar, R: Rng + ?Sized>(
    state: VolatileState<T>,
    bit: bool,
    params: &VolatileDeviceParams<T>,
    rng: &mut R,
) -> (VolatileState<T>, T) {
    let mut w = params.decay_factor * state.w;
    if bit {
        w += params.w_write_gain * (T::one() - w);
    }
    let w = clamp(w, T::zero(), T::one());
    let current = params.v_read * params.conductance(w) * T::noise_factor(params.c2c_sigma, rng);
    (VolatileState { w, ..state }, current)
}

/// Applies a 4-bit stream to a fresh device and returns the four read currents.
pub fn run_bit_stream<T: Scalar, R: Rng + ?Sized>(
    bits: &[bool],
    params: &VolatileDeviceParams<T>,
    device_id: u32,
    rng: &mut R,
) -> Result<[T; 4]> {
    if bits.len() != 4 {
        return Err(crate::error::shape("4 bits", format!("{} bits", bits.len())));
    }
    let device = params.instance(device_id);
    let mut state = VolatileState::fresh(device_id);
    let mut out = [T::zero(); 4];
    for (slot, &bit) in out.iter_mut().zip(bits) {
        let (next, current) = step_slot(state, bit, &device, rng);
        state = next;
        *slot = current;
    }
    Ok(out)
}

/// Raw (unnormalized) currents averaged over `averaging_runs` repetitions.
pub fn measure_states<T: Scalar, R: Rng + ?Sized>(
    params: &VolatileDeviceParams<T>,
    device_id: u32,
    averaging_runs: usize,
    rng: &mut R,
) -> Result<[[T; 4]; 16]> {
    params.validate()?;
    if averaging_runs == 0 {
        return Err(invalid("averaging_runs", "must be at least 1"));
    }
    let n = T::from_usize(averaging_runs).unwrap();
    let mut rows = [[T::zero(); 4]; 16];
    for (code, row) in rows.iter_mut().enumerate() {
        let bits = Code4::new(code as u8).bits();
        for _ in 0..averaging_runs {
            let reads = run_bit_stream(&bits, params, device_id, rng)?;
            for (acc, r) in row.iter_mut().zip(reads) {
                *acc += r;
            }
        }
        for acc in row.iter_mut() {
            *acc /= n;
        }
    }
    Ok(rows)
}

/// Builds the 16-row lookup table of min-max normalized read currents.
pub fn build_lookup_table<T: Scalar, R: Rng + ?Sized>(
    params: &VolatileDeviceParams<T>,
    device_id: u32,
    averaging_runs: usize,
    rng: &mut R,
) -> Result<ReservoirLookup<T>> {
    let raw = measure_states(params, device_id, averaging_runs, rng)?;
    ReservoirLookup::from_raw(raw, device_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SynapseParams<T> {
    pub g_min: T,
    pub g_max: T,
    pub n_pot: u32,
    pub n_dep: u32,
    pub a_pot: T,
    pub a_dep: T,
    pub c2c_sigma: T,
    pub v_pot: T,
    pub v_dep: T,
    pub pulse_width: T,
}

impl<T: Scalar> Default for SynapseParams<T> {
    fn default() -> Self {
        Self {
            g_min: T::lit(1e-6),
            g_max: T::lit(10e-6),
            n_pot: 45,
            n_dep: 45,
            a_pot: T::lit(15.0),
            a_dep: T::lit(15.0),
            c2c_sigma: T::lit(0.04),
            v_pot: T::lit(5.0),
            v_dep: T::lit(-2.0),
            pulse_width: T::lit(5e-6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseDirection {
    Potentiate,
    Depress,
}

impl<T: Scalar> SynapseParams<T> {
    pub fn noiseless() -> Self {
        Self {
            c2c_sigma: T::zero(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_min > T::zero()) {
            return Err(invalid("g_min", "must be positive"));
        }
        if !(self.g_max > self.g_min) {
            return Err(invalid("g_max", "must exceed g_min"));
        }
        if self.n_pot == 0 || self.n_dep == 0 {
            return Err(invalid("n_pot/n_dep", "must be at least 1"));
        }
        if !(self.a_pot > T::zero() && self.a_dep > T::zero()) {
            return Err(invalid("a_pot/a_dep", "must be positive"));
        }
        if !(self.c2c_sigma >= T::zero()) {
            return Err(invalid("c2c_sigma", "must be non-negative"));
        }
        Ok(())
    }

    fn span(&self) -> T {
        self.g_max - self.g_min
    }

    /// Normalized saturating curve `(1 - e^{-n/a}) / (1 - e^{-N/a})`.
    fn shape(n: T, a: T, total: u32) -> T {
        let total = T::from_u32(total).unwrap();
        (-n / a).exp_m1() / (-total / a).exp_m1()
    }

    /// Inverse of [`Self::shape`]: the fractional pulse index reaching `frac`.
    fn shape_inv(frac: T, a: T, total: u32) -> T {
        let total = T::from_u32(total).unwrap();
        let denom = (-total / a).exp_m1();
        -a * (frac * denom).ln_1p()
    }

    pub fn potentiation_conductance(&self, n: u32) -> Result<T> {
        if n > self.n_pot {
            return Err(Error::Domain(format!(
                "potentiation pulse index {n} outside 0..={}",
                self.n_pot
            )));
        }
        Ok(self.pot_at(T::from_u32(n).unwrap()))
    }

    pub fn depression_conductance(&self, n: u32) -> Result<T> {
        if n > self.n_dep {
            return Err(Error::Domain(format!(
                "depression pulse index {n} outside 0..={}",
                self.n_dep
            )));
        }
        Ok(self.dep_at(T::from_u32(n).unwrap()))
    }

    fn pot_at(&self, n: T) -> T {
        if n <= T::zero() {
            return self.g_min;
        }
        if n >= T::from_u32(self.n_pot).unwrap() {
            return self.g_max;
        }
        self.g_min + self.span() * Self::shape(n, self.a_pot, self.n_pot)
    }

    fn dep_at(&self, n: T) -> T {
        if n <= T::zero() {
            return self.g_max;
        }
        if n >= T::from_u32(self.n_dep).unwrap() {
            return self.g_min;
        }
        self.g_max - self.span() * Self::shape(n, self.a_dep, self.n_dep)
    }

    fn pot_index(&self, g: T) -> T {
        let frac = clamp((g - self.g_min) / self.span(), T::zero(), T::one());
        Self::shape_inv(frac, self.a_pot, self.n_pot)
    }

    fn dep_index(&self, g: T) -> T {
        let frac = clamp((self.g_max - g) / self.span(), T::zero(), T::one());
        Self::shape_inv(frac, self.a_dep, self.n_dep)
    }

    /// Conductance change of one pulse in weight units, `2 / n` for a
    /// weight range of `[-1, 1]`.
    pub fn weight_step(&self, dir: PulseDirection) -> T {
        let pulses = match dir {
            PulseDirection::Potentiate => self.n_pot,
            PulseDirection::Depress => self.n_dep,
        };
        T::lit(2.0) / T::from_u32(pulses).unwrap()
    }
}

/// Moves `g` one pulse along the potentiation or depression curve, then
/// applies C2C noise and clamps to the conductance bounds.
pub fn noisy_pulse_update<T: Scalar, R: Rng + ?Sized>(
    g: T,
    direction: PulseDirection,
    params: &SynapseParams<T>,
    rng: &mut R,
) -> T {
    let next = match direction {
        PulseDirection::Potentiate => params.pot_at(params.pot_index(g) + T::one()),
        PulseDirection::Depress => params.dep_at(params.dep_index(g) + T::one()),
    };
    clamp(
        next * T::noise_factor(params.c2c_sigma, rng),
        params.g_min,
        params.g_max,
    )
}

/// Conductance recorded after every pulse of repeated P/D cycles.
#[derive(Debug, Clone)]
pub struct PdTrace<T> {
    /// `potentiation[c][i]` is the conductance after pulse `i + 1` of cycle `c`.
    pub potentiation: Vec<Vec<T>>,
    pub depression: Vec<Vec<T>>,
}

/// Runs `cycles` consecutive P/D cycles starting from `g_min`.
pub fn simulate_pd_cycles<T: Scalar, R: Rng + ?Sized>(
    params: &SynapseParams<T>,
    cycles: usize,
    rng: &mut R,
) -> Result<PdTrace<T>> {
    params.validate()?;
    let mut g = params.g_min;
    let mut potentiation = Vec::with_capacity(cycles);
    let mut depression = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let mut up = Vec::with_capacity(params.n_pot as usize);
        for _ in 0..params.n_pot {
            g = noisy_pulse_update(g, PulseDirection::Potentiate, params, rng);
            up.push(g);
        }
        let mut down = Vec::with_capacity(params.n_dep as usize);
        for _ in 0..params.n_dep {
            g = noisy_pulse_update(g, PulseDirection::Depress, params, rng);
            down.push(g);
        }
        potentiation.push(up);
        depression.push(down);
    }
    Ok(PdTrace {
        potentiation,
        depression,
    })
}

/// Cross-cycle statistics of the conductance at one pulse index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseStats<T> {
    pub pulse: usize,
    pub mean: T,
    /// Sample std over cycles divided by the mean.
    pub relative_std: T,
    /// Standard error of the mean divided by the mean.
    pub relative_standard_error: T,
}

fn column_stats<T: Scalar>(rows: &[Vec<T>]) -> Vec<PulseStats<T>> {
    let width = rows.first().map_or(0, Vec::len);
    let n = T::from_usize(rows.len()).unwrap();
    (0..width)
        .map(|i| {
            let col: Vec<T> = rows.iter().map(|r| r[i]).collect();
            let m = mean(&col);
            let sd = sample_std(&col);
            PulseStats {
                pulse: i + 1,
                mean: m,
                relative_std: sd / m,
                relative_standard_error: sd / n.sqrt() / m,
            }
        })
        .collect()
}

impl<T: Scalar> PdTrace<T> {
    pub fn potentiation_stats(&self) -> Vec<PulseStats<T>> {
        column_stats(&self.potentiation)
    }

    pub fn depression_stats(&self) -> Vec<PulseStats<T>> {
        column_stats(&self.depression)
    }
}
