//! Input masking, 4-bit quantization and lookup-table reservoir.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::seed::rng_from_seed;

/// A 4-bit pulse-stream code, MSB first (`0b1000` writes in slot 1 only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Code4(u8);

impl Code4 {
    pub const ALL: [Code4; 16] = {
        let mut out = [Code4(0); 16];
        let mut i = 0;
        while i < 16 {
            out[i] = Code4(i as u8);
            i += 1;
        }
        out
    };

    /// Panics if `v > 15`.
    pub fn new(v: u8) -> Self {
        assert!(v < 16, "4-bit code out of range: {v}");
        Self(v)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn bits(self) -> [bool; 4] {
        [
            self.0 & 0b1000 != 0,
            self.0 & 0b0100 != 0,
            self.0 & 0b0010 != 0,
            self.0 & 0b0001 != 0,
        ]
    }
}

impl std::fmt::Display for Code4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

/// Maps `x` in `[0, 1]` to `round(15 x)`, ties away from zero. Out-of-range
/// inputs are clamped first.
pub fn quantize4<T: Scalar>(x: T) -> Result<Code4> {
    if x.is_nan() {
        return Err(Error::InvalidValue("NaN cannot be quantized".into()));
    }
    let x = clamp(x, T::zero(), T::one());
    let level = (x * T::lit(15.0)).round().to_u8().unwrap_or(15).min(15);
    Ok(Code4(level))
}

/// Normalized read currents for all 16 codes of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirLookup<T> {
    rows: [[T; 4]; 16],
    device_id: u32,
}

impl<T: Scalar> ReservoirLookup<T> {
    /// Min-max normalizes raw currents over the whole table.
    pub fn from_raw(raw: [[T; 4]; 16], device_id: u32) -> Result<Self> {
        let lo = raw.iter().flatten().copied().fold(T::infinity(), T::min);
        let hi = raw.iter().flatten().copied().fold(T::neg_infinity(), T::max);
        if !(hi > lo) {
            return Err(Error::Internal(format!(
                "device {device_id}: lookup table has no spread to normalize"
            )));
        }
        let mut rows = raw;
        for v in rows.iter_mut().flatten() {
            *v = (*v - lo) / (hi - lo);
        }
        Ok(Self { rows, device_id })
    }

    pub fn device_id(&self) -> u32 {
        self.device_id
    }

    pub fn row(&self, code: Code4) -> &[T; 4] {
        &self.rows[code.0 as usize]
    }

    pub fn rows(&self) -> &[[T; 4]; 16] {
        &self.rows
    }

    /// Writes `code,read1,read2,read3,read4` with one row per code.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "code,read1,read2,read3,read4")?;
        for code in Code4::ALL {
            let r = self.row(code);
            writeln!(out, "{code},{},{},{},{}", r[0], r[1], r[2], r[3])?;
        }
        Ok(())
    }
}

/// Binary projection mask, `nodes x features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    rows: Vec<Vec<u8>>,
    seed: u64,
}

impl Mask {
    /// Random mask where each entry is 1 with probability 1/2 and every row has
    /// at least one 1.
    pub fn random(nodes: usize, features: usize, seed: u64) -> Result<Self> {
        if nodes == 0 || features == 0 {
            return Err(invalid("mask", "needs at least one node and one feature"));
        }
        let mut rng = rng_from_seed(seed);
        let rows = (0..nodes)
            .map(|_| {
                let mut row: Vec<u8> = (0..features).map(|_| rng.gen_range(0..=1)).collect();
                if row.iter().all(|&b| b == 0) {
                    row[rng.gen_range(0..features)] = 1;
                }
                row
            })
            .collect();
        Ok(Self { rows, seed })
    }

    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 {
            return Err(invalid("mask", "empty"));
        }
        for row in &rows {
            if row.len() != width {
                return Err(shape(format!("rows of width {width}"), format!("width {}", row.len())));
            }
            if row.iter().any(|&b| b > 1) || row.iter().all(|&b| b == 0) {
                return Err(invalid("mask", "rows must be binary with at least one 1"));
            }
        }
        Ok(Self { rows, seed: 0 })
    }

    pub fn nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn features(&self) -> usize {
        self.rows[0].len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }
}

/// Per-node codes from the masked mean of a normalized feature vector.
pub fn encode_frame<T: Scalar>(features: &[T], mask: &Mask) -> Result<Vec<Code4>> {
    if features.len() != mask.features() {
        return Err(shape(
            format!("{} features", mask.features()),
            format!("{} features", features.len()),
        ));
    }
    mask.rows
        .iter()
        .map(|row| {
            let (sum, count) = row
                .iter()
                .zip(features)
                .filter(|(&m, _)| m == 1)
                .fold((T::zero(), 0usize), |(s, c), (_, &x)| (s + x, c + 1));
            quantize4(clamp(sum / T::from_usize(count).unwrap(), T::zero(), T::one()))
        })
        .collect()
}

/// Concatenates each node's 4 normalized reads into one state vector.
pub fn reservoir_forward<T: Scalar>(codes: &[Code4], lookups: &[ReservoirLookup<T>]) -> Result<Vec<T>> {
    if codes.len() != lookups.len() {
        return Err(shape(
            format!("{} lookups", codes.len()),
            format!("{} lookups", lookups.len()),
        ));
    }
    let mut state = Vec::with_capacity(4 * codes.len());
    for (code, table) in codes.iter().zip(lookups) {
        state.extend_from_slice(table.row(*code));
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    Last,
}

pub fn pool_over_frames<T: Scalar>(states: &[Vec<T>], mode: Pooling) -> Result<Vec<T>> {
    let first = states
        .first()
        .ok_or_else(|| Error::EmptyInput("no frames to pool".into()))?;
    match mode {
        Pooling::Last => Ok(states.last().unwrap().clone()),
        Pooling::Mean => {
            let mut acc = vec![T::zero(); first.len()];
            for s in states {
                if s.len() != acc.len() {
                    return Err(shape(acc.len(), s.len()));
                }
                for (a, &v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
            let n = T::from_usize(states.len()).unwrap();
            acc.iter_mut().for_each(|a| *a /= n);
            Ok(acc)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirConfig {
    pub num_nodes: usize,
    pub pooling: Pooling,
    pub per_node_device_ids: Vec<u32>,
    /// Noisy repetitions averaged into each lookup entry.
    pub averaging_runs: usize,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self::speech()
    }
}

impl ReservoirConfig {
    pub fn speech() -> Self {
        Self {
            num_nodes: 8,
            pooling: Pooling::Mean,
            per_node_device_ids: (0..8).collect(),
            averaging_runs: 16,
        }
    }

    pub fn timeseries() -> Self {
        Self {
            num_nodes: 5,
            pooling: Pooling::Mean,
            per_node_device_ids: (0..5).collect(),
            averaging_runs: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_nodes == 0 {
            return Err(invalid("num_nodes", "must be at least 1"));
        }
        if self.per_node_device_ids.len() != self.num_nodes {
            return Err(invalid(
                "per_node_device_ids",
                format!("expected {} ids, got {}", self.num_nodes, self.per_node_device_ids.len()),
            ));
        }
        if self.averaging_runs == 0 {
            return Err(invalid("averaging_runs", "must be at least 1"));
        }
        Ok(())
    }

    /// One lookup table per node, each built from its own random substream.
    pub fn build_lookups<T: Scalar>(
        &self,
        device: &crate::device::VolatileDeviceParams<T>,
        seeds: &crate::seed::SeedTree,
    ) -> Result<Vec<ReservoirLookup<T>>> {
        self.validate()?;
        self.per_node_device_ids
            .iter()
            .enumerate()
            .map(|(node, &id)| {
                let mut rng = seeds.rng(&format!("lookup/node{node}/device{id}"));
                crate::device::build_lookup_table(device, id, self.averaging_runs, &mut rng)
            })
            .collect()
    }
}
