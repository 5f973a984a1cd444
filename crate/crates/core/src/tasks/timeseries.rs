//! Nonlinear time-series prediction through the reservoir.
//!
//! The series is `y[k] = 0.1 y[k-1] + 0.2 y[k-2] y[k-3] + 0.3 u[k]^3 + 0.25`
//! driven by iid `u[k] ~ U[0, 1]`. Each prediction of `y[k]` sees the
//! window `u[k..=k+4]`, one input per reservoir node.

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::device::VolatileDeviceParams;
use crate::error::{invalid, Error, Result};
use crate::readout::{OutputKind, ReadoutNetwork, Sample, Target, TrainConfig, TrainMode, Trainer};
use crate::reservoir::{quantize4, reservoir_forward, ReservoirConfig, ReservoirLookup};
use crate::scalar::Scalar;
use crate::seed::SeedTree;

/// Inputs per prediction; also the number of reservoir nodes.
pub const WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSeriesConfig {
    /// Total series length, including the washout.
    pub length: usize,
    /// Initial steps discarded to clear the zero-history transient.
    pub washout: usize,
    /// Fraction of the usable samples (taken first, in time order) used for training.
    pub train_fraction: f64,
    pub hidden: Vec<usize>,
    /// Readout output units per unit of normalized target. Larger values
    /// shrink the relative effect of one fixed-size weight step.
    pub target_scale: f64,
    /// Reference subtracted from every normalized read before the readout,
    /// as in a differential read against a mid-scale current.
    pub input_offset: f64,
    /// Filled from the harness root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TimeSeriesConfig {
    fn default() -> Self {
        Self::with_steps(5000)
    }
}

impl TimeSeriesConfig {
    /// Config whose usable sample count after washout and windowing is `steps`.
    pub fn with_steps(steps: usize) -> Self {
        Self {
            length: steps + 50 + WINDOW - 1,
            washout: 50,
            train_fraction: 0.8,
            hidden: vec![128, 64],
            target_scale: 256.0,
            input_offset: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length <= self.washout + 10 {
            return Err(invalid(
                "length",
                format!("must exceed washout + 10 ({}), got {}", self.washout + 10, self.length),
            ));
        }
        if !(self.target_scale > 0.0 && self.target_scale.is_finite()) {
            return Err(invalid("target_scale", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn set_usable_steps(&mut self, steps: usize) {
        self.length = steps + self.washout + WINDOW - 1;
    }

    /// Number of `(window, target)` samples after washout.
    pub fn usable_steps(&self) -> usize {
        self.length.saturating_sub(self.washout + WINDOW - 1)
    }
}

/// Input and output sequences, both `config.length` long.
pub fn generate_series<T: Scalar>(config: &TimeSeriesConfig) -> (Vec<T>, Vec<T>) {
    let mut rng = SeedTree::new(config.seed).rng("timeseries/input");
    let u: Vec<T> = (0..config.length).map(|_| T::unit(&mut rng)).collect();
    let y = recurrence(&u);
    (u, y)
}

/// Runs the recurrence over `u` with zero history.
pub fn recurrence<T: Scalar>(u: &[T]) -> Vec<T> {
    let (a, b, c, d) = (T::lit(0.1), T::lit(0.2), T::lit(0.3), T::lit(0.25));
    let mut y: Vec<T> = Vec::with_capacity(u.len());
    let past = |y: &[T], k: usize, lag: usize| if k >= lag { y[k - lag] } else { T::zero() };
    for (k, &uk) in u.iter().enumerate() {
        let next = a * past(&y, k, 1) + b * past(&y, k, 2) * past(&y, k, 3) + c * uk * uk * uk + d;
        y.push(next);
    }
    y
}

/// One row of the prediction trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub y: f64,
    pub y_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesOutcome {
    pub metrics: MetricsReport,
    /// Held-out predictions, aligned by time step.
    pub trace: Vec<TracePoint>,
    /// Per-epoch mean training loss (normalized target units).
    pub epoch_loss: Vec<f64>,
    /// Online mode: running mean absolute error of the pre-update prediction
    /// over the first pass through the stream, in target units.
    pub cumulative_error: Vec<f64>,
}

pub fn write_trace_csv<W: std::io::Write>(trace: &[TracePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,y,y_hat")?;
    for p in trace {
        writeln!(out, "{},{},{}", p.k, p.y, p.y_hat)?;
    }
    Ok(())
}

/// Reservoir state for the window starting at `k`.
fn window_state<T: Scalar>(u: &[T], k: usize, lookups: &[ReservoirLookup<T>], offset: T) -> Result<Vec<T>> {
    let codes = u[k..k + WINDOW]
        .iter()
        .map(|&x| quantize4(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(reservoir_forward(&codes, lookups)?.into_iter().map(|v| v - offset).collect())
}

/// Normalized root-mean-square error: RMSE divided by the std of `y`.
pub fn nrmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::EmptyInput("nrmse needs equal-length, nonempty sequences".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var.sqrt() < 1e-12 {
        return Err(Error::Degenerate("target has zero variance; NRMSE undefined".into()));
    }
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok((mse / var).sqrt())
}

pub fn run_timeseries_experiment<T: Scalar>(
    config: &TimeSeriesConfig,
    reservoir: &ReservoirConfig,
    device: &VolatileDeviceParams<T>,
    train: &TrainConfig<T>,
) -> Result<TimeSeriesOutcome> {
    config.validate()?;
    if reservoir.num_nodes != WINDOW {
        return Err(invalid("num_nodes", format!("time-series reservoir needs {WINDOW} nodes")));
    }
    let seeds = SeedTree::new(config.seed);
    let lookups = reservoir.build_lookups(device, &seeds.child("reservoir"))?;
    let (u, y) = generate_series::<T>(config);

    let steps: Vec<usize> = (config.washout..config.length - (WINDOW - 1)).collect();
    let n_train = (steps.len() as f64 * config.train_fraction).round() as usize;
    if n_train < 2 || steps.len() - n_train < 2 {
        return Err(Error::EmptyInput("too few samples after washout".into()));
    }
    let (train_k, test_k) = steps.split_at(n_train);

    // Targets are standardized with training statistics, then scaled.
    let n = T::from_usize(train_k.len()).unwrap();
    let center = train_k.iter().map(|&k| y[k]).sum::<T>() / n;
    let var = train_k.iter().map(|&k| (y[k] - center) * (y[k] - center)).sum::<T>() / n;
    if var.sqrt() <= T::lit(1e-12) {
        return Err(Error::Degenerate("training target is constant".into()));
    }
    let span = var.sqrt() / T::lit(config.target_scale);
    let offset = T::lit(config.input_offset);
    let sample = |k: usize| -> Result<Sample<T>> {
        Ok((window_state(&u, k, &lookups, offset)?, Target::Values(vec![(y[k] - center) / span])))
    };
    let train_set = train_k.iter().map(|&k| sample(k)).collect::<Result<Vec<_>>>()?;
    let test_set = test_k.iter().map(|&k| sample(k)).collect::<Result<Vec<_>>>()?;

    let mut sizes = vec![WINDOW * 4];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut net = ReadoutNetwork::random(&sizes, OutputKind::Identity, &mut seeds.rng("readout/init"))?;
    let mut trainer = Trainer::new(train.clone())?;

    let mut epoch_loss = Vec::with_capacity(train.epochs);
    let mut cumulative_error = Vec::new();
    let mut abs_sum = 0.0;
    for epoch in 0..train.epochs {
        let first_online = epoch == 0 && train.mode == TrainMode::Online;
        let stats = trainer.epoch_with(&mut net, &train_set, |_, l| {
            if first_online {
                // Squared error in output units back to absolute error in target units.
                abs_sum += l.to_f64_lossy().sqrt() * span.to_f64_lossy();
                cumulative_error.push(abs_sum / (cumulative_error.len() + 1) as f64);
            }
        })?;
        epoch_loss.push(stats.loss);
    }

    let mut trace = Vec::with_capacity(test_set.len());
    for (&k, (x, _)) in test_k.iter().zip(&test_set) {
        let out = net.forward(x)?[0];
        trace.push(TracePoint {
            k,
            y: y[k].to_f64_lossy(),
            y_hat: (center + out * span).to_f64_lossy(),
        });
    }
    let ys: Vec<f64> = trace.iter().map(|p| p.y).collect();
    let yh: Vec<f64> = trace.iter().map(|p| p.y_hat).collect();
    let mut metrics = MetricsReport::regression(nrmse(&ys, &yh)?, config.seed);
    metrics.samples = trace.len();
    Ok(TimeSeriesOutcome {
        metrics,
        trace,
        epoch_loss,
        cumulative_error,
    })
}
