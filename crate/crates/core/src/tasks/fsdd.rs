//! Spoken-digit classification: WAV clips to MFCC frames, masked into the
//! reservoir frame by frame, pooled over time, then a softmax readout.

use std::path::Path;

use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use super::{evaluate, MetricsReport};
use crate::audio::{load_fsdd_dir, split_indices, LabelledClip, Mfcc, MfccConfig, Normalizer, SplitStrategy};
use crate::device::VolatileDeviceParams;
use crate::error::{invalid, Error, Result};
use crate::readout::{EpochStats, Loss, OutputKind, ReadoutNetwork, Sample, Target, TrainConfig, Trainer};
use crate::reservoir::{encode_frame, pool_over_frames, reservoir_forward, Mask, ReservoirConfig, ReservoirLookup};
use crate::scalar::Scalar;
use crate::seed::SeedTree;

pub const CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsddConfig {
    pub split: SplitStrategy,
    /// Filled from the harness `features` section.
    #[serde(skip)]
    pub mfcc: MfccConfig,
    /// Std of Gaussian noise added to every clip before feature extraction.
    pub noise_sigma: f64,
    pub hidden: Vec<usize>,
    /// Subtracted from the rescaled pooled state before the readout.
    pub input_offset: f64,
    /// Noise levels and number of seeds for the robustness sweep.
    pub sweep_sigmas: Vec<f64>,
    pub sweep_seeds: usize,
    /// Filled from the harness root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for FsddConfig {
    fn default() -> Self {
        Self {
            split: SplitStrategy::default(),
            mfcc: MfccConfig::default(),
            noise_sigma: 0.0,
            hidden: vec![128, 64],
            input_offset: 0.5,
            sweep_sigmas: vec![0.0, 0.01, 0.05, 0.1],
            sweep_seeds: 5,
            seed: 0,
        }
    }
}

/// Per-epoch training stats plus held-out accuracy after that epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    #[serde(flatten)]
    pub train: EpochStats,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsddOutcome<T> {
    pub metrics: MetricsReport,
    pub epochs: Vec<EpochRecord>,
    /// MFCC scaling, fitted on the training split only.
    pub normalizer: Normalizer<T>,
    /// Pooled-state scaling, fitted on the training split only.
    pub state_normalizer: Normalizer<T>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub network: ReadoutNetwork<T>,
}

pub fn write_epochs_csv<W: std::io::Write>(epochs: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,train_accuracy,test_accuracy")?;
    for e in epochs {
        let acc = e.train.accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", e.train.epoch, e.train.loss, acc, e.test_accuracy)?;
    }
    Ok(())
}

/// MFCC matrices for every clip, with optional per-clip seeded noise.
pub fn extract_features<T: Scalar + FftNum>(
    clips: &[LabelledClip<T>],
    mfcc: &MfccConfig,
    noise_sigma: f64,
    seeds: &SeedTree,
) -> Result<Vec<Vec<Vec<T>>>> {
    let mfcc = Mfcc::<T>::new(mfcc.clone())?;
    clips
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if noise_sigma > 0.0 {
                let mut rng = seeds.rng(&format!("noise/clip{i}"));
                mfcc.compute(&c.clip.add_gaussian_noise(T::lit(noise_sigma), &mut rng)?.samples)
            } else {
                mfcc.compute(&c.clip.samples)
            }
        })
        .collect()
}

/// Pooled reservoir state of one normalized MFCC matrix.
pub fn clip_state<T: Scalar>(
    frames: &[Vec<T>],
    normalizer: &Normalizer<T>,
    mask: &Mask,
    lookups: &[ReservoirLookup<T>],
    reservoir: &ReservoirConfig,
) -> Result<Vec<T>> {
    let states = frames
        .iter()
        .map(|f| reservoir_forward(&encode_frame(&normalizer.apply_frame(f), mask)?, lookups))
        .collect::<Result<Vec<_>>>()?;
    pool_over_frames(&states, reservoir.pooling)
}

pub fn run_fsdd_experiment<T: Scalar + FftNum>(
    clips: &[LabelledClip<T>],
    config: &FsddConfig,
    reservoir: &ReservoirConfig,
    device: &VolatileDeviceParams<T>,
    train: &TrainConfig<T>,
) -> Result<FsddOutcome<T>> {
    if config.noise_sigma < 0.0 {
        return Err(invalid("noise_sigma", "must be nonnegative"));
    }
    if clips.is_empty() {
        return Err(Error::EmptyInput("no clips".into()));
    }
    let seeds = SeedTree::new(config.seed);
    let (train_idx, test_idx) = split_indices(clips, &config.split, seeds.derive("split"))?;
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::EmptyInput("split left an empty train or test set".into()));
    }

    let features = extract_features(clips, &config.mfcc, config.noise_sigma, &seeds)?;
    let normalizer = Normalizer::fit(train_idx.iter().map(|&i| &features[i]))?;
    let mask = Mask::random(reservoir.num_nodes, config.mfcc.n_coeff, seeds.derive("mask"))?;
    let lookups = reservoir.build_lookups(device, &seeds.child("reservoir"))?;

    let states = |idx: &[usize]| -> Result<Vec<Vec<T>>> {
        idx.iter()
            .map(|&i| clip_state(&features[i], &normalizer, &mask, &lookups, reservoir))
            .collect()
    };
    let train_states = states(&train_idx)?;
    let state_normalizer = Normalizer::fit(std::iter::once(&train_states))?;
    let offset = T::lit(config.input_offset);
    let samples = |idx: &[usize], raw: Vec<Vec<T>>| -> Vec<Sample<T>> {
        idx.iter()
            .zip(raw)
            .map(|(&i, x)| {
                let x = state_normalizer.apply_frame(&x).into_iter().map(|v| v - offset).collect();
                (x, Target::Class(clips[i].label as usize))
            })
            .collect()
    };
    let train_set = samples(&train_idx, train_states);
    let test_set = samples(&test_idx, states(&test_idx)?);

    let mut sizes = vec![reservoir.num_nodes * 4];
    sizes.extend(&config.hidden);
    sizes.push(CLASSES);
    let mut net = ReadoutNetwork::random(&sizes, OutputKind::Softmax, &mut seeds.rng("readout/init"))?;
    let mut cfg = train.clone();
    cfg.loss = Loss::CrossEntropy;
    let mut trainer = Trainer::new(cfg)?;
    let mut epochs = Vec::with_capacity(train.epochs);
    for _ in 0..train.epochs {
        let stats = trainer.epoch(&mut net, &train_set)?;
        let test_accuracy = evaluate(&net, &test_set, config.seed)?.accuracy.unwrap_or(0.0);
        epochs.push(EpochRecord {
            train: stats,
            test_accuracy,
        });
    }
    let metrics = evaluate(&net, &test_set, config.seed)?;
    Ok(FsddOutcome {
        metrics,
        epochs,
        normalizer,
        state_normalizer,
        train_indices: train_idx,
        test_indices: test_idx,
        network: net,
    })
}

/// Loads the corpus from `dir` and runs one experiment.
pub fn run_fsdd_dir<T: Scalar + FftNum>(
    dir: &Path,
    config: &FsddConfig,
    reservoir: &ReservoirConfig,
    device: &VolatileDeviceParams<T>,
    train: &TrainConfig<T>,
) -> Result<FsddOutcome<T>> {
    let clips = load_fsdd_dir::<T>(dir)?;
    run_fsdd_experiment(&clips, config, reservoir, device, train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub seed: u64,
    pub accuracy: f64,
}

/// Trains one model per `(sigma, seed)` pair.
pub fn run_noise_sweep<T: Scalar + FftNum>(
    clips: &[LabelledClip<T>],
    sigmas: &[f64],
    seeds: &[u64],
    base: &FsddConfig,
    reservoir: &ReservoirConfig,
    device: &VolatileDeviceParams<T>,
    train: &TrainConfig<T>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(sigmas.len() * seeds.len());
    for &sigma in sigmas {
        for &seed in seeds {
            let cfg = FsddConfig {
                noise_sigma: sigma,
                seed,
                ..base.clone()
            };
            let mut tc = train.clone();
            tc.seed = SeedTree::new(seed).derive("train");
            let out = run_fsdd_experiment(clips, &cfg, reservoir, device, &tc)?;
            rows.push(SweepRow {
                sigma,
                seed,
                accuracy: out.metrics.accuracy.unwrap_or(0.0),
            });
        }
    }
    Ok(rows)
}

/// Mean accuracy per sigma, in first-appearance order.
pub fn sweep_means(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(s, _, _)| *s == r.sigma) {
            Some(e) => {
                e.1 += r.accuracy;
                e.2 += 1;
            }
            None => out.push((r.sigma, r.accuracy, 1)),
        }
    }
    out.into_iter().map(|(s, a, n)| (s, a / n as f64)).collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "sigma,seed,accuracy")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.sigma, r.seed, r.accuracy)?;
    }
    Ok(())
}
