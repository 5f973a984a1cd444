//! Audio ingestion and MFCC features for spoken-digit experiments.

pub mod mfcc;
pub mod wav;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::seed::rng_from_seed;

pub use mfcc::{Mfcc, MfccConfig, Normalizer};
pub use wav::{load_wav, parse_fsdd_name};

pub const CLIP_SAMPLES: usize = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
    pub label: Option<u8>,
    pub speaker: Option<String>,
}

impl<T: Scalar> AudioClip<T> {
    /// Zero-pads or cuts the tail to exactly `target` samples.
    pub fn pad_or_truncate(mut self, target: usize) -> Self {
        self.samples.resize(target, T::zero());
        self
    }

    /// Adds `Normal(0, sigma)` to every sample and clamps to `[-1, 1]`.
    pub fn add_gaussian_noise<R: Rng + ?Sized>(&self, sigma: T, rng: &mut R) -> Result<Self> {
        if !(sigma >= T::zero()) {
            return Err(invalid("sigma", "must be non-negative"));
        }
        if sigma == T::zero() {
            return Ok(self.clone());
        }
        let samples = self
            .samples
            .iter()
            .map(|&s| clamp(s + sigma * T::standard_normal(rng), -T::one(), T::one()))
            .collect();
        Ok(Self {
            samples,
            ..self.clone()
        })
    }
}

/// A labelled clip together with the file it came from.
#[derive(Debug, Clone)]
pub struct LabelledClip<T> {
    pub path: PathBuf,
    pub label: u8,
    pub speaker: String,
    pub clip: AudioClip<T>,
}

/// Loads every `{digit}_{speaker}_{index}.wav` in `dir`, sorted by file name.
/// Files not following the naming convention are skipped.
pub fn load_fsdd_dir<T: Scalar>(dir: &Path) -> Result<Vec<LabelledClip<T>>> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::Dataset(dir.to_path_buf()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .filter(|p| parse_fsdd_name(p).is_some())
        .collect();
    if paths.is_empty() {
        return Err(Error::Dataset(dir.to_path_buf()));
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let clip = load_wav(&path)?.pad_or_truncate(CLIP_SAMPLES);
            let (label, speaker) = parse_fsdd_name(&path).unwrap();
            Ok(LabelledClip {
                path,
                label,
                speaker,
                clip,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplitStrategy {
    /// Seeded shuffle, then the first `train_fraction` goes to training.
    Random { train_fraction: f64 },
    /// All clips of the named speakers form the test set.
    SpeakerHeldOut { test_speakers: Vec<String> },
}

impl Default for SplitStrategy {
    fn default() -> Self {
        SplitStrategy::Random { train_fraction: 0.9 }
    }
}

/// Returns `(train, test)` index lists.
pub fn split_indices<T>(
    clips: &[LabelledClip<T>],
    strategy: &SplitStrategy,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    match strategy {
        SplitStrategy::Random { train_fraction } => {
            if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                return Err(invalid("train_fraction", "must lie in (0, 1)"));
            }
            let mut idx: Vec<usize> = (0..clips.len()).collect();
            idx.shuffle(&mut rng_from_seed(seed));
            let n_train = ((clips.len() as f64) * train_fraction).round() as usize;
            let test = idx.split_off(n_train.min(idx.len()));
            Ok((idx, test))
        }
        SplitStrategy::SpeakerHeldOut { test_speakers } => {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..clips.len()).partition(|&i| test_speakers.contains(&clips[i].speaker));
            Ok((train, test))
        }
    }
}
