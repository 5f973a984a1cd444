//! Mel-frequency cepstral coefficients.
//!
//! Pipeline: pre-emphasis, framing with a periodic Hann window, power
//! spectrum, triangular HTK-mel filterbank spanning 0 Hz to Nyquist,
//! natural-log energies floored at `1e-10`, orthonormal DCT-II.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub n_mel: usize,
    pub n_coeff: usize,
    pub pre_emphasis: f64,
    pub sample_rate: u32,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_len: 256,
            hop: 128,
            n_mel: 26,
            n_coeff: 13,
            pre_emphasis: 0.97,
            sample_rate: 8000,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.frame_len.is_power_of_two() || self.frame_len < 2 {
            return Err(invalid("frame_len", "must be a power of two"));
        }
        if self.hop == 0 {
            return Err(invalid("hop", "must be positive"));
        }
        if self.n_coeff == 0 || self.n_coeff > self.n_mel {
            return Err(invalid("n_coeff", "must lie in 1..=n_mel"));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(invalid("pre_emphasis", "must lie in [0, 1)"));
        }
        if self.sample_rate == 0 {
            return Err(invalid("sample_rate", "must be positive"));
        }
        Ok(())
    }

    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.frame_len {
            0
        } else {
            (samples - self.frame_len) / self.hop + 1
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Reusable extractor holding the FFT plan, window, filterbank and DCT basis.
pub struct Mfcc<T: FftNum> {
    config: MfccConfig,
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    /// `n_mel x (frame_len / 2 + 1)`
    filters: Vec<Vec<T>>,
    /// `n_coeff x n_mel`
    dct: Vec<Vec<T>>,
}

impl<T: Scalar + FftNum> Mfcc<T> {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        let n = config.frame_len;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let window = (0..n)
            .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
            .collect();
        let filters = mel_filterbank(config.n_mel, n, config.sample_rate);
        let dct = dct2_ortho(config.n_coeff, config.n_mel);
        Ok(Self {
            config,
            fft,
            window,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    /// `frames x n_coeff` coefficients of `samples`.
    pub fn compute(&self, samples: &[T]) -> Result<Vec<Vec<T>>> {
        let cfg = &self.config;
        if samples.len() < cfg.frame_len {
            return Err(Error::EmptyInput(format!(
                "{} samples is shorter than one {}-sample frame",
                samples.len(),
                cfg.frame_len
            )));
        }
        let alpha = T::lit(cfg.pre_emphasis);
        let emphasized: Vec<T> = std::iter::once(samples[0])
            .chain(samples.windows(2).map(|w| w[1] - alpha * w[0]))
            .collect();

        let bins = cfg.frame_len / 2 + 1;
        let floor = T::lit(LOG_FLOOR);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); cfg.frame_len];
        let mut power = vec![T::zero(); bins];
        let mut log_mel = vec![T::zero(); cfg.n_mel];
        let frames = cfg.frame_count(samples.len());
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            let start = f * cfg.hop;
            for ((b, &x), &w) in buf
                .iter_mut()
                .zip(&emphasized[start..start + cfg.frame_len])
                .zip(&self.window)
            {
                *b = Complex::new(x * w, T::zero());
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (e, filt) in log_mel.iter_mut().zip(&self.filters) {
                let energy: T = filt.iter().zip(&power).map(|(&h, &p)| h * p).sum();
                *e = energy.max(floor).ln();
            }
            out.push(
                self.dct
                    .iter()
                    .map(|basis| basis.iter().zip(&log_mel).map(|(&b, &e)| b * e).sum())
                    .collect(),
            );
        }
        Ok(out)
    }
}

/// Triangular filters on HTK-mel-spaced centers, evaluated at each bin's
/// exact frequency.
fn mel_filterbank<T: Scalar>(n_mel: usize, frame_len: usize, sample_rate: u32) -> Vec<Vec<T>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mel + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mel + 1) as f64))
        .collect();
    let bins = frame_len / 2 + 1;
    (0..n_mel)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / frame_len as f64;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    T::lit(w)
                })
                .collect()
        })
        .collect()
}

fn dct2_ortho<T: Scalar>(n_out: usize, n_in: usize) -> Vec<Vec<T>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| {
                    T::lit(scale * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                })
                .collect()
        })
        .collect()
}

/// Per-coefficient min-max scaling fitted on training frames only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Normalizer<T> {
    /// Fits over every frame of every training matrix.
    pub fn fit<'a, I>(matrices: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Vec<Vec<T>>>,
    {
        let mut min: Vec<T> = Vec::new();
        let mut max: Vec<T> = Vec::new();
        for frame in matrices.into_iter().flatten() {
            if min.is_empty() {
                min = frame.clone();
                max = frame.clone();
                continue;
            }
            if frame.len() != min.len() {
                return Err(crate::error::shape(min.len(), frame.len()));
            }
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(frame) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        if min.is_empty() {
            return Err(Error::EmptyInput("cannot fit a normalizer on no frames".into()));
        }
        Ok(Self { min, max })
    }

    pub fn apply_frame(&self, frame: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        frame
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    crate::scalar::clamp((x - lo) / (hi - lo), T::zero(), T::one())
                } else {
                    half
                }
            })
            .collect()
    }

    pub fn apply(&self, matrix: &[Vec<T>]) -> Vec<Vec<T>> {
        matrix.iter().map(|f| self.apply_frame(f)).collect()
    }
}
