//! PCM WAV ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::AudioClip;

pub const FSDD_SAMPLE_RATE: u32 = 8000;

/// Parses `{digit}_{speaker}_{index}.wav` into `(digit, speaker)`.
pub fn parse_fsdd_name(path: &Path) -> Option<(u8, String)> {
    let stem = path.file_stem()?.to_str()?;
    let mut parts = stem.splitn(3, '_');
    let digit: u8 = parts.next()?.parse().ok()?;
    let speaker = parts.next()?;
    let index = parts.next()?;
    if digit > 9 || speaker.is_empty() || index.parse::<u32>().is_err() {
        return None;
    }
    Some((digit, speaker.to_string()))
}

/// Loads a mono 8 kHz 8- or 16-bit PCM file, scaling samples to `[-1, 1]`.
pub fn load_wav<T: Scalar>(path: &Path) -> Result<AudioClip<T>> {
    let format_err = |field: &'static str, detail: String| Error::Format {
        path: path.to_path_buf(),
        field,
        detail,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => format_err("header", other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err("channels", format!("= {}, expected mono", spec.channels)));
    }
    if spec.sample_rate != FSDD_SAMPLE_RATE {
        return Err(format_err(
            "sample_rate",
            format!("= {} Hz, expected {FSDD_SAMPLE_RATE} Hz", spec.sample_rate),
        ));
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(format_err("sample_format", "is float, expected integer PCM".into()));
    }
    let samples: Vec<T> = match spec.bits_per_sample {
        8 => reader
            .samples::<i8>()
            .map(|s| s.map(|v| T::lit(v as f64 / 128.0)))
            .collect::<std::result::Result<_, _>>(),
        16 => reader
            .samples::<i16>()
            .map(|s| s.map(|v| T::lit(v as f64 / 32768.0)))
            .collect::<std::result::Result<_, _>>(),
        b => return Err(format_err("bits_per_sample", format!("= {b}, expected 8 or 16"))),
    }
    .map_err(|e| format_err("data", e.to_string()))?;
    let (label, speaker) = match parse_fsdd_name(path) {
        Some((d, s)) => (Some(d), Some(s)),
        None => (None, None),
    };
    Ok(AudioClip {
        samples,
        sample_rate: spec.sample_rate,
        label,
        speaker,
    })
}

/// Writes a mono 16-bit PCM file (used for fixtures and synthetic corpora).
pub fn write_wav_i16<T: Scalar>(path: &Path, samples: &[T], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Internal(other.to_string()),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in samples {
        let v = (s.to_f64_lossy().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(to_err)?;
    }
    w.finalize().map_err(to_err)
}
