//! WAV ingestion for user-supplied noise recordings.

use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{AncError, Result};

/// Decoded single-channel audio, samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl WavAudio {
    /// Fails when the file rate differs from the scenario rate. Recordings
    /// are never resampled.
    pub fn expect_rate(self, expected: u32) -> Result<Self> {
        if self.sample_rate != expected {
            return Err(AncError::SampleRateMismatch {
                file: self.sample_rate,
                expected,
            });
        }
        Ok(self)
    }
}

/// Loads a mono WAV file (16-bit PCM or 32-bit float).
pub fn load_wav_mono(path: impl AsRef<Path>) -> Result<WavAudio> {
    load_wav_channel(path, None)
}

/// Loads one channel of a WAV file. Multi-channel files require an explicit
/// `channel`.
pub fn load_wav_channel(path: impl AsRef<Path>, channel: Option<usize>) -> Result<WavAudio> {
    let path = path.as_ref();
    let audio_err = |reason: String| AncError::Audio {
        path: path.to_path_buf(),
        reason,
    };
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => audio_err(format!("cannot open: {io}")),
        other => audio_err(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let channel = match (channels, channel) {
        (1, None) => 0,
        (_, Some(c)) if c < channels => c,
        (_, Some(c)) => {
            return Err(audio_err(format!(
                "channel {c} requested but file has {channels} channels"
            )))
        }
        (_, None) => {
            return Err(audio_err(format!(
                "file has {channels} channels; select one explicitly"
            )))
        }
    };

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(audio_err(format!(
                "unsupported encoding {fmt:?} {bits}-bit; expected 16-bit PCM or 32-bit float"
            )))
        }
    }
    .map_err(|e| audio_err(e.to_string()))?;

    let samples = interleaved
        .into_iter()
        .skip(channel)
        .step_by(channels)
        .collect();
    Ok(WavAudio {
        samples,
        sample_rate: spec.sample_rate,
    })
}
