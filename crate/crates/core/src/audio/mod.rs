//! Audio loading and log-Mel feature extraction, plus ingestion of
//! precomputed clip embeddings.

mod dsp;
mod embedding;
mod mel;
mod spectrum;
mod wav;

pub use dsp::{frame_signal, hamming, resample, zero_pad_or_truncate, Frames};
pub use embedding::{load_embedding_file, load_panns, load_vggish, ClipEmbedding, EmbeddingSource};
pub use mel::{apply_log_mel, hz_to_mel, mel_to_hz, LogMelFeatures, MelFilterbank, LOG_FLOOR};
pub use spectrum::{fft_size, power_spectrum};
pub use wav::{load_wav, write_wav_i16};

use crate::error::{Error, Result};

/// Mono samples in `[-1, 1]` at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio buffer is empty".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// A sine tone, mostly for fixtures and examples.
    pub fn sine(freq_hz: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> Result<Self> {
        let n = (seconds * sample_rate as f64).round() as usize;
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
        Self::new((0..n).map(|i| amplitude * (w * i as f64).sin()).collect(), sample_rate)
    }
}

/// Settings for the log-Mel front end.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub window_ms: f64,
    pub overlap: f64,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            clip_seconds: 30.0,
            window_ms: 96.0,
            overlap: 0.5,
            n_mels: 64,
            fmin: 125.0,
            fmax: 7500.0,
        }
    }
}

/// resample → pad/truncate → frame → power spectrum → log-Mel.
pub fn extract_logmel(buf: &WaveBuffer, cfg: &LogMelConfig) -> Result<LogMelFeatures> {
    let buf = resample(buf, cfg.sample_rate)?;
    let buf = zero_pad_or_truncate(&buf, cfg.clip_seconds)?;
    let frames = frame_signal(&buf, cfg.window_ms, cfg.overlap)?;
    let power = power_spectrum(&frames)?;
    let fb = MelFilterbank::new(cfg.n_mels, fft_size(frames.window_len), cfg.sample_rate, cfg.fmin, cfg.fmax)?;
    apply_log_mel(&power, &fb)
}
