use std::f64::consts::PI;

use crate::audio::WaveBuffer;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Linear-interpolation resampler. Output length is
/// `round(len × target / source)`; equal rates return the input unchanged.
pub fn resample(buf: &WaveBuffer, target_rate: u32) -> Result<WaveBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidInput("target rate must be positive".into()));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }
    let src = &buf.samples;
    let ratio = buf.sample_rate as f64 / target_rate as f64;
    let out_len = ((src.len() as f64) * target_rate as f64 / buf.sample_rate as f64).round() as usize;
    let out_len = out_len.max(1);
    let last = src.len() - 1;
    let out = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = (pos.floor() as usize).min(last);
            let frac = pos - idx as f64;
            let a = src[idx];
            let b = src[(idx + 1).min(last)];
            a + frac * (b - a)
        })
        .collect();
    WaveBuffer::new(out, target_rate)
}

/// Pads with trailing zeros, or truncates, to exactly
/// `round(target_seconds × rate)` samples.
pub fn zero_pad_or_truncate(buf: &WaveBuffer, target_seconds: f64) -> Result<WaveBuffer> {
    if !target_seconds.is_finite() || target_seconds <= 0.0 {
        return Err(Error::InvalidInput(format!("target length {target_seconds} s")));
    }
    let n = (target_seconds * buf.sample_rate as f64).round() as usize;
    if n == 0 {
        return Err(Error::InvalidInput("target length rounds to zero samples".into()));
    }
    let mut samples = buf.samples.clone();
    samples.resize(n, 0.0);
    WaveBuffer::new(samples, buf.sample_rate)
}

/// Symmetric Hamming window, `0.54 − 0.46 cos(2πn/(W−1))`.
pub fn hamming(w: usize) -> Vec<f64> {
    if w == 1 {
        return vec![1.0];
    }
    (0..w)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (w - 1) as f64).cos())
        .collect()
}

/// Windowed frames as a `T × W` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Frames {
    pub data: Tensor,
    pub window_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Frames {
    pub fn count(&self) -> usize {
        self.data.rows()
    }
}

/// `W = round(window_ms/1000 × rate)`, `H = round(W × (1 − overlap))`,
/// `T = floor((len − W) / H) + 1`.
pub fn frame_signal(buf: &WaveBuffer, window_ms: f64, overlap: f64) -> Result<Frames> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidInput(format!("overlap {overlap} outside [0, 1)")));
    }
    let w = (window_ms / 1000.0 * buf.sample_rate as f64).round() as usize;
    if w == 0 {
        return Err(Error::InvalidInput("window rounds to zero samples".into()));
    }
    let hop = ((w as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    if buf.len() < w {
        return Err(Error::InvalidInput(format!(
            "buffer of {} samples is shorter than one {w}-sample window",
            buf.len()
        )));
    }
    let t = (buf.len() - w) / hop + 1;
    let win = hamming(w);
    let mut data = Vec::with_capacity(t * w);
    for f in 0..t {
        let seg = &buf.samples[f * hop..f * hop + w];
        data.extend(seg.iter().zip(&win).map(|(s, h)| s * h));
    }
    Ok(Frames {
        data: Tensor::matrix(t, w, data)?,
        window_len: w,
        hop,
        sample_rate: buf.sample_rate,
    })
}
