use crate::error::{Error, Result};
use crate::nn::tensor::matmul_bt;
use crate::nn::Tensor;

/// Floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters spaced evenly on the HTK mel scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels × n_bins`.
    pub weights: Tensor,
    pub fmin: f64,
    pub fmax: f64,
    /// Edge frequencies in Hz, `n_mels + 2` of them; filter `m` spans
    /// `edges[m]..edges[m + 2]` and peaks at `edges[m + 1]`.
    pub edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if n_mels == 0 || n_fft < 2 {
            return Err(Error::InvalidInput("filterbank needs n_mels > 0 and n_fft ≥ 2".into()));
        }
        if !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) {
            return Err(Error::InvalidInput(format!(
                "band {fmin}..{fmax} Hz invalid for Nyquist {nyquist} Hz"
            )));
        }
        let n_bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut w = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let v = if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                };
                w[m * n_bins + k] = v;
            }
            if w[m * n_bins..(m + 1) * n_bins].iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "mel filter {m} covers no FFT bin; increase n_fft or reduce n_mels"
                )));
            }
        }
        Ok(Self {
            weights: Tensor::matrix(n_mels, n_bins, w)?,
            fmin,
            fmax,
            edges,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.cols()
    }

    pub fn centers(&self) -> &[f64] {
        &self.edges[1..self.edges.len() - 1]
    }
}

/// Log-Mel energies, one row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMelFeatures {
    pub values: Tensor,
}

impl LogMelFeatures {
    pub fn frame_count(&self) -> usize {
        self.values.rows()
    }
}

/// `ln(max(P · fbᵀ, 1e-10))`.
pub fn apply_log_mel(power: &Tensor, fb: &MelFilterbank) -> Result<LogMelFeatures> {
    if power.cols() != fb.n_bins() {
        return Err(Error::DimensionMismatch {
            expected: fb.n_bins(),
            found: power.cols(),
        });
    }
    let (t, k, m) = (power.rows(), power.cols(), fb.n_mels());
    let mut e = matmul_bt(power.data(), fb.weights.data(), t, k, m);
    for v in &mut e {
        *v = v.max(LOG_FLOOR).ln();
    }
    let values = Tensor::matrix(t, m, e)?;
    if !values.is_finite() {
        return Err(Error::NonFinite("log-Mel output".into()));
    }
    Ok(LogMelFeatures { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for f in [0.0, 125.0, 1000.0, 7500.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.985_7).abs() < 1e-3);
    }

    #[test]
    fn default_bank_shape_and_rows() {
        let fb = MelFilterbank::new(64, 2048, 16000, 125.0, 7500.0).unwrap();
        assert_eq!((fb.n_mels(), fb.n_bins()), (64, 1025));
        assert!((fb.edges[0] - 125.0).abs() < 1e-9 && (fb.edges[65] - 7500.0).abs() < 1e-9);
        for m in 0..64 {
            let row = fb.weights.row_slice(m);
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.iter().sum::<f64>() > 0.0);
            // unimodal: non-decreasing up to the peak, non-increasing after
            let peak = fb.weights.argmax_row(m);
            assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(fb.centers().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn floor_and_log_law() {
        let fb = MelFilterbank::new(8, 64, 8000, 100.0, 3500.0).unwrap();
        let zero = Tensor::zeros(&[3, 33]);
        let lm = apply_log_mel(&zero, &fb).unwrap();
        assert!(lm.values.data().iter().all(|&v| v == LOG_FLOOR.ln()));
        let p = Tensor::matrix(1, 33, (0..33).map(|i| 1.0 + i as f64).collect()).unwrap();
        let a = apply_log_mel(&p, &fb).unwrap();
        let b = apply_log_mel(&p.map(|v| 2.0 * v), &fb).unwrap();
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            assert!((y - x - 2f64.ln()).abs() < 1e-12);
        }
        assert!(matches!(
            apply_log_mel(&Tensor::zeros(&[1, 32]), &fb),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
