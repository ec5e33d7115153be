use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::Frames;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Smallest power of two ≥ `window_len`.
pub fn fft_size(window_len: usize) -> usize {
    window_len.max(1).next_power_of_two()
}

/// `|FFT(frame)|²` for bins `0..=n_fft/2`, each frame zero-padded to
/// [`fft_size`].
pub fn power_spectrum(frames: &Frames) -> Result<Tensor> {
    let t = frames.data.rows();
    if t == 0 || frames.data.is_empty() {
        return Err(Error::InvalidInput("no frames".into()));
    }
    let w = frames.data.cols();
    let n_fft = fft_size(w);
    let n_bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(t * n_bins);
    for r in 0..t {
        for (dst, &s) in buf.iter_mut().zip(frames.data.row_slice(r)) {
            *dst = Complex::new(s, 0.0);
        }
        buf[w..].fill(Complex::new(0.0, 0.0));
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf[..n_bins].iter().map(|c| c.norm_sqr()));
    }
    Tensor::matrix(t, n_bins, out)
}
