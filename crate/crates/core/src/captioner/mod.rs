//! GRU encoder-decoder captioner: audio (+SVE) and text encoders fused by
//! concatenation, a GRU decoder, teacher-forced training and greedy
//! decoding.

mod config;
mod decode;
mod model;
mod train;

pub use config::{CaptionerConfig, Variant};
pub use decode::greedy_decode;
pub use model::{BatchView, Captioner, ModelDims};
pub use train::{evaluate_loss, expand_prefixes, train_captioner, CaptionSet, Example, TrainReport};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Pads with zero rows, or truncates, to exactly `rows` rows.
pub fn fit_rows(frames: &Tensor, rows: usize) -> Result<Tensor> {
    let d = frames.cols();
    let mut data = frames.data().to_vec();
    data.resize(rows * d, 0.0);
    Tensor::matrix(rows, d, data)
}

/// Appends the SVE vector (when given) to every frame. PANNs input must be
/// a single row.
pub fn build_encoder_input(variant: Variant, frames: &Tensor, sve: Option<&[f64]>) -> Result<Tensor> {
    if frames.cols() != variant.frame_dim() {
        return Err(Error::InvalidInput(format!(
            "{variant} features are {}-wide, got {}",
            variant.frame_dim(),
            frames.cols()
        )));
    }
    if frames.rows() == 0 {
        return Err(Error::InvalidInput("no feature frames".into()));
    }
    if variant == Variant::Panns && frames.rows() != 1 {
        return Err(Error::InvalidInput(format!(
            "panns input is one vector per clip, got {} rows",
            frames.rows()
        )));
    }
    let sve = sve.unwrap_or(&[]);
    let (t, d, k) = (frames.rows(), frames.cols(), sve.len());
    let mut out = Vec::with_capacity(t * (d + k));
    for r in 0..t {
        out.extend_from_slice(frames.row_slice(r));
        out.extend_from_slice(sve);
    }
    Tensor::matrix(t, d + k, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_input_shapes() {
        let p = build_encoder_input(Variant::Panns, &Tensor::zeros(&[1, 2048]), Some(&[0.5; 100])).unwrap();
        assert_eq!(p.shape(), [1, 2148]);
        let l = build_encoder_input(Variant::Logmel, &Tensor::full(&[624, 64], 1.0), Some(&[0.25; 100])).unwrap();
        assert_eq!(l.shape(), [624, 164]);
        assert_eq!(l.row_slice(623)[64], 0.25);
        let x = Tensor::full(&[3, 128], 0.1);
        assert_eq!(build_encoder_input(Variant::Vggish, &x, None).unwrap(), x);
        assert!(build_encoder_input(Variant::Logmel, &x, None).is_err());
        assert!(build_encoder_input(Variant::Panns, &Tensor::zeros(&[2, 2048]), None).is_err());
    }

    #[test]
    fn prefix_expansion() {
        let ex = expand_prefixes(&[(0, vec![1, 4, 5, 6, 7, 2])]);
        assert_eq!(ex.len(), 5);
        assert_eq!(ex[0].prefix, [1]);
        assert_eq!(ex[4], Example { clip: 0, prefix: vec![1, 4, 5, 6, 7], target: 2 });
    }

    #[test]
    fn fit_rows_pads_and_truncates() {
        let t = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(fit_rows(&t, 3).unwrap().data(), [1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        assert_eq!(fit_rows(&t, 1).unwrap().data(), [1.0, 2.0]);
    }
}
