use aucap::audio::*;
use aucap::nn::Tensor;
use proptest::prelude::*;

fn frames_of(rows: Vec<Vec<f64>>) -> Frames {
    let w = rows[0].len();
    Frames {
        data: Tensor::matrix(rows.len(), w, rows.concat()).unwrap(),
        window_len: w,
        hop: w,
        sample_rate: 16000,
    }
}

fn dft_power(x: &[f64], n_fft: usize) -> Vec<f64> {
    (0..=n_fft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * n) as f64 / n_fft as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn frame_count_formula(len in 1536usize..40_000) {
        let b = WaveBuffer::new(vec![0.1; len], 16000).unwrap();
        let f = frame_signal(&b, 96.0, 0.5).unwrap();
        prop_assert_eq!(f.count(), (len - 1536) / 768 + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn fft_matches_direct_dft(x in prop::collection::vec(-1.0f64..1.0, 1..=64)) {
        let n_fft = fft_size(x.len());
        let p = power_spectrum(&frames_of(vec![x.clone()])).unwrap();
        for (a, b) in p.row_slice(0).iter().zip(dft_power(&x, n_fft)) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn doubling_power_adds_ln2(vals in prop::collection::vec(0.0f64..10.0, 33)) {
        let fb = MelFilterbank::new(8, 64, 8000, 100.0, 3500.0).unwrap();
        let p = Tensor::matrix(1, 33, vals).unwrap();
        let a = apply_log_mel(&p, &fb).unwrap();
        let b = apply_log_mel(&p.map(|v| 2.0 * v), &fb).unwrap();
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            if *x > LOG_FLOOR.ln() {
                prop_assert!((y - x - 2f64.ln()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn filter_supports_are_ordered_and_overlap() {
    let fb = MelFilterbank::new(64, 2048, 16000, 125.0, 7500.0).unwrap();
    let support = |m: usize| {
        let row = fb.weights.row_slice(m);
        let first = row.iter().position(|&v| v > 0.0).unwrap();
        let last = row.iter().rposition(|&v| v > 0.0).unwrap();
        (first, last)
    };
    for m in 0..63 {
        let (a0, a1) = support(m);
        let (b0, b1) = support(m + 1);
        assert!(a0 <= b0 && a1 <= b1);
        assert!(b0 <= a1, "filters {m} and {} do not overlap", m + 1);
    }
}

#[test]
fn sine_lands_in_nearest_mel_band() {
    let cfg = LogMelConfig {
        clip_seconds: 1.0,
        ..LogMelConfig::default()
    };
    let b = WaveBuffer::sine(1000.0, 0.5, 1.0, 16000).unwrap();
    let lm = extract_logmel(&b, &cfg).unwrap();
    let fb = MelFilterbank::new(64, 2048, 16000, 125.0, 7500.0).unwrap();
    let nearest = fb
        .centers()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
        .unwrap()
        .0;
    assert_eq!(lm.frame_count(), 19);
    for t in 0..lm.frame_count() {
        assert_eq!(lm.values.argmax_row(t), nearest);
    }
}

#[test]
fn thirty_second_clip_has_624_frames() {
    let b = WaveBuffer::sine(440.0, 0.1, 12.0, 22050).unwrap();
    let lm = extract_logmel(&b, &LogMelConfig::default()).unwrap();
    assert_eq!((lm.frame_count(), lm.values.cols()), (624, 64));
    assert!(lm.values.is_finite());
}

#[test]
fn trailing_silence_past_target_is_invisible() {
    let cfg = LogMelConfig {
        clip_seconds: 2.0,
        ..LogMelConfig::default()
    };
    let mut s = WaveBuffer::sine(700.0, 0.3, 2.5, 16000).unwrap().samples;
    let a = extract_logmel(&WaveBuffer::new(s.clone(), 16000).unwrap(), &cfg).unwrap();
    s.extend(std::iter::repeat_n(0.0, 16000));
    let b = extract_logmel(&WaveBuffer::new(s, 16000).unwrap(), &cfg).unwrap();
    assert_eq!(a, b);

    let short = WaveBuffer::sine(700.0, 0.3, 1.2, 16000).unwrap();
    let mut padded = short.samples.clone();
    padded.extend(std::iter::repeat_n(0.0, 4000));
    let c = extract_logmel(&short, &cfg).unwrap();
    let d = extract_logmel(&WaveBuffer::new(padded, 16000).unwrap(), &cfg).unwrap();
    assert_eq!(c, d);
}
