//! Log-Mel features of a chirp-like two-tone clip, printed as a coarse
//! text spectrogram.
//!
//!     cargo run --example logmel_features

use aucap::audio::{extract_logmel, LogMelConfig, WaveBuffer};

fn main() -> aucap::Result<()> {
    let rate = 16_000;
    let low = WaveBuffer::sine(300.0, 0.4, 1.0, rate)?;
    let high = WaveBuffer::sine(3000.0, 0.4, 1.0, rate)?;
    let clip = WaveBuffer::new([low.samples, high.samples].concat(), rate)?;

    let cfg = LogMelConfig {
        clip_seconds: 2.0,
        ..LogMelConfig::default()
    };
    let lm = extract_logmel(&clip, &cfg)?;
    println!("{} frames x {} mel bands", lm.frame_count(), lm.values.cols());

    // brightest band per frame, drawn on a 64-column ruler
    for t in (0..lm.frame_count()).step_by(4) {
        let band = lm.values.argmax_row(t);
        println!("{t:>3} {}#", " ".repeat(band));
    }
    Ok(())
}
