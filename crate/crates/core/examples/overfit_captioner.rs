//! Teaches the captioner one sentence per tone and decodes them back.
//!
//!     cargo run --release --example overfit_captioner

use aucap::captioner::{greedy_decode, train_captioner, CaptionSet, Captioner, CaptionerConfig, ModelDims, Variant};
use aucap::nn::{AdamConfig, Tensor};
use aucap::synthetic;
use aucap::text::{clean_caption, Vocabulary};

fn main() -> aucap::Result<()> {
    let lines = [
        "a low hum drones steadily",
        "bright whistle over quiet room",
        "shrill beeping alarm repeats",
        "water trickles into metal sink",
    ];
    let waves = synthetic::tones(&[220.0, 660.0, 1500.0, 4000.0], 1.0, 16_000)?;
    let mut frames = synthetic::logmel_frames(&waves, 1.0)?;
    synthetic::standardize(&mut frames);
    let caps = lines.iter().map(|c| clean_caption(c)).collect::<aucap::Result<Vec<_>>>()?;
    let vocab = Vocabulary::build(&caps);
    let set = CaptionSet {
        clips: frames,
        captions: caps.iter().enumerate().map(|(i, c)| (i, vocab.encode(c))).collect(),
    };

    let cfg = CaptionerConfig {
        variant: Variant::Logmel,
        use_sve: false,
        audio_hidden: [16, 16],
        text_hidden: 32,
        embed_dim: 32,
        decoder_hidden: 32,
        dropout: 0.0,
        epochs: 500,
        target_loss: Some(0.005),
        adam: AdamConfig { lr: 0.003, ..AdamConfig::default() },
        seed: 7,
        ..CaptionerConfig::default()
    };
    let dims = ModelDims {
        input_dim: 64,
        sve_dim: 0,
        vocab_size: vocab.len(),
    };
    let model = Captioner::new(cfg, dims, &vocab, None, None)?;
    let (model, report) = train_captioner(model, &set, None)?;
    println!("{} epochs, final loss {:.4}", report.epochs_run, report.train_loss[report.best_epoch]);

    let clips: Vec<&Tensor> = set.clips.iter().collect();
    for (ids, want) in greedy_decode(&model, &clips, 22)?.iter().zip(lines) {
        println!("{:<32} (target: {want})", vocab.decode_words(ids)?.join(" "));
    }
    Ok(())
}
