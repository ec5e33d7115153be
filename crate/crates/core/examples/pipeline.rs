//! Full pipeline on a generated tone dataset: features, vocabulary, word
//! vectors, SVE corpus, SVE predictor, captioner, captions and scores.
//! The same stages are available as `aucap` subcommands.
//!
//!     cargo run --release --example pipeline [out_dir]

use std::path::PathBuf;

use aucap::captioner::Variant;
use aucap::config::RunConfig;
use aucap::pipeline;
use aucap::synthetic::write_tone_dataset;

fn main() -> aucap::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline-demo".into()));
    let captions = write_tone_dataset(&out.join("data"), 24, 0)?;
    let mut cfg = RunConfig {
        captions: Some(captions),
        variant: Variant::Logmel,
        clip_seconds: 1.0,
        val_fraction: 0.25,
        audio_hidden: [8, 8],
        text_hidden: 16,
        embed_dim: 16,
        decoder_hidden: 16,
        dropout: 0.1,
        batch: 16,
        lr: 0.01,
        epochs: 30,
        w2v_epochs: 5,
        mlp_hidden: vec![16],
        mlp_epochs: 50,
        out: out.join("run"),
        ..RunConfig::default()
    };
    cfg.set("max_len", "12")?;

    let _lock = pipeline::OutputLock::acquire(&cfg.out)?;
    let manifest = pipeline::load_manifest(&cfg)?;
    pipeline::extract_features(&cfg, &manifest)?;
    pipeline::train_w2v(&cfg, &manifest)?;
    pipeline::build_sve(&cfg, &manifest)?;
    pipeline::train_mlp(&cfg, &manifest)?;
    pipeline::train_captioner(&cfg, &manifest)?;
    for (id, caption) in pipeline::predict(&cfg, &manifest)? {
        println!("{id}  {caption}");
    }
    print!("{}", pipeline::evaluate(&cfg, None, None)?.to_table());
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
