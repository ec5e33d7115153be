//! Small generated datasets for tests, examples and smoke runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{extract_logmel, write_wav_i16, LogMelConfig, WaveBuffer};
use crate::error::Result;
use crate::nn::Tensor;

/// Pure tones, one per frequency.
pub fn tones(freqs: &[f64], seconds: f64, sample_rate: u32) -> Result<Vec<WaveBuffer>> {
    freqs.iter().map(|&f| WaveBuffer::sine(f, 0.5, seconds, sample_rate)).collect()
}

/// Log-mel features of `waves` clipped/padded to `seconds`.
pub fn logmel_frames(waves: &[WaveBuffer], seconds: f64) -> Result<Vec<Tensor>> {
    let cfg = LogMelConfig {
        clip_seconds: seconds,
        ..LogMelConfig::default()
    };
    waves
        .iter()
        .map(|w| {
            let f = extract_logmel(w, &cfg)?;
            Ok(f.values)
        })
        .collect()
}

/// Subtracts the mean and divides by the standard deviation of all values.
pub fn standardize(frames: &mut [Tensor]) {
    let n: usize = frames.iter().map(Tensor::len).sum();
    if n == 0 {
        return;
    }
    let mean = frames.iter().flat_map(|t| t.data()).sum::<f64>() / n as f64;
    let var = frames.iter().flat_map(|t| t.data()).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt().max(1e-12);
    for t in frames {
        for v in t.data_mut() {
            *v = (*v - mean) / sd;
        }
    }
}

pub const TOY_SUBJECTS: &[&str] = &["dog", "bird", "engine", "crowd", "bell"];
pub const TOY_VERBS: &[&str] = &["barks", "sings", "rumbles", "cheers"];

/// `n` captions `"the <subject> <verb> loudly"` cycling through all
/// subject/verb combinations in a seeded order, so each caption is fixed by
/// its subject and verb alone.
pub fn subject_verb_captions(n: usize, seed: u64) -> Vec<String> {
    let mut combos: Vec<(usize, usize)> = (0..TOY_SUBJECTS.len())
        .flat_map(|s| (0..TOY_VERBS.len()).map(move |v| (s, v)))
        .collect();
    combos.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..n)
        .map(|i| {
            let (s, v) = combos[i % combos.len()];
            format!("the {} {} loudly", TOY_SUBJECTS[s], TOY_VERBS[v])
        })
        .collect()
}

/// Sound classes of [`write_tone_dataset`]: tone frequency and two
/// captions each.
pub const TONE_CLASSES: &[(f64, [&str; 2])] = &[
    (220.0, ["a dog barks loudly", "the dog barks"]),
    (660.0, ["a bird sings softly", "the bird sings"]),
    (1500.0, ["an engine rumbles", "the engine rumbles loudly"]),
    (4000.0, ["a bell rings", "the bell rings loudly"]),
];

/// Writes `n` one-second 16 kHz tone clips (`clip_000.wav`, ...) cycling
/// through [`TONE_CLASSES`] with a small seeded detune, plus a `generic`
/// caption table `captions.csv`. Returns the table's path.
pub fn write_tone_dataset(dir: &Path, n: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("clip_id,caption\n");
    for i in 0..n {
        let (freq, caps) = TONE_CLASSES[i % TONE_CLASSES.len()];
        let id = format!("clip_{i:03}");
        let wave = WaveBuffer::sine(freq * rng.gen_range(0.98..1.02), 0.5, 1.0, 16_000)?;
        write_wav_i16(&dir.join(format!("{id}.wav")), &wave)?;
        for c in caps {
            let _ = writeln!(csv, "{id},{c}");
        }
    }
    let path = dir.join("captions.csv");
    std::fs::write(&path, csv)?;
    Ok(path)
}
