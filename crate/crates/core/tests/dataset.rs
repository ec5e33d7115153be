use std::path::{Path, PathBuf};

use aucap::audio::{write_wav_i16, WaveBuffer};
use aucap::captioner::Variant;
use aucap::dataset::*;
use aucap::text::clean_caption;
use proptest::prelude::*;

const CLOTHO_HEADER: &str = "file_name,caption_1,caption_2,caption_3,caption_4,caption_5\n";

fn clotho_table(dir: &Path, clips: usize) -> PathBuf {
    let mut text = CLOTHO_HEADER.to_string();
    for c in 0..clips {
        let caps: Vec<String> = (0..5).map(|k| format!("clip {c} caption number {k} sounds")).collect();
        text.push_str(&format!("clip{c}.wav,{}\n", caps.join(",")));
    }
    let p = dir.join("captions.csv");
    std::fs::write(&p, text).unwrap();
    p
}

fn nested_loop_pairs(m: &DatasetManifest, split: Split) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for r in &m.records {
        if r.split != split {
            continue;
        }
        for c in &r.captions {
            out.push((r.clip_id.clone(), c.text()));
        }
    }
    out
}

#[test]
fn clotho_records_expand_five_times() {
    let dir = tempfile::tempdir().unwrap();
    let p = clotho_table(dir.path(), 2);
    let m = load_caption_csv(&p, CsvFormat::Clotho, &LoadOptions::default()).unwrap();
    let pairs = expand_pairs(&m, Split::Development);
    assert_eq!(pairs.len(), 10);
    let got: Vec<(String, String)> = pairs.iter().map(|(r, c)| (r.clip_id.clone(), c.text())).collect();
    assert_eq!(got, nested_loop_pairs(&m, Split::Development));
    assert!(expand_pairs(&m, Split::Evaluation).is_empty());
    // loading twice gives the same manifest
    assert_eq!(m, load_caption_csv(&p, CsvFormat::Clotho, &LoadOptions::default()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn expansion_matches_nested_loops(counts in prop::collection::vec((1usize..=5, 0usize..3), 0..12)) {
        let splits = [Split::Development, Split::Validation, Split::Evaluation];
        let records = counts
            .iter()
            .enumerate()
            .map(|(i, &(n, s))| ClipRecord {
                clip_id: format!("c{i}"),
                source: PathBuf::new(),
                captions: (0..n).map(|k| clean_caption(&format!("word{k} sound")).unwrap()).collect(),
                split: splits[s],
            })
            .collect();
        let m = DatasetManifest { format: CsvFormat::Generic, records };
        for split in splits {
            let got: Vec<(String, String)> = expand_pairs(&m, split).iter().map(|(r, c)| (r.clip_id.clone(), c.text())).collect();
            let expect = nested_loop_pairs(&m, split);
            let total: usize = m.split(split).map(|r| r.captions.len()).sum();
            prop_assert_eq!(got.len(), total);
            prop_assert_eq!(got, expect);
        }
    }
}

#[test]
fn feature_cache_is_idempotent_and_tracks_content() {
    let dir = tempfile::tempdir().unwrap();
    let media = dir.path().join("audio");
    std::fs::create_dir(&media).unwrap();
    for (i, f) in [440.0, 880.0].iter().enumerate() {
        write_wav_i16(&media.join(format!("clip{i}.wav")), &WaveBuffer::sine(*f, 0.5, 1.0, 16000).unwrap()).unwrap();
    }
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "clip_id,caption\nclip0,a tone\nclip1,higher tone\n").unwrap();
    let opts = LoadOptions {
        media_dir: Some(media.clone()),
        ..LoadOptions::default()
    };
    let m = load_caption_csv(&table, CsvFormat::Generic, &opts).unwrap();
    let cache = dir.path().join("cache");
    let spec = FeatureSpec {
        logmel: aucap::audio::LogMelConfig {
            clip_seconds: 1.0,
            ..Default::default()
        },
        ..FeatureSpec::new(Variant::Logmel)
    };
    let r1 = cache_features(&m, &spec, &cache).unwrap();
    assert_eq!(r1.computed.len(), 2);
    assert!(cache_path(&cache, Variant::Logmel, "clip0").exists());

    let r2 = cache_features(&m, &spec, &cache).unwrap();
    assert!(r2.computed.is_empty());
    assert_eq!(r2.reused.len(), 2);

    // cached equals fresh, bitwise
    for r in &m.records {
        let cached = load_cached(&cache, Variant::Logmel, &r.clip_id).unwrap();
        let fresh = compute_features(r, &spec).unwrap();
        assert_eq!(cached.shape(), fresh.shape());
        assert!(cached.data().iter().zip(fresh.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    // new content for clip1 only
    write_wav_i16(&media.join("clip1.wav"), &WaveBuffer::sine(1200.0, 0.5, 1.0, 16000).unwrap()).unwrap();
    let r3 = cache_features(&m, &spec, &cache).unwrap();
    assert_eq!(r3.computed, vec!["clip1".to_string()]);
    assert_eq!(r3.reused, vec!["clip0".to_string()]);

    // a vanished clip is reported, not fatal
    std::fs::remove_file(media.join("clip0.wav")).unwrap();
    let r4 = cache_features(&m, &spec, &cache).unwrap();
    assert_eq!(r4.failed.len(), 1);
    assert_eq!(r4.failed[0].0, "clip0");
    assert!(r4.failed[0].1.contains("not found"));
}
