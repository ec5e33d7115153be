use aucap::captioner::*;
use aucap::nn::gradcheck::{check_gradients, DEFAULT_DELTA};
use aucap::nn::{AdamConfig, Graph, Mode, Tensor};
use aucap::synthetic;
use aucap::text::{clean_caption, TokenizedCaption, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TONE_CAPTIONS: [&str; 4] = [
    "a low hum drones steadily",
    "bright whistle over quiet room",
    "shrill beeping alarm repeats",
    "water trickles into metal sink",
];

struct Toy {
    vocab: Vocabulary,
    set: CaptionSet,
    captions: Vec<TokenizedCaption>,
}

fn tone_toy() -> Toy {
    let waves = synthetic::tones(&[220.0, 660.0, 1500.0, 4000.0], 1.0, 16000).unwrap();
    let mut frames = synthetic::logmel_frames(&waves, 1.0).unwrap();
    synthetic::standardize(&mut frames);
    let captions: Vec<TokenizedCaption> = TONE_CAPTIONS.iter().map(|c| clean_caption(c).unwrap()).collect();
    let vocab = Vocabulary::build(&captions);
    let set = CaptionSet {
        clips: frames,
        captions: captions.iter().enumerate().map(|(i, c)| (i, vocab.encode(c))).collect(),
    };
    Toy { vocab, set, captions }
}

fn small_config(seed: u64) -> CaptionerConfig {
    CaptionerConfig {
        variant: Variant::Logmel,
        use_sve: false,
        audio_hidden: [16, 16],
        text_hidden: 32,
        embed_dim: 32,
        decoder_hidden: 32,
        dropout: 0.0,
        seed,
        ..CaptionerConfig::default()
    }
}

fn micro_vocab() -> Vocabulary {
    // 4 specials + 6 words = 10
    Vocabulary::build(&[clean_caption("aa bb cc dd ee ff").unwrap()])
}

fn micro_config(seed: u64) -> CaptionerConfig {
    CaptionerConfig {
        audio_hidden: [4, 8],
        text_hidden: 16,
        embed_dim: 8,
        decoder_hidden: 16,
        dropout: 0.0,
        seed,
        ..CaptionerConfig::default()
    }
}

fn random_clip(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Tensor {
    Tensor::matrix(t, d, (0..t * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn micro_model_gradients_match_finite_differences() {
    let vocab = micro_vocab();
    assert_eq!(vocab.len(), 10);
    let dims = ModelDims {
        input_dim: 5,
        sve_dim: 0,
        vocab_size: 10,
    };
    let mut model = Captioner::new(micro_config(3), dims, &vocab, None, None).unwrap();
    // nonzero biases keep every unit away from degenerate symmetric points
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ids: Vec<_> = model.store().ids().collect();
    for id in ids {
        let p = model.store().get(id);
        let is_bias = [".b", ".bz", ".br", ".bh", ".beta"].iter().any(|s| p.name.ends_with(s));
        if is_bias {
            let v = Tensor::vector((0..p.value.len()).map(|_| rng.gen_range(-0.3..0.3)).collect());
            model.store_mut().set_value(id, v).unwrap();
        }
    }
    let clips = [random_clip(&mut rng, 3, 5), random_clip(&mut rng, 3, 5)];
    let clip_refs: Vec<&Tensor> = clips.iter().collect();
    // clip 0 serves three examples and clip 1 one, exercising the
    // per-example statistics path
    let example_clip = [0, 1, 0, 0];
    let prefixes: [&[usize]; 4] = [&[1], &[1, 4, 5], &[1, 6], &[1, 4]];
    let targets = [4, 6, 7, 2];
    let m = model.clone();
    let report = check_gradients(
        model.store_mut(),
        |store| {
            let mut g = Graph::new(Mode::Train, 9);
            let view = BatchView {
                clips: &clip_refs,
                example_clip: &example_clip,
                prefixes: &prefixes,
            };
            let l = m.loss_with(&mut g, store, view, &targets)?;
            Ok((g, l))
        },
        DEFAULT_DELTA,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
    assert!(report.checked > 1000);
}

#[test]
fn zeroed_sve_matches_audio_only_columns() {
    let vocab = micro_vocab();
    let k = 3;
    let with = Captioner::new(
        micro_config(5),
        ModelDims {
            input_dim: 5 + k,
            sve_dim: k,
            vocab_size: 10,
        },
        &vocab,
        None,
        None,
    )
    .unwrap();
    let mut without = Captioner::new(
        micro_config(6),
        ModelDims {
            input_dim: 5,
            sve_dim: 0,
            vocab_size: 10,
        },
        &vocab,
        None,
        None,
    )
    .unwrap();
    let src = with.named_values();
    let ids: Vec<_> = without.store().ids().collect();
    for id in ids {
        let p = without.store().get(id);
        let v = &src[&p.name];
        let v = if v.shape() == p.value.shape() {
            v.clone()
        } else {
            // recurrent block first, then the input columns; SVE columns are last
            let cols = p.value.cols();
            let data = (0..v.rows()).flat_map(|r| v.row_slice(r)[..cols].to_vec()).collect();
            Tensor::matrix(v.rows(), cols, data).unwrap()
        };
        without.store_mut().set_value(id, v).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let frames = random_clip(&mut rng, 4, 5);
    let padded = {
        let data = (0..4).flat_map(|r| {
            let mut row = frames.row_slice(r).to_vec();
            row.extend(std::iter::repeat_n(0.0, k));
            row
        });
        Tensor::matrix(4, 5 + k, data.collect()).unwrap()
    };
    for prefix in [&[1usize][..], &[1, 4, 9]] {
        let a = with.encode(&padded, prefix).unwrap();
        let b = without.encode(&frames, prefix).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
    let da = greedy_decode(&with, &[&padded], 8).unwrap();
    let db = greedy_decode(&without, &[&frames], 8).unwrap();
    assert_eq!(da, db);
}

fn micro_model(seed: u64) -> (Captioner, Vocabulary) {
    let vocab = micro_vocab();
    let dims = ModelDims {
        input_dim: 5,
        sve_dim: 0,
        vocab_size: 10,
    };
    (Captioner::new(micro_config(seed), dims, &vocab, None, None).unwrap(), vocab)
}

#[test]
fn decoder_rows_are_distributions_and_uniform_loss_is_ln_v() {
    let (mut model, _) = micro_model(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let clip = random_clip(&mut rng, 2, 5);
    let enc = model.audio_encodings(&[&clip, &clip]).unwrap();
    let probs = model.decode_step(&enc, &[&[1], &[1, 5, 6]]).unwrap();
    for r in 0..2 {
        assert!((probs.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(probs.argmax_row(r) < 10);
    }
    assert_eq!(model.encode(&clip, &[1]).unwrap().len(), 2 * 8 + 16);

    // zero output layer → uniform predictions → loss ln V
    for name in ["dec.out.w", "dec.out.b"] {
        let id = model.store().find(name).unwrap();
        let z = model.store().value(id).map(|_| 0.0);
        model.store_mut().set_value(id, z).unwrap();
    }
    let set = CaptionSet {
        clips: vec![clip],
        captions: vec![(0, vec![1, 4, 5, 2]), (0, vec![1, 9, 2])],
    };
    let loss = evaluate_loss(&model, &set, 64).unwrap();
    assert!((loss - (10f64).ln()).abs() < 1e-12, "{loss}");
}

#[test]
fn always_eos_decoder_stops_immediately() {
    let (mut model, _) = micro_model(13);
    let w = model.store().find("dec.out.w").unwrap();
    let b = model.store().find("dec.out.b").unwrap();
    let zw = model.store().value(w).map(|_| 0.0);
    model.store_mut().set_value(w, zw).unwrap();
    let mut bias = vec![0.0; 10];
    bias[Vocabulary::EOS_ID] = 5.0;
    model.store_mut().set_value(b, Tensor::vector(bias)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let clip = random_clip(&mut rng, 3, 5);
    let out = greedy_decode(&model, &[&clip], 22).unwrap();
    assert_eq!(out, vec![vec![Vocabulary::SOS_ID, Vocabulary::EOS_ID]]);

    // a decoder that never emits <eos> is cut at max_len, ties go to the
    // lowest index
    model.store_mut().set_value(b, Tensor::vector(vec![0.0; 10])).unwrap();
    let out = greedy_decode(&model, &[&clip], 7).unwrap();
    assert_eq!(out[0].len(), 7);
    assert!(out[0][1..].iter().all(|&i| i == 0));
}

#[test]
fn left_padding_does_not_change_the_text_encoding() {
    let (model, _) = micro_model(15);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let clip = random_clip(&mut rng, 2, 5);
    let enc = model.audio_encodings(&[&clip, &clip]).unwrap();
    let short: &[usize] = &[1, 7];
    let first = Tensor::matrix(1, 16, enc.row_slice(0).to_vec()).unwrap();
    let alone = model.decode_step(&first, &[short]).unwrap();
    let batched = model.decode_step(&enc, &[short, &[1, 4, 5, 6, 8]]).unwrap();
    for (a, b) in alone.row_slice(0).iter().zip(batched.row_slice(0)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn decoding_is_deterministic_and_checkpoints_round_trip() {
    let toy = tone_toy();
    let cfg = CaptionerConfig {
        epochs: 3,
        dropout: 0.5,
        ..small_config(21)
    };
    let dims = ModelDims {
        input_dim: 64,
        sve_dim: 0,
        vocab_size: toy.vocab.len(),
    };
    let train = || {
        let m = Captioner::new(cfg.clone(), dims, &toy.vocab, None, None).unwrap();
        train_captioner(m, &toy.set, Some(&toy.set)).unwrap()
    };
    let (a, ra) = train();
    let (b, rb) = train();
    assert_eq!(ra, rb);
    assert_eq!(ra.val_loss.len(), 3);
    assert_eq!(a.to_checkpoint().to_bytes().unwrap(), b.to_checkpoint().to_bytes().unwrap());
    let clips: Vec<&Tensor> = toy.set.clips.iter().collect();
    let out = greedy_decode(&a, &clips, 22).unwrap();
    assert_eq!(out, greedy_decode(&a, &clips, 22).unwrap());
    assert!(out.iter().all(|c| c.len() <= 22 && c[0] == Vocabulary::SOS_ID));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.ckpt");
    a.save(&path).unwrap();
    let back = Captioner::load(&path, &toy.vocab, None).unwrap();
    assert_eq!(back.to_checkpoint().to_bytes().unwrap(), a.to_checkpoint().to_bytes().unwrap());
    for (name, t) in a.named_values() {
        let u = &back.named_values()[&name];
        assert!(t.data().iter().zip(u.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(greedy_decode(&back, &clips, 22).unwrap(), out);

    // another vocabulary
    let other = Vocabulary::build(&[clean_caption("entirely different words").unwrap()]);
    let err = Captioner::load(&path, &other, None).unwrap_err();
    assert!(matches!(err, aucap::Error::HashMismatch { kind: "vocabulary", .. }), "{err}");

    // corrupt manifest
    let mut bytes = std::fs::read(&path).unwrap();
    let cut = bytes.len() / 3;
    bytes.truncate(cut);
    std::fs::write(&path, &bytes).unwrap();
    assert!(Captioner::load(&path, &toy.vocab, None).is_err());
    let mut garbage = b"not a checkpoint\n".to_vec();
    garbage.extend_from_slice(&[0u8; 32]);
    std::fs::write(&path, garbage).unwrap();
    assert!(Captioner::load(&path, &toy.vocab, None).is_err());
}

#[test]
fn training_rejects_empty_data_and_foreign_ids() {
    let (model, _) = micro_model(30);
    let empty = CaptionSet::default();
    assert!(train_captioner(model.clone(), &empty, None).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let set = CaptionSet {
        clips: vec![random_clip(&mut rng, 2, 5)],
        captions: vec![(0, vec![1, 42, 2])],
    };
    let err = train_captioner(model, &set, None).unwrap_err();
    assert!(err.to_string().contains("vocabulary"), "{err}");
}

#[test]
fn overfits_four_tones() {
    let toy = tone_toy();
    let cfg = CaptionerConfig {
        epochs: 500,
        target_loss: Some(0.005),
        adam: AdamConfig { lr: 0.003, ..AdamConfig::default() },
        ..small_config(7)
    };
    let dims = ModelDims {
        input_dim: 64,
        sve_dim: 0,
        vocab_size: toy.vocab.len(),
    };
    let model = Captioner::new(cfg, dims, &toy.vocab, None, None).unwrap();
    let t = std::time::Instant::now();
    let (model, report) = train_captioner(model, &toy.set, None).unwrap();
    let last = report.train_loss[report.best_epoch];
    eprintln!("epochs {} best loss {last} in {:?}", report.epochs_run, t.elapsed());
    assert!(last < 0.01, "loss {last}");
    let clips: Vec<&Tensor> = toy.set.clips.iter().collect();
    let out = greedy_decode(&model, &clips, 22).unwrap();
    for (ids, cap) in out.iter().zip(&toy.captions) {
        assert_eq!(toy.vocab.decode(ids).unwrap(), cap.tokens());
    }
}
