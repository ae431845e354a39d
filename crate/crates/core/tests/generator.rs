use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttscore::corpus::{PhonemeInventory, PhonemeSequence, TokenSequence};
use ttscore::generator::{
    evaluate_loss, loss_gradients, train, GeneratorConfig, GeneratorModel, Precision, TrainConfig, TrainingPair,
};
use ttscore::synth::copy_pairs;

fn tiny_config(conditional: bool, embed_dim: usize) -> GeneratorConfig {
    let c = GeneratorConfig {
        enc_layers: 1,
        dec_layers: 1,
        model_dim: 4,
        embed_dim,
        heads: 2,
        ffn_dim: 8,
        dropout: 0.0,
        max_len: 6,
        src_vocab: 7,
        tgt_vocab: 7,
        conditional: true,
    };
    if conditional {
        c
    } else {
        c.unconditional()
    }
}

fn tiny_pairs(conditional: bool, seed: u64) -> (PhonemeInventory, Vec<TrainingPair>) {
    let (inv, pairs) = copy_pairs(4, 3, 1, 4, seed);
    let pairs = pairs
        .into_iter()
        .map(|(p, t)| TrainingPair::new(conditional.then_some(p), t))
        .collect();
    (inv, pairs)
}

/// Central differences on every parameter entry; returns the worst
/// relative error `|a - n| / max(|a|, |n|, 1e-8)`. The floor covers
/// gradients that are exactly zero in exact arithmetic (attention key
/// biases), where both sides are rounding noise.
fn worst_gradient_error(model: &mut GeneratorModel, pairs: &[TrainingPair]) -> (f64, String) {
    let (_, grads) = loss_gradients(model, pairs).unwrap();
    let names = model.param_names().to_vec();
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    for (name, grad) in names.iter().zip(&grads) {
        for idx in 0..grad.len() {
            let orig = model.param(name).unwrap().as_slice().unwrap()[idx];
            model.param_mut(name).unwrap().as_slice_mut().unwrap()[idx] = orig + h;
            let up = evaluate_loss(model, pairs).unwrap();
            model.param_mut(name).unwrap().as_slice_mut().unwrap()[idx] = orig - h;
            let down = evaluate_loss(model, pairs).unwrap();
            model.param_mut(name).unwrap().as_slice_mut().unwrap()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.as_slice().unwrap()[idx];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            if err > worst.0 {
                worst = (err, format!("{name}[{idx}] analytic {analytic:e} numeric {numeric:e}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for (conditional, embed_dim) in [(true, 4), (false, 4), (true, 6)] {
        let (inv, pairs) = tiny_pairs(conditional, 3);
        let mut model =
            GeneratorModel::build(tiny_config(conditional, embed_dim), conditional.then_some(inv), 5).unwrap();
        assert!(model.num_parameters() <= 1000);
        let (err, at) = worst_gradient_error(&mut model, &pairs);
        assert!(
            err < 1e-3,
            "conditional={conditional} embed={embed_dim}: {err:e} at {at}"
        );
    }
}

fn copy_setup() -> (PhonemeInventory, Vec<TrainingPair>, GeneratorConfig) {
    let (inv, pairs) = copy_pairs(200, 10, 3, 8, 1);
    let pairs = pairs.into_iter().map(|(p, t)| TrainingPair::new(Some(p), t)).collect();
    let config = GeneratorConfig {
        enc_layers: 1,
        dec_layers: 1,
        model_dim: 32,
        embed_dim: 32,
        heads: 4,
        ffn_dim: 64,
        dropout: 0.0,
        max_len: 16,
        src_vocab: 14,
        tgt_vocab: 14,
        conditional: true,
    };
    (inv, pairs, config)
}

fn copy_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        epochs,
        seed: 2,
        precision: Precision::Double,
        ..Default::default()
    }
}

#[test]
fn copy_task_is_learned() {
    let (inv, pairs, config) = copy_setup();
    let mut model = GeneratorModel::build(config, Some(inv), 0).unwrap();
    let before = evaluate_loss(&model, &pairs).unwrap();
    let report = train(&mut model, &pairs, &copy_train_config(25)).unwrap();
    let after = evaluate_loss(&model, &pairs).unwrap();
    assert_eq!(report.epoch_losses.len(), 25);
    assert!(report.epoch_losses.last().unwrap() <= report.epoch_losses.first().unwrap());
    assert_eq!(report.steps, 25 * 25);
    assert!(after < 0.1, "copy loss {after} (started at {before})");
}

#[test]
fn zero_epochs_leave_parameters_unchanged() {
    let (inv, pairs, config) = copy_setup();
    let mut model = GeneratorModel::build(config, Some(inv), 0).unwrap();
    let before: Vec<_> = model.params().map(|(_, p)| p.clone()).collect();
    let mut cfg = copy_train_config(0);
    cfg.precision = Precision::Double;
    let report = train(&mut model, &pairs, &cfg).unwrap();
    assert!(report.epoch_losses.is_empty());
    let after: Vec<_> = model.params().map(|(_, p)| p.clone()).collect();
    assert_eq!(before, after);
}

#[test]
fn training_ignores_input_order() {
    let (inv, pairs, config) = copy_setup();
    let pairs = &pairs[..40];
    let mut reversed = pairs.to_vec();
    reversed.reverse();
    let cfg = copy_train_config(2);
    let mut a = GeneratorModel::build(config.clone(), Some(inv.clone()), 4).unwrap();
    let mut b = GeneratorModel::build(config, Some(inv), 4).unwrap();
    let ra = train(&mut a, pairs, &cfg).unwrap();
    let rb = train(&mut b, &reversed, &cfg).unwrap();
    assert_eq!(ra, rb);
    assert!(a.params().zip(b.params()).all(|((_, x), (_, y))| x == y));
}

#[test]
fn single_precision_keeps_parameters_in_f32() {
    let (inv, pairs, config) = copy_setup();
    let mut model = GeneratorModel::build(config, Some(inv), 0).unwrap();
    let cfg = TrainConfig {
        precision: Precision::Single,
        ..copy_train_config(1)
    };
    train(&mut model, &pairs[..20], &cfg).unwrap();
    assert_eq!(model.precision(), Precision::Single);
    for (_, p) in model.params() {
        assert!(p.iter().all(|&v| (v as f32) as f64 == v));
    }
}

#[test]
fn next_token_distributions_are_normalized() {
    let (inv, pairs, config) = copy_setup();
    let model = GeneratorModel::build(config, Some(inv), 9).unwrap();
    for pair in &pairs[..10] {
        let d = model
            .next_token_log_probs(pair.phonemes.as_ref(), &pair.tokens)
            .unwrap();
        assert_eq!(d.nrows(), pair.tokens.len() + 1);
        for row in d.rows() {
            assert!(row.iter().all(|&v| v <= 0.0));
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (inv, pairs, config) = copy_setup();
    for precision in [Precision::Single, Precision::Double] {
        let mut model = GeneratorModel::build(config.clone(), Some(inv.clone()), 1).unwrap();
        let cfg = TrainConfig {
            precision,
            ..copy_train_config(1)
        };
        train(&mut model, &pairs[..16], &cfg).unwrap();
        let path = dir.path().join("model.ttsg");
        model.save(&path).unwrap();
        let loaded = GeneratorModel::load(&path).unwrap();
        assert_eq!(loaded.precision(), precision);
        assert_eq!(loaded.trained_steps, model.trained_steps);
        assert_eq!(loaded.config(), model.config());
        for p in &pairs[..8] {
            let a = model.token_logprobs(p.phonemes.as_ref(), &p.tokens).unwrap();
            let b = loaded.token_logprobs(p.phonemes.as_ref(), &p.tokens).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (inv, _, config) = copy_setup();
    let model = GeneratorModel::build(config, Some(inv), 1).unwrap();
    let bytes = model.to_checkpoint_bytes();
    let path = dir.path().join("m.ttsg");
    for bad in [
        &bytes[..bytes.len() - 3],
        &bytes[..10],
        b"XXXX\x01\x00\x00\x00".as_slice(),
    ] {
        std::fs::write(&path, bad).unwrap();
        assert!(GeneratorModel::load(&path).is_err());
    }
    let mut extra = bytes.clone();
    extra.push(0);
    std::fs::write(&path, &extra).unwrap();
    assert!(GeneratorModel::load(&path).is_err());
    assert!(GeneratorModel::load(&dir.path().join("missing.ttsg")).is_err());
}

#[test]
fn vocabulary_mismatch_is_rejected() {
    let (inv, _, config) = copy_setup();
    let model = GeneratorModel::build(config, Some(inv), 1).unwrap();
    let ph = PhonemeSequence::parse("t1 t2").unwrap();
    let wrong = TokenSequence::new(vec![1, 2], 11).unwrap();
    assert!(model.token_logprobs(Some(&ph), &wrong).is_err());
    let long = TokenSequence::new(vec![1; 16], 10).unwrap();
    assert!(model.token_logprobs(Some(&ph), &long).is_err());
    assert!(model
        .token_logprobs(None, &TokenSequence::new(vec![1], 10).unwrap())
        .is_err());
}

#[test]
fn unknown_phonemes_map_to_unk() {
    let (inv, _, config) = copy_setup();
    let model = GeneratorModel::build(config, Some(inv), 1).unwrap();
    let tokens = TokenSequence::new(vec![1, 2], 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ph = PhonemeSequence::parse(&format!("t1 zz{}", rng.random::<u16>())).unwrap();
    let lp = model.token_logprobs(Some(&ph), &tokens).unwrap();
    assert_eq!(lp.len(), 3);
}
