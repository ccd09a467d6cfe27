mod common;

use moodnet::model::{Inputs, Modality, ModelConfig, Network, RunMode, TextGrid};
use moodnet::optim::{AdamConfig, AdamState};
use moodnet::{Init, Tensor};

fn tiny(seed: u64) -> ModelConfig {
    ModelConfig {
        depth: 3,
        modalities: vec![Modality::Audio, Modality::Lyrics],
        text_grid: TextGrid { lines: 4, words: 4 },
        audio_input: [8, 12],
        dropout: 0.2,
        seed,
        channel_divisor: 32,
        head_divisor: 16,
    }
}

fn inputs(seed: u64) -> (Tensor, Tensor) {
    (
        Tensor::create(&[8, 12, 1], Init::Uniform { limit: 1.0, seed }).unwrap().map(|v| v + 1.0),
        Tensor::create(&[4, 4, 100], Init::Gaussian { std: 0.5, seed: seed + 1 }).unwrap(),
    )
}

#[test]
fn init_is_near_uniform_over_100_seeds() {
    for seed in 0..100 {
        let net = Network::new(&tiny(seed)).unwrap();
        let params = net.init_params().unwrap();
        let (a, t) = inputs(1000 + seed);
        let p = net
            .forward(&params, Inputs { audio: Some(&a), lyrics: Some(&t) }, RunMode::Eval)
            .unwrap();
        let max = p.probs.max();
        assert!((max - 0.2).abs() <= 0.1, "seed {seed}: max prob {max}");
    }
}

#[test]
fn single_adam_step_decreases_sample_loss() {
    for lr in [1e-3, 1e-4] {
        for seed in 0..5 {
            let net = Network::new(&tiny(seed)).unwrap();
            let mut params = net.init_params().unwrap();
            let (a, t) = inputs(50 + seed);
            let inp = Inputs { audio: Some(&a), lyrics: Some(&t) };
            let label = (seed % 5) as usize;
            let mode = RunMode::Train { seed: 9 };
            let (before, grads) = net.loss_and_grad(&params, inp, label, 9).unwrap();
            let mut adam = AdamState::new(&params, AdamConfig { learning_rate: lr, ..AdamConfig::default() });
            adam.step(&mut params, &grads).unwrap();
            let after = net.loss(&params, inp, label, mode).unwrap();
            assert!(after < before, "lr {lr} seed {seed}: {before} -> {after}");
        }
    }
}

#[test]
fn all_padding_lyrics_are_deterministic() {
    let mut cfg = tiny(4);
    cfg.modalities = vec![Modality::Lyrics];
    let net = Network::new(&cfg).unwrap();
    let params = net.init_params().unwrap();
    let zero = Tensor::zeros(&[4, 4, 100]).unwrap();
    let inp = Inputs { audio: None, lyrics: Some(&zero) };
    let a = net.forward(&params, inp, RunMode::Eval).unwrap();
    let b = net.forward(&params, inp, RunMode::Eval).unwrap();
    assert_eq!(a.probs, b.probs);
    assert!(a.probs.is_finite());
}

#[test]
fn wrong_input_shape_is_rejected() {
    let net = Network::new(&tiny(1)).unwrap();
    let params = net.init_params().unwrap();
    let (a, _) = inputs(1);
    let bad = Tensor::zeros(&[5, 4, 100]).unwrap();
    assert!(net
        .forward(&params, Inputs { audio: Some(&a), lyrics: Some(&bad) }, RunMode::Eval)
        .is_err());
}

#[test]
fn train_mode_dropout_depends_on_seed_only() {
    let net = Network::new(&tiny(2)).unwrap();
    let params = net.init_params().unwrap();
    let (a, t) = inputs(3);
    let inp = Inputs { audio: Some(&a), lyrics: Some(&t) };
    let p1 = net.forward(&params, inp, RunMode::Train { seed: 5 }).unwrap();
    let p2 = net.forward(&params, inp, RunMode::Train { seed: 5 }).unwrap();
    let p3 = net.forward(&params, inp, RunMode::Train { seed: 6 }).unwrap();
    assert_eq!(p1.probs, p2.probs);
    assert_ne!(p1.probs, p3.probs);
}

#[test]
fn every_depth_and_modality_set_builds() {
    for depth in 3..=5 {
        for mods in [vec![Modality::Audio], vec![Modality::Lyrics], vec![Modality::Audio, Modality::Lyrics]] {
            let mut cfg = ModelConfig::new(depth, TextGrid { lines: 20, words: 10 }, 0);
            cfg.modalities = mods.clone();
            let net = Network::new(&cfg).unwrap();
            assert_eq!(net.head().input_shape, vec![2048 * mods.len()]);
            for m in &mods {
                assert_eq!(net.tower(*m).unwrap().output_shape(), &[2048]);
            }
        }
    }
}
