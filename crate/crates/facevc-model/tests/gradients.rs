//! Finite-difference checks for every differentiable composite in the model.

use facevc_model::{FaceVoiceModel, ModelConfig, PitchPoint};
use facevc_nn::ops::mse;
use facevc_nn::{grad_check, grad_check_filtered, ParameterRegistry, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-3;
const GATE: f64 = 1e-3;

fn toy_cfg() -> ModelConfig {
    ModelConfig {
        d_face: 8,
        d_aud: 8,
        d_spk: 6,
        d_con: 4,
        k_codes: 6,
        prompt_count: 3,
        d_mel: 10,
        memory_slots: 4,
        d_pitch: 3,
        pitch_bins: 5,
        d_k: 4,
        ffn_hidden: 6,
        content_hidden: 5,
        decoder_hidden: 8,
        cpc_horizon: 2,
        ..Default::default()
    }
}

fn toy_model(seed: u64) -> (ParameterRegistry, FaceVoiceModel, ModelConfig) {
    let cfg = toy_cfg();
    let mut reg = ParameterRegistry::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = FaceVoiceModel::new(&mut reg, &mut rng, &cfg, 3).unwrap();
    (reg, model, cfg)
}

#[test]
fn face_query_encoder_gradients() {
    let (mut reg, model, cfg) = toy_model(7);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let frames = Tensor::uniform(vec![4, cfg.d_face], -1.0, 1.0, &mut rng).unwrap();
    let target = Tensor::uniform(vec![1, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let fv = g.input(&frames);
        let tv = g.input(&target);
        let (pooled, _) = model.face_query(g, reg, fv, true)?;
        mse(g, pooled, tv)
    })
    .unwrap();
    assert!(err < GATE, "face encoder max relative error {err}");
}

#[test]
fn speaker_encoder_gradients() {
    let (mut reg, model, cfg) = toy_model(8);
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mel = Tensor::uniform(vec![5, cfg.d_mel], -1.0, 1.0, &mut rng).unwrap();
    let target = Tensor::uniform(vec![1, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let mv = g.input(&mel);
        let tv = g.input(&target);
        let (code, _) = model.speaker_encoder.forward_mel(g, reg, mv, true)?;
        mse(g, code, tv)
    })
    .unwrap();
    assert!(err < GATE, "speaker encoder max relative error {err}");
}

#[test]
fn vector_quantizer_loss_gradients() {
    // The commitment term stop-grads the codeword and the codebook term
    // stop-grads the encoder side, so each parameter group is swept through
    // the term where the tape carries its true derivative. The
    // straight-through surrogate itself is checked by tape inspection below.
    let (mut reg, model, cfg) = toy_model(9);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mel = Tensor::uniform(vec![6, cfg.d_mel], -1.0, 1.0, &mut rng).unwrap();

    let enc_err = grad_check_filtered(
        &mut reg,
        EPS,
        |name| name.starts_with("content.l"),
        |g, reg| {
            let mv = g.input(&mel);
            let z = model.content_encoder.encode(g, reg, mv, true)?;
            let vq = model.content_encoder.quantize(g, reg, z, true)?;
            Ok(vq.commitment)
        },
    )
    .unwrap();
    assert!(enc_err < GATE, "commitment-side max relative error {enc_err}");

    let cb_err = grad_check_filtered(
        &mut reg,
        EPS,
        |name| name == "content.codebook",
        |g, reg| {
            let mv = g.input(&mel);
            let z = model.content_encoder.encode(g, reg, mv, true)?;
            let vq = model.content_encoder.quantize(g, reg, z, true)?;
            Ok(vq.codebook_loss)
        },
    )
    .unwrap();
    assert!(cb_err < GATE, "codebook-side max relative error {cb_err}");
}

#[test]
fn straight_through_path_carries_downstream_gradient() {
    let (reg, model, cfg) = toy_model(10);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mel = Tensor::uniform(vec![6, cfg.d_mel], -1.0, 1.0, &mut rng).unwrap();
    let mut g = facevc_nn::Graph::new();
    let mv = g.input(&mel);
    let z = model.content_encoder.encode(&mut g, &reg, mv, true).unwrap();
    let vq = model.content_encoder.quantize(&mut g, &reg, z, true).unwrap();
    let sq = g.mul(vq.quantized, vq.quantized).unwrap();
    let loss = g.sum_all(sq);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(z).unwrap(), g.grad(vq.quantized).unwrap());
}

#[test]
fn predictive_content_loss_gradients() {
    let (mut reg, model, cfg) = toy_model(11);
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mel = Tensor::uniform(vec![7, cfg.d_mel], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let mv = g.input(&mel);
        let z = model.content_encoder.encode(g, reg, mv, true)?;
        model.content_encoder.predictive_loss(g, reg, z, true)
    })
    .unwrap();
    assert!(err < GATE, "predictive loss max relative error {err}");
}

#[test]
fn decoder_gradients() {
    let (mut reg, model, cfg) = toy_model(12);
    let mut rng = ChaCha8Rng::seed_from_u64(120);
    let t = 5;
    let spk = Tensor::uniform(vec![1, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let con = Tensor::uniform(vec![t, cfg.d_con], -1.0, 1.0, &mut rng).unwrap();
    let track: Vec<PitchPoint> = (0..t)
        .map(|i| PitchPoint {
            voiced: i % 3 != 0,
            value: -1.0 + 0.4 * i as f32,
        })
        .collect();
    let target = Tensor::uniform(vec![t, cfg.d_mel], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let sv = g.input(&spk);
        let cv = g.input(&con);
        let pv = model.pitch.embed(g, reg, &track, true)?;
        let tv = g.input(&target);
        let mel = model.decoder.decode(g, reg, sv, cv, pv, true)?;
        mse(g, mel, tv)
    })
    .unwrap();
    assert!(err < GATE, "decoder max relative error {err}");
}

#[test]
fn memory_map_gradients() {
    let (mut reg, model, cfg) = toy_model(13);
    let mut rng = ChaCha8Rng::seed_from_u64(130);
    let query = Tensor::uniform(vec![2, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let target = Tensor::uniform(vec![2, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let qv = g.input(&query);
        let tv = g.input(&target);
        let mapped = model.memory.map(g, reg, qv, true)?;
        mse(g, mapped, tv)
    })
    .unwrap();
    assert!(err < GATE, "memory map max relative error {err}");
}

#[test]
fn full_face_to_speaker_path_gradients() {
    let (mut reg, model, cfg) = toy_model(14);
    let mut rng = ChaCha8Rng::seed_from_u64(140);
    let frames = Tensor::uniform(vec![3, cfg.d_face], -1.0, 1.0, &mut rng).unwrap();
    let target = Tensor::uniform(vec![1, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
    let err = grad_check(&mut reg, EPS, |g, reg| {
        let fv = g.input(&frames);
        let tv = g.input(&target);
        let code = model.speaker_code_from_face(g, reg, fv, true)?;
        mse(g, code, tv)
    })
    .unwrap();
    assert!(err < GATE, "face-to-speaker path max relative error {err}");
}
