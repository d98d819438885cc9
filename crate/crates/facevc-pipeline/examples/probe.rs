use facevc_nn::Graph;
use facevc_pipeline::checkpoint;
use facevc_pipeline::corpus::load_corpus;
use facevc_pipeline::features::prepare_wav;
use std::path::Path;

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    d / (na * nb)
}

fn main() {
    let ckpt = checkpoint::load(Path::new("/tmp/smoke/run_lr/checkpoint")).unwrap();
    let corpus = load_corpus(Path::new("/tmp/smoke/corpus")).unwrap();

    // Speaker codes of real train mels (speakers 0,1), 4 utts each.
    let mut codes: Vec<(usize, Vec<f32>)> = Vec::new();
    let mut queries: Vec<(usize, Vec<f32>)> = Vec::new();
    let mut mapped: Vec<(usize, Vec<f32>)> = Vec::new();
    for spk in 0..4 {
        for utt in corpus.utterances.iter().filter(|u| u.speaker == spk).take(4) {
            let audio = prepare_wav(&utt.wav_path, &ckpt.cfg.stft).unwrap();
            let face = facevc_pipeline::idfv::read_tensor(&utt.face_path).unwrap();
            let mut g = Graph::new();
            let m = g.input(&audio.mel);
            let (code, _) = ckpt.model.speaker_encoder.forward_mel(&mut g, &ckpt.registry, m, false).unwrap();
            codes.push((spk, g.value_f32(code)));
            let f = g.input(&face);
            let (_, qn) = ckpt.model.face_query(&mut g, &ckpt.registry, f, false).unwrap();
            queries.push((spk, g.value_f32(qn)));
            let mp = ckpt.model.memory.map(&mut g, &ckpt.registry, qn, false).unwrap();
            mapped.push((spk, g.value_f32(mp)));
        }
    }
    let stat = |name: &str, rows: &[(usize, Vec<f32>)]| {
        let (mut same, mut diff, mut ns, mut nd) = (0.0, 0.0, 0, 0);
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let c = cos(&rows[i].1, &rows[j].1);
                if rows[i].0 == rows[j].0 { same += c; ns += 1 } else { diff += c; nd += 1 }
            }
        }
        println!("{name}: within {:.4}, cross {:.4}", same / ns as f64, diff / nd as f64);
    };
    stat("spk codes  ", &codes);
    stat("face query ", &queries);
    stat("mapped code", &mapped);

    // Decoder sensitivity: decode same content with codes of spk0 vs spk1
    let u0 = &corpus.utterances[0];
    let audio = prepare_wav(&u0.wav_path, &ckpt.cfg.stft).unwrap();
    let code0 = facevc_nn::Tensor::new(vec![1, 32], codes[0].1.clone()).unwrap();
    let code1 = facevc_nn::Tensor::new(vec![1, 32], codes[4].1.clone()).unwrap();
    let mut mels = Vec::new();
    for code in [&code0, &code1] {
        let mut g = Graph::new();
        let m = g.input(&audio.mel);
        let z = ckpt.model.content_encoder.encode(&mut g, &ckpt.registry, m, false).unwrap();
        let vq = ckpt.model.content_encoder.quantize(&mut g, &ckpt.registry, z, false).unwrap();
        let p = ckpt.model.pitch.embed(&mut g, &ckpt.registry, &audio.pitch, false).unwrap();
        let c = g.input(code);
        let out = ckpt.model.decoder.decode(&mut g, &ckpt.registry, c, vq.quantized, p, false).unwrap();
        mels.push(g.value_f32(out));
    }
    let mad: f64 = mels[0].iter().zip(&mels[1]).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>() / mels[0].len() as f64;
    println!("decoder mel MAD between speaker codes: {mad:.5}");
    println!("spk0 code vs spk1 code cos: {:.4}", cos(&codes[0].1, &codes[4].1));
}
