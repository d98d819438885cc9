use facevc_nn::Graph;
use facevc_pipeline::checkpoint;
use facevc_pipeline::corpus::{load_corpus, speaker_split};
use facevc_pipeline::features::prepare_wav;
use facevc_pipeline::infer::generate_mel;
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
    let (train, eval) = speaker_split(corpus.speakers).unwrap();
    let source = corpus.utterances.iter().find(|u| u.speaker == train[0]).unwrap();
    let src = prepare_wav(&source.wav_path, &ckpt.cfg.stft).unwrap();

    let mut mels = Vec::new();
    let mut codes = Vec::new();
    for &spk in &eval {
        for utt in corpus.utterances.iter().filter(|u| u.speaker == spk).take(2) {
            let face = facevc_pipeline::idfv::read_tensor(&utt.face_path).unwrap();
            let mut g = Graph::new();
            let f = g.input(&face);
            let code = ckpt.model.speaker_code_from_face(&mut g, &ckpt.registry, f, false).unwrap();
            codes.push((spk, g.value_f32(code)));
            let mel = generate_mel(&ckpt, &face, &src.mel, &src.pitch).unwrap();
            mels.push((spk, mel));
        }
    }
    println!("eval mapped codes: same-spk cos {:.4}, cross-spk cos {:.4}",
        cos(&codes[0].1, &codes[1].1), cos(&codes[0].1, &codes[2].1));
    let mad = |a: &facevc_nn::Tensor, b: &facevc_nn::Tensor| -> f64 {
        a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum::<f64>() / a.numel() as f64
    };
    println!("gen mel MAD same-spk {:.4}, cross-spk {:.4}", mad(&mels[0].1, &mels[1].1), mad(&mels[0].1, &mels[2].1));

    let embed = |mel: &facevc_nn::Tensor| -> Vec<f32> {
        let mut g = Graph::new();
        let m = g.input(mel);
        let (c, _) = ckpt.model.speaker_encoder.forward_mel(&mut g, &ckpt.registry, m, false).unwrap();
        g.value_f32(c)
    };
    let e: Vec<Vec<f32>> = mels.iter().map(|(_, m)| embed(m)).collect();
    println!("gen embeddings: same-spk cos {:.6}, cross-spk cos {:.6}", cos(&e[0], &e[1]), cos(&e[0], &e[2]));
    // Real-mel embeddings of the same eval speakers for comparison
    let mut real = Vec::new();
    for &spk in &eval {
        let utt = corpus.utterances.iter().find(|u| u.speaker == spk).unwrap();
        let audio = prepare_wav(&utt.wav_path, &ckpt.cfg.stft).unwrap();
        real.push(embed(&audio.mel));
    }
    println!("real embeddings cross-spk cos {:.4}", cos(&real[0], &real[1]));
}
