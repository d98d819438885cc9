//! Cross-modal contrastive alignment between queried face features and
//! speaker style codes.

use facevc_nn::ops::l2_normalize_rows;
use facevc_nn::{Graph, NnError, Result, ValueId};

use crate::labels::SpeakerLabelBatch;

/// -(1/N) sum_i sum_j y_ij log softmax_j(sim(i, .) / tau) where sim is the
/// cosine similarity between face row i and speech row j and y marks
/// same-speaker pairs.
pub fn contrastive_loss(
    g: &mut Graph,
    face: ValueId,
    speech: ValueId,
    labels: &SpeakerLabelBatch,
    tau: f32,
) -> Result<ValueId> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(NnError::Validation(format!(
            "temperature must be positive and finite, got {tau}"
        )));
    }
    let (n, d) = g.shape(face);
    let (ns, ds) = g.shape(speech);
    if (n, d) != (ns, ds) {
        return Err(NnError::DimensionMismatch {
            op: "contrastive_loss",
            lhs: vec![n, d],
            rhs: vec![ns, ds],
        });
    }
    if labels.len() != n {
        return Err(NnError::Validation(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }

    let face_n = l2_normalize_rows(g, face)?;
    let speech_n = l2_normalize_rows(g, speech)?;
    let speech_t = g.transpose(speech_n);
    let sims = g.matmul(face_n, speech_t)?;
    let logits = g.scale(sims, 1.0 / tau as f64);
    let lsm = g.log_softmax_rows(logits)?;
    let mask = labels.pair_indicator();
    let mask_v = g.input(&mask);
    let picked = g.mul(lsm, mask_v)?;
    let total = g.sum_all(picked);
    Ok(g.scale(total, -1.0 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use facevc_nn::Tensor;

    fn run(face: Tensor, speech: Tensor, ids: Vec<usize>, classes: usize, tau: f32) -> f64 {
        let labels = SpeakerLabelBatch::new(ids, classes).unwrap();
        let mut g = Graph::new();
        let f = g.input(&face);
        let s = g.input(&speech);
        let loss = contrastive_loss(&mut g, f, s, &labels, tau).unwrap();
        g.scalar_value(loss).unwrap()
    }

    #[test]
    fn single_sample_is_zero() {
        let face = Tensor::new(vec![1, 3], vec![0.2, -0.4, 1.0]).unwrap();
        let speech = Tensor::new(vec![1, 3], vec![1.0, 0.5, 0.0]).unwrap();
        let v = run(face, speech, vec![0], 1, 0.07);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn identical_embeddings_give_ln_n() {
        // All sims equal 1; one positive per row.
        let n = 5;
        let face = Tensor::new(vec![n, 2], vec![1.0, 0.0].repeat(n)).unwrap();
        let speech = face.clone();
        let v = run(face, speech, (0..n).collect(), n, 1.0);
        assert!((v - (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_closed_form() {
        // sim(i,i) = 1, sim(i,j) = 0, tau = 1 -> log(1 + e^-1).
        let face = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let speech = face.clone();
        let v = run(face, speech, vec![0, 1], 2, 1.0);
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn invariant_under_joint_permutation() {
        let face =
            Tensor::new(vec![3, 2], vec![0.9, 0.1, -0.3, 0.8, 0.5, -0.5]).unwrap();
        let speech =
            Tensor::new(vec![3, 2], vec![0.7, 0.3, -0.1, 0.9, 0.4, -0.6]).unwrap();
        let base = run(face.clone(), speech.clone(), vec![0, 1, 0], 2, 0.5);

        // Permutation (2, 0, 1) applied to rows and labels together.
        let perm = [2usize, 0, 1];
        let pick = |t: &Tensor| {
            let mut rows = Vec::new();
            for &p in &perm {
                rows.push(t.data()[p * 2..(p + 1) * 2].to_vec());
            }
            Tensor::from_rows(&rows).unwrap()
        };
        let permuted = run(pick(&face), pick(&speech), vec![0, 0, 1], 2, 0.5);
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn raising_a_positive_similarity_lowers_the_loss() {
        // Rotate face row 0 in a plane orthogonal to every other speech row,
        // so only sim(0,0) moves while all other similarities stay fixed.
        let speech =
            Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let face_at = |c: f32| {
            Tensor::new(
                vec![2, 3],
                vec![c, 0.0, (1.0 - c * c).sqrt(), 0.0, 1.0, 0.0],
            )
            .unwrap()
        };
        let before = run(face_at(0.55), speech.clone(), vec![0, 1], 2, 0.5);
        let after = run(face_at(0.75), speech, vec![0, 1], 2, 0.5);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn bad_temperature_rejected() {
        let face = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let labels = SpeakerLabelBatch::new(vec![0], 1).unwrap();
        let mut g = Graph::new();
        let f = g.input(&face);
        assert!(contrastive_loss(&mut g, f, f, &labels, 0.0).is_err());
        assert!(contrastive_loss(&mut g, f, f, &labels, -1.0).is_err());
    }
}
