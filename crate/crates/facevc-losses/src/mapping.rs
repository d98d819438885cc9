//! Face-to-voice mapping supervision: match the mapped code to the (frozen)
//! speaker code, and push different-speaker mapped codes at least a margin
//! apart.

use facevc_nn::ops::mse;
use facevc_nn::{Graph, NnError, Result, ValueId};

use crate::labels::SpeakerLabelBatch;

pub const INTER_SPEAKER_MARGIN: f64 = 1.0;

/// MSE(mapped, stop-grad(target)) plus the mean over different-speaker pairs
/// of max(0, margin - ||mapped_i - mapped_j||).
pub fn fv_mapping_loss(
    g: &mut Graph,
    mapped: ValueId,
    target: ValueId,
    labels: &SpeakerLabelBatch,
    margin: f64,
) -> Result<ValueId> {
    let (n, d) = g.shape(mapped);
    if g.shape(target) != (n, d) {
        let (tm, tn) = g.shape(target);
        return Err(NnError::DimensionMismatch {
            op: "fv_mapping_loss",
            lhs: vec![n, d],
            rhs: vec![tm, tn],
        });
    }
    if labels.len() != n {
        return Err(NnError::Validation(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }

    let target_const = g.detach(target);
    let match_term = mse(g, mapped, target_const)?;

    let mut hinges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if labels.same_speaker(i, j) {
                continue;
            }
            let a = g.slice_rows(mapped, i, 1)?;
            let b = g.slice_rows(mapped, j, 1)?;
            let diff = g.sub(a, b)?;
            let sq = g.mul(diff, diff)?;
            let sum = g.sum_all(sq);
            let dist = g.sqrt(sum)?;
            let gap = g.scale(dist, -1.0);
            let gap = g.add_scalar(gap, margin);
            hinges.push(g.relu(gap));
        }
    }
    let hinge_term = if hinges.is_empty() {
        g.scalar(0.0)
    } else {
        let stacked = g.concat_cols(&hinges)?;
        g.mean_all(stacked)
    };
    g.add(match_term, hinge_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use facevc_nn::Tensor;

    fn eval(mapped: Tensor, target: Tensor, ids: Vec<usize>, classes: usize) -> f64 {
        let labels = SpeakerLabelBatch::new(ids, classes).unwrap();
        let mut g = Graph::new();
        let m = g.input(&mapped);
        let t = g.input(&target);
        let loss = fv_mapping_loss(&mut g, m, t, &labels, INTER_SPEAKER_MARGIN).unwrap();
        g.scalar_value(loss).unwrap()
    }

    #[test]
    fn perfect_match_same_speaker_is_zero() {
        let m = Tensor::new(vec![2, 3], vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3]).unwrap();
        assert_eq!(eval(m.clone(), m, vec![0, 0], 1), 0.0);
    }

    #[test]
    fn far_apart_speakers_contribute_no_hinge() {
        // Distance 2 >= margin 1.
        let m = Tensor::new(vec![2, 2], vec![0.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(eval(m.clone(), m, vec![0, 1], 2), 0.0);
    }

    #[test]
    fn hand_arithmetic_hinge() {
        // Distance 0.4 with margin 1.0 leaves 0.6 per pair.
        let m = Tensor::new(vec![2, 2], vec![0.0, 0.0, 0.4, 0.0]).unwrap();
        let v = eval(m.clone(), m, vec![0, 1], 2);
        assert!((v - 0.6).abs() < 1e-6, "{v}");
    }

    #[test]
    fn same_speaker_pairs_skip_the_hinge() {
        let m = Tensor::new(vec![2, 2], vec![0.0, 0.0, 0.4, 0.0]).unwrap();
        assert_eq!(eval(m.clone(), m, vec![0, 0], 1), 0.0);
    }

    #[test]
    fn target_is_stop_gradded() {
        let labels = SpeakerLabelBatch::new(vec![0, 1], 2).unwrap();
        let mut g = Graph::new();
        let m = g.constant(2, 2, vec![0.0, 0.0, 3.0, 0.0]).unwrap();
        let t = g.constant(2, 2, vec![1.0, 0.0, 3.5, 0.0]).unwrap();
        let loss = fv_mapping_loss(&mut g, m, t, &labels, INTER_SPEAKER_MARGIN).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(m).is_some());
        assert!(g.grad(t).is_none());
    }
}
