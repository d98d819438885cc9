//! Frame-level face feature averaging.

use facevc_nn::{Graph, NnError, Result, Tensor, ValueId};

/// Element-wise mean over `frames` rows of `cols` values each.
pub fn mean_rows(frames: usize, cols: usize, data: &[f32]) -> Result<Vec<f32>> {
    if frames == 0 {
        return Err(NnError::Validation(
            "cannot average an empty set of face frames".into(),
        ));
    }
    if data.len() != frames * cols {
        return Err(NnError::Validation(format!(
            "expected {} values for {frames}x{cols} frames, got {}",
            frames * cols,
            data.len()
        )));
    }
    let mut out = vec![0.0f64; cols];
    for f in 0..frames {
        for c in 0..cols {
            out[c] += data[f * cols + c] as f64;
        }
    }
    Ok(out.iter().map(|&v| (v / frames as f64) as f32).collect())
}

/// Averages a [T x D] frame tensor down to a single [D] embedding.
pub fn average_face_frames(frames: &Tensor) -> Result<Tensor> {
    let (t, d) = frames.dims2();
    let mean = mean_rows(t, d, frames.data())?;
    Tensor::new(vec![d], mean)
}

/// Graph version; the mean stays differentiable with respect to the frames.
pub fn average_face_frames_graph(g: &mut Graph, frames: ValueId) -> Result<ValueId> {
    Ok(g.mean_over_rows(frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_frame_is_identity() {
        let t = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let avg = average_face_frames(&t).unwrap();
        assert_eq!(avg.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn identical_frames_average_to_themselves() {
        let t = Tensor::new(vec![2, 2], vec![0.5, -1.5, 0.5, -1.5]).unwrap();
        assert_eq!(average_face_frames(&t).unwrap().data(), &[0.5, -1.5]);
    }

    #[test]
    fn hand_arithmetic_case() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 3.0, 3.0, 5.0]).unwrap();
        assert_eq!(average_face_frames(&t).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn zero_frames_is_an_error() {
        assert!(mean_rows(0, 4, &[]).is_err());
    }
}
