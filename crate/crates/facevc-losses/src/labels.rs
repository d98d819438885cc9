//! Per-batch speaker labels with one-hot and pair-indicator views.

use facevc_nn::{NnError, Result, Tensor};

#[derive(Debug, Clone)]
pub struct SpeakerLabelBatch {
    ids: Vec<usize>,
    n_classes: usize,
}

impl SpeakerLabelBatch {
    pub fn new(ids: Vec<usize>, n_classes: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(NnError::Validation("empty label batch".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= n_classes) {
            return Err(NnError::Validation(format!(
                "speaker id {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self { ids, n_classes })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn same_speaker(&self, i: usize, j: usize) -> bool {
        self.ids[i] == self.ids[j]
    }

    /// [N x C] one-hot target matrix.
    pub fn one_hot(&self) -> Tensor {
        let n = self.ids.len();
        let mut data = vec![0.0f32; n * self.n_classes];
        for (row, &id) in self.ids.iter().enumerate() {
            data[row * self.n_classes + id] = 1.0;
        }
        Tensor::new(vec![n, self.n_classes], data).expect("consistent shape")
    }

    /// [N x N] indicator matrix: 1 where samples share a speaker.
    pub fn pair_indicator(&self) -> Tensor {
        let n = self.ids.len();
        let mut data = vec![0.0f32; n * n];
        for i in 0..n {
            for j in 0..n {
                if self.ids[i] == self.ids[j] {
                    data[i * n + j] = 1.0;
                }
            }
        }
        Tensor::new(vec![n, n], data).expect("consistent shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_id_rejected() {
        assert!(SpeakerLabelBatch::new(vec![0, 3], 3).is_err());
        assert!(SpeakerLabelBatch::new(vec![], 3).is_err());
    }

    #[test]
    fn views_are_consistent() {
        let b = SpeakerLabelBatch::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(b.one_hot().data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            b.pair_indicator().data(),
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert!(b.same_speaker(0, 2));
        assert!(!b.same_speaker(0, 1));
    }
}
