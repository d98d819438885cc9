//! Speaker-embedding similarity metrics.
//!
//! secs compares generated embeddings to the mean reference embedding of the
//! same speaker; sec averages cosine over same-speaker pairs (higher means
//! more consistent); sed averages cosine over different-speaker pairs (lower
//! means more diverse).

use crate::error::{MetricError, Result};

const MIN_NORM: f64 = 1e-9;

/// Embeddings paired with a speaker id per row.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f32>>,
    speakers: Vec<usize>,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f32>>, speakers: Vec<usize>) -> Result<Self> {
        if vectors.len() != speakers.len() {
            return Err(MetricError::Validation(format!(
                "{} vectors but {} speaker ids",
                vectors.len(),
                speakers.len()
            )));
        }
        if vectors.is_empty() {
            return Err(MetricError::Validation("empty embedding set".into()));
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(MetricError::Validation("ragged embedding rows".into()));
        }
        Ok(Self { vectors, speakers })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f32>] {
        &self.vectors
    }

    pub fn speakers(&self) -> &[usize] {
        &self.speakers
    }

    fn speaker_ids_sorted(&self) -> Vec<usize> {
        let mut ids = self.speakers.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// a.b / (|a||b|); rejects near-zero vectors.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricError::Validation(format!(
            "cosine over vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na <= MIN_NORM || nb <= MIN_NORM {
        return Err(MetricError::Validation(
            "cosine of a (near-)zero vector".into(),
        ));
    }
    Ok(dot / (na * nb))
}

/// Mean over generated embeddings of cosine to the mean reference embedding
/// of the same speaker.
pub fn secs(generated: &EmbeddingSet, reference: &EmbeddingSet) -> Result<f64> {
    if generated.dim() != reference.dim() {
        return Err(MetricError::Validation(format!(
            "embedding widths differ: {} vs {}",
            generated.dim(),
            reference.dim()
        )));
    }
    let dim = reference.dim();
    let mut total = 0.0f64;
    for (vec, &spk) in generated.vectors.iter().zip(&generated.speakers) {
        let mut mean = vec![0.0f32; dim];
        let mut count = 0usize;
        for (rvec, &rspk) in reference.vectors.iter().zip(&reference.speakers) {
            if rspk == spk {
                for (m, &v) in mean.iter_mut().zip(rvec) {
                    *m += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(MetricError::Validation(format!(
                "no reference embeddings for speaker {spk}"
            )));
        }
        for m in mean.iter_mut() {
            *m /= count as f32;
        }
        total += cosine(vec, &mean)?;
    }
    Ok(total / generated.len() as f64)
}

/// Mean pairwise cosine over same-speaker pairs.
pub fn sec(set: &EmbeddingSet) -> Result<f64> {
    let mut total = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            if set.speakers[i] == set.speakers[j] {
                total += cosine(&set.vectors[i], &set.vectors[j])?;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(MetricError::Validation(
            "no speaker has two embeddings; within-speaker consistency undefined".into(),
        ));
    }
    Ok(total / pairs as f64)
}

/// Mean pairwise cosine over different-speaker pairs (lower = more diverse).
pub fn sed(set: &EmbeddingSet) -> Result<f64> {
    if set.speaker_ids_sorted().len() < 2 {
        return Err(MetricError::Validation(
            "diversity needs at least two speakers".into(),
        ));
    }
    let mut total = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            if set.speakers[i] != set.speakers[j] {
                total += cosine(&set.vectors[i], &set.vectors[j])?;
                pairs += 1;
            }
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 1.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - 0.7071).abs() < 1e-4);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    fn set(rows: &[(Vec<f32>, usize)]) -> EmbeddingSet {
        EmbeddingSet::new(
            rows.iter().map(|(v, _)| v.clone()).collect(),
            rows.iter().map(|(_, s)| *s).collect(),
        )
        .unwrap()
    }

    #[test]
    fn secs_identity_and_orthogonal() {
        let gen = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)]);
        assert!((secs(&gen, &gen).unwrap() - 1.0).abs() < 1e-12);
        let orthogonal = set(&[(vec![0.0, 1.0], 0), (vec![1.0, 0.0], 1)]);
        assert_eq!(secs(&gen, &orthogonal).unwrap(), 0.0);
    }

    #[test]
    fn secs_hand_computed_mean_reference() {
        // Speaker 0 references (1,0) and (0,1): mean (0.5, 0.5).
        let gen = set(&[(vec![1.0, 0.0], 0)]);
        let refs = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 0)]);
        let v = secs(&gen, &refs).unwrap();
        assert!((v - (0.5f64 / (0.5f64.sqrt()))).abs() < 1e-6);
    }

    #[test]
    fn secs_missing_reference_speaker_errors() {
        let gen = set(&[(vec![1.0, 0.0], 7)]);
        let refs = set(&[(vec![1.0, 0.0], 0)]);
        assert!(secs(&gen, &refs).is_err());
    }

    #[test]
    fn sec_examples() {
        let identical = set(&[
            (vec![2.0, 0.0], 0),
            (vec![2.0, 0.0], 0),
            (vec![2.0, 0.0], 1),
            (vec![2.0, 0.0], 1),
        ]);
        assert!((sec(&identical).unwrap() - 1.0).abs() < 1e-12);

        let orthogonal = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 0)]);
        assert_eq!(sec(&orthogonal).unwrap(), 0.0);

        // Three embeddings of one speaker: mean of the three pair cosines.
        let three = set(&[
            (vec![1.0, 0.0], 0),
            (vec![0.0, 1.0], 0),
            (vec![1.0, 1.0], 0),
        ]);
        let c01 = 0.0;
        let c02 = 1.0 / 2.0f64.sqrt();
        let c12 = 1.0 / 2.0f64.sqrt();
        assert!((sec(&three).unwrap() - (c01 + c02 + c12) / 3.0).abs() < 1e-6);

        let singletons = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)]);
        assert!(sec(&singletons).is_err());
    }

    #[test]
    fn sed_examples() {
        let shared = set(&[(vec![1.0, 1.0], 0), (vec![1.0, 1.0], 1)]);
        assert!((sed(&shared).unwrap() - 1.0).abs() < 1e-12);

        let orthogonal = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)]);
        assert_eq!(sed(&orthogonal).unwrap(), 0.0);

        // 2 speakers x 2 embeddings, hand-set.
        let quad = set(&[
            (vec![1.0, 0.0], 0),
            (vec![1.0, 1.0], 0),
            (vec![0.0, 1.0], 1),
            (vec![-1.0, 0.0], 1),
        ]);
        let r = 1.0 / 2.0f64.sqrt();
        let expected = (0.0 + -1.0 + r + -r) / 4.0;
        assert!((sed(&quad).unwrap() - expected).abs() < 1e-6);

        let single = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 0)]);
        assert!(sed(&single).is_err());
    }

    #[test]
    fn collapse_signature_sed_equals_sec_at_one() {
        let collapsed = set(&[
            (vec![0.3, 0.4], 0),
            (vec![0.3, 0.4], 0),
            (vec![0.3, 0.4], 1),
            (vec![0.3, 0.4], 2),
        ]);
        assert!((sec(&collapsed).unwrap() - 1.0).abs() < 1e-12);
        assert!((sed(&collapsed).unwrap() - 1.0).abs() < 1e-12);
    }
}
