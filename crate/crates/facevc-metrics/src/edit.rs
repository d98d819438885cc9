//! Unit-cost edit distance and the error rates built on it. The same core
//! serves word error rate (word tokens) and character error rate (character
//! tokens).

use crate::error::{MetricError, Result};

/// Non-empty token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(MetricError::Validation("empty token".into()));
        }
        Ok(Self(tokens))
    }

    pub fn words(text: &str) -> Self {
        Self(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn chars(text: &str) -> Self {
        Self(
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_string())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }
}

/// Levenshtein distance with unit insert/delete/substitute costs, rolling
/// single-row storage.
pub fn edit_distance(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (a.tokens(), b.tokens());
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ta) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, tb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ta != tb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Levenshtein(ref, hyp) / |ref|; the reference must be non-empty.
pub fn edit_error_rate(reference: &TokenSequence, hypothesis: &TokenSequence) -> Result<f64> {
    if reference.is_empty() {
        return Err(MetricError::Validation(
            "error rate against an empty reference".into(),
        ));
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Word error rate over whitespace tokens.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    edit_error_rate(&TokenSequence::words(reference), &TokenSequence::words(hypothesis))
}

/// Character error rate over non-whitespace characters.
pub fn char_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    edit_error_rate(&TokenSequence::chars(reference), &TokenSequence::chars(hypothesis))
}
