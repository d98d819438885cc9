//! Speaker-identity supervision: a linear classifier head with softmax
//! cross-entropy, applied to either queried face features or speaker codes.

use facevc_nn::ops::cross_entropy;
use facevc_nn::{Graph, LinearLayer, NnError, ParameterRegistry, Result, ValueId};

use crate::labels::SpeakerLabelBatch;

pub fn id_supervision_loss(
    g: &mut Graph,
    reg: &ParameterRegistry,
    features: ValueId,
    head: &LinearLayer,
    labels: &SpeakerLabelBatch,
    trainable: bool,
) -> Result<ValueId> {
    if labels.n_classes() < 2 {
        return Err(NnError::Validation(
            "identity supervision needs at least 2 speaker classes".into(),
        ));
    }
    if head.out_dim() != labels.n_classes() {
        return Err(NnError::DimensionMismatch {
            op: "id_supervision_loss",
            lhs: vec![head.in_dim(), head.out_dim()],
            rhs: vec![labels.len(), labels.n_classes()],
        });
    }
    let (n, _) = g.shape(features);
    if n != labels.len() {
        return Err(NnError::Validation(format!(
            "{} feature rows for {} labels",
            n,
            labels.len()
        )));
    }
    let logits = head.forward(g, reg, features, trainable)?;
    cross_entropy(g, logits, &labels.one_hot())
}
