//! Training objectives for the face-voice conversion stack.

pub mod club;
pub mod contrastive;
pub mod labels;
pub mod mapping;
pub mod supervision;
pub mod total;
pub mod weights;

pub use club::{club_mi_upper, qnet_nll, VariationalNet};
pub use contrastive::contrastive_loss;
pub use labels::SpeakerLabelBatch;
pub use mapping::{fv_mapping_loss, INTER_SPEAKER_MARGIN};
pub use supervision::id_supervision_loss;
pub use total::{recon_loss, total_loss, LossParts};
pub use weights::LossWeights;
