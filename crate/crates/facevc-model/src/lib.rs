//! Network bodies for face-driven voice conversion: frame averaging, prompt
//! query encoders for face and audio, a quantized content encoder with a
//! predictive contrastive objective, a pitch embedding table, a mel decoder
//! and the face-to-voice memory mapping.

pub mod config;
pub mod content;
pub mod decoder;
pub mod face;
pub mod memory_map;
pub mod model;
pub mod pitch;
pub mod query_encoder;

pub use config::ModelConfig;
pub use content::{info_nce, nearest_codewords, ContentEncoder, VqOutput};
pub use decoder::MelDecoder;
pub use face::{average_face_frames, average_face_frames_graph};
pub use memory_map::VoiceMemory;
pub use model::FaceVoiceModel;
pub use pitch::{PitchPoint, PitchTable};
pub use query_encoder::{multi_head_attention, AttentionWeights, FaceQueryEncoder, SpeakerQueryEncoder};
