//! The assembled conversion network and its shared inference paths.

use facevc_nn::ops::l2_normalize_rows;
use facevc_nn::{Graph, LinearLayer, ParameterRegistry, Result, ValueId};
use rand::Rng;

use crate::config::ModelConfig;
use crate::content::ContentEncoder;
use crate::decoder::MelDecoder;
use crate::face::average_face_frames_graph;
use crate::memory_map::VoiceMemory;
use crate::pitch::PitchTable;
use crate::query_encoder::{FaceQueryEncoder, SpeakerQueryEncoder};

pub struct FaceVoiceModel {
    pub cfg: ModelConfig,
    /// Speaker classes seen in training; sizes the supervision heads.
    pub n_classes: usize,
    pub face_encoder: FaceQueryEncoder,
    pub speaker_encoder: SpeakerQueryEncoder,
    pub content_encoder: ContentEncoder,
    pub pitch: PitchTable,
    pub decoder: MelDecoder,
    pub memory: VoiceMemory,
    pub face_head: LinearLayer,
    pub speech_head: LinearLayer,
}

impl FaceVoiceModel {
    /// Registers every parameter in a fixed order, so two models built from
    /// the same seed and config are bit-identical.
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        cfg: &ModelConfig,
        n_classes: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            n_classes,
            face_encoder: FaceQueryEncoder::new(reg, rng, "face_query", cfg)?,
            speaker_encoder: SpeakerQueryEncoder::new(reg, rng, "speaker_enc", cfg)?,
            content_encoder: ContentEncoder::new(reg, rng, "content", cfg)?,
            pitch: PitchTable::new(reg, rng, "pitch.table", cfg)?,
            decoder: MelDecoder::new(reg, rng, "decoder", cfg)?,
            memory: VoiceMemory::new(reg, rng, "fv_map", cfg)?,
            face_head: LinearLayer::new(reg, rng, "face_head", cfg.d_spk, n_classes)?,
            speech_head: LinearLayer::new(reg, rng, "speech_head", cfg.d_spk, n_classes)?,
        })
    }

    /// Face frames [T x d_face] -> (raw queried feature, unit-normalized
    /// copy), both [1 x d_spk].
    pub fn face_query(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        face_frames: ValueId,
        trainable: bool,
    ) -> Result<(ValueId, ValueId)> {
        let averaged = average_face_frames_graph(g, face_frames)?;
        let (pooled, _) = self.face_encoder.forward(g, reg, averaged, trainable)?;
        let normalized = l2_normalize_rows(g, pooled)?;
        Ok((pooled, normalized))
    }

    /// The inference-side speaker path: averaged face -> queried feature ->
    /// unit normalization -> memory mapping with a query skip -> unit
    /// normalization. The contrastive objective aligns queried face features
    /// with speaker codes, so adding the query back recovers the decoder's
    /// trained input regime for seen faces while unseen faces keep their own
    /// geometry instead of collapsing onto the memory's training span. The
    /// final normalization matches the unit shell the decoder trains on.
    /// Interpolation reuses the same pieces so its endpoints reproduce this
    /// path exactly.
    pub fn speaker_code_from_face(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        face_frames: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let (_, normalized) = self.face_query(g, reg, face_frames, trainable)?;
        self.mapped_code(g, reg, normalized, trainable)
    }

    /// Memory mapping with query skip and unit normalization; `query` must
    /// be a unit-normalized queried face feature.
    pub fn mapped_code(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        query: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let mapped = self.memory.map(g, reg, query, trainable)?;
        let combined = g.add(mapped, query)?;
        l2_normalize_rows(g, combined)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::default();
        let mut reg_a = ParameterRegistry::new();
        let mut reg_b = ParameterRegistry::new();
        FaceVoiceModel::new(&mut reg_a, &mut ChaCha8Rng::seed_from_u64(5), &cfg, 4).unwrap();
        FaceVoiceModel::new(&mut reg_b, &mut ChaCha8Rng::seed_from_u64(5), &cfg, 4).unwrap();
        assert_eq!(reg_a.names(), reg_b.names());
        for (name, t) in reg_a.iter() {
            assert_eq!(t.data(), reg_b.get(name).unwrap().data(), "{name}");
        }
    }

    #[test]
    fn registry_has_every_component() {
        let cfg = ModelConfig::default();
        let mut reg = ParameterRegistry::new();
        FaceVoiceModel::new(&mut reg, &mut ChaCha8Rng::seed_from_u64(1), &cfg, 3).unwrap();
        for name in [
            "face_query.prompts",
            "speaker_enc.prompts",
            "speaker_enc.adapter.weight",
            "content.codebook",
            "pitch.table",
            "decoder.l3.bias",
            "fv_map.keys",
            "face_head.weight",
            "speech_head.weight",
        ] {
            assert!(reg.contains(name), "missing {name}");
        }
    }
}
