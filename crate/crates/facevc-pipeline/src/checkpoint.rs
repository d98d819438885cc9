//! Checkpoint directories: one IDFV file per parameter, a manifest with
//! shapes and 64-bit content checksums, and the full resolved config.

use std::path::Path;

use facevc_losses::VariationalNet;
use facevc_model::FaceVoiceModel;
use facevc_nn::ParameterRegistry;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::idfv;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |acc, &b| {
        (acc ^ b as u64).wrapping_mul(FNV_PRIME)
    })
}

/// Builds the model plus its auxiliary density network in one registry.
/// Construction order is fixed so parameter layouts are reproducible.
pub fn build_model(
    cfg: &RunConfig,
    n_classes: usize,
    seed: u64,
) -> Result<(ParameterRegistry, FaceVoiceModel, VariationalNet)> {
    let mut reg = ParameterRegistry::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = FaceVoiceModel::new(&mut reg, &mut rng, &cfg.model, n_classes)?;
    let qnet = VariationalNet::new(
        &mut reg,
        &mut rng,
        "qnet",
        cfg.model.d_spk,
        cfg.qnet_hidden,
        cfg.model.d_con,
    )?;
    Ok((reg, model, qnet))
}

pub fn save(dir: &Path, reg: &ParameterRegistry, cfg: &RunConfig, n_classes: usize) -> Result<()> {
    if !reg.all_finite() {
        return Err(PipelineError::Numeric(
            "refusing to write a checkpoint containing non-finite values".into(),
        ));
    }
    let params_dir = dir.join("params");
    std::fs::create_dir_all(&params_dir)?;

    let mut manifest = String::new();
    for (name, tensor) in reg.iter() {
        let bytes = idfv::encode(tensor);
        let path = params_dir.join(format!("{name}.idfv"));
        std::fs::write(&path, &bytes)?;
        let shape = tensor
            .shape()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        manifest.push_str(&format!("{name}\t{shape}\t{:016x}\n", fnv1a64(&bytes)));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    std::fs::write(
        dir.join("config.txt"),
        format!("{}n_classes={n_classes}\n", cfg.serialize()),
    )?;
    Ok(())
}

pub struct LoadedCheckpoint {
    pub cfg: RunConfig,
    pub n_classes: usize,
    pub registry: ParameterRegistry,
    pub model: FaceVoiceModel,
    pub qnet: VariationalNet,
}

pub fn load(dir: &Path) -> Result<LoadedCheckpoint> {
    let config_text = std::fs::read_to_string(dir.join("config.txt"))
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.join("config.txt").display())))?;
    let mut cfg = RunConfig::default();
    let mut n_classes = 0usize;
    for line in config_text.lines() {
        if let Some(v) = line.strip_prefix("n_classes=") {
            n_classes = v
                .parse()
                .map_err(|_| PipelineError::Validation(format!("bad class count {v:?}")))?;
        } else {
            cfg.apply_line(line)?;
        }
    }
    cfg.validate()?;
    if n_classes == 0 {
        return Err(PipelineError::Validation(
            "checkpoint config lacks n_classes".into(),
        ));
    }

    let (mut reg, model, qnet) = build_model(&cfg, n_classes, cfg.seed)?;

    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.join("manifest.txt").display())))?;
    let mut seen = 0usize;
    for line in manifest.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(name), Some(shape), Some(checksum)) =
            (parts.next(), parts.next(), parts.next())
        else {
            return Err(PipelineError::Validation(format!(
                "bad manifest line {line:?}"
            )));
        };
        let path = dir.join("params").join(format!("{name}.idfv"));
        let bytes = std::fs::read(&path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        let actual = format!("{:016x}", fnv1a64(&bytes));
        if actual != checksum {
            return Err(PipelineError::Io(format!(
                "checksum mismatch for {name}: manifest {checksum}, file {actual}"
            )));
        }
        let tensor = idfv::decode(&bytes)?;
        let actual_shape = tensor
            .shape()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        if actual_shape != shape {
            return Err(PipelineError::Validation(format!(
                "shape mismatch for {name}: manifest {shape}, file {actual_shape}"
            )));
        }
        reg.load_values(name, &tensor).map_err(|e| {
            PipelineError::Validation(format!("checkpoint does not fit this config: {e}"))
        })?;
        seen += 1;
    }
    if seen != reg.len() {
        return Err(PipelineError::Validation(format!(
            "manifest lists {seen} tensors but the model has {}",
            reg.len()
        )));
    }
    Ok(LoadedCheckpoint {
        cfg,
        n_classes,
        registry: reg,
        model,
        qnet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let cfg = RunConfig::default();
        let (reg, _, _) = build_model(&cfg, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &reg, &cfg, 3).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert_eq!(loaded.n_classes, 3);
        assert_eq!(loaded.registry.names(), reg.names());
        for (name, t) in reg.iter() {
            let lt = loaded.registry.get(name).unwrap();
            assert_eq!(t.data(), lt.data(), "{name}");
            assert_eq!(t.shape(), lt.shape(), "{name}");
        }
    }

    #[test]
    fn single_bit_corruption_is_detected() {
        let cfg = RunConfig::default();
        let (reg, _, _) = build_model(&cfg, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &reg, &cfg, 2).unwrap();

        let victim = dir.path().join("params").join("fv_map.keys.idfv");
        let mut bytes = std::fs::read(&victim).unwrap();
        let flip_at = bytes.len() / 2;
        bytes[flip_at] ^= 0x04;
        std::fs::write(&victim, bytes).unwrap();

        let err = match load(dir.path()) {
            Ok(_) => panic!("corrupted checkpoint loaded"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn fnv_vector() {
        // Reference value for "a" under FNV-1a 64.
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
