//! Learnable pitch embedding table over binned normalized log-F0, with a
//! dedicated row for unvoiced frames.

use facevc_nn::{Graph, MatParam, ParameterRegistry, Result, ValueId};
use rand::Rng;

use crate::config::ModelConfig;

/// One frame of pitch conditioning input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchPoint {
    pub voiced: bool,
    /// Normalized log-F0; ignored when unvoiced.
    pub value: f32,
}

#[derive(Debug, Clone)]
pub struct PitchTable {
    pub table: MatParam,
    lo: f32,
    hi: f32,
    bins: usize,
}

impl PitchTable {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        // Row `bins` is the unvoiced embedding.
        let table = MatParam::new(reg, rng, name, cfg.pitch_bins + 1, cfg.d_pitch)?;
        Ok(Self {
            table,
            lo: cfg.pitch_lo,
            hi: cfg.pitch_hi,
            bins: cfg.pitch_bins,
        })
    }

    /// Equal-width binning; a value exactly on an edge goes to the higher
    /// bin, values outside the range clamp to the end bins.
    pub fn bin_index(&self, value: f32) -> usize {
        let width = (self.hi - self.lo) / self.bins as f32;
        let raw = ((value - self.lo) / width).floor();
        if raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.bins - 1)
        }
    }

    pub fn unvoiced_row(&self) -> usize {
        self.bins
    }

    /// Looks up one embedding row per frame: [T x d_pitch].
    pub fn embed(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        track: &[PitchPoint],
        trainable: bool,
    ) -> Result<ValueId> {
        let indices: Vec<usize> = track
            .iter()
            .map(|p| {
                if p.voiced {
                    self.bin_index(p.value)
                } else {
                    self.unvoiced_row()
                }
            })
            .collect();
        let table = self.table.bind(g, reg, trainable)?;
        g.gather_rows(table, &indices)
    }
}
