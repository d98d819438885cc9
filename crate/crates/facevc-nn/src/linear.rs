//! Affine layers and bare weight matrices, stored by name in the registry.

use rand::Rng;

use crate::error::Result;
use crate::graph::{Graph, ValueId};
use crate::registry::ParameterRegistry;
use crate::tensor::Tensor;

/// Fully connected layer: weight [in x out] plus bias [out].
#[derive(Debug, Clone)]
pub struct LinearLayer {
    name: String,
    in_dim: usize,
    out_dim: usize,
}

impl LinearLayer {
    /// Registers `<name>.weight` (Glorot-uniform) and `<name>.bias` (zeros).
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        reg.register(
            &format!("{name}.weight"),
            Tensor::glorot(in_dim, out_dim, rng)?,
        )?;
        reg.register(&format!("{name}.bias"), Tensor::zeros(vec![out_dim])?)?;
        Ok(Self {
            name: name.to_string(),
            in_dim,
            out_dim,
        })
    }

    /// Reconstructs the handle for parameters already present in a registry
    /// (checkpoint loading).
    pub fn attach(reg: &ParameterRegistry, name: &str) -> Result<Self> {
        let w = reg.get(&format!("{name}.weight"))?;
        let (in_dim, out_dim) = w.dims2();
        reg.get(&format!("{name}.bias"))?;
        Ok(Self {
            name: name.to_string(),
            in_dim,
            out_dim,
        })
    }

    /// x [n x in] -> x W + b, bias broadcast across rows.
    pub fn forward(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        x: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let w = g.param_or_frozen(reg, &format!("{}.weight", self.name), trainable)?;
        let b = g.param_or_frozen(reg, &format!("{}.bias", self.name), trainable)?;
        let xw = g.matmul(x, w)?;
        g.add(xw, b)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }
}

/// Bias-free weight matrix, for attention projections and codebooks.
#[derive(Debug, Clone)]
pub struct MatParam {
    name: String,
    rows: usize,
    cols: usize,
}

impl MatParam {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        reg.register(name, Tensor::glorot(rows, cols, rng)?)?;
        Ok(Self {
            name: name.to_string(),
            rows,
            cols,
        })
    }

    pub fn with_init(reg: &mut ParameterRegistry, name: &str, init: Tensor) -> Result<Self> {
        let (rows, cols) = init.dims2();
        reg.register(name, init)?;
        Ok(Self {
            name: name.to_string(),
            rows,
            cols,
        })
    }

    pub fn attach(reg: &ParameterRegistry, name: &str) -> Result<Self> {
        let t = reg.get(name)?;
        let (rows, cols) = t.dims2();
        Ok(Self {
            name: name.to_string(),
            rows,
            cols,
        })
    }

    pub fn bind(&self, g: &mut Graph, reg: &ParameterRegistry, trainable: bool) -> Result<ValueId> {
        g.param_or_frozen(reg, &self.name, trainable)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}
