//! IDFV tensor files: magic "IDFV", version byte 0x01, rank byte, rank
//! little-endian u32 dims, then row-major little-endian f32 payload.
//! Parse-then-write is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use facevc_nn::Tensor;

use crate::error::{PipelineError, Result};

pub const MAGIC: [u8; 4] = *b"IDFV";
pub const VERSION: u8 = 0x01;

pub fn encode(t: &Tensor) -> Vec<u8> {
    let shape = t.shape();
    let mut out = Vec::with_capacity(6 + 4 * shape.len() + 4 * t.numel());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn fail(offset: usize, what: impl Into<String>) -> PipelineError {
    PipelineError::Io(format!("malformed tensor file at byte {offset}: {}", what.into()))
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 6 {
        return Err(fail(bytes.len(), "truncated header"));
    }
    if bytes[0..4] != MAGIC {
        return Err(fail(0, format!("bad magic {:02x?}", &bytes[0..4])));
    }
    if bytes[4] != VERSION {
        return Err(fail(4, format!("unsupported version {}", bytes[4])));
    }
    let rank = bytes[5] as usize;
    if rank == 0 {
        return Err(fail(5, "rank zero"));
    }
    let dims_end = 6 + 4 * rank;
    if bytes.len() < dims_end {
        return Err(fail(bytes.len(), "truncated dimension list"));
    }
    let mut shape = Vec::with_capacity(rank);
    for r in 0..rank {
        let o = 6 + 4 * r;
        let d = u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
        if d == 0 {
            return Err(fail(o, "zero dimension"));
        }
        shape.push(d);
    }
    let numel: usize = shape.iter().product();
    let expect = dims_end + 4 * numel;
    if bytes.len() != expect {
        return Err(fail(
            bytes.len().min(expect),
            format!("payload is {} bytes, expected {}", bytes.len() - dims_end, 4 * numel),
        ));
    }
    let mut data = Vec::with_capacity(numel);
    for i in 0..numel {
        let o = dims_end + 4 * i;
        data.push(f32::from_le_bytes([
            bytes[o],
            bytes[o + 1],
            bytes[o + 2],
            bytes[o + 3],
        ]));
    }
    Tensor::new(shape, data).map_err(|e| fail(dims_end, e.to_string()))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let bytes = encode(t);
    std::fs::File::create(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?
        .write_all(&bytes)?;
    Ok(())
}
