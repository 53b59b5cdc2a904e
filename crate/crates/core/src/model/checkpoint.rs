//! Checkpoint files.
//!
//! Layout: one line of JSON ([`CheckpointHeader`]) terminated by `\n`, then
//! `n_params` little-endian f64 parameter values in tensor order (the
//! `tensors` list of the header gives names, offsets and lengths). When
//! `optimizer_step` is present, `n_params` first-moment values and
//! `n_params` second-moment values follow in the same encoding.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamWState, ModelParams, TensorSpec};
use crate::error::{Error, Result};
use crate::types::HyperParams;

pub const CHECKPOINT_FORMAT: &str = "sgar-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub hyper_params: HyperParams,
    /// Training steps completed when the checkpoint was written.
    pub step: u64,
    pub n_params: usize,
    /// Step counter of the optimizer; `None` when no moments are stored.
    pub optimizer_step: Option<u64>,
    pub tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub params: ModelParams,
    pub optimizer: Option<AdamWState>,
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let p = &ckpt.params;
    if let Some(opt) = &ckpt.optimizer {
        if opt.m.len() != p.len() || opt.v.len() != p.len() {
            return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
        }
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        hyper_params: p.hp.clone(),
        step: ckpt.step,
        n_params: p.len(),
        optimizer_step: ckpt.optimizer.as_ref().map(|o| o.step),
        tensors: p.layout.tensors.clone(),
    };
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let line = serde_json::to_string(&header).map_err(|e| Error::json("checkpoint header", e))?;
    w.write_all(line.as_bytes()).map_err(io)?;
    w.write_all(b"\n").map_err(io)?;
    write_f64s(&mut w, &p.values).map_err(io)?;
    if let Some(opt) = &ckpt.optimizer {
        write_f64s(&mut w, &opt.m).map_err(io)?;
        write_f64s(&mut w, &opt.v).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(io)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Checkpoint("missing header line".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::json(format!("{}: checkpoint header", path.display()), e))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", header.format)));
    }
    header.hyper_params.validate()?;
    let n = header.n_params;
    let truncated = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Checkpoint("truncated payload".into())
        } else {
            Error::io(path, e)
        }
    };
    let values = read_f64s(&mut r, n).map_err(truncated)?;
    let params = ModelParams::from_values(&header.hyper_params, values)?;
    if params.layout.tensors != header.tensors {
        return Err(Error::Checkpoint("tensor layout does not match hyper-parameters".into()));
    }
    let optimizer = match header.optimizer_step {
        Some(step) => Some(AdamWState {
            m: read_f64s(&mut r, n).map_err(truncated)?,
            v: read_f64s(&mut r, n).map_err(truncated)?,
            step,
        }),
        None => None,
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    Ok(Checkpoint {
        step: header.step,
        params,
        optimizer,
    })
}
