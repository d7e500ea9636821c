//! Binary checkpoint files: a text header followed by raw tensors.
//!
//! ```text
//! ARSQ1
//! variant=attn-residual
//! scoring=content
//! ...
//! <blank line>
//! { u32 name_len, name, u32 rank, u32 dims[rank], values (LE) }*
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DecoderVariant, Mode, ModelConfig, ModelParams};
use crate::scalar::{Precision, Scalar};
use crate::tensor::Tensor;

pub const MAGIC: &[u8] = b"ARSQ1\n";

/// What a checkpoint's header declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub precision: Precision,
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let cfg = params.config();
    let mut out = MAGIC.to_vec();
    let meta = [
        ("variant", cfg.variant.name().to_string()),
        (
            "scoring",
            cfg.variant.scoring().map_or("none", |s| s.name()).to_string(),
        ),
        ("mode", cfg.mode.name().to_string()),
        ("embed_dim", cfg.embed_dim.to_string()),
        ("hidden_dim", cfg.hidden_dim.to_string()),
        ("src_vocab", cfg.src_vocab.to_string()),
        ("tgt_vocab", cfg.tgt_vocab.to_string()),
        ("precision", T::PRECISION.name().to_string()),
    ];
    for (k, v) in meta {
        out.extend_from_slice(format!("{k}={v}\n").as_bytes());
    }
    out.push(b'\n');
    for p in params.iter() {
        push_u32(&mut out, p.name().len());
        out.extend_from_slice(p.name().as_bytes());
        let shape = p.value().shape();
        push_u32(&mut out, shape.len());
        for &d in shape {
            push_u32(&mut out, d);
        }
        for &v in p.value().values() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn save_checkpoint<T: Scalar>(path: &Path, params: &ModelParams<T>) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn line(&mut self) -> Result<&'a str> {
        let bytes: &'a [u8] = self.bytes;
        let rest = &bytes[self.pos..];
        let Some(n) = rest.iter().position(|&b| b == b'\n') else {
            return Err(self.fail("unterminated header"));
        };
        let path = self.path;
        let raw = self.take(n + 1)?;
        std::str::from_utf8(&raw[..n]).map_err(|_| Error::Checkpoint {
            path: path.to_path_buf(),
            msg: "header is not UTF-8".into(),
        })
    }
}

fn parse_header(r: &mut Reader<'_>) -> Result<CheckpointHeader> {
    if !r.bytes.starts_with(MAGIC) {
        return Err(r.fail("missing ARSQ1 magic"));
    }
    r.pos = MAGIC.len();
    let mut meta = std::collections::HashMap::new();
    loop {
        let line = r.line()?.to_string();
        if line.is_empty() {
            break;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(r.fail(format!("malformed header line {line:?}")));
        };
        meta.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| r.fail(format!("header lacks {k}")));
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| r.fail(format!("header field {k} is not a count")))
    };
    let scoring = get("scoring")?;
    let variant = DecoderVariant::parse(get("variant")?, (scoring != "none").then_some(scoring.as_str()))
        .map_err(|e| r.fail(e.to_string()))?;
    let mode = Mode::parse(get("mode")?).ok_or_else(|| r.fail("unknown mode"))?;
    let precision = Precision::parse(get("precision")?).ok_or_else(|| r.fail("unknown precision"))?;
    let config = ModelConfig {
        variant,
        mode,
        embed_dim: num("embed_dim")?,
        hidden_dim: num("hidden_dim")?,
        src_vocab: num("src_vocab")?,
        tgt_vocab: num("tgt_vocab")?,
    };
    config.validate().map_err(|e| r.fail(e.to_string()))?;
    Ok(CheckpointHeader { config, precision })
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8], path: &Path) -> Result<ModelParams<T>> {
    let mut r = Reader { bytes, pos: 0, path };
    let header = parse_header(&mut r)?;
    if header.precision != T::PRECISION {
        return Err(r.fail(format!(
            "stored in {} precision, requested {}",
            header.precision.name(),
            T::PRECISION.name()
        )));
    }
    let width = T::PRECISION.bytes();
    let mut tensors = Vec::new();
    while r.pos < bytes.len() {
        let n = r.u32()?;
        let name = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::Checkpoint {
                path: path.to_path_buf(),
                msg: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.u32()?;
        if rank == 0 || rank > 8 {
            return Err(r.fail(format!("tensor {name} has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let Some(count) = count.filter(|&c| c > 0 && c <= bytes.len() / width) else {
            return Err(r.fail(format!("tensor {name} has impossible shape {shape:?}")));
        };
        let raw = r.take(count * width)?;
        let values = raw.chunks_exact(width).map(T::read_le).collect();
        let t = Tensor::new(shape, values).map_err(|e| r.fail(e.to_string()))?;
        tensors.push((name, t));
    }
    ModelParams::from_tensors(header.config, tensors).map_err(|e| r.fail(e.to_string()))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Reads only the header, e.g. to pick the precision to load with.
pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&mut Reader {
        bytes: &bytes,
        pos: 0,
        path,
    })
}
