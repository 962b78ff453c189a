//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CPCN" | u32 version | u32 n | n bytes JSON header
//!        | u32 tensors | per tensor: u16 name len, name, u8 rank, u32 dims[rank], f32 data
//! ```
//!
//! The header carries the network configuration, block grid, batch-norm
//! epsilon and the normalisation rule id.

use std::fs;
use std::path::Path;

use cppcn_core::autodiff::Tensor;
use cppcn_core::cppcn::{BlockGrid, Generator, NetworkConfig, NORMALIZATION_RULE};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};

pub const MAGIC: &[u8; 4] = b"CPCN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub blocks: BlockGrid,
    pub bn_eps: f64,
    pub normalization: String,
    /// Epoch (one-based) the weights come from.
    pub epoch: usize,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub generator: Generator<f32>,
}

impl Checkpoint {
    pub fn new(generator: Generator<f32>, blocks: BlockGrid, bn_eps: f64, epoch: usize) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                network: generator.config().clone(),
                blocks,
                bn_eps,
                normalization: NORMALIZATION_RULE.into(),
                epoch,
            },
            generator,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let head = serde_json::to_vec(&self.header).expect("header serialises");
        out.extend_from_slice(&(head.len() as u32).to_le_bytes());
        out.extend_from_slice(&head);
        let w = self.generator.weights();
        out.extend_from_slice(&(w.len() as u32).to_le_bytes());
        for (name, t) in w.names().iter().zip(w.tensors()) {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// `path` is only used to locate diagnostics.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(Error::parse(path, "byte 0", "not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::parse(path, "byte 4", format!("unsupported checkpoint version {version}")));
        }
        let n = r.u32()? as usize;
        let at = r.pos;
        let header: CheckpointHeader = serde_json::from_slice(r.take(n)?)
            .map_err(|e| Error::parse(path, format!("byte {at}"), format!("header: {e}")))?;
        if header.normalization != NORMALIZATION_RULE {
            return Err(Error::parse(
                path,
                "header",
                format!("normalisation rule `{}` is not supported", header.normalization),
            ));
        }
        header.network.validate().map_err(|e| Error::data(path, e))?;
        header.blocks.validate().map_err(|e| Error::data(path, e))?;
        let count = r.u32()? as usize;
        let mut named = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::parse(path, format!("byte {at}"), "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            let t = Tensor::new(&shape, data).map_err(|e| Error::data(path, e))?;
            named.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::parse(path, format!("byte {}", r.pos), "trailing bytes after last tensor"));
        }
        let generator = Generator::from_named(&header.network, named).map_err(|e| Error::data(path, e))?;
        Ok(Checkpoint { header, generator })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).at(path)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).at(path)?;
        Checkpoint::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.path,
                format!("byte {}", self.pos),
                format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            k: 4,
            layer_dims: vec![4, 8],
            n_in: 32,
            m_out: 16,
            m1: 4,
            m2: 8,
            fc_dims: [8, 8, 8],
            pooled_layers: 4,
        }
    }

    #[test]
    fn round_trip() {
        let g: Generator<f32> = Generator::new(&tiny(), 5).unwrap();
        let c = Checkpoint::new(g, BlockGrid::default(), 1e-5, 7);
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"CPCN");
        let back = Checkpoint::from_bytes(&bytes, Path::new("c.bin")).unwrap();
        assert_eq!(back.header, c.header);
        assert_eq!(back.generator.weights(), c.generator.weights());
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs() {
        let p = Path::new("c.bin");
        let g: Generator<f32> = Generator::new(&tiny(), 5).unwrap();
        let bytes = Checkpoint::new(g, BlockGrid::default(), 1e-5, 1).to_bytes();
        let e = Checkpoint::from_bytes(&bytes[..bytes.len() - 3], p).unwrap_err().to_string();
        assert!(e.contains("truncated"), "{e}");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad, p).unwrap_err().to_string().contains("magic"));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(Checkpoint::from_bytes(&v2, p).unwrap_err().to_string().contains("version 2"));
    }
}
