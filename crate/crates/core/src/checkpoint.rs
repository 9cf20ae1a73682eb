//! Binary parameter files.
//!
//! Layout:
//!
//! ```text
//! "ITHP1"                       5-byte magic
//! u64 LE                        header length in bytes
//! JSON header                   version, model config, optional train config,
//!                               tensor names and shapes in storage order
//! per tensor: u64 LE count, then count × f64 LE
//! ```
//!
//! Values are stored at full precision, so a save/load round trip is bitwise.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IthpConfig, IthpParams};
use crate::numerics::Parameters;
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 5] = b"ITHP1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: IthpConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train: Option<TrainConfig>,
    pub tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: IthpConfig,
    pub train: Option<TrainConfig>,
    pub params: IthpParams,
}

pub fn to_bytes(config: &IthpConfig, train: Option<&TrainConfig>, params: &IthpParams) -> Result<Vec<u8>> {
    let named = params.named_tensors();
    let header = CheckpointHeader {
        version: VERSION,
        config: config.clone(),
        train: train.cloned(),
        tensors: named
            .iter()
            .map(|(name, (r, c), _)| TensorInfo {
                name: name.clone(),
                shape: [*r, *c],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(json.len() + 13 + 8 * (params.num_params() + named.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, values) in &named {
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let header_len = usize::try_from(cur.u64()?).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(cur.take(header_len)?)?;
    if header.version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    header.config.validate()?;

    // shapes come from the config; the header must agree with them
    let mut params = IthpParams::init(&header.config, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected: Vec<TensorInfo> = params
        .named_tensors()
        .into_iter()
        .map(|(name, (r, c), _)| TensorInfo { name, shape: [r, c] })
        .collect();
    if expected != header.tensors {
        return Err(Error::Checkpoint("tensor list does not match the stored config".into()));
    }
    for (info, slot) in header.tensors.iter().zip(params.tensors_mut()) {
        let n = cur.u64()? as usize;
        if n != slot.len() {
            return Err(Error::Checkpoint(format!("{}: expected {} values, found {n}", info.name, slot.len())));
        }
        for (v, chunk) in slot.iter_mut().zip(cur.take(8 * n)?.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(Checkpoint {
        config: header.config,
        train: header.train,
        params,
    })
}

pub fn save(path: &Path, config: &IthpConfig, train: Option<&TrainConfig>, params: &IthpParams) -> Result<()> {
    fs::write(path, to_bytes(config, train, params)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::load(path, e.to_string()))?;
    from_bytes(&bytes)
}
