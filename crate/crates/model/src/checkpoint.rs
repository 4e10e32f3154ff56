//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `DDZCKPT1`, a little-endian `u64` header length,
//! a JSON header, then every network's parameters as little-endian `f64` in
//! header order. The header carries a SHA-256 of the network configs so a
//! loader can refuse parameters trained for a different shape.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{NetConfig, Position};
use crate::error::{ModelError, Result};
use crate::net::Network;

const MAGIC: &[u8; 8] = b"DDZCKPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetHeader {
    position: Position,
    config: NetConfig,
    version: u64,
    params: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    frames: u64,
    config_hash: String,
    metadata: BTreeMap<String, String>,
    nets: Vec<NetHeader>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub frames: u64,
    pub metadata: BTreeMap<String, String>,
    pub nets: Vec<Network>,
}

/// Hex SHA-256 of the `(position, config)` list.
pub fn config_hash<'a>(nets: impl IntoIterator<Item = (Position, &'a NetConfig)>) -> String {
    let list: Vec<(Position, &NetConfig)> = nets.into_iter().collect();
    let bytes = serde_json::to_vec(&list).expect("configs serialise");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn new(frames: u64, nets: Vec<Network>) -> Self {
        Checkpoint { frames, metadata: BTreeMap::new(), nets }
    }

    pub fn get(&self, position: Position) -> Option<&Network> {
        self.nets.iter().find(|n| n.position() == position)
    }

    pub fn config_hash(&self) -> String {
        config_hash(self.nets.iter().map(|n| (n.position(), n.config())))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            frames: self.frames,
            config_hash: self.config_hash(),
            metadata: self.metadata.clone(),
            nets: self
                .nets
                .iter()
                .map(|n| NetHeader {
                    position: n.position(),
                    config: n.config().clone(),
                    version: n.version(),
                    params: n.num_params(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let total: usize = self.nets.iter().map(Network::num_params).sum();
        let mut out = Vec::with_capacity(16 + json.len() + total * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for net in &self.nets {
            for p in net.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Checkpoint("not a checkpoint file".into()));
        }
        let mut len = [0u8; 8];
        read_exact(&mut bytes, &mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > bytes.len() {
            return Err(ModelError::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[..len])
            .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
        bytes = &bytes[len..];
        let expected = config_hash(header.nets.iter().map(|n| (n.position, &n.config)));
        if expected != header.config_hash {
            return Err(ModelError::Checkpoint("config hash does not match the stored configs".into()));
        }
        let mut nets = Vec::with_capacity(header.nets.len());
        for nh in header.nets {
            let mut params = Vec::with_capacity(nh.params);
            let mut buf = [0u8; 8];
            for _ in 0..nh.params {
                read_exact(&mut bytes, &mut buf)?;
                params.push(f64::from_le_bytes(buf));
            }
            nets.push(Network::from_parts(nh.config, nh.position, params, nh.version)?);
        }
        if !bytes.is_empty() {
            return Err(ModelError::Checkpoint(format!("{} trailing bytes", bytes.len())));
        }
        Ok(Checkpoint { frames: header.frames, metadata: header.metadata, nets })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Checkpoint::from_bytes(&bytes)
    }

    /// Fails unless the stored configs hash to `expected`.
    pub fn ensure_compatible(&self, expected: &str) -> Result<()> {
        let got = self.config_hash();
        if got == expected {
            Ok(())
        } else {
            Err(ModelError::Checkpoint(format!("config hash {got} does not match {expected}")))
        }
    }
}

fn read_exact(bytes: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    bytes
        .read_exact(buf)
        .map_err(|_| ModelError::Checkpoint("unexpected end of file".into()))
}
