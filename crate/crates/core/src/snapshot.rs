//! `.snap` container: one line of JSON header, a newline, then the physical
//! samples as row-major little-endian f64 (θ outer, radial inner).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n_theta: usize,
    pub n_r: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub time: f64,
    pub quantity: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        if self.data.len() != self.header.n_theta * self.header.n_r {
            return Err(Error::DimensionMismatch { expected: self.header.n_theta * self.header.n_r, got: self.data.len() });
        }
        let header = serde_json::to_string(&self.header)?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Snapshot("missing header terminator".into()))?;
        let header: SnapshotHeader = serde_json::from_slice(&bytes[..split])?;
        let payload = &bytes[split + 1..];
        let n = header.n_theta * header.n_r;
        if payload.len() != n * 8 {
            return Err(Error::Snapshot(format!("payload has {} bytes, expected {}", payload.len(), n * 8)));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self { header, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}
