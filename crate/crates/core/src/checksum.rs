use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Content hash of a set of matrices, used to tie derived objects (caches,
/// partitions, traces) back to the problem data they were built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Checksum(pub u64);

impl fmt::Display for Checksum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Checksum {
    /// Hash of raw bytes, e.g. a canonical config serialization.
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Hasher::new().tag("bytes").bytes(bytes).finish()
    }
}

#[derive(Default)]
pub(crate) struct Hasher(Sha256);

impl Hasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn tag(&mut self, tag: &str) -> &mut Self {
        self.0.update((tag.len() as u64).to_le_bytes());
        self.0.update(tag.as_bytes());
        self
    }

    pub fn scalar(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn count(&mut self, v: usize) -> &mut Self {
        self.0.update((v as u64).to_le_bytes());
        self
    }

    pub fn matrix(&mut self, m: &DMatrix<f64>) -> &mut Self {
        self.count(m.nrows()).count(m.ncols());
        for v in m.iter() {
            self.scalar(*v);
        }
        self
    }

    pub fn vector(&mut self, v: &DVector<f64>) -> &mut Self {
        self.count(v.len());
        for x in v.iter() {
            self.scalar(*x);
        }
        self
    }

    pub fn finish(&self) -> Checksum {
        let digest = self.0.clone().finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        Checksum(u64::from_le_bytes(bytes))
    }
}
