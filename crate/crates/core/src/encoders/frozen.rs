//! External-frozen backend: vectors precomputed elsewhere, stored in a
//! sidecar cache keyed by content hash.
//!
//! File layout (little-endian): magic `SQKF`, u32 version, u32 dim,
//! u64 record count, then per record a 32-byte SHA-256 of the UTF-8 text
//! followed by `dim` f32 values.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::EncoderError;

const MAGIC: &[u8; 4] = b"SQKF";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct FrozenCache {
    dim: usize,
    map: HashMap<[u8; 32], Vec<f32>>,
}

pub fn content_hash(text: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.finalize().into()
}

impl FrozenCache {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn lookup(&self, text: &str) -> Option<Vec<f64>> {
        self.map
            .get(&content_hash(text))
            .map(|v| v.iter().map(|&x| x as f64).collect())
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let mut file = std::fs::File::open(path)?;
        let mut magic = [0u8; 4];
        file.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EncoderError::BadCacheFile("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        file.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != VERSION {
            return Err(EncoderError::BadCacheFile(format!(
                "unsupported version {version}"
            )));
        }
        file.read_exact(&mut u32buf)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        let mut u64buf = [0u8; 8];
        file.read_exact(&mut u64buf)?;
        let count = u64::from_le_bytes(u64buf);
        let mut map = HashMap::with_capacity(count as usize);
        for _ in 0..count {
            let mut hash = [0u8; 32];
            file.read_exact(&mut hash)?;
            let mut vec = vec![0f32; dim];
            let mut raw = vec![0u8; dim * 4];
            file.read_exact(&mut raw)?;
            for (i, chunk) in raw.chunks_exact(4).enumerate() {
                vec[i] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
            map.insert(hash, vec);
        }
        Ok(Self { dim, map })
    }

    pub fn write(path: &Path, dim: usize, entries: &[(String, Vec<f32>)]) -> Result<(), EncoderError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(MAGIC)?;
        file.write_all(&VERSION.to_le_bytes())?;
        file.write_all(&(dim as u32).to_le_bytes())?;
        file.write_all(&(entries.len() as u64).to_le_bytes())?;
        for (text, vec) in entries {
            if vec.len() != dim {
                return Err(EncoderError::BadCacheFile(format!(
                    "vector of length {} in a dim-{dim} cache",
                    vec.len()
                )));
            }
            file.write_all(&content_hash(text))?;
            for &x in vec {
                file.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trips_and_misses_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        let entries = vec![
            ("hello".to_string(), vec![1.0f32, 2.0, 3.0]),
            ("안녕".to_string(), vec![-0.5f32, 0.25, 0.0]),
        ];
        FrozenCache::write(&path, 3, &entries).unwrap();
        let cache = FrozenCache::load(&path).unwrap();
        assert_eq!(cache.dim(), 3);
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.lookup("hello").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(cache.lookup("missing").is_none());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPExxxxxxxxxxxxxxxx").unwrap();
        assert!(FrozenCache::load(&path).is_err());
    }
}
