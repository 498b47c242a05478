use std::path::{Path, PathBuf};

use crate::digest::sha256_hex;

/// Content address of one backend response.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    /// Key over (backend id, prompt hash, input-image hash, temperature).
    /// An absent prompt or image hashes as the empty byte string.
    pub fn new(backend_id: &str, prompt: &str, image: &[u8], temperature: f64) -> Self {
        let material = format!(
            "{backend_id}\n{}\n{}\n{}",
            sha256_hex(prompt.as_bytes()),
            sha256_hex(image),
            temperature.to_bits()
        );
        Self(sha256_hex(material.as_bytes()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(super) fn path(&self, cache_dir: &Path) -> PathBuf {
        cache_dir.join(&self.0[..2]).join(&self.0)
    }
}
