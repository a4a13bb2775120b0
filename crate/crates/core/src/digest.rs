//! SHA-256 digest helpers used for cache keys, run ids, and file manifests.

use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First eight hex characters of the SHA-256 of `bytes`.
///
/// Short digests label synthetic topics and ids; they are not used as
/// collision-resistant keys.
pub fn hex8(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..8].to_string()
}

/// Hex-encoded SHA-256 of a file's contents, streamed.
pub fn sha256_hex_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
