//! Local-filesystem recording storage with content checksums.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Video,
    Audio,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Video => "video",
            MediaKind::Audio => "audio",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(MediaKind::Video),
            "audio" => Ok(MediaKind::Audio),
            other => Err(StoreError::Integrity(format!("unknown media kind {other:?}"))),
        }
    }
}

/// Location and fingerprint of one stored blob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFile {
    pub rel_path: String,
    pub checksum: String,
    pub byte_size: u64,
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct FileService {
    root: PathBuf,
}

impl FileService {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for a stored relative path; rejects escapes from the root.
    pub fn path(&self, rel_path: &str) -> Result<PathBuf> {
        let rel = Path::new(rel_path);
        if rel_path.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(StoreError::Integrity(format!("illegal file path {rel_path:?}")));
        }
        Ok(self.root.join(rel))
    }

    /// Stores bytes under their content hash.
    pub fn put(&self, bytes: &[u8], extension: &str) -> Result<StoredFile> {
        let sum = checksum(bytes);
        let ext: String = extension.chars().filter(char::is_ascii_alphanumeric).collect();
        let rel_path = if ext.is_empty() {
            format!("blobs/{}/{sum}", &sum[..2])
        } else {
            format!("blobs/{}/{sum}.{ext}", &sum[..2])
        };
        let path = self.path(&rel_path)?;
        let dir = path.parent().expect("blob paths have a parent");
        fs::create_dir_all(dir)?;
        if !path.exists() {
            let tmp = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4().simple()));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)?;
        }
        Ok(StoredFile {
            rel_path,
            checksum: sum,
            byte_size: bytes.len() as u64,
        })
    }

    /// Reads a blob and verifies size and checksum.
    pub fn get(&self, file: &StoredFile) -> Result<Vec<u8>> {
        let path = self.path(&file.rel_path)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(StoreError::NotFound(format!("file {}", file.rel_path)))
            }
            Err(e) => return Err(e.into()),
        };
        if bytes.len() as u64 != file.byte_size || checksum(&bytes) != file.checksum {
            return Err(StoreError::Integrity(format!("checksum mismatch for {}", file.rel_path)));
        }
        Ok(bytes)
    }

    pub fn verify(&self, file: &StoredFile) -> Result<()> {
        self.get(file).map(drop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let fs = FileService::open(dir.path()).unwrap();
        let a = fs.put(b"hello", "mp4").unwrap();
        let b = fs.put(b"hello", "mp4").unwrap();
        assert_eq!(a, b);
        assert_eq!(fs.get(&a).unwrap(), b"hello");
        assert!(a.rel_path.ends_with(".mp4"));
    }

    #[test]
    fn rejects_path_escape() {
        let dir = tempfile::tempdir().unwrap();
        let fs = FileService::open(dir.path()).unwrap();
        assert!(fs.path("../etc/passwd").is_err());
        assert!(fs.path("/abs").is_err());
        assert!(fs.path("blobs/ok").is_ok());
    }
}
