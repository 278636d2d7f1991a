//! Directory of JSON documents, one file per document.
//!
//! Skeletons, clips and controllers are addressed by the SHA-256 of their
//! canonical bytes; sessions by a caller-supplied or random id. Writes go
//! to a temporary file in the target directory and are renamed into place,
//! so readers only ever see complete documents. Leftover temporaries from
//! an interrupted write are never read back.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Skeleton,
    Clip,
    Session,
    Controller,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Skeleton, Kind::Clip, Kind::Session, Kind::Controller];

    fn dir(self) -> &'static str {
        match self {
            Kind::Skeleton => "skeletons",
            Kind::Clip => "clips",
            Kind::Session => "sessions",
            Kind::Controller => "controllers",
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid document id {0:?}")]
    InvalidId(String),
    #[error("document {0:?} already exists")]
    AlreadyExists(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Ids are 1 to 128 characters of `[A-Za-z0-9_-]`.
pub fn valid_id(id: &str) -> bool {
    (1..=128).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for kind in Kind::ALL {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: Kind, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(kind.dir()).join(format!("{id}.json")))
    }

    fn temp(&self, kind: Kind, bytes: &[u8]) -> io::Result<NamedTempFile> {
        let mut tmp = NamedTempFile::new_in(self.root.join(kind.dir()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        Ok(tmp)
    }

    /// Stores `bytes` under their content hash and returns it.
    pub fn put(&self, kind: Kind, bytes: &[u8]) -> Result<String, StoreError> {
        let id = content_id(bytes);
        let path = self.path(kind, &id)?;
        if !path.exists() {
            self.temp(kind, bytes)?.persist(&path).map_err(|e| e.error)?;
        }
        Ok(id)
    }

    /// Writes `bytes` under `id`, replacing any previous version.
    pub fn replace(&self, kind: Kind, id: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.path(kind, id)?;
        self.temp(kind, bytes)?.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Writes `bytes` under `id`, failing if `id` is taken.
    pub fn create(&self, kind: Kind, id: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.path(kind, id)?;
        match self.temp(kind, bytes)?.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::AlreadyExists(id.to_string())),
            Err(e) => Err(e.error.into()),
        }
    }

    pub fn get(&self, kind: Kind, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.path(kind, id)?;
        match fs::read(path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn contains(&self, kind: Kind, id: &str) -> bool {
        self.path(kind, id).is_ok_and(|p| p.is_file())
    }
}
