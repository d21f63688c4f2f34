use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::crypto::sha3_256;
use crate::protocol::Roster;

use super::{DrawRegister, DrawTranscript, RegisterEntry, RegisterError, TranscriptError};

/// Name of the index file inside a register directory.
pub const INDEX_FILE: &str = "index.txt";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error("{path}: {source}")]
    Transcript {
        path: PathBuf,
        #[source]
        source: TranscriptError,
    },
    #[error("{path}: digest does not match the index")]
    DigestMismatch { path: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// A register directory: one transcript file per draw plus an index.
#[derive(Debug)]
pub struct RegisterStore {
    dir: PathBuf,
    register: DrawRegister,
}

impl RegisterStore {
    /// Opens `dir`, creating it if needed and loading an existing index.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let index = dir.join(INDEX_FILE);
        let register = match fs::read_to_string(&index) {
            Ok(text) => DrawRegister::from_index(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => DrawRegister::new(),
            Err(e) => return Err(io_err(&index)(e)),
        };
        Ok(Self { dir, register })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn register(&self) -> &DrawRegister {
        &self.register
    }

    pub fn next_draw_number(&self) -> u64 {
        self.register.next_draw_number()
    }

    /// Appends the draw to the register, writes its transcript file and the
    /// updated index.
    pub fn record(
        &mut self,
        transcript: &DrawTranscript,
        roster: &Roster,
    ) -> Result<RegisterEntry, StoreError> {
        let entry = self.register.append(transcript, roster)?.clone();
        let path = self.dir.join(&entry.file);
        fs::write(&path, transcript.to_bytes()).map_err(io_err(&path))?;
        let index = self.dir.join(INDEX_FILE);
        fs::write(&index, self.register.to_index()).map_err(io_err(&index))?;
        Ok(entry)
    }

    pub fn transcript_path(&self, draw_no: u64) -> Option<PathBuf> {
        self.register.get(draw_no).map(|e| self.dir.join(&e.file))
    }

    /// Reads a stored transcript back, checking it against the index digest.
    pub fn load(&self, draw_no: u64) -> Result<Option<DrawTranscript>, StoreError> {
        let Some(entry) = self.register.get(draw_no) else {
            return Ok(None);
        };
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha3_256(&bytes) != entry.digest {
            return Err(StoreError::DigestMismatch { path });
        }
        DrawTranscript::from_bytes(&bytes)
            .map(Some)
            .map_err(|source| StoreError::Transcript { path, source })
    }
}
