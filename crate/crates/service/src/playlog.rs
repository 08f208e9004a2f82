//! Append-only `play_log.csv` writer.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ethicup_core::replay::{play_log_header, PlayLogRecord};

/// Shared by every session. Each record is written with a single `write_all`
/// under the lock, so concurrent appends never interleave.
#[derive(Debug)]
pub struct PlayLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl PlayLog {
    /// Opens `path` for appending, creating it (and its directory) if needed.
    /// The header is written only when the file is empty.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() == 0 {
            file.write_all(play_log_header().as_bytes())?;
        }
        Ok(PlayLog {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &PlayLogRecord) -> io::Result<()> {
        let line = record.to_csv_line();
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}
