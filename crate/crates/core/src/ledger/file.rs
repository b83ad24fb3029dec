use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::codec::from_canonical;
use crate::genesis::Genesis;

use super::{validate_chain, Block, LedgerError, ValidationReport};

/// Append-only chain file holding one canonical block per line.
#[derive(Debug)]
pub struct ChainFile {
    path: PathBuf,
    file: File,
}

impl ChainFile {
    pub fn open(path: impl AsRef<Path>) -> Result<ChainFile, LedgerError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ChainFile { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LedgerError> {
        let mut line = block.to_canonical().into_vec();
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Parses the lines of a chain file. Fails at the height of the first line
/// that is not a canonical block.
pub fn parse_blocks(bytes: &[u8]) -> Result<Vec<Block>, (u64, String)> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes
        .strip_suffix(b"\n")
        .ok_or_else(|| (bytes.split(|&b| b == b'\n').count() as u64 - 1, "missing final newline".to_string()))?;
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(h, line)| {
            from_canonical::<Block>(line).map_err(|e| (h as u64, format!("line {h}: {e}")))
        })
        .collect()
}

pub fn load_blocks(path: impl AsRef<Path>) -> Result<Vec<Block>, LedgerError> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = std::fs::read(path)?;
    parse_blocks(&bytes).map_err(|(_, e)| LedgerError::Malformed(e))
}

/// Validates a chain exactly as persisted, including its encoding.
pub fn validate_persisted(genesis: &Genesis, bytes: &[u8]) -> ValidationReport {
    match parse_blocks(bytes) {
        Ok(blocks) => validate_chain(genesis, &blocks),
        Err((first_bad_height, reason)) => {
            // A corrupt line may still be preceded by an invalid block.
            let good: Vec<Block> = bytes
                .split(|&b| b == b'\n')
                .take(first_bad_height as usize)
                .filter_map(|l| from_canonical::<Block>(l).ok())
                .collect();
            match validate_chain(genesis, &good) {
                ValidationReport::Ok { .. } => ValidationReport::Invalid {
                    first_bad_height,
                    reason,
                },
                bad => bad,
            }
        }
    }
}
