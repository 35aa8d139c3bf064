use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::ReviewDecision;
use crate::error::{Error, Result};

/// Append-only decision log. One JSON object per line, fsynced per append.
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

struct Scan {
    decisions: Vec<ReviewDecision>,
    /// Byte length of the well-formed prefix.
    good_len: u64,
    /// The last record parsed but had no newline.
    unterminated: bool,
}

fn scan(bytes: &[u8]) -> Result<Scan> {
    let mut decisions = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(n) => (&rest[..n], true),
            None => (rest, false),
        };
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<ReviewDecision>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(d) => {
                decisions.push(d);
                offset += line.len() + usize::from(terminated);
                if !terminated {
                    return Ok(Scan {
                        decisions,
                        good_len: offset as u64,
                        unterminated: true,
                    });
                }
            }
            // a write cut short by a crash
            Err(_) if !terminated => break,
            Err(message) => {
                return Err(Error::LogCorrupt {
                    line: line_no,
                    message,
                })
            }
        }
    }
    Ok(Scan {
        decisions,
        good_len: offset as u64,
        unterminated: false,
    })
}

/// Reads every decision without touching the file. A torn final line is
/// ignored.
pub fn read_decisions(path: &Path) -> Result<Vec<ReviewDecision>> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(scan(&bytes)?.decisions),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(path, e)),
    }
}

impl DecisionLog {
    /// Opens or creates the log and returns the decisions already in it.
    /// A torn trailing write is cut off so the next append starts clean.
    pub fn open(path: &Path) -> Result<(Self, Vec<ReviewDecision>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let scan = scan(&bytes)?;
        if scan.good_len < bytes.len() as u64 {
            file.set_len(scan.good_len)
                .map_err(|e| Error::io(path, e))?;
        }
        if scan.unterminated {
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        file.sync_all().map_err(|e| Error::io(path, e))?;
        Ok((
            DecisionLog {
                path: path.to_owned(),
                file,
            },
            scan.decisions,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, decision: &ReviewDecision) -> Result<()> {
        let mut line = serde_json::to_vec(decision)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))
    }
}
