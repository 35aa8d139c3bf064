//! JSON Lines reading and writing with line-numbered errors.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Non-blank lines of a JSON Lines file, each with its 1-based number.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line).map_err(|e| Error::Line {
                path: path.display().to_string(),
                line: n,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Serializes rows as JSON Lines into a string.
pub fn to_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let text = to_string(rows)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_numbers_skip_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "1\n\n2\n{bad\n").unwrap();
        match read::<u32>(&p) {
            Err(Error::Line { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        write(&p, &[1u32, 2, 3]).unwrap();
        assert_eq!(read::<u32>(&p).unwrap(), vec![1, 2, 3]);
    }
}
