use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// First 12 hex digits of the SHA-256 of `text`.
pub fn short_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Files of one run, all named `<command>-<hash>[.<tag>].<ext>` in one directory.
pub struct Output {
    dir: PathBuf,
    stem: String,
    files: Vec<String>,
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub config_hash: &'a str,
    pub seed: u64,
    pub parameters: Value,
    pub version: &'a str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> String {
    format!("cannot write {}: {e}", path.display())
}

impl Output {
    pub fn new(dir: &Path, command: &str, hash: &str) -> Result<Self, String> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), stem: format!("{command}-{hash}"), files: Vec::new() })
    }

    fn path(&mut self, tag: &str, ext: &str) -> PathBuf {
        let name = if tag.is_empty() { format!("{}.{ext}", self.stem) } else { format!("{}.{tag}.{ext}", self.stem) };
        self.files.push(name.clone());
        self.dir.join(name)
    }

    /// RFC 4180 CSV with a header row taken from the record's field names.
    pub fn csv<S: Serialize>(&mut self, tag: &str, rows: &[S]) -> Result<PathBuf, String> {
        let path = self.path(tag, "csv");
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(&path).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn json<S: Serialize>(&mut self, tag: &str, value: &S) -> Result<PathBuf, String> {
        let path = self.path(tag, "json");
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// One JSON document per line.
    pub fn jsonl<S: Serialize>(&mut self, tag: &str, header: &Value, records: &[S]) -> Result<PathBuf, String> {
        let path = self.path(tag, "jsonl");
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = |v: String| writeln!(w, "{v}").map_err(|e| io_err(&path, e));
        line(header.to_string())?;
        for r in records {
            line(serde_json::to_string(r).map_err(|e| io_err(&path, e))?)?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn finish<C: Serialize>(mut self, mut manifest: Manifest<'_, C>) -> Result<PathBuf, String> {
        manifest.outputs = std::mem::take(&mut self.files);
        let path = self.dir.join(format!("{}.manifest.json", self.stem));
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(short_hash("abc"), "ba7816bf8f01");
        assert_eq!(short_hash("abc").len(), 12);
    }
}
