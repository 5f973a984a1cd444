//! Artifact emission. Every file is written to a temporary sibling and
//! renamed into place, and carries the config hash, seed and format version.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            version: FORMAT_VERSION.to_string(),
        }
    }

    /// Leading CSV line; readers skip it as a `#` comment.
    pub fn csv_comment(&self) -> String {
        format!("# memrc {} config={} seed={}", self.version, self.config_hash, self.seed)
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes artifacts into one output directory.
#[derive(Debug, Clone)]
pub struct Emitter {
    dir: PathBuf,
    provenance: Provenance,
}

impl Emitter {
    pub fn new(dir: impl Into<PathBuf>, provenance: Provenance) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, provenance })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// CSV artifact; `body` writes the header row and data rows.
    pub fn csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.provenance.csv_comment())?;
        body(&mut buf)?;
        let path = self.dir.join(name);
        write_atomic(&path, &buf)?;
        Ok(path)
    }

    /// JSON artifact: the serialized object with a `provenance` field added.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let env = Envelope {
            provenance: &self.provenance,
            body: value,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        let path = self.dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Dummy {
        accuracy: f64,
    }

    #[test]
    fn artifacts_embed_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let em = Emitter::new(dir.path().join("nested"), Provenance::new("abc123", 7)).unwrap();
        let p = em
            .csv("t.csv", |w| {
                writeln!(w, "a,b")?;
                writeln!(w, "1,2")
            })
            .unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# memrc {FORMAT_VERSION} config=abc123 seed=7"));
        assert_eq!(&lines[1..], ["a,b", "1,2"]);

        let p = em.json("m.json", &Dummy { accuracy: 0.5 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["accuracy"], 0.5);
        assert_eq!(v["provenance"]["config_hash"], "abc123");
        assert_eq!(v["provenance"]["seed"], 7);
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
