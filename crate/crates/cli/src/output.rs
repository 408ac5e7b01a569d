//! Files written into the output directory, removed again if the command fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dynrf::{Error, Result};

use crate::manifest::{RunManifest, MANIFEST_FILE};

/// Tracks every file a command writes so that an abort leaves nothing behind.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    committed: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(Error::config("output", format!("`{name}` is not a plain file name")));
        }
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.written.push(name.to_string());
        Ok((path, BufWriter::new(file)))
    }

    /// Writes a CSV whose first line points at the manifest.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: ToString,
    {
        let (path, mut w) = self.open(name)?;
        let io = |e: std::io::Error| Error::io(path.display().to_string(), e);
        writeln!(w, "# manifest={MANIFEST_FILE}").map_err(io)?;
        let mut csv = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::io(path.display().to_string(), e.into());
        csv.write_record(header).map_err(err)?;
        for row in rows {
            csv.write_record(row.into_iter().map(|v| v.to_string())).map_err(err)?;
        }
        csv.flush().map_err(io)
    }

    pub fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let (path, mut w) = self.open(name)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Writes the manifest listing everything written so far and keeps the files.
    pub fn finish(mut self, mut manifest: RunManifest, started: std::time::Instant) -> Result<()> {
        manifest.outputs = self.written.clone();
        manifest.outputs.push(MANIFEST_FILE.to_string());
        manifest.duration_s = started.elapsed().as_secs_f64();
        let text = manifest.to_json()?;
        let (path, mut w) = self.open(MANIFEST_FILE)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for name in &self.written {
                let _ = std::fs::remove_file(self.dir.join(name));
            }
        }
    }
}
