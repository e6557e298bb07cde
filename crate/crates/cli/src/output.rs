//! Content-addressed artifact writing. File names carry a run id hashed
//! from the command and its resolved parameters (worker count excluded), and
//! an existing file is never modified.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub struct RunOutput {
    dir: PathBuf,
    stem: String,
}

impl RunOutput {
    pub fn new(dir: &Path, command: &str, params: &BTreeMap<&str, String>) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        for (k, v) in params {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        let digest = h.finalize();
        let id: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        RunOutput {
            dir: dir.to_path_buf(),
            stem: format!("{command}-{id}"),
        }
    }

    /// Writes `<command>-<id>[-part].<ext>`. An identical existing file is
    /// left alone; a differing one gets a numbered sibling instead.
    pub fn write(&self, part: Option<&str>, ext: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let base = match part {
            Some(p) => format!("{}-{p}", self.stem),
            None => self.stem.clone(),
        };
        let mut path = self.dir.join(format!("{base}.{ext}"));
        let mut n = 1;
        loop {
            match std::fs::read(&path) {
                Ok(existing) if existing == bytes => return Ok(path),
                Ok(_) => {
                    path = self.dir.join(format!("{base}.{n}.{ext}"));
                    n += 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    std::fs::write(&path, bytes)?;
                    return Ok(path);
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn write_json<T: serde::Serialize>(
        &self,
        part: Option<&str>,
        value: &T,
    ) -> std::io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(part, "json", text.as_bytes())
    }
}
