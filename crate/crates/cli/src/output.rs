//! All-or-nothing output directories.
//!
//! Files are written into a hidden staging directory next to their final
//! location and moved into place only once the whole command has succeeded,
//! so a failed run leaves the output directory as it was.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use tempfile::TempDir;

use crate::manifest::{sha256_file, OutputEntry, RunInputs, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.json";

pub struct StagedOutput {
    out: PathBuf,
    staging: TempDir,
    inputs: RunInputs,
    hash: String,
    files: Vec<String>,
    started: Instant,
}

impl StagedOutput {
    pub fn new(out: &Path, inputs: RunInputs) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".thermopinn-staging-")
            .tempdir_in(out)
            .with_context(|| format!("creating a staging directory in {}", out.display()))?;
        let hash = inputs.hash();
        Ok(StagedOutput {
            out: out.to_path_buf(),
            staging,
            inputs,
            hash,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Staging path for `name`, registered as an output.
    pub fn path(&mut self, name: &str) -> anyhow::Result<PathBuf> {
        let p = self.staging.path().join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(p)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let p = self.path(name)?;
        std::fs::write(&p, bytes).with_context(|| format!("writing {name}"))?;
        Ok(())
    }

    /// CSV body preceded by a comment line carrying the manifest hash.
    pub fn write_csv(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let p = self.path(name)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&p)?);
        writeln!(f, "# manifest={}", self.hash)?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Moves every staged file into the output directory and writes the
    /// manifest last.
    pub fn commit(self) -> anyhow::Result<RunManifest> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let staged = self.staging.path().join(name);
            outputs.push(OutputEntry {
                path: name.clone(),
                sha256: sha256_file(&staged)?,
                bytes: std::fs::metadata(&staged)?.len(),
            });
        }
        let manifest = RunManifest {
            hash: self.hash.clone(),
            inputs: self.inputs.clone(),
            outputs,
            created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.staging.path().join(MANIFEST_FILE), json)?;

        for name in self.files.iter().map(String::as_str).chain([MANIFEST_FILE]) {
            let dest = self.out.join(name);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::rename(self.staging.path().join(name), &dest)
                .with_context(|| format!("moving {name} into {}", self.out.display()))?;
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use thermopinn::ProblemConfig;

    #[test]
    fn dropped_stage_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = StagedOutput::new(dir.path(), RunInputs::new("fdm", &ProblemConfig::default())).unwrap();
            s.write_csv("a.csv", "x\n1\n").unwrap();
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_moves_files_and_lists_them() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = StagedOutput::new(dir.path(), RunInputs::new("fdm", &ProblemConfig::default())).unwrap();
        let hash = s.hash().to_string();
        s.write_csv("a.csv", "x\n1\n").unwrap();
        s.write("sub/b.bin", &[1, 2, 3]).unwrap();
        let m = s.commit().unwrap();
        let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(a, format!("# manifest={hash}\nx\n1\n"));
        assert_eq!(std::fs::read(dir.path().join("sub/b.bin")).unwrap(), [1, 2, 3]);
        assert_eq!(m.outputs.len(), 2);
        assert_eq!(m.outputs[1].bytes, 3);
        let loaded = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded.hash, hash);
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 3, "{names:?}");
    }
}
