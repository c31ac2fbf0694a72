//! Provenance record written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Not covered by the determinism guarantee.
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Files under `path` (or `path` itself), sorted.
fn expand(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
        let p = entry?.path();
        // Manifests carry wall time and are not content.
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name == "manifest.json" || name.ends_with(".manifest.json") {
            continue;
        }
        out.extend(expand(&p)?);
    }
    out.sort();
    Ok(out)
}

fn digests(paths: &[PathBuf], skip: Option<&Path>) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for p in paths {
        for f in expand(p)? {
            if Some(f.as_path()) == skip {
                continue;
            }
            map.insert(f.display().to_string(), file_digest(&f)?);
        }
    }
    Ok(map)
}

pub struct ManifestBuilder {
    command: String,
    config_sha256: Option<String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: std::time::Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_sha256: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn config(&mut self, text: &str) -> &mut Self {
        self.config_sha256 = Some(sha256_hex(text.as_bytes()));
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    /// Hashes everything and writes the manifest to `dest`, which is
    /// excluded from its own output list.
    pub fn write(&self, dest: &Path) -> Result<RunManifest> {
        let m = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: self.command.clone(),
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            inputs: digests(&self.inputs, Some(dest))?,
            outputs: digests(&self.outputs, Some(dest))?,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&m)? + "\n";
        std::fs::write(dest, text).with_context(|| format!("writing {}", dest.display()))?;
        Ok(m)
    }
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            bail!("unsupported manifest schema version {} in {}", m.schema_version, path.display());
        }
        Ok(m)
    }

    /// Recomputes every recorded digest; relative paths are resolved
    /// against `base`, the directory the command ran in.
    pub fn verify(&self, base: &Path) -> Result<()> {
        for (path, digest) in self.inputs.iter().chain(&self.outputs) {
            let now = file_digest(&base.join(path))?;
            if &now != digest {
                bail!("digest mismatch for {path}");
            }
        }
        Ok(())
    }
}

/// Default manifest location: inside an output directory, or beside an
/// output file.
pub fn default_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "a").unwrap();
        std::fs::write(&output, "b").unwrap();
        let dest = default_path(&output);
        assert_eq!(dest, dir.path().join("out.txt.manifest.json"));
        let m = ManifestBuilder::new("test").seed(3).input(&input).output(&output).write(&dest).unwrap();
        let back = RunManifest::read(&dest).unwrap();
        assert_eq!(back, m);
        back.verify(Path::new("")).unwrap();
        assert_eq!(m.outputs.values().next().unwrap(), &sha256_hex(b"b"));
        std::fs::write(&output, "c").unwrap();
        assert!(back.verify(Path::new("")).is_err());
    }

    #[test]
    fn directory_outputs_skip_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.json"), "{}").unwrap();
        let dest = default_path(dir.path());
        ManifestBuilder::new("test").output(dir.path()).write(&dest).unwrap();
        let m = ManifestBuilder::new("test").output(dir.path()).write(&dest).unwrap();
        assert_eq!(m.outputs.len(), 1);
        RunManifest::read(&dest).unwrap().verify(Path::new("")).unwrap();
    }
}
