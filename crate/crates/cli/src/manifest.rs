use std::fmt::Write as _;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fnv::FnvHasher;

/// FNV-1a 64 over the file contents.
pub fn file_digest(path: &Path) -> Result<u64> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut h = FnvHasher::default();
    h.write(&bytes);
    Ok(h.finish())
}

/// Everything needed to reproduce a run: subcommand, resolved flags, seed,
/// input digests and tool version.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub flags: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub inputs: Vec<(String, u64)>,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            flags: Vec::new(),
            seed: None,
            inputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.push((name.to_string(), value.to_string()));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        let digest = file_digest(path)?;
        self.inputs.push((path.display().to_string(), digest));
        Ok(self)
    }

    /// The manifest as `# `-prefixed lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sketchkit {}", self.version);
        let _ = writeln!(out, "# subcommand: {}", self.subcommand);
        for (k, v) in &self.flags {
            let _ = writeln!(out, "# flag --{k} {v}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "# seed: {seed}");
        }
        for (path, digest) in &self.inputs {
            let _ = writeln!(out, "# input {path} fnv1a64={digest:016x}");
        }
        out
    }

    /// `<output>.manifest.txt` next to a binary output.
    pub fn write_sidecar(&self, output: &Path) -> Result<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.txt");
        let path = PathBuf::from(name);
        fs::write(&path, self.render()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
