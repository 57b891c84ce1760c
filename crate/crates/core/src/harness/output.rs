use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::limits::Verdict;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// A value that can sit in a CSV cell. Floats use 17 significant digits.
pub trait CsvField {
    fn write_field(&self, out: &mut String);
}

impl CsvField for f64 {
    fn write_field(&self, out: &mut String) {
        let _ = write!(out, "{self:.16e}");
    }
}

macro_rules! plain_field {
    ($($t:ty),*) => {$(
        impl CsvField for $t {
            fn write_field(&self, out: &mut String) {
                let _ = write!(out, "{self}");
            }
        }
    )*};
}
plain_field!(u64, i64, usize, bool, &str, String);

impl CsvField for Verdict {
    fn write_field(&self, out: &mut String) {
        out.push_str(verdict_label(*self));
    }
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::OutsideRegime => "OUTSIDE-REGIME",
        Verdict::Observational => "OBSERVATIONAL",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub check: String,
    pub verdict: String,
}

impl VerdictEntry {
    pub fn failed(&self) -> bool {
        self.verdict == verdict_label(Verdict::Fail)
    }
}

pub(crate) type NamedFile = (String, Vec<u8>);

/// Everything an experiment produces, held in memory until the run succeeds.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<NamedFile>,
    reports: serde_json::Map<String, serde_json::Value>,
    verdicts: Vec<VerdictEntry>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a CSV file; `rows` are already-joined lines without terminator.
    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) {
        let mut body = String::with_capacity(header.len() + 1);
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn report<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.reports
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn verdict(&mut self, check: impl Into<String>, v: Verdict) {
        self.verdicts.push(VerdictEntry {
            check: check.into(),
            verdict: verdict_label(v).to_string(),
        });
    }

    pub fn verdicts(&self) -> &[VerdictEntry] {
        &self.verdicts
    }

    pub fn file_names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }

    pub(crate) fn into_parts(
        self,
    ) -> (
        Vec<NamedFile>,
        serde_json::Map<String, serde_json::Value>,
        Vec<VerdictEntry>,
    ) {
        (self.files, self.reports, self.verdicts)
    }
}

/// Joins fields with commas.
pub fn row(fields: &[&dyn CsvField]) -> String {
    let mut s = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        f.write_field(&mut s);
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub config_sha256: String,
    /// Canonical `key = value` text; loading it reproduces the run.
    pub config: String,
    pub files: Vec<FileRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: not a manifest: {e}", path.display())))
    }
}

/// Writes files into `dir`; on any failure removes what this call created.
pub(crate) struct StagedWrite {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    done: bool,
}

impl StagedWrite {
    pub(crate) fn begin(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            done: false,
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if name.contains('/') || name.contains('\\') || name.starts_with('.') {
            return Err(Error::InvalidArgument(format!(
                "bad output file name '{name}'"
            )));
        }
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        self.written.push(tmp.clone());
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        self.written.pop();
        self.written.push(path.clone());
        Ok(path)
    }

    pub(crate) fn commit(mut self) -> Vec<PathBuf> {
        self.done = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for StagedWrite {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
