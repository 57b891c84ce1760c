use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiments::ExperimentRegistry;
use super::output::{
    sha256_hex, Artifacts, FileRecord, Manifest, StagedWrite, VerdictEntry, MANIFEST_FILE,
    SUMMARY_FILE,
};
use crate::{Error, Result};

pub const SEED_RULE: &str =
    "path i uses splitmix64_finalize(master_seed ^ (i + 1) * 0x9E3779B97F4A7C15) as its ChaCha8 seed";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub verdicts: Vec<VerdictEntry>,
}

impl RunOutcome {
    pub fn any_failed(&self) -> bool {
        self.verdicts.iter().any(VerdictEntry::failed)
    }

    /// Process exit status: nonzero iff some PASS/FAIL check failed.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.any_failed())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    master_seed: u64,
    verdicts: &'a [VerdictEntry],
    reports: serde_json::Map<String, serde_json::Value>,
}

/// Runs `cfg.experiment` with the builtin registry in the current thread pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_with_registry(&ExperimentRegistry::builtin(), cfg)
}

/// As [`run_experiment`], inside a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    match threads {
        None => run_experiment(cfg),
        Some(0) => Err(Error::Config("threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| run_experiment(cfg))
        }
    }
}

pub fn run_with_registry(
    registry: &ExperimentRegistry,
    cfg: &ExperimentConfig,
) -> Result<RunOutcome> {
    let experiment = registry.get(&cfg.experiment)?;
    log::info!(
        "running {} into {}",
        experiment.name(),
        cfg.output_dir.display()
    );
    let mut artifacts = Artifacts::new();
    experiment.run(cfg, &mut artifacts)?;
    let (files, reports, verdicts) = artifacts.into_parts();

    let summary = Summary {
        experiment: experiment.name(),
        master_seed: cfg.master_seed,
        verdicts: &verdicts,
        reports,
    };
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)?;
    summary_bytes.push(b'\n');

    let config_text = cfg.canonical_text();
    let mut manifest = Manifest {
        tool: "ml-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: experiment.name().into(),
        master_seed: cfg.master_seed,
        seed_rule: SEED_RULE.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: config_text,
        files: Vec::new(),
    };

    let mut staged = StagedWrite::begin(&cfg.output_dir)?;
    for (name, bytes) in files
        .iter()
        .chain(std::iter::once(&(SUMMARY_FILE.to_string(), summary_bytes)))
    {
        staged.write(name, bytes)?;
        manifest.files.push(FileRecord {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    staged.write(MANIFEST_FILE, &manifest_bytes)?;
    Ok(RunOutcome {
        out_dir: cfg.output_dir.clone(),
        files: staged.commit(),
        verdicts,
    })
}

/// Loads the config recorded in a manifest, pointed at `out_dir`.
pub fn config_from_manifest(manifest: &Path, out_dir: &Path) -> Result<ExperimentConfig> {
    let m = Manifest::read(manifest)?;
    if sha256_hex(m.config.as_bytes()) != m.config_sha256 {
        return Err(Error::Config(format!(
            "{}: config hash mismatch, manifest was edited",
            manifest.display()
        )));
    }
    let overrides = vec![("output_dir".to_string(), out_dir.display().to_string())];
    let cfg = ExperimentConfig::load(Some(&m.config), std::iter::empty(), &overrides)?;
    if cfg.experiment != m.experiment {
        return Err(Error::Config(
            "manifest experiment does not match its config".into(),
        ));
    }
    Ok(cfg)
}

/// Re-runs the experiment recorded in `manifest` into `out_dir`.
pub fn rerun_from_manifest(
    manifest: &Path,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    run_experiment_with_threads(&config_from_manifest(manifest, out_dir)?, threads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path, experiment: &str) -> ExperimentConfig {
        let text = format!(
            "experiment = {experiment}\nhorizon = 2000\ncheckpoints = 200,2000\npaths = 64\noutput_dir = {}\n",
            dir.display()
        );
        ExperimentConfig::load(Some(&text), std::iter::empty(), &[]).unwrap()
    }

    #[test]
    fn verify_ml_writes_contract_files() {
        let root = tempfile::tempdir().unwrap();
        let out = run_experiment(&small(&root.path().join("a"), "verify-ml")).unwrap();
        for f in ["summary.json", "ml_checkpoints.csv", "manifest.json"] {
            assert!(out.out_dir.join(f).is_file(), "{f}");
        }
        let m = Manifest::read(&out.out_dir.join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.master_seed, 42);
        assert!(m.files.iter().any(|f| f.name == "ml_checkpoints.csv"));
        let csv = std::fs::read_to_string(out.out_dir.join("ml_checkpoints.csv")).unwrap();
        assert!(csv.starts_with("n,a_n,ks,mean,second_moment\n200,"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn failure_leaves_no_partial_output() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("b");
        let mut cfg = small(&dir, "verify-ml");
        cfg.checkpoints = vec![200];
        assert!(run_experiment(&cfg).is_err());
        assert!(!dir.exists());
        let cfg = small(&dir, "no-such-experiment");
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::UnknownName { .. })
        ));
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let root = tempfile::tempdir().unwrap();
        let mut bodies = Vec::new();
        for threads in [1usize, 3] {
            let mut cfg = small(&root.path().join(format!("t{threads}")), "verify-ml");
            cfg.paths = 300;
            let out = run_experiment_with_threads(&cfg, Some(threads)).unwrap();
            let mut files: Vec<(String, Vec<u8>)> = out
                .files
                .iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            bodies.push(files);
        }
        assert_eq!(bodies[0], bodies[1]);
    }

    #[test]
    fn edited_manifest_rejected() {
        let root = tempfile::tempdir().unwrap();
        let out = run_experiment(&small(&root.path().join("c"), "simulate")).unwrap();
        let path = out.out_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("paths = 64", "paths = 65");
        std::fs::write(&path, text).unwrap();
        assert!(config_from_manifest(&path, root.path()).is_err());
    }
}
