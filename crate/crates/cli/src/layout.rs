//! Fixed shape of one experiment directory.
//!
//! Every command writes into the same tree: `snapshot/` for the prepared
//! dataset, `models/` for trained parameters, `attacks/` for sweep CSVs,
//! `ganrl/` for generative-attack artifacts, and `reports/` for the JSON
//! and CSV summaries. `run.log` collects wall-clock lines so the report
//! files themselves stay byte-identical across same-seed re-runs, and a
//! lock file keeps two commands from interleaving writes.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use advclaim_core::error::{Error, Result};

const LOCK_NAME: &str = ".advclaim.lock";

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates the whole tree; safe to call repeatedly.
    pub fn ensure(&self) -> Result<()> {
        for dir in [
            self.root.clone(),
            self.root.join("snapshot"),
            self.root.join("models"),
            self.root.join("attacks"),
            self.root.join("ganrl"),
            self.root.join("reports"),
        ] {
            std::fs::create_dir_all(&dir)
                .map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        Ok(())
    }

    pub fn snapshot_file(&self) -> PathBuf {
        self.root.join("snapshot").join("dataset.json")
    }

    pub fn model_file(&self, model_id: &str) -> PathBuf {
        self.root.join("models").join(format!("{model_id}.json"))
    }

    pub fn attack_csv(&self, model_id: &str, attack: &str) -> PathBuf {
        self.root
            .join("attacks")
            .join(format!("{model_id}__{attack}.csv"))
    }

    /// Per-target artifact directory of the generative attack.
    pub fn ganrl_dir(&self, target: &str) -> PathBuf {
        self.root.join("ganrl").join(target)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn run_log(&self) -> PathBuf {
        self.root.join("run.log")
    }

    fn lock_path(&self) -> PathBuf {
        self.root.join(LOCK_NAME)
    }

    /// Claims exclusive write access to this directory for one command.
    pub fn acquire_lock(&self) -> Result<LockGuard> {
        let path = self.lock_path();
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Config(format!(
                    "{} exists: another command is writing to this directory \
                     (delete the file if that run crashed)",
                    path.display()
                )))
            }
            Err(e) => Err(Error::io(path.display().to_string(), e)),
        }
    }

    /// Appends one wall-clock line; failures here must not fail the run the
    /// line describes, so they are reported on stderr instead.
    pub fn log_run(&self, command: &str, config_hash: &str, seed: u64, status: &str, elapsed_ms: u128) {
        let unix_secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let line = format!(
            "ts={unix_secs} command={command} config={} seed={seed} status={status} elapsed_ms={elapsed_ms}\n",
            &config_hash[..config_hash.len().min(12)]
        );
        let path = self.run_log();
        let written = std::fs::OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .and_then(|mut f| std::io::Write::write_all(&mut f, line.as_bytes()));
        if let Err(e) = written {
            eprintln!("warning: could not append to {}: {e}", path.display());
        }
    }
}

/// Held for the duration of one command; dropping it releases the lock.
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        if let Err(e) = std::fs::remove_file(&self.path) {
            eprintln!("warning: could not remove {}: {e}", self.path.display());
        }
    }
}
