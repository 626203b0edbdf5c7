use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Curated,
    Models,
    Results,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Raw, Stage::Curated, Stage::Models, Stage::Results, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Curated => "curated",
            Stage::Models => "models",
            Stage::Results => "results",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::UnknownStage(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
    /// Unix seconds; 0 in stable mode.
    pub created_at: u64,
    pub step: String,
    pub config_hash: String,
}

/// Entries keyed and ordered by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl StageManifest {
    pub fn get(&self, file: &str) -> Option<&ManifestEntry> {
        self.entries.get(file)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

/// Create the five stage directories and empty manifests. Existing stages
/// and manifests are left untouched.
pub fn init_workspace(root: &Path) -> Result<Workspace> {
    if root.exists() && !root.is_dir() {
        return Err(PipelineError::PermissionDenied {
            path: root.to_path_buf(),
            reason: "exists and is not a directory".into(),
        });
    }
    let ws = Workspace {
        root: root.to_path_buf(),
    };
    for stage in Stage::ALL {
        let dir = ws.stage_dir(stage);
        fs::create_dir_all(&dir).map_err(|e| denied_or_io(&dir, e))?;
        let manifest = ws.manifest_path(stage);
        if !manifest.exists() {
            ws.write_manifest(stage, &StageManifest::default())?;
        }
    }
    Ok(ws)
}

fn denied_or_io(path: &Path, e: io::Error) -> PipelineError {
    match e.kind() {
        io::ErrorKind::PermissionDenied | io::ErrorKind::AlreadyExists | io::ErrorKind::NotADirectory => {
            PipelineError::PermissionDenied {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }
        }
        _ => PipelineError::io(path, e),
    }
}

impl Workspace {
    /// Open an initialized workspace.
    pub fn open(root: &Path) -> Result<Self> {
        let ws = Workspace {
            root: root.to_path_buf(),
        };
        for stage in Stage::ALL {
            if !ws.manifest_path(stage).is_file() {
                return Err(PipelineError::NotAWorkspace(root.to_path_buf()));
            }
        }
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    pub fn path(&self, stage: Stage, file: &str) -> PathBuf {
        self.stage_dir(stage).join(file)
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.path(stage, MANIFEST_FILE)
    }

    pub fn manifest(&self, stage: Stage) -> Result<StageManifest> {
        let path = self.manifest_path(stage);
        let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Manifest {
            stage,
            message: e.to_string(),
        })
    }

    pub fn write_manifest(&self, stage: Stage, manifest: &StageManifest) -> Result<()> {
        let path = self.manifest_path(stage);
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    }

    /// Every manifest entry exists and matches its hash, and every file in
    /// the stage directory is listed.
    pub fn verify(&self, stage: Stage) -> Result<()> {
        let manifest = self.manifest(stage)?;
        let bad = |message: String| PipelineError::Manifest { stage, message };
        for (name, entry) in &manifest.entries {
            let path = self.path(stage, name);
            if !path.is_file() {
                return Err(bad(format!("`{name}` is listed but missing")));
            }
            if sha256_file(&path)? != entry.sha256 {
                return Err(bad(format!("`{name}` does not match its recorded hash")));
            }
        }
        for name in self.stage_files(stage)? {
            if !manifest.entries.contains_key(&name) {
                return Err(bad(format!("`{name}` is not listed in the manifest")));
            }
        }
        Ok(())
    }

    /// Artifact file names in a stage, excluding the manifest, sorted.
    pub fn stage_files(&self, stage: Stage) -> Result<Vec<String>> {
        let dir = self.stage_dir(stage);
        let mut names = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))? {
            let entry = entry.map_err(|e| PipelineError::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != MANIFEST_FILE && entry.path().is_file() {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }

    /// Remove every artifact and reset every manifest.
    pub fn clear(&self) -> Result<()> {
        for stage in Stage::ALL {
            for name in self.stage_files(stage)? {
                let path = self.path(stage, &name);
                fs::remove_file(&path).map_err(|e| PipelineError::io(&path, e))?;
            }
            self.write_manifest(stage, &StageManifest::default())?;
        }
        Ok(())
    }

    /// Take the exclusive run lock; released when the guard drops.
    pub fn lock(&self) -> Result<WorkspaceLock> {
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WorkspaceLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(PipelineError::io(&path, e)),
        }
    }
}

#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_creates_stages_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ws");
        let ws = init_workspace(&root).unwrap();
        for stage in Stage::ALL {
            assert!(ws.stage_dir(stage).is_dir());
            assert!(ws.manifest(stage).unwrap().entries.is_empty());
        }
        fs::write(ws.path(Stage::Raw, "a.csv"), "x\n1\n").unwrap();
        let mut m = StageManifest::default();
        m.entries.insert(
            "a.csv".into(),
            ManifestEntry {
                file: "a.csv".into(),
                bytes: 4,
                sha256: sha256_file(&ws.path(Stage::Raw, "a.csv")).unwrap(),
                created_at: 0,
                step: "ingest".into(),
                config_hash: String::new(),
            },
        );
        ws.write_manifest(Stage::Raw, &m).unwrap();
        let again = init_workspace(&root).unwrap();
        assert_eq!(again.manifest(Stage::Raw).unwrap(), m);
        again.verify(Stage::Raw).unwrap();
    }

    #[test]
    fn regular_file_root_is_denied() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("file");
        fs::write(&root, "x").unwrap();
        assert!(matches!(init_workspace(&root), Err(PipelineError::PermissionDenied { .. })));
    }

    #[test]
    fn verify_catches_tampering_and_strays() {
        let dir = tempfile::tempdir().unwrap();
        let ws = init_workspace(dir.path()).unwrap();
        fs::write(ws.path(Stage::Results, "stray.txt"), "x").unwrap();
        assert!(ws.verify(Stage::Results).is_err());
        ws.clear().unwrap();
        ws.verify(Stage::Results).unwrap();
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let ws = init_workspace(dir.path()).unwrap();
        let guard = ws.lock().unwrap();
        assert!(matches!(ws.lock(), Err(PipelineError::Locked(_))));
        drop(guard);
        ws.lock().unwrap();
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("lake".parse::<Stage>().is_err());
    }
}
