//! Run manifests written next to each command's primary output.

use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VizError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Wall-clock fields. Kept in their own object so two runs of the same
/// command differ only here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Every parameter after defaults and drawn seeds are resolved.
    pub params: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Command-specific extras, such as the sensor positions of a scan.
    pub details: serde_json::Value,
    pub timing: Timing,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| VizError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| VizError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `<path>.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Collects manifest fields while a command runs.
pub struct Recorder {
    command: String,
    started: Instant,
    started_unix_ms: u64,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn start(command: &str) -> Recorder {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Recorder {
            command: command.to_string(),
            started: Instant::now(),
            started_unix_ms,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes the manifest next to `primary` and returns its path.
    pub fn finish(
        self,
        primary: &Path,
        seed: Option<u64>,
        params: serde_json::Value,
        details: serde_json::Value,
    ) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            version: crate::VERSION.to_string(),
            seed,
            params,
            inputs: self.inputs,
            outputs: self.outputs,
            details,
            timing: Timing {
                started_unix_ms: self.started_unix_ms,
                seconds: self.started.elapsed().as_secs_f64(),
            },
        };
        let path = manifest_path(primary);
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| VizError::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| VizError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| VizError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| VizError::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/a.ply")), PathBuf::from("out/a.ply.manifest.json"));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let primary = dir.path().join("x.ply");
        let mut rec = Recorder::start("scan");
        rec.output(&primary);
        let path = rec
            .finish(&primary, Some(3), serde_json::json!({"n": 1}), serde_json::Value::Null)
            .unwrap();
        let m: RunManifest = read_json(&path).unwrap();
        assert_eq!(m.command, "scan");
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.params["n"], 1);
        assert!(m.timing.seconds >= 0.0);
    }
}
