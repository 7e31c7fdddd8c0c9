use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// The full argument vector after the program name.
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[OsString], seed: Option<u64>, inputs: Vec<InputDigest>, seconds: f64) -> Self {
        RunManifest {
            command: command.to_string(),
            args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: seconds,
            inputs,
        }
    }

    /// `<out>.manifest.json`
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

pub fn digest(path: &Path, bytes: &[u8]) -> InputDigest {
    InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(bytes)) }
}
