//! Output files: every file carries the tool version and the config hash.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "conetrace";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Output {
    dir: PathBuf,
    config_hash: String,
    verbose: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    command: &'a str,
    result: &'a T,
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Output {
    pub fn new(dir: PathBuf, config_hash: String, verbose: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        Ok(Output { dir, config_hash, verbose })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[{TOOL}] {}", msg.as_ref());
        }
    }

    pub fn write_json<T: Serialize>(&self, name: &str, command: &str, result: &T) -> Result<PathBuf, CliError> {
        let env = Envelope { tool: TOOL, version: VERSION, config_sha256: &self.config_hash, command, result };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.log(format!("wrote {}", path.display()));
        Ok(path)
    }

    /// Opens `name` with a leading `#` metadata line and hands the writer to `body`.
    pub fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut std::fs::File) -> conetrace::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut f = std::fs::File::create(&path).map_err(io_err)?;
        writeln!(f, "# {TOOL} {VERSION} config_sha256={}", self.config_hash).map_err(io_err)?;
        body(&mut f)?;
        self.log(format!("wrote {}", path.display()));
        Ok(path)
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
