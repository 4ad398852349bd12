//! Config file loading and knob resolution.
//!
//! The config file is a single JSON object with one flat section per
//! command, keyed by the command name:
//!
//! ```json
//! { "orbit": { "duration": 2.0, "dt": 0.005 },
//!   "surgery": { "variant": "cylinder", "witnesses": 56 } }
//! ```
//!
//! Resolution order for every knob: explicit CLI flag, then the config
//! section value under the same (kebab-case) key, then the built-in
//! default. Every resolved knob is echoed into each artifact the command
//! writes, so outputs are self-describing.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use wildarc_core::export::ConfigEcho;
use wildarc_core::Error as CoreError;

use crate::args::SharedArgs;

/// Why a command failed, carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: a certification or construction did not pass.
    Certification(String),
    /// Exit 3: the filesystem got in the way.
    Io(String),
    /// Exit 4: the config file or the flags don't make sense.
    BadConfig(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Certification(_) => 2,
            Failure::Io(_) => 3,
            Failure::BadConfig(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Certification(m) | Failure::Io(m) | Failure::BadConfig(m) => m,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(io) => Failure::Io(io.to_string()),
            other => Failure::Certification(other.to_string()),
        }
    }
}

pub fn bad(msg: impl Into<String>) -> Failure {
    Failure::BadConfig(msg.into())
}

pub fn cert_fail(msg: impl Into<String>) -> Failure {
    Failure::Certification(msg.into())
}

/// Shorthand for knob validation.
pub fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(bad(msg))
    }
}

const COMMAND_SECTIONS: [&str; 9] = [
    "build-arc",
    "verify-arc",
    "flow-field",
    "fixed-points",
    "orbit",
    "separatrix",
    "pixton",
    "surgery",
    "export",
];

fn load_file(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| bad(format!("config {} is not valid JSON: {e}", path.display())))?;
    let serde_json::Value::Object(map) = value else {
        return Err(bad(format!(
            "config {} must be a JSON object with per-command sections",
            path.display()
        )));
    };
    for key in map.keys() {
        if !COMMAND_SECTIONS.contains(&key.as_str()) {
            return Err(bad(format!(
                "config section '{key}' is not a command (expected one of: {})",
                COMMAND_SECTIONS.join(", ")
            )));
        }
    }
    Ok(map)
}

/// Resolved run settings for one command: output directory, seed, the
/// command's config section, and the accumulated echo.
pub struct Settings {
    pub out: PathBuf,
    pub seed: u64,
    command: &'static str,
    section: serde_json::Map<String, serde_json::Value>,
    consulted: BTreeSet<String>,
    echo: Vec<(String, String)>,
}

impl Settings {
    pub fn new(shared: &SharedArgs, command: &'static str) -> Result<Self, Failure> {
        let file = match &shared.config {
            Some(path) => load_file(path)?,
            None => serde_json::Map::new(),
        };
        let section = match file.get(command) {
            Some(serde_json::Value::Object(map)) => map.clone(),
            Some(_) => {
                return Err(bad(format!(
                    "config section '{command}' must be a flat JSON object"
                )))
            }
            None => serde_json::Map::new(),
        };
        let mut s = Settings {
            out: PathBuf::new(),
            seed: 0,
            command,
            section,
            consulted: BTreeSet::new(),
            echo: vec![("command".to_string(), command.to_string())],
        };
        let out = match (&shared.out, s.raw("out")) {
            (Some(dir), _) => dir.clone(),
            (None, Some(v)) => PathBuf::from(v.as_str().ok_or_else(|| {
                bad(format!("config key 'out' in section '{command}' must be a string"))
            })?),
            (None, None) => PathBuf::from("out"),
        };
        s.out = out;
        s.seed = s.u64_knob("seed", shared.seed, 0)?;
        Ok(s)
    }

    fn raw(&mut self, key: &str) -> Option<serde_json::Value> {
        self.consulted.insert(key.to_string());
        self.section.get(key).cloned()
    }

    fn type_err(&self, key: &str, want: &str) -> Failure {
        bad(format!(
            "config key '{key}' in section '{}' must be {want}",
            self.command
        ))
    }

    pub fn f64_knob(&mut self, key: &str, cli: Option<f64>, default: f64) -> Result<f64, Failure> {
        let v = match (cli, self.raw(key)) {
            (Some(c), _) => c,
            (None, Some(raw)) => raw.as_f64().ok_or_else(|| self.type_err(key, "a number"))?,
            (None, None) => default,
        };
        self.echo.push((key.to_string(), format!("{v}")));
        Ok(v)
    }

    pub fn u64_knob(&mut self, key: &str, cli: Option<u64>, default: u64) -> Result<u64, Failure> {
        let v = match (cli, self.raw(key)) {
            (Some(c), _) => c,
            (None, Some(raw)) => raw
                .as_u64()
                .ok_or_else(|| self.type_err(key, "a non-negative integer"))?,
            (None, None) => default,
        };
        self.echo.push((key.to_string(), format!("{v}")));
        Ok(v)
    }

    pub fn usize_knob(
        &mut self,
        key: &str,
        cli: Option<usize>,
        default: usize,
    ) -> Result<usize, Failure> {
        let v = self.u64_knob(key, cli.map(|c| c as u64), default as u64)?;
        Ok(v as usize)
    }

    pub fn u32_knob(&mut self, key: &str, cli: Option<u32>, default: u32) -> Result<u32, Failure> {
        let v = self.u64_knob(key, cli.map(u64::from), u64::from(default))?;
        u32::try_from(v).map_err(|_| self.type_err(key, "a 32-bit integer"))
    }

    pub fn str_knob(
        &mut self,
        key: &str,
        cli: Option<&str>,
        default: &str,
    ) -> Result<String, Failure> {
        let v = match (cli, self.raw(key)) {
            (Some(c), _) => c.to_string(),
            (None, Some(raw)) => raw
                .as_str()
                .ok_or_else(|| self.type_err(key, "a string"))?
                .to_string(),
            (None, None) => default.to_string(),
        };
        self.echo.push((key.to_string(), v.clone()));
        Ok(v)
    }

    pub fn opt_str_knob(
        &mut self,
        key: &str,
        cli: Option<&str>,
    ) -> Result<Option<String>, Failure> {
        let v = match (cli, self.raw(key)) {
            (Some(c), _) => Some(c.to_string()),
            (None, Some(raw)) => Some(
                raw.as_str()
                    .ok_or_else(|| self.type_err(key, "a string"))?
                    .to_string(),
            ),
            (None, None) => None,
        };
        self.echo.push((
            key.to_string(),
            v.clone().unwrap_or_else(|| "none".to_string()),
        ));
        Ok(v)
    }

    /// Boolean switch: true if the flag was passed or the section sets it.
    pub fn flag_knob(&mut self, key: &str, cli: bool) -> Result<bool, Failure> {
        let file = match self.raw(key) {
            Some(raw) => raw
                .as_bool()
                .ok_or_else(|| self.type_err(key, "a boolean"))?,
            None => false,
        };
        let v = cli || file;
        self.echo.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Reject section keys no knob consulted — almost always a typo.
    pub fn finish_knobs(&self) -> Result<(), Failure> {
        for key in self.section.keys() {
            if !self.consulted.contains(key) {
                return Err(bad(format!(
                    "unknown config key '{key}' in section '{}'",
                    self.command
                )));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> ConfigEcho {
        self.echo.clone()
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}
