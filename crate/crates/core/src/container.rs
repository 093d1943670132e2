//! Versioned JSON containers and the run manifest echoed into output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::kernel_bank::HydraConfig;
use crate::{HydraError, Result};

pub const CONTAINER_VERSION: u32 = 1;

/// What produced a file: tool version, resolved configuration and any
/// extra settings needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<HydraConfig>,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config: Option<HydraConfig>) -> Self {
        Self {
            tool: "hydra".into(),
            version: crate::VERSION.into(),
            command: command.into(),
            config,
            settings: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.settings.insert(key.into(), value.to_string());
        self
    }

    /// `#`-prefixed lines for the top of a CSV file.
    pub fn header_lines(&self) -> String {
        format!(
            "# {} {}\n# manifest: {}\n",
            self.tool,
            self.version,
            serde_json::to_string(self).expect("manifest serializes")
        )
    }

    /// Recover a manifest from CSV header lines, if present.
    pub fn from_header(text: &str) -> Option<Manifest> {
        text.lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# manifest: "))
            .and_then(|json| serde_json::from_str(json).ok())
    }
}

/// `{ format, version, manifest, payload }` on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container<T> {
    pub format: String,
    pub version: u32,
    pub manifest: Option<Manifest>,
    pub payload: T,
}

impl<T: Serialize + DeserializeOwned> Container<T> {
    pub fn new(format: &str, manifest: Option<Manifest>, payload: T) -> Self {
        Self {
            format: format.into(),
            version: CONTAINER_VERSION,
            manifest,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Read a container, checking its format tag and version.
    pub fn read(path: &Path, format: &str) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |message: String| HydraError::Container {
            path: path.to_owned(),
            message,
        };
        let container: Self = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if container.format != format {
            return Err(bad(format!(
                "expected format {format:?}, found {:?}",
                container.format
            )));
        }
        if container.version != CONTAINER_VERSION {
            return Err(bad(format!("unsupported version {}", container.version)));
        }
        Ok(container)
    }
}

pub const BANK_FORMAT: &str = "hydra-kernel-bank";
pub const FEATURES_FORMAT: &str = "hydra-features";
pub const MODEL_FORMAT: &str = "hydra-model";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_bank::KernelBank;

    #[test]
    fn manifest_survives_csv_header() {
        let m = Manifest::new("transform", Some(HydraConfig::default())).with("threads", 1);
        let text = format!("{}a,b\n1,2\n", m.header_lines());
        assert_eq!(Manifest::from_header(&text), Some(m));
    }

    #[test]
    fn bank_container_round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.json");
        let bank = KernelBank::generate(&HydraConfig { k: 2, g: 2, seed: 5, ..Default::default() }, 30).unwrap();
        Container::new(BANK_FORMAT, None, bank.clone()).write(&path).unwrap();
        let back = Container::<KernelBank>::read(&path, BANK_FORMAT).unwrap();
        assert_eq!(back.payload, bank);
        assert!(Container::<KernelBank>::read(&path, MODEL_FORMAT).is_err());

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            Container::<KernelBank>::read(&path, BANK_FORMAT),
            Err(HydraError::Container { .. })
        ));
    }
}
