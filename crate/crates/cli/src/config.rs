//! Layered run configuration: built-in defaults, then the `--config` file,
//! then command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Default)]
pub struct Layer(Table);

impl Layer {
    pub fn new() -> Self {
        Layer::default()
    }

    /// Set `key` when `value` is present.
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> Result<&mut Self> {
        if let Some(v) = value {
            let v = Value::try_from(v).with_context(|| format!("flag for {key}"))?;
            self.0.insert(key.to_string(), v);
        }
        Ok(self)
    }
}

pub fn read_file(path: Option<&Path>) -> Result<Table> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Merge the layers and deserialize. A `kind` in the file must agree with
/// the subcommand.
pub fn resolve<T: DeserializeOwned>(defaults: Layer, file: Table, flags: Layer, kind: Option<&str>) -> Result<T> {
    let mut merged = defaults.0;
    if let (Some(expected), Some(found)) = (kind, file.get("kind")) {
        if found.as_str() != Some(expected) {
            bail!("config file describes a {found} experiment, not {expected:?}");
        }
    }
    merged.extend(file);
    merged.extend(flags.0);
    if let Some(kind) = kind {
        merged.insert("kind".into(), Value::String(kind.into()));
    }
    Value::Table(merged).try_into().context("invalid configuration")
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).context("encoding the effective configuration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize, Serialize, PartialEq)]
    struct Run {
        steps: u64,
        feedback: String,
        #[serde(default)]
        seed: u64,
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut defaults = Layer::new();
        defaults
            .set("steps", Some(1u64))
            .unwrap()
            .set("feedback", Some("const:1"))
            .unwrap();
        let file: Table = "steps = 5\nseed = 3".parse().unwrap();
        let mut flags = Layer::new();
        flags
            .set("steps", Some(9u64))
            .unwrap()
            .set::<u64>("seed", None)
            .unwrap();
        let run: Run = resolve(defaults, file, flags, None).unwrap();
        assert_eq!(
            run,
            Run {
                steps: 9,
                feedback: "const:1".into(),
                seed: 3
            }
        );
    }

    #[test]
    fn mismatched_kind_is_rejected() {
        let file: Table = "kind = \"regime\"".parse().unwrap();
        let r: Result<toml::Table> = resolve(Layer::new(), file, Layer::new(), Some("coverage"));
        assert!(r.is_err());
    }

    #[test]
    fn echo_round_trips() {
        let run = Run {
            steps: 2,
            feedback: "power:0.5".into(),
            seed: 1,
        };
        let text = to_toml(&run).unwrap();
        let back: Run = resolve(Layer::new(), text.parse().unwrap(), Layer::new(), None).unwrap();
        assert_eq!(back, run);
    }
}
