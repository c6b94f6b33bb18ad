//! Flat JSON config files. Keys mirror the long flag names (`subgroup-size`,
//! `ic-arl`, ...); flags given on the command line win over file values.
//! A run manifest is also accepted, in which case its `config` object is used.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::UsageError;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut root: Value = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
        if let Some(inner) = root.get_mut("config").filter(|v| v.is_object()) {
            root = inner.take();
        }
        let Value::Object(map) = root else {
            return Err(UsageError(format!("config {} must be a JSON object", path.display())).into());
        };
        Ok(Self {
            values: map
                .into_iter()
                .map(|(k, v)| (k.replace('_', "-"), v))
                .collect(),
        })
    }

    /// Value of `key`, if present in the file.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> anyhow::Result<Option<T>> {
        match self.values.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| UsageError(format!("config key `{key}`: {e}")).into()),
        }
    }
}

/// Effective settings of one run, recorded in the manifest.
#[derive(Debug, Default)]
pub struct Effective {
    pub values: BTreeMap<String, Value>,
}

impl Effective {
    /// Flag value, else file value, else `default`.
    pub fn pick<T>(&mut self, file: &FileConfig, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: DeserializeOwned + serde::Serialize + Clone,
    {
        let v = match flag {
            Some(v) => v,
            None => file.get(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`pick`](Self::pick) but with no default.
    pub fn pick_opt<T>(&mut self, file: &FileConfig, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: DeserializeOwned + serde::Serialize + Clone,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => file.get(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn require<T>(&mut self, file: &FileConfig, key: &str, flag: Option<T>) -> anyhow::Result<T>
    where
        T: DeserializeOwned + serde::Serialize + Clone,
    {
        match self.pick_opt(file, key, flag)? {
            Some(v) => Ok(v),
            None => bail!(UsageError(format!("missing required setting `--{key}`"))),
        }
    }

    pub fn record<T: serde::Serialize>(&mut self, key: &str, v: &T) {
        self.values
            .insert(key.to_string(), serde_json::to_value(v).expect("plain config values serialize"));
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"lambda": 0.2, "ic_arl": 370, "method": "pdf-fpca-cc"}"#).unwrap();
        let f = FileConfig::load(Some(&p)).unwrap();
        let mut e = Effective::default();
        assert_eq!(e.pick(&f, "lambda", Some(0.1), 0.05).unwrap(), 0.1);
        assert_eq!(e.pick(&f, "ic-arl", None, 500.0).unwrap(), 370.0);
        assert_eq!(e.pick(&f, "m0", None, 4usize).unwrap(), 4);
        assert_eq!(e.pick_opt::<String>(&f, "method", None).unwrap().as_deref(), Some("pdf-fpca-cc"));
        assert_eq!(e.values.len(), 4);
    }

    #[test]
    fn manifest_config_is_unwrapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        std::fs::write(&p, r#"{"command": "monitor", "config": {"n0": 25}}"#).unwrap();
        let f = FileConfig::load(Some(&p)).unwrap();
        assert_eq!(f.get::<usize>("n0").unwrap(), Some(25));
    }

    #[test]
    fn bad_types_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"m": "thirty"}"#).unwrap();
        let f = FileConfig::load(Some(&p)).unwrap();
        let err = f.get::<usize>("m").unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
