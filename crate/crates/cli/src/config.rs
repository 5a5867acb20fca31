//! Option layering: a TOML file with one table per subcommand, overridden by flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

/// Subcommands that draw random numbers and so accept a `seed`.
const SEEDED: [&str; 3] = ["simulate", "fit", "benchmark"];

/// Reads the `[section]` table of a config file. A top-level `seed` applies to
/// every seeded section that does not set its own.
pub fn section(path: &Path, name: &str) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut root: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    let mut table = match root.remove(name) {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => bail!("config entry `{name}` must be a table"),
    };
    if let (Some(seed), true) = (root.get("seed"), SEEDED.contains(&name)) {
        table.entry("seed").or_insert_with(|| seed.clone());
    }
    Ok(table)
}

/// Merges flag values over file values; unset flags leave the file value in place.
pub fn layered<T: Serialize + DeserializeOwned>(flags: &T, file: Option<Table>) -> Result<T> {
    let mut merged = file.unwrap_or_default();
    let Value::Table(overrides) = Value::try_from(flags)? else {
        bail!("options must serialize to a table");
    };
    merged.extend(overrides);
    Value::Table(merged).try_into().context("invalid configuration")
}

/// Loads the options for one subcommand.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>, name: &str) -> Result<T> {
    let file = config.map(|p| section(p, name)).transpose()?;
    layered(flags, file)
}

/// Short SHA-256 of the effective options. The output directory is left out so
/// that reruns into another directory carry the same hash.
pub fn config_hash<T: Serialize>(opts: &T) -> Result<String> {
    let mut value = Value::try_from(opts)?;
    if let Value::Table(t) = &mut value {
        t.remove("out");
    }
    let text = toml::to_string(&value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(format!("{digest:x}")[..16].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    struct Opts {
        m: Option<usize>,
        seed: Option<u64>,
        mask: Option<String>,
    }

    #[test]
    fn flags_win_over_file() {
        let file: Table = "m = 10\nmask = \"single\"".parse().unwrap();
        let flags = Opts {
            m: Some(20),
            ..Opts::default()
        };
        let out = layered(&flags, Some(file)).unwrap();
        assert_eq!(out.m, Some(20));
        assert_eq!(out.mask.as_deref(), Some("single"));
        assert_eq!(out.seed, None);
    }

    #[test]
    fn unknown_type_is_rejected() {
        let file: Table = "m = \"many\"".parse().unwrap();
        assert!(layered(&Opts::default(), Some(file)).is_err());
    }

    #[test]
    fn hash_depends_on_values() {
        let a = Opts {
            m: Some(1),
            ..Opts::default()
        };
        let b = Opts {
            m: Some(2),
            ..Opts::default()
        };
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a).unwrap());
    }
}
