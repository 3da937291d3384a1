//! Config-file layer. A TOML file whose keys are flag names (dashes or underscores);
//! top-level keys apply to every subcommand and a `[subcommand]` table overrides them.
//! Flags win over the file, the file wins over built-in defaults.

use negobench::{Error, Result};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct FileConfig {
    global: toml::Table,
    section: toml::Table,
}

fn normalize(table: toml::Table) -> toml::Table {
    table
        .into_iter()
        .map(|(k, v)| (k.replace('-', "_"), v))
        .collect()
}

fn scalar_text(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|x| scalar_text(key, x))
            .collect::<Result<Vec<_>>>()
            .map(|xs| xs.join(",")),
        _ => Err(Error::validation(format!("config key {key:?} must be a scalar or a list"))),
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>, command: &str) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let mut sections = toml::Table::new();
        let names: Vec<String> = table.keys().cloned().collect();
        for name in names {
            if table[&name].is_table() {
                let v = table.remove(&name).expect("present");
                sections.insert(name.replace('-', "_"), v);
            }
        }
        let section = match sections.remove(&command.replace('-', "_")) {
            Some(toml::Value::Table(t)) => normalize(t),
            _ => toml::Table::new(),
        };
        Ok(FileConfig {
            global: normalize(table),
            section,
        })
    }

    fn raw(&self, key: &str) -> Option<&toml::Value> {
        let key = key.replace('-', "_");
        self.section.get(&key).or_else(|| self.global.get(&key))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let text = scalar_text(key, v)?;
                text.parse()
                    .map(Some)
                    .map_err(|e| Error::validation(format!("config key {key:?}: {e}")))
            }
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
