//! Run directories: manifest, CSV tables with sibling schema files, and
//! resumption of partially written sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_FORMAT: u32 = 1;

/// One column of a CSV schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub description: String,
}

/// Sibling `<name>.schema.json` of every CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub file: String,
    pub description: String,
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn new(file: &str, description: &str, columns: &[(&str, &str, &str)]) -> Self {
        Self {
            file: file.into(),
            description: description.into(),
            columns: columns
                .iter()
                .map(|(n, t, d)| Column { name: (*n).into(), ty: (*t).into(), description: (*d).into() })
                .collect(),
        }
    }

    pub fn header(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(self.file.replace(".csv", ".schema.json"))
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool: String,
    pub version: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, seeds: BTreeMap<String, u64>) -> Self {
        let mut config = config.clone();
        config.out = None;
        Self { format: MANIFEST_FORMAT, tool: "qrc".into(), version: env!("CARGO_PKG_VERSION").into(), seeds, config }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// An output directory bound to one resolved config.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Create the directory and write the manifest, or reopen a directory
    /// holding the same run for resumption.
    pub fn open(path: &Path, manifest: &Manifest) -> Result<Self> {
        if path.join(MANIFEST_FILE).exists() {
            let existing = Manifest::load(path)?;
            if existing.config != manifest.config || existing.seeds != manifest.seeds {
                return Err(Error::Config {
                    path: "out".into(),
                    message: format!("{} holds a run with a different configuration", path.display()),
                });
            }
            log::info!("resuming run in {}", path.display());
        } else {
            fs::create_dir_all(path)?;
            if fs::read_dir(path)?.next().is_some() {
                return Err(Error::Config {
                    path: "out".into(),
                    message: format!("{} is not empty and has no manifest", path.display()),
                });
            }
            write_atomic(&path.join(MANIFEST_FILE), manifest.to_toml().as_bytes())?;
        }
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Open (or resume) an append-only table.
    pub fn table<R: Serialize + DeserializeOwned>(&self, schema: Schema) -> Result<Table<R>> {
        Table::open(&self.path, schema)
    }

    /// Write a complete table at once, replacing any previous file.
    pub fn write_table<R: Serialize>(&self, schema: &Schema, rows: &[R]) -> Result<()> {
        write_schema(&self.path, schema)?;
        write_atomic(&self.path.join(&schema.file), &to_csv(schema, rows)?)
    }

    /// Rows of a complete table if it exists.
    pub fn read_table<R: DeserializeOwned>(&self, schema: &Schema) -> Result<Option<Vec<R>>> {
        let path = self.path.join(&schema.file);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(read_rows(&path)?.0))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_schema(dir: &Path, schema: &Schema) -> Result<()> {
    let mut text = serde_json::to_string_pretty(schema).expect("schema serializes");
    text.push('\n');
    write_atomic(&schema.path_in(dir), text.as_bytes())
}

fn to_csv<R: Serialize>(schema: &Schema, rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(schema.header())?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Rows up to the first unreadable one, and whether the file was intact.
fn read_rows<R: DeserializeOwned>(path: &Path) -> Result<(Vec<R>, bool)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        match rec {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("dropping unreadable tail of {}: {e}", path.display());
                return Ok((rows, false));
            }
        }
    }
    Ok((rows, true))
}

/// Append-only CSV flushed after every row.
pub struct Table<R> {
    writer: csv::Writer<fs::File>,
    existing: Vec<R>,
    _row: PhantomData<R>,
}

impl<R: Serialize + DeserializeOwned> Table<R> {
    fn open(dir: &Path, schema: Schema) -> Result<Self> {
        let path = dir.join(&schema.file);
        write_schema(dir, &schema)?;
        let existing = if path.exists() {
            let (rows, intact) = read_rows::<R>(&path)?;
            if !intact {
                // Rewrite the readable prefix; serialization is deterministic.
                write_atomic(&path, &to_csv(&schema, &rows)?)?;
            }
            rows
        } else {
            let mut f = fs::File::create(&path)?;
            f.write_all(&to_csv::<R>(&schema, &[])?)?;
            Vec::new()
        };
        let file = fs::OpenOptions::new().append(true).open(&path)?;
        let writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        Ok(Self { writer, existing, _row: PhantomData })
    }

    /// Rows already present when the table was opened.
    pub fn existing(&self) -> &[R] {
        &self.existing
    }

    pub fn append(&mut self, row: &R) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentKind;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    fn schema() -> Schema {
        Schema::new("t.csv", "test", &[("a", "int", "a"), ("b", "float", "b")])
    }

    #[test]
    fn table_appends_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new(&ExperimentConfig::new(ExperimentKind::EpsP).resolve(), BTreeMap::new());
        let run = RunDir::open(dir.path(), &m).unwrap();
        {
            let mut t = run.table::<Row>(schema()).unwrap();
            t.append(&Row { a: 1, b: 0.1 }).unwrap();
        }
        // A torn final line is dropped on reopen.
        let path = dir.path().join("t.csv");
        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"2,").unwrap();
        let run = RunDir::open(dir.path(), &m).unwrap();
        let mut t = run.table::<Row>(schema()).unwrap();
        assert_eq!(t.existing(), &[Row { a: 1, b: 0.1 }]);
        t.append(&Row { a: 2, b: 1e-300 }).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1,0.1\n2,1e-300\n");
        assert!(dir.path().join("t.schema.json").exists());
    }

    #[test]
    fn different_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::new(ExperimentKind::EpsP).resolve();
        RunDir::open(dir.path(), &Manifest::new(&c, BTreeMap::new())).unwrap();
        let mut other = c.clone();
        other.seed = 9;
        assert!(RunDir::open(dir.path(), &Manifest::new(&other, BTreeMap::new())).is_err());
        let back = Manifest::load(dir.path()).unwrap();
        assert_eq!(back.config, c);
    }
}
