//! The catalog of the twenty numbered SAT protocols.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_COUNT: u8 = 20;

const DEFAULT_CATALOG: &str = include_str!("../data/protocols.csv");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("catalog must list protocols 1..=20 exactly once; missing {missing:?}")]
    Incomplete { missing: Vec<u8> },
    #[error("duplicate protocol id {0}")]
    Duplicate(u8),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolRef {
    pub id: u8,
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct ProtocolCatalog {
    entries: BTreeMap<u8, ProtocolRef>,
}

impl ProtocolCatalog {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, CatalogError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = BTreeMap::new();
        for (idx, rec) in rdr.deserialize::<ProtocolRef>().enumerate() {
            let row = idx + 1;
            let rec = rec.map_err(|e| CatalogError::Row {
                row,
                message: e.to_string(),
            })?;
            if !(1..=PROTOCOL_COUNT).contains(&rec.id) {
                return Err(CatalogError::Row {
                    row,
                    message: format!("id {} outside 1..=20", rec.id),
                });
            }
            if rec.title.is_empty() {
                return Err(CatalogError::Row {
                    row,
                    message: "empty title".into(),
                });
            }
            let id = rec.id;
            if entries.insert(id, rec).is_some() {
                return Err(CatalogError::Duplicate(id));
            }
        }
        let missing: Vec<u8> = (1..=PROTOCOL_COUNT)
            .filter(|id| !entries.contains_key(id))
            .collect();
        if !missing.is_empty() {
            return Err(CatalogError::Incomplete { missing });
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, CatalogError> {
        let file = std::fs::File::open(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_reader(file)
    }

    pub fn get(&self, id: u8) -> Option<&ProtocolRef> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: u8) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProtocolRef> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for ProtocolCatalog {
    fn default() -> Self {
        Self::from_reader(DEFAULT_CATALOG.as_bytes()).expect("bundled catalog is valid")
    }
}
