//! Augmented-corpus CSV: `pool_id,persona,text,empathy_label,fluency_raw`.
//!
//! The last two columns are empty until the scores are precomputed.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmentation::AugmentedPool;
use crate::corpus::{EmpathyLabel, Persona, PoolId};

#[derive(Debug, Error)]
pub enum PoolFileError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Invalid { row: usize, message: String },
}

/// One utterance with its (optional) precomputed scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedUtterance {
    pub pool_id: PoolId,
    pub persona: Persona,
    pub text: String,
    pub empathy_label: Option<EmpathyLabel>,
    /// Unnormalised fluency, `1/ppl - repeat_penalty`; may be negative.
    pub fluency_raw: Option<f64>,
}

impl AnnotatedUtterance {
    pub fn bare(pool_id: PoolId, persona: Persona, text: String) -> Self {
        Self {
            pool_id,
            persona,
            text,
            empathy_label: None,
            fluency_raw: None,
        }
    }
}

pub fn rows_from_pool(pool: &AugmentedPool) -> Vec<AnnotatedUtterance> {
    pool.utterances
        .iter()
        .map(|t| AnnotatedUtterance::bare(pool.pool_id.clone(), pool.persona, t.clone()))
        .collect()
}

pub fn write_rows<W: Write>(writer: W, rows: &[AnnotatedUtterance]) -> Result<(), PoolFileError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|source| PoolFileError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Writes to a sibling temp file and renames it into place, so readers never
/// observe a partial file.
pub fn write_pool_file(path: &Path, rows: &[AnnotatedUtterance]) -> Result<(), PoolFileError> {
    let io_err = |source| PoolFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, &buf).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<AnnotatedUtterance>, PoolFileError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.deserialize::<AnnotatedUtterance>().enumerate() {
        let rec = rec.map_err(|e| PoolFileError::Invalid {
            row: idx + 1,
            message: e.to_string(),
        })?;
        if rec.text.trim().is_empty() {
            return Err(PoolFileError::Invalid {
                row: idx + 1,
                message: "empty utterance".into(),
            });
        }
        rows.push(rec);
    }
    Ok(rows)
}

pub fn read_pool_file(path: &Path) -> Result<Vec<AnnotatedUtterance>, PoolFileError> {
    let file = std::fs::File::open(path).map_err(|source| PoolFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_rows(file)
}
