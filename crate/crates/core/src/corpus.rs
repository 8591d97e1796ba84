//! Survey dataset loading, persona partitioning and empathy labels.
//!
//! The dataset is a UTF-8 CSV with a header row: `sex`, `age`, one column per
//! emotion context and one column per base-utterance id. The literal `NaN`
//! (or an empty cell) marks an absent value.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::canonical;

pub const ABSENT_TOKEN: &str = "NaN";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("bad header: {0}")]
    Header(String),
    #[error("unknown pool id {0:?}")]
    UnknownPool(String),
    #[error("invalid empathy label {0}; labels must be 0, 1 or 2")]
    InvalidLabel(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(format!("unknown sex {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "18-29")]
    From18To29,
    #[serde(rename = "30-39")]
    From30To39,
    #[serde(rename = "40-49")]
    From40To49,
    #[serde(rename = "50-59")]
    From50To59,
    #[serde(rename = "60-69")]
    From60To69,
    #[serde(rename = "70+")]
    Over70,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 6] = [
        AgeGroup::From18To29,
        AgeGroup::From30To39,
        AgeGroup::From40To49,
        AgeGroup::From50To59,
        AgeGroup::From60To69,
        AgeGroup::Over70,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::From18To29 => "18-29",
            AgeGroup::From30To39 => "30-39",
            AgeGroup::From40To49 => "40-49",
            AgeGroup::From50To59 => "50-59",
            AgeGroup::From60To69 => "60-69",
            AgeGroup::Over70 => "70+",
        }
    }

    pub fn is_younger(self) -> bool {
        matches!(self, AgeGroup::From18To29 | AgeGroup::From30To39)
    }

    pub fn is_older(self) -> bool {
        matches!(
            self,
            AgeGroup::From40To49 | AgeGroup::From50To59 | AgeGroup::From60To69
        )
    }
}

impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == token)
            .ok_or_else(|| format!("unknown age group {s:?}"))
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionContext {
    Sadness,
    Anger,
    AnxietyFear,
    HappinessContent,
}

impl EmotionContext {
    pub const ALL: [EmotionContext; 4] = [
        EmotionContext::Sadness,
        EmotionContext::Anger,
        EmotionContext::AnxietyFear,
        EmotionContext::HappinessContent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionContext::Sadness => "sadness",
            EmotionContext::Anger => "anger",
            EmotionContext::AnxietyFear => "anxiety_fear",
            EmotionContext::HappinessContent => "happiness_content",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for EmotionContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['/', ' ', '-'], "_").as_str() {
            "sadness" | "sad" => Ok(EmotionContext::Sadness),
            "anger" | "angry" => Ok(EmotionContext::Anger),
            "anxiety_fear" | "anxiety" | "fear" => Ok(EmotionContext::AnxietyFear),
            "happiness_content" | "happiness" | "content" => Ok(EmotionContext::HappinessContent),
            other => Err(format!("unknown emotion context {other:?}")),
        }
    }
}

impl fmt::Display for EmotionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where rows from the 70+ age group go. By default only Kai sees them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Route 70+ rows to Robert/Gabrielle as well as Kai.
    pub seniors_in_older_personas: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Persona {
    Kai,
    Robert,
    Gabrielle,
    Arman,
    Olivia,
}

impl Persona {
    pub const ALL: [Persona; 5] = [
        Persona::Kai,
        Persona::Robert,
        Persona::Gabrielle,
        Persona::Arman,
        Persona::Olivia,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Persona::Kai => "kai",
            Persona::Robert => "robert",
            Persona::Gabrielle => "gabrielle",
            Persona::Arman => "arman",
            Persona::Olivia => "olivia",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Persona::Kai => "Kai",
            Persona::Robert => "Robert",
            Persona::Gabrielle => "Gabrielle",
            Persona::Arman => "Arman",
            Persona::Olivia => "Olivia",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Persona::Kai => "Informed by every respondent; no particular sex or age",
            Persona::Robert => "Older male coach (respondents aged 40-69)",
            Persona::Gabrielle => "Older female coach (respondents aged 40-69)",
            Persona::Arman => "Younger male coach (respondents aged 18-39)",
            Persona::Olivia => "Younger female coach (respondents aged 18-39)",
        }
    }

    pub fn accepts(self, sex: Sex, age: AgeGroup, cfg: &PartitionConfig) -> bool {
        let older = age.is_older() || (cfg.seniors_in_older_personas && age == AgeGroup::Over70);
        match self {
            Persona::Kai => true,
            Persona::Robert => sex == Sex::Male && older,
            Persona::Gabrielle => sex == Sex::Female && older,
            Persona::Arman => sex == Sex::Male && age.is_younger(),
            Persona::Olivia => sex == Sex::Female && age.is_younger(),
        }
    }
}

impl FromStr for Persona {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Persona::ALL
            .into_iter()
            .find(|p| p.id() == lower)
            .ok_or_else(|| format!("unknown persona {s:?}"))
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Identifier of a base utterance (one rewriting column of the dataset).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoolId(pub String);

impl PoolId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PoolId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRow {
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub emotion_expressions: BTreeMap<EmotionContext, Vec<String>>,
    /// `None` where the cell held `NaN`.
    pub rewritings: BTreeMap<PoolId, Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// Rewriting columns in file order.
    pub pool_ids: Vec<PoolId>,
    pub rows: Vec<DatasetRow>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Separator between multiple emotion expressions inside one cell.
    pub expression_separator: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            expression_separator: "\n".to_string(),
        }
    }
}

enum Column {
    Sex,
    Age,
    Emotion(EmotionContext),
    Pool(PoolId),
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(file, opts)
}

pub fn parse_dataset<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Header(e.to_string()))?
        .clone();
    let columns = classify_header(&headers)?;
    let pool_ids: Vec<PoolId> = columns
        .iter()
        .filter_map(|c| match c {
            Column::Pool(id) => Some(id.clone()),
            _ => None,
        })
        .collect();

    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row_no = idx + 1;
        let record = record.map_err(|e| CorpusError::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        if record.len() != columns.len() {
            return Err(CorpusError::Parse {
                row: row_no,
                message: format!("expected {} fields, found {}", columns.len(), record.len()),
            });
        }
        rows.push(parse_row(row_no, &record, &columns, opts)?);
    }
    Ok(Dataset { pool_ids, rows })
}

fn classify_header(headers: &csv::StringRecord) -> Result<Vec<Column>, CorpusError> {
    let mut columns = Vec::with_capacity(headers.len());
    let mut seen = HashSet::new();
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        if !seen.insert(name.to_string()) {
            return Err(CorpusError::Header(format!("duplicate column {name:?}")));
        }
        let col = match i {
            0 if name.eq_ignore_ascii_case("sex") => Column::Sex,
            1 if name.eq_ignore_ascii_case("age") || name.eq_ignore_ascii_case("age_group") => {
                Column::Age
            }
            0 | 1 => {
                return Err(CorpusError::Header(format!(
                    "first two columns must be sex and age, found {name:?}"
                )))
            }
            _ => match name.parse::<EmotionContext>() {
                Ok(ctx) => Column::Emotion(ctx),
                Err(_) if name.is_empty() => {
                    return Err(CorpusError::Header(format!("column {} has no name", i + 1)))
                }
                Err(_) => Column::Pool(PoolId::new(name)),
            },
        };
        columns.push(col);
    }
    if columns.len() < 2 {
        return Err(CorpusError::Header("missing sex/age columns".into()));
    }
    Ok(columns)
}

fn parse_row(
    row: usize,
    record: &csv::StringRecord,
    columns: &[Column],
    opts: &LoadOptions,
) -> Result<DatasetRow, CorpusError> {
    let mut sex = None;
    let mut age_group = None;
    let mut emotion_expressions = BTreeMap::new();
    let mut rewritings = BTreeMap::new();
    for (cell, col) in record.iter().zip(columns) {
        match col {
            Column::Sex => {
                sex = Some(cell.parse().map_err(|message| CorpusError::Validation { row, message })?)
            }
            Column::Age => {
                age_group =
                    Some(cell.parse().map_err(|message| CorpusError::Validation { row, message })?)
            }
            Column::Emotion(ctx) => {
                let exprs = match absent_or_trimmed(cell) {
                    None => Vec::new(),
                    Some(text) => text
                        .split(opts.expression_separator.as_str())
                        .map(str::trim)
                        .filter(|s| !s.is_empty() && *s != ABSENT_TOKEN)
                        .map(str::to_string)
                        .collect(),
                };
                emotion_expressions.insert(*ctx, exprs);
            }
            Column::Pool(id) => {
                rewritings.insert(id.clone(), absent_or_trimmed(cell).map(str::to_string));
            }
        }
    }
    Ok(DatasetRow {
        sex: sex.expect("sex column present"),
        age_group: age_group.expect("age column present"),
        emotion_expressions,
        rewritings,
    })
}

fn absent_or_trimmed(cell: &str) -> Option<&str> {
    let t = cell.trim();
    if t.is_empty() || t == ABSENT_TOKEN {
        None
    } else {
        Some(t)
    }
}

/// Rewritings of one base utterance, restricted to one persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtterancePool {
    pub pool_id: PoolId,
    pub persona: Persona,
    pub utterances: Vec<String>,
}

/// Non-absent rewritings of `pool_id` from rows the persona accepts,
/// deduplicated after trimming and NFC normalisation. First occurrence wins.
pub fn partition(
    dataset: &Dataset,
    persona: Persona,
    pool_id: &PoolId,
    cfg: &PartitionConfig,
) -> Result<UtterancePool, CorpusError> {
    if !dataset.pool_ids.contains(pool_id) {
        return Err(CorpusError::UnknownPool(pool_id.0.clone()));
    }
    let mut seen = HashSet::new();
    let mut utterances = Vec::new();
    for row in &dataset.rows {
        if !persona.accepts(row.sex, row.age_group, cfg) {
            continue;
        }
        if let Some(Some(text)) = row.rewritings.get(pool_id) {
            let text = canonical(text);
            if !text.is_empty() && seen.insert(text.clone()) {
                utterances.push(text);
            }
        }
    }
    Ok(UtterancePool {
        pool_id: pool_id.clone(),
        persona,
        utterances,
    })
}

/// One pool per base utterance, in column order.
pub fn partition_all(
    dataset: &Dataset,
    persona: Persona,
    cfg: &PartitionConfig,
) -> Vec<UtterancePool> {
    dataset
        .pool_ids
        .iter()
        .map(|id| partition(dataset, persona, id, cfg).expect("pool id taken from dataset"))
        .collect()
}

/// Discrete empathy label: 0 (none), 1 (some), 2 (strong).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EmpathyLabel(u8);

impl EmpathyLabel {
    pub const MAX: u8 = 2;

    pub fn new(value: u8) -> Result<Self, CorpusError> {
        if value <= Self::MAX {
            Ok(Self(value))
        } else {
            Err(CorpusError::InvalidLabel(value as i64))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for EmpathyLabel {
    type Error = CorpusError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EmpathyLabel> for u8 {
    fn from(l: EmpathyLabel) -> u8 {
        l.0
    }
}

impl FromStr for EmpathyLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: i64 = s
            .trim()
            .parse()
            .map_err(|_| CorpusError::InvalidLabel(-1))?;
        u8::try_from(v)
            .map_err(|_| CorpusError::InvalidLabel(v))
            .and_then(Self::new)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpathyAnnotation {
    pub utterance: String,
    pub labels: [EmpathyLabel; 3],
    pub resolved: EmpathyLabel,
}

/// Majority of three annotator labels; 1 when all three differ.
pub fn resolve_empathy(labels: [u8; 3]) -> Result<EmpathyLabel, CorpusError> {
    let [a, b, c] = labels;
    for l in labels {
        EmpathyLabel::new(l)?;
    }
    let resolved = if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        1
    };
    EmpathyLabel::new(resolved)
}

#[derive(Debug, Deserialize)]
struct AnnotationRecord {
    utterance: String,
    label1: i64,
    label2: i64,
    label3: i64,
}

pub fn load_annotations(path: &Path) -> Result<Vec<EmpathyAnnotation>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_annotations(file)
}

pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<EmpathyAnnotation>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.deserialize::<AnnotationRecord>().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| CorpusError::Parse {
            row,
            message: e.to_string(),
        })?;
        let mut labels = [EmpathyLabel(0); 3];
        for (slot, raw) in labels.iter_mut().zip([rec.label1, rec.label2, rec.label3]) {
            *slot = u8::try_from(raw)
                .map_err(|_| CorpusError::InvalidLabel(raw))
                .and_then(EmpathyLabel::new)
                .map_err(|e| CorpusError::Validation {
                    row,
                    message: e.to_string(),
                })?;
        }
        let utterance = rec.utterance.trim().to_string();
        if utterance.is_empty() {
            return Err(CorpusError::Validation {
                row,
                message: "empty utterance".into(),
            });
        }
        let resolved = resolve_empathy(labels.map(EmpathyLabel::value))?;
        out.push(EmpathyAnnotation {
            utterance,
            labels,
            resolved,
        });
    }
    Ok(out)
}
