//! Feedback records, database schemas, the structural-error filter and
//! low-data splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::edit_engine;
use crate::sql::{parse_sql, SqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Human,
    Simulated,
    Template,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Human => "human",
            Provenance::Simulated => "simulated",
            Provenance::Template => "template",
        }
    }
}

/// One interaction: question, wrong parse with its explanation, the user's
/// feedback and the gold parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackExample {
    pub id: String,
    pub db_id: String,
    pub question: String,
    pub wrong_parse: String,
    pub gold_parse: String,
    pub explanation: Option<String>,
    pub feedback: Option<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    #[serde(alias = "others")]
    Other,
}

impl ColumnType {
    fn from_name(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "text" => ColumnType::Text,
            "number" => ColumnType::Number,
            "time" => ColumnType::Time,
            "boolean" => ColumnType::Boolean,
            _ => ColumnType::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type", deserialize_with = "de_column_type")]
    pub ty: ColumnType,
}

fn de_column_type<'de, D: serde::Deserializer<'de>>(d: D) -> Result<ColumnType, D::Error> {
    let s = String::deserialize(d)?;
    Ok(ColumnType::from_name(&s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

pub type KeyRef = (String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<Table>,
    #[serde(default)]
    pub primary_keys: Vec<KeyRef>,
    #[serde(default)]
    pub foreign_keys: Vec<(KeyRef, KeyRef)>,
}

impl DatabaseSchema {
    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&Column> {
        self.table(table).and_then(|t| t.column(column))
    }

    /// Check name uniqueness and key references.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = HashSet::new();
        for t in &self.tables {
            if !seen.insert(t.name.to_lowercase()) {
                return Err(SchemaError::DuplicateTable {
                    db_id: self.db_id.clone(),
                    table: t.name.clone(),
                });
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.to_lowercase()) {
                    return Err(SchemaError::DuplicateColumn {
                        db_id: self.db_id.clone(),
                        table: t.name.clone(),
                        column: c.name.clone(),
                    });
                }
            }
        }
        let keys = self
            .primary_keys
            .iter()
            .chain(self.foreign_keys.iter().flat_map(|(a, b)| [a, b]));
        for (t, c) in keys {
            if self.column(t, c).is_none() {
                return Err(SchemaError::DanglingKey {
                    db_id: self.db_id.clone(),
                    reference: format!("{t}.{c}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("database '{db_id}': duplicate table name '{table}'")]
    DuplicateTable { db_id: String, table: String },
    #[error("database '{db_id}': duplicate column name '{column}' in table '{table}'")]
    DuplicateColumn {
        db_id: String,
        table: String,
        column: String,
    },
    #[error("database '{db_id}': key reference '{reference}' does not resolve to a column")]
    DanglingKey { db_id: String, reference: String },
    #[error("duplicate database id '{0}'")]
    DuplicateDatabase(String),
}

/// All loaded schemas keyed by `db_id`.
#[derive(Debug, Clone, Default)]
pub struct SchemaStore {
    dbs: BTreeMap<String, DatabaseSchema>,
}

#[derive(Deserialize)]
struct SchemaFile {
    databases: Vec<DatabaseSchema>,
}

/// One entry of a Spider-style `tables.json`.
#[derive(Deserialize)]
struct SpiderSchema {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<Json>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

impl SpiderSchema {
    fn convert(self) -> Result<DatabaseSchema, CorpusError> {
        let bad = |m: String| CorpusError::SchemaFormat(format!("{}: {m}", self.db_id));
        let mut tables: Vec<Table> = self
            .table_names_original
            .iter()
            .map(|n| Table {
                name: n.clone(),
                columns: Vec::new(),
            })
            .collect();
        let mut refs: Vec<Option<KeyRef>> = Vec::new();
        for (i, (t, name)) in self.column_names_original.iter().enumerate() {
            // index -1 is the "*" pseudo-column
            let Ok(t) = usize::try_from(*t) else {
                refs.push(None);
                continue;
            };
            let table = tables.get_mut(t).ok_or_else(|| bad(format!("column {name} names table {t}")))?;
            let ty = self.column_types.get(i).map_or(ColumnType::Other, |s| ColumnType::from_name(s));
            table.columns.push(Column { name: name.clone(), ty });
            refs.push(Some((table.name.clone(), name.clone())));
        }
        let key = |i: usize| refs.get(i).cloned().flatten().ok_or_else(|| bad(format!("key column {i}")));
        let mut primary_keys = Vec::new();
        for k in &self.primary_keys {
            // composite keys arrive as nested lists
            let ids: Vec<u64> = match k {
                Json::Array(xs) => xs.iter().filter_map(Json::as_u64).collect(),
                other => other.as_u64().into_iter().collect(),
            };
            for i in ids {
                primary_keys.push(key(i as usize)?);
            }
        }
        let foreign_keys = self
            .foreign_keys
            .iter()
            .map(|&(a, b)| Ok((key(a)?, key(b)?)))
            .collect::<Result<_, CorpusError>>()?;
        Ok(DatabaseSchema {
            db_id: self.db_id.clone(),
            tables,
            primary_keys,
            foreign_keys,
        })
    }
}

impl SchemaStore {
    pub fn new(schemas: impl IntoIterator<Item = DatabaseSchema>) -> Result<Self, SchemaError> {
        let mut dbs = BTreeMap::new();
        for s in schemas {
            s.validate()?;
            if dbs.contains_key(&s.db_id) {
                return Err(SchemaError::DuplicateDatabase(s.db_id));
            }
            dbs.insert(s.db_id.clone(), s);
        }
        Ok(Self { dbs })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let fmt = |e: serde_json::Error| CorpusError::SchemaFormat(e.to_string());
        let v: Json = serde_json::from_str(text).map_err(fmt)?;
        // a top-level array is a Spider-style tables.json
        let databases = if v.is_array() {
            let raw: Vec<SpiderSchema> = serde_json::from_value(v).map_err(fmt)?;
            raw.into_iter().map(SpiderSchema::convert).collect::<Result<Vec<_>, _>>()?
        } else {
            serde_json::from_value::<SchemaFile>(v).map_err(fmt)?.databases
        };
        Ok(Self::new(databases)?)
    }

    pub fn get(&self, db_id: &str) -> Option<&DatabaseSchema> {
        self.dbs.get(db_id)
    }

    pub fn len(&self) -> usize {
        self.dbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dbs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DatabaseSchema> {
        self.dbs.values()
    }

    /// Schema for `ex`, or an unknown-database error.
    pub fn resolve(&self, db_id: &str) -> Result<&DatabaseSchema, CorpusError> {
        self.get(db_id).ok_or_else(|| CorpusError::UnknownDatabase(db_id.to_string()))
    }
}

pub fn load_schemas(path: &Path) -> Result<SchemaStore, CorpusError> {
    SchemaStore::from_json(&read(path)?)
}

/// Why one input line was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line number.
    pub line: usize,
    pub problem: RecordProblem,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordProblem {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing or empty field '{0}'")]
    EmptyField(String),
    #[error("field '{field}' has the wrong type")]
    WrongType { field: String },
    #[error("unknown db_id '{0}'")]
    UnknownDatabase(String),
    #[error("unknown provenance '{0}'")]
    UnknownProvenance(String),
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.problem)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema file: {0}")]
    SchemaFormat(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("unknown db_id '{0}'")]
    UnknownDatabase(String),
    #[error("{} invalid record(s):\n{}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<RecordError>),
    #[error("example {index} ({which} parse): {source}")]
    Parse {
        index: usize,
        which: &'static str,
        #[source]
        source: SqlError,
    },
    #[error("K must be one of 5, 10, 20, 100 (got {0})")]
    InvalidSplit(u32),
    #[error("low-data split needs at least one example")]
    EmptySplit,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Maps canonical field names to the names used by a raw input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub db_id: String,
    pub question: String,
    pub wrong_parse: String,
    pub gold_parse: String,
    pub explanation: String,
    pub feedback: String,
    pub provenance: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            db_id: "db_id".into(),
            question: "question".into(),
            wrong_parse: "wrong_parse".into(),
            gold_parse: "gold_parse".into(),
            explanation: "explanation".into(),
            feedback: "feedback".into(),
            provenance: "provenance".into(),
        }
    }
}

impl FieldMap {
    /// Field names of the released SPLASH json files.
    pub fn splash() -> Self {
        Self {
            wrong_parse: "predicted_parse_with_values".into(),
            gold_parse: "gold_parse".into(),
            explanation: "predicted_parse_explanation".into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub strict: bool,
    pub fields: FieldMap,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            strict: true,
            fields: FieldMap::default(),
        }
    }
}

/// Valid records plus every rejected line.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub examples: Vec<FeedbackExample>,
    pub errors: Vec<RecordError>,
}

/// Load a JSONL file. In strict mode any rejected line fails the whole
/// load with the full list of problems; otherwise they are returned in
/// the report.
pub fn load_examples(path: &Path, schemas: &SchemaStore, opts: &LoadOptions) -> Result<LoadReport, CorpusError> {
    parse_examples(&read(path)?, schemas, opts)
}

pub fn parse_examples(text: &str, schemas: &SchemaStore, opts: &LoadOptions) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line, i, schemas, &opts.fields) {
            Ok(ex) => report.examples.push(ex),
            Err(problem) => report.errors.push(RecordError { line: i + 1, problem }),
        }
    }
    if opts.strict && !report.errors.is_empty() {
        return Err(CorpusError::Validation(report.errors));
    }
    Ok(report)
}

fn parse_record(line: &str, index: usize, schemas: &SchemaStore, fields: &FieldMap) -> Result<FeedbackExample, RecordProblem> {
    let v: Json = serde_json::from_str(line).map_err(|e| RecordProblem::MalformedJson(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| RecordProblem::MalformedJson("expected a JSON object".into()))?;

    let optional = |name: &str| -> Result<Option<String>, RecordProblem> {
        match obj.get(name) {
            None | Some(Json::Null) => Ok(None),
            Some(Json::String(s)) => Ok(Some(s.clone())),
            Some(Json::Number(n)) => Ok(Some(n.to_string())),
            // explanations sometimes arrive as a list of step strings
            Some(Json::Array(items)) if items.iter().all(Json::is_string) => Ok(Some(
                items.iter().filter_map(Json::as_str).collect::<Vec<_>>().join(" "),
            )),
            Some(_) => Err(RecordProblem::WrongType { field: name.to_string() }),
        }
    };
    let required = |name: &str| -> Result<String, RecordProblem> {
        match optional(name)? {
            Some(s) if !s.trim().is_empty() => Ok(s),
            _ => Err(RecordProblem::EmptyField(name.to_string())),
        }
    };

    let db_id = required(&fields.db_id)?;
    let question = required(&fields.question)?;
    let wrong_parse = required(&fields.wrong_parse)?;
    let gold_parse = required(&fields.gold_parse)?;
    if schemas.get(&db_id).is_none() {
        return Err(RecordProblem::UnknownDatabase(db_id));
    }
    let provenance = match optional(&fields.provenance)? {
        None => Provenance::Human,
        Some(p) => match p.as_str() {
            "human" => Provenance::Human,
            "simulated" => Provenance::Simulated,
            "template" => Provenance::Template,
            _ => return Err(RecordProblem::UnknownProvenance(p)),
        },
    };
    Ok(FeedbackExample {
        id: optional(&fields.id)?.unwrap_or_else(|| index.to_string()),
        db_id,
        question,
        wrong_parse,
        gold_parse,
        explanation: optional(&fields.explanation)?,
        feedback: optional(&fields.feedback)?,
        provenance,
    })
}

/// Write examples in the canonical JSONL format.
pub fn write_examples(path: &Path, examples: &[FeedbackExample]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for ex in examples {
        let line = serde_json::to_string(ex).expect("examples serialize");
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Split off examples whose wrong parse misses or adds a whole subquery.
pub fn filter_structural(
    examples: &[FeedbackExample],
    schemas: &SchemaStore,
) -> Result<(Vec<FeedbackExample>, Vec<FeedbackExample>), CorpusError> {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (index, ex) in examples.iter().enumerate() {
        let schema = schemas.resolve(&ex.db_id)?;
        let parse = |text: &str, which| {
            parse_sql(text, schema).map_err(|source| CorpusError::Parse { index, which, source })
        };
        let wrong = parse(&ex.wrong_parse, "wrong")?;
        let gold = parse(&ex.gold_parse, "gold")?;
        let script = edit_engine::diff(&wrong, &gold);
        if edit_engine::classify_structural(&script).is_some() {
            removed.push(ex.clone());
        } else {
            kept.push(ex.clone());
        }
    }
    Ok((kept, removed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowDataSplitConfig {
    k_percent: u32,
    pub seed: u64,
}

impl LowDataSplitConfig {
    pub const ALLOWED_K: [u32; 4] = [5, 10, 20, 100];

    pub fn new(k_percent: u32, seed: u64) -> Result<Self, CorpusError> {
        if !Self::ALLOWED_K.contains(&k_percent) {
            return Err(CorpusError::InvalidSplit(k_percent));
        }
        Ok(Self { k_percent, seed })
    }

    pub fn k_percent(&self) -> u32 {
        self.k_percent
    }

    /// Annotated count for `n` examples, rounding halves up.
    pub fn annotated_count(&self, n: usize) -> usize {
        (self.k_percent as usize * n + 50) / 100
    }
}

/// Partition into (annotated, to_simulate). Selection is a seeded uniform
/// sample; both parts keep the input order.
pub fn split_lowdata<T: Clone>(examples: &[T], config: &LowDataSplitConfig) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if examples.is_empty() {
        return Err(CorpusError::EmptySplit);
    }
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut chosen = vec![false; examples.len()];
    for &i in &idx[..config.annotated_count(examples.len())] {
        chosen[i] = true;
    }
    let mut annotated = Vec::new();
    let mut rest = Vec::new();
    for (ex, pick) in examples.iter().zip(chosen) {
        if pick {
            annotated.push(ex.clone());
        } else {
            rest.push(ex.clone());
        }
    }
    Ok((annotated, rest))
}

/// Small hand-built schemas used by tests and examples.
#[doc(hidden)]
pub mod test_fixtures {
    use super::*;

    fn table(name: &str, cols: &[(&str, ColumnType)]) -> Table {
        Table {
            name: name.into(),
            columns: cols
                .iter()
                .map(|(n, ty)| Column {
                    name: (*n).into(),
                    ty: *ty,
                })
                .collect(),
        }
    }

    fn key(t: &str, c: &str) -> KeyRef {
        (t.into(), c.into())
    }

    use ColumnType::{Number as N, Text as T, Time as D};

    pub fn dogs_schema() -> DatabaseSchema {
        DatabaseSchema {
            db_id: "dog_kennels".into(),
            tables: vec![
                table("breeds", &[("breed_code", T), ("breed_name", T)]),
                table("sizes", &[("size_code", T), ("size_description", T)]),
                table(
                    "owners",
                    &[("owner_id", N), ("first_name", T), ("last_name", T), ("city", T), ("state", T)],
                ),
                table(
                    "dogs",
                    &[
                        ("dog_id", N),
                        ("owner_id", N),
                        ("breed_code", T),
                        ("size_code", T),
                        ("name", T),
                        ("age", N),
                        ("weight", N),
                        ("date_arrived", D),
                    ],
                ),
                table(
                    "professionals",
                    &[("professional_id", N), ("role_code", T), ("first_name", T), ("city", T)],
                ),
                table(
                    "treatments",
                    &[
                        ("treatment_id", N),
                        ("dog_id", N),
                        ("professional_id", N),
                        ("date_of_treatment", D),
                        ("cost_of_treatment", N),
                    ],
                ),
            ],
            primary_keys: vec![
                key("breeds", "breed_code"),
                key("owners", "owner_id"),
                key("dogs", "dog_id"),
                key("professionals", "professional_id"),
                key("treatments", "treatment_id"),
            ],
            foreign_keys: vec![
                (key("dogs", "breed_code"), key("breeds", "breed_code")),
                (key("dogs", "owner_id"), key("owners", "owner_id")),
                (key("treatments", "dog_id"), key("dogs", "dog_id")),
                (key("treatments", "professional_id"), key("professionals", "professional_id")),
            ],
        }
    }

    pub fn cars_schema() -> DatabaseSchema {
        DatabaseSchema {
            db_id: "car_1".into(),
            tables: vec![
                table("continents", &[("contid", N), ("continent", T)]),
                table("countries", &[("countryid", N), ("countryname", T), ("continent", N)]),
                table("car_makers", &[("id", N), ("maker", T), ("fullname", T), ("country", T)]),
                table("model_list", &[("modelid", N), ("maker", N), ("model", T)]),
                table("car_names", &[("makeid", N), ("model", T), ("make", T)]),
                table(
                    "cars_data",
                    &[
                        ("id", N),
                        ("mpg", T),
                        ("cylinders", N),
                        ("edispl", N),
                        ("horsepower", T),
                        ("weight", N),
                        ("accelerate", N),
                        ("year", N),
                    ],
                ),
            ],
            primary_keys: vec![key("car_makers", "id"), key("model_list", "modelid"), key("cars_data", "id")],
            foreign_keys: vec![
                (key("model_list", "maker"), key("car_makers", "id")),
                (key("car_names", "model"), key("model_list", "model")),
                (key("cars_data", "id"), key("car_names", "makeid")),
            ],
        }
    }

    pub fn docs_schema() -> DatabaseSchema {
        DatabaseSchema {
            db_id: "cre_Doc_Tracking_DB".into(),
            tables: vec![
                table(
                    "ref_document_types",
                    &[
                        ("document_type_code", T),
                        ("document_type_name", T),
                        ("document_type_description", T),
                    ],
                ),
                table(
                    "ref_locations",
                    &[("location_code", T), ("location_name", T), ("location_description", T)],
                ),
                table(
                    "all_documents",
                    &[("document_id", N), ("date_stored", D), ("document_type_code", T), ("document_name", T)],
                ),
            ],
            primary_keys: vec![key("ref_locations", "location_code")],
            foreign_keys: vec![],
        }
    }

    pub fn store() -> SchemaStore {
        SchemaStore::new([dogs_schema(), cars_schema(), docs_schema()]).expect("fixture schemas are valid")
    }
}
