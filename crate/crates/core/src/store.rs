//! File-backed scenario store with a metadata index.
//!
//! Layout: `<root>/<area>/<scenario_id>.aveas.json` holds the canonical
//! profile bytes of each scenario, `<root>/index.json` the canonical index.
//! The index is a pure function of the stored files, so [`ScenarioStore::reindex`]
//! rebuilds it byte-identically. Writers serialize on `<root>/.lock`; every
//! file is replaced by write-to-temp then rename, so readers never observe a
//! partially written file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    AcquisitionMethod, Area, EventType, Origin, Scenario, ScenarioMetadata, ValidationReport,
};
use crate::openlabel::{self, ParseError, SerializeError, FILE_EXTENSION};

pub const INDEX_FILE: &str = "index.json";
pub const LOCK_FILE: &str = ".lock";
const INDEX_FORMAT: u64 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("scenario '{0}' already exists in the store")]
    DuplicateId(String),
    #[error("scenario failed validation:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error("scenario '{0}' not found")]
    NotFound(String),
    #[error("stored file for '{id}' is corrupt: {reason}")]
    CorruptEntry { id: String, reason: String },
    #[error("index file {path} is unreadable: {reason}; run reindex")]
    CorruptIndex { path: PathBuf, reason: String },
    #[error("invalid scenario id '{0}': only ASCII letters, digits, '_', '-' and '.' are allowed")]
    InvalidId(String),
    #[error("store is locked by another writer ({0} exists)")]
    Locked(PathBuf),
    #[error("store root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl From<ParseError> for StoreError {
    fn from(e: ParseError) -> Self {
        StoreError::ValidationFailed(e.report())
    }
}

impl From<SerializeError> for StoreError {
    fn from(e: SerializeError) -> Self {
        match e {
            SerializeError::Validation(r) => StoreError::ValidationFailed(r),
            SerializeError::NonFinite(path) => {
                let mut r = ValidationReport::default();
                r.error(path, "non-finite number");
                StoreError::ValidationFailed(r)
            }
        }
    }
}

/// Index record of one stored scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    /// Path relative to the store root, `/`-separated.
    pub path: String,
    pub content_sha256: String,
    pub metadata: ScenarioMetadata,
    pub event_types: BTreeSet<EventType>,
}

impl IndexEntry {
    fn of(s: &Scenario, bytes: &[u8]) -> Self {
        Self {
            path: relative_path(s.metadata.area, &s.scenario_id),
            content_sha256: sha256_hex(bytes),
            metadata: s.metadata.clone(),
            event_types: s.events.values().filter_map(|e| e.event_type).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StoreIndex {
    pub entries: BTreeMap<String, IndexEntry>,
}

impl StoreIndex {
    /// Canonical index bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut entries = Map::new();
        for (id, e) in &self.entries {
            let mut o = Map::new();
            o.insert("path".into(), Value::String(e.path.clone()));
            o.insert("content_sha256".into(), Value::String(e.content_sha256.clone()));
            o.insert(
                "metadata".into(),
                openlabel::metadata_to_value(&e.metadata).expect("indexed metadata is finite"),
            );
            o.insert(
                "event_types".into(),
                Value::Array(e.event_types.iter().map(|t| Value::String(t.as_str().into())).collect()),
            );
            entries.insert(id.clone(), Value::Object(o));
        }
        let mut top = Map::new();
        top.insert("format".into(), Value::from(INDEX_FORMAT));
        top.insert("entries".into(), Value::Object(entries));
        openlabel::canonical_bytes(&Value::Object(top))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        if v.get("format").and_then(Value::as_u64) != Some(INDEX_FORMAT) {
            return Err(format!("expected index format {INDEX_FORMAT}"));
        }
        let entries = v
            .get("entries")
            .and_then(Value::as_object)
            .ok_or("missing 'entries' object")?;
        let mut index = StoreIndex::default();
        for (id, e) in entries {
            let field = |k: &str| {
                e.get(k)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or(format!("entry '{id}': missing '{k}'"))
            };
            let metadata = openlabel::metadata_from_value(e.get("metadata").unwrap_or(&Value::Null))
                .map_err(|r| format!("entry '{id}': {r}"))?;
            let mut event_types = BTreeSet::new();
            for t in e.get("event_types").and_then(Value::as_array).into_iter().flatten() {
                let t = t
                    .as_str()
                    .and_then(EventType::parse)
                    .ok_or(format!("entry '{id}': bad event type {t}"))?;
                event_types.insert(t);
            }
            index.entries.insert(
                id.clone(),
                IndexEntry {
                    path: field("path")?,
                    content_sha256: field("content_sha256")?,
                    metadata,
                    event_types,
                },
            );
        }
        Ok(index)
    }
}

/// A stored dynamic range must overlap `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangePredicate {
    pub quantity: String,
    pub lo: f64,
    pub hi: f64,
}

/// Conjunction of predicates; empty sets and `None` match everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryFilter {
    pub areas: BTreeSet<Area>,
    pub acquisition_methods: BTreeSet<AcquisitionMethod>,
    pub origins: BTreeSet<Origin>,
    /// At least one event of one of these types.
    pub event_types: BTreeSet<EventType>,
    /// Inclusive bounds on the scenario duration.
    pub duration: Option<(f64, f64)>,
    pub ranges: Vec<RangePredicate>,
    /// Case-insensitive substring of the data use restrictions.
    pub text: Option<String>,
}

impl QueryFilter {
    pub fn matches(&self, m: &ScenarioMetadata, event_types: &BTreeSet<EventType>) -> bool {
        (self.areas.is_empty() || self.areas.contains(&m.area))
            && (self.acquisition_methods.is_empty()
                || self.acquisition_methods.contains(&m.acquisition_method))
            && (self.origins.is_empty() || self.origins.contains(&m.origin))
            && (self.event_types.is_empty() || !self.event_types.is_disjoint(event_types))
            && self
                .duration
                .is_none_or(|(lo, hi)| m.scenario_duration >= lo && m.scenario_duration <= hi)
            && self.ranges.iter().all(|p| {
                m.dynamic_ranges
                    .get(&p.quantity)
                    .is_some_and(|r| r.overlaps(p.lo, p.hi))
            })
            && self.text.as_ref().is_none_or(|t| {
                m.data_use_restrictions
                    .to_lowercase()
                    .contains(&t.to_lowercase())
            })
    }
}

/// A file that [`ScenarioStore::reindex`] could not index.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug)]
pub struct ScenarioStore {
    root: PathBuf,
    index: StoreIndex,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn relative_path(area: Area, id: &str) -> String {
    format!("{}/{id}{FILE_EXTENSION}", area.as_str())
}

/// Replaces `path` with `bytes` via a sibling temp file and rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().expect("store paths have a file name");
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Held while writing; the lock file is removed on drop.
struct WriteLock(PathBuf);

impl WriteLock {
    fn acquire(root: &Path) -> Result<Self, StoreError> {
        let path = root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WriteLock(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Locked(path)),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl ScenarioStore {
    /// Opens an existing store. A missing index is rebuilt in memory from
    /// the stored files without writing.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(StoreError::MissingRoot(root));
        }
        let index = Self::load_index(&root)?;
        Ok(Self { root, index })
    }

    pub fn open_or_create(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Self::open(root)
    }

    fn load_index(root: &Path) -> Result<StoreIndex, StoreError> {
        let path = root.join(INDEX_FILE);
        match fs::read(&path) {
            Ok(bytes) => StoreIndex::from_bytes(&bytes)
                .map_err(|reason| StoreError::CorruptIndex { path, reason }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(scan(root)?.0),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> &StoreIndex {
        &self.index
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.entries.contains_key(id)
    }

    /// Validates and stores a profile document, returning its scenario id.
    pub fn ingest(&mut self, bytes: &[u8]) -> Result<String, StoreError> {
        let scenario = openlabel::parse(bytes)?;
        self.insert(&scenario, false)
    }

    /// Stores a scenario that already exists, replacing its file and entry.
    pub fn update(&mut self, scenario: &Scenario) -> Result<(), StoreError> {
        self.insert(scenario, true).map(|_| ())
    }

    fn insert(&mut self, scenario: &Scenario, replace: bool) -> Result<String, StoreError> {
        let id = scenario.scenario_id.clone();
        if !is_valid_id(&id) {
            return Err(StoreError::InvalidId(id));
        }
        let bytes = openlabel::serialize(scenario)?;
        let _lock = WriteLock::acquire(&self.root)?;
        // Another writer may have committed since this handle was opened.
        self.index = Self::load_index(&self.root)?;
        let previous = self.index.entries.get(&id).cloned();
        match (&previous, replace) {
            (Some(_), false) => return Err(StoreError::DuplicateId(id)),
            (None, true) => return Err(StoreError::NotFound(id)),
            _ => {}
        }
        let entry = IndexEntry::of(scenario, &bytes);
        let file = self.root.join(&entry.path);
        if !replace && file.exists() {
            return Err(StoreError::DuplicateId(id));
        }
        write_atomic(&file, &bytes)?;
        let mut next = self.index.clone();
        next.entries.insert(id.clone(), entry.clone());
        write_atomic(&self.index_path(), &next.to_bytes())?;
        self.index = next;
        if let Some(old) = previous.filter(|old| old.path != entry.path) {
            let old_path = self.root.join(&old.path);
            fs::remove_file(&old_path).map_err(io_err(&old_path))?;
        }
        Ok(id)
    }

    /// Matching ids with their metadata, ordered by id.
    pub fn query(&self, filter: &QueryFilter) -> Vec<(String, ScenarioMetadata)> {
        self.index
            .entries
            .iter()
            .filter(|(_, e)| filter.matches(&e.metadata, &e.event_types))
            .map(|(id, e)| (id.clone(), e.metadata.clone()))
            .collect()
    }

    pub fn fetch(&self, id: &str) -> Result<Scenario, StoreError> {
        let entry = self
            .index
            .entries
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let path = self.root.join(&entry.path);
        let bytes = fs::read(&path).map_err(|e| StoreError::CorruptEntry {
            id: id.to_string(),
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        let actual = sha256_hex(&bytes);
        if actual != entry.content_sha256 {
            return Err(StoreError::CorruptEntry {
                id: id.to_string(),
                reason: format!("content hash {actual} != indexed {}", entry.content_sha256),
            });
        }
        openlabel::parse(&bytes).map_err(|e| StoreError::CorruptEntry {
            id: id.to_string(),
            reason: e.to_string(),
        })
    }

    /// Rebuilds and persists the index by scanning the stored files.
    pub fn reindex(&mut self) -> Result<(StoreIndex, Vec<SkippedFile>), StoreError> {
        let _lock = WriteLock::acquire(&self.root)?;
        let (index, skipped) = scan(&self.root)?;
        write_atomic(&self.index_path(), &index.to_bytes())?;
        self.index = index.clone();
        Ok((index, skipped))
    }
}

/// Index of every well-placed, parseable scenario file under `root`.
fn scan(root: &Path) -> Result<(StoreIndex, Vec<SkippedFile>), StoreError> {
    let mut index = StoreIndex::default();
    let mut skipped = Vec::new();
    let mut files = Vec::new();
    for area in Area::ALL {
        let dir = root.join(area.as_str());
        let listing = match fs::read_dir(&dir) {
            Ok(l) => l,
            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
            Err(e) => return Err(StoreError::Io { path: dir, source: e }),
        };
        for item in listing {
            let path = item.map_err(io_err(&dir))?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
            if let Some(id) = name.as_deref().and_then(|n| n.strip_suffix(FILE_EXTENSION)) {
                if !id.starts_with('.') {
                    files.push((*area, id.to_string(), path));
                }
            }
        }
    }
    files.sort_by(|a, b| (a.1.as_str(), a.0).cmp(&(b.1.as_str(), b.0)));
    for (area, id, path) in files {
        let skip = |reason: String| SkippedFile {
            path: path.clone(),
            reason,
        };
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let scenario = match openlabel::parse(&bytes) {
            Ok(s) => s,
            Err(e) => {
                skipped.push(skip(e.to_string()));
                continue;
            }
        };
        if scenario.scenario_id != id || scenario.metadata.area != area {
            skipped.push(skip(format!(
                "misplaced: scenario '{}' in area '{}' belongs at {}",
                scenario.scenario_id,
                scenario.metadata.area,
                relative_path(scenario.metadata.area, &scenario.scenario_id)
            )));
            continue;
        }
        if index.entries.contains_key(&id) {
            skipped.push(skip(format!("duplicate scenario id '{id}'")));
            continue;
        }
        index.entries.insert(id, IndexEntry::of(&scenario, &bytes));
    }
    Ok((index, skipped))
}
