//! Interaction-log ingestion.
//!
//! A log is one JSON object per line with the fields `timestamp`, `lv1_id`,
//! `lv2_id`, `comp_id` and an optional `other` payload. Each record is
//! checked against a [`ComponentModel`]; a directory of `<user>_<task>.jsonl`
//! files becomes a [`SessionBundle`].

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::exec::Execution;
use crate::json;
use crate::taxonomy::{ComponentModel, L1};

/// Level-two functionalities whose records may carry an `other` payload.
pub const PAYLOAD_L2: [&str; 2] = ["specify_problem", "explain_model"];

/// One interaction record. Timestamps are UTC with millisecond precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    #[serde(with = "ms_timestamp")]
    pub timestamp: DateTime<Utc>,
    pub lv1_id: L1,
    pub lv2_id: String,
    pub comp_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<Value>,
}

impl LogRecord {
    pub fn millis(&self) -> i64 {
        self.timestamp.timestamp_millis()
    }

    /// Single-line JSON form, as written to `.jsonl` files.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

mod ms_timestamp {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        parse_timestamp(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("malformed timestamp `{text}`")))
    }
}

/// `YYYY-MM-DDTHH:MM:SS.mmmZ`.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn truncate_ms(ts: DateTime<Utc>) -> Option<DateTime<Utc>> {
    Utc.timestamp_millis_opt(ts.timestamp_millis()).single()
}

/// Parses an ISO-8601 timestamp and normalizes it to UTC milliseconds.
///
/// Extended and basic formats are accepted, with `Z`, `±hh`, `±hhmm` or
/// `±hh:mm` offsets. A timestamp without an offset is read as UTC.
/// Sub-millisecond digits are truncated.
pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return truncate_ms(ts.with_timezone(&Utc));
    }
    let zoned = match text.strip_suffix(['Z', 'z']) {
        Some(rest) => format!("{rest}+00:00"),
        None => text.to_string(),
    };
    const ZONED: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f%#z",
        "%Y-%m-%dT%H:%M%#z",
        "%Y%m%dT%H%M%S%.f%#z",
        "%Y%m%dT%H%M%#z",
    ];
    for fmt in ZONED {
        if let Ok(ts) = DateTime::parse_from_str(&zoned, fmt) {
            return truncate_ms(ts.with_timezone(&Utc));
        }
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y%m%dT%H%M%S%.f",
        "%Y%m%dT%H%M",
    ];
    for fmt in NAIVE {
        if let Ok(ts) = NaiveDateTime::parse_from_str(text, fmt) {
            return truncate_ms(Utc.from_utc_datetime(&ts));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogErrorKind {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("malformed timestamp `{0}`")]
    MalformedTimestamp(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{comp_id}` belongs to {expected_l1}/{expected_l2}, record says {found_l1}/{found_l2}")]
    HierarchyMismatch {
        comp_id: String,
        expected_l1: L1,
        expected_l2: String,
        found_l1: L1,
        found_l2: String,
    },
    #[error("`other` payload on component `{comp_id}` ({l2}); only specify_problem and explain_model carry one")]
    UnexpectedOtherPayload { comp_id: String, l2: String },
    #[error("timestamp {found} is earlier than the preceding {previous}")]
    NonMonotonicTimestamps { previous: String, found: String },
    #[error("log contains no records")]
    EmptyLog,
    #[error("file name must look like <user>_<task>.jsonl")]
    BadFileName,
    #[error("read failed: {0}")]
    Io(String),
}

/// A validation failure, anchored to a 1-based line when applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogError {
    pub line: Option<usize>,
    pub kind: LogErrorKind,
}

impl fmt::Display for LogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Every problem found in one log.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct LogErrors(pub Vec<LogError>);

impl LogErrors {
    fn single(kind: LogErrorKind) -> Self {
        LogErrors(vec![LogError { line: None, kind }])
    }

    pub fn kinds(&self) -> impl Iterator<Item = &LogErrorKind> {
        self.0.iter().map(|e| &e.kind)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Stably sort records by timestamp instead of rejecting disorder.
    pub sort_timestamps: bool,
    /// Move records naming unknown components into quarantine.
    pub allow_unknown_components: bool,
}

/// A record set aside by `allow_unknown_components`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quarantined {
    pub line: usize,
    pub record: LogRecord,
}

/// One user's records for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user_id: String,
    pub system_name: String,
    pub task_id: String,
    pub records: Vec<LogRecord>,
    pub quarantined: Vec<Quarantined>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Last minus first timestamp, in milliseconds.
    pub fn span_ms(&self) -> u64 {
        match (self.records.first(), self.records.last()) {
            (Some(first), Some(last)) => (last.millis() - first.millis()).max(0) as u64,
            _ => 0,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    /// Checks the session's records against `model`.
    pub fn validate(&self, model: &ComponentModel) -> Result<(), LogErrors> {
        let mut errors = Vec::new();
        if self.records.is_empty() {
            errors.push(LogError {
                line: None,
                kind: LogErrorKind::EmptyLog,
            });
        }
        for (i, r) in self.records.iter().enumerate() {
            if let Err(kind) = check_record(r, model) {
                errors.push(LogError {
                    line: Some(i + 1),
                    kind,
                });
            }
        }
        for pair in self.records.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                errors.push(LogError {
                    line: None,
                    kind: LogErrorKind::NonMonotonicTimestamps {
                        previous: format_timestamp(&pair[0].timestamp),
                        found: format_timestamp(&pair[1].timestamp),
                    },
                });
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(LogErrors(errors))
        }
    }
}

fn check_record(r: &LogRecord, model: &ComponentModel) -> Result<(), LogErrorKind> {
    let comp = model
        .component(&r.comp_id)
        .ok_or_else(|| LogErrorKind::UnknownComponent(r.comp_id.clone()))?;
    if comp.l1_id != r.lv1_id || comp.l2_id != r.lv2_id {
        return Err(LogErrorKind::HierarchyMismatch {
            comp_id: r.comp_id.clone(),
            expected_l1: comp.l1_id,
            expected_l2: comp.l2_id.clone(),
            found_l1: r.lv1_id,
            found_l2: r.lv2_id.clone(),
        });
    }
    if r.other.is_some() && !PAYLOAD_L2.contains(&comp.l2_id.as_str()) {
        return Err(LogErrorKind::UnexpectedOtherPayload {
            comp_id: r.comp_id.clone(),
            l2: comp.l2_id.clone(),
        });
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    timestamp: String,
    lv1_id: String,
    lv2_id: String,
    comp_id: String,
    #[serde(default)]
    other: Option<Value>,
}

fn decode_line(text: &str) -> Result<LogRecord, LogErrorKind> {
    let wire: WireRecord =
        serde_json::from_str(text).map_err(|e| LogErrorKind::MalformedRecord(e.to_string()))?;
    let timestamp =
        parse_timestamp(&wire.timestamp).ok_or(LogErrorKind::MalformedTimestamp(wire.timestamp))?;
    let lv1_id = wire
        .lv1_id
        .parse::<L1>()
        .map_err(LogErrorKind::MalformedRecord)?;
    Ok(LogRecord {
        timestamp,
        lv1_id,
        lv2_id: wire.lv2_id,
        comp_id: wire.comp_id,
        other: wire.other.filter(|v| !v.is_null()),
    })
}

/// Identifies the session a log belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionKey {
    pub user_id: String,
    pub task_id: String,
}

impl SessionKey {
    pub fn new(user_id: impl Into<String>, task_id: impl Into<String>) -> Self {
        SessionKey {
            user_id: user_id.into(),
            task_id: task_id.into(),
        }
    }

    /// Splits `<user>_<task>.jsonl` at the last underscore.
    pub fn from_file_name(path: &Path) -> Option<Self> {
        let stem = path.file_name()?.to_str()?.strip_suffix(".jsonl")?;
        let (user, task) = stem.rsplit_once('_')?;
        (!user.is_empty() && !task.is_empty()).then(|| SessionKey::new(user, task))
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.jsonl", self.user_id, self.task_id)
    }
}

/// Parses one line-delimited log. Blank lines are ignored. All problems in
/// the log are reported together.
pub fn parse_log<R: BufRead>(
    reader: R,
    model: &ComponentModel,
    key: &SessionKey,
    options: &ParseOptions,
) -> Result<Session, LogErrors> {
    let mut errors = Vec::new();
    let mut records: Vec<LogRecord> = Vec::new();
    let mut quarantined = Vec::new();
    let mut latest: Option<DateTime<Utc>> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = match line {
            Ok(text) => text,
            Err(e) => {
                errors.push(LogError {
                    line: Some(line_no),
                    kind: LogErrorKind::Io(e.to_string()),
                });
                break;
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        let record = match decode_line(&text) {
            Ok(record) => record,
            Err(kind) => {
                errors.push(LogError {
                    line: Some(line_no),
                    kind,
                });
                continue;
            }
        };
        match check_record(&record, model) {
            Ok(()) => {}
            Err(LogErrorKind::UnknownComponent(_)) if options.allow_unknown_components => {
                quarantined.push(Quarantined {
                    line: line_no,
                    record,
                });
                continue;
            }
            Err(kind) => {
                errors.push(LogError {
                    line: Some(line_no),
                    kind,
                });
                continue;
            }
        }
        if !options.sort_timestamps {
            if let Some(prev) = latest {
                if record.timestamp < prev {
                    errors.push(LogError {
                        line: Some(line_no),
                        kind: LogErrorKind::NonMonotonicTimestamps {
                            previous: format_timestamp(&prev),
                            found: format_timestamp(&record.timestamp),
                        },
                    });
                }
            }
        }
        latest = Some(latest.map_or(record.timestamp, |p| p.max(record.timestamp)));
        records.push(record);
    }

    if records.is_empty() && errors.is_empty() {
        errors.push(LogError {
            line: None,
            kind: LogErrorKind::EmptyLog,
        });
    }
    if !errors.is_empty() {
        return Err(LogErrors(errors));
    }
    if options.sort_timestamps {
        records.sort_by_key(|r| r.timestamp);
    }
    Ok(Session {
        user_id: key.user_id.clone(),
        system_name: model.system_name.clone(),
        task_id: key.task_id.clone(),
        records,
        quarantined,
    })
}

/// Parses the log at `path`, taking user and task from the file name.
pub fn parse_log_file(
    path: &Path,
    model: &ComponentModel,
    options: &ParseOptions,
) -> Result<Session, LogErrors> {
    let key = SessionKey::from_file_name(path)
        .ok_or_else(|| LogErrors::single(LogErrorKind::BadFileName))?;
    let file =
        fs::File::open(path).map_err(|e| LogErrors::single(LogErrorKind::Io(e.to_string())))?;
    parse_log(BufReader::new(file), model, &key, options)
}

/// All sessions recorded against one model, sorted by user then task.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionBundle {
    pub model: ComponentModel,
    pub sessions: Vec<Session>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileFailure {
    pub path: PathBuf,
    pub errors: LogErrors,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("no *.jsonl logs found in {0}")]
    NoLogsFound(PathBuf),
    #[error("more than one log for user `{user_id}` and task `{task_id}`")]
    DuplicateUserTask { user_id: String, task_id: String },
    #[error("session {user_id}/{task_id} does not match the model: {errors}")]
    InvalidSession {
        user_id: String,
        task_id: String,
        errors: LogErrors,
    },
    #[error("{} log file(s) failed:\n{}", .0.len(), format_failures(.0))]
    Files(Vec<FileFailure>),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn format_failures(failures: &[FileFailure]) -> String {
    failures
        .iter()
        .flat_map(|f| {
            f.errors
                .0
                .iter()
                .map(move |e| format!("  {}: {e}", f.path.display()))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl SessionBundle {
    /// Builds a bundle, re-validating every session against `model`.
    pub fn new(model: ComponentModel, mut sessions: Vec<Session>) -> Result<Self, BundleError> {
        let mut seen = HashSet::new();
        for s in &sessions {
            if !seen.insert((s.user_id.as_str(), s.task_id.as_str())) {
                return Err(BundleError::DuplicateUserTask {
                    user_id: s.user_id.clone(),
                    task_id: s.task_id.clone(),
                });
            }
            s.validate(&model)
                .map_err(|errors| BundleError::InvalidSession {
                    user_id: s.user_id.clone(),
                    task_id: s.task_id.clone(),
                    errors,
                })?;
        }
        sessions.sort_by(|a, b| (&a.user_id, &a.task_id).cmp(&(&b.user_id, &b.task_id)));
        Ok(SessionBundle { model, sessions })
    }

    pub fn users(&self) -> BTreeSet<&str> {
        self.sessions.iter().map(|s| s.user_id.as_str()).collect()
    }

    pub fn manifest(&self) -> BundleManifest {
        BundleManifest {
            system_name: self.model.system_name.clone(),
            model_digest: self.model.digest(),
            session_count: self.sessions.len(),
            user_count: self.users().len(),
            sessions: self
                .sessions
                .iter()
                .map(|s| ManifestEntry {
                    user_id: s.user_id.clone(),
                    task_id: s.task_id.clone(),
                    records: s.len(),
                    quarantined: s.quarantined.len(),
                    first: format_timestamp(&s.records[0].timestamp),
                    last: format_timestamp(&s.records[s.len() - 1].timestamp),
                    span_ms: s.span_ms(),
                })
                .collect(),
        }
    }
}

/// Loads every `*.jsonl` file directly inside `dir`.
pub fn load_bundle(
    dir: &Path,
    model: &ComponentModel,
    options: &ParseOptions,
    exec: Execution,
) -> Result<SessionBundle, BundleError> {
    let entries = fs::read_dir(dir).map_err(|source| BundleError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| BundleError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_file() && path.extension().is_some_and(|e| e == "jsonl") {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(BundleError::NoLogsFound(dir.to_path_buf()));
    }
    load_bundle_files(&paths, model, options, exec)
}

/// Loads the given log files into one bundle. Failures from every file are
/// collected before returning.
pub fn load_bundle_files(
    paths: &[PathBuf],
    model: &ComponentModel,
    options: &ParseOptions,
    exec: Execution,
) -> Result<SessionBundle, BundleError> {
    let mut paths = paths.to_vec();
    paths.sort();
    let results = exec.map(&paths, |p| parse_log_file(p, model, options));
    let mut sessions = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in paths.into_iter().zip(results) {
        match result {
            Ok(session) => sessions.push(session),
            Err(errors) => failures.push(FileFailure { path, errors }),
        }
    }
    if !failures.is_empty() {
        return Err(BundleError::Files(failures));
    }
    SessionBundle::new(model.clone(), sessions)
}

/// Normalized summary of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleManifest {
    pub system_name: String,
    pub model_digest: String,
    pub session_count: usize,
    pub user_count: usize,
    pub sessions: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub user_id: String,
    pub task_id: String,
    pub records: usize,
    pub quarantined: usize,
    pub first: String,
    pub last: String,
    pub span_ms: u64,
}

impl BundleManifest {
    pub fn to_canonical_json(&self) -> String {
        json::to_canonical_string(self).expect("manifest serializes")
    }
}
