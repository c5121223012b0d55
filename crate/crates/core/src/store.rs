//! On-disk formats.
//!
//! Datasets are CSV with one row per sample:
//!
//! ```text
//! user_id,rep_id,key_index,key_label,sample_index,adc_code
//! ```
//!
//! Rows are sorted by `(user_id, rep_id, key_index, sample_index)`; rep ids,
//! key indices and sample indices each count up from 0. Only the samples of
//! each press are stored, so a read lays presses out back to back.
//!
//! Profiles and reports are versioned JSON documents. Profile reals are
//! written in shortest round-trip form so a reloaded profile scores exactly
//! like the original.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::EvalReport;
use crate::classify::UserProfile;
use crate::signal::{AdcCode, EntryAttempt, KeyLabel};

/// Entries per user id, in repetition order.
pub type Dataset = BTreeMap<String, Vec<EntryAttempt>>;

pub const DATASET_HEADER: [&str; 6] = [
    "user_id",
    "rep_id",
    "key_index",
    "key_label",
    "sample_index",
    "adc_code",
];

pub const PROFILE_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("unsupported document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StoreError {
    fn parse(line: u64, message: impl Into<String>) -> Self {
        StoreError::Parse {
            line,
            message: message.into(),
        }
    }

    fn invalid(line: u64, message: impl Into<String>) -> Self {
        StoreError::Validation {
            line,
            message: message.into(),
        }
    }
}

/// Writes `bytes` next to `path` and renames into place.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| StoreError::Io(e.error))?;
    Ok(())
}

pub fn write_dataset_to<W: Write>(out: W, data: &Dataset) -> Result<(), StoreError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| StoreError::Io(io::Error::other(e));
    w.write_record(DATASET_HEADER).map_err(csv_err)?;
    for (user, entries) in data {
        for (rep, entry) in entries.iter().enumerate() {
            for (key_index, press) in entry.presses().iter().enumerate() {
                for (sample_index, code) in press.samples.iter().enumerate() {
                    w.write_record([
                        user.as_str(),
                        &rep.to_string(),
                        &key_index.to_string(),
                        &press.key.to_string(),
                        &sample_index.to_string(),
                        &code.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), StoreError> {
    write_atomic(path, |out| {
        write_dataset_to(out, data).map_err(|e| match e {
            StoreError::Io(io) => io,
            other => io::Error::other(other.to_string()),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct RowKey {
    rep_id: usize,
    key_index: usize,
    sample_index: usize,
}

/// Parses a dataset, rejecting codes below `threshold`.
pub fn read_dataset_from<R: Read>(input: R, threshold: AdcCode) -> Result<Dataset, StoreError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();

    match records.next() {
        Some(Ok(header)) if header.iter().eq(DATASET_HEADER) => {}
        Some(Ok(header)) => {
            return Err(StoreError::parse(
                1,
                format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
            ))
        }
        Some(Err(e)) => return Err(StoreError::parse(1, e.to_string())),
        None => return Err(StoreError::parse(1, "missing header")),
    }

    let mut data = Dataset::new();
    // Presses of the current repetition, and the previous row for order checks.
    let mut current: Option<(String, RowKey)> = None;
    let mut rep_presses: Vec<(KeyLabel, Vec<AdcCode>)> = Vec::new();

    let flush = |data: &mut Dataset, user: &str, presses: &mut Vec<(KeyLabel, Vec<AdcCode>)>| {
        if !presses.is_empty() {
            let entry = EntryAttempt::from_waveforms(presses.drain(..));
            data.entry(user.to_string()).or_default().push(entry);
        }
    };

    for result in records {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            StoreError::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DATASET_HEADER.len() {
            return Err(StoreError::parse(
                line,
                format!("expected 6 fields, found {}", record.len()),
            ));
        }
        let field = |i: usize| -> Result<usize, StoreError> {
            record[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| StoreError::parse(line, format!("{}: {e}", DATASET_HEADER[i])))
        };
        let user = record[0].to_string();
        if user.is_empty() {
            return Err(StoreError::parse(line, "empty user_id"));
        }
        let key = RowKey {
            rep_id: field(1)?,
            key_index: field(2)?,
            sample_index: field(4)?,
        };
        let label = field(3)?;
        let label = u8::try_from(label)
            .ok()
            .and_then(|d| KeyLabel::new(d).ok())
            .ok_or_else(|| StoreError::invalid(line, format!("key_label {label} is not a digit")))?;
        let code = field(5)?;
        let code = u16::try_from(code)
            .ok()
            .and_then(|c| AdcCode::new(c).ok())
            .ok_or_else(|| StoreError::invalid(line, format!("adc_code {code} exceeds 1023")))?;
        if code < threshold {
            return Err(StoreError::invalid(
                line,
                format!("adc_code {code} is below the comparator threshold {threshold}"),
            ));
        }

        let new_user = current.as_ref().is_none_or(|(u, _)| *u != user);
        if new_user {
            if let Some((prev_user, _)) = &current {
                if user < *prev_user || data.contains_key(&user) {
                    return Err(StoreError::invalid(line, "rows are not sorted by user_id"));
                }
                flush(&mut data, prev_user, &mut rep_presses);
            }
            if key
                != (RowKey {
                    rep_id: 0,
                    key_index: 0,
                    sample_index: 0,
                })
            {
                return Err(StoreError::invalid(
                    line,
                    "a user's first row must have rep_id, key_index and sample_index 0",
                ));
            }
            rep_presses.push((label, vec![code]));
        } else {
            let (_, prev) = current.as_ref().expect("checked above");
            if key.rep_id == prev.rep_id && key.key_index == prev.key_index {
                if key.sample_index != prev.sample_index + 1 {
                    return Err(StoreError::invalid(line, "sample_index is not contiguous"));
                }
                let press = rep_presses.last_mut().expect("press in progress");
                if press.0 != label {
                    return Err(StoreError::invalid(line, "key_label changes within a press"));
                }
                press.1.push(code);
            } else if key.rep_id == prev.rep_id {
                if key.key_index != prev.key_index + 1 || key.sample_index != 0 {
                    return Err(StoreError::invalid(line, "key_index is not contiguous"));
                }
                rep_presses.push((label, vec![code]));
            } else {
                if key.rep_id != prev.rep_id + 1 || key.key_index != 0 || key.sample_index != 0 {
                    return Err(StoreError::invalid(line, "rep_id is not contiguous"));
                }
                let user_ref = user.clone();
                flush(&mut data, &user_ref, &mut rep_presses);
                rep_presses.push((label, vec![code]));
            }
        }
        current = Some((user, key));
    }
    if let Some((user, _)) = current {
        flush(&mut data, &user, &mut rep_presses);
    }
    Ok(data)
}

pub fn read_dataset(path: &Path, threshold: AdcCode) -> Result<Dataset, StoreError> {
    read_dataset_from(BufReader::new(File::open(path)?), threshold)
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    version: u32,
    #[serde(rename = "body")]
    body: T,
}

fn json_error(e: serde_json::Error) -> StoreError {
    if e.is_io() {
        StoreError::Io(e.into())
    } else {
        StoreError::parse(e.line() as u64, e.to_string())
    }
}

fn to_document<T: Serialize>(version: u32, body: &T) -> Result<Vec<u8>, StoreError> {
    let mut bytes = serde_json::to_vec_pretty(&Versioned { version, body }).map_err(json_error)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn from_document<T: for<'de> Deserialize<'de>>(bytes: &[u8], expected: u32) -> Result<T, StoreError> {
    let probe: VersionProbe = serde_json::from_slice(bytes).map_err(json_error)?;
    if probe.version != expected {
        return Err(StoreError::Version {
            found: probe.version,
            expected,
        });
    }
    let doc: Versioned<T> = serde_json::from_slice(bytes).map_err(json_error)?;
    Ok(doc.body)
}

pub fn profile_to_bytes(profile: &UserProfile) -> Result<Vec<u8>, StoreError> {
    to_document(PROFILE_VERSION, profile)
}

pub fn profile_from_bytes(bytes: &[u8]) -> Result<UserProfile, StoreError> {
    from_document(bytes, PROFILE_VERSION)
}

pub fn save_profile(profile: &UserProfile, path: &Path) -> Result<(), StoreError> {
    let bytes = profile_to_bytes(profile)?;
    write_atomic(path, |out| out.write_all(&bytes))
}

pub fn load_profile(path: &Path) -> Result<UserProfile, StoreError> {
    profile_from_bytes(&std::fs::read(path)?)
}

pub fn report_to_bytes(report: &EvalReport) -> Result<Vec<u8>, StoreError> {
    to_document(REPORT_VERSION, report)
}

pub fn report_from_bytes(bytes: &[u8]) -> Result<EvalReport, StoreError> {
    from_document(bytes, REPORT_VERSION)
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<(), StoreError> {
    let bytes = report_to_bytes(report)?;
    write_atomic(path, |out| out.write_all(&bytes))
}

pub fn load_report(path: &Path) -> Result<EvalReport, StoreError> {
    report_from_bytes(&std::fs::read(path)?)
}
