//! Labeled input records and the JSONL loader.
//!
//! One JSON object per line: `{"id": ..., "text": ..., "label": "safe"|"unsafe", "group": ...}`.
//! `group` is optional and only used for stratified subsampling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::GroundTruth;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub id: String,
    #[serde(default)]
    pub text: String,
    pub label: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<InputRecord>,
}

impl Dataset {
    pub fn new(records: Vec<InputRecord>) -> Self {
        Dataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ground_truth(&self) -> HashMap<String, GroundTruth> {
        self.records.iter().map(|r| (r.id.clone(), r.label)).collect()
    }

    /// Ids of records whose group equals `group`.
    pub fn group_members(&self, group: &str) -> HashSet<String> {
        self.records
            .iter()
            .filter(|r| r.group.as_deref() == Some(group))
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A dataset plus what the loader dropped along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// 1-based line numbers that were not valid UTF-8.
    pub undecodable_lines: Vec<usize>,
    pub duplicate_ids: Vec<String>,
}

/// Loads a JSONL dataset from a file. See [`parse_dataset`].
pub fn load_dataset(path: &Path, stratify: Option<usize>, seed: u64) -> Result<LoadedDataset> {
    let bytes = std::fs::read(path)?;
    parse_dataset(&bytes, path, stratify, seed)
}

/// Parses dataset bytes.
///
/// Lines that are not valid UTF-8 are skipped and counted; malformed JSON
/// is a hard error. Repeated ids keep the first record. With `stratify =
/// Some(k)`, at most `k` records are drawn from each group with a seeded
/// shuffle; records without a group form their own group. Surviving
/// records keep their file order.
pub fn parse_dataset(bytes: &[u8], path: &Path, stratify: Option<usize>, seed: u64) -> Result<LoadedDataset> {
    let mut loaded = LoadedDataset::default();
    let mut seen = HashSet::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let Ok(line) = std::str::from_utf8(raw) else {
            loaded.undecodable_lines.push(line_no);
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: InputRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if seen.insert(record.id.clone()) {
            loaded.dataset.records.push(record);
        } else {
            loaded.duplicate_ids.push(record.id);
        }
    }
    if loaded.dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(k) = stratify {
        loaded.dataset = stratified_sample(&loaded.dataset, k, seed);
    }
    Ok(loaded)
}

pub fn stratified_sample(dataset: &Dataset, per_group: usize, seed: u64) -> Dataset {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, record) in dataset.records.iter().enumerate() {
        groups.entry(record.group.as_deref().unwrap_or("")).or_default().push(i);
    }
    let mut keep = Vec::new();
    for (name, mut members) in groups {
        let mut rng = rng::stream(rng::derive_seed(seed, name));
        members.shuffle(&mut rng);
        members.truncate(per_group);
        keep.extend(members);
    }
    keep.sort_unstable();
    Dataset::new(keep.into_iter().map(|i| dataset.records[i].clone()).collect())
}
