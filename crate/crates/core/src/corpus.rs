//! Instruction-corpus and human-label ingestion.
//!
//! Loaders accept Alpaca-style JSON arrays and generic JSONL, normalize them
//! into [`InstructionRecord`]s with deterministic ids, and provide seeded
//! subsetting. Original corpus responses are retained for provenance only;
//! nothing downstream ever reads them into a prompt.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ioutil;
use crate::seeded::{sample_indices, DetRng};

/// One source instruction from an instruction-tuning corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub instruction: String,
    pub source: String,
    pub original_response: Option<String>,
}

/// Supported input formats for [`load_ift_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IftFormat {
    /// JSON array of `{"instruction", "input", "output"}` objects.
    AlpacaJson,
    /// One JSON object per line with a required `"instruction"` field.
    GenericJsonl,
}

impl IftFormat {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "alpaca_json" => Some(IftFormat::AlpacaJson),
            "generic_jsonl" => Some(IftFormat::GenericJsonl),
            _ => None,
        }
    }
}

/// Pass/fail verdict attached to a case by an evaluator (human or judge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelVerdict {
    Pass,
    Fail,
}

impl LabelVerdict {
    /// Case-insensitive normalization of a verdict token.
    pub fn parse(token: &str) -> Result<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "pass" => Ok(LabelVerdict::Pass),
            "fail" => Ok(LabelVerdict::Fail),
            _ => Err(Error::UnknownVerdict {
                token: token.to_string(),
            }),
        }
    }
}

/// One human evaluation label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanLabel {
    pub case_id: String,
    pub evaluator_id: String,
    pub verdict: LabelVerdict,
}

fn synth_id(source: &str, ordinal: usize) -> String {
    format!("{source}-{ordinal:06}")
}

fn non_empty(value: Option<&str>) -> Option<String> {
    value
        .map(str::to_string)
        .filter(|s| !s.trim().is_empty())
}

/// Load an instruction-tuning corpus into ordered records.
///
/// Ids are synthesized as `<source>-<zero-padded ordinal>` in file order.
/// For Alpaca records with a non-empty `input` field the instruction becomes
/// `instruction + "\n" + input`, which is the one canonical mapping of the
/// two-field schema onto a single instruction string.
pub fn load_ift_dataset(path: &Path, format: IftFormat) -> Result<Vec<InstructionRecord>> {
    let records = match format {
        IftFormat::AlpacaJson => load_alpaca_json(path)?,
        IftFormat::GenericJsonl => load_generic_jsonl(path)?,
    };
    if records.is_empty() {
        return Err(Error::EmptyDataset { path: path.into() });
    }
    Ok(records)
}

fn source_tag_for(path: &Path, format: IftFormat) -> String {
    match format {
        IftFormat::AlpacaJson => "alpaca".to_string(),
        IftFormat::GenericJsonl => path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("jsonl")
            .to_ascii_lowercase(),
    }
}

fn load_alpaca_json(path: &Path) -> Result<Vec<InstructionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::schema(path, format!("not valid JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected a top-level JSON array"))?;
    let source = source_tag_for(path, IftFormat::AlpacaJson);

    let mut records = Vec::with_capacity(items.len());
    for (idx, item) in items.iter().enumerate() {
        let instruction = item
            .get("instruction")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                Error::schema(path, format!("record {idx}: missing instruction field"))
            })?;
        let input = item.get("input").and_then(|v| v.as_str()).unwrap_or("");
        let full = if input.trim().is_empty() {
            instruction.to_string()
        } else {
            format!("{instruction}\n{input}")
        };
        if full.trim().is_empty() {
            return Err(Error::schema(
                path,
                format!("record {idx}: instruction is empty after trimming"),
            ));
        }
        records.push(InstructionRecord {
            id: synth_id(&source, idx),
            instruction: full,
            source: source.clone(),
            original_response: non_empty(item.get("output").and_then(|v| v.as_str())),
        });
    }
    Ok(records)
}

fn load_generic_jsonl(path: &Path) -> Result<Vec<InstructionRecord>> {
    let lines: Vec<serde_json::Value> = ioutil::read_jsonl(path)?;
    let source = source_tag_for(path, IftFormat::GenericJsonl);

    let mut records = Vec::with_capacity(lines.len());
    for (idx, item) in lines.iter().enumerate() {
        let instruction = item
            .get("instruction")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                Error::schema(path, format!("line {}: missing instruction field", idx + 1))
            })?;
        if instruction.trim().is_empty() {
            return Err(Error::schema(
                path,
                format!("line {}: instruction is empty after trimming", idx + 1),
            ));
        }
        let original = item
            .get("output")
            .or_else(|| item.get("response"))
            .and_then(|v| v.as_str());
        records.push(InstructionRecord {
            id: synth_id(&source, idx),
            instruction: instruction.to_string(),
            source: source.clone(),
            original_response: non_empty(original),
        });
    }
    Ok(records)
}

/// Uniform seeded sample of `n` records without replacement, returned in
/// original corpus order. Pure in `(records, n, seed)`.
pub fn sample_subset(
    records: &[InstructionRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<InstructionRecord>> {
    if n == 0 || n > records.len() {
        return Err(Error::BadSampleSize {
            n,
            len: records.len(),
        });
    }
    let mut rng = DetRng::new(seed);
    let picked = sample_indices(records.len(), n, &mut rng);
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

/// First `n` records in corpus order (prefix mode subsetting).
pub fn take_prefix(records: &[InstructionRecord], n: usize) -> Result<Vec<InstructionRecord>> {
    if n == 0 || n > records.len() {
        return Err(Error::BadSampleSize {
            n,
            len: records.len(),
        });
    }
    Ok(records[..n].to_vec())
}

/// Persist records as canonical JSONL (`id`, `instruction`, `source`,
/// `original_response`).
pub fn save_records(path: &Path, records: &[InstructionRecord]) -> Result<()> {
    ioutil::write_jsonl(path, records)
}

/// Load records from canonical JSONL.
pub fn load_records(path: &Path) -> Result<Vec<InstructionRecord>> {
    ioutil::read_jsonl(path)
}

#[derive(Debug, Deserialize)]
struct RawLabel {
    case_id: String,
    evaluator_id: String,
    verdict: String,
}

/// Load human labels from CSV (`.csv`) or JSONL, normalizing verdict tokens
/// case-insensitively and rejecting duplicate `(case_id, evaluator_id)`
/// pairs.
pub fn load_human_labels(path: &Path) -> Result<Vec<HumanLabel>> {
    let raw: Vec<RawLabel> = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let mut reader = csv::Reader::from_path(path).map_err(|e| {
            Error::schema(path, format!("csv open failed: {e}"))
        })?;
        reader
            .deserialize()
            .collect::<std::result::Result<Vec<RawLabel>, _>>()
            .map_err(|e| Error::schema(path, format!("csv parse failed: {e}")))?
    } else {
        ioutil::read_jsonl(path)?
    };

    let mut seen = std::collections::HashSet::new();
    let mut labels = Vec::with_capacity(raw.len());
    for row in raw {
        if !seen.insert((row.case_id.clone(), row.evaluator_id.clone())) {
            return Err(Error::DuplicateLabel {
                case_id: row.case_id,
                evaluator_id: row.evaluator_id,
            });
        }
        labels.push(HumanLabel {
            verdict: LabelVerdict::parse(&row.verdict)?,
            case_id: row.case_id,
            evaluator_id: row.evaluator_id,
        });
    }
    Ok(labels)
}
