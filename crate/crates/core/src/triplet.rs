//! Triplet assembly and SFT export.
//!
//! A triplet pairs a generated system prompt and its source instruction with
//! a freshly generated response; corpus responses are never consulted.
//! Triplets convert into SFT examples under three export modes (role-and-
//! rules, fixed baseline system prompt, no system prompt) and export as
//! trainer-agnostic `{"input", "target"}` JSONL with a metadata sidecar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assets::{self, fill_slot};
use crate::corpus::InstructionRecord;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};
use crate::ioutil;
use crate::promptgen::SystemPrompt;
use crate::seeded::{sample_indices, shuffle, DetRng};

/// Generation provenance carried by each triplet. The `cached` flag is
/// runtime-only: archives must be byte-identical across resumed runs, and
/// whether a completion came from the cache is exactly what a resume
/// changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletMeta {
    pub model_tag: String,
    pub template_id: String,
    pub created_at: u64,
    pub run_id: String,
    #[serde(skip)]
    pub cached: bool,
}

/// One training example: (system prompt, instruction, response).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub system_prompt: SystemPrompt,
    pub instruction: String,
    pub response: String,
    pub meta: TripletMeta,
}

/// How an SFT input line is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    /// Generated system prompt + instruction through the response template.
    Rnr,
    /// Fixed baseline system prompt + instruction.
    FixedSystem,
    /// Instruction only.
    NoSystem,
}

impl ExportMode {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "rnr" => Some(ExportMode::Rnr),
            "fixed_system" => Some(ExportMode::FixedSystem),
            "no_system" => Some(ExportMode::NoSystem),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ExportMode::Rnr => "rnr",
            ExportMode::FixedSystem => "fixed_system",
            ExportMode::NoSystem => "no_system",
        }
    }
}

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub input_text: String,
    pub target_text: String,
    pub mode: ExportMode,
}

/// Decoding settings for response generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseGenConfig {
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ResponseGenConfig {
    fn default() -> Self {
        ResponseGenConfig {
            model_tag: "teacher".into(),
            temperature: 1.0,
            max_tokens: 2048,
        }
    }
}

/// Render the response-generation prompt: system prompt raw text, one blank
/// line, the instruction. Positional, byte-exact, no escaping.
pub fn render_response_prompt(system_prompt: &SystemPrompt, instruction: &str) -> String {
    let filled = fill_slot(assets::RESPONSE_TEMPLATE, "instruction", instruction);
    fill_slot(&filled, "system_prompt", &system_prompt.raw_text)
}

/// Generate the response for one (record, system prompt) pair and assemble
/// the triplet. The record's original response is never consulted.
pub fn generate_triplet(
    record: &InstructionRecord,
    system_prompt: &SystemPrompt,
    gateway: &Gateway,
    config: &ResponseGenConfig,
    run_id: &str,
) -> Result<Triplet> {
    let request = CompletionRequest {
        prompt: render_response_prompt(system_prompt, &record.instruction),
        model_tag: config.model_tag.clone(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        request_id: format!("resp:{}", record.id),
    };
    let completion = gateway.complete_cached(&request)?;
    if completion.text.trim().is_empty() {
        return Err(Error::EmptyCompletion {
            request_id: completion.request_id,
        });
    }
    Ok(Triplet {
        system_prompt: system_prompt.clone(),
        instruction: record.instruction.clone(),
        response: completion.text,
        meta: TripletMeta {
            model_tag: config.model_tag.clone(),
            template_id: assets::RESPONSE_TEMPLATE_ID.to_string(),
            created_at: completion.created_at,
            run_id: run_id.to_string(),
            cached: completion.cached,
        },
    })
}

/// Convert a triplet into its role-and-rules SFT example.
pub fn sft_from_triplet(triplet: &Triplet) -> SftExample {
    SftExample {
        input_text: render_response_prompt(&triplet.system_prompt, &triplet.instruction),
        target_text: triplet.response.clone(),
        mode: ExportMode::Rnr,
    }
}

/// Build a baseline SFT example (fixed or absent system prompt).
pub fn sft_baseline(instruction: &str, response: &str, mode: ExportMode) -> SftExample {
    let input_text = match mode {
        ExportMode::FixedSystem => format!("{}\n\n{instruction}", assets::FIXED_SYSTEM_PROMPT),
        ExportMode::NoSystem => instruction.to_string(),
        ExportMode::Rnr => panic!("rnr examples are built from triplets"),
    };
    SftExample {
        input_text,
        target_text: response.to_string(),
        mode,
    }
}

/// Mix `n_rnr` seeded-sampled triplets into a baseline example list and
/// shuffle the combined set with the same seed.
pub fn mix_training_data(
    rnr: &[Triplet],
    baseline: &[SftExample],
    n_rnr: usize,
    seed: u64,
) -> Result<Vec<SftExample>> {
    if n_rnr > rnr.len() {
        return Err(Error::MixSizeExceeded {
            requested: n_rnr,
            available: rnr.len(),
        });
    }
    let mut rng = DetRng::new(seed);
    let mut mixed: Vec<SftExample> = if n_rnr == 0 {
        Vec::new()
    } else {
        sample_indices(rnr.len(), n_rnr, &mut rng)
            .into_iter()
            .map(|i| sft_from_triplet(&rnr[i]))
            .collect()
    };
    mixed.extend(baseline.iter().cloned());
    shuffle(&mut mixed, &mut rng);
    Ok(mixed)
}

#[derive(Debug, Serialize)]
struct SftLine<'a> {
    input: &'a str,
    target: &'a str,
}

#[derive(Debug, Deserialize)]
struct SftLineOwned {
    input: String,
    target: String,
}

/// Metadata sidecar written beside every SFT export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SftSidecar {
    pub run_id: String,
    pub template_id: String,
    pub counts: BTreeMap<String, usize>,
    pub source_digests: BTreeMap<String, String>,
    pub sft_digest: String,
}

/// Result of an export: line count and content digest of the written file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportSummary {
    pub count: usize,
    pub digest: String,
    pub path: PathBuf,
    pub sidecar_path: PathBuf,
}

/// Sidecar path for an SFT file: `<file>.meta.json`.
pub fn sidecar_path(sft_path: &Path) -> PathBuf {
    let mut name = sft_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sft".to_string());
    name.push_str(".meta.json");
    sft_path.with_file_name(name)
}

/// Export SFT examples as `{"input", "target"}` JSONL plus a metadata
/// sidecar. Same inputs give the same bytes and the same digest.
pub fn export_sft_dataset(
    examples: &[SftExample],
    path: &Path,
    run_id: &str,
    source_digests: BTreeMap<String, String>,
) -> Result<ExportSummary> {
    let lines: Vec<SftLine> = examples
        .iter()
        .map(|e| SftLine {
            input: &e.input_text,
            target: &e.target_text,
        })
        .collect();
    let body = ioutil::to_jsonl(&lines)?;
    ioutil::atomic_write(path, body.as_bytes())?;
    let digest = sha256_hex(body.as_bytes());

    let mut counts = BTreeMap::new();
    for example in examples {
        *counts.entry(example.mode.tag().to_string()).or_insert(0) += 1;
    }
    counts.insert("total".to_string(), examples.len());

    let sidecar = SftSidecar {
        run_id: run_id.to_string(),
        template_id: assets::RESPONSE_TEMPLATE_ID.to_string(),
        counts,
        source_digests,
        sft_digest: digest.clone(),
    };
    let sidecar_file = sidecar_path(path);
    let sidecar_bytes = serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::Schema {
        path: sidecar_file.clone(),
        detail: format!("sidecar serialization failed: {e}"),
    })?;
    ioutil::atomic_write(&sidecar_file, &sidecar_bytes)?;

    Ok(ExportSummary {
        count: examples.len(),
        digest,
        path: path.to_path_buf(),
        sidecar_path: sidecar_file,
    })
}

/// Load an exported SFT file back into examples. The mode is inferred from
/// the input shape: inputs starting with the fixed baseline prompt are
/// `fixed_system`, everything else is treated as `no_system`.
pub fn load_sft_dataset(path: &Path) -> Result<Vec<SftExample>> {
    let lines: Vec<SftLineOwned> = ioutil::read_jsonl(path)?;
    Ok(lines
        .into_iter()
        .map(|line| {
            let mode = if line.input.starts_with(assets::FIXED_SYSTEM_PROMPT) {
                ExportMode::FixedSystem
            } else {
                ExportMode::NoSystem
            };
            SftExample {
                input_text: line.input,
                target_text: line.target,
                mode,
            }
        })
        .collect())
}

/// Write the full triplet archive (system-prompt structure included) for
/// auditing.
pub fn write_triplet_archive(path: &Path, triplets: &[Triplet]) -> Result<()> {
    ioutil::write_jsonl(path, triplets)
}

pub fn load_triplet_archive(path: &Path) -> Result<Vec<Triplet>> {
    ioutil::read_jsonl(path)
}
