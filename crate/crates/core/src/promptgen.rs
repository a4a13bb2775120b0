//! System-prompt synthesis: sample a rule count, render the generation
//! prompt, and parse the role-and-rules completion.
//!
//! Rule counts are drawn uniformly from 0..=8. The generating model may
//! refuse ("I don't know"), which is a licensed outcome recorded as a
//! refusal rather than an error; malformed completions are retried with a
//! freshly drawn rule count before failing.

use serde::{Deserialize, Serialize};

use crate::assets::{self, fill_slot, REFUSAL_MARKER};
use crate::corpus::InstructionRecord;
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};
use crate::rules;
use crate::seeded::DetRng;

pub const MAX_RULE_COUNT: u32 = 8;

/// A parsed role-and-rules system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPrompt {
    pub role_text: String,
    pub rules: Vec<String>,
    /// Full generated text inside the output tags.
    pub raw_text: String,
    pub k_requested: u32,
    pub k_parsed: u32,
    pub source_instruction_id: String,
    /// Set when the model generated a different number of rules than
    /// requested; the prompt is still accepted.
    #[serde(default)]
    pub k_mismatch: bool,
}

/// Outcome of one generation attempt: a prompt, or a licensed refusal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenerationOutcome {
    Prompt(SystemPrompt),
    Refusal,
}

/// Decoding settings for system-prompt generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptGenConfig {
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Regeneration attempts (with fresh rule-count draws) after a parse
    /// failure.
    pub parse_retries: u32,
}

impl Default for PromptGenConfig {
    fn default() -> Self {
        PromptGenConfig {
            model_tag: "teacher".into(),
            temperature: 1.0,
            max_tokens: 1024,
            parse_retries: 2,
        }
    }
}

/// Draw a rule count uniformly from `{0, ..., 8}`.
pub fn sample_rule_count(rng: &mut DetRng) -> u32 {
    rng.gen_below(9) as u32
}

/// Render the system-prompt-generation prompt for one instruction.
pub fn render_generation_prompt(instruction: &str, k: u32) -> Result<String> {
    if k > MAX_RULE_COUNT {
        return Err(Error::RuleCountOutOfRange { k });
    }
    debug_assert!(!instruction.trim().is_empty());
    let filled = fill_slot(
        assets::generation_template(),
        "variable_K",
        &format!("{k} requirements"),
    );
    Ok(fill_slot(&filled, "instruction", instruction))
}

/// Extract the span inside the first `<output>...</output>` pair.
///
/// A leading `</output>` before any opening tag is read as the opening tag,
/// matching the intended reading of a completion that mimics the third
/// demonstration's tag anomaly.
fn extract_output_span(completion: &str) -> Option<&str> {
    let open_end = match completion.find("<output>") {
        Some(pos) => pos + "<output>".len(),
        None => {
            let leading_ws = completion.len() - completion.trim_start().len();
            if completion.trim_start().starts_with("</output>") {
                leading_ws + "</output>".len()
            } else {
                return None;
            }
        }
    };
    let close = completion[open_end..].find("</output>")?;
    Some(&completion[open_end..open_end + close])
}

/// Result of span extraction for callers that handle refusals themselves.
pub enum SpanOutcome<'t> {
    Text(&'t str),
    Refusal,
}

/// Extract the output span, treating "I don't know" in the span (or anywhere
/// in the completion when the tags are absent or unbalanced) as a refusal.
pub fn extract_generation_output(completion: &str) -> Result<SpanOutcome<'_>> {
    match extract_output_span(completion) {
        Some(span) => {
            if span.contains(REFUSAL_MARKER) {
                Ok(SpanOutcome::Refusal)
            } else {
                Ok(SpanOutcome::Text(span))
            }
        }
        None => {
            if completion.contains(REFUSAL_MARKER) {
                Ok(SpanOutcome::Refusal)
            } else {
                Err(Error::MissingOutputTags)
            }
        }
    }
}

/// Parse a generation completion into a [`SystemPrompt`] or a refusal.
pub fn parse_system_prompt(
    completion: &str,
    k_requested: u32,
    source_instruction_id: &str,
) -> Result<GenerationOutcome> {
    let span = match extract_generation_output(completion)? {
        SpanOutcome::Refusal => return Ok(GenerationOutcome::Refusal),
        SpanOutcome::Text(span) => span.trim(),
    };
    let split = rules::split_role_and_rules(span);
    if split.role_text.is_empty() {
        return Err(Error::EmptyRole);
    }
    let k_parsed = split.rules.len() as u32;
    Ok(GenerationOutcome::Prompt(SystemPrompt {
        role_text: split.role_text,
        rules: split.rules,
        raw_text: span.to_string(),
        k_requested,
        k_parsed,
        source_instruction_id: source_instruction_id.to_string(),
        k_mismatch: k_parsed != k_requested,
    }))
}

fn generation_request(
    record: &InstructionRecord,
    k: u32,
    attempt: u32,
    config: &PromptGenConfig,
) -> Result<CompletionRequest> {
    Ok(CompletionRequest {
        prompt: render_generation_prompt(&record.instruction, k)?,
        model_tag: config.model_tag.clone(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        request_id: format!("gen:{}:a{attempt}", record.id),
    })
}

/// Generate a system prompt for one record.
///
/// `k_first` is the record's pre-assigned rule count; parse failures trigger
/// regeneration with fresh draws from `retry_rng`, bypassing the cache so a
/// stored malformed completion cannot repeat. Refusals are returned, not
/// retried.
pub fn generate_system_prompt(
    record: &InstructionRecord,
    gateway: &Gateway,
    k_first: u32,
    retry_rng: &mut DetRng,
    config: &PromptGenConfig,
) -> Result<GenerationOutcome> {
    let mut last_error: Option<Error> = None;
    for attempt in 0..=config.parse_retries {
        let k = if attempt == 0 {
            k_first
        } else {
            sample_rule_count(retry_rng)
        };
        let request = generation_request(record, k, attempt, config)?;
        let completion = if attempt == 0 {
            gateway.complete_cached(&request)?
        } else {
            gateway.complete_fresh(&request)?
        };
        match parse_system_prompt(&completion.text, k, &record.id) {
            Ok(GenerationOutcome::Prompt(prompt)) => {
                if prompt.k_mismatch {
                    tracing::warn!(
                        record_id = %record.id,
                        k_requested = prompt.k_requested,
                        k_parsed = prompt.k_parsed,
                        "rule-count mismatch accepted"
                    );
                }
                return Ok(GenerationOutcome::Prompt(prompt));
            }
            Ok(GenerationOutcome::Refusal) => return Ok(GenerationOutcome::Refusal),
            Err(e @ (Error::MissingOutputTags | Error::EmptyRole)) => {
                tracing::warn!(record_id = %record.id, attempt, error = %e, "parse failure");
                last_error = Some(e);
            }
            Err(other) => return Err(other),
        }
    }
    Err(Error::GenerationRetriesExhausted {
        record_id: record.id.clone(),
        attempts: config.parse_retries + 1,
        last: last_error.map(|e| e.to_string()).unwrap_or_default(),
    })
}

/// Per-record result of a batch generation run; the variants add up to the
/// input record count.
#[derive(Debug, Clone)]
pub enum RecordOutcome {
    Prompt(SystemPrompt),
    Refusal { record_id: String },
    Failed { record_id: String, error: String },
}

/// Generate system prompts for a whole record batch.
///
/// Rule counts are pre-assigned from the seed in input order before fan-out,
/// so the concurrency level cannot perturb which K each record gets; output
/// order matches input order.
pub fn generate_system_prompts(
    records: &[InstructionRecord],
    gateway: &Gateway,
    seed: u64,
    config: &PromptGenConfig,
) -> Vec<RecordOutcome> {
    let mut rng = DetRng::new(seed);
    let ks: Vec<u32> = records.iter().map(|_| sample_rule_count(&mut rng)).collect();
    let base = DetRng::new(seed);

    gateway.map_ordered(records, |idx, record| {
        let mut retry_rng = base.derive("gen-retry", idx as u64);
        match generate_system_prompt(record, gateway, ks[idx], &mut retry_rng, config) {
            Ok(GenerationOutcome::Prompt(prompt)) => RecordOutcome::Prompt(prompt),
            Ok(GenerationOutcome::Refusal) => RecordOutcome::Refusal {
                record_id: record.id.clone(),
            },
            Err(e) => RecordOutcome::Failed {
                record_id: record.id.clone(),
                error: e.to_string(),
            },
        }
    })
}
