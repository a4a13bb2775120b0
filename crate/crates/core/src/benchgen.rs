//! Benchmark construction.
//!
//! Three evaluation sets share one case shape: an expert-written set loaded
//! from a file, and two synthesized sets built by few-shot prompting — one
//! that expands every synthesized system prompt to three instructions
//! (tripling the case count), and one that keeps a single instruction per
//! case. Few-shot demonstrations are drawn seeded from the expert set, with
//! draws pre-assigned in input order so fan-out cannot perturb them.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assets::{self, fill_slot};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};
use crate::ioutil;
use crate::promptgen::{extract_generation_output, SpanOutcome};
use crate::rules;
use crate::seeded::{sample_indices, DetRng};

pub const FEW_SHOT_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseOrigin {
    Expert,
    Awesome,
    Alpacafarm,
    Synthetic,
}

/// One (system prompt, instruction) evaluation case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub case_id: String,
    #[serde(rename = "system_prompt")]
    pub system_prompt_text: String,
    pub instruction: String,
    pub origin: CaseOrigin,
    pub few_shot_ids: Vec<String>,
    pub rules: Vec<String>,
}

/// A named benchmark with its construction seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSet {
    pub name: String,
    pub cases: Vec<BenchmarkCase>,
    pub construction_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SetHeader {
    name: String,
    construction_seed: u64,
}

/// Synthesis settings for benchmark construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchGenConfig {
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub parse_retries: u32,
}

impl Default for BenchGenConfig {
    fn default() -> Self {
        BenchGenConfig {
            model_tag: "teacher".into(),
            temperature: 1.0,
            max_tokens: 1024,
            parse_retries: 2,
        }
    }
}

fn validate_case_ids(cases: &[BenchmarkCase]) -> Result<()> {
    let mut seen = HashSet::new();
    for case in cases {
        if !seen.insert(case.case_id.as_str()) {
            return Err(Error::DuplicateCaseId {
                case_id: case.case_id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawExpertCase {
    case_id: Option<String>,
    system_prompt: String,
    instruction: String,
}

/// Load the expert-written benchmark from a JSONL file of
/// `{case_id?, system_prompt, instruction}` objects. Rules are parsed from
/// each system prompt with the shared grammar.
pub fn load_expert_benchmark(path: &Path) -> Result<BenchmarkSet> {
    let raw: Vec<RawExpertCase> = ioutil::read_jsonl(path)?;
    if raw.is_empty() {
        return Err(Error::EmptyDataset { path: path.into() });
    }
    let mut cases = Vec::with_capacity(raw.len());
    for (idx, case) in raw.into_iter().enumerate() {
        let case_id = case.case_id.unwrap_or_else(|| format!("expert-{idx:03}"));
        if case.system_prompt.trim().is_empty() {
            return Err(Error::MalformedCase {
                case_id,
                detail: "empty system prompt".into(),
            });
        }
        if case.instruction.trim().is_empty() {
            return Err(Error::MalformedCase {
                case_id,
                detail: "empty instruction".into(),
            });
        }
        let split = rules::split_role_and_rules(&case.system_prompt);
        if split.role_text.is_empty() {
            return Err(Error::MalformedCase {
                case_id,
                detail: "system prompt has no role description before its rules".into(),
            });
        }
        cases.push(BenchmarkCase {
            case_id,
            system_prompt_text: case.system_prompt,
            instruction: case.instruction,
            origin: CaseOrigin::Expert,
            few_shot_ids: Vec::new(),
            rules: split.rules,
        });
    }
    validate_case_ids(&cases)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("expert")
        .to_string();
    Ok(BenchmarkSet {
        name,
        cases,
        construction_seed: 0,
    })
}

/// Draw the few-shot demonstration indices for one synthesis (6 distinct
/// expert cases).
pub fn draw_few_shot(expert_len: usize, rng: &mut DetRng) -> Result<Vec<usize>> {
    if expert_len < FEW_SHOT_COUNT {
        return Err(Error::ExpertSetTooSmall {
            size: expert_len,
            needed: FEW_SHOT_COUNT,
        });
    }
    Ok(sample_indices(expert_len, FEW_SHOT_COUNT, rng))
}

fn render_fewshot_samples(expert_set: &BenchmarkSet, demo_indices: &[usize]) -> String {
    let mut samples = String::new();
    for (i, &idx) in demo_indices.iter().enumerate() {
        let case = &expert_set.cases[idx];
        if i > 0 {
            samples.push_str("\n\n");
        }
        samples.push_str(&format!(
            "<sample_{n}> <instruction> {instruction} </instruction> <output> {output} </output> </sample_{n}>",
            n = i + 1,
            instruction = case.instruction,
            output = case.system_prompt_text,
        ));
    }
    samples
}

/// Render the few-shot benchmark-synthesis prompt for one instruction.
pub fn render_synthesis_prompt(
    instruction: &str,
    expert_set: &BenchmarkSet,
    demo_indices: &[usize],
) -> String {
    let filled = fill_slot(
        assets::bench_fewshot_template(),
        "samples",
        &render_fewshot_samples(expert_set, demo_indices),
    );
    fill_slot(&filled, "instruction", instruction)
}

/// Synthesize one benchmark case: few-shot prompt the backend for a system
/// prompt over `instruction`, parse it, and record which expert cases served
/// as demonstrations. Parse failures and refusals are retried up to the
/// configured budget, bypassing the cache.
pub fn synthesize_case(
    instruction: &str,
    case_id: &str,
    expert_set: &BenchmarkSet,
    demo_indices: &[usize],
    origin: CaseOrigin,
    gateway: &Gateway,
    config: &BenchGenConfig,
) -> Result<BenchmarkCase> {
    assert_eq!(demo_indices.len(), FEW_SHOT_COUNT);
    let prompt = render_synthesis_prompt(instruction, expert_set, demo_indices);
    let mut last_error = String::new();
    for attempt in 0..=config.parse_retries {
        let request = CompletionRequest {
            prompt: prompt.clone(),
            model_tag: config.model_tag.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            request_id: format!("bench:{case_id}:a{attempt}"),
        };
        let completion = if attempt == 0 {
            gateway.complete_cached(&request)?
        } else {
            gateway.complete_fresh(&request)?
        };
        match extract_generation_output(&completion.text) {
            Ok(SpanOutcome::Text(span)) => {
                let span = span.trim();
                let split = rules::split_role_and_rules(span);
                if split.role_text.is_empty() {
                    last_error = Error::EmptyRole.to_string();
                    continue;
                }
                return Ok(BenchmarkCase {
                    case_id: case_id.to_string(),
                    system_prompt_text: span.to_string(),
                    instruction: instruction.to_string(),
                    origin,
                    few_shot_ids: demo_indices
                        .iter()
                        .map(|&i| expert_set.cases[i].case_id.clone())
                        .collect(),
                    rules: split.rules,
                });
            }
            Ok(SpanOutcome::Refusal) => last_error = "backend refused".to_string(),
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(Error::MalformedCase {
        case_id: case_id.to_string(),
        detail: format!(
            "synthesis failed after {} attempts: {last_error}",
            config.parse_retries + 1
        ),
    })
}

static NUMBERED_ITEM: std::sync::LazyLock<regex::Regex> =
    std::sync::LazyLock::new(|| regex::Regex::new(r"(?m)^\s*\d+[.)]\s+(.+?)\s*$").unwrap());

fn parse_numbered_items(text: &str) -> Vec<String> {
    NUMBERED_ITEM
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

/// Ask the backend for exactly two more instructions plausible under the
/// case's system prompt.
pub fn expand_case_instructions(
    case: &BenchmarkCase,
    gateway: &Gateway,
    config: &BenchGenConfig,
) -> Result<[String; 2]> {
    let prompt = fill_slot(
        assets::EXPANSION_TEMPLATE,
        "system_prompt",
        &case.system_prompt_text,
    );
    let mut last_got = 0;
    for attempt in 0..=config.parse_retries {
        let request = CompletionRequest {
            prompt: prompt.clone(),
            model_tag: config.model_tag.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            request_id: format!("expand:{}:a{attempt}", case.case_id),
        };
        let completion = if attempt == 0 {
            gateway.complete_cached(&request)?
        } else {
            gateway.complete_fresh(&request)?
        };
        let items = parse_numbered_items(&completion.text);
        if items.len() == 2 {
            let mut iter = items.into_iter();
            return Ok([iter.next().unwrap(), iter.next().unwrap()]);
        }
        last_got = items.len();
        tracing::warn!(
            case_id = %case.case_id,
            attempt,
            got = last_got,
            "expansion arity mismatch, retrying"
        );
    }
    Err(Error::ExpansionArity {
        expected: 2,
        got: last_got,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    /// Synthesize then expand every case to three instructions.
    Awesome,
    /// One case per instruction, no expansion.
    Alpacafarm,
}

impl BenchMode {
    pub fn origin(self) -> CaseOrigin {
        match self {
            BenchMode::Awesome => CaseOrigin::Awesome,
            BenchMode::Alpacafarm => CaseOrigin::Alpacafarm,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            BenchMode::Awesome => "awesome",
            BenchMode::Alpacafarm => "alpacafarm",
        }
    }
}

/// One source instruction that could not be synthesized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Omission {
    pub index: usize,
    pub instruction: String,
    pub error: String,
}

/// Build a synthesized benchmark over `instructions`.
///
/// Failed instructions are omitted and reported rather than aborting the
/// whole run; in awesome mode a failure anywhere in a source instruction's
/// group drops the entire group, preserving the three-cases-per-prompt
/// structure of the successful remainder.
pub fn build_benchmark(
    instructions: &[String],
    expert_set: &BenchmarkSet,
    gateway: &Gateway,
    mode: BenchMode,
    seed: u64,
    config: &BenchGenConfig,
) -> Result<(BenchmarkSet, Vec<Omission>)> {
    // pre-assign few-shot draws in input order
    let mut rng = DetRng::new(seed);
    let mut draws = Vec::with_capacity(instructions.len());
    for _ in instructions {
        draws.push(draw_few_shot(expert_set.cases.len(), &mut rng)?);
    }

    let results: Vec<Result<Vec<BenchmarkCase>>> =
        gateway.map_ordered(instructions, |idx, instruction| {
            let base_id = format!("{}-{idx:04}", mode.tag());
            let case = synthesize_case(
                instruction,
                &base_id,
                expert_set,
                &draws[idx],
                mode.origin(),
                gateway,
                config,
            )?;
            match mode {
                BenchMode::Alpacafarm => Ok(vec![case]),
                BenchMode::Awesome => {
                    let extra = expand_case_instructions(&case, gateway, config)?;
                    let mut group = vec![case.clone()];
                    for (j, new_instruction) in extra.into_iter().enumerate() {
                        group.push(BenchmarkCase {
                            case_id: format!("{base_id}-x{}", j + 1),
                            instruction: new_instruction,
                            ..case.clone()
                        });
                    }
                    Ok(group)
                }
            }
        });

    let mut cases = Vec::new();
    let mut omissions = Vec::new();
    for (idx, result) in results.into_iter().enumerate() {
        match result {
            Ok(group) => cases.extend(group),
            Err(e) => omissions.push(Omission {
                index: idx,
                instruction: instructions[idx].clone(),
                error: e.to_string(),
            }),
        }
    }
    validate_case_ids(&cases)?;
    Ok((
        BenchmarkSet {
            name: mode.tag().to_string(),
            cases,
            construction_seed: seed,
        },
        omissions,
    ))
}

/// Persist a benchmark: one header line `{name, construction_seed}` followed
/// by one case per line.
pub fn save_benchmark(path: &Path, set: &BenchmarkSet) -> Result<()> {
    let mut lines = Vec::with_capacity(set.cases.len() + 1);
    lines.push(serde_json::to_value(SetHeader {
        name: set.name.clone(),
        construction_seed: set.construction_seed,
    })
    .map_err(|e| Error::schema(path, format!("header: {e}")))?);
    for case in &set.cases {
        lines.push(
            serde_json::to_value(case).map_err(|e| Error::schema(path, format!("case: {e}")))?,
        );
    }
    ioutil::write_jsonl(path, &lines)
}

/// Load a benchmark saved by [`save_benchmark`].
pub fn load_benchmark(path: &Path) -> Result<BenchmarkSet> {
    let lines: Vec<serde_json::Value> = ioutil::read_jsonl(path)?;
    let mut iter = lines.into_iter();
    let header: SetHeader = match iter.next() {
        Some(value) => serde_json::from_value(value)
            .map_err(|e| Error::schema(path, format!("header line: {e}")))?,
        None => return Err(Error::EmptyDataset { path: path.into() }),
    };
    let mut cases = Vec::new();
    for (idx, value) in iter.enumerate() {
        let case: BenchmarkCase = serde_json::from_value(value)
            .map_err(|e| Error::schema(path, format!("case line {}: {e}", idx + 2)))?;
        cases.push(case);
    }
    validate_case_ids(&cases)?;
    Ok(BenchmarkSet {
        name: header.name,
        cases,
        construction_seed: header.construction_seed,
    })
}
