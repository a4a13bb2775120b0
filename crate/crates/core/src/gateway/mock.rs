//! Deterministic mock backend.
//!
//! The mock is the offline stand-in for a hosted teacher/judge model: it
//! recognizes the pipeline's prompt kinds by their template markers and
//! synthesizes well-formed replies that are pure functions of the prompt
//! text, so any pipeline run against it is reproducible byte for byte.
//!
//! Fixtures take precedence over synthesis, which lets tests inject
//! refusals, malformed completions, or any other canned behavior for
//! selected prompts.
//!
//! Sentinels drive the judging paths:
//! - a response under test containing `[[VIOLATE:n]]` fails requirement `n`
//! - with the `PreferMarked` policy, the pairwise response containing
//!   `[[PREFERRED]]` wins; both or neither marked is a tie

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::assets;
use crate::digest::hex8;
use crate::error::{Error, Result};
use crate::gateway::{Backend, BackendFailure, CompletionRequest};
use crate::rules;

/// Sentinel that makes the mock judge fail requirement `n`.
pub const VIOLATE_SENTINEL_PREFIX: &str = "[[VIOLATE:";
/// Sentinel that makes the mock pairwise judge prefer a response under the
/// `PreferMarked` policy.
pub const PREFERRED_SENTINEL: &str = "[[PREFERRED]]";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "pattern")]
pub enum MatchRule {
    /// The prompt equals this string exactly.
    Exact(String),
    /// The prompt contains this substring.
    Contains(String),
}

impl MatchRule {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            MatchRule::Exact(p) => prompt == p,
            MatchRule::Contains(p) => prompt.contains(p),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    #[serde(rename = "match")]
    pub rule: MatchRule,
    pub text: String,
}

/// How the mock answers pairwise comparison prompts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwisePolicy {
    /// Always prefer the first-presented response (a maximally positionally
    /// biased judge).
    PreferFirst,
    /// Always prefer the second-presented response.
    PreferSecond,
    /// Prefer whichever response carries [`PREFERRED_SENTINEL`]; tie when
    /// both or neither do.
    #[default]
    PreferMarked,
}

/// Serializable mock configuration (the CLI loads this from a JSON file).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    #[serde(default)]
    pub fixtures: Vec<Fixture>,
    #[serde(default)]
    pub pairwise_policy: PairwisePolicy,
    /// When true, prompts that match no fixture and no known kind are
    /// errors instead of falling back to a plain synthesized reply.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    config: MockConfig,
}

static VARIABLE_K: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<variable_K>\s*(\d+) requirements\s*</variable_K>").unwrap());
static INSTRUCTION_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<instruction>(.*?)</instruction>").unwrap());
static ROLE_BLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)<role_with_requirements>(.*?)</role_with_requirements>").unwrap()
});
static RESPONSE_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<response>(.*?)</response>").unwrap());
static RESPONSE_A_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<response_A>(.*?)</response_A>").unwrap());
static RESPONSE_B_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<response_B>(.*?)</response_B>").unwrap());
static SYSTEM_PROMPT_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<system_prompt>(.*?)</system_prompt>").unwrap());
static VIOLATE_SENTINEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\[VIOLATE:(\d+)\]\]").unwrap());

fn last_capture<'t>(re: &Regex, text: &'t str) -> Option<&'t str> {
    re.captures_iter(text)
        .last()
        .and_then(|c| c.get(1))
        .map(|m| m.as_str())
}

impl MockBackend {
    pub fn new() -> Self {
        MockBackend::default()
    }

    pub fn with_config(config: MockConfig) -> Self {
        MockBackend { config }
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: MockConfig = serde_json::from_str(&text)
            .map_err(|e| Error::schema(path, format!("mock config: {e}")))?;
        Ok(MockBackend { config })
    }

    pub fn with_fixture(mut self, rule: MatchRule, text: impl Into<String>) -> Self {
        self.config.fixtures.push(Fixture {
            rule,
            text: text.into(),
        });
        self
    }

    pub fn with_pairwise_policy(mut self, policy: PairwisePolicy) -> Self {
        self.config.pairwise_policy = policy;
        self
    }

    pub fn strict(mut self) -> Self {
        self.config.strict = true;
        self
    }

    /// Rule text `i` (1-based) for the synthetic topic `t`; recognized by the
    /// shared rule grammar as one enumerated item.
    fn rule_text(topic: &str, i: usize) -> String {
        match i {
            1 => format!("Always mention topic {topic} somewhere in the answer."),
            2 => format!("Keep the answer under {} words.", 100 + 50 * i),
            3 => "Use a numbered list when presenting multiple items.".to_string(),
            4 => format!("If the user asks about anything outside topic {topic}, politely decline."),
            5 => "End the answer with a one-sentence summary.".to_string(),
            6 => "Avoid speculative claims; state only well-established facts.".to_string(),
            7 => "Address the user respectfully at all times.".to_string(),
            _ => "Include exactly one clarifying question when the request is ambiguous."
                .to_string(),
        }
    }

    fn synth_generation(&self, prompt: &str) -> String {
        let instruction = last_capture(&INSTRUCTION_BLOCK, prompt).unwrap_or("").trim();
        let topic = hex8(instruction.as_bytes());
        // A filled variable_K slot fixes the rule count; benchmark-synthesis
        // prompts omit the slot and the count is the teacher's choice,
        // derived here from the instruction digest.
        let k = match last_capture(&VARIABLE_K, prompt) {
            Some(digits) => digits.parse::<usize>().unwrap_or(0).min(8),
            None => (u32::from_str_radix(&topic[..2], 16).unwrap_or(0) % 9) as usize,
        };
        let mut out = format!(
            "<output>You are an AI assistant for topic {topic}. Your goal is to help users \
             with any task related to topic {topic}."
        );
        if k > 0 {
            out.push_str(" Here are rules for the interaction:");
            for i in 1..=k {
                out.push_str(&format!("\n({i}) {}", Self::rule_text(&topic, i)));
            }
        }
        out.push_str("</output>");
        out
    }

    fn synth_judge(&self, prompt: &str) -> String {
        let role = last_capture(&ROLE_BLOCK, prompt).unwrap_or("").trim();
        let response = last_capture(&RESPONSE_BLOCK, prompt).unwrap_or("");
        let rule_count = rules::count_rules(role).max(1);
        let mut failed = vec![false; rule_count];
        for cap in VIOLATE_SENTINEL.captures_iter(response) {
            if let Ok(n) = cap[1].parse::<usize>() {
                if (1..=rule_count).contains(&n) {
                    failed[n - 1] = true;
                }
            }
        }
        let mut out = String::from("Here is my step-by-step evaluation:\n");
        for (idx, &fail) in failed.iter().enumerate() {
            let verb = if fail { "violates" } else { "satisfies" };
            out.push_str(&format!(
                "Step {}: The response {verb} requirement {}.\n",
                idx + 1,
                idx + 1
            ));
        }
        for (idx, &fail) in failed.iter().enumerate() {
            let token = if fail { "fail" } else { "pass" };
            out.push_str(&format!("requirement {}: {token}\n", idx + 1));
        }
        let overall = if failed.iter().any(|&f| f) { "fail" } else { "pass" };
        out.push_str(&format!("<judgement>\n{overall}\n</judgement>"));
        out
    }

    fn synth_pairwise(&self, prompt: &str) -> String {
        let a = last_capture(&RESPONSE_A_BLOCK, prompt).unwrap_or("");
        let b = last_capture(&RESPONSE_B_BLOCK, prompt).unwrap_or("");
        let token = match self.config.pairwise_policy {
            PairwisePolicy::PreferFirst => "A",
            PairwisePolicy::PreferSecond => "B",
            PairwisePolicy::PreferMarked => {
                match (a.contains(PREFERRED_SENTINEL), b.contains(PREFERRED_SENTINEL)) {
                    (true, false) => "A",
                    (false, true) => "B",
                    _ => "C",
                }
            }
        };
        format!("I compared both responses against the instruction.\n<preference>{token}</preference>")
    }

    fn synth_expansion(&self, prompt: &str) -> String {
        let sp = last_capture(&SYSTEM_PROMPT_BLOCK, prompt).unwrap_or("").trim();
        let topic = hex8(sp.as_bytes());
        format!(
            "1. Give me an example task about topic {topic} (variant one).\n\
             2. Give me a different task about topic {topic} (variant two)."
        )
    }

    fn synth_plain(&self, prompt: &str) -> String {
        format!(
            "Acknowledged. Here is a deterministic reply for request {}. It follows the \
             given role and instruction throughout.",
            hex8(prompt.as_bytes())
        )
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, BackendFailure> {
        let prompt = &request.prompt;
        if let Some(fixture) = self.config.fixtures.iter().find(|f| f.rule.matches(prompt)) {
            return Ok(fixture.text.clone());
        }
        if prompt.contains(assets::JUDGE_MARKER) {
            return Ok(self.synth_judge(prompt));
        }
        if prompt.contains(assets::PAIRWISE_MARKER) {
            return Ok(self.synth_pairwise(prompt));
        }
        if prompt.contains(assets::EXPANSION_MARKER) {
            return Ok(self.synth_expansion(prompt));
        }
        if prompt.contains(assets::GENERATION_MARKER) {
            return Ok(self.synth_generation(prompt));
        }
        if self.config.strict {
            return Err(BackendFailure::Permanent(format!(
                "unrecognized prompt kind for request {}",
                request.request_id
            )));
        }
        Ok(self.synth_plain(prompt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::fill_slot;

    fn request(prompt: String) -> CompletionRequest {
        CompletionRequest {
            prompt,
            model_tag: "mock-model".into(),
            temperature: 1.0,
            max_tokens: 512,
            request_id: "t".into(),
        }
    }

    fn generation_prompt(instruction: &str, k: u32) -> String {
        let t = fill_slot(
            assets::generation_template(),
            "variable_K",
            &format!("{k} requirements"),
        );
        fill_slot(&t, "instruction", instruction)
    }

    #[test]
    fn generation_prompt_with_three_requirements_yields_three_rules() {
        let mock = MockBackend::new();
        let text = mock
            .complete(&request(generation_prompt("Plan a garden", 3)))
            .unwrap();
        let inner = text
            .trim_start_matches("<output>")
            .trim_end_matches("</output>");
        assert_eq!(rules::count_rules(inner), 3);
        assert!(inner.starts_with("You are an AI assistant for topic"));
    }

    #[test]
    fn zero_requirements_yields_role_only_output() {
        let mock = MockBackend::new();
        let text = mock
            .complete(&request(generation_prompt("Plan a garden", 0)))
            .unwrap();
        let inner = text
            .trim_start_matches("<output>")
            .trim_end_matches("</output>");
        assert_eq!(rules::count_rules(inner), 0);
        assert!(!inner.is_empty());
    }

    #[test]
    fn identical_requests_yield_byte_identical_text() {
        let mock = MockBackend::new();
        let a = mock.complete(&request(generation_prompt("same", 4))).unwrap();
        let b = mock.complete(&request(generation_prompt("same", 4))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixture_takes_precedence_over_synthesis() {
        let mock = MockBackend::new().with_fixture(
            MatchRule::Contains("Plan a garden".into()),
            "I don't know",
        );
        let text = mock
            .complete(&request(generation_prompt("Plan a garden", 2)))
            .unwrap();
        assert_eq!(text, "I don't know");
    }

    fn judge_prompt(role: &str, response: &str) -> String {
        let t = fill_slot(assets::judge_template(), "response", response);
        let t = fill_slot(&t, "instruction", "do the thing");
        fill_slot(&t, "system_prompt", role)
    }

    const THREE_RULE_ROLE: &str =
        "You are a tester. (1) Rule one. (2) Rule two. (3) Rule three.";

    #[test]
    fn judge_fails_only_the_sentinel_rule() {
        let mock = MockBackend::new();
        let text = mock
            .complete(&request(judge_prompt(
                THREE_RULE_ROLE,
                "an answer [[VIOLATE:2]] here",
            )))
            .unwrap();
        assert!(text.contains("requirement 1: pass"));
        assert!(text.contains("requirement 2: fail"));
        assert!(text.contains("requirement 3: pass"));
        assert!(text.contains("<judgement>\nfail\n</judgement>"));
    }

    #[test]
    fn judge_passes_a_clean_response() {
        let mock = MockBackend::new();
        let text = mock
            .complete(&request(judge_prompt(THREE_RULE_ROLE, "a clean answer")))
            .unwrap();
        assert!(text.contains("<judgement>\npass\n</judgement>"));
    }

    #[test]
    fn judge_emits_one_line_for_role_only_cases() {
        let mock = MockBackend::new();
        let text = mock
            .complete(&request(judge_prompt("You are a poet with no rules.", "verse")))
            .unwrap();
        assert!(text.contains("requirement 1: pass"));
        assert!(!text.contains("requirement 2:"));
    }

    fn pairwise_prompt(a: &str, b: &str) -> String {
        let t = fill_slot(assets::PAIRWISE_TEMPLATE, "response_b", b);
        let t = fill_slot(&t, "response_a", a);
        let t = fill_slot(&t, "instruction", "compare these");
        let t = fill_slot(&t, "system_note", "");
        fill_slot(&t, "system_block", "")
    }

    #[test]
    fn pairwise_policies_drive_the_preference_token() {
        let first = MockBackend::new().with_pairwise_policy(PairwisePolicy::PreferFirst);
        let text = first.complete(&request(pairwise_prompt("x", "y"))).unwrap();
        assert!(text.ends_with("<preference>A</preference>"));

        let marked = MockBackend::new();
        let text = marked
            .complete(&request(pairwise_prompt("x", "y [[PREFERRED]]")))
            .unwrap();
        assert!(text.ends_with("<preference>B</preference>"));

        let text = marked.complete(&request(pairwise_prompt("x", "y"))).unwrap();
        assert!(text.ends_with("<preference>C</preference>"));
    }

    #[test]
    fn expansion_yields_exactly_two_numbered_lines() {
        let mock = MockBackend::new();
        let prompt = fill_slot(assets::EXPANSION_TEMPLATE, "system_prompt", "You are a chef.");
        let text = mock.complete(&request(prompt)).unwrap();
        let numbered: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("1. ") || l.starts_with("2. "))
            .collect();
        assert_eq!(numbered.len(), 2);
    }

    #[test]
    fn strict_mode_rejects_unrecognized_prompts() {
        let mock = MockBackend::new().strict();
        let err = mock.complete(&request("just some text".into())).unwrap_err();
        assert!(matches!(err, BackendFailure::Permanent(_)));

        let relaxed = MockBackend::new();
        let text = relaxed.complete(&request("just some text".into())).unwrap();
        assert!(!text.is_empty());
    }

    #[test]
    fn mock_config_round_trips_through_json() {
        let config = MockConfig {
            fixtures: vec![Fixture {
                rule: MatchRule::Contains("x".into()),
                text: "I don't know".into(),
            }],
            pairwise_policy: PairwisePolicy::PreferFirst,
            strict: false,
        };
        let json = serde_json::to_string(&config).unwrap();
        let back: MockConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.pairwise_policy, PairwisePolicy::PreferFirst);
        assert_eq!(back.fixtures.len(), 1);
    }
}
