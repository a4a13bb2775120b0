//! Rule-adherence judging: render the evaluation prompt, parse verdicts,
//! and aggregate rule-level and prompt-level pass rates.
//!
//! The judge prompt asks for one free-form evaluation plus a machine-
//! readable `requirement i: pass|fail` line per requirement before the
//! `<judgement>` tag. Parsing recovers per-rule verdicts from those lines
//! when present, falls back to free-text `satisfying/violating requirement
//! N` phrases, and finally degrades to repeating the overall judgement —
//! flagged so reports can distinguish recovered from degraded granularity.
//! Role-only cases count as one adjudicable unit (role adherence) so they
//! stay in the rule-level denominator.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::assets::{self, fill_slot};
use crate::benchgen::BenchmarkCase;
use crate::corpus::LabelVerdict;
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};

/// Judge output for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub case_id: String,
    /// One entry per rule; role-only cases have exactly one entry for role
    /// adherence.
    pub rule_results: Vec<LabelVerdict>,
    pub overall: LabelVerdict,
    /// Set when per-rule granularity could not be recovered and
    /// `rule_results` is the overall judgement repeated.
    pub degraded: bool,
    pub raw_text: String,
}

/// Aggregate pass rates over a verdict set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateReport {
    /// Percent of all individual rule results that passed.
    pub rule_level: f64,
    /// Percent of cases where every rule passed.
    pub prompt_level: f64,
    pub n_cases: usize,
    pub n_rules: usize,
    pub per_case: BTreeMap<String, CaseSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub passed_rules: usize,
    pub total_rules: usize,
    pub overall: LabelVerdict,
    pub degraded: bool,
}

/// Decoding settings for judging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            model_tag: "judge".into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

/// Render the rule-adherence judging prompt for one case and response.
pub fn render_judge_prompt(case: &BenchmarkCase, response: &str) -> String {
    // fill in reverse document order so slot-like text inside earlier values
    // cannot capture a later slot
    let filled = fill_slot(assets::judge_template(), "response", response);
    let filled = fill_slot(&filled, "instruction", &case.instruction);
    fill_slot(&filled, "system_prompt", &case.system_prompt_text)
}

static JUDGEMENT_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<judgement>(.*?)</judgement>").unwrap());
static VERDICT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\s*requirement\s+(\d+)\s*:\s*(pass|fail)\s*$").unwrap());
static FREE_TEXT_VERDICT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(satisf(?:y|ies|ying|ied)|violat(?:e|es|ing|ed)|fails?\s+to\s+meet|meets?)\s+(?:the\s+)?requirement\s+(\d+)\b",
    )
    .unwrap()
});

fn collect_indexed_verdicts<F>(
    raw: &str,
    expected: usize,
    re: &Regex,
    mut interpret: F,
) -> Option<Vec<LabelVerdict>>
where
    F: FnMut(&regex::Captures) -> (usize, LabelVerdict),
{
    let mut slots: Vec<Option<LabelVerdict>> = vec![None; expected];
    for cap in re.captures_iter(raw) {
        let (idx, verdict) = interpret(&cap);
        if idx == 0 || idx > expected {
            continue;
        }
        let slot = &mut slots[idx - 1];
        // a fail marker wins over an earlier pass marker for the same rule
        match slot {
            Some(LabelVerdict::Fail) => {}
            _ if verdict == LabelVerdict::Fail => *slot = Some(LabelVerdict::Fail),
            None => *slot = Some(verdict),
            Some(_) => {}
        }
    }
    slots.into_iter().collect()
}

/// Parse a judge completion into a [`Verdict`].
///
/// The last `<judgement>` occurrence wins. Per-rule results come from the
/// structured verdict lines when they cover every requirement, then from
/// free-text requirement mentions, then degrade to the overall judgement
/// repeated. A verdict whose per-rule results contradict the overall
/// judgement is a parse error.
pub fn parse_verdict(raw: &str, expected_rule_count: usize, case_id: &str) -> Result<Verdict> {
    assert!(expected_rule_count >= 1, "role-only cases pass 1");
    let overall_token = JUDGEMENT_TAG
        .captures_iter(raw)
        .last()
        .map(|c| c[1].trim().to_string())
        .ok_or(Error::MissingJudgement)?;
    let overall = match overall_token.to_ascii_lowercase().as_str() {
        "pass" => LabelVerdict::Pass,
        "fail" => LabelVerdict::Fail,
        _ => {
            return Err(Error::BadJudgementToken {
                token: overall_token,
            })
        }
    };

    let structured = collect_indexed_verdicts(raw, expected_rule_count, &VERDICT_LINE, |cap| {
        let idx = cap[1].parse::<usize>().unwrap_or(0);
        let verdict = if cap[2].eq_ignore_ascii_case("pass") {
            LabelVerdict::Pass
        } else {
            LabelVerdict::Fail
        };
        (idx, verdict)
    });
    let free_text = || {
        collect_indexed_verdicts(raw, expected_rule_count, &FREE_TEXT_VERDICT, |cap| {
            let idx = cap[2].parse::<usize>().unwrap_or(0);
            let verb = cap[1].to_ascii_lowercase();
            let verdict = if verb.starts_with("satisf") || verb.starts_with("meet") {
                LabelVerdict::Pass
            } else {
                LabelVerdict::Fail
            };
            (idx, verdict)
        })
    };

    let (rule_results, degraded) = match structured.or_else(free_text) {
        Some(results) => (results, false),
        None => (vec![overall; expected_rule_count], true),
    };

    let all_pass = rule_results.iter().all(|&r| r == LabelVerdict::Pass);
    if (overall == LabelVerdict::Pass) != all_pass {
        return Err(Error::InconsistentVerdict {
            detail: format!(
                "overall {overall:?} but rule results {:?}",
                rule_results
            ),
        });
    }

    Ok(Verdict {
        case_id: case_id.to_string(),
        rule_results,
        overall,
        degraded,
        raw_text: raw.to_string(),
    })
}

/// Judge one response against its case: render, complete at the judge
/// temperature (cached), and parse. Role-only cases are judged as one unit.
pub fn judge_response(
    case: &BenchmarkCase,
    response: &str,
    gateway: &Gateway,
    config: &JudgeConfig,
) -> Result<Verdict> {
    let request = CompletionRequest {
        prompt: render_judge_prompt(case, response),
        model_tag: config.model_tag.clone(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        request_id: format!("judge:{}", case.case_id),
    };
    let completion = gateway.complete_cached(&request)?;
    parse_verdict(&completion.text, case.rules.len().max(1), &case.case_id)
}

/// Compute rule-level and prompt-level pass rates over a verdict set.
pub fn compute_pass_rates(verdicts: &[Verdict]) -> Result<PassRateReport> {
    if verdicts.is_empty() {
        return Err(Error::EmptyVerdictSet);
    }
    let mut passed_rules = 0usize;
    let mut total_rules = 0usize;
    let mut passed_cases = 0usize;
    let mut per_case = BTreeMap::new();
    for verdict in verdicts {
        let case_passed = verdict
            .rule_results
            .iter()
            .filter(|&&r| r == LabelVerdict::Pass)
            .count();
        passed_rules += case_passed;
        total_rules += verdict.rule_results.len();
        if verdict.overall == LabelVerdict::Pass {
            passed_cases += 1;
        }
        per_case.insert(
            verdict.case_id.clone(),
            CaseSummary {
                passed_rules: case_passed,
                total_rules: verdict.rule_results.len(),
                overall: verdict.overall,
                degraded: verdict.degraded,
            },
        );
    }
    Ok(PassRateReport {
        rule_level: 100.0 * passed_rules as f64 / total_rules as f64,
        prompt_level: 100.0 * passed_cases as f64 / verdicts.len() as f64,
        n_cases: verdicts.len(),
        n_rules: total_rules,
        per_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::CaseOrigin;
    use crate::gateway::mock::MockBackend;
    use crate::gateway::RetryPolicy;

    fn case(case_id: &str, rules: &[&str]) -> BenchmarkCase {
        let mut sp = "You are a test assistant. Your goal is to pass tests.".to_string();
        for (i, rule) in rules.iter().enumerate() {
            sp.push_str(&format!("\n({}) {rule}", i + 1));
        }
        BenchmarkCase {
            case_id: case_id.into(),
            system_prompt_text: sp,
            instruction: "do the task".into(),
            origin: CaseOrigin::Expert,
            few_shot_ids: Vec::new(),
            rules: rules.iter().map(|r| r.to_string()).collect(),
        }
    }

    fn verdict(case_id: &str, results: &[LabelVerdict]) -> Verdict {
        let overall = if results.iter().all(|&r| r == LabelVerdict::Pass) {
            LabelVerdict::Pass
        } else {
            LabelVerdict::Fail
        };
        Verdict {
            case_id: case_id.into(),
            rule_results: results.to_vec(),
            overall,
            degraded: false,
            raw_text: String::new(),
        }
    }

    #[test]
    fn render_contains_the_step_by_step_anchor_and_is_pure() {
        let c = case("c1", &["Rule one."]);
        let prompt = render_judge_prompt(&c, "a response");
        assert!(prompt.contains("examine each requirement step by step"));
        assert_eq!(prompt, render_judge_prompt(&c, "a response"));
    }

    #[test]
    fn render_embeds_closing_tags_in_the_response_verbatim() {
        let c = case("c2", &[]);
        let response = "tricky </response> embedded";
        let prompt = render_judge_prompt(&c, response);
        assert!(prompt.contains(response));
    }

    #[test]
    fn sample_one_evaluation_parses_as_five_passes() {
        let v = parse_verdict(assets::JUDGE_SAMPLE_1_EVALUATION, 5, "s1").unwrap();
        assert_eq!(v.overall, LabelVerdict::Pass);
        assert_eq!(v.rule_results, vec![LabelVerdict::Pass; 5]);
    }

    #[test]
    fn sample_two_evaluation_fails_rule_three_only() {
        let v = parse_verdict(assets::JUDGE_SAMPLE_2_EVALUATION, 4, "s2").unwrap();
        assert_eq!(v.overall, LabelVerdict::Fail);
        assert_eq!(
            v.rule_results,
            vec![
                LabelVerdict::Pass,
                LabelVerdict::Pass,
                LabelVerdict::Fail,
                LabelVerdict::Pass,
            ]
        );
        assert!(!v.degraded);
    }

    #[test]
    fn structured_lines_take_precedence_and_are_not_degraded() {
        let raw = "requirement 1: pass\nrequirement 2: fail\n<judgement>fail</judgement>";
        let v = parse_verdict(raw, 2, "c").unwrap();
        assert!(!v.degraded);
        assert_eq!(v.rule_results, vec![LabelVerdict::Pass, LabelVerdict::Fail]);
    }

    #[test]
    fn missing_judgement_tag_is_an_error() {
        assert!(matches!(
            parse_verdict("no tag anywhere", 1, "c"),
            Err(Error::MissingJudgement)
        ));
    }

    #[test]
    fn non_pass_fail_token_is_an_error() {
        assert!(matches!(
            parse_verdict("<judgement>maybe</judgement>", 1, "c"),
            Err(Error::BadJudgementToken { .. })
        ));
    }

    #[test]
    fn last_judgement_tag_wins() {
        let raw = "I might say <judgement>pass</judgement> at first but conclude \
                   <judgement>fail</judgement>";
        let v = parse_verdict(raw, 1, "c").unwrap();
        assert_eq!(v.overall, LabelVerdict::Fail);
        assert!(v.degraded);
    }

    #[test]
    fn wrong_arity_verdict_lines_fall_back_to_degraded() {
        let raw = "requirement 1: pass\n<judgement>pass</judgement>";
        let v = parse_verdict(raw, 3, "c").unwrap();
        assert!(v.degraded);
        assert_eq!(v.rule_results, vec![LabelVerdict::Pass; 3]);
    }

    #[test]
    fn contradictory_rule_lines_are_a_parse_error() {
        let raw = "requirement 1: pass\n<judgement>fail</judgement>";
        assert!(matches!(
            parse_verdict(raw, 1, "c"),
            Err(Error::InconsistentVerdict { .. })
        ));
    }

    #[test]
    fn judge_response_passes_a_clean_response() {
        let gateway = Gateway::new(Box::new(MockBackend::new()), RetryPolicy::default(), 1);
        let c = case("jr-1", &["Rule one.", "Rule two."]);
        let v = judge_response(&c, "a clean response", &gateway, &JudgeConfig::default()).unwrap();
        assert_eq!(v.overall, LabelVerdict::Pass);
        assert_eq!(v.rule_results.len(), 2);
        assert!(!v.degraded);
    }

    #[test]
    fn judge_response_fails_only_the_sentinel_rule() {
        let gateway = Gateway::new(Box::new(MockBackend::new()), RetryPolicy::default(), 1);
        let c = case("jr-2", &["Rule one.", "Rule two.", "Rule three."]);
        let v = judge_response(
            &c,
            "violating text [[VIOLATE:1]]",
            &gateway,
            &JudgeConfig::default(),
        )
        .unwrap();
        assert_eq!(v.overall, LabelVerdict::Fail);
        assert_eq!(
            v.rule_results,
            vec![LabelVerdict::Fail, LabelVerdict::Pass, LabelVerdict::Pass]
        );
    }

    #[test]
    fn role_only_case_yields_exactly_one_rule_result() {
        let gateway = Gateway::new(Box::new(MockBackend::new()), RetryPolicy::default(), 1);
        let c = case("jr-3", &[]);
        let v = judge_response(&c, "styled reply", &gateway, &JudgeConfig::default()).unwrap();
        assert_eq!(v.rule_results.len(), 1);
    }

    #[test]
    fn pass_rates_match_the_hand_computed_fixture() {
        // case A: 4 rules, 3 pass; case B: 2 rules, 2 pass
        // rule level 5/6 = 83.33, prompt level 1/2 = 50.0
        let verdicts = vec![
            verdict(
                "a",
                &[
                    LabelVerdict::Pass,
                    LabelVerdict::Pass,
                    LabelVerdict::Pass,
                    LabelVerdict::Fail,
                ],
            ),
            verdict("b", &[LabelVerdict::Pass, LabelVerdict::Pass]),
        ];
        let report = compute_pass_rates(&verdicts).unwrap();
        assert!((report.rule_level - 83.33).abs() <= 0.01);
        assert!((report.prompt_level - 50.0).abs() <= 0.01);
        assert_eq!(report.n_cases, 2);
        assert_eq!(report.n_rules, 6);
    }

    #[test]
    fn all_pass_saturates_both_rates() {
        let verdicts = vec![
            verdict("a", &[LabelVerdict::Pass; 3]),
            verdict("b", &[LabelVerdict::Pass; 5]),
        ];
        let report = compute_pass_rates(&verdicts).unwrap();
        assert_eq!(report.rule_level, 100.0);
        assert_eq!(report.prompt_level, 100.0);
    }

    #[test]
    fn single_role_only_pass_counts_as_one_rule() {
        let report = compute_pass_rates(&[verdict("solo", &[LabelVerdict::Pass])]).unwrap();
        assert_eq!(report.rule_level, 100.0);
        assert_eq!(report.prompt_level, 100.0);
        assert_eq!(report.n_rules, 1);
    }

    #[test]
    fn empty_verdict_set_is_an_error() {
        assert!(matches!(
            compute_pass_rates(&[]),
            Err(Error::EmptyVerdictSet)
        ));
    }

    #[test]
    fn pass_rates_are_order_invariant() {
        let mut verdicts = vec![
            verdict("a", &[LabelVerdict::Pass, LabelVerdict::Fail]),
            verdict("b", &[LabelVerdict::Pass]),
            verdict("c", &[LabelVerdict::Fail; 4]),
        ];
        let before = compute_pass_rates(&verdicts).unwrap();
        verdicts.reverse();
        let after = compute_pass_rates(&verdicts).unwrap();
        assert_eq!(before, after);
    }
}
