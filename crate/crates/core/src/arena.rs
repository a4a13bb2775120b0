//! Pairwise response comparison and agreement statistics.
//!
//! Every comparison is judged in both presentation orders; the two verdicts
//! combine symmetrically (agreement picks the winner, disagreement is a
//! tie), which neutralizes positional bias by construction: a judge that
//! always prefers the first-presented response produces all ties and a
//! winning score of exactly 1.0.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::assets::{self, fill_slot};
use crate::corpus::{HumanLabel, LabelVerdict};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};

/// Win/loss/tie counts from the candidate's perspective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTally {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl PairTally {
    pub fn total(&self) -> usize {
        self.wins + self.losses + self.ties
    }
}

/// Identity-mapped preference for one presentation order: `A` is always the
/// candidate, `B` the reference, regardless of which was shown first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairResult {
    Win,
    Lose,
    Tie,
}

/// Combined outcome of judging one case in both orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub case_id: String,
    pub order1_pref: Preference,
    pub order2_pref: Preference,
    #[serde(rename = "final")]
    pub final_result: PairResult,
}

/// Decoding settings for pairwise judging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArenaConfig {
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            model_tag: "judge".into(),
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

/// Render the comparison prompt. The system-prompt block is omitted for
/// plain instruction-following evaluations; responses are labeled purely
/// positionally.
pub fn render_pairwise_prompt(
    system_prompt: Option<&str>,
    instruction: &str,
    response_first: &str,
    response_second: &str,
) -> String {
    let filled = fill_slot(assets::PAIRWISE_TEMPLATE, "response_b", response_second);
    let filled = fill_slot(&filled, "response_a", response_first);
    let filled = fill_slot(&filled, "instruction", instruction);
    match system_prompt {
        Some(sp) => {
            let filled = fill_slot(&filled, "system_note", " and the system prompt it was given");
            fill_slot(
                &filled,
                "system_block",
                &format!("<system_prompt>\n{sp}\n</system_prompt>\n\n"),
            )
        }
        None => {
            let filled = fill_slot(&filled, "system_note", "");
            fill_slot(&filled, "system_block", "")
        }
    }
}

static PREFERENCE_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<preference>(.*?)</preference>").unwrap());

/// Positional preference token from one judge completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotPreference {
    First,
    Second,
    Tie,
}

fn parse_preference(raw: &str) -> Result<SlotPreference> {
    let token = PREFERENCE_TAG
        .captures_iter(raw)
        .last()
        .map(|c| c[1].trim().to_string())
        .ok_or_else(|| Error::BadPreferenceToken {
            token: "<missing preference tag>".into(),
        })?;
    match token.to_ascii_uppercase().as_str() {
        "A" => Ok(SlotPreference::First),
        "B" => Ok(SlotPreference::Second),
        "C" => Ok(SlotPreference::Tie),
        _ => Err(Error::BadPreferenceToken { token }),
    }
}

fn ask_preference(
    gateway: &Gateway,
    config: &ArenaConfig,
    prompt: &str,
    request_id: &str,
) -> Result<SlotPreference> {
    // one re-ask on an unparsable token, then the error stands
    for attempt in 0..2 {
        let request = CompletionRequest {
            prompt: prompt.to_string(),
            model_tag: config.model_tag.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            request_id: format!("{request_id}:a{attempt}"),
        };
        let completion = if attempt == 0 {
            gateway.complete_cached(&request)?
        } else {
            gateway.complete_fresh(&request)?
        };
        match parse_preference(&completion.text) {
            Ok(pref) => return Ok(pref),
            Err(e) if attempt == 0 => {
                tracing::warn!(request_id, error = %e, "unparsable preference, re-asking");
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("loop returns on success or final error")
}

/// Judge candidate vs reference in both presentation orders and combine.
///
/// Agreement on a winner decides the outcome; disagreement (including the
/// case where the judge just prefers a position) is a tie.
pub fn judge_pair(
    case_id: &str,
    system_prompt: Option<&str>,
    instruction: &str,
    candidate: &str,
    reference: &str,
    gateway: &Gateway,
    config: &ArenaConfig,
) -> Result<PairOutcome> {
    let order1_prompt = render_pairwise_prompt(system_prompt, instruction, candidate, reference);
    let order2_prompt = render_pairwise_prompt(system_prompt, instruction, reference, candidate);

    let order1_slot = ask_preference(gateway, config, &order1_prompt, &format!("pair:{case_id}:o1"))?;
    let order2_slot = ask_preference(gateway, config, &order2_prompt, &format!("pair:{case_id}:o2"))?;

    // map positional preferences back to candidate/reference identity
    let order1_pref = match order1_slot {
        SlotPreference::First => Preference::A,
        SlotPreference::Second => Preference::B,
        SlotPreference::Tie => Preference::Tie,
    };
    let order2_pref = match order2_slot {
        SlotPreference::First => Preference::B,
        SlotPreference::Second => Preference::A,
        SlotPreference::Tie => Preference::Tie,
    };

    let final_result = match (order1_pref, order2_pref) {
        (Preference::A, Preference::A) => PairResult::Win,
        (Preference::B, Preference::B) => PairResult::Lose,
        _ => PairResult::Tie,
    };

    Ok(PairOutcome {
        case_id: case_id.to_string(),
        order1_pref,
        order2_pref,
        final_result,
    })
}

/// Fold outcomes into a tally.
pub fn tally_outcomes(outcomes: &[PairOutcome]) -> PairTally {
    let mut tally = PairTally::default();
    for outcome in outcomes {
        match outcome.final_result {
            PairResult::Win => tally.wins += 1,
            PairResult::Lose => tally.losses += 1,
            PairResult::Tie => tally.ties += 1,
        }
    }
    tally
}

/// Winning score: `(#Win - #Lose) / (#Win + #Lose + #Tie) + 1`.
///
/// 1.0 is parity, 2.0 a sweep; always in `[0, 2]`.
pub fn winning_score(tally: &PairTally) -> Result<f64> {
    let total = tally.total();
    if total == 0 {
        return Err(Error::EmptyTally);
    }
    Ok((tally.wins as f64 - tally.losses as f64) / total as f64 + 1.0)
}

/// Percent of aligned cases on which two label lists agree.
pub fn percent_agreement(
    labels_a: &[(String, LabelVerdict)],
    labels_b: &[(String, LabelVerdict)],
) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LabelMismatch {
            detail: format!("{} labels vs {}", labels_a.len(), labels_b.len()),
        });
    }
    if labels_a.is_empty() {
        return Err(Error::LabelMismatch {
            detail: "empty label sets".into(),
        });
    }
    let mut sorted_a: Vec<_> = labels_a.iter().collect();
    let mut sorted_b: Vec<_> = labels_b.iter().collect();
    sorted_a.sort_by(|x, y| x.0.cmp(&y.0));
    sorted_b.sort_by(|x, y| x.0.cmp(&y.0));
    let mut matching = 0usize;
    for (a, b) in sorted_a.iter().zip(sorted_b.iter()) {
        if a.0 != b.0 {
            return Err(Error::LabelMismatch {
                detail: format!("case ids diverge: {:?} vs {:?}", a.0, b.0),
            });
        }
        if a.1 == b.1 {
            matching += 1;
        }
    }
    Ok(100.0 * matching as f64 / labels_a.len() as f64)
}

/// Majority vote over one case's labels: strict majority wins, an even
/// split is reported as its own outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MajorityOutcome {
    Pass,
    Fail,
    Split,
}

pub fn majority_vote(labels: &[LabelVerdict]) -> MajorityOutcome {
    assert!(!labels.is_empty(), "majority vote needs at least one label");
    let passes = labels.iter().filter(|&&v| v == LabelVerdict::Pass).count();
    let fails = labels.len() - passes;
    match passes.cmp(&fails) {
        std::cmp::Ordering::Greater => MajorityOutcome::Pass,
        std::cmp::Ordering::Less => MajorityOutcome::Fail,
        std::cmp::Ordering::Equal => MajorityOutcome::Split,
    }
}

/// Strict and non-strict pass rates over grouped human labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanPassRates {
    /// Percent of cases where every evaluator passed (splits count as fail).
    pub all_pass: f64,
    /// Percent of cases with a strict pass majority (splits excluded from
    /// the numerator).
    pub majority_pass: f64,
    pub n_cases: usize,
    pub n_split: usize,
}

/// Group labels by case id.
pub fn group_labels(labels: &[HumanLabel]) -> BTreeMap<String, Vec<LabelVerdict>> {
    let mut grouped: BTreeMap<String, Vec<LabelVerdict>> = BTreeMap::new();
    for label in labels {
        grouped
            .entry(label.case_id.clone())
            .or_default()
            .push(label.verdict);
    }
    grouped
}

pub fn human_pass_rates(labels: &[HumanLabel]) -> Result<HumanPassRates> {
    let grouped = group_labels(labels);
    if grouped.is_empty() {
        return Err(Error::LabelMismatch {
            detail: "no labels to aggregate".into(),
        });
    }
    let n_cases = grouped.len();
    let mut all_pass = 0usize;
    let mut majority_pass = 0usize;
    let mut splits = 0usize;
    for verdicts in grouped.values() {
        if verdicts.iter().all(|&v| v == LabelVerdict::Pass) {
            all_pass += 1;
        }
        match majority_vote(verdicts) {
            MajorityOutcome::Pass => majority_pass += 1,
            MajorityOutcome::Split => splits += 1,
            MajorityOutcome::Fail => {}
        }
    }
    Ok(HumanPassRates {
        all_pass: 100.0 * all_pass as f64 / n_cases as f64,
        majority_pass: 100.0 * majority_pass as f64 / n_cases as f64,
        n_cases,
        n_split: splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{MockBackend, PairwisePolicy, PREFERRED_SENTINEL};
    use crate::gateway::RetryPolicy;

    #[test]
    fn swapping_responses_swaps_only_the_response_blocks() {
        let a = render_pairwise_prompt(None, "instr", "PAYLOAD_ONE", "PAYLOAD_TWO");
        let b = render_pairwise_prompt(None, "instr", "PAYLOAD_TWO", "PAYLOAD_ONE");
        assert_ne!(a, b);
        // exchanging the two payloads in one prompt reproduces the other
        let exchanged = a
            .replace("PAYLOAD_ONE", "\u{0}")
            .replace("PAYLOAD_TWO", "PAYLOAD_ONE")
            .replace('\u{0}', "PAYLOAD_TWO");
        assert_eq!(exchanged, b);
    }

    #[test]
    fn render_is_pure_and_omits_the_system_block_when_absent() {
        let plain = render_pairwise_prompt(None, "instr", "ra", "rb");
        assert_eq!(plain, render_pairwise_prompt(None, "instr", "ra", "rb"));
        assert!(!plain.contains("<system_prompt>"));

        let with_sp = render_pairwise_prompt(Some("You are a bot."), "instr", "ra", "rb");
        assert!(with_sp.contains("<system_prompt>\nYou are a bot.\n</system_prompt>"));
    }

    fn gateway_with(policy: PairwisePolicy) -> Gateway {
        Gateway::new(
            Box::new(MockBackend::new().with_pairwise_policy(policy)),
            RetryPolicy::default(),
            2,
        )
    }

    #[test]
    fn positional_judge_always_yields_a_tie() {
        let gateway = gateway_with(PairwisePolicy::PreferFirst);
        let outcome = judge_pair(
            "c1",
            None,
            "instr",
            "candidate answer",
            "reference answer",
            &gateway,
            &ArenaConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.order1_pref, Preference::A);
        assert_eq!(outcome.order2_pref, Preference::B);
        assert_eq!(outcome.final_result, PairResult::Tie);
    }

    #[test]
    fn consistent_candidate_preference_is_a_win() {
        let gateway = gateway_with(PairwisePolicy::PreferMarked);
        let outcome = judge_pair(
            "c2",
            None,
            "instr",
            &format!("good {PREFERRED_SENTINEL}"),
            "plain",
            &gateway,
            &ArenaConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.final_result, PairResult::Win);
    }

    #[test]
    fn consistent_reference_preference_is_a_loss() {
        let gateway = gateway_with(PairwisePolicy::PreferMarked);
        let outcome = judge_pair(
            "c3",
            None,
            "instr",
            "plain",
            &format!("better {PREFERRED_SENTINEL}"),
            &gateway,
            &ArenaConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.final_result, PairResult::Lose);
    }

    #[test]
    fn swapping_candidate_and_reference_maps_win_to_lose() {
        let gateway = gateway_with(PairwisePolicy::PreferMarked);
        let config = ArenaConfig::default();
        let marked = format!("text {PREFERRED_SENTINEL}");
        let win = judge_pair("s", None, "i", &marked, "other", &gateway, &config).unwrap();
        let lose = judge_pair("s", None, "i", "other", &marked, &gateway, &config).unwrap();
        assert_eq!(win.final_result, PairResult::Win);
        assert_eq!(lose.final_result, PairResult::Lose);

        let tie_a = judge_pair("s", None, "i", "same", "same2", &gateway, &config).unwrap();
        let tie_b = judge_pair("s", None, "i", "same2", "same", &gateway, &config).unwrap();
        assert_eq!(tie_a.final_result, PairResult::Tie);
        assert_eq!(tie_b.final_result, PairResult::Tie);
    }

    #[test]
    fn winning_score_matches_the_three_worked_examples() {
        // wins == losses is parity
        let balanced = PairTally { wins: 10, losses: 10, ties: 5 };
        assert!((winning_score(&balanced).unwrap() - 1.0).abs() <= 0.01);
        // a sweep
        let sweep = PairTally { wins: 25, losses: 0, ties: 0 };
        assert!((winning_score(&sweep).unwrap() - 2.0).abs() <= 0.01);
        // 45/20/35 -> 1.25
        let mixed = PairTally { wins: 45, losses: 20, ties: 35 };
        assert!((winning_score(&mixed).unwrap() - 1.25).abs() <= 0.01);
    }

    #[test]
    fn empty_tally_is_an_error() {
        assert!(matches!(
            winning_score(&PairTally::default()),
            Err(Error::EmptyTally)
        ));
    }

    #[test]
    fn winning_score_is_antisymmetric_under_win_loss_swap() {
        for (w, l, t) in [(3, 9, 2), (0, 0, 7), (12, 1, 0), (5, 5, 5)] {
            let tally = PairTally { wins: w, losses: l, ties: t };
            let swapped = PairTally { wins: l, losses: w, ties: t };
            let score = winning_score(&tally).unwrap();
            let mirror = winning_score(&swapped).unwrap();
            assert!((score + mirror - 2.0).abs() < 1e-12, "w={w} l={l} t={t}");
        }
    }

    fn labels(verdicts: &[(&str, LabelVerdict)]) -> Vec<(String, LabelVerdict)> {
        verdicts.iter().map(|(id, v)| (id.to_string(), *v)).collect()
    }

    #[test]
    fn identical_and_disjoint_label_lists_hit_the_bounds() {
        let a = labels(&[("c1", LabelVerdict::Pass), ("c2", LabelVerdict::Fail)]);
        assert_eq!(percent_agreement(&a, &a).unwrap(), 100.0);

        let b = labels(&[("c1", LabelVerdict::Fail), ("c2", LabelVerdict::Pass)]);
        assert_eq!(percent_agreement(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn seventy_four_matches_of_one_hundred_is_74_percent() {
        let a: Vec<_> = (0..100)
            .map(|i| (format!("case-{i:03}"), LabelVerdict::Pass))
            .collect();
        let b: Vec<_> = (0..100)
            .map(|i| {
                let verdict = if i < 74 { LabelVerdict::Pass } else { LabelVerdict::Fail };
                (format!("case-{i:03}"), verdict)
            })
            .collect();
        assert!((percent_agreement(&a, &b).unwrap() - 74.0).abs() <= 0.01);
    }

    #[test]
    fn label_alignment_errors_name_the_problem() {
        let a = labels(&[("c1", LabelVerdict::Pass)]);
        let b = labels(&[("c1", LabelVerdict::Pass), ("c2", LabelVerdict::Pass)]);
        assert!(matches!(
            percent_agreement(&a, &b),
            Err(Error::LabelMismatch { .. })
        ));
        let c = labels(&[("cX", LabelVerdict::Pass)]);
        assert!(matches!(
            percent_agreement(&a, &c),
            Err(Error::LabelMismatch { .. })
        ));
    }

    #[test]
    fn majority_vote_covers_majority_tie_and_unanimous() {
        use LabelVerdict::{Fail, Pass};
        assert_eq!(majority_vote(&[Pass, Pass, Fail]), MajorityOutcome::Pass);
        assert_eq!(majority_vote(&[Pass, Fail]), MajorityOutcome::Split);
        assert_eq!(majority_vote(&[Fail, Fail, Fail]), MajorityOutcome::Fail);
    }

    #[test]
    fn human_pass_rates_treat_splits_strictly() {
        use LabelVerdict::{Fail, Pass};
        let mut all = Vec::new();
        // case s1: unanimous pass, s2: majority pass, s3: split, s4: fail
        let cases: &[(&str, &[LabelVerdict])] = &[
            ("s1", &[Pass, Pass, Pass]),
            ("s2", &[Pass, Pass, Fail]),
            ("s3", &[Pass, Fail]),
            ("s4", &[Fail, Fail, Fail]),
        ];
        for (case_id, verdicts) in cases {
            for (i, v) in verdicts.iter().enumerate() {
                all.push(HumanLabel {
                    case_id: case_id.to_string(),
                    evaluator_id: format!("e{i}"),
                    verdict: *v,
                });
            }
        }
        let rates = human_pass_rates(&all).unwrap();
        assert_eq!(rates.n_cases, 4);
        assert_eq!(rates.n_split, 1);
        assert!((rates.all_pass - 25.0).abs() < 1e-9);
        assert!((rates.majority_pass - 50.0).abs() < 1e-9);
    }
}
