//! Rule-marker grammar shared by every component that reads a role-and-rules
//! system prompt: the generation-output parser, the benchmark loaders, and
//! the deterministic mock judge.
//!
//! A system prompt is a role description optionally followed by enumerated
//! rules. A rule begins at one of three markers:
//!
//! - `(n)` with a 1-2 digit number, preceded by start of text or whitespace
//!   (the one style that appears inline mid-sentence)
//! - `n.` with a 1-2 digit number at the start of a line, followed by
//!   whitespace — inline would collide with ordinary prose ("version 2. ")
//! - `- ` at the start of a line
//!
//! Generated prompts mix these styles, so all three are accepted and
//! normalized into one ordered rule list.

use std::sync::LazyLock;

use regex::Regex;

static PAREN_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\d{1,2}\)[ \t]*").unwrap());
static DOT_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*\d{1,2}\.\s+").unwrap());
static DASH_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*-[ \t]+").unwrap());

/// A system prompt split into its role description and ordered rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPrompt {
    pub role_text: String,
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Marker {
    start: usize,
    content_start: usize,
}

fn boundary_ok(text: &str, start: usize) -> bool {
    if start == 0 {
        return true;
    }
    text[..start]
        .chars()
        .next_back()
        .map(char::is_whitespace)
        .unwrap_or(true)
}

fn collect_markers(text: &str) -> Vec<Marker> {
    let mut markers = Vec::new();
    for m in PAREN_MARKER.find_iter(text) {
        if boundary_ok(text, m.start()) {
            markers.push(Marker {
                start: m.start(),
                content_start: m.end(),
            });
        }
    }
    for re in [&*DOT_MARKER, &*DASH_MARKER] {
        for m in re.find_iter(text) {
            markers.push(Marker {
                start: m.start(),
                content_start: m.end(),
            });
        }
    }
    markers.sort_by_key(|m| m.start);
    // drop markers nested inside another marker's span
    let mut kept: Vec<Marker> = Vec::with_capacity(markers.len());
    for m in markers {
        if kept.last().map(|p| m.start >= p.content_start).unwrap_or(true) {
            kept.push(m);
        }
    }
    kept
}

/// Split a system-prompt text into role description and rule list.
///
/// Text before the first marker is the role; each marker starts a rule that
/// runs to the next marker. Items that are empty after trimming are dropped.
pub fn split_role_and_rules(text: &str) -> SplitPrompt {
    let markers = collect_markers(text);
    let role_end = markers.first().map(|m| m.start).unwrap_or(text.len());
    let role_text = text[..role_end].trim().to_string();

    let mut rules = Vec::with_capacity(markers.len());
    for (i, marker) in markers.iter().enumerate() {
        let end = markers.get(i + 1).map(|m| m.start).unwrap_or(text.len());
        let item = text[marker.content_start..end].trim();
        if !item.is_empty() {
            rules.push(item.to_string());
        }
    }
    SplitPrompt { role_text, rules }
}

/// Number of rules the grammar finds in `text`.
pub fn count_rules(text: &str) -> usize {
    split_role_and_rules(text).rules.len()
}
