use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Placeholder, TicketMeta};

/// One substitution made by [`anonymize`]. Offsets are byte offsets into the
/// anonymized text and cover the placeholder literal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub placeholder: Placeholder,
    pub original: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizedText {
    pub text: String,
    pub spans: Vec<Span>,
}

impl AnonymizedText {
    /// Re-inserts the original substrings, reproducing the input exactly.
    pub fn restore(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut cursor = 0;
        for span in &self.spans {
            out.push_str(&self.text[cursor..span.start]);
            out.push_str(&span.original);
            cursor = span.end;
        }
        out.push_str(&self.text[cursor..]);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilledText {
    pub text: String,
    /// Registry placeholders that had no value in the ticket metadata.
    pub unfilled: Vec<Placeholder>,
}

struct Rule {
    placeholder: Placeholder,
    pattern: Regex,
    /// Capture group holding the sensitive part (0 = whole match).
    group: usize,
}

static RULES: LazyLock<Vec<Rule>> = LazyLock::new(|| {
    let rule = |placeholder, pattern: &str, group| Rule {
        placeholder,
        pattern: Regex::new(pattern).expect("valid anonymization rule"),
        group,
    };
    vec![
        rule(Placeholder::Email, r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}", 0),
        rule(Placeholder::Url, r"\b(?:https?://|www\.)\S+", 0),
        rule(Placeholder::ReservationCode, r"\bHM[A-Z0-9]{8}\b", 0),
        // Full card numbers collapse into the last-four placeholder.
        rule(Placeholder::CardLast4, r"\b(?:\d{4}[ -]?){3}\d{4}\b", 0),
        rule(
            Placeholder::CardLast4,
            r"(?i)\b(?:ending(?:\s+in)?|last\s+(?:four|4)(?:\s+digits)?(?:\s+(?:are|is|of))?)\s+(\d{4})\b",
            1,
        ),
        rule(
            Placeholder::PhoneNumber,
            r"(?:\+\d{1,3}[\s.-]?)?(?:\(\d{3}\)|\b\d{3})[\s.-]?\d{3}[\s.-]\d{4}\b",
            0,
        ),
        rule(Placeholder::Amount, r"\$\s?\d+(?:,\d{3})*(?:\.\d+)?", 0),
        rule(Placeholder::Amount, r"\b\d+(?:\.\d{2})?\s?(?:USD|EUR|GBP|dollars)\b", 0),
        rule(
            Placeholder::Timestamp,
            r"\b\d{4}-\d{2}-\d{2}(?:[ T]\d{1,2}:\d{2}(?::\d{2})?)?\b",
            0,
        ),
        rule(Placeholder::Timestamp, r"\b\d{1,2}:\d{2}(?:\s?[AaPp][Mm]\b)?", 0),
    ]
});

static PLACEHOLDER_LITERAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{([a-z0-9 ]+)\}").expect("valid placeholder pattern"));

static URL_TRAILING: &[char] = &['.', ',', '!', '?', ';', ':', ')', '\'', '"'];

#[derive(Debug)]
struct Candidate {
    start: usize,
    end: usize,
    priority: u8,
    placeholder: Placeholder,
}

fn literal_pattern(value: &str, case_insensitive: bool) -> Option<Regex> {
    let value = value.trim();
    if value.is_empty() {
        return None;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut pattern = String::new();
    if case_insensitive {
        pattern.push_str("(?i)");
    }
    if value.starts_with(is_word) {
        pattern.push_str(r"\b");
    }
    pattern.push_str(&regex::escape(value));
    if value.ends_with(is_word) {
        pattern.push_str(r"\b");
    }
    Regex::new(&pattern).ok()
}

/// Replaces personal information with registry placeholders.
///
/// Party names and fill values come from the ticket metadata; emails, URLs,
/// phone numbers, card digits, amounts, timestamps and reservation codes are
/// additionally caught by rules. Metadata matches win over rule matches that
/// start at the same offset.
pub fn anonymize(text: &str, meta: &TicketMeta) -> AnonymizedText {
    let mut candidates = Vec::new();
    let known = meta
        .party_names
        .iter()
        .map(|(role, name)| (Placeholder::for_role(*role), name.as_str(), true))
        .chain(meta.fill_values.iter().map(|(p, v)| (*p, v.as_str(), false)));
    for (placeholder, value, is_name) in known {
        if let Some(pattern) = literal_pattern(value, is_name) {
            for m in pattern.find_iter(text) {
                candidates.push(Candidate {
                    start: m.start(),
                    end: m.end(),
                    priority: 0,
                    placeholder,
                });
            }
        }
    }
    for rule in RULES.iter() {
        for caps in rule.pattern.captures_iter(text) {
            let Some(m) = caps.get(rule.group) else { continue };
            let mut end = m.end();
            if rule.placeholder == Placeholder::Url {
                end = m.start() + text[m.start()..end].trim_end_matches(URL_TRAILING).len();
            }
            if end > m.start() {
                candidates.push(Candidate {
                    start: m.start(),
                    end,
                    priority: 1,
                    placeholder: rule.placeholder,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then(a.priority.cmp(&b.priority))
    });

    let mut out = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut cursor = 0;
    for c in candidates {
        if c.start < cursor {
            continue;
        }
        out.push_str(&text[cursor..c.start]);
        let start = out.len();
        out.push_str(&c.placeholder.token());
        spans.push(Span {
            start,
            end: out.len(),
            placeholder: c.placeholder,
            original: text[c.start..c.end].to_string(),
        });
        cursor = c.end;
    }
    out.push_str(&text[cursor..]);
    AnonymizedText { text: out, spans }
}

/// Substitutes registry placeholders with the ticket's values. Placeholders
/// without a value are left in place and reported.
pub fn fill_placeholders(text: &str, meta: &TicketMeta) -> FilledText {
    let mut unfilled = Vec::new();
    let filled = PLACEHOLDER_LITERAL.replace_all(text, |caps: &regex::Captures<'_>| {
        let literal = caps[0].to_string();
        match caps[1].parse::<Placeholder>() {
            Ok(placeholder) => match meta.value_of(placeholder) {
                Some(value) => value.to_string(),
                None => {
                    if !unfilled.contains(&placeholder) {
                        unfilled.push(placeholder);
                    }
                    literal
                }
            },
            Err(_) => literal,
        }
    });
    FilledText {
        text: filled.into_owned(),
        unfilled,
    }
}
