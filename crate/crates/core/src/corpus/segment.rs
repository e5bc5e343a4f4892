use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// A sentence and its lowercased unigram tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn is_question(&self) -> bool {
        self.text.trim_end_matches(['"', '\'', ')', ']']).ends_with('?')
    }
}

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "vs.", "mr.", "mrs.", "ms.", "dr.", "st.", "no.", "approx.", "a.m.",
    "p.m.", "jr.", "sr.", "inc.", "co.",
];

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\{[a-z0-9 ]+\}|[\p{L}\p{N}]+(?:'[\p{L}]+)?").expect("valid token pattern")
});

/// Lowercased unigrams; placeholder literals such as `{card last4}` stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    TOKEN.find_iter(&lower).map(|m| m.as_str().to_string()).collect()
}

fn closes_sentence(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn trails_sentence(c: char) -> bool {
    closes_sentence(c) || matches!(c, '"' | '\'' | ')' | ']')
}

/// Byte offsets where sentences end.
fn boundaries(text: &str) -> Vec<usize> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !closes_sentence(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && trails_sentence(chars[j + 1].1) {
            j += 1;
        }
        let end = chars.get(j + 1).map_or(text.len(), |(p, _)| *p);
        let followed_by_space = chars.get(j + 1).is_none_or(|(_, n)| n.is_whitespace());
        let guarded = c == '.' && j == i && {
            let word_start = text[..pos]
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + 1);
            let word = text[word_start..=pos].to_lowercase();
            ABBREVIATIONS.contains(&word.as_str())
        };
        if followed_by_space && !guarded {
            cuts.push(end);
        }
        i = j + 1;
    }
    cuts
}

/// Splits text into sentences on terminal punctuation, guarding common
/// abbreviations, decimals and dotted tokens such as URLs.
///
/// Fragments without any word token are attached to a neighbouring sentence,
/// so every returned sentence has at least one token.
pub fn segment(text: &str) -> Vec<Sentence> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let mut pieces: Vec<String> = Vec::new();
    let mut start = 0;
    let mut cuts = boundaries(text);
    if cuts.last() != Some(&text.len()) {
        cuts.push(text.len());
    }
    for end in cuts {
        let piece = text[start..end].trim();
        if !piece.is_empty() {
            pieces.push(piece.to_string());
        }
        start = end;
    }

    let mut sentences: Vec<Sentence> = Vec::new();
    let mut orphan: Option<String> = None;
    for piece in pieces {
        let tokens = tokenize(&piece);
        if tokens.is_empty() {
            match sentences.last_mut() {
                Some(prev) => {
                    prev.text.push(' ');
                    prev.text.push_str(&piece);
                }
                None => {
                    let o = orphan.get_or_insert_with(String::new);
                    if !o.is_empty() {
                        o.push(' ');
                    }
                    o.push_str(&piece);
                }
            }
            continue;
        }
        let text = match orphan.take() {
            Some(o) => format!("{o} {piece}"),
            None => piece,
        };
        sentences.push(Sentence { text, tokens });
    }
    if let Some(o) = orphan {
        // Nothing but punctuation: keep the raw chunks as tokens.
        let tokens = o.split_whitespace().map(str::to_string).collect();
        sentences.push(Sentence { text: o, tokens });
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_terminal_punctuation() {
        let s = segment("Are you there? Thanks.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "Are you there?");
        assert!(s[0].is_question());
        assert_eq!(s[1].tokens, vec!["thanks"]);
    }

    #[test]
    fn placeholder_is_one_token() {
        let s = segment("{card last4}");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, vec!["{card last4}"]);
    }

    #[test]
    fn abbreviation_guard() {
        let s = segment("e.g. see this. ok?");
        let texts: Vec<_> = s.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["e.g. see this.", "ok?"]);
    }

    #[test]
    fn decimals_and_urls_do_not_split() {
        let s = segment("It was $12.50 on www.example.com today. Right?");
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn punctuation_only_fragments_attach() {
        let s = segment("Hello! ?? ok");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "Hello! ??");
        let only = segment("?!");
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].tokens, vec!["?!"]);
        assert!(segment("   ").is_empty());
    }

    proptest! {
        #[test]
        fn sentences_cover_input(text in "[a-zA-Z0-9 .!?,'{}]{1,80}") {
            let sentences = segment(&text);
            let joined: String = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
            let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            let got: String = joined.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(got, expected);
            for s in &sentences {
                prop_assert!(!s.text.is_empty());
                prop_assert!(!s.tokens.is_empty());
            }
        }
    }
}
