//! Plain-text word vectors and JSON Tf-Idf statistics.
//!
//! The vector file starts with `smartreply-wordvec 1 <V> <d> <min_count>`,
//! followed by one row per token: `token count v1 ... vd`. Spaces and
//! backslashes inside tokens are escaped as `\s` and `\\`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{TfIdfStats, Vocabulary, WordVectors};
use crate::artifact::{read_json, write_json};
use crate::error::{Error, Result};

const MAGIC: &str = "smartreply-wordvec";
const VERSION: u32 = 1;

fn escape(token: &str) -> String {
    token.replace('\\', "\\\\").replace(' ', "\\s")
}

fn unescape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('s') => out.push(' '),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn save_word_vectors(path: &Path, vectors: &WordVectors) -> Result<()> {
    let vocab = vectors.vocab();
    let mut text = format!("{MAGIC} {VERSION} {} {} {}\n", vocab.len(), vectors.dim(), vocab.min_count());
    for i in 0..vocab.len() {
        write!(text, "{} {}", escape(vocab.word(i)), vocab.count(i)).expect("write to string");
        for v in vectors.row(i) {
            write!(text, " {v}").expect("write to string");
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_word_vectors(path: &Path) -> Result<WordVectors> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(parse_err(1, format!("not a word-vector file: {header:?}")));
    }
    let number = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| parse_err(1, format!("bad {what} {s:?}")))
    };
    if number(fields[1], "version")? != VERSION as usize {
        return Err(parse_err(1, format!("unsupported version {}", fields[1])));
    }
    let (n, dim, min_count) = (
        number(fields[2], "row count")?,
        number(fields[3], "dimension")?,
        number(fields[4], "min_count")? as u64,
    );

    let mut words = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        let count = parts
            .next()
            .and_then(|c| c.parse::<u64>().ok())
            .ok_or_else(|| parse_err(line_no, "missing count".into()))?;
        let row: Vec<f64> = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        if row.len() != dim {
            return Err(parse_err(line_no, format!("expected {dim} values, got {}", row.len())));
        }
        words.push(unescape(token));
        counts.push(count);
        data.extend(row);
    }
    if words.len() != n {
        return Err(Error::Validation(format!(
            "{}: header declares {n} rows, found {}",
            path.display(),
            words.len()
        )));
    }
    WordVectors::new(Vocabulary::from_parts(words, counts, min_count), dim, data)
}

pub fn save_tfidf(path: &Path, stats: &TfIdfStats) -> Result<()> {
    write_json(path, stats)
}

pub fn load_tfidf(path: &Path) -> Result<TfIdfStats> {
    read_json(path)
}
