//! Corpus scanning: finding candidate stretched tokens.
//!
//! A candidate token contains a contiguous window `c1 c2 t1 .. t_k`
//! with `k >= pair_repeat` where every `t_i` is `c1` or `c2` (the two
//! may be equal, which covers a single letter repeated throughout the
//! window). With the default `pair_repeat = 28` the window spans
//! `min_total = 30` characters, so "o" repeated thirty times
//! qualifies while twenty-nine do not.
//!
//! [`scan_corpus`] lowercases each message, tokenizes it into maximal
//! runs of Unicode word characters, and keeps candidate tokens whose
//! characters are all in `a..=z`. Results aggregate into a
//! [`TokenCountTable`] whose contents are independent of message
//! order and of sharding: scanning shards separately and
//! [`TokenCountTable::merge`]-ing equals scanning the concatenation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use thiserror::Error;

use crate::kernel::Kernel;

/// Thresholds for candidate detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateConfig {
    min_total: usize,
    pair_repeat: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            min_total: 30,
            pair_repeat: 28,
        }
    }
}

/// Inconsistent candidate thresholds.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("min_total ({min_total}) must equal pair_repeat + 2 ({})", pair_repeat + 2)]
    WindowMismatch {
        min_total: usize,
        pair_repeat: usize,
    },
    #[error("pair_repeat must be positive")]
    ZeroRepeat,
}

impl CandidateConfig {
    /// Builds a config; `min_total` must equal `pair_repeat + 2`
    /// because the candidate window is the two seed characters plus
    /// the repeated tail.
    pub fn new(min_total: usize, pair_repeat: usize) -> Result<Self, ConfigError> {
        if pair_repeat == 0 {
            return Err(ConfigError::ZeroRepeat);
        }
        if min_total != pair_repeat + 2 {
            return Err(ConfigError::WindowMismatch {
                min_total,
                pair_repeat,
            });
        }
        Ok(CandidateConfig {
            min_total,
            pair_repeat,
        })
    }

    pub fn min_total(&self) -> usize {
        self.min_total
    }

    pub fn pair_repeat(&self) -> usize {
        self.pair_repeat
    }
}

/// Returns true iff `token` contains a window `c1 c2 t1 .. t_k`,
/// `k >= pair_repeat`, with every `t_i` in `{c1, c2}`.
pub fn is_candidate_token(token: &str, config: &CandidateConfig) -> bool {
    let bytes = token.as_bytes();
    let n = bytes.len();
    if n < config.min_total {
        return false;
    }
    for i in 0..=(n - config.min_total) {
        let c1 = bytes[i];
        let c2 = bytes[i + 1];
        let mut tail = 0;
        let mut j = i + 2;
        while j < n && (bytes[j] == c1 || bytes[j] == c2) {
            tail += 1;
            if tail >= config.pair_repeat {
                return true;
            }
            j += 1;
        }
    }
    false
}

/// One corpus message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub batch_id: u64,
    pub text: String,
}

/// Failures while ingesting or parsing corpus data.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error at line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line} is not valid utf-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line} is missing the batch_id<TAB>text prefix")]
    MissingBatchId { line: usize },
    #[error("line {line} has an unparsable batch id {value:?}")]
    InvalidBatchId { line: usize, value: String },
    #[error("invalid token {token:?}: tokens must be non-empty lowercase a-z")]
    InvalidToken { token: String },
    #[error("token {token:?} has a zero count")]
    ZeroCount { token: String },
    #[error("malformed token table row at line {line}: {row:?}")]
    MalformedRow { line: usize, row: String },
}

/// Iterates messages from a reader, one per line. In batched mode each
/// line is `batch_id<TAB>text`; otherwise the whole line is the text
/// of batch 0.
pub fn read_messages<R: BufRead>(
    reader: R,
    batched: bool,
) -> impl Iterator<Item = Result<Message, CorpusError>> {
    reader.split(b'\n').enumerate().map(move |(idx, row)| {
        let line = idx + 1;
        let mut raw = row.map_err(|source| CorpusError::Io { line, source })?;
        if raw.last() == Some(&b'\r') {
            raw.pop();
        }
        let text = String::from_utf8(raw).map_err(|_| CorpusError::InvalidUtf8 { line })?;
        if !batched {
            return Ok(Message { batch_id: 0, text });
        }
        let (id, rest) = text
            .split_once('\t')
            .ok_or(CorpusError::MissingBatchId { line })?;
        let batch_id = id.parse().map_err(|_| CorpusError::InvalidBatchId {
            line,
            value: id.to_string(),
        })?;
        Ok(Message {
            batch_id,
            text: rest.to_string(),
        })
    })
}

/// Token counts, ordered and deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenCountTable {
    entries: BTreeMap<String, u64>,
}

impl TokenCountTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` occurrences of `token`, validating the token
    /// invariants (non-empty, all `a..=z`, positive count).
    pub fn add(&mut self, token: &str, count: u64) -> Result<(), CorpusError> {
        if token.is_empty() || !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(CorpusError::InvalidToken {
                token: token.to_string(),
            });
        }
        if count == 0 {
            return Err(CorpusError::ZeroCount {
                token: token.to_string(),
            });
        }
        *self.entries.entry(token.to_string()).or_insert(0) += count;
        Ok(())
    }

    fn add_valid(&mut self, token: &str) {
        *self.entries.entry(token.to_string()).or_insert(0) += 1;
    }

    /// Folds another table into this one; counts add.
    pub fn merge(&mut self, other: TokenCountTable) {
        for (token, count) in other.entries {
            *self.entries.entry(token).or_insert(0) += count;
        }
    }

    pub fn get(&self, token: &str) -> u64 {
        self.entries.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates `(token, count)` in token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(t, c)| (t.as_str(), *c))
    }

    /// Total token occurrences.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Renders `token<TAB>count` rows sorted by descending count,
    /// ties broken by token text.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(&str, u64)> = self.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut out = String::new();
        for (token, count) in rows {
            out.push_str(token);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the [`TokenCountTable::to_tsv`] format.
    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut table = TokenCountTable::new();
        for (idx, row) in text.lines().enumerate() {
            if row.is_empty() {
                continue;
            }
            let line = idx + 1;
            let (token, count) = row
                .split_once('\t')
                .ok_or_else(|| CorpusError::MalformedRow {
                    line,
                    row: row.to_string(),
                })?;
            let count: u64 = count.parse().map_err(|_| CorpusError::MalformedRow {
                line,
                row: row.to_string(),
            })?;
            table.add(token, count)?;
        }
        Ok(table)
    }
}

impl FromIterator<(String, u64)> for TokenCountTable {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        let mut table = TokenCountTable::new();
        for (token, count) in iter {
            table
                .add(&token, count)
                .expect("token table literals must satisfy the token invariants");
        }
        table
    }
}

/// Result of a corpus scan.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanOutput {
    pub counts: TokenCountTable,
    /// Distinct candidate tokens per batch; populated only when the
    /// scan tracks batches.
    pub per_batch: Option<BTreeMap<u64, BTreeSet<String>>>,
}

impl ScanOutput {
    /// Folds another scan into this one under the same contract as
    /// [`TokenCountTable::merge`].
    pub fn merge(&mut self, other: ScanOutput) {
        self.counts.merge(other.counts);
        match (&mut self.per_batch, other.per_batch) {
            (Some(mine), Some(theirs)) => {
                for (batch, tokens) in theirs {
                    mine.entry(batch).or_default().extend(tokens);
                }
            }
            (mine @ None, theirs @ Some(_)) => *mine = theirs,
            _ => {}
        }
    }
}

/// Scans messages for candidate tokens.
///
/// Each message is lowercased and split into maximal runs of Unicode
/// word characters (alphanumeric or underscore); a token is kept when
/// all its characters are in `a..=z` and [`is_candidate_token`]
/// accepts it. When `track_batches` is set, distinct retained tokens
/// are also recorded per batch id.
pub fn scan_corpus<I>(
    messages: I,
    config: &CandidateConfig,
    track_batches: bool,
) -> Result<ScanOutput, CorpusError>
where
    I: IntoIterator<Item = Result<Message, CorpusError>>,
{
    let mut out = ScanOutput {
        counts: TokenCountTable::new(),
        per_batch: track_batches.then(BTreeMap::new),
    };
    for message in messages {
        let message = message?;
        let lowered = message.text.to_lowercase();
        for token in tokenize(&lowered) {
            if !token.bytes().all(|b| b.is_ascii_lowercase()) {
                continue;
            }
            if !is_candidate_token(token, config) {
                continue;
            }
            out.counts.add_valid(token);
            if let Some(per_batch) = &mut out.per_batch {
                per_batch
                    .entry(message.batch_id)
                    .or_default()
                    .insert(token.to_string());
            }
        }
    }
    Ok(out)
}

/// Lowercases a message and returns its all-letter tokens with no
/// candidate filtering: the tokenization of the second corpus pass,
/// which matches every token against kernel patterns.
pub fn letter_tokens(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    tokenize(&lowered)
        .filter(|t| t.bytes().all(|b| b.is_ascii_lowercase()))
        .map(str::to_string)
        .collect()
}

/// Maximal runs of Unicode word characters (alphanumeric or `_`).
fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !is_word_char(c))
        .filter(|t| !t.is_empty())
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Keeps a kernel iff it was seen in at least two batches, or in one
/// batch derived from at least two distinct stretched words.
pub fn batch_filter(per_batch: &BTreeMap<u64, BTreeSet<(Kernel, String)>>) -> BTreeSet<Kernel> {
    let mut evidence: BTreeMap<&Kernel, BTreeMap<u64, BTreeSet<&str>>> = BTreeMap::new();
    for (batch, entries) in per_batch {
        for (kernel, word) in entries {
            evidence
                .entry(kernel)
                .or_default()
                .entry(*batch)
                .or_default()
                .insert(word.as_str());
        }
    }
    evidence
        .into_iter()
        .filter(|(_, batches)| {
            batches.len() >= 2
                || batches
                    .values()
                    .next()
                    .is_some_and(|words| words.len() >= 2)
        })
        .map(|(kernel, _)| kernel.clone())
        .collect()
}
