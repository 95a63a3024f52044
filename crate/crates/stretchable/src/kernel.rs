//! Kernels: the distilled skeletons of stretched words.
//!
//! A kernel is a sequence of elements, each classifying one section of a
//! word family:
//!
//! - `Literal(l)` — the letter appears exactly once ("g" in `g[o][a]l`),
//! - `Single(l)`, written `[l]` — a letter run of any positive length,
//! - `Pair(l1, l2)`, written `(l1l2)` — an interleaved two-letter section
//!   that starts with `l1` and contains `l2`.
//!
//! The operations here are:
//!
//! - [`distill`] / [`distill_trace`]: collapse a token to its kernel,
//! - [`merge`]: fold kernels of the same base word into one cover,
//! - [`Kernel::pattern`]: synthesize the matching regular expression,
//! - [`segment`]: match a token against a kernel and attribute letters
//!   to kernel positions,
//! - [`Kernel::from_str`] / `Display`: the textual kernel grammar.
//!
//! Kernels uphold two structural invariants: every `Pair` holds two
//! distinct letters, and no two adjacent `Single`/`Literal` elements
//! carry the same letter (such runs would have been fused).

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::ops::Range;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A lowercase ASCII letter, the only alphabet kernels are built from.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

impl Letter {
    /// Wraps `c`, returning `None` unless it is in `a..=z`.
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_lowercase().then_some(Letter(c as u8))
    }

    fn from_byte(b: u8) -> Option<Self> {
        b.is_ascii_lowercase().then_some(Letter(b))
    }

    pub fn as_char(self) -> char {
        self.0 as char
    }

    pub(crate) fn as_byte(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char(self.as_char())
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Letter({})", self.as_char())
    }
}

/// One element of a kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    /// A letter that occurs exactly once.
    Literal(Letter),
    /// `[l]`: a run of one letter, arbitrary positive length.
    Single(Letter),
    /// `(l1l2)`: an interleaved section over two distinct letters,
    /// starting with `l1` and containing `l2` at least once.
    Pair(Letter, Letter),
}

impl Element {
    /// Number of kernel letter positions this element contributes.
    pub fn letter_len(&self) -> usize {
        match self {
            Element::Literal(_) | Element::Single(_) => 1,
            Element::Pair(..) => 2,
        }
    }

    /// The letter of a `Literal`/`Single`, `None` for a `Pair`.
    fn single_letter(&self) -> Option<Letter> {
        match self {
            Element::Literal(l) | Element::Single(l) => Some(*l),
            Element::Pair(..) => None,
        }
    }

    fn push_letters(&self, out: &mut Vec<Letter>) {
        match self {
            Element::Literal(l) | Element::Single(l) => out.push(*l),
            Element::Pair(l1, l2) => {
                out.push(*l1);
                out.push(*l2);
            }
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Literal(l) => write!(f, "{l}"),
            Element::Single(l) => write!(f, "[{l}]"),
            Element::Pair(l1, l2) => write!(f, "({l1}{l2})"),
        }
    }
}

/// The distilled skeleton of a word family.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Kernel {
    elements: Vec<Element>,
}

/// A structurally invalid element sequence.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidKernel {
    #[error("kernel must contain at least one element")]
    Empty,
    #[error("pair element may not repeat a letter ({0})")]
    PairLettersEqual(Letter),
    #[error("adjacent elements {0} and {1} carry the same letter and must be fused")]
    AdjacentSameLetter(Element, Element),
}

impl Kernel {
    /// Builds a kernel, enforcing the structural invariants.
    pub fn from_elements(elements: Vec<Element>) -> Result<Self, InvalidKernel> {
        if elements.is_empty() {
            return Err(InvalidKernel::Empty);
        }
        for e in &elements {
            if let Element::Pair(l1, l2) = e {
                if l1 == l2 {
                    return Err(InvalidKernel::PairLettersEqual(*l1));
                }
            }
        }
        for w in elements.windows(2) {
            if let (Some(a), Some(b)) = (w[0].single_letter(), w[1].single_letter()) {
                if a == b {
                    return Err(InvalidKernel::AdjacentSameLetter(w[0], w[1]));
                }
            }
        }
        Ok(Kernel { elements })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Letters at each kernel position; a `Pair` contributes two.
    pub fn letter_positions(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        for e in &self.elements {
            e.push_letters(&mut out);
        }
        out
    }

    /// Number of letter positions, which is also the length of the
    /// shortest token the kernel matches.
    pub fn letter_len(&self) -> usize {
        self.elements.iter().map(Element::letter_len).sum()
    }

    /// Indices of `Pair` elements.
    pub fn pair_indices(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, Element::Pair(..)))
            .map(|(i, _)| i)
            .collect()
    }

    /// The anchored regular expression this kernel matches.
    ///
    /// `Literal l` becomes `l`, `[l]` becomes `[l]+`, and `(l1l2)`
    /// becomes `l1[l1l2]*l2[l1l2]*`; the whole pattern is wrapped in
    /// `\b` anchors.
    pub fn pattern(&self) -> String {
        let mut p = String::from("\\b");
        for e in &self.elements {
            match e {
                Element::Literal(l) => p.push(l.as_char()),
                Element::Single(l) => {
                    let l = l.as_char();
                    let _ = write!(p, "[{l}]+");
                }
                Element::Pair(l1, l2) => {
                    let (a, b) = (l1.as_char(), l2.as_char());
                    let _ = write!(p, "{a}[{a}{b}]*{b}[{a}{b}]*");
                }
            }
        }
        p.push_str("\\b");
        p
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.elements {
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kernel({self})")
    }
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A kernel-grammar parse failure, reporting the byte index of the
/// offending element.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseKernelError {
    #[error("kernel text is empty")]
    Empty,
    #[error("unexpected character {ch:?} at index {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unterminated element starting at index {pos}")]
    Unterminated { pos: usize },
    #[error("invalid kernel structure: {0}")]
    Invalid(#[from] InvalidKernel),
}

impl ParseKernelError {
    /// Byte index the error refers to, when positional.
    pub fn position(&self) -> Option<usize> {
        match self {
            ParseKernelError::UnexpectedChar { pos, .. }
            | ParseKernelError::Unterminated { pos } => Some(*pos),
            _ => None,
        }
    }
}

impl FromStr for Kernel {
    type Err = ParseKernelError;

    /// Parses the kernel grammar:
    /// `element := letter | '[' letter ']' | '(' letter letter ')'`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ParseKernelError::Empty);
        }
        let bytes = s.as_bytes();
        let letter_at = |pos: usize| -> Result<Letter, ParseKernelError> {
            match bytes.get(pos) {
                None => Err(ParseKernelError::Unterminated { pos: usize::MAX }),
                Some(&b) => Letter::from_byte(b).ok_or(ParseKernelError::UnexpectedChar {
                    pos,
                    ch: s[pos..].chars().next().unwrap_or('\u{fffd}'),
                }),
            }
        };
        let expect = |pos: usize, want: u8| -> Result<(), ParseKernelError> {
            match bytes.get(pos) {
                None => Err(ParseKernelError::Unterminated { pos: usize::MAX }),
                Some(&b) if b == want => Ok(()),
                Some(_) => Err(ParseKernelError::UnexpectedChar {
                    pos,
                    ch: s[pos..].chars().next().unwrap_or('\u{fffd}'),
                }),
            }
        };
        // Rewrites an end-of-input error to point at the element start.
        let anchor = |err: ParseKernelError, start: usize| match err {
            ParseKernelError::Unterminated { pos } if pos == usize::MAX => {
                ParseKernelError::Unterminated { pos: start }
            }
            other => other,
        };

        let mut elements = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            match bytes[pos] {
                b'[' => {
                    let start = pos;
                    let l = letter_at(pos + 1).map_err(|e| anchor(e, start))?;
                    expect(pos + 2, b']').map_err(|e| anchor(e, start))?;
                    elements.push(Element::Single(l));
                    pos += 3;
                }
                b'(' => {
                    let start = pos;
                    let l1 = letter_at(pos + 1).map_err(|e| anchor(e, start))?;
                    let l2 = letter_at(pos + 2).map_err(|e| anchor(e, start))?;
                    expect(pos + 3, b')').map_err(|e| anchor(e, start))?;
                    elements.push(Element::Pair(l1, l2));
                    pos += 4;
                }
                b => match Letter::from_byte(b) {
                    Some(l) => {
                        elements.push(Element::Literal(l));
                        pos += 1;
                    }
                    None => {
                        return Err(ParseKernelError::UnexpectedChar {
                            pos,
                            ch: s[pos..].chars().next().unwrap_or('\u{fffd}'),
                        })
                    }
                },
            }
        }
        Ok(Kernel::from_elements(elements)?)
    }
}

/// A token rejected by [`distill`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistillError {
    #[error("cannot distill an empty token")]
    EmptyToken,
    #[error("token contains non-letter byte at index {pos}")]
    NonLetter { pos: usize },
}

/// One rewrite performed by the distillation scan.
struct Replacement {
    start: usize,
    end: usize,
    elements: Vec<Element>,
}

/// Distills `token` to its kernel.
///
/// The scan walks left to right. At each position with letter `l1` it
/// takes the maximal run over `{l1, l2}` (`l2` being the next distinct
/// letter inside the run) and accepts it as a pair run when the run
/// after its first character has length at least 3 and each letter
/// occurs at least twice. Accepted runs shaped `l1^j l2^k` rewrite to
/// `[l1][l2]`, runs shaped `l1^j l2^k l1^m` to `[l1][l2][l1]`, and any
/// other shape to `(l1 l2)`. A rejected position is retried one
/// position further on. Afterwards, leftover same-letter runs of
/// length at least 2 fuse to `[l]` and single letters stay literal.
pub fn distill(token: &str) -> Result<Kernel, DistillError> {
    let (kernel, _) = distill_inner(token, false)?;
    Ok(kernel)
}

/// Like [`distill`], also returning the intermediate form after every
/// individual rewrite, in the order the rewrites are applied.
pub fn distill_trace(token: &str) -> Result<(Kernel, Vec<String>), DistillError> {
    distill_inner(token, true)
}

fn distill_inner(token: &str, want_trace: bool) -> Result<(Kernel, Vec<String>), DistillError> {
    let bytes = token.as_bytes();
    if bytes.is_empty() {
        return Err(DistillError::EmptyToken);
    }
    if let Some(pos) = bytes.iter().position(|b| !b.is_ascii_lowercase()) {
        return Err(DistillError::NonLetter { pos });
    }

    let mut replacements = pair_pass(bytes);
    single_pass(bytes, &mut replacements);

    let mut trace = Vec::new();
    if want_trace {
        for applied in 1..=replacements.len() {
            trace.push(render_partial(bytes, &replacements, applied));
        }
    }

    // Pair rewrites were recorded in scan order, single-letter fusions
    // after them; assemble the kernel in positional order.
    let mut ordered: Vec<&Replacement> = replacements.iter().collect();
    ordered.sort_by_key(|r| r.start);
    let mut elements = Vec::new();
    let mut pos = 0;
    for r in &ordered {
        for &b in &bytes[pos..r.start] {
            elements.push(Element::Literal(Letter(b)));
        }
        elements.extend(r.elements.iter().copied());
        pos = r.end;
    }
    for &b in &bytes[pos..] {
        elements.push(Element::Literal(Letter(b)));
    }
    let kernel = Kernel::from_elements(elements)
        .expect("distillation preserves kernel structural invariants");
    Ok((kernel, trace))
}

fn pair_pass(bytes: &[u8]) -> Vec<Replacement> {
    let n = bytes.len();
    let mut reps = Vec::new();
    let mut i = 0;
    while i < n {
        let l1 = bytes[i];
        let mut j = i + 1;
        while j < n && bytes[j] == l1 {
            j += 1;
        }
        if j < n {
            let l2 = bytes[j];
            let mut k = j + 1;
            while k < n && (bytes[k] == l1 || bytes[k] == l2) {
                k += 1;
            }
            let run = &bytes[i..k];
            let c1 = run.iter().filter(|&&b| b == l1).count();
            let c2 = run.len() - c1;
            if run.len() >= 4 && c1 >= 2 && c2 >= 2 {
                reps.push(Replacement {
                    start: i,
                    end: k,
                    elements: classify_pair_run(run, l1),
                });
                i = k;
                continue;
            }
        }
        i += 1;
    }
    reps
}

/// Classifies an accepted pair run by its same-letter segment shape.
fn classify_pair_run(run: &[u8], l1: u8) -> Vec<Element> {
    let mut segments = Vec::new();
    let mut i = 0;
    while i < run.len() {
        let b = run[i];
        let mut j = i + 1;
        while j < run.len() && run[j] == b {
            j += 1;
        }
        segments.push(b);
        i = j;
    }
    let letter = |b: u8| Letter(b);
    match segments.as_slice() {
        [a, b] => vec![Element::Single(letter(*a)), Element::Single(letter(*b))],
        [a, b, c] if *c == l1 => vec![
            Element::Single(letter(*a)),
            Element::Single(letter(*b)),
            Element::Single(letter(*c)),
        ],
        _ => {
            let l2 = segments[1];
            vec![Element::Pair(letter(l1), letter(l2))]
        }
    }
}

/// Fuses leftover same-letter runs of length >= 2, appending the
/// rewrites in scan order after the pair rewrites.
fn single_pass(bytes: &[u8], reps: &mut Vec<Replacement>) {
    let mut covered = vec![false; bytes.len()];
    for r in reps.iter() {
        for c in covered[r.start..r.end].iter_mut() {
            *c = true;
        }
    }
    let mut i = 0;
    while i < bytes.len() {
        if covered[i] {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < bytes.len() && !covered[j] && bytes[j] == bytes[i] {
            j += 1;
        }
        if j - i >= 2 {
            reps.push(Replacement {
                start: i,
                end: j,
                elements: vec![Element::Single(Letter(bytes[i]))],
            });
        }
        i = j;
    }
}

fn render_partial(bytes: &[u8], reps: &[Replacement], applied: usize) -> String {
    let mut active: Vec<&Replacement> = reps[..applied].iter().collect();
    active.sort_by_key(|r| r.start);
    let mut out = String::new();
    let mut pos = 0;
    for r in active {
        out.push_str(std::str::from_utf8(&bytes[pos..r.start]).unwrap());
        for e in &r.elements {
            let _ = write!(out, "{e}");
        }
        pos = r.end;
    }
    out.push_str(std::str::from_utf8(&bytes[pos..]).unwrap());
    out
}

/// Two kernels that describe different base words and cannot merge.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("kernels {left} and {right} describe different base words")]
pub struct Incompatible {
    pub left: String,
    pub right: String,
}

/// Merges two kernels of the same base word into their element-wise
/// least-general cover.
///
/// The flattened letter sequences must be equal. At each letter
/// position `Single` dominates `Literal`, and a `Pair` in either
/// kernel dominates whatever the other kernel holds over the two
/// positions it spans. Misaligned pairs are [`Incompatible`].
pub fn merge(a: &Kernel, b: &Kernel) -> Result<Kernel, Incompatible> {
    let incompatible = || Incompatible {
        left: a.to_string(),
        right: b.to_string(),
    };
    let (ea, eb) = (a.elements(), b.elements());
    let mut out = Vec::new();
    let (mut ia, mut ib) = (0, 0);
    while ia < ea.len() && ib < eb.len() {
        match (ea[ia], eb[ib]) {
            (Element::Pair(p, q), Element::Pair(r, s)) => {
                if (p, q) != (r, s) {
                    return Err(incompatible());
                }
                out.push(Element::Pair(p, q));
                ia += 1;
                ib += 1;
            }
            (Element::Pair(p, q), other) => {
                let first = other.single_letter().ok_or_else(incompatible)?;
                let second = eb
                    .get(ib + 1)
                    .and_then(Element::single_letter)
                    .ok_or_else(incompatible)?;
                if (first, second) != (p, q) {
                    return Err(incompatible());
                }
                out.push(Element::Pair(p, q));
                ia += 1;
                ib += 2;
            }
            (other, Element::Pair(p, q)) => {
                let first = other.single_letter().ok_or_else(incompatible)?;
                let second = ea
                    .get(ia + 1)
                    .and_then(Element::single_letter)
                    .ok_or_else(incompatible)?;
                if (first, second) != (p, q) {
                    return Err(incompatible());
                }
                out.push(Element::Pair(p, q));
                ia += 2;
                ib += 1;
            }
            (x, y) => {
                let (lx, ly) = (x.single_letter().unwrap(), y.single_letter().unwrap());
                if lx != ly {
                    return Err(incompatible());
                }
                let fused = if matches!(x, Element::Single(_)) || matches!(y, Element::Single(_)) {
                    Element::Single(lx)
                } else {
                    Element::Literal(lx)
                };
                out.push(fused);
                ia += 1;
                ib += 1;
            }
        }
    }
    if ia != ea.len() || ib != eb.len() {
        return Err(incompatible());
    }
    Ok(Kernel::from_elements(out).expect("merge of valid kernels preserves kernel invariants"))
}

/// Groups kernels by flattened letter sequence and folds [`merge`]
/// over each group in sorted order; incompatible kernels stay
/// separate. The result is sorted by kernel text.
pub fn merge_all<I: IntoIterator<Item = Kernel>>(kernels: I) -> Vec<Kernel> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<Vec<Letter>, Vec<Kernel>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for k in kernels {
        if seen.insert(k.clone()) {
            groups.entry(k.letter_positions()).or_default().push(k);
        }
    }
    let mut out = Vec::new();
    for mut group in groups.into_values() {
        group.sort_by_key(|k| k.to_string());
        let mut reps: Vec<Kernel> = Vec::new();
        'next: for k in group {
            for rep in reps.iter_mut() {
                if let Ok(m) = merge(rep, &k) {
                    *rep = m;
                    continue 'next;
                }
            }
            reps.push(k);
        }
        out.extend(reps);
    }
    out.sort_by_key(|k| k.to_string());
    out
}

/// A token that does not match a kernel's pattern.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("token {token:?} is not a version of kernel {kernel}")]
pub struct NoMatch {
    pub token: String,
    pub kernel: String,
}

/// How a token divides across a kernel's elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    element_spans: Vec<Range<usize>>,
    position_counts: Vec<u64>,
}

impl Segmentation {
    /// Byte span of the token consumed by each element, in element
    /// order.
    pub fn element_spans(&self) -> &[Range<usize>] {
        &self.element_spans
    }

    /// Letter occurrences per kernel letter position; a `Pair`
    /// contributes the counts of `l1` and `l2` separately.
    pub fn position_counts(&self) -> &[u64] {
        &self.position_counts
    }
}

/// Segments `token` against `kernel`, leftmost-longest: each element
/// is greedy, with backtracking so the whole token is consumed.
pub fn segment(token: &str, kernel: &Kernel) -> Result<Segmentation, NoMatch> {
    let no_match = || NoMatch {
        token: token.to_string(),
        kernel: kernel.to_string(),
    };
    let bytes = token.as_bytes();
    let elems = kernel.elements();
    let mut spans = vec![0..0; elems.len()];
    let mut failed = HashSet::new();
    if !match_from(bytes, elems, 0, 0, &mut spans, &mut failed) {
        return Err(no_match());
    }
    let mut position_counts = Vec::with_capacity(kernel.letter_len());
    for (e, span) in elems.iter().zip(&spans) {
        let piece = &bytes[span.clone()];
        match e {
            Element::Literal(_) | Element::Single(_) => {
                position_counts.push(piece.len() as u64);
            }
            Element::Pair(l1, _) => {
                let c1 = piece.iter().filter(|&&b| b == l1.as_byte()).count() as u64;
                position_counts.push(c1);
                position_counts.push(piece.len() as u64 - c1);
            }
        }
    }
    Ok(Segmentation {
        element_spans: spans,
        position_counts,
    })
}

fn match_from(
    bytes: &[u8],
    elems: &[Element],
    ei: usize,
    pos: usize,
    spans: &mut Vec<Range<usize>>,
    failed: &mut HashSet<(usize, usize)>,
) -> bool {
    if ei == elems.len() {
        return pos == bytes.len();
    }
    if failed.contains(&(ei, pos)) {
        return false;
    }
    let n = bytes.len();
    let ok = match elems[ei] {
        Element::Literal(l) => {
            pos < n && bytes[pos] == l.as_byte() && {
                spans[ei] = pos..pos + 1;
                match_from(bytes, elems, ei + 1, pos + 1, spans, failed)
            }
        }
        Element::Single(l) => {
            let mut run = 0;
            while pos + run < n && bytes[pos + run] == l.as_byte() {
                run += 1;
            }
            (1..=run).rev().any(|take| {
                spans[ei] = pos..pos + take;
                match_from(bytes, elems, ei + 1, pos + take, spans, failed)
            })
        }
        Element::Pair(l1, l2) => {
            if pos >= n || bytes[pos] != l1.as_byte() {
                false
            } else {
                let mut ext = 1;
                while pos + ext < n
                    && (bytes[pos + ext] == l1.as_byte() || bytes[pos + ext] == l2.as_byte())
                {
                    ext += 1;
                }
                // The span must reach past the first l2 occurrence.
                let first_l2 = bytes[pos..pos + ext]
                    .iter()
                    .position(|&b| b == l2.as_byte());
                match first_l2 {
                    None => false,
                    Some(idx) => (idx + 1..=ext).rev().any(|take| {
                        spans[ei] = pos..pos + take;
                        match_from(bytes, elems, ei + 1, pos + take, spans, failed)
                    }),
                }
            }
        }
    };
    if !ok {
        failed.insert((ei, pos));
    }
    ok
}
