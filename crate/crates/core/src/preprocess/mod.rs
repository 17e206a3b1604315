//! Review text cleaning.
//!
//! `preprocess_review` runs the fixed pipeline
//! normalize → tokenize → remove stopwords → lemmatize. Lemmatizing can turn a
//! content word into a stopword (`justly` → `just`), so the stopword filter is
//! applied once more after the last stage.

mod lemma;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Review;
use crate::error::{Error, Result};

pub use lemma::{exception_pairs, lemmatize};

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

enum Translit {
    Ascii(&'static str),
    Space,
    Drop,
}

/// Transliteration for Latin-1 Supplement and Latin Extended-A.
fn transliterate(c: char) -> Option<Translit> {
    use Translit::*;
    let t = match c as u32 {
        0xA0 => Space,
        0xA1 | 0xA7 | 0xAB | 0xB6 | 0xB7 | 0xBB | 0xBF | 0xD7 | 0xF7 => Space,
        0xAA => Ascii("a"),
        0xB2 => Ascii("2"),
        0xB3 => Ascii("3"),
        0xB5 => Ascii("u"),
        0xB9 => Ascii("1"),
        0xBA => Ascii("o"),
        0xA2..=0xBE => Drop,
        0xC0..=0xC5 | 0xE0..=0xE5 => Ascii("a"),
        0xC6 | 0xE6 => Ascii("ae"),
        0xC7 | 0xE7 => Ascii("c"),
        0xC8..=0xCB | 0xE8..=0xEB => Ascii("e"),
        0xCC..=0xCF | 0xEC..=0xEF => Ascii("i"),
        0xD0 | 0xF0 => Ascii("d"),
        0xD1 | 0xF1 => Ascii("n"),
        0xD2..=0xD6 | 0xD8 | 0xF2..=0xF6 | 0xF8 => Ascii("o"),
        0xD9..=0xDC | 0xF9..=0xFC => Ascii("u"),
        0xDD | 0xFD | 0xFF => Ascii("y"),
        0xDE | 0xFE => Ascii("th"),
        0xDF => Ascii("ss"),
        0x100..=0x105 => Ascii("a"),
        0x106..=0x10D => Ascii("c"),
        0x10E..=0x111 => Ascii("d"),
        0x112..=0x11B => Ascii("e"),
        0x11C..=0x123 => Ascii("g"),
        0x124..=0x127 => Ascii("h"),
        0x128..=0x131 => Ascii("i"),
        0x132 | 0x133 => Ascii("ij"),
        0x134 | 0x135 => Ascii("j"),
        0x136..=0x138 => Ascii("k"),
        0x139..=0x142 => Ascii("l"),
        0x143..=0x149 => Ascii("n"),
        0x14A | 0x14B => Ascii("ng"),
        0x14C..=0x151 => Ascii("o"),
        0x152 | 0x153 => Ascii("oe"),
        0x154..=0x159 => Ascii("r"),
        0x15A..=0x161 => Ascii("s"),
        0x162..=0x167 => Ascii("t"),
        0x168..=0x173 => Ascii("u"),
        0x174 | 0x175 => Ascii("w"),
        0x176..=0x178 => Ascii("y"),
        0x179..=0x17E => Ascii("z"),
        0x17F => Ascii("s"),
        _ => return None,
    };
    Some(t)
}

fn is_wide_punctuation(c: char) -> bool {
    matches!(c as u32, 0x2010..=0x205E | 0x3000..=0x303F | 0xFF01..=0xFF0F)
}

/// Lowercases, transliterates accented Latin letters to ASCII and replaces
/// punctuation with spaces. The result holds only `[a-z0-9 ]`, with single
/// spaces between words and none at either end.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    let push = |s: &str, out: &mut String, pending: &mut bool| {
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
        out.push_str(s);
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            let lower = c.to_ascii_lowercase();
            push(
                lower.encode_utf8(&mut [0u8; 4]),
                &mut out,
                &mut pending_space,
            );
        } else if c.is_whitespace() || c.is_ascii_punctuation() || is_wide_punctuation(c) {
            pending_space = true;
        } else {
            match transliterate(c) {
                Some(Translit::Ascii(s)) => push(s, &mut out, &mut pending_space),
                Some(Translit::Space) => pending_space = true,
                Some(Translit::Drop) | None => {}
            }
        }
    }
    out
}

/// Splits normalized text on whitespace runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopwordSource {
    Builtin,
    File,
}

#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
    source: StopwordSource,
}

impl StopwordList {
    /// The shipped 179-word English list.
    pub fn builtin() -> Self {
        Self {
            words: parse_word_list(BUILTIN_STOPWORDS),
            source: StopwordSource::Builtin,
        }
    }

    /// Reads a word list: one word per line, UTF-8, `#` starts a comment line.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            words: parse_word_list(&text),
            source: StopwordSource::File,
        })
    }

    pub fn empty() -> Self {
        Self {
            words: HashSet::new(),
            source: StopwordSource::File,
        }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .collect(),
            source: StopwordSource::File,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source(&self) -> StopwordSource {
        self.source
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, list: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedReview {
    pub review_id: u64,
    pub tokens: Vec<String>,
}

/// Cleans a piece of free text into lemmatized content tokens.
pub fn clean_text(text: &str, list: &StopwordList) -> Vec<String> {
    let tokens = remove_stopwords(tokenize(&normalize_text(text)), list);
    tokens
        .iter()
        .map(|t| lemmatize(t))
        .filter(|t| !list.contains(t))
        .collect()
}

pub fn preprocess_review(review: &Review, list: &StopwordList) -> TokenizedReview {
    TokenizedReview {
        review_id: review.id,
        tokens: clean_text(&review.text, list),
    }
}

/// Cleans every review in parallel; output order follows input order.
pub fn preprocess_corpus(reviews: &[Review], list: &StopwordList) -> Vec<TokenizedReview> {
    reviews
        .par_iter()
        .map(|r| preprocess_review(r, list))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyStage {
    /// Normalized tokens before stopword removal.
    Raw,
    /// Full pipeline output.
    Cleaned,
}

impl std::str::FromStr for FrequencyStage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "raw" => Ok(FrequencyStage::Raw),
            "cleaned" => Ok(FrequencyStage::Cleaned),
            other => Err(format!("unknown stage `{other}` (expected raw or cleaned)")),
        }
    }
}

/// Token counts sorted by count descending, ties in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyTable {
    pub entries: Vec<(String, u64)>,
}

impl FrequencyTable {
    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn from_token_lists<'a, I>(lists: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts = HashMap::new();
        for list in lists {
            count_into(&mut counts, list);
        }
        Self::from_counts(counts)
    }

    pub fn top(&self, n: usize) -> &[(String, u64)] {
        &self.entries[..n.min(self.entries.len())]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn count_into(counts: &mut HashMap<String, u64>, tokens: &[String]) {
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
}

fn merge_counts(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// Corpus-wide token frequencies at the requested pipeline stage.
pub fn frequency_table(
    reviews: &[Review],
    stage: FrequencyStage,
    list: &StopwordList,
) -> FrequencyTable {
    let counts = reviews
        .par_iter()
        .fold(HashMap::new, |mut acc, r| {
            let tokens = match stage {
                FrequencyStage::Raw => tokenize(&normalize_text(&r.text)),
                FrequencyStage::Cleaned => clean_text(&r.text, list),
            };
            count_into(&mut acc, &tokens);
            acc
        })
        .reduce(HashMap::new, merge_counts);
    FrequencyTable::from_counts(counts)
}
