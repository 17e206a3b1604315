//! Labelled review corpus: CSV ingest, per-category statistics and the
//! stratified train/validation split.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dataset label. `CG` reviews are computer generated ("fake"), `OG` reviews
/// were written by people ("real").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "CG")]
    Cg,
    #[serde(rename = "OG")]
    Og,
}

impl Label {
    /// Numeric class. Fake is the positive class.
    pub fn class(self) -> u8 {
        match self {
            Label::Cg => 1,
            Label::Og => 0,
        }
    }

    pub fn from_class(class: u8) -> Self {
        if class == 1 {
            Label::Cg
        } else {
            Label::Og
        }
    }

    pub fn is_fake(self) -> bool {
        self == Label::Cg
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Cg => "CG",
            Label::Og => "OG",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CG" => Ok(Label::Cg),
            "OG" => Ok(Label::Og),
            other => Err(format!("unrecognised label `{other}` (expected CG or OG)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: u64,
    pub category: String,
    pub rating: f64,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip malformed records (bad label, bad rating, empty text) and report
    /// them as warnings instead of failing the whole load.
    pub skip_invalid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub message: String,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub reviews: Vec<Review>,
    pub warnings: Vec<LoadWarning>,
}

const COLUMNS: [&str; 4] = ["category", "rating", "label", "text"];

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    // The published dataset names its text column `text_`.
    headers.iter().position(|h| {
        let h = h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase();
        h == name || (name == "text" && h == "text_")
    })
}

/// Loads reviews from a CSV file. Columns are matched by name, in any order.
/// Review ids are the 0-based data row index, so skipped rows leave gaps.
pub fn load_reviews(path: impl AsRef<Path>, options: LoadOptions) -> Result<LoadedCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_reviews(file, options)
}

pub fn read_reviews<R: Read>(reader: R, options: LoadOptions) -> Result<LoadedCorpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = column_index(&headers, name).ok_or_else(|| Error::MissingColumn(name.into()))?;
    }
    let [cat_i, rating_i, label_i, text_i] = idx;

    let mut out = LoadedCorpus::default();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        let parsed = parse_record(
            row_idx as u64,
            field(cat_i),
            field(rating_i),
            field(label_i),
            field(text_i),
        );
        match parsed {
            Ok(review) => out.reviews.push(review),
            Err(message) if options.skip_invalid => out.warnings.push(LoadWarning { row, message }),
            Err(message) => return Err(Error::Record { row, message }),
        }
    }
    Ok(out)
}

fn parse_record(
    id: u64,
    category: &str,
    rating: &str,
    label: &str,
    text: &str,
) -> std::result::Result<Review, String> {
    let label: Label = label.parse()?;
    let rating: f64 = rating
        .trim()
        .parse()
        .map_err(|_| format!("unparseable rating `{rating}`"))?;
    if !(1.0..=5.0).contains(&rating) {
        return Err(format!("rating {rating} outside [1, 5]"));
    }
    if text.trim().is_empty() {
        return Err("empty review text".into());
    }
    Ok(Review {
        id,
        category: category.trim().to_string(),
        rating,
        text: text.to_string(),
        label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Chars,
    Tokens,
}

impl FromStr for LengthUnit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chars" | "characters" => Ok(LengthUnit::Chars),
            "tokens" | "words" => Ok(LengthUnit::Tokens),
            other => Err(format!("unknown length unit `{other}`")),
        }
    }
}

impl LengthUnit {
    pub fn measure(self, text: &str) -> usize {
        match self {
            LengthUnit::Chars => text.chars().count(),
            LengthUnit::Tokens => text.split_whitespace().count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryStats {
    pub fake_count: u64,
    pub fake_avg_len: f64,
    pub real_count: u64,
    pub real_avg_len: f64,
    #[serde(skip)]
    fake_len_sum: u64,
    #[serde(skip)]
    real_len_sum: u64,
}

impl CategoryStats {
    fn add(&mut self, label: Label, len: usize) {
        match label {
            Label::Cg => {
                self.fake_count += 1;
                self.fake_len_sum += len as u64;
            }
            Label::Og => {
                self.real_count += 1;
                self.real_len_sum += len as u64;
            }
        }
    }

    fn finish(&mut self) {
        let avg = |sum: u64, n: u64| if n == 0 { 0.0 } else { sum as f64 / n as f64 };
        self.fake_avg_len = avg(self.fake_len_sum, self.fake_count);
        self.real_avg_len = avg(self.real_len_sum, self.real_count);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub unit: LengthUnit,
    pub categories: BTreeMap<String, CategoryStats>,
    pub fake_total: u64,
    pub real_total: u64,
}

impl CorpusStats {
    pub fn total(&self) -> u64 {
        self.fake_total + self.real_total
    }

    /// Plain-text table in the layout of the category breakdown: one row per
    /// category with fake and real counts and rounded average lengths.
    pub fn render_table(&self) -> String {
        let width = self
            .categories
            .keys()
            .map(String::len)
            .chain(["Total Reviews".len(), "Category".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<width$}  {:>8} {:>8}  {:>8} {:>8}\n",
            "Category", "Fake", "AvgLen", "Real", "AvgLen"
        ));
        out.push_str(&format!("{}\n", "-".repeat(width + 38)));
        for (name, c) in &self.categories {
            out.push_str(&format!(
                "{:<width$}  {:>8} {:>8}  {:>8} {:>8}\n",
                name,
                c.fake_count,
                c.fake_avg_len.round() as u64,
                c.real_count,
                c.real_avg_len.round() as u64
            ));
        }
        out.push_str(&format!("{}\n", "-".repeat(width + 38)));
        out.push_str(&format!(
            "{:<width$}  {:>8} {:>8}  {:>8} {:>8}\n",
            "Total Reviews", self.fake_total, "", self.real_total, ""
        ));
        out
    }
}

pub fn corpus_stats(reviews: &[Review], unit: LengthUnit) -> CorpusStats {
    let mut stats = CorpusStats {
        unit,
        ..Default::default()
    };
    for r in reviews {
        stats
            .categories
            .entry(r.category.clone())
            .or_default()
            .add(r.label, unit.measure(&r.text));
        match r.label {
            Label::Cg => stats.fake_total += 1,
            Label::Og => stats.real_total += 1,
        }
    }
    stats
        .categories
        .values_mut()
        .for_each(CategoryStats::finish);
    stats
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<Review>,
    pub validation: Vec<Review>,
    pub fraction: f64,
    pub seed: u64,
}

/// Stratified shuffle-and-cut. Each label is shuffled independently with a
/// seeded generator and `round(fraction * n_label)` of it goes to validation.
/// Both halves come back ordered by review id.
pub fn split_train_validation(reviews: &[Review], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if reviews.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 reviews to split, got {}",
            reviews.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = vec![false; reviews.len()];
    for label in [Label::Cg, Label::Og] {
        let mut idx: Vec<usize> = (0..reviews.len())
            .filter(|&i| reviews[i].label == label)
            .collect();
        idx.shuffle(&mut rng);
        let take = (fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..take] {
            in_validation[i] = true;
        }
    }
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        fraction,
        seed,
    };
    for (r, val) in reviews.iter().zip(in_validation) {
        if val {
            split.validation.push(r.clone());
        } else {
            split.train.push(r.clone());
        }
    }
    split.train.sort_by_key(|r| r.id);
    split.validation.sort_by_key(|r| r.id);
    Ok(split)
}
