//! Labeled comment ingestion, class balancing and train/test splitting.

pub mod csv;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{streams, SeededRng};

/// The six raw toxicity columns, in file order.
pub const LABEL_COLUMNS: [&str; 6] = ["toxic", "severe_toxic", "obscene", "threat", "insult", "identity_hate"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonToxic,
    Toxic,
}

impl Label {
    /// Class index used by every model: non-toxic = 0, toxic = 1.
    pub fn index(self) -> usize {
        match self {
            Label::NonToxic => 0,
            Label::Toxic => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonToxic => "non_toxic",
            Label::Toxic => "toxic",
        }
    }

    /// ±1 encoding with toxic as the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Toxic => 1.0,
            Label::NonToxic => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One comment with its raw flags. The binary label is fixed at
/// construction: toxic iff any flag is set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledDocument {
    id: String,
    text: String,
    raw_labels: [bool; 6],
    label: Label,
}

impl LabeledDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, raw_labels: [bool; 6]) -> Self {
        let label = if raw_labels.iter().any(|&f| f) { Label::Toxic } else { Label::NonToxic };
        Self { id: id.into(), text: text.into(), raw_labels, label }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn raw_labels(&self) -> [bool; 6] {
        self.raw_labels
    }

    pub fn label(&self) -> Label {
        self.label
    }
}

/// Column names for [`parse_corpus`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub id: String,
    pub text: String,
    pub labels: [String; 6],
}

impl Default for Schema {
    fn default() -> Self {
        Self { id: "id".into(), text: "comment_text".into(), labels: LABEL_COLUMNS.map(String::from) }
    }
}

impl Schema {
    pub fn header(&self) -> Vec<&str> {
        let mut h = vec![self.id.as_str(), self.text.as_str()];
        h.extend(self.labels.iter().map(String::as_str));
        h
    }
}

pub fn parse_corpus(source: &[u8], schema: &Schema) -> Result<Vec<LabeledDocument>> {
    let records = csv::read_records(source)?;
    let Some((header, rows)) = records.split_first() else {
        return Err(Error::Schema { column: schema.id.clone() });
    };
    let find = |name: &str| {
        header.fields.iter().position(|h| h == name).ok_or_else(|| Error::Schema { column: name.to_string() })
    };
    let id_col = find(&schema.id)?;
    let text_col = find(&schema.text)?;
    let mut label_cols = [0usize; 6];
    for (slot, name) in label_cols.iter_mut().zip(&schema.labels) {
        *slot = find(name)?;
    }

    let width = header.fields.len();
    let mut docs = Vec::with_capacity(rows.len());
    for rec in rows {
        if rec.fields.len() != width {
            return Err(Error::Row {
                row: rec.number,
                message: format!("expected {width} fields, found {}", rec.fields.len()),
            });
        }
        let mut flags = [false; 6];
        for (k, &col) in label_cols.iter().enumerate() {
            flags[k] = match rec.fields[col].as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Row {
                        row: rec.number,
                        message: format!("label `{}` must be 0 or 1, got {other:?}", schema.labels[k]),
                    })
                }
            };
        }
        docs.push(LabeledDocument::new(rec.fields[id_col].clone(), rec.fields[text_col].clone(), flags));
    }
    Ok(docs)
}

pub fn write_corpus(docs: &[LabeledDocument], schema: &Schema) -> String {
    let mut out = String::new();
    csv::write_record(&mut out, &schema.header());
    for d in docs {
        let mut fields = vec![d.id.clone(), d.text.clone()];
        fields.extend(d.raw_labels.iter().map(|&f| if f { "1" } else { "0" }.to_string()));
        csv::write_record(&mut out, &fields);
    }
    out
}

/// What to do when toxic documents outnumber non-toxic ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    #[default]
    Strict,
    /// Down-sample the toxic class instead of failing.
    DownsampleToxic,
}

pub fn balanced_subsample(docs: &[LabeledDocument], seed: u64) -> Result<Vec<LabeledDocument>> {
    balanced_subsample_with(docs, seed, BalanceMode::Strict)
}

/// Keeps every minority document and an equal-size, seeded sample of the
/// majority, then shuffles the union.
pub fn balanced_subsample_with(docs: &[LabeledDocument], seed: u64, mode: BalanceMode) -> Result<Vec<LabeledDocument>> {
    let (toxic, clean): (Vec<&LabeledDocument>, Vec<&LabeledDocument>) =
        docs.iter().partition(|d| d.label == Label::Toxic);
    if toxic.is_empty() {
        return Err(Error::Balance("no toxic documents".into()));
    }
    if clean.is_empty() {
        return Err(Error::Balance("no non-toxic documents".into()));
    }
    let mut rng = SeededRng::substream(seed, streams::SAMPLING);
    let (keep, pool) = if toxic.len() <= clean.len() {
        (toxic, clean)
    } else if mode == BalanceMode::DownsampleToxic {
        (clean, toxic)
    } else {
        return Err(Error::Balance(format!("{} toxic documents exceed {} non-toxic", toxic.len(), clean.len())));
    };
    let picked = rng.sample_indices(pool.len(), keep.len());
    let mut out: Vec<LabeledDocument> = keep.into_iter().cloned().collect();
    out.extend(picked.into_iter().map(|i| pool[i].clone()));
    rng.shuffle(&mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Seeded shuffle, then the first ⌊fraction·N⌋ documents train.
pub fn split(docs: &[LabeledDocument], train_fraction: f64, seed: u64) -> Result<CorpusSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    if docs.len() < 2 {
        return Err(Error::arg(format!("need at least 2 documents to split, got {}", docs.len())));
    }
    let mut rng = SeededRng::substream(seed, streams::SPLIT);
    let order = rng.permutation(docs.len());
    let cut = (train_fraction * docs.len() as f64).floor() as usize;
    let mut train = Vec::with_capacity(cut);
    let mut test = Vec::with_capacity(docs.len() - cut);
    for (k, i) in order.into_iter().enumerate() {
        if k < cut {
            train.push(docs[i].clone());
        } else {
            test.push(docs[i].clone());
        }
    }
    Ok(CorpusSplit { train, test, seed, train_fraction })
}
