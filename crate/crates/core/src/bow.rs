//! Bag-of-words features: document-term matrix, TF-IDF weighting and
//! sparse-term pruning, plus the fitted pipeline that replays the training
//! term set and IDF weights on unseen documents.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_slice, Exec};
use crate::numerics::Matrix;
use crate::textprep::tokenize;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Lowercase tokens excluded from the term list. Entries are stored in
/// tokenized form, so contractions such as `don't` contribute `don` and `t`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in 174-entry English list.
    pub fn english() -> Self {
        Self::from_lines(ENGLISH_STOPWORDS)
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words.into_iter().flat_map(|w| tokenize(w.as_ref())).collect();
        Self { words }
    }

    /// One entry per line; blank lines ignored.
    pub fn from_lines(text: &str) -> Self {
        Self::from_words(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Counts,
    TfIdf,
}

/// Sparse document-term matrix. Each row holds `(term, weight)` pairs sorted
/// by term index with no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentTermMatrix {
    terms: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
    doc_freq: Vec<usize>,
    idf: Option<Vec<f64>>,
    weighting: Weighting,
}

impl DocumentTermMatrix {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Number of documents containing each term.
    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn idf(&self) -> Option<&[f64]> {
        self.idf.as_deref()
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn get(&self, doc: usize, term: usize) -> f64 {
        let row = &self.rows[doc];
        row.binary_search_by_key(&term, |&(t, _)| t).map_or(0.0, |k| row[k].1)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_docs(), self.n_terms());
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, w) in row {
                m.set(d, t, w);
            }
        }
        m
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "% rows: documents, columns: terms ({:?} weights)", self.weighting);
        let _ = writeln!(s, "{} {} {}", self.n_docs(), self.n_terms(), self.nnz());
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, w) in row {
                let _ = writeln!(s, "{} {} {}", d + 1, t + 1, w);
            }
        }
        s
    }
}

/// Reads a MatrixMarket coordinate file into a dense matrix.
pub fn read_matrix_market(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
    let (n, size) = lines.next().ok_or(Error::Format { line: 1, message: "missing size line".into() })?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Format { line: n + 1, message: "bad size line".into() })?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(Error::Format { line: n + 1, message: "size line needs rows cols nnz".into() });
    };
    let mut m = Matrix::zeros(rows, cols);
    let mut seen = 0;
    for (n, line) in lines {
        let bad = || Error::Format { line: n + 1, message: format!("bad entry {line:?}") };
        let mut it = line.split_whitespace();
        let r: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let c: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if r == 0 || c == 0 || r > rows || c > cols || !v.is_finite() {
            return Err(bad());
        }
        m.set(r - 1, c - 1, v);
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Format { line: 0, message: format!("declared {nnz} entries, found {seen}") });
    }
    Ok(m)
}

pub fn build_dtm<D: AsRef<[String]> + Sync>(docs: &[D], stopwords: &StopwordList) -> DocumentTermMatrix {
    build_dtm_with(docs, stopwords, Exec::default())
}

/// Raw-count matrix. Terms are numbered in first-occurrence order; stop
/// words never enter the term list.
pub fn build_dtm_with<D: AsRef<[String]> + Sync>(
    docs: &[D],
    stopwords: &StopwordList,
    exec: Exec,
) -> DocumentTermMatrix {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut terms = Vec::new();
    for doc in docs {
        for tok in doc.as_ref() {
            if !stopwords.contains(tok) && !index.contains_key(tok.as_str()) {
                index.insert(tok, terms.len());
                terms.push(tok.clone());
            }
        }
    }
    let rows = map_slice(exec, docs, |doc| count_row(doc.as_ref(), |t| index.get(t).copied()));
    let mut doc_freq = vec![0; terms.len()];
    for row in &rows {
        for &(t, _) in row {
            doc_freq[t] += 1;
        }
    }
    DocumentTermMatrix { terms, rows, doc_freq, idf: None, weighting: Weighting::Counts }
}

fn count_row<F: Fn(&str) -> Option<usize>>(tokens: &[String], lookup: F) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for tok in tokens {
        if let Some(t) = lookup(tok) {
            *counts.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let mut row: Vec<(usize, f64)> = counts.into_iter().collect();
    row.sort_unstable_by_key(|&(t, _)| t);
    row
}

/// `weight = count · ln(n_docs / df)`. Terms present in every document get
/// weight zero, which removes them from the stored entries.
pub fn apply_tfidf(dtm: &DocumentTermMatrix) -> Result<DocumentTermMatrix> {
    if dtm.weighting != Weighting::Counts {
        return Err(Error::arg("TF-IDF expects a raw-count matrix"));
    }
    if dtm.n_docs() == 0 {
        return Err(Error::EmptyMatrix("no documents".into()));
    }
    let n = dtm.n_docs() as f64;
    let idf: Vec<f64> = dtm.doc_freq.iter().map(|&df| (n / df as f64).ln()).collect();
    let rows = dtm
        .rows
        .iter()
        .map(|row| row.iter().map(|&(t, c)| (t, c * idf[t])).filter(|&(_, w)| w != 0.0).collect())
        .collect();
    Ok(DocumentTermMatrix {
        terms: dtm.terms.clone(),
        rows,
        doc_freq: dtm.doc_freq.clone(),
        idf: Some(idf),
        weighting: Weighting::TfIdf,
    })
}

/// Fraction of documents that do not contain a term.
fn sparsity(df: usize, n: usize) -> f64 {
    (n - df) as f64 / n as f64
}

/// Drops every term whose sparsity strictly exceeds `max_sparsity`.
/// Surviving columns keep their order and weights.
pub fn prune_sparse_terms(dtm: &DocumentTermMatrix, max_sparsity: f64) -> Result<DocumentTermMatrix> {
    if !(max_sparsity > 0.0 && max_sparsity < 1.0) {
        return Err(Error::arg(format!("max sparsity must lie in (0, 1), got {max_sparsity}")));
    }
    let n = dtm.n_docs();
    if n == 0 {
        return Err(Error::EmptyMatrix("no documents".into()));
    }
    let mut remap = vec![None; dtm.n_terms()];
    let mut kept = Vec::new();
    for (t, &df) in dtm.doc_freq.iter().enumerate() {
        if sparsity(df, n) <= max_sparsity {
            remap[t] = Some(kept.len());
            kept.push(t);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyMatrix(format!(
            "every one of {} terms exceeds sparsity {max_sparsity}",
            dtm.n_terms()
        )));
    }
    let rows =
        dtm.rows.iter().map(|row| row.iter().filter_map(|&(t, w)| remap[t].map(|nt| (nt, w))).collect()).collect();
    Ok(DocumentTermMatrix {
        terms: kept.iter().map(|&t| dtm.terms[t].clone()).collect(),
        rows,
        doc_freq: kept.iter().map(|&t| dtm.doc_freq[t]).collect(),
        idf: dtm.idf.as_ref().map(|idf| kept.iter().map(|&t| idf[t]).collect()),
        weighting: dtm.weighting,
    })
}

/// Term set and IDF weights learned from a training corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowPipeline {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl BowPipeline {
    /// Stop-word filtering, then TF-IDF, then pruning, on training documents
    /// only. Returns the fitted pipeline and the training matrix.
    pub fn fit<D: AsRef<[String]> + Sync>(
        train: &[D],
        stopwords: &StopwordList,
        max_sparsity: f64,
        exec: Exec,
    ) -> Result<(Self, DocumentTermMatrix)> {
        let counts = build_dtm_with(train, stopwords, exec);
        let weighted = apply_tfidf(&counts)?;
        let pruned = prune_sparse_terms(&weighted, max_sparsity)?;
        let pipeline = Self::new(pruned.terms.clone(), pruned.idf.clone().expect("tf-idf weighted"))?;
        Ok((pipeline, pruned))
    }

    pub fn new(terms: Vec<String>, idf: Vec<f64>) -> Result<Self> {
        if terms.len() != idf.len() {
            return Err(Error::dim(format!("{} terms but {} idf weights", terms.len(), idf.len())));
        }
        let mut p = Self { terms, idf, index: HashMap::new() };
        p.rebuild_index();
        Ok(p)
    }

    /// Restores the lookup table after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn n_features(&self) -> usize {
        self.terms.len()
    }

    /// Dense TF-IDF vector over the training term set; unknown tokens are
    /// ignored.
    pub fn transform(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.terms.len()];
        for tok in tokens {
            if let Some(&t) = self.index.get(tok) {
                v[t] += self.idf[t];
            }
        }
        v
    }

    pub fn transform_all<D: AsRef<[String]> + Sync>(&self, docs: &[D], exec: Exec) -> Matrix {
        let rows = map_slice(exec, docs, |d| self.transform(d.as_ref()));
        let mut data = Vec::with_capacity(rows.len() * self.terms.len());
        for r in rows {
            data.extend(r);
        }
        Matrix::from_vec(docs.len(), self.terms.len(), data).expect("finite tf-idf weights")
    }
}
