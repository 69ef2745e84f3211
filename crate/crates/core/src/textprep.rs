//! Tokenization, vocabulary construction and fixed-length index encoding.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Index reserved for padding and out-of-vocabulary tokens.
pub const PAD: usize = 0;

/// Lowercased maximal runs of alphabetic characters, after NFC
/// normalization. Digits, punctuation and whitespace all separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized.split(|c: char| !c.is_alphabetic()).filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    word_to_index: HashMap<String, usize>,
    /// `index_to_word[i - 1]` is the word with index `i`.
    index_to_word: Vec<String>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let mut v = Vocabulary { word_to_index: HashMap::new(), index_to_word: Vec::new() };
        for w in words {
            v.insert(w);
        }
        v
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.index_to_word
    }
}

impl Vocabulary {
    /// Assigns indices 1..=V in first-occurrence order over the documents.
    pub fn build<D, T>(documents: D) -> Result<Self>
    where
        D: IntoIterator,
        D::Item: AsRef<[T]>,
        T: AsRef<str>,
    {
        let mut v = Vocabulary { word_to_index: HashMap::new(), index_to_word: Vec::new() };
        for doc in documents {
            for tok in doc.as_ref() {
                if !v.word_to_index.contains_key(tok.as_ref()) {
                    v.insert(tok.as_ref().to_owned());
                }
            }
        }
        if v.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(v)
    }

    fn insert(&mut self, word: String) {
        if self.word_to_index.contains_key(&word) {
            return;
        }
        self.index_to_word.push(word.clone());
        self.word_to_index.insert(word, self.index_to_word.len());
    }

    /// Number of words, V.
    pub fn len(&self) -> usize {
        self.index_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_word.is_empty()
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.word_to_index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.index_to_word.get(i)).map(String::as_str)
    }

    /// Words in index order (index 1 first).
    pub fn words(&self) -> &[String] {
        &self.index_to_word
    }

    /// `index<TAB>word` lines in index order.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.index_to_word.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}", i + 1, w);
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut words = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (idx, word) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format { line: n + 1, message: "expected `index<TAB>word`".into() })?;
            let idx: usize =
                idx.parse().map_err(|_| Error::Format { line: n + 1, message: format!("bad index {idx:?}") })?;
            if idx != words.len() + 1 {
                return Err(Error::Format { line: n + 1, message: format!("index {idx} out of sequence") });
            }
            words.push(word.to_owned());
        }
        let v = Vocabulary::from(words);
        if v.len() != text.lines().filter(|l| !l.is_empty()).count() {
            return Err(Error::Format { line: 0, message: "duplicate word".into() });
        }
        Ok(v)
    }

    /// FNV-1a over the word list, used to tie saved models to their
    /// vocabulary.
    pub fn fingerprint(&self) -> u64 {
        crate::numerics::fnv1a(self.index_to_word.iter().flat_map(|w| w.bytes().chain(std::iter::once(0xff))))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDocument {
    pub indices: Vec<usize>,
    pub true_length: usize,
}

impl AsRef<EncodedDocument> for EncodedDocument {
    fn as_ref(&self) -> &EncodedDocument {
        self
    }
}

impl EncodedDocument {
    pub fn max_len(&self) -> usize {
        self.indices.len()
    }
}

/// Maps tokens through the vocabulary (unknown → [`PAD`]), keeps at most
/// `max_len` of them and right-pads with [`PAD`].
pub fn encode_and_pad<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary, max_len: usize) -> EncodedDocument {
    assert!(max_len >= 1, "max_len must be at least 1");
    let true_length = tokens.len().min(max_len);
    let mut indices: Vec<usize> =
        tokens[..true_length].iter().map(|t| vocab.index(t.as_ref()).unwrap_or(PAD)).collect();
    indices.resize(max_len, PAD);
    EncodedDocument { indices, true_length }
}

/// Longest token list, floored at 1.
pub fn corpus_max_len<T>(docs: &[Vec<T>]) -> usize {
    docs.iter().map(Vec::len).max().unwrap_or(0).max(1)
}
