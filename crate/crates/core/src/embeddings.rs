//! Word-vector tables feeding the CNN: randomly initialized trainable
//! vectors, or frozen vectors read from a textual word-vector file.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::textprep::Vocabulary;

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.25;

/// `(V + 1) × d` table; row 0 is the all-zero padding row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
    pub trainable: bool,
    /// Rows that were randomly initialized during a pretrained load.
    pub oov_rows: BTreeSet<usize>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Number of rows including the padding row.
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.matrix.row(index)
    }

    /// FNV-1a over the raw bits of every entry; equal hashes mean a
    /// bit-identical table.
    pub fn content_hash(&self) -> u64 {
        crate::numerics::fnv1a(self.matrix.as_slice().iter().flat_map(|v| v.to_bits().to_le_bytes()))
    }
}

fn random_row(rng: &mut SeededRng, row: &mut [f64]) {
    for x in row {
        *x = rng.uniform_in(-INIT_RANGE, INIT_RANGE);
    }
}

/// Rows 1..=V drawn i.i.d. from U[−0.25, 0.25] in index order.
pub fn random_table(vocab: &Vocabulary, dim: usize, rng: &mut SeededRng) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::arg("embedding dimension must be at least 1"));
    }
    let mut m = Matrix::zeros(vocab.len() + 1, dim);
    for i in 1..=vocab.len() {
        random_row(rng, m.row_mut(i));
    }
    Ok(EmbeddingTable { matrix: m, trainable: true, oov_rows: BTreeSet::new() })
}

/// Vectors read from a `word v1 … vd` file, optionally restricted to a word
/// set so that large archives stay small in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PretrainedVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    /// Words seen more than once; the first occurrence was kept.
    pub duplicates: Vec<String>,
}

impl PretrainedVectors {
    pub fn read<R: BufRead>(reader: R, keep: Option<&HashSet<String>>) -> Result<Self> {
        let mut out = PretrainedVectors::default();
        let mut dim: Option<usize> = None;
        let mut seen: HashSet<String> = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let trimmed = line.trim_end();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split(' ').filter(|p| !p.is_empty());
            let word = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            if lineno == 1 && rest.len() == 1 {
                if let (Ok(_count), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    dim = Some(d);
                    continue;
                }
            }
            match dim {
                Some(d) if d != rest.len() => {
                    return Err(Error::Format {
                        line: lineno,
                        message: format!("vector has {} components, expected {d}", rest.len()),
                    })
                }
                None if rest.is_empty() => {
                    return Err(Error::Format { line: lineno, message: "word without vector".into() })
                }
                None => dim = Some(rest.len()),
                _ => {}
            }
            if !seen.insert(word.to_owned()) {
                out.duplicates.push(word.to_owned());
                continue;
            }
            if keep.is_some_and(|k| !k.contains(word)) {
                continue;
            }
            let v: Vec<f64> = rest
                .iter()
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Format { line: lineno, message: "unparsable vector component".into() })?;
            out.vectors.insert(word.to_owned(), v);
        }
        out.dim = dim.unwrap_or(0);
        for w in &out.duplicates {
            log::warn!("word {w:?} appears more than once in the vector file; keeping the first vector");
        }
        Ok(out)
    }

    /// Frozen table over `vocab`. Words missing from the file get random
    /// rows (drawn in index order) and are listed in `oov_rows`.
    pub fn table(&self, vocab: &Vocabulary, expected_dim: usize, rng: &mut SeededRng) -> Result<EmbeddingTable> {
        if self.dim != expected_dim {
            return Err(Error::dim(format!(
                "word vectors have dimension {}, configured embedding dimension is {expected_dim}",
                self.dim
            )));
        }
        let mut m = Matrix::zeros(vocab.len() + 1, expected_dim);
        let mut oov = BTreeSet::new();
        for (i, word) in vocab.words().iter().enumerate() {
            let row = i + 1;
            match self.vectors.get(word) {
                Some(v) => m.row_mut(row).copy_from_slice(v),
                None => {
                    random_row(rng, m.row_mut(row));
                    oov.insert(row);
                }
            }
        }
        Ok(EmbeddingTable { matrix: m, trainable: false, oov_rows: oov })
    }
}

/// Reads a word-vector stream and builds the frozen table in one step.
pub fn load_pretrained<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    expected_dim: usize,
    rng: &mut SeededRng,
) -> Result<(EmbeddingTable, PretrainedVectors)> {
    let keep: HashSet<String> = vocab.words().iter().cloned().collect();
    let vectors = PretrainedVectors::read(reader, Some(&keep))?;
    let table = vectors.table(vocab, expected_dim, rng)?;
    Ok((table, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::build([words.iter().map(|w| w.to_string()).collect::<Vec<_>>()]).unwrap()
    }

    #[test]
    fn random_table_shape_and_padding() {
        let t = random_table(&vocab(&["a", "b", "c"]), 4, &mut SeededRng::new(1)).unwrap();
        assert_eq!(t.matrix.shape(), (4, 4));
        assert!(t.row(0).iter().all(|&x| x == 0.0));
        assert!(t.matrix.as_slice()[4..].iter().all(|x| x.abs() <= INIT_RANGE && *x != 0.0));
        assert!(t.trainable);
        assert!(random_table(&vocab(&["a"]), 0, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn random_table_deterministic() {
        let v = vocab(&["a", "b", "c"]);
        let a = random_table(&v, 8, &mut SeededRng::new(5)).unwrap();
        let b = random_table(&v, 8, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn random_entries_are_centered() {
        let words: Vec<String> = (0..1000).map(|i| format!("w{i}")).collect();
        let v = Vocabulary::build([words]).unwrap();
        let t = random_table(&v, 100, &mut SeededRng::new(42)).unwrap();
        let entries = &t.matrix.as_slice()[100..];
        assert_eq!(entries.len(), 100_000);
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        // variance of U[-a, a] is a²/3
        let var = entries.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / entries.len() as f64;
        assert!((var - INIT_RANGE * INIT_RANGE / 3.0).abs() < 1e-3);
    }

    const FILE: &str = "3 4\nalpha 1 2 3 4\nbeta 0.5 0.5 0.5 0.5\ngamma -1 -1 -1 -1\n";

    #[test]
    fn pretrained_with_oov() {
        let v = vocab(&["alpha", "gamma", "delta"]);
        let (t, _) = load_pretrained(FILE.as_bytes(), &v, 4, &mut SeededRng::new(3)).unwrap();
        assert!(!t.trainable);
        assert_eq!(t.row(1), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.row(2), [-1.0; 4]);
        assert_eq!(t.oov_rows.iter().copied().collect::<Vec<_>>(), vec![3]);
        assert!(t.row(3).iter().all(|x| x.abs() <= INIT_RANGE));
        assert!(t.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pretrained_is_deterministic() {
        let v = vocab(&["alpha", "zzz", "yyy"]);
        let a = load_pretrained(FILE.as_bytes(), &v, 4, &mut SeededRng::new(3)).unwrap().0;
        let b = load_pretrained(FILE.as_bytes(), &v, 4, &mut SeededRng::new(3)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn headerless_file_and_duplicates() {
        let file = "alpha 1 1\nalpha 2 2\nbeta 3 3\n";
        let v = vocab(&["alpha", "beta"]);
        let (t, info) = load_pretrained(file.as_bytes(), &v, 2, &mut SeededRng::new(0)).unwrap();
        assert_eq!(t.row(1), [1.0, 1.0]);
        assert_eq!(info.duplicates, vec!["alpha".to_string()]);
    }

    #[test]
    fn format_and_dimension_errors() {
        let v = vocab(&["alpha"]);
        let bad = "alpha 1 2 3\nbeta 1 2\n";
        match load_pretrained(bad.as_bytes(), &v, 3, &mut SeededRng::new(0)) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_pretrained(FILE.as_bytes(), &v, 300, &mut SeededRng::new(0)), Err(Error::Dimension(_))));
        assert!(matches!(
            load_pretrained("alpha 1 x\n".as_bytes(), &v, 2, &mut SeededRng::new(0)),
            Err(Error::Format { line: 1, .. })
        ));
    }
}
