//! Binary model container.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` manifest length, the
//! JSON manifest, then every array listed in the manifest as little-endian
//! `f64` values in manifest order. All integers are little-endian.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ConvFilterBank, DenseLayer, NetworkParams, TrainingConfig, CLASSES};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::textprep::Vocabulary;

pub const MODEL_MAGIC: &[u8; 8] = b"TXCLFCNN";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    vocab_fingerprint: u64,
    vocabulary: Vocabulary,
    max_len: usize,
    embed_dim: usize,
    trainable_embedding: bool,
    oov_rows: BTreeSet<usize>,
    filters: usize,
    heights: Vec<usize>,
    classes: usize,
    training: TrainingConfig,
    arrays: Vec<ArraySpec>,
}

/// A trained network together with the vocabulary it was trained against.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnModelFile {
    pub params: NetworkParams,
    pub vocabulary: Vocabulary,
    pub training: TrainingConfig,
}

impl CnnModelFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        if p.embedding.rows() != self.vocabulary.len() + 1 {
            return Err(Error::dim(format!(
                "embedding has {} rows for a vocabulary of {}",
                p.embedding.rows(),
                self.vocabulary.len()
            )));
        }
        let mut arrays: Vec<(String, [usize; 2], &[f64])> =
            vec![("embedding".into(), [p.embedding.rows(), p.embedding.dim()], p.embedding.matrix.as_slice())];
        for b in &p.banks {
            arrays.push((format!("conv{}.weights", b.height), [b.count, b.window()], &b.weights));
            arrays.push((format!("conv{}.biases", b.height), [1, b.count], &b.biases));
        }
        arrays.push(("dense.weights".into(), [p.dense.inputs(), p.dense.outputs()], p.dense.weights.as_slice()));
        arrays.push(("dense.biases".into(), [1, p.dense.outputs()], &p.dense.biases));

        let arch = p.architecture();
        let manifest = Manifest {
            format_version: MODEL_VERSION,
            vocab_fingerprint: self.vocabulary.fingerprint(),
            vocabulary: self.vocabulary.clone(),
            max_len: p.max_len,
            embed_dim: p.embedding.dim(),
            trainable_embedding: p.embedding.trainable,
            oov_rows: p.embedding.oov_rows.clone(),
            filters: arch.filters,
            heights: arch.heights,
            classes: p.dense.outputs(),
            training: self.training.clone(),
            arrays: arrays.iter().map(|(n, s, _)| ArraySpec { name: n.clone(), shape: *s }).collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, _, data) in arrays {
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Corruption("not a CNN model file (bad magic)".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != MODEL_VERSION {
            return Err(Error::Corruption(format!("unsupported model format version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let m: Manifest = serde_json::from_slice(&json)?;
        if m.vocabulary.fingerprint() != m.vocab_fingerprint {
            return Err(Error::Corruption("vocabulary does not match its fingerprint".into()));
        }

        let mut read_array = |spec: &ArraySpec, name: &str| -> Result<Vec<f64>> {
            if spec.name != name {
                return Err(Error::Corruption(format!("expected array `{name}`, found `{}`", spec.name)));
            }
            let mut out = Vec::with_capacity(spec.shape[0] * spec.shape[1]);
            let mut buf = [0u8; 8];
            for _ in 0..spec.shape[0] * spec.shape[1] {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let mut specs = m.arrays.iter();
        let mut next = |name: &str| -> Result<(Vec<f64>, [usize; 2])> {
            let spec = specs.next().ok_or_else(|| Error::Corruption(format!("missing array `{name}`")))?;
            Ok((read_array(spec, name)?, spec.shape))
        };

        let (emb, shape) = next("embedding")?;
        if shape != [m.vocabulary.len() + 1, m.embed_dim] {
            return Err(Error::Corruption(format!("embedding shape {shape:?}")));
        }
        let embedding = EmbeddingTable {
            matrix: Matrix::from_vec(shape[0], shape[1], emb)?,
            trainable: m.trainable_embedding,
            oov_rows: m.oov_rows,
        };
        let mut banks = Vec::new();
        for &h in &m.heights {
            let (weights, ws) = next(&format!("conv{h}.weights"))?;
            let (biases, _) = next(&format!("conv{h}.biases"))?;
            if ws != [m.filters, h * m.embed_dim] || biases.len() != m.filters {
                return Err(Error::Corruption(format!("filter bank of height {h} has shape {ws:?}")));
            }
            banks.push(ConvFilterBank { height: h, count: m.filters, dim: m.embed_dim, weights, biases });
        }
        let (dw, ds) = next("dense.weights")?;
        let (biases, _) = next("dense.biases")?;
        if m.classes != CLASSES {
            return Err(Error::Corruption(format!("{} output classes", m.classes)));
        }
        let params = NetworkParams {
            embedding,
            banks,
            dense: DenseLayer { weights: Matrix::from_vec(ds[0], ds[1], dw)?, biases },
            max_len: m.max_len,
        };
        params.validate()?;
        Ok(Self { params, vocabulary: m.vocabulary, training: m.training })
    }
}
