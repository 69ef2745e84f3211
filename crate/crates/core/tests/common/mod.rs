#![allow(dead_code)]

use textclf::cnn::{Architecture, LossKind, TrainingConfig};
use textclf::corpus::Label;
use textclf::textprep::{encode_and_pad, tokenize, EncodedDocument, Vocabulary};

/// Eight documents whose class is decided by the single word `idiot`.
pub const KEYWORD_CORPUS: [(&str, Label); 8] = [
    ("you are an idiot my friend", Label::Toxic),
    ("idiot go away from here now", Label::Toxic),
    ("what an idiot said that today", Label::Toxic),
    ("please stop it you idiot", Label::Toxic),
    ("you are a good friend of mine", Label::NonToxic),
    ("go away from here now please", Label::NonToxic),
    ("what a nice thing said today", Label::NonToxic),
    ("please stop it my friend", Label::NonToxic),
];

pub const KEYWORD_SEED: u64 = 42;

pub fn keyword_fixture() -> (Vocabulary, Vec<EncodedDocument>, Vec<Label>) {
    let tokens: Vec<Vec<String>> = KEYWORD_CORPUS.iter().map(|(t, _)| tokenize(t)).collect();
    let vocab = Vocabulary::build(&tokens).unwrap();
    let docs = tokens.iter().map(|t| encode_and_pad(t, &vocab, 8)).collect();
    (vocab, docs, KEYWORD_CORPUS.iter().map(|(_, l)| *l).collect())
}

pub const KEYWORD_EMBED_DIM: usize = 16;

pub fn keyword_architecture() -> Architecture {
    Architecture { filters: 16, heights: vec![3, 4, 5] }
}

pub fn keyword_training() -> TrainingConfig {
    TrainingConfig { batch_size: 8, learning_rate: 0.5, epochs: 50, seed: KEYWORD_SEED, loss: LossKind::SquaredError }
}
