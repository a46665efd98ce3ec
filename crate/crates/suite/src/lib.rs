//! Fixtures shared by the acceptance checks.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tpe_core::bpe::train::{train, TrainerConfig};
use tpe_core::embeddings::EmbeddingMatrix;
use tpe_core::{synth, BaseTokenizer, MiningConfig, TokenId, TpeVocabulary};

/// Small randomized pipeline input.
pub struct ToyConfig {
    pub base: Arc<BaseTokenizer>,
    pub docs: Vec<String>,
    pub cfg: MiningConfig,
}

pub fn toy_config(seed: u64) -> ToyConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_size = rng.gen_range(400..1200);
    let mut train_docs = synth::general_corpus(seed, rng.gen_range(20_000..60_000));
    train_docs.extend(synth::clinical_corpus(seed ^ 0x55, rng.gen_range(0..20_000)));
    let tcfg = TrainerConfig {
        vocab_size,
        min_pair_freq: 2,
        special_tokens: vec!["<|eot|>".to_string()],
    };
    let base = Arc::new(train(train_docs.iter().map(String::as_str), &tcfg).unwrap());
    let docs = synth::clinical_corpus(seed.wrapping_mul(31), rng.gen_range(10_000..40_000));
    let cfg = MiningConfig::new(rng.gen_range(2..=5), rng.gen_range(1..120), rng.gen_range(1..=3)).unwrap();
    ToyConfig { base, docs, cfg }
}

/// Evicted token surfaces that are complete UTF-8 strings.
pub fn evicted_strings(v: &TpeVocabulary) -> Vec<String> {
    v.eviction()
        .iter()
        .filter_map(|&e| v.base().vocab().token(e))
        .filter_map(|t| std::str::from_utf8(t).ok().map(str::to_string))
        .collect()
}

/// Every base token id reachable from `id` through producing merges.
pub fn closure(base: &BaseTokenizer, id: TokenId, out: &mut Vec<TokenId>) {
    out.push(id);
    if let Some(rule) = base.producer(id) {
        let (l, r) = (rule.left, rule.right);
        closure(base, l, out);
        closure(base, r, out);
    }
}

pub fn random_matrix(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingMatrix {
    let data = (0..rows * dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

/// Random strings mixing arbitrary chars, whitespace runs, corpus snippets
/// and the surfaces of evicted and inserted tokens.
pub fn fuzz_strings(v: &TpeVocabulary, docs: &[String], n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let evicted = evicted_strings(v);
    let inserted: Vec<String> = v
        .insertion()
        .iter()
        .filter_map(|i| String::from_utf8(i.surface.clone()).ok())
        .collect();
    (0..n)
        .map(|_| {
            let mut s = String::new();
            for _ in 0..rng.gen_range(0..16) {
                match rng.gen_range(0..6) {
                    0 => s.push(rng.gen::<char>()),
                    1 => s.push_str(evicted.choose(&mut rng).map_or("", String::as_str)),
                    2 => s.push_str(inserted.choose(&mut rng).map_or("", String::as_str)),
                    3 => s.push_str([" ", "  ", "\n", "\t", " \n "][rng.gen_range(0..5)]),
                    4 => {
                        let d = docs.choose(&mut rng).unwrap();
                        let mut a = rng.gen_range(0..d.len());
                        while !d.is_char_boundary(a) {
                            a -= 1;
                        }
                        let mut b = (a + rng.gen_range(1..40)).min(d.len());
                        while !d.is_char_boundary(b) {
                            b -= 1;
                        }
                        s.push_str(&d[a..b]);
                    }
                    _ => {
                        for _ in 0..rng.gen_range(1..6) {
                            s.push(rng.gen_range('a'..='z'));
                        }
                    }
                }
            }
            s
        })
        .collect()
}
