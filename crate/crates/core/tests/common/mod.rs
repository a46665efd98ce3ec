#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpe_core::bpe::train::{train, TrainerConfig};
use tpe_core::surgery::build;
use tpe_core::{synth, BaseTokenizer, MiningConfig, TokenId, TpeVocabulary};

pub const EOT: &str = "<|eot|>";

/// General prose plus some clinical text, like a broad-coverage tokenizer.
pub fn train_base(seed: u64, general: usize, domain: usize, vocab_size: usize) -> BaseTokenizer {
    let mut docs = synth::general_corpus(seed, general);
    docs.extend(synth::clinical_corpus(seed ^ 0x55, domain));
    let cfg = TrainerConfig {
        vocab_size,
        min_pair_freq: 2,
        special_tokens: vec![EOT.to_string()],
    };
    train(docs.iter().map(String::as_str), &cfg).unwrap()
}

pub struct Fixture {
    pub base: Arc<BaseTokenizer>,
    pub docs: Vec<String>,
    pub v: TpeVocabulary,
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let base = Arc::new(train_base(11, 300_000, 100_000, 3000));
        let docs = synth::clinical_corpus(12, 300_000);
        let cfg = MiningConfig::new(4, 400, 2).unwrap();
        let v = build(Arc::clone(&base), &docs, &cfg).unwrap();
        Fixture { base, docs, v }
    })
}

/// Randomized small pipeline configuration.
pub struct ToyConfig {
    pub base: Arc<BaseTokenizer>,
    pub docs: Vec<String>,
    pub cfg: MiningConfig,
}

pub fn toy_config(seed: u64) -> ToyConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = rng.gen_range(400..1200);
    let base = Arc::new(train_base(seed, rng.gen_range(20_000..60_000), rng.gen_range(0..20_000), vocab));
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
