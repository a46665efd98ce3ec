mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use tpe_core::mining::{count_ngrams, count_ngrams_encoded, score_candidates, select_insertion_set};
use tpe_core::{BaseTokenizer, CandidateTable, MiningConfig, TokenId};

use common::{fixture, EOT};

/// Nested-loop count of every window, filtered like the miner.
fn naive_counts(tok: &BaseTokenizer, docs: &[String], n_max: usize, min_freq: u64) -> BTreeMap<Vec<TokenId>, u64> {
    let mut counts: BTreeMap<Vec<TokenId>, u64> = BTreeMap::new();
    for d in docs {
        let ids = tok.encode(d);
        for n in 2..=n_max {
            for w in ids.windows(n) {
                if w.iter().any(|&t| tok.vocab().is_special(t)) {
                    continue;
                }
                *counts.entry(w.to_vec()).or_default() += 1;
            }
        }
    }
    counts.retain(|k, c| {
        let surface: Vec<u8> = k.iter().flat_map(|&t| tok.vocab().token(t).unwrap().to_vec()).collect();
        *c >= min_freq && tok.vocab().id(&surface).is_none()
    });
    counts
}

fn as_map(t: &CandidateTable) -> BTreeMap<Vec<TokenId>, u64> {
    t.rows().iter().map(|r| (r.constituents.clone(), r.freq)).collect()
}

fn docs_strategy() -> impl Strategy<Value = Vec<String>> {
    let word = prop_oneof![
        Just("heart"), Just("rate"), Just("blood"), Just("pressure"), Just("acute"), Just("renal"),
        Just("failure"), Just("of"), Just("the"), Just("mg"), Just("10"), Just(EOT), Just("x"),
    ];
    let doc = prop::collection::vec(word, 0..30).prop_map(|w| w.join(" "));
    prop::collection::vec(doc, 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn counts_match_naive(docs in docs_strategy(), n_max in 2usize..6, min_freq in 1u64..4) {
        let tok = &fixture().base;
        let cfg = MiningConfig::new(n_max, 10, min_freq).unwrap();
        let table = count_ngrams(tok, &docs, &cfg).unwrap();
        prop_assert_eq!(as_map(&table), naive_counts(tok, &docs, n_max, min_freq));
        for r in table.rows() {
            prop_assert_eq!(r.score, r.freq * r.constituents.len() as u64);
        }
    }

    #[test]
    fn raising_min_freq_never_adds_rows(docs in docs_strategy(), n_max in 2usize..5, k in 1u64..4) {
        let tok = &fixture().base;
        let lo = as_map(&count_ngrams(tok, &docs, &MiningConfig::new(n_max, 10, k).unwrap()).unwrap());
        let hi = as_map(&count_ngrams(tok, &docs, &MiningConfig::new(n_max, 10, k + 1).unwrap()).unwrap());
        for (key, f) in &hi {
            prop_assert_eq!(lo.get(key), Some(f));
        }
        prop_assert!(hi.len() <= lo.len());
    }

    #[test]
    fn documents_are_counted_independently(docs in docs_strategy(), n_max in 2usize..5) {
        let tok = &fixture().base;
        let cfg = MiningConfig::new(n_max, 10, 1).unwrap();
        let joined = as_map(&count_ngrams(tok, &docs, &cfg).unwrap());
        let mut summed: BTreeMap<Vec<TokenId>, u64> = BTreeMap::new();
        for d in &docs {
            for (k, f) in as_map(&count_ngrams(tok, std::slice::from_ref(d), &cfg).unwrap()) {
                *summed.entry(k).or_default() += f;
            }
        }
        prop_assert_eq!(joined, summed);
    }
}

#[test]
fn corpus_scale_counts_match_naive() {
    let f = fixture();
    let docs: Vec<String> = f.docs.iter().take(400).cloned().collect();
    let cfg = MiningConfig::new(3, 10, 2).unwrap();
    let table = count_ngrams(&f.base, &docs, &cfg).unwrap();
    assert_eq!(as_map(&table), naive_counts(&f.base, &docs, 3, 2));
}

#[test]
fn thread_count_does_not_change_the_table() {
    let f = fixture();
    let encoded = tpe_core::corpus::encode_documents(&f.base, &f.docs);
    let cfg = MiningConfig::new(4, 10, 2).unwrap();
    let many = count_ngrams_encoded(&f.base, &encoded, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| count_ngrams_encoded(&f.base, &encoded, &cfg).unwrap());
    assert_eq!(many, one);
}

#[test]
fn selection_is_a_prefix_of_the_canonical_order() {
    let f = fixture();
    let cfg = MiningConfig::new(3, 10, 2).unwrap();
    let table = score_candidates(count_ngrams(&f.base, &f.docs, &cfg).unwrap());
    let top = select_insertion_set(&table, 50);
    assert_eq!(top.len(), 50);
    for w in top.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    let mut surfaces: Vec<&[u8]> = top.iter().map(|c| c.surface.as_slice()).collect();
    surfaces.sort();
    surfaces.dedup();
    assert_eq!(surfaces.len(), 50);
}
