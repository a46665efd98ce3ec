mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tpe_core::embeddings::{apply_surgery_to_matrix, build_split, mean_vocab_norm, EmbeddingMatrix};

use common::fixture;

fn random_matrix(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * dim).map(|_| rng.sample::<f32, _>(StandardNormal) * 0.1).collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

fn two_pass_mu(e: &EmbeddingMatrix) -> f64 {
    let norms: Vec<f64> = (0..e.rows())
        .map(|i| e.row(i).iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt())
        .collect();
    norms.iter().sum::<f64>() / norms.len() as f64
}

#[test]
fn mu_matches_two_pass_recompute() {
    for seed in 0..5 {
        let e = random_matrix(100, 8, seed);
        assert!((mean_vocab_norm(&e).unwrap() - two_pass_mu(&e)).abs() < 1e-12);
    }
}

#[test]
fn norm_law_locality_and_split() {
    let v = &fixture().v;
    let m = v.insertion().len();
    for (k, dim) in [8, 64, 512].into_iter().enumerate() {
        let e = random_matrix(v.vocab().len(), dim, 40 + k as u64);
        let mu = two_pass_mu(&e);
        let out = apply_surgery_to_matrix(&e, v, 0.5).unwrap();
        assert_eq!((out.rows(), out.dim()), (e.rows(), e.dim()));
        let changed: Vec<usize> = (0..e.rows()).filter(|&i| out.row(i) != e.row(i)).collect();
        assert_eq!(changed.len(), m);
        for ins in v.insertion() {
            let row = out.row(ins.id as usize);
            let norm = row.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 0.5 * mu).abs() <= 1e-6 * 0.5 * mu, "dim {dim}: {norm} vs {}", 0.5 * mu);
            // direction is the constituent mean
            let mean: Vec<f64> = (0..dim)
                .map(|j| ins.constituents.iter().map(|&c| e.row(c as usize)[j] as f64).sum::<f64>())
                .collect();
            let mn = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos: f64 = row.iter().zip(&mean).map(|(&a, b)| a as f64 * b).sum::<f64>() / (norm * mn);
            assert!(cos > 1.0 - 1e-6);
        }
    }
    let split = build_split(v);
    assert_eq!(split.trainable_ids.len(), m);
    assert_eq!(split.fixed_ids.len() + m, v.vocab().len());
    let mut all: Vec<u32> = split.fixed_ids.iter().chain(&split.trainable_ids).copied().collect();
    all.sort_unstable();
    assert!(all.iter().enumerate().all(|(i, &id)| id as usize == i));
}

#[test]
fn unextended_vocabulary_leaves_matrix_untouched() {
    let f = fixture();
    let v = tpe_core::TpeVocabulary::unextended(f.base.clone()).unwrap();
    let e = random_matrix(v.vocab().len(), 8, 3);
    assert_eq!(apply_surgery_to_matrix(&e, &v, 0.5).unwrap(), e);
    let wrong = random_matrix(v.vocab().len() - 1, 8, 3);
    assert!(matches!(
        apply_surgery_to_matrix(&wrong, &v, 0.5),
        Err(tpe_core::Error::Shape(_))
    ));
}

#[test]
fn binary_file_round_trip() {
    let e = random_matrix(50, 16, 9);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.bin");
    e.save(&p).unwrap();
    assert_eq!(EmbeddingMatrix::load(&p).unwrap(), e);
}
