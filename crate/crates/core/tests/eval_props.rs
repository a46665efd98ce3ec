mod common;

use std::sync::Arc;

use tpe_core::eval::{budget_sweep, compression_report, token_stats, ReportOptions};
use tpe_core::surgery::build;
use tpe_core::MiningConfig;

use common::fixture;

#[test]
fn cr_recomputes_from_per_doc_lengths() {
    let f = fixture();
    let r = compression_report(&f.v, &f.docs, &ReportOptions::default());
    let base: u64 = r.per_doc.iter().map(|p| p.0 as u64).sum();
    let new: u64 = r.per_doc.iter().map(|p| p.1 as u64).sum();
    assert_eq!((base, new), (r.base_tokens, r.tpe_tokens));
    assert!((r.cr - (1.0 - new as f64 / base as f64)).abs() < 1e-12);
    assert!(r.cr > 0.0 && r.cr < 1.0);
    let again = compression_report(&f.v, &f.docs, &ReportOptions::default());
    assert_eq!(again.to_json_string(), r.to_json_string());
}

#[test]
fn sweep_cells_match_standalone_builds() {
    let f = fixture();
    let docs = &f.docs[..300];
    let sweep = budget_sweep(Arc::clone(&f.base), docs, &[2, 3], &[0, 20, 80], 2).unwrap();
    assert_eq!(sweep.grid.len(), 6);
    for cell in &sweep.grid {
        if cell.budget == 0 {
            assert_eq!(cell.cr, Some(0.0));
            continue;
        }
        let v = build(Arc::clone(&f.base), docs, &MiningConfig::new(cell.n_max, cell.budget, 2).unwrap()).unwrap();
        let r = compression_report(&v, docs, &ReportOptions::default());
        assert_eq!(cell.cr, Some(r.cr), "n_max {} budget {}", cell.n_max, cell.budget);
    }
}

#[test]
fn infeasible_budget_is_recorded() {
    let f = fixture();
    let sweep = budget_sweep(Arc::clone(&f.base), &f.docs[..200], &[2], &[10, 1_000_000], 1).unwrap();
    assert!(sweep.grid[0].cr.is_some());
    assert!(sweep.grid[1].cr.is_none() && sweep.grid[1].note.is_some());
}

#[test]
fn stats_account_for_every_saved_token() {
    let f = fixture();
    let docs = &f.docs[..200];
    let all = token_stats(&f.v, docs, usize::MAX).unwrap();
    let saved: u64 = all
        .iter()
        .map(|t| {
            let ins = f.v.insertion().iter().find(|i| i.id == t.id).unwrap();
            t.count * (ins.constituents.len() as u64 - 1)
        })
        .sum();
    let fallback: u64 = docs.iter().map(|d| f.v.apply_fallback(&f.base.encode(d)).len() as u64).sum();
    let tpe: u64 = docs.iter().map(|d| f.v.encode(d).token_len() as u64).sum();
    assert_eq!(saved, fallback - tpe);
    // brute-force count of the top token
    let top = &all[0];
    let brute: u64 = docs
        .iter()
        .map(|d| f.v.encode(d).ids.iter().filter(|&&i| i == top.id).count() as u64)
        .sum();
    assert_eq!(brute, top.count);
    assert!(all.windows(2).all(|w| w[0].count >= w[1].count));
}
