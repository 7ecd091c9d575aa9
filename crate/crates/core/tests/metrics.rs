use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revfm_core::eval::{mae, ndcg_at_k, precision_at_k, recall_at_k, rmse};

// Reference implementations written independently of the library: plain
// loops, explicit log base change, no shared helpers.

fn ref_mae(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += if p[i] > t[i] { p[i] - t[i] } else { t[i] - p[i] };
    }
    s / p.len() as f64
}

fn ref_rmse(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - t[i]).powi(2);
    }
    (s / p.len() as f64).sqrt()
}

fn ref_hits(rec: &[u32], rel: &[u32], k: usize) -> usize {
    let mut n = 0;
    for (i, r) in rec.iter().enumerate() {
        if i < k && rel.contains(r) {
            n += 1;
        }
    }
    n
}

fn ref_dcg(gains: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for (i, g) in gains.iter().enumerate().take(k) {
        s += g * std::f64::consts::LN_2 / ((i + 2) as f64).ln();
    }
    s
}

fn ref_ndcg(ranked: &[f64], pool: &[f64], k: usize) -> f64 {
    let mut ideal = pool.to_vec();
    for i in 0..ideal.len() {
        for j in i + 1..ideal.len() {
            if ideal[j] > ideal[i] {
                ideal.swap(i, j);
            }
        }
    }
    let idcg = ref_dcg(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        ref_dcg(ranked, k) / idcg
    }
}

#[test]
fn thousand_random_cases_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
        assert!((mae(&p, &t) - ref_mae(&p, &t)).abs() < 1e-9, "case {case}");
        assert!((rmse(&p, &t) - ref_rmse(&p, &t)).abs() < 1e-9, "case {case}");

        let catalog = rng.random_range(1..60u32);
        let mut items: Vec<u32> = (0..catalog).collect();
        items.shuffle(&mut rng);
        let rec_len = rng.random_range(0..=catalog as usize);
        let rec = &items[..rec_len];
        let rel: Vec<u32> = (0..catalog).filter(|_| rng.random_bool(0.3)).collect();
        let rel_set: HashSet<u32> = rel.iter().copied().collect();
        let k = rng.random_range(1..25);
        let hits = ref_hits(rec, &rel, k) as f64;
        assert!((precision_at_k(rec, &rel_set, k) - hits / k as f64).abs() < 1e-9, "case {case}");
        match recall_at_k(rec, &rel_set, k) {
            None => assert!(rel.is_empty()),
            Some(r) => assert!((r - hits / rel.len() as f64).abs() < 1e-9, "case {case}"),
        }

        let pool: Vec<f64> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0..=5) as f64).collect();
        let mut ranked = pool.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(0..=pool.len()));
        assert!((ndcg_at_k(&ranked, &pool, k) - ref_ndcg(&ranked, &pool, k)).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn ideal_ranking_scores_exactly_one() {
    let pool = [3.0f64, 5.0, 1.0, 4.0, 4.0, 0.0];
    let mut ideal = pool.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    for k in 1..=8 {
        assert_eq!(ndcg_at_k(&ideal, &pool, k), 1.0);
    }
    let ex = ndcg_at_k(&[0.0, 2.0, 3.0], &[3.0, 2.0, 0.0], 3);
    assert!((ex - 0.6480).abs() < 1e-4, "{ex}");
    assert_eq!(ndcg_at_k(&[0.0, 0.0], &[0.0, 0.0], 2), 0.0);
}

proptest! {
    #[test]
    fn hit_counts_are_recovered(
        catalog in 1u32..50,
        picks in proptest::collection::vec(any::<bool>(), 50),
        rel_picks in proptest::collection::vec(any::<bool>(), 50),
        k in 1usize..30,
    ) {
        let rec: Vec<u32> = (0..catalog).filter(|&i| picks[i as usize]).collect();
        let rel: HashSet<u32> = (0..catalog).filter(|&i| rel_picks[i as usize]).collect();
        let hits = rec.iter().take(k).filter(|s| rel.contains(s)).count() as f64;
        let p = precision_at_k(&rec, &rel, k);
        prop_assert!((p * k as f64 - hits).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&p));
        if let Some(r) = recall_at_k(&rec, &rel, k) {
            prop_assert!((r * rel.len() as f64 - hits).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&r));
        } else {
            prop_assert!(rel.is_empty());
        }
    }

    #[test]
    fn mae_never_exceeds_rmse(pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..60)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!(mae(&p, &t) <= rmse(&p, &t) + 1e-12);
    }

    #[test]
    fn ndcg_is_one_iff_top_k_is_sorted(
        pool in proptest::collection::vec(0u8..=5, 1..12),
        seed in any::<u64>(),
        k in 1usize..14,
    ) {
        let pool: Vec<f64> = pool.into_iter().map(f64::from).collect();
        let mut ranked = pool.clone();
        ranked.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut ideal = pool.clone();
        ideal.sort_by(|a, b| b.total_cmp(a));
        let n = ndcg_at_k(&ranked, &pool, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        let top = k.min(pool.len());
        let sorted_top = ranked[..top] == ideal[..top];
        if ideal[0] > 0.0 {
            prop_assert_eq!((n - 1.0).abs() < 1e-12, sorted_top, "ranked {:?} n {}", ranked, n);
        } else {
            prop_assert_eq!(n, 0.0);
        }
    }
}
