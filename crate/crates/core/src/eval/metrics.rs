use std::collections::HashSet;

fn check_lengths(preds: &[f64], truths: &[f64]) {
    assert!(!preds.is_empty(), "metrics of an empty sample");
    assert_eq!(preds.len(), truths.len(), "prediction/truth length mismatch");
}

/// Mean absolute residual.
///
/// # Panics
/// On empty or mismatched inputs.
pub fn mae(preds: &[f64], truths: &[f64]) -> f64 {
    check_lengths(preds, truths);
    preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64
}

/// Root of the mean squared residual.
///
/// # Panics
/// On empty or mismatched inputs.
pub fn rmse(preds: &[f64], truths: &[f64]) -> f64 {
    check_lengths(preds, truths);
    let ms = preds.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / preds.len() as f64;
    ms.sqrt()
}

fn hits<T: Eq + std::hash::Hash>(recommended: &[T], relevant: &HashSet<T>) -> usize {
    recommended.iter().filter(|s| relevant.contains(*s)).count()
}

/// `|hits| / k`.
///
/// # Panics
/// If `k == 0`.
pub fn precision_at_k<T: Eq + std::hash::Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let top = &recommended[..recommended.len().min(k)];
    hits(top, relevant) as f64 / k as f64
}

/// `|hits| / |relevant|`, or `None` without relevant items.
///
/// # Panics
/// If `k == 0`.
pub fn recall_at_k<T: Eq + std::hash::Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> Option<f64> {
    assert!(k >= 1, "k must be at least 1");
    if relevant.is_empty() {
        return None;
    }
    let top = &recommended[..recommended.len().min(k)];
    Some(hits(top, relevant) as f64 / relevant.len() as f64)
}

fn dcg(relevances: &[f64]) -> f64 {
    relevances
        .iter()
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum()
}

/// `DCG@k / IDCG@k` with `DCG = Σ relᵢ / log₂(i + 1)`; the ideal ordering
/// is `pool` sorted descending. Zero when the ideal gain is zero.
///
/// # Panics
/// If `k == 0`.
pub fn ndcg_at_k(ranked: &[f64], pool: &[f64], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let mut ideal = pool.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    ideal.truncate(k);
    let idcg = dcg(&ideal);
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg(&ranked[..ranked.len().min(k)]) / idcg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&'static str]) -> HashSet<&'static str> {
        items.iter().copied().collect()
    }

    #[test]
    fn rating_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 5.0]), 1.5);
        assert!((rmse(&[1.0, 3.0], &[2.0, 5.0]) - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[1.0, 3.0], &[2.0, 5.0]) - 1.5811).abs() < 1e-4);
    }

    #[test]
    #[should_panic]
    fn empty_is_a_contract_violation() {
        mae(&[], &[]);
    }

    #[test]
    fn set_examples() {
        let rec = ["s1", "s2", "s3", "s4", "s5"];
        let rel = set(&["s1", "s2", "s9"]);
        assert!((precision_at_k(&rec, &rel, 5) - 0.4).abs() < 1e-15);
        assert!((recall_at_k(&rec, &rel, 5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let all = set(&["s1", "s2", "s3", "s4", "s5"]);
        assert_eq!((precision_at_k(&rec, &all, 5), recall_at_k(&rec, &all, 5)), (1.0, Some(1.0)));
        let none = set(&["x"]);
        assert_eq!((precision_at_k(&rec, &none, 5), recall_at_k(&rec, &none, 5)), (0.0, Some(0.0)));
        assert_eq!(recall_at_k(&rec, &set(&[]), 5), None);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[3.0, 2.0, 0.0], &[0.0, 3.0, 2.0], 3), 1.0);
        let dcg = 2.0 / 3f64.log2() + 3.0 / 4f64.log2();
        let idcg = 3.0 + 2.0 / 3f64.log2();
        assert!((dcg - 2.7619).abs() < 1e-4 && (idcg - 4.2619).abs() < 1e-4);
        let got = ndcg_at_k(&[0.0, 2.0, 3.0], &[3.0, 2.0, 0.0], 3);
        assert!((got - dcg / idcg).abs() < 1e-15);
        assert!((got - 0.6480).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[0.0, 0.0], &[0.0, 0.0], 2), 0.0);
    }
}
