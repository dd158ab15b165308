use std::collections::BTreeSet;

use serde::Serialize;

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;

fn token_set(label: &str) -> BTreeSet<String> {
    label
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token-set Jaccard similarity of two labels, case-insensitive.
pub fn label_similarity(a: &str, b: &str) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub predicted: usize,
    pub gold: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Pairing {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_predicted: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
}

/// Greedy one-to-one matching: candidate pairs at or above `threshold` are
/// taken by descending similarity, then gold order, then prediction order.
pub fn match_elements<P: AsRef<str>, G: AsRef<str>>(predicted: &[P], gold: &[G], threshold: f64) -> Pairing {
    let mut candidates = Vec::new();
    for (pi, p) in predicted.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            let s = label_similarity(p.as_ref(), g.as_ref());
            if s >= threshold && s > 0.0 {
                candidates.push(MatchedPair {
                    predicted: pi,
                    gold: gi,
                    similarity: s,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.gold.cmp(&b.gold))
            .then(a.predicted.cmp(&b.predicted))
    });
    let mut used_p = vec![false; predicted.len()];
    let mut used_g = vec![false; gold.len()];
    let mut out = Pairing::default();
    for c in candidates {
        if !used_p[c.predicted] && !used_g[c.gold] {
            used_p[c.predicted] = true;
            used_g[c.gold] = true;
            out.pairs.push(c);
        }
    }
    out.pairs.sort_by_key(|p| p.gold);
    out.unmatched_predicted = (0..predicted.len()).filter(|&i| !used_p[i]).collect();
    out.unmatched_gold = (0..gold.len()).filter(|&i| !used_g[i]).collect();
    out
}
