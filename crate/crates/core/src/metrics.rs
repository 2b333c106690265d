//! Reference-based and diversity metrics for generated responses.
//!
//! Per-pair metrics (unigram F1, ROUGE-L) are macro-averaged; BLEU-4 and
//! distinct-4 are corpus-level. All metrics operate on pre-tokenized
//! sequences so the tokenizer choice stays in the caller's hands.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::exec;

/// One hypothesis/reference pair, already tokenized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub hypothesis: TokenSeq,
    pub reference: TokenSeq,
}

/// Aggregate metric values over an evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Macro-averaged clipped unigram F1.
    pub unigram_f1: f64,
    /// Macro-averaged ROUGE-L F-measure.
    pub rouge_l: f64,
    /// Corpus-level BLEU up to 4-grams.
    pub bleu4: f64,
    /// Distinct 4-grams / total 4-grams over all hypotheses.
    pub distinct4: f64,
    pub n_pairs: usize,
}

fn counts<'a>(tokens: &'a [String]) -> HashMap<&'a str, u64> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_str()).or_insert(0) += 1;
    }
    map
}

/// Clipped unigram overlap F1 between a hypothesis and a reference.
/// Either side empty scores 0.
pub fn unigram_f1(hypothesis: &[String], reference: &[String]) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let ref_counts = counts(reference);
    let hyp_counts = counts(hypothesis);
    let overlap: u64 = hyp_counts
        .iter()
        .map(|(t, c)| (*c).min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / hypothesis.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    // Classic DP over two rows; O(|a|·|b|) time, O(|b|) space.
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (equal precision/recall weighting) from the longest
/// common subsequence. Either side empty scores 0.
pub fn rouge_l(hypothesis: &[String], reference: &[String]) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(hypothesis, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / hypothesis.len() as f64;
    let recall = lcs / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Modified n-gram match/candidate counts for one pair at orders 1..=4,
/// plus the length totals that feed the brevity penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct BleuCounts {
    matches: [u64; 4],
    candidates: [u64; 4],
    hyp_len: u64,
    ref_len: u64,
}

impl BleuCounts {
    fn add(&mut self, other: &BleuCounts) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.candidates[n] += other.candidates[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn bleu_counts(hypothesis: &[String], reference: &[String]) -> BleuCounts {
    let mut out = BleuCounts {
        hyp_len: hypothesis.len() as u64,
        ref_len: reference.len() as u64,
        ..BleuCounts::default()
    };
    for n in 1..=4usize {
        if hypothesis.len() < n {
            break;
        }
        let mut ref_grams: HashMap<&[String], u64> = HashMap::new();
        if reference.len() >= n {
            for gram in reference.windows(n) {
                *ref_grams.entry(gram).or_insert(0) += 1;
            }
        }
        let mut hyp_grams: HashMap<&[String], u64> = HashMap::new();
        for gram in hypothesis.windows(n) {
            *hyp_grams.entry(gram).or_insert(0) += 1;
        }
        out.candidates[n - 1] = (hypothesis.len() - n + 1) as u64;
        out.matches[n - 1] = hyp_grams
            .iter()
            .map(|(g, c)| (*c).min(ref_grams.get(g).copied().unwrap_or(0)))
            .sum();
    }
    out
}

fn bleu_from_counts(total: &BleuCounts) -> f64 {
    if total.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let (m, c) = (total.matches[n], total.candidates[n]);
        let p = if m > 0 {
            m as f64 / c as f64
        } else if n == 0 {
            // No unigram match anywhere: BLEU is exactly zero, unsmoothed.
            return 0.0;
        } else {
            // Add-one smoothing for higher orders with no matches, so short
            // corpora still get a finite score.
            1.0 / (c + 1) as f64
        };
        log_sum += p.ln();
    }
    let brevity = if total.hyp_len >= total.ref_len {
        1.0
    } else {
        (1.0 - total.ref_len as f64 / total.hyp_len as f64).exp()
    };
    brevity * (log_sum / 4.0).exp()
}

/// Corpus-level BLEU-4 over an evaluation set: n-gram counts are pooled
/// across pairs before the precisions and brevity penalty are computed.
pub fn bleu4(pairs: &[EvalPair]) -> f64 {
    let mut total = BleuCounts::default();
    for pair in pairs {
        total.add(&bleu_counts(&pair.hypothesis, &pair.reference));
    }
    bleu_from_counts(&total)
}

/// Distinct-4: unique 4-grams divided by total 4-grams across all
/// hypotheses. Zero when no hypothesis reaches four tokens.
pub fn distinct4<'a>(hypotheses: impl IntoIterator<Item = &'a [String]>) -> f64 {
    let mut seen: HashSet<&[String]> = HashSet::new();
    let mut total = 0u64;
    for hyp in hypotheses {
        for gram in hyp.windows(4) {
            total += 1;
            seen.insert(gram);
        }
    }
    if total == 0 {
        0.0
    } else {
        seen.len() as f64 / total as f64
    }
}

/// Evaluate a set of pairs. Per-pair work is spread over `workers` threads;
/// the averages are folded sequentially in input order, so the report is
/// identical for any worker count.
pub fn evaluate(pairs: &[EvalPair], workers: usize) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyStream);
    }
    let per_pair = exec::map_ordered(pairs, workers, |pair| {
        (
            unigram_f1(&pair.hypothesis, &pair.reference),
            rouge_l(&pair.hypothesis, &pair.reference),
            bleu_counts(&pair.hypothesis, &pair.reference),
        )
    });

    let mut f1_sum = 0.0;
    let mut rouge_sum = 0.0;
    let mut bleu_total = BleuCounts::default();
    for (f1, rouge, counts) in &per_pair {
        f1_sum += f1;
        rouge_sum += rouge;
        bleu_total.add(counts);
    }
    let n = pairs.len() as f64;
    Ok(EvalReport {
        unigram_f1: f1_sum / n,
        rouge_l: rouge_sum / n,
        bleu4: bleu_from_counts(&bleu_total),
        distinct4: distinct4(pairs.iter().map(|p| p.hypothesis.as_slice())),
        n_pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> TokenSeq {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    fn pair(hyp: &[&str], reference: &[&str]) -> EvalPair {
        EvalPair { hypothesis: seq(hyp), reference: seq(reference) }
    }

    #[test]
    fn unigram_f1_worked_example() {
        // Overlap 1 of hyp-len 2 and ref-len 3: P=1/2, R=1/3, F1=0.4.
        let got = unigram_f1(&seq(&["a", "b"]), &seq(&["a", "c", "d"]));
        assert!((got - 0.4).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn unigram_f1_clips_repeated_tokens() {
        // hyp has `a` twice but ref only once: overlap clips to 1.
        let got = unigram_f1(&seq(&["a", "a"]), &seq(&["a", "b"]));
        let expect = 2.0 * 0.5 * 0.5 / (0.5 + 0.5);
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_worked_example() {
        // LCS(a b c d, a c d) = a c d: P=3/4, R=1, F=6/7.
        let got = rouge_l(&seq(&["a", "b", "c", "d"]), &seq(&["a", "c", "d"]));
        assert!((got - 6.0 / 7.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn rouge_l_respects_order() {
        // Same bag of tokens, reversed order: LCS collapses to 1.
        let got = rouge_l(&seq(&["a", "b", "c"]), &seq(&["c", "b", "a"]));
        let expect = 2.0 * (1.0 / 3.0) * (1.0 / 3.0) / (2.0 / 3.0);
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn bleu4_pure_brevity_penalty_example() {
        // Perfect 4-token prefix of a 5-token reference: every precision is
        // 1, so BLEU is exactly the brevity penalty exp(1 - 5/4).
        let got = bleu4(&[pair(&["a", "b", "c", "d"], &["a", "b", "c", "d", "e"])]);
        assert!((got - (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn bleu4_disjoint_pair_is_zero() {
        assert_eq!(bleu4(&[pair(&["a", "b", "c", "d"], &["e", "f", "g", "h"])]), 0.0);
    }

    #[test]
    fn bleu4_identity_is_one() {
        let got = bleu4(&[
            pair(&["a", "b", "c", "d"], &["a", "b", "c", "d"]),
            pair(&["x", "y", "z", "w", "v"], &["x", "y", "z", "w", "v"]),
        ]);
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu4_is_invariant_under_pair_reordering() {
        let a = pair(&["a", "b", "c", "d"], &["a", "b", "x", "d", "e"]);
        let b = pair(&["x", "y"], &["x", "y", "z"]);
        let c = pair(&["q", "a", "b"], &["a", "b"]);
        let fwd = bleu4(&[a.clone(), b.clone(), c.clone()]);
        let rev = bleu4(&[c, b, a]);
        assert_eq!(fwd, rev);
    }

    #[test]
    fn distinct4_worked_example() {
        // Five `a`s contain two 4-grams, both identical: 1/2.
        let hyp = seq(&["a", "a", "a", "a", "a"]);
        let got = distinct4([hyp.as_slice()]);
        assert!((got - 0.5).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn distinct4_short_hypotheses_contribute_nothing() {
        let short = seq(&["a", "b", "c"]);
        assert_eq!(distinct4([short.as_slice()]), 0.0);
    }

    #[test]
    fn evaluate_macro_averages_per_pair_metrics() {
        let pairs = vec![
            pair(&["a", "b"], &["a", "c", "d"]),     // F1 = 0.4
            pair(&["x", "y"], &["x", "y"]),          // F1 = 1.0
        ];
        let report = evaluate(&pairs, 1).unwrap();
        assert!((report.unigram_f1 - 0.7).abs() < 1e-12);
        assert_eq!(report.n_pairs, 2);
    }

    #[test]
    fn evaluate_rejects_empty_input() {
        assert!(matches!(evaluate(&[], 1), Err(Error::EmptyStream)));
    }

    #[test]
    fn evaluate_identical_for_any_worker_count() {
        let pairs: Vec<EvalPair> = (0..200)
            .map(|i| {
                let toks: Vec<String> = (0..(i % 7 + 1)).map(|j| format!("t{}", (i + j) % 11)).collect();
                let refs: Vec<String> = (0..(i % 5 + 1)).map(|j| format!("t{}", (i * 3 + j) % 11)).collect();
                EvalPair { hypothesis: TokenSeq::new(toks), reference: TokenSeq::new(refs) }
            })
            .collect();
        let seq_report = evaluate(&pairs, 1).unwrap();
        let par_report = evaluate(&pairs, 4).unwrap();
        assert_eq!(seq_report, par_report);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn metrics_stay_in_unit_interval(
            hyp in proptest::collection::vec("[a-e]", 1..12),
            reference in proptest::collection::vec("[a-e]", 1..12),
        ) {
            let h: Vec<String> = hyp;
            let r: Vec<String> = reference;
            for value in [
                unigram_f1(&h, &r),
                rouge_l(&h, &r),
                bleu4(&[EvalPair {
                    hypothesis: TokenSeq::new(h.clone()),
                    reference: TokenSeq::new(r.clone()),
                }]),
                distinct4([&h[..]]),
            ] {
                proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&value), "out of range: {value}");
            }
        }

        #[test]
        fn identical_pair_scores_one(tokens in proptest::collection::vec("[a-e]", 4..10)) {
            let t: Vec<String> = tokens;
            let p = EvalPair {
                hypothesis: TokenSeq::new(t.clone()),
                reference: TokenSeq::new(t.clone()),
            };
            proptest::prop_assert!((unigram_f1(&p.hypothesis, &p.reference) - 1.0).abs() < 1e-12);
            proptest::prop_assert!((rouge_l(&p.hypothesis, &p.reference) - 1.0).abs() < 1e-12);
            proptest::prop_assert!((bleu4(&[p]) - 1.0).abs() < 1e-12);
        }
    }
}
