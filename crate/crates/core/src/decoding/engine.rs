//! The decode loop: strategy dispatch, the per-step mask chain, and beam
//! bookkeeping.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::dist::{
    apply_temperature, argmax, min_len_mask, no_repeat_mask, renormalize, sample_index,
    top_p_filter,
};
use super::{length_penalized_score, DecodeConfig, DecodeResult, SequenceScorer, Strategy};
use crate::corpus::TokenSeq;
use crate::error::{Error, Result};

/// Generate one sequence for `context` under `config`.
///
/// The context is truncated to its last `max_context` tokens before the
/// scorer sees it. Every step applies, in order: temperature, the
/// minimum-length mask, the no-repeat n-gram mask (over context plus
/// generated prefix), and the nucleus filter.
pub fn decode(
    scorer: &dyn SequenceScorer,
    context: &[String],
    config: &DecodeConfig,
) -> Result<DecodeResult> {
    config.validate()?;
    let vocab = scorer.vocab();
    if vocab.is_empty() {
        return Err(Error::Scorer("vocabulary is empty".into()));
    }
    if vocab.iter().any(String::is_empty) {
        return Err(Error::Scorer("vocabulary contains an empty token".into()));
    }
    let index: HashMap<&str, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    if index.len() != vocab.len() {
        return Err(Error::Scorer("vocabulary contains duplicate tokens".into()));
    }
    let eod = *index
        .get(scorer.eod_token())
        .ok_or_else(|| {
            Error::Scorer(format!("end token {:?} missing from vocabulary", scorer.eod_token()))
        })? as usize;

    let context = &context[context.len().saturating_sub(config.max_context)..];
    // Id stream for the no-repeat mask. Context tokens outside the
    // vocabulary can never be generated, but they still take part in
    // n-gram matching, so each distinct one gets a fresh id past the
    // vocabulary range.
    let mut extra: HashMap<&str, u32> = HashMap::new();
    let ctx_ids: Vec<u32> = context
        .iter()
        .map(|t| match index.get(t.as_str()) {
            Some(&id) => id,
            None => {
                let next = (vocab.len() + extra.len()) as u32;
                *extra.entry(t.as_str()).or_insert(next)
            }
        })
        .collect();

    let env = Env { scorer, vocab, context, ctx_ids, eod, config };
    match config.strategy {
        Strategy::Greedy | Strategy::Sampling => single_path(&env),
        Strategy::Beam | Strategy::BeamSampling => beam_path(&env),
    }
}

struct Env<'a> {
    scorer: &'a dyn SequenceScorer,
    vocab: &'a [String],
    context: &'a [String],
    ctx_ids: Vec<u32>,
    eod: usize,
    config: &'a DecodeConfig,
}

impl Env<'_> {
    /// Raw scorer distribution for a prefix, passed through the full mask
    /// chain. The boolean reports an all-masked fallback at this step.
    fn masked_dist(&self, prefix: &[String], prefix_ids: &[u32]) -> Result<(Vec<f64>, bool)> {
        let raw = self.scorer.next_dist(self.context, prefix)?;
        self.check_raw(&raw)?;
        let d = apply_temperature(&raw, self.config.temperature);
        let (d, fb_min) = min_len_mask(&d, self.eod, prefix.len(), self.config.min_len);
        let mut stream = Vec::with_capacity(self.ctx_ids.len() + prefix_ids.len());
        stream.extend_from_slice(&self.ctx_ids);
        stream.extend_from_slice(prefix_ids);
        let (d, fb_rep) = no_repeat_mask(&d, &stream, self.config.no_repeat_n);
        let d = top_p_filter(&d, self.config.top_p);
        Ok((d, fb_min || fb_rep))
    }

    fn check_raw(&self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.vocab.len() {
            return Err(Error::Scorer(format!(
                "distribution has {} entries for a {}-token vocabulary",
                raw.len(),
                self.vocab.len()
            )));
        }
        let mut sum = 0.0;
        for &p in raw {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Scorer(format!("invalid probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Scorer(format!("distribution sums to {sum}")));
        }
        Ok(())
    }
}

fn finish(steps: Vec<f64>, tokens: Vec<String>, fallback: bool, seed: u64) -> DecodeResult {
    DecodeResult {
        tokens: TokenSeq::new(tokens),
        cum_logprob: steps.iter().sum(),
        step_logprobs: steps,
        all_masked_fallback: fallback,
        seed,
    }
}

/// Greedy and sampling: a single hypothesis, one choice per step.
fn single_path(env: &Env) -> Result<DecodeResult> {
    let config = env.config;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut tokens: Vec<String> = Vec::new();
    let mut ids: Vec<u32> = Vec::new();
    let mut steps: Vec<f64> = Vec::new();
    let mut fallback = false;

    while tokens.len() < config.max_len {
        let (d, fb) = env.masked_dist(&tokens, &ids)?;
        fallback |= fb;
        let choice = match config.strategy {
            Strategy::Greedy => argmax(&d),
            _ => sample_index(&d, &mut rng),
        };
        steps.push(d[choice].ln());
        if choice == env.eod {
            break;
        }
        tokens.push(env.vocab[choice].clone());
        ids.push(choice as u32);
    }
    Ok(finish(steps, tokens, fallback, config.seed))
}

#[derive(Clone, Default)]
struct Hyp {
    tokens: Vec<String>,
    ids: Vec<u32>,
    cum: f64,
    steps: Vec<f64>,
    fallback: bool,
}

/// Both beam flavours. Live hypotheses are ranked by cumulative
/// log-probability during the search; finished hypotheses compete on the
/// length-penalized score. A finished pool of full width plus a sound upper
/// bound on what any live hypothesis could still achieve gives early
/// termination without ever discarding a potential winner.
fn beam_path(env: &Env) -> Result<DecodeResult> {
    let config = env.config;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let alpha = config.length_penalty;
    let penalized = |h: &Hyp| length_penalized_score(h.cum, h.tokens.len(), alpha);
    // Upper bound on any continuation of a live hypothesis: log-probs only
    // shrink the numerator, and a negative numerator scores best at the
    // longest possible length.
    let bound_divisor = (config.max_len as f64).powf(alpha).max(1.0);

    let mut live = vec![Hyp::default()];
    let mut finished: Vec<Hyp> = Vec::new();

    for _step in 0..config.max_len {
        if finished.len() >= config.beam_size {
            let worst = finished.iter().map(penalized).fold(f64::INFINITY, f64::min);
            let best_possible =
                live.iter().map(|h| h.cum / bound_divisor).fold(f64::NEG_INFINITY, f64::max);
            if best_possible <= worst {
                live.clear();
                break;
            }
        }

        let mut candidates: Vec<Hyp> = Vec::new();
        for hyp in &live {
            let (d, fb) = env.masked_dist(&hyp.tokens, &hyp.ids)?;
            let picks = match config.strategy {
                Strategy::Beam => top_k(&d, config.beam_size),
                _ => sample_k(&d, config.beam_size, &mut rng),
            };
            for choice in picks {
                let logp = d[choice].ln();
                let mut child = hyp.clone();
                child.cum += logp;
                child.steps.push(logp);
                child.fallback |= fb;
                if choice == env.eod {
                    finished.push(child);
                } else {
                    child.tokens.push(env.vocab[choice].clone());
                    child.ids.push(choice as u32);
                    candidates.push(child);
                }
            }
        }

        candidates.sort_by(|a, b| b.cum.total_cmp(&a.cum));
        candidates.truncate(config.beam_size);
        live = candidates;

        finished.sort_by(|a, b| penalized(b).total_cmp(&penalized(a)));
        finished.truncate(config.beam_size);

        if live.is_empty() {
            break;
        }
    }
    // Anything still alive ran into max_len: a length-stopped finish with
    // no end-marker factor.
    finished.extend(live.drain(..));

    let mut best: Option<usize> = None;
    for (i, hyp) in finished.iter().enumerate() {
        if best.is_none_or(|b| penalized(hyp) > penalized(&finished[b])) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Scorer("decode produced no hypotheses".into()))?;
    let Hyp { tokens, cum, steps, fallback, .. } = finished.swap_remove(best);
    Ok(DecodeResult {
        tokens: TokenSeq::new(tokens),
        cum_logprob: cum,
        step_logprobs: steps,
        all_masked_fallback: fallback,
        seed: config.seed,
    })
}

/// Indices of the k highest-probability tokens (mass required), by
/// probability then index.
fn top_k(d: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
    idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Up to k distinct indices sampled without replacement.
fn sample_k(d: &[f64], k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut work = d.to_vec();
    let mut picks = Vec::with_capacity(k);
    for _ in 0..k {
        if !renormalize(&mut work) {
            break;
        }
        let choice = sample_index(&work, rng);
        picks.push(choice);
        work[choice] = 0.0;
    }
    picks
}
