//! Distribution transforms applied between the scorer and the token choice.
//!
//! Each transform takes a probability vector and returns a new one that
//! still sums to 1. The two hard masks (minimum length, no-repeat n-gram)
//! can in principle zero everything out; they return the *unmasked* input
//! plus a flag in that case, so decoding degrades gracefully instead of
//! dividing by zero — the engine surfaces the flag on the final result.

use rand::Rng;

/// Temperature reshaping: each probability is raised to `1/t` and the
/// vector renormalized. `t < 1` sharpens, `t > 1` flattens, `t = 1` is the
/// identity. If every entry underflows to zero the result collapses onto
/// the argmax (the `t → 0` limit).
pub fn apply_temperature(dist: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return dist.to_vec();
    }
    let inv = 1.0 / temperature;
    let mut out: Vec<f64> = dist.iter().map(|&p| if p > 0.0 { p.powf(inv) } else { 0.0 }).collect();
    if !renormalize(&mut out) {
        let best = argmax(dist);
        out.iter_mut().for_each(|p| *p = 0.0);
        out[best] = 1.0;
    }
    out
}

/// Nucleus filter: keep the smallest set of highest-probability tokens
/// whose mass reaches `p`, renormalized; everything else drops to zero.
/// Ties are broken toward lower indices. `p = 1` is the identity.
pub fn top_p_filter(dist: &[f64], p: f64) -> Vec<f64> {
    if p >= 1.0 {
        return dist.to_vec();
    }
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));

    let mut out = vec![0.0; dist.len()];
    let mut mass = 0.0;
    for &i in &order {
        out[i] = dist[i];
        mass += dist[i];
        // Tiny slack so a nucleus that lands exactly on `p` closes despite
        // accumulated rounding.
        if mass >= p - 1e-12 {
            break;
        }
    }
    renormalize(&mut out);
    out
}

/// Zero the end-of-dialogue token while fewer than `min_len` tokens have
/// been generated. Returns `(masked, fallback)`; `fallback` is true when
/// the end token held all the mass and the input is returned unchanged.
pub fn min_len_mask(dist: &[f64], eod_index: usize, step: usize, min_len: usize) -> (Vec<f64>, bool) {
    if step >= min_len || dist[eod_index] == 0.0 {
        return (dist.to_vec(), false);
    }
    let mut out = dist.to_vec();
    out[eod_index] = 0.0;
    if renormalize(&mut out) {
        (out, false)
    } else {
        (dist.to_vec(), true)
    }
}

/// Zero every token that would complete an `n`-gram already present in
/// `stream` (the context plus the generated prefix, as ids aligned with
/// `dist`; ids beyond the vocabulary belong to unscorable context tokens).
/// Returns `(masked, fallback)`; `fallback` is true when every token with
/// probability mass was banned and the input is returned unchanged.
pub fn no_repeat_mask(dist: &[f64], stream: &[u32], n: usize) -> (Vec<f64>, bool) {
    if n == 0 || stream.len() < n - 1 {
        return (dist.to_vec(), false);
    }
    let suffix = &stream[stream.len() - (n - 1)..];
    let mut out = dist.to_vec();
    let mut banned_any = false;
    for i in 0..stream.len() + 1 - n {
        if &stream[i..i + n - 1] == suffix {
            let completion = stream[i + n - 1] as usize;
            if completion < out.len() && out[completion] != 0.0 {
                out[completion] = 0.0;
                banned_any = true;
            }
        }
    }
    if !banned_any {
        return (out, false);
    }
    if renormalize(&mut out) {
        (out, false)
    } else {
        (dist.to_vec(), true)
    }
}

/// Scale to unit mass in place. Returns false (leaving the input untouched)
/// when there is effectively no mass to scale.
pub fn renormalize(dist: &mut [f64]) -> bool {
    let sum: f64 = dist.iter().sum();
    if sum <= 1e-300 {
        return false;
    }
    dist.iter_mut().for_each(|p| *p /= sum);
    true
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate().skip(1) {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// One inverse-CDF draw from a normalized distribution.
pub fn sample_index(dist: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = i;
            if u < cum {
                return i;
            }
        }
    }
    // Rounding left a sliver of the unit interval uncovered; charge it to
    // the last token that had mass.
    last_positive
}
