//! Toolkit for building open-domain dialogue training corpora and probing
//! generation quality.
//!
//! The crate is organised around a handful of independent concerns:
//!
//! * [`corpus`] — session/utterance types, tokenization, JSONL I/O, and
//!   streaming corpus statistics.
//! * [`ngram`] — smoothed n-gram language models (add-k and interpolated
//!   Kneser-Ney) used for fluency scoring and as a toy decoding backend.
//! * [`quality`] — per-session quality signals: lexical context/response
//!   relevance, classifier relevance, LM fluency, an entertainment-gossip
//!   flag, and a weighted combined score.
//! * [`filters`] — a four-stage corpus refinement pipeline (dataset, rule,
//!   classifier, and repeated-context stages) built on the quality signals.
//! * [`decoding`] — a decoding engine (greedy, sampling, beam, beam+sampling)
//!   over a pluggable next-token scorer, plus self-chat session synthesis.
//! * [`metrics`] — reference-based and diversity metrics for generated text
//!   (unigram F1, ROUGE-L, BLEU-4, distinct-4).
//! * [`exec`] — the worker-count knob shared by every batch operation; with
//!   the `parallel` feature (default) work is spread over a rayon pool, and
//!   without it the same API degrades to a sequential loop.
//!
//! Batch results never depend on the worker count: parallel maps preserve
//! input order and all floating-point reductions happen sequentially over the
//! ordered results.

pub mod corpus;
pub mod decoding;
pub mod error;
pub mod exec;
pub mod filters;
pub mod metrics;
pub mod ngram;
pub mod quality;

pub use error::{Error, Result};
