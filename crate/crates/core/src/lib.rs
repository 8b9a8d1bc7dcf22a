//! Unsupervised salient-interval detection for multichannel motor-imagery
//! EEG trials, plus the spatial-filtering pipeline used to measure its
//! effect.
//!
//! An LSTM-attention autoencoder is trained to reconstruct randomly masked
//! trials; at test time the decoder is dropped and the self-attention
//! weights score every time sample. Trials are split into `n` equal
//! segments, the `r` with the highest mean attention are kept, and the
//! concatenation feeds a CSP + LDA classifier. Everything is seeded and
//! bit-reproducible; the analytic gradients are finite-difference checked.
//!
//! Module map:
//! - [`trialio`]: trial data model, CSV formats, synthetic generator
//! - [`dsp`]: Butterworth bandpass design and zero-phase filtering
//! - [`attnet`]: the autoencoder (forward, backward, training)
//! - [`saliency`]: attention vector, segment selection, pruning
//! - [`cspclf`]: CSP spatial filters and the LDA classifier
//! - [`pipeline`]: tuning, comparison, sweep, report CSVs
//!
//! Data-parallel inner loops (batch gradients, per-trial maps, grid
//! candidates) run on rayon by default; building with
//! `--no-default-features` swaps in sequential equivalents with identical
//! results.

pub mod attnet;
pub mod cspclf;
pub mod dsp;
pub mod linalg;
pub mod par;
pub mod pipeline;
pub mod saliency;
pub mod trialio;
