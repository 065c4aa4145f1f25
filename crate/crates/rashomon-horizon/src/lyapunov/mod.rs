//! Maximum-Lyapunov-exponent estimation.
//!
//! The production path is the Rosenstein procedure (delay embedding,
//! Theiler-windowed nearest neighbors, divergence-curve slope); the
//! twin-trajectory renormalization estimator provides independent ground
//! truth for the synthetic systems.

mod benettin;
mod embedding;
mod rosenstein;

pub use benettin::{
    benettin_map, benettin_oracle, benettin_oracle_with, BenettinEstimate, BenettinOptions,
};
pub use embedding::{
    embed, embed_trajectory, false_nearest_neighbors, false_nearest_neighbors_multi,
    mutual_information_delay, mutual_information_profile, DelaySelection,
};
pub use rosenstein::{
    divergence_curve, estimate_lyapunov, fit_lyapunov, DivergenceCurve, EmbeddingParams,
    LyapunovEstimate,
};
