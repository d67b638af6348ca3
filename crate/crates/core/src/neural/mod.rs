//! Gaussian process regression whose kernel is learned by a neural network.
//!
//! The network maps a normalized design to `M` features `φ(x)`; with a
//! `N(0, σ_p²/M · I)` prior on linear output weights the implied kernel is
//! `k(x₁,x₂) = (σ_p²/M)·φ(x₁)ᵀφ(x₂)`. Everything is computed in weight
//! space through the `M × M` matrix `A = ΦΦᵀ + (Mσ_n²/σ_p²)I`, so fitting is
//! linear in the number of observations and prediction costs `O(M²)`.

mod network;
mod surrogate;
mod text;

pub use network::{forward_features, Architecture, Layer, NetworkWeights};
pub use surrogate::{
    nn_fit, nn_fit_from, nn_likelihood_grad, nn_log_likelihood, NeuralSurrogate, NnFitConfig, Theta,
    TrainingSummary,
};
pub use text::{read_surrogate_text, write_surrogate_text};
