//! Frequency-domain salient object detection over paired RGB and thermal
//! images, built from first principles: a hand-written FFT stack with a
//! brute-force oracle to keep it honest, tape-based reverse-mode gradients
//! for every operator, frequency-space fusion/edge/attention blocks, a
//! co-focus spectral loss, and a desk-scale trainer with deterministic
//! seeding.

pub mod autodiff;
pub mod blocks;
pub mod canny;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod mixing;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod spectral;
pub mod synth;
pub mod tensor;
pub mod trainer;
#[cfg(test)]
pub(crate) mod testutil;

pub use autodiff::{AdamConfig, Gradients, Graph, NodeId, ParamId, ParamStore, Value};
pub use error::{Error, Result};
pub use spectral::oracle::dft_oracle;
pub use spectral::{
    amp_phase, complex_from, half_spectrum_weights, half_width, irfft2_spatial, irfft_channel,
    rfft2_spatial, rfft_channel, ComplexTensor, SpectralPair,
};
pub use tensor::Tensor;

