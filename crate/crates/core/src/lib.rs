//! Audio-image and video transformer fusion for action recognition.
//!
//! The pipeline turns a waveform into six image representations
//! ([`audio_image`]), tokenizes images and video clips ([`tokenizer`]),
//! encodes each stream with a pre-norm transformer ([`transformer`]), fuses
//! the two class-token embeddings ([`fusion`]) and trains the whole model
//! with Adam ([`training`]). Everything differentiable runs on the small
//! reverse-mode engine in [`tensor`].

pub mod audio_image;
pub mod dsp;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod params;
pub mod tensor;
pub mod tokenizer;
pub mod training;
pub mod transformer;

pub use error::{Error, ErrorKind};
