//! Hybrid interpretable time-series classification.
//!
//! A sample is cut into length-preserving patches, a small 1-D convolutional
//! network classifies every patch, the winning confidences are summed into a
//! per-class presence vector, and a shallow classifier (linear SVM, random
//! forest or plain voting) assigns the sample label. Every patch prediction is
//! kept, so each sample-level decision comes with a patch-level explanation.
//!
//! The pipeline stages live in separate modules:
//!
//! * [`data`] loads, generates, normalizes and splits datasets,
//! * [`patching`] turns samples into patch instances,
//! * [`neuralnet`] is the patch classifier and its training machinery,
//! * [`metadata`] builds class-presence vectors,
//! * [`shallow`] holds the sample-level classifiers,
//! * [`pipeline`] ties the four steps together into a trained [`pipeline::PatchX`],
//! * [`explain`] produces per-patch records, histograms and probes,
//! * [`bundle`] persists a trained pipeline.

pub mod bundle;
pub mod data;
pub mod error;
pub mod explain;
pub mod metadata;
pub mod neuralnet;
pub mod patching;
pub mod pipeline;
pub mod shallow;
mod util;

pub use error::{Error, Result};
