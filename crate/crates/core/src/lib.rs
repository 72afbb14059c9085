//! Concept drift detection with a meta-learned detector.
//!
//! The pipeline turns a labelled data stream into a prequential error trace
//! ([`baselearner`]), summarises the trace as gaps between windowed error
//! rates ([`metafeat`]), and classifies each summary into sudden, gradual,
//! incremental or no drift with a prototypical network ([`protonet`]). At
//! detection time the network is adapted to the stream with entropy-driven
//! label queries ([`active`]). Classical detectors ([`detectors`]) and a
//! benchmark harness ([`evalharness`]) provide the comparison points.

pub mod active;
pub mod baselearner;
pub mod detectors;
pub mod error;
pub mod evalharness;
pub mod metafeat;
pub mod protonet;
pub mod streamgen;
pub mod trace;

pub use error::{Error, Result};
