//! Harmonized traffic scenario pipeline.
//!
//! * [`model`]: scenario domain types and invariant checks.
//! * [`openlabel`]: canonical reader/writer for the OpenLABEL-based profile.
//! * [`metrics`]: per-frame time-space criticality measures.
//! * [`store`]: file-backed scenario database with metadata queries.
//! * [`sim`]: seeded microscopic traffic simulation.
//! * [`calibration`]: likelihood-based model calibration with Nelder-Mead.
//! * [`sampler`]: critical cut-in variation and crash classification.

pub mod fixtures;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod openlabel;
pub mod sim;
pub mod store;
pub mod calibration;
pub mod sampler;
