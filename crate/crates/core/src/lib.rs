//! Premise selection for proof-assistant hammers.
//!
//! * [`corpus`]: premise/state records, module imports, accessibility.
//! * [`encoder`] and [`trainer`]: a small text encoder trained with a masked
//!   contrastive loss.
//! * [`index`]: exact top-k retrieval over cached embeddings, with overlays
//!   for new premises.
//! * [`mepo`]: symbolic relevance filtering baseline.
//! * [`server`]: HTTP retrieval service and client.
//! * [`orchestrator`]: a simulated hammer pipeline with pluggable provers.
//! * [`eval`]: metrics, reports, and a synthetic corpus generator.

pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod index;
pub mod mepo;
pub mod orchestrator;
pub mod server;
pub mod trainer;
