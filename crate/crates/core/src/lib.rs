//! Question answering over a software tool's User Guide.
//!
//! The pipeline: a hand-distilled knowledge base ([`kb`]) and a set of
//! question templates ([`gen`]) produce a labeled corpus; an intent model
//! ([`classify`]) is trained on it; at run time a question is classified,
//! bound to knowledge-base records ([`semantics`]) and answered behind a
//! confidence gate ([`dialogue`]). [`service`] serves this over HTTP and
//! [`eval`] replays corpora through the whole pipeline.

pub mod classify;
pub mod cli;
pub mod dialogue;
pub mod eval;
pub mod gen;
pub mod kb;
pub mod semantics;
pub mod service;

pub use classify::{IntentCategory, IntentModel};
pub use dialogue::{respond, Response, ResponseKind};
pub use kb::{load_guide, KnowledgeBase};
