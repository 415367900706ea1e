//! Semantic malware signature synthesis and matching.
//!
//! The pipeline works on inter-component call graphs: typed vertices for app
//! components plus a reserved system vertex, control-flow edges, and labeled
//! metadata edges (intent filters, suspicious API calls and actions, taint
//! flows). From a family of malware samples it synthesizes the
//! maximally-suspicious common subgraph by lexicographic weighted MaxSAT,
//! where metadata weights are inverse frequencies over a benign corpus.
//! Matching is either exact subgraph embedding or approximate: re-synthesize
//! against the app's transitive closure and compare weighted sizes.
//!
//! Module map:
//! - [`model`]: graph types, JSON wire format, validation.
//! - [`weights`]: benign-corpus inverse-frequency weights, quantization.
//! - [`sat`]: a small DPLL solver with two-watched literals.
//! - [`wcnf`]: tiered weighted CNF container and DIMACS-style export.
//! - [`maxsat`]: lexicographic maximization and pseudo-Boolean encodings.
//! - [`encoder`]: reduction from graph samples to a tiered MaxSAT problem.
//! - [`synth`]: signature inference on top of the encoder and solver.
//! - [`matcher`]: exact embedding, approximate matching, scanning, tuning.
//! - [`oracle`]: exhaustive reference implementation for cross-checks.
//! - [`obfuscator`]: seeded graph transformations for resilience testing.

pub mod encoder;
pub mod error;
pub mod matcher;
pub mod maxsat;
pub mod model;
pub mod obfuscator;
pub mod oracle;
pub mod sat;
pub mod synth;
pub mod wcnf;
pub mod weights;

pub use error::{Result, SigError};
pub use matcher::{
    approx_match, exact_match, scan, tune_cutoff, Cutoffs, MatchKind, MatchVerdict, ScanReport,
};
pub use model::{ComponentType, Iccg, MetadataLabel, Signature, Tier, SYSTEM_ID};
pub use synth::infer_signature;
pub use weights::{compute_weights, WeightTable};
