//! Early temporal action proposals from per-clip action scores.
//!
//! A clip classifier (external to this crate) produces one action
//! probability per fixed-length clip. [`proposer::Proposer`] turns that
//! stream into scored temporal proposals on-line, emitting each one as soon
//! as its run of action clips closes. [`metrics`] evaluates proposals with
//! capped AR-AN and precision-recall at a tIoU threshold, [`io`] holds the
//! CSV / THUMOS-style wire formats and [`simulator`] produces seeded
//! synthetic corpora for end-to-end checks.
//!
//! Per-video work fans out through [`exec::Execution`], which uses rayon when
//! the default `parallel` feature is on.

pub mod exec;
pub mod io;
pub mod metrics;
pub mod proposer;
pub mod simulator;
pub mod timeline;

pub use exec::Execution;
pub use metrics::{EvalConfig, EvalCorpus, EvalReport};
pub use proposer::{propose_stream, Proposer, ProposerConfig, VideoStream};
pub use simulator::{SimConfig, SimCorpus};
pub use timeline::{
    clip_to_segment, tiou, ClipScore, ClipSpan, GroundTruthSegment, Proposal, TemporalSegment,
    VideoMeta,
};
