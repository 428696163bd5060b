//! Bus factor analysis for Git repositories.
//!
//! The pipeline mines a repository's recent main-branch history, turns the
//! contribution events into a decay-weighted knowledge matrix, computes the
//! bus factor of every file and folder with a greedy removal procedure, and
//! serializes the enriched file tree to JSON and CSV.
//!
//! The numeric core ([`knowledge`], [`engine`], [`tree`]) is generic over the
//! knowledge scalar through [`Scalar`]; the aliases at the crate root fix it
//! to `f64`, which is what the exporters and the artifact store use.

pub mod bots;
pub mod coords;
pub mod engine;
pub mod export;
pub mod fixtures;
pub mod knowledge;
pub mod miner;
pub mod pipeline;
pub mod scalar;
pub mod store;
pub mod synth;
pub mod tree;

pub use bots::BotHints;
pub use coords::RepoCoordinates;
pub use engine::{BusFactor, Removal, SimulationDelta};
pub use knowledge::{FileStatus, MajorAuthorSet};
pub use miner::{ContributionEvent, HeadFile, MiningResult, RepoHandle};
pub use scalar::Scalar;
pub use tree::{CategoryConfig, CategoryRange, NodeKind};

/// Knowledge matrix over `f64` scores.
pub type KnowledgeMatrix = knowledge::KnowledgeMatrix<f64>;
/// Knowledge matrix over `f32` scores.
pub type KnowledgeMatrixF32 = knowledge::KnowledgeMatrix<f32>;
/// Enriched repository tree over `f64` scores.
pub type RepoTree = tree::RepoTree<f64>;
/// Enriched repository tree over `f32` scores.
pub type RepoTreeF32 = tree::RepoTree<f32>;
pub type TreeNode = tree::TreeNode<f64>;
pub type AuthorShare = tree::AuthorShare<f64>;
pub type BusFactorResult = engine::BusFactorResult;
pub type Engine<'m> = engine::Engine<'m, f64>;
