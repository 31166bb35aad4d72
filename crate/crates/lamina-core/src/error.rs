//! Error type shared across the crate.

use alloc::string::String;

/// Everything that can go wrong while building or evaluating a lamination.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Constants violate `0 < lambda_minus <= lambda < 1 < 1/mu <= 1/mu_minus`.
    #[error("degenerate hyperbolicity constants: {0}")]
    DegenerateConstants(String),
    /// A chart was evaluated outside its 3-delta validity region.
    #[error("chart coordinates out of range: |x| = {radius:.3e} exceeds 3*delta = {limit:.3e}")]
    OutOfChart { radius: f64, limit: f64 },
    /// A backward base step needed more symbolic past than the point carries.
    #[error("insufficient itinerary depth: need {needed} symbols, have {have}")]
    InsufficientPast { needed: usize, have: usize },
    /// Two points were too far apart for a local-product-structure bracket.
    #[error("points too far apart for local product structure: d = {dist:.3e} > delta = {delta:.3e}")]
    PointsTooFar { dist: f64, delta: f64 },
    /// The fiber family is not a fiber-preserving diffeomorphism.
    #[error("not a fiber morphism: {0}")]
    NotFiberMorphism(String),
    /// A Newton solve failed to reach tolerance.
    #[error("newton solve failed: residual {residual:.3e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },
    /// The graph-transform output violated the membership bounds.
    #[error("leaf left the invariant set: sup = {sup:.3e} (cap {sup_cap:.3e}), lip = {lip:.3e} (cap {lip_cap:.3e})")]
    LeftInvariantSet { sup: f64, sup_cap: f64, lip: f64, lip_cap: f64 },
    /// A pull-back solve failed at a specific grid node.
    #[error("pull-back failed at node {node}: {source}")]
    PullBackFailed { node: usize, source: alloc::boxed::Box<Error> },
    /// Mismatched leaf geometry (wrong kind, grid, or base point).
    #[error("incompatible leaf data: {0}")]
    IncompatibleLeaf(String),
    /// Not enough or degenerate samples for a least-squares fit.
    #[error("insufficient samples for fit: {0}")]
    InsufficientSamples(String),
    /// A root bracket could not be found.
    #[error("root bracketing failed: {0}")]
    BracketFailed(String),
    /// Invalid argument outside the other categories.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
