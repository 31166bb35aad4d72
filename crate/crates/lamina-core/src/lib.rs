//! Numerical construction of invariant central laminations for small
//! perturbations of skew products over hyperbolic base maps.
//!
//! The library is organised around a graph-transform contraction: center-stable
//! and center-unstable leaves are represented as graphs over chart domains,
//! pulled back through the perturbed map until the iteration contracts to the
//! invariant leaf. Central leaves arise as transverse intersections of the two
//! families, and the induced fiber maps, Hölder regularity of the lamination,
//! and a semiconjugacy onto the circle-doubling factor are all measured
//! numerically. A separate symbolic toolkit counts binary words with atypical
//! pattern frequencies exactly (big-integer DP over a KMP automaton) and feeds
//! cover-volume and box-dimension estimates.
//!
//! The crate is `no_std` + `alloc` compatible; enable the default `std` feature
//! for use from ordinary binaries.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

/// Crate version, for embedding in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod base;
pub mod error;
pub mod geom;
pub mod graph;
pub mod holder;
pub mod lamination;
pub mod leaf;
pub mod newton;
pub mod skew;
pub mod words;

pub use base::{
    BaseMap, BasePoint, ChartFrame, HyperbolicConstants, PairKind, RateReport,
};
pub use error::{Error, Result};
pub use geom::Coords;
pub use holder::{
    alpha_theoretical, box_counts, box_dimension, central_holder_pairs, central_leaf_gap,
    count_boxes, fit_holder_exponent, holder_image_dimension_bound, stable_value_holder_pairs,
    AlphaMode, BoxDimension, HolderFit,
};
pub use graph::{
    default_delta, horizontal_map_gap, measure_horizontal_map, random_admissible_leaf,
    solve_invariant_leaf, transform_leaf, transform_leaf_pair, GraphOptions, HorizontalMapReport,
    InvariantLeaf, LeafKind, PairContraction, TransformReport,
};
pub use lamination::{
    central_leaf, check_disjointness, conjugated_fiber_map, global_leaf_value, global_stable_leaf,
    invariance_residual, semiconjugacy_q, track_factor_coordinate, CentralDiagnostics, CentralLeaf,
    CentralOptions, ConjugatedFiberMap, DisjointnessReport, GlobalOptions, GlobalStableLeaf,
    QValue, SemiconjugacyOptions,
};
pub use leaf::LeafFunction;
pub use skew::{
    check_dominated_splitting, estimate_c1_distance, make_standard_perturbation, C1Distance,
    C1GridOptions, DominatedSplittingReport, FiberFamily, PerturbedMap, SkewProduct, XPoint,
};
pub use words::{
    atypical_word_count, birkhoff_cosine_average, cover_volume_log2, deviating_prefix_count,
    deviation_table, fixed_angle_from_f64, fixed_angle_from_ratio, log2_biguint, nu_estimate,
    random_fixed_angle, sample_deviating_arcs, DeviationTable, PatternAutomaton,
};
