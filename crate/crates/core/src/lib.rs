//! Geometry of compact quotients of flat and hyperbolic space: quotient
//! distances, minimizing segments, maximal pairs and convexity experiments.

pub mod convexity;
pub mod deck;
pub mod error;
pub mod experiments;
pub mod model;
pub mod par;
pub mod quotient;

pub use deck::{octagon_group, Isometry, QuotientSpace};
pub use error::{GeoError, Result};
pub use experiments::{run, ExperimentConfig, ExperimentReport};
pub use model::{GeodesicSegment, ModelPoint, ModelSpace};
pub use par::Execution;
pub use quotient::{find_farthest_point, find_max_pair, quotient_distance, segment_bundle, MaxPair, SearchOptions};
