//! Shared building blocks for the assisted IBAT authoring pipeline.
//!
//! This crate holds the domain types that travel between pipeline stages,
//! the JSON schemas enforced on language-model output, the evaluation
//! metrics, and the planar geometry used by the triangle detectors.
//!
//! The numeric code is written against the [`scalar::Scalar`] and
//! [`scalar::Real`] traits so it can run on `f32`, `f64`, or (for the cost
//! model) exact rationals. The aliases below fix the scalar to the types the
//! rest of the workspace uses.

pub mod cost;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod scalar;
pub mod schema;
pub mod validate;

pub use model::*;

/// Pixel-space point.
pub type Point = geometry::Point<f64>;
/// Pixel-space polygon.
pub type Polygon = geometry::Polygon<f64>;
/// Per-1K-token pricing in dollars.
pub type PricingTable = cost::PricingTable<f64>;
/// Cost estimate in floating-point dollars; this is what lands on disk.
pub type CostEstimate = cost::CostEstimate<f64>;
/// Cost estimate in exact rational dollars.
pub type ExactCostEstimate = cost::CostEstimate<num_rational::Rational64>;
/// Exact rational pricing.
pub type ExactPricingTable = cost::PricingTable<num_rational::Rational64>;
