//! Stable fractional matchings under strict cardinal preferences.
//!
//! The crate classifies instances by iterated mutual-first-preference
//! extraction, builds non-integral stable fractional matchings from envy-graph
//! rotations weighted by an exact linear program, verifies stability with
//! exact rationals and audits mechanisms for profitable misreports.

pub mod audit;
pub mod cmfp;
pub mod envy;
pub mod fractional;
pub mod instance;
pub mod integral;
pub mod lp;
pub mod rational;
pub mod solver;

pub use cmfp::{classify, cmfp_matching, mfp_pairs, unique_sfm, Classification, CmfpResult};
pub use fractional::{bvn_decompose, convex_combine, is_stable, utilities, FractionalMatching, StabilityReport};
pub use instance::{generate, parse_instance, AgentId, GenMode, MatchingInstance, Side};
pub use integral::{blocking_pairs, enumerate_stable, gale_shapley, IntegralMatching, Proposers};
pub use rational::Rational;
