//! Equilibrium engine for network Cournot games with a market maker.
//!
//! Producers sell quantities on markets they can access; a market maker moves
//! goods along capacitated links to maximize a welfare function of the net
//! consumption. With Walrasian welfare and affine demand the game has an exact
//! concave potential, and equilibria are computed by maximizing it.

// Index loops mirror the math; `!(a < b)` comparisons deliberately catch NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod io;
pub mod model;
pub mod qp;
pub mod solver;
pub mod welfare;

pub use error::{AnalysisError, IngestError, ModelError, SolveError, Violation};
pub use model::{
    validate_game, AffineDemand, FlowProfile, Game, GameData, Labels, Link, MarketNetwork, Outcome,
    ProductionProfile, QuadraticCost, SolverStats, WelfareKind,
};
pub use solver::{solve_equilibrium, verify_equilibrium, SolveOptions, VerificationReport};
