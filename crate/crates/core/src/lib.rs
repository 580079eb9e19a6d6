//! Interactive sampling-enhanced optimization for 0-1 programs whose knapsack
//! constraints are hidden behind membership oracles.
//!
//! A run alternates three steps per unknown constraint: fit a linear surrogate
//! to the labeled sub-solutions ([`separation`]), pick a fresh sub-solution to
//! label ([`sampling`]), and optimize the surrogate problem ([`discrete`]).
//! An upper bound computed from the version spaces certifies the incumbent.
//! The loop itself lives in [`iseo`].

pub mod discrete;
pub mod error;
pub mod iseo;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod report;
pub mod sampling;
pub mod separation;
pub mod solvers;

pub use error::{Error, Result};
pub use iseo::{final_feasibility_probe, run, Backend, RunConfig, RunRecord, RunSummary, Sampler, Separator};
pub use model::{
    dominated_feasible, restrict, CombinatorialSpace, Instance, Label, LabeledPools, ProblemKind,
    Solution, SubSolution, SurrogateWeights, WeightDomain,
};
pub use oracle::{MembershipOracle, OracleSuite, SimulatedOracle};
