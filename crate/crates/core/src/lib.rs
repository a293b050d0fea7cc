//! Budget allocation for influencers competing over a De Groot opinion network.
//!
//! Influencers face a sequence of campaigns. Each campaign reveals the
//! individuals' opinions and a duration; the network turns the duration into
//! per-individual weights `ρ = 1ᵀ e^{−Lτ}`. Investing `b` in an individual moves
//! their opinion to `(x + b)/(1 + Σ b)` and pays `ρ` times the new share.
//!
//! The crate covers the single-influencer problem offline ([`offline`]) and
//! online ([`online`], with [`regret`] estimation), and the multi-influencer
//! game in both settings ([`game`]). Everything is generic over [`Real`]; the
//! `*64` / `*32` aliases below pin the scalar.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod game;
pub mod linalg;
pub mod offline;
pub mod online;
pub mod real;
pub mod regret;
pub mod scenario;
pub mod stats;
pub mod waterfill;

pub use dynamics::{
    adjusted_stage_utility, de_groot_weights, opinion_update, stage_gradient, stage_utilities,
    stage_utility, Allocation, CampaignWeights, Network, OpinionMatrix,
};
pub use error::{Error, Result};
pub use game::{EquilibriumReport, StrategyProfile};
pub use linalg::{expm, Matrix};
pub use offline::{brute_force_oracle, kkt_residuals, solve_offline_single, OfflineSolution};
pub use online::{
    budget_gate, dual_subgradient, online_stage_allocation, run_online_on_path, run_online_single,
    DualState, OnlineConfig, OnlineParams, OnlineRunTrace, Regularizer,
};
pub use real::Real;
pub use regret::{estimate_regret, regret_bound, regret_curve, theorem1_bound, RegretEstimate};
pub use scenario::{
    load_scenario, parse_scenario, sample_path, trial_seed, DurationDistribution,
    OpinionDistribution, PathSampler, RowDistribution, Scenario, StageRealization,
};
pub use waterfill::{water_fill, Coord, WaterFill};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type Stage64 = StageRealization<f64>;
pub type Stage32 = StageRealization<f32>;
