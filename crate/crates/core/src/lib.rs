//! Planning and evaluation toolkit for UAV-assisted emergency cellular
//! coverage.
//!
//! After a disaster knocks out ground infrastructure, a small fleet of
//! UAV base stations can restore connectivity for evacuating residents.
//! This crate models that problem end to end:
//!
//! - [`scenario`]: the static world (zones, links, recharge sites, UAVs,
//!   demand areas) plus a seeded synthetic generator.
//! - [`mobility`]: an evacuation flow simulation that produces per-step
//!   vehicle counts for each demand area.
//! - [`linkbudget`]: air-to-ground path loss, SNR, and the achievable
//!   throughput matrix between hover zones and demand areas.
//! - [`optimizer`]: the scheduling model (cover / travel / recharge
//!   actions plus spectrum shares), its linear relaxation, a rounding
//!   pass that restores feasibility, an exact spectrum re-allocation for
//!   a fixed plan, and a brute-force reference for tiny instances.
//! - [`baseline`]: a least-recently-visited patrol heuristic with an
//!   even spectrum split, used as a comparison point.
//! - [`evaluator`]: feasibility checking and metrics (worst-area
//!   rolling-average throughput, totals, fairness, mission statistics).
//!
//! The physical-layer kernels in [`linkbudget`] are generic over the
//! float width via [`scalar::Real`]; the aliases [`PathLossDb`] and
//! [`ThroughputBps`] fix the default `f64` precision used across the
//! rest of the crate.

pub mod baseline;
pub mod evaluator;
pub mod linkbudget;
pub mod mobility;
pub mod optimizer;
pub mod scalar;
pub mod scenario;

mod lp;
#[cfg(test)]
mod testfix;

pub use scalar::Real;

/// Path loss in dB at the crate's default `f64` precision.
pub type PathLossDb = f64;
/// Throughput in bits per second at the crate's default `f64` precision.
pub type ThroughputBps = f64;

pub use baseline::{baseline_allocation, baseline_plan, shortest_zone_path, BaselineError};
pub use evaluator::{
    check_feasibility, evaluate_plan, jain_index, ActionBreakdown, EvaluateError, Metrics,
    MetricsSummary, MissionStats, Violation, ViolationRule,
};
pub use linkbudget::{
    build_throughput_matrix, path_loss_db, snr_db, snr_to_throughput, LinkBudgetError,
    RadioConfig, RateTable, ThroughputMatrix,
};
pub use mobility::{
    route_vehicles, simulate_evacuation, simulate_evacuation_traced, MobilityConfig,
    MobilityError, MobilityTrace, TickAudit, VehicleCounts,
};
pub use optimizer::{
    allocate_spectrum, brute_force_optimum, build_model, build_model_with_options,
    round_solution, solve_relaxation, Action, AllocationMatrix, BruteForceLimits,
    FractionalSolution, ModelError, ModelOptions, ModelStats, OptimizeError, Plan, PlanningModel,
};
pub use scenario::{
    generate_scenario, validate_scenario, Area, AreaGraph, GeneratorConfig, Scenario,
    ScenarioError, Uav, ValidationIssue, ValidationReport, Zone,
};
