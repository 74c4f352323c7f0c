//! Scheduling and spectrum optimization.
//!
//! The planning problem is time-expanded: for every UAV `d`, step `k`, and
//! zone `z` there are binary decisions to cover (`gamma`), travel along a
//! link (`tau`), or recharge at a site (`rho`), plus spectrum fractions
//! `phi(a, d, k, z)` handing area `a` part of a covering UAV's bandwidth.
//! The constraint families are:
//!
//! * action exclusivity: exactly one action per UAV per step;
//! * cover/travel/recharge continuity: an action at step `k` requires the
//!   UAV to have ended step `k−1` at the right zone (step 0 chains to a
//!   virtual recharge at the home site);
//! * battery window: in any `B(d)+1` consecutive steps at least one
//!   recharge;
//! * UAV spectrum capacity: a UAV hands out at most its full spectrum, and
//!   only while covering;
//! * zone spectrum capacity: all UAVs at a zone share one spectrum;
//! * objective epigraph: an auxiliary scalar `t` bounded by every rolling
//!   average `mubar(a, k)` of per-user throughput, maximized for max-min
//!   fairness.
//!
//! [`build_model`] materializes the model, [`solve_relaxation`] solves its
//! continuous relaxation, [`round_solution`] realizes a feasible integer
//! plan step by step, [`allocate_spectrum`] re-optimizes the spectrum for
//! the rounded plan, and [`brute_force_optimum`] enumerates tiny instances
//! exactly so the relaxation bound can be verified.

mod allocate;
mod brute;
mod model;
mod relax;
mod round;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use allocate::allocate_spectrum;
pub use brute::{brute_force_optimum, BruteForceLimits};
pub use model::{build_model, build_model_with_options, ModelOptions, ModelStats, PlanningModel};
pub use relax::{solve_relaxation, FractionalSolution};
pub use round::round_solution;

/// Why a model could not be built.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Matrix dimensions disagree with the scenario.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Every (area, step) pair has zero vehicles, so the max-min objective
    /// ranges over nothing.
    #[error("objective undefined: every area has zero vehicles at every step")]
    ObjectiveUndefined,
    /// The averaging horizon must cover at least the current step.
    #[error("horizon must be at least 1 step")]
    InvalidHorizon,
    /// The materialized constraint matrix would be too large to handle.
    #[error(
        "instance too large: the constraint matrix needs {estimated_nonzeros} nonzeros \
         (limit {limit}); planning targets desk-scale instances, reduce the dimensions \
         or the radio range"
    )]
    InstanceTooLarge {
        /// Nonzeros the instance would need.
        estimated_nonzeros: usize,
        /// The supported maximum.
        limit: usize,
    },
}

/// Why an optimization stage failed.
#[derive(Debug, Error)]
pub enum OptimizeError {
    /// Building the model failed.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The solver reported infeasibility; the named constraint family is
    /// the first one the canonical idle plan violates (which should never
    /// happen when every UAV starts at a recharge site).
    #[error("relaxation infeasible; first violated constraint family: {family}")]
    Infeasible {
        /// Constraint family name.
        family: String,
    },
    /// The LP backend failed outright.
    #[error("LP solver failure: {0}")]
    Solver(String),
    /// The solver returned a solution that does not satisfy the model.
    #[error("solver solution rejected: {family}: {detail}")]
    SolutionRejected {
        /// Constraint family of the violated row.
        family: String,
        /// Violation description.
        detail: String,
    },
    /// Rounding ran out of feasible actions.
    #[error("rounding trapped UAV {uav} at step {step} with no feasible action")]
    BatteryTrap {
        /// UAV id.
        uav: usize,
        /// Step index.
        step: usize,
    },
    /// A rounded plan failed the feasibility check; this is a bug guard
    /// and should be unreachable.
    #[error("rounded plan failed feasibility: {0}")]
    RoundedPlanInfeasible(String),
    /// The instance exceeds the brute-force limits.
    #[error("instance exceeds brute-force limits: {dimension} is {actual}, limit {limit}")]
    LimitExceeded {
        /// Which dimension is too large.
        dimension: &'static str,
        /// Actual size.
        actual: usize,
        /// Allowed maximum.
        limit: usize,
    },
    /// Inputs to spectrum allocation disagree with each other.
    #[error("allocation input mismatch: {0}")]
    AllocationMismatch(String),
}

/// One UAV action for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    /// Hover at `zone` and serve traffic.
    Cover {
        /// Zone being covered.
        zone: usize,
    },
    /// Move along the link `from -> to`.
    Travel {
        /// Zone the step starts at.
        from: usize,
        /// Zone the step ends at.
        to: usize,
    },
    /// Swap batteries at the recharge site `zone`.
    Recharge {
        /// Recharge site zone.
        zone: usize,
    },
}

impl Action {
    /// Zone the UAV must occupy when the step starts.
    pub fn start_zone(&self) -> usize {
        match *self {
            Action::Cover { zone } | Action::Recharge { zone } => zone,
            Action::Travel { from, .. } => from,
        }
    }

    /// Zone the UAV occupies when the step ends.
    pub fn end_zone(&self) -> usize {
        match *self {
            Action::Cover { zone } | Action::Recharge { zone } => zone,
            Action::Travel { to, .. } => to,
        }
    }

    /// True for [`Action::Recharge`].
    pub fn is_recharge(&self) -> bool {
        matches!(self, Action::Recharge { .. })
    }
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    uav_id: usize,
    step: usize,
    action: Action,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    num_uavs: usize,
    num_steps: usize,
    actions: Vec<PlanRecord>,
}

/// A complete action schedule: one action per UAV per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    num_uavs: usize,
    num_steps: usize,
    actions: Vec<Action>,
}

impl Plan {
    /// Builds a plan from a UAV-major action vector
    /// (`actions[d * num_steps + k]`).
    pub fn from_actions(num_uavs: usize, num_steps: usize, actions: Vec<Action>) -> Self {
        assert_eq!(actions.len(), num_uavs * num_steps);
        Self {
            num_uavs,
            num_steps,
            actions,
        }
    }

    /// Number of UAVs.
    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    /// Number of steps.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Action of UAV `d` at step `k`.
    pub fn action(&self, d: usize, k: usize) -> Action {
        self.actions[d * self.num_steps + k]
    }

    /// All actions of UAV `d` in step order.
    pub fn uav_actions(&self, d: usize) -> &[Action] {
        &self.actions[d * self.num_steps..(d + 1) * self.num_steps]
    }

    /// Writes the plan as pretty-printed JSON records
    /// `(uav_id, step, action)`.
    pub fn to_json_writer<W: Write>(&self, mut w: W) -> Result<(), std::io::Error> {
        let file = PlanFile {
            num_uavs: self.num_uavs,
            num_steps: self.num_steps,
            actions: (0..self.num_uavs)
                .flat_map(|d| {
                    (0..self.num_steps).map(move |k| (d, k))
                })
                .map(|(d, k)| PlanRecord {
                    uav_id: d,
                    step: k,
                    action: self.action(d, k),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut w, &file)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a plan from JSON, requiring exactly one record per
    /// (UAV, step) pair.
    pub fn from_json_reader<R: Read>(r: R) -> Result<Self, std::io::Error> {
        let file: PlanFile = serde_json::from_reader(r)?;
        let invalid = |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
        let mut actions = vec![None; file.num_uavs * file.num_steps];
        for record in file.actions {
            if record.uav_id >= file.num_uavs || record.step >= file.num_steps {
                return Err(invalid(format!(
                    "record for uav {} step {} is out of bounds",
                    record.uav_id, record.step
                )));
            }
            let slot = &mut actions[record.uav_id * file.num_steps + record.step];
            if slot.is_some() {
                return Err(invalid(format!(
                    "duplicate record for uav {} step {}",
                    record.uav_id, record.step
                )));
            }
            *slot = Some(record.action);
        }
        let actions: Option<Vec<Action>> = actions.into_iter().collect();
        match actions {
            Some(actions) => Ok(Self::from_actions(file.num_uavs, file.num_steps, actions)),
            None => Err(invalid("missing (uav, step) records".into())),
        }
    }
}

/// Spectrum fractions `phi(a, d, k, z)`, sparse over the nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    num_areas: usize,
    num_uavs: usize,
    num_steps: usize,
    num_zones: usize,
    entries: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl AllocationMatrix {
    /// Empty (all-zero) allocation with the given dimensions.
    pub fn new(num_areas: usize, num_uavs: usize, num_steps: usize, num_zones: usize) -> Self {
        Self {
            num_areas,
            num_uavs,
            num_steps,
            num_zones,
            entries: BTreeMap::new(),
        }
    }

    /// Number of areas.
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    /// Number of UAVs.
    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    /// Number of steps.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Number of zones.
    pub fn num_zones(&self) -> usize {
        self.num_zones
    }

    /// The fraction for (area, uav, step, zone); zero when absent.
    pub fn get(&self, a: usize, d: usize, k: usize, z: usize) -> f64 {
        self.entries.get(&(a, d, k, z)).copied().unwrap_or(0.0)
    }

    /// Sets a fraction; zero removes the entry.
    pub fn set(&mut self, a: usize, d: usize, k: usize, z: usize, phi: f64) {
        assert!(
            a < self.num_areas && d < self.num_uavs && k < self.num_steps && z < self.num_zones,
            "allocation index out of bounds"
        );
        assert!((0.0..=1.0 + 1e-9).contains(&phi), "phi out of [0, 1]: {phi}");
        if phi == 0.0 {
            self.entries.remove(&(a, d, k, z));
        } else {
            self.entries.insert((a, d, k, z), phi);
        }
    }

    /// Nonzero entries in (area, uav, step, zone) order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&key, &phi)| (key, phi))
    }

    /// Number of nonzero entries.
    pub fn num_nonzero(&self) -> usize {
        self.entries.len()
    }

    /// Writes the nonzero entries as CSV with header
    /// `area_id,uav_id,step,zone_id,phi`.
    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["area_id", "uav_id", "step", "zone_id", "phi"])?;
        for ((a, d, k, z), phi) in self.iter() {
            wtr.write_record(&[
                a.to_string(),
                d.to_string(),
                k.to_string(),
                z.to_string(),
                format!("{phi}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads an allocation from CSV; dimensions come from the caller since
    /// the file stores only nonzero entries.
    pub fn from_csv_reader<R: Read>(
        r: R,
        num_areas: usize,
        num_uavs: usize,
        num_steps: usize,
        num_zones: usize,
    ) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut m = Self::new(num_areas, num_uavs, num_steps, num_zones);
        for record in rdr.deserialize() {
            let (a, d, k, z, phi): (usize, usize, usize, usize, f64) = record?;
            m.set(a, d, k, z, phi);
        }
        Ok(m)
    }
}

/// First step of the rolling window ending at `k`.
pub(crate) fn window_start(k: usize, horizon: usize) -> usize {
    k.saturating_sub(horizon)
}

/// Divisor of the rolling average ending at `k`. The default divides by
/// the number of summed steps (windows truncate at step 0); the literal
/// variant always divides by the horizon even when the window is shorter.
pub(crate) fn window_divisor(k: usize, horizon: usize, literal_divisor: bool) -> f64 {
    if literal_divisor {
        horizon as f64
    } else {
        (k - window_start(k, horizon) + 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_serialize_with_tagged_type_and_zone_fields() {
        let cover = serde_json::to_value(Action::Cover { zone: 3 }).unwrap();
        assert_eq!(cover, serde_json::json!({"type": "cover", "zone": 3}));
        let travel = serde_json::to_value(Action::Travel { from: 1, to: 2 }).unwrap();
        assert_eq!(travel, serde_json::json!({"type": "travel", "from": 1, "to": 2}));
        let recharge = serde_json::to_value(Action::Recharge { zone: 0 }).unwrap();
        assert_eq!(recharge, serde_json::json!({"type": "recharge", "zone": 0}));
    }

    #[test]
    fn plan_json_round_trips_and_rejects_duplicates() {
        let plan = Plan::from_actions(
            1,
            3,
            vec![
                Action::Cover { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Recharge { zone: 1 },
            ],
        );
        let mut buf = Vec::new();
        plan.to_json_writer(&mut buf).unwrap();
        let back = Plan::from_json_reader(buf.as_slice()).unwrap();
        assert_eq!(plan, back);

        let text = String::from_utf8(buf).unwrap();
        let duplicated = text.replace(
            "\"step\": 2",
            "\"step\": 1",
        );
        assert!(Plan::from_json_reader(duplicated.as_bytes()).is_err());
    }

    #[test]
    fn allocation_round_trips_through_csv() {
        let mut m = AllocationMatrix::new(2, 1, 2, 2);
        m.set(0, 0, 0, 1, 0.25);
        m.set(1, 0, 1, 0, 1.0 / 3.0);
        let mut buf = Vec::new();
        m.to_csv_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("area_id,uav_id,step,zone_id,phi\n"));
        let back = AllocationMatrix::from_csv_reader(buf.as_slice(), 2, 1, 2, 2).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rolling_windows_truncate_at_the_start() {
        assert_eq!(window_start(0, 5), 0);
        assert_eq!(window_start(3, 5), 0);
        assert_eq!(window_start(7, 5), 2);
        assert_eq!(window_divisor(0, 5, false), 1.0);
        assert_eq!(window_divisor(3, 5, false), 4.0);
        assert_eq!(window_divisor(7, 5, false), 6.0);
        assert_eq!(window_divisor(0, 5, true), 5.0);
        assert_eq!(window_divisor(7, 5, true), 5.0);
    }
}
