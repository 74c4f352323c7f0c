//! Plan feasibility checking and throughput / fairness metrics.
//!
//! [`check_feasibility`] referees a plan against the movement rules and
//! returns every violation it finds. [`evaluate_plan`] turns a feasible
//! plan plus a spectrum allocation into per-user throughput series, the
//! max-min objective, fairness and mission statistics. Both are
//! deliberately independent of the optimizer so they can referee its
//! output.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkbudget::ThroughputMatrix;
use crate::mobility::VehicleCounts;
use crate::optimizer::{window_divisor, window_start, Action, AllocationMatrix, Plan};
use crate::scenario::Scenario;

/// Tolerance for spectrum capacity sums; covers LP solver dust.
const CAPACITY_TOLERANCE: f64 = 1e-6;

/// Why a metrics computation failed.
#[derive(Debug, Error)]
pub enum EvaluateError {
    /// Inputs disagree about problem dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The allocation is inconsistent with the plan or the rate matrix.
    #[error("allocation mismatch: {0}")]
    AllocationMismatch(String),
    /// Every (area, step) pair is empty, so the max-min objective ranges
    /// over nothing.
    #[error("objective undefined: every area has zero vehicles at every step")]
    ObjectiveUndefined,
    /// Fairness index over an empty or all-zero population.
    #[error("fairness index undefined: {0}")]
    JainUndefined(String),
    /// I/O failure writing or reading metrics files.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// CSV failure writing or reading metrics files.
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// JSON failure writing or reading metrics summaries.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The movement rule a plan violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    /// Plan dimensions disagree with the scenario.
    PlanShape,
    /// An action names a zone outside the scenario.
    ZoneBounds,
    /// A travel action uses a pair of zones that is not a link.
    TravelLink,
    /// A recharge action happens away from a recharge site.
    RechargeSite,
    /// An action starts at a zone other than where the previous step
    /// ended (step 0 must start at the home zone).
    Continuity,
    /// More than battery-capacity consecutive steps without a recharge.
    BatteryWindow,
}

impl ViolationRule {
    /// Stable rule name.
    pub fn name(self) -> &'static str {
        match self {
            ViolationRule::PlanShape => "plan-shape",
            ViolationRule::ZoneBounds => "zone-bounds",
            ViolationRule::TravelLink => "travel-requires-link",
            ViolationRule::RechargeSite => "recharge-requires-site",
            ViolationRule::Continuity => "movement-continuity",
            ViolationRule::BatteryWindow => "battery-window",
        }
    }
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One feasibility violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending UAV.
    pub uav: usize,
    /// Offending step.
    pub step: usize,
    /// Broken rule.
    pub rule: ViolationRule,
    /// Human-readable description.
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "uav {} step {}: {}: {}",
            self.uav, self.step, self.rule, self.detail
        )
    }
}

/// Checks a plan against the movement rules and returns every violation.
///
/// The rules are exactly the integral constraint families: one action per
/// step (guaranteed by the plan representation), continuity against the
/// previous step's end zone (step 0 chains to the home zone), travel only
/// over links, recharging only at sites, and no more than
/// battery-capacity consecutive non-recharge steps. Battery overruns are
/// reported once per run, at the first offending step.
pub fn check_feasibility(plan: &Plan, s: &Scenario) -> Vec<Violation> {
    let mut violations = Vec::new();
    if plan.num_uavs() != s.uavs.len() || plan.num_steps() != s.num_steps {
        violations.push(Violation {
            uav: 0,
            step: 0,
            rule: ViolationRule::PlanShape,
            detail: format!(
                "plan is {} uavs x {} steps, scenario needs {} x {}",
                plan.num_uavs(),
                plan.num_steps(),
                s.uavs.len(),
                s.num_steps
            ),
        });
        return violations;
    }
    let num_zones = s.zones.len();
    for (d, uav) in s.uavs.iter().enumerate() {
        let mut end_of_previous = uav.home_zone;
        let mut since_recharge = 0usize;
        for k in 0..plan.num_steps() {
            let action = plan.action(d, k);
            let (start, end) = (action.start_zone(), action.end_zone());
            if start >= num_zones || end >= num_zones {
                violations.push(Violation {
                    uav: d,
                    step: k,
                    rule: ViolationRule::ZoneBounds,
                    detail: format!("action names zone {} of {num_zones}", start.max(end)),
                });
                end_of_previous = end.min(num_zones.saturating_sub(1));
                continue;
            }
            if start != end_of_previous {
                let detail = if k == 0 {
                    format!("step 0 starts at zone {start}, not at home zone {end_of_previous}")
                } else {
                    format!(
                        "action starts at zone {start} but step {} ended at zone {end_of_previous}",
                        k - 1
                    )
                };
                violations.push(Violation {
                    uav: d,
                    step: k,
                    rule: ViolationRule::Continuity,
                    detail,
                });
            }
            match action {
                Action::Travel { from, to } => {
                    if !s.has_link(from, to) {
                        violations.push(Violation {
                            uav: d,
                            step: k,
                            rule: ViolationRule::TravelLink,
                            detail: format!("no link from zone {from} to zone {to}"),
                        });
                    }
                }
                Action::Recharge { zone } => {
                    if !s.is_recharge_site(zone) {
                        violations.push(Violation {
                            uav: d,
                            step: k,
                            rule: ViolationRule::RechargeSite,
                            detail: format!("zone {zone} is not a recharge site"),
                        });
                    }
                }
                Action::Cover { .. } => {}
            }
            if action.is_recharge() {
                since_recharge = 0;
            } else {
                since_recharge += 1;
                if since_recharge == uav.battery_capacity_steps + 1 {
                    violations.push(Violation {
                        uav: d,
                        step: k,
                        rule: ViolationRule::BatteryWindow,
                        detail: format!(
                            "step {k} is the {since_recharge}th consecutive step without \
                             recharging (battery allows {})",
                            uav.battery_capacity_steps
                        ),
                    });
                }
            }
            end_of_previous = end;
        }
    }
    violations
}

/// Sum rate delivered to each (area, step), in bps, from the allocation.
pub(crate) fn delivered_rates(alloc: &AllocationMatrix, t: &ThroughputMatrix) -> Vec<f64> {
    let num_steps = alloc.num_steps();
    let mut delivered = vec![0.0; alloc.num_areas() * num_steps];
    for ((a, _, k, z), phi) in alloc.iter() {
        delivered[a * num_steps + k] += phi * t.get(a, z);
    }
    delivered
}

/// Per-user throughput series derived from delivered rates.
pub(crate) struct RateSeries {
    /// Instantaneous per-user rate, area-major (`[a * K + k]`).
    pub mu: Vec<f64>,
    /// Rolling average of `mu` over the trailing window.
    pub mubar: Vec<f64>,
    /// Minimum of `mubar` over the populated (area, step) pairs.
    pub objective: f64,
}

/// Computes per-user rates, their rolling averages, and the max-min
/// objective value. Empty (area, step) pairs have `mu = 0` and are
/// excluded from the minimum; returns `None` when every pair is empty.
pub(crate) fn rate_series(
    delivered: &[f64],
    n: &VehicleCounts,
    horizon: usize,
    literal_divisor: bool,
) -> Option<RateSeries> {
    let num_areas = n.num_areas();
    let num_steps = n.num_steps();
    assert_eq!(delivered.len(), num_areas * num_steps);
    let mut mu = vec![0.0; num_areas * num_steps];
    for a in 0..num_areas {
        for k in 0..num_steps {
            let users = n.get(a, k);
            if users > 0 {
                mu[a * num_steps + k] = delivered[a * num_steps + k] / f64::from(users);
            }
        }
    }
    let mut mubar = vec![0.0; num_areas * num_steps];
    let mut objective: Option<f64> = None;
    for a in 0..num_areas {
        for k in 0..num_steps {
            let sum: f64 = (window_start(k, horizon)..=k)
                .map(|h| mu[a * num_steps + h])
                .sum();
            let avg = sum / window_divisor(k, horizon, literal_divisor);
            mubar[a * num_steps + k] = avg;
            if n.get(a, k) > 0 {
                objective = Some(match objective {
                    Some(current) => current.min(avg),
                    None => avg,
                });
            }
        }
    }
    objective.map(|objective| RateSeries {
        mu,
        mubar,
        objective,
    })
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`.
///
/// Defined for a non-empty, non-negative population with at least one
/// positive value; 1 means perfectly even, `1/n` means one receiver
/// takes everything.
pub fn jain_index(values: &[f64]) -> Result<f64, EvaluateError> {
    if values.is_empty() {
        return Err(EvaluateError::JainUndefined("empty population".into()));
    }
    if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(EvaluateError::JainUndefined(format!(
            "population contains {v}"
        )));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(EvaluateError::JainUndefined("all values are zero".into()));
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

/// How the fleet spent its steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    /// Steps spent covering.
    pub cover_steps: usize,
    /// Steps spent traveling.
    pub travel_steps: usize,
    /// Steps spent recharging.
    pub recharge_steps: usize,
}

/// Mission statistics. A mission is a maximal run of consecutive
/// non-recharge steps of one UAV; a trailing run still counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionStats {
    /// Total missions across the fleet.
    pub count: usize,
    /// Every mission duration in steps, UAV-major in plan order.
    pub durations: Vec<usize>,
    /// Mean mission duration in steps; 0 when there are no missions.
    pub mean_duration_steps: f64,
    /// Longest mission in steps.
    pub max_duration_steps: usize,
    /// Mean battery charge replenished per recharge event, measured in
    /// steps of use since the previous recharge; `None` when the plan
    /// never recharges.
    pub mean_replenished_steps: Option<f64>,
}

/// Full evaluation of one plan + allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    num_areas: usize,
    num_steps: usize,
    mu: Vec<f64>,
    mubar: Vec<f64>,
    /// Max-min objective: the worst rolling per-user average over the
    /// populated (area, step) pairs, in bps.
    pub objective_bps: f64,
    /// Sum rate delivered to populated areas, per step, in bps.
    pub per_step_total_bps: Vec<f64>,
    /// Mean of the per-step sum rates, in bps.
    pub mean_total_bps: f64,
    /// Bits delivered to each area over the whole horizon.
    pub per_area_total_bits: Vec<f64>,
    /// Bits delivered overall.
    pub total_bits: f64,
    /// Jain fairness of `per_area_total_bits`; `None` when nothing was
    /// delivered.
    pub jain: Option<f64>,
    /// How the fleet spent its steps.
    pub action_breakdown: ActionBreakdown,
    /// Mission statistics.
    pub missions: MissionStats,
}

/// Compact, serializable subset of [`Metrics`] for reports and
/// comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Max-min objective in bps.
    pub objective_bps: f64,
    /// Mean per-step sum rate in bps.
    pub mean_total_bps: f64,
    /// Bits delivered overall.
    pub total_bits: f64,
    /// Jain fairness of per-area delivered bits.
    pub jain: Option<f64>,
    /// Step usage.
    pub action_breakdown: ActionBreakdown,
    /// Mission statistics.
    pub missions: MissionStats,
}

impl MetricsSummary {
    /// Writes the summary as pretty-printed JSON.
    pub fn to_json_writer<W: Write>(&self, mut w: W) -> Result<(), EvaluateError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a summary from JSON.
    pub fn from_json_reader<R: Read>(r: R) -> Result<Self, EvaluateError> {
        Ok(serde_json::from_reader(r)?)
    }
}

impl Metrics {
    /// Instantaneous per-user rate for (area, step), in bps.
    pub fn mu(&self, a: usize, k: usize) -> f64 {
        self.mu[a * self.num_steps + k]
    }

    /// Rolling per-user average for (area, step), in bps.
    pub fn mubar(&self, a: usize, k: usize) -> f64 {
        self.mubar[a * self.num_steps + k]
    }

    /// Number of areas.
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    /// Number of steps.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// The serializable summary.
    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            objective_bps: self.objective_bps,
            mean_total_bps: self.mean_total_bps,
            total_bits: self.total_bits,
            jain: self.jain,
            action_breakdown: self.action_breakdown,
            missions: self.missions.clone(),
        }
    }

    /// Writes the per-step series as CSV with header
    /// `step,total_bps,min_mubar_bps`. The minimum is over areas
    /// populated at that step; 0 when every area is empty.
    pub fn write_step_csv<W: Write>(
        &self,
        w: W,
        n: &VehicleCounts,
    ) -> Result<(), EvaluateError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "total_bps", "min_mubar_bps"])?;
        for k in 0..self.num_steps {
            let min_mubar = (0..self.num_areas)
                .filter(|&a| n.get(a, k) > 0)
                .map(|a| self.mubar(a, k))
                .fold(f64::INFINITY, f64::min);
            let min_mubar = if min_mubar.is_finite() { min_mubar } else { 0.0 };
            wtr.write_record(&[
                k.to_string(),
                format!("{}", self.per_step_total_bps[k]),
                format!("{min_mubar}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes per-area delivered bits as CSV with header
    /// `area_id,total_bits`.
    pub fn write_area_csv<W: Write>(&self, w: W) -> Result<(), EvaluateError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["area_id", "total_bits"])?;
        for (a, bits) in self.per_area_total_bits.iter().enumerate() {
            wtr.write_record(&[a.to_string(), format!("{bits}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn mission_stats(plan: &Plan) -> MissionStats {
    let mut durations = Vec::new();
    let mut replenished = Vec::new();
    for d in 0..plan.num_uavs() {
        let mut run = 0usize;
        for action in plan.uav_actions(d) {
            if action.is_recharge() {
                replenished.push(run);
                if run > 0 {
                    durations.push(run);
                }
                run = 0;
            } else {
                run += 1;
            }
        }
        if run > 0 {
            durations.push(run);
        }
    }
    let count = durations.len();
    let mean_duration_steps = if count == 0 {
        0.0
    } else {
        durations.iter().sum::<usize>() as f64 / count as f64
    };
    let max_duration_steps = durations.iter().copied().max().unwrap_or(0);
    let mean_replenished_steps = if replenished.is_empty() {
        None
    } else {
        Some(replenished.iter().sum::<usize>() as f64 / replenished.len() as f64)
    };
    MissionStats {
        count,
        durations,
        mean_duration_steps,
        max_duration_steps,
        mean_replenished_steps,
    }
}

/// Evaluates a plan and its spectrum allocation.
///
/// Expects a feasible plan (referee with [`check_feasibility`] first) and
/// an allocation consistent with it: spectrum only flows where the plan
/// covers and the rate is positive, within the per-UAV and per-zone
/// capacities. Rates delivered to areas while they are empty serve
/// nobody and count for nothing.
pub fn evaluate_plan(
    plan: &Plan,
    alloc: &AllocationMatrix,
    s: &Scenario,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
) -> Result<Metrics, EvaluateError> {
    let num_areas = s.areas.len();
    let num_zones = s.zones.len();
    let num_steps = s.num_steps;
    let num_uavs = s.uavs.len();
    if plan.num_uavs() != num_uavs || plan.num_steps() != num_steps {
        return Err(EvaluateError::DimensionMismatch(format!(
            "plan is {} uavs x {} steps, scenario needs {num_uavs} x {num_steps}",
            plan.num_uavs(),
            plan.num_steps()
        )));
    }
    if alloc.num_areas() != num_areas
        || alloc.num_uavs() != num_uavs
        || alloc.num_steps() != num_steps
        || alloc.num_zones() != num_zones
    {
        return Err(EvaluateError::DimensionMismatch(format!(
            "allocation is {}x{}x{}x{}, scenario needs {num_areas}x{num_uavs}x{num_steps}x{num_zones}",
            alloc.num_areas(),
            alloc.num_uavs(),
            alloc.num_steps(),
            alloc.num_zones()
        )));
    }
    if t.num_areas() != num_areas || t.num_zones() != num_zones {
        return Err(EvaluateError::DimensionMismatch(format!(
            "throughput matrix is {}x{}, scenario needs {num_areas}x{num_zones}",
            t.num_areas(),
            t.num_zones()
        )));
    }
    if n.num_areas() != num_areas || n.num_steps() != num_steps {
        return Err(EvaluateError::DimensionMismatch(format!(
            "vehicle counts are {}x{}, scenario needs {num_areas}x{num_steps}",
            n.num_areas(),
            n.num_steps()
        )));
    }
    if horizon == 0 {
        return Err(EvaluateError::DimensionMismatch(
            "horizon must be at least 1 step".into(),
        ));
    }

    // Spectrum must flow only from covering UAVs over positive-rate
    // links, within per-UAV and per-zone capacity.
    let mut uav_totals = vec![0.0; num_uavs * num_steps];
    let mut zone_totals = vec![0.0; num_zones * num_steps];
    for ((a, d, k, z), phi) in alloc.iter() {
        if plan.action(d, k) != (Action::Cover { zone: z }) {
            return Err(EvaluateError::AllocationMismatch(format!(
                "phi({a}, {d}, {k}, {z}) = {phi} but uav {d} does not cover zone {z} at step {k}"
            )));
        }
        if t.get(a, z) <= 0.0 {
            return Err(EvaluateError::AllocationMismatch(format!(
                "phi({a}, {d}, {k}, {z}) = {phi} but area {a} gets zero rate from zone {z}"
            )));
        }
        uav_totals[d * num_steps + k] += phi;
        zone_totals[z * num_steps + k] += phi;
    }
    for d in 0..num_uavs {
        for k in 0..num_steps {
            if uav_totals[d * num_steps + k] > 1.0 + CAPACITY_TOLERANCE {
                return Err(EvaluateError::AllocationMismatch(format!(
                    "uav {d} hands out {} spectrum at step {k}",
                    uav_totals[d * num_steps + k]
                )));
            }
        }
    }
    for z in 0..num_zones {
        for k in 0..num_steps {
            if zone_totals[z * num_steps + k] > 1.0 + CAPACITY_TOLERANCE {
                return Err(EvaluateError::AllocationMismatch(format!(
                    "zone {z} hands out {} spectrum at step {k}",
                    zone_totals[z * num_steps + k]
                )));
            }
        }
    }

    let delivered = delivered_rates(alloc, t);
    let series =
        rate_series(&delivered, n, horizon, false).ok_or(EvaluateError::ObjectiveUndefined)?;

    let mut per_step_total_bps = vec![0.0; num_steps];
    for a in 0..num_areas {
        for k in 0..num_steps {
            if n.get(a, k) > 0 {
                per_step_total_bps[k] += delivered[a * num_steps + k];
            }
        }
    }
    let mean_total_bps = per_step_total_bps.iter().sum::<f64>() / num_steps.max(1) as f64;
    let per_area_total_bits: Vec<f64> = (0..num_areas)
        .map(|a| {
            (0..num_steps)
                .filter(|&k| n.get(a, k) > 0)
                .map(|k| delivered[a * num_steps + k] * s.step_duration_s)
                .sum()
        })
        .collect();
    let total_bits = per_area_total_bits.iter().sum();
    let jain = jain_index(&per_area_total_bits).ok();

    let mut action_breakdown = ActionBreakdown {
        cover_steps: 0,
        travel_steps: 0,
        recharge_steps: 0,
    };
    for d in 0..num_uavs {
        for action in plan.uav_actions(d) {
            match action {
                Action::Cover { .. } => action_breakdown.cover_steps += 1,
                Action::Travel { .. } => action_breakdown.travel_steps += 1,
                Action::Recharge { .. } => action_breakdown.recharge_steps += 1,
            }
        }
    }

    Ok(Metrics {
        num_areas,
        num_steps,
        mu: series.mu,
        mubar: series.mubar,
        objective_bps: series.objective,
        per_step_total_bps,
        mean_total_bps,
        per_area_total_bits,
        total_bits,
        jain,
        action_breakdown,
        missions: mission_stats(plan),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfix::{full_matrix, tiny_scenario, uniform_counts};
    use approx::assert_abs_diff_eq;

    fn plan_of(actions: Vec<Action>) -> Plan {
        Plan::from_actions(1, actions.len(), actions)
    }

    #[test]
    fn feasible_plan_has_no_violations() {
        let s = tiny_scenario();
        let plan = plan_of(vec![
            Action::Travel { from: 0, to: 1 },
            Action::Travel { from: 1, to: 0 },
            Action::Recharge { zone: 0 },
        ]);
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn travel_over_non_link_is_flagged_with_the_travel_rule() {
        let s = tiny_scenario();
        let plan = plan_of(vec![
            Action::Travel { from: 0, to: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, ViolationRule::TravelLink);
        assert_eq!(violations[0].step, 0);
    }

    #[test]
    fn teleporting_breaks_continuity() {
        let s = tiny_scenario();
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 1 },
            Action::Recharge { zone: 0 },
        ]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 2);
        assert!(violations
            .iter()
            .all(|v| v.rule == ViolationRule::Continuity));
        assert_eq!(violations[0].step, 1);
        assert_eq!(violations[1].step, 2);
    }

    #[test]
    fn recharging_away_from_a_site_is_flagged() {
        let s = tiny_scenario();
        let plan = plan_of(vec![
            Action::Travel { from: 0, to: 1 },
            Action::Recharge { zone: 1 },
            Action::Travel { from: 1, to: 0 },
        ]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, ViolationRule::RechargeSite);
        assert_eq!(violations[0].step, 1);
    }

    #[test]
    fn battery_overrun_is_reported_once_at_the_first_offending_step() {
        let mut s = tiny_scenario();
        s.num_steps = 6;
        let plan = plan_of(vec![Action::Cover { zone: 0 }; 6]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, ViolationRule::BatteryWindow);
        assert_eq!(violations[0].step, 2);
    }

    #[test]
    fn battery_runs_after_a_recharge_are_checked_again() {
        let mut s = tiny_scenario();
        s.num_steps = 7;
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
        ]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, ViolationRule::BatteryWindow);
        assert_eq!(violations[0].step, 5);
    }

    #[test]
    fn wrong_plan_shape_short_circuits() {
        let s = tiny_scenario();
        let plan = plan_of(vec![Action::Cover { zone: 0 }]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, ViolationRule::PlanShape);
    }

    #[test]
    fn metrics_match_hand_computed_values() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        let mut alloc = AllocationMatrix::new(2, 1, 3, 2);
        for k in 0..2 {
            alloc.set(0, 0, k, 0, 1.0 / 3.0);
            alloc.set(1, 0, k, 0, 2.0 / 3.0);
        }
        let m = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap();

        // Area 0 receives 1e6/3 bps shared by 5 users.
        assert_abs_diff_eq!(m.mu(0, 0), 1e6 / 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.mu(1, 1), 2e6 / 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.mu(0, 2), 0.0);
        // The window at step 2 averages steps 0..=2.
        assert_abs_diff_eq!(m.mubar(0, 2), 2e6 / 45.0, epsilon = 1e-9);
        // The worst rolling average is area 0 at step 2.
        assert_abs_diff_eq!(m.objective_bps, 2e6 / 45.0, epsilon = 1e-9);
        // Totals: 1e6 bps flows whenever the UAV covers.
        assert_abs_diff_eq!(m.per_step_total_bps[0], 1e6, epsilon = 1e-9);
        assert_abs_diff_eq!(m.per_step_total_bps[2], 0.0);
        assert_abs_diff_eq!(m.mean_total_bps, 2e6 / 3.0, epsilon = 1e-9);
        // Bits: rate times 600 s per step over two covering steps.
        assert_abs_diff_eq!(m.per_area_total_bits[0], 2.0 * 600.0 * 1e6 / 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(m.total_bits, 2.0 * 600.0 * 1e6, epsilon = 1e-3);
        // Jain over per-area bits (1/3, 2/3 shares): (1)^2 / (2 * 5/9).
        assert_abs_diff_eq!(m.jain.unwrap(), 0.9, epsilon = 1e-12);
        assert_eq!(
            m.action_breakdown,
            ActionBreakdown {
                cover_steps: 2,
                travel_steps: 0,
                recharge_steps: 1
            }
        );
    }

    #[test]
    fn mission_stats_split_on_recharges() {
        let mut s = tiny_scenario();
        s.num_steps = 5;
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        assert!(check_feasibility(&plan, &s).is_empty());
        let stats = mission_stats(&plan);
        assert_eq!(stats.count, 2);
        assert_eq!(stats.durations, vec![2, 1]);
        assert_abs_diff_eq!(stats.mean_duration_steps, 1.5);
        assert_eq!(stats.max_duration_steps, 2);
        assert_abs_diff_eq!(stats.mean_replenished_steps.unwrap(), 1.5);
    }

    #[test]
    fn trailing_missions_count_and_idle_plans_have_none() {
        let plan = plan_of(vec![
            Action::Recharge { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
        ]);
        let stats = mission_stats(&plan);
        assert_eq!(stats.durations, vec![2]);
        assert_eq!(stats.mean_replenished_steps, Some(0.0));

        let idle = plan_of(vec![Action::Recharge { zone: 0 }; 3]);
        let stats = mission_stats(&idle);
        assert_eq!(stats.count, 0);
        assert_eq!(stats.mean_duration_steps, 0.0);
        assert_eq!(stats.mean_replenished_steps, Some(0.0));
    }

    #[test]
    fn allocation_on_a_non_cover_step_is_rejected() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Travel { from: 0, to: 1 },
            Action::Cover { zone: 1 },
        ]);
        let mut alloc = AllocationMatrix::new(2, 1, 3, 2);
        alloc.set(0, 0, 1, 0, 0.5);
        let err = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap_err();
        assert!(matches!(err, EvaluateError::AllocationMismatch(_)));
    }

    #[test]
    fn overcommitted_zone_spectrum_is_rejected() {
        let s = {
            let mut s = tiny_scenario();
            s.uavs.push(crate::scenario::Uav {
                id: 1,
                battery_capacity_steps: 2,
                home_zone: 0,
            });
            s
        };
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = Plan::from_actions(
            2,
            3,
            vec![
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
            ],
        );
        let mut alloc = AllocationMatrix::new(2, 2, 3, 2);
        alloc.set(0, 0, 0, 0, 0.8);
        alloc.set(0, 1, 0, 0, 0.8);
        let err = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap_err();
        assert!(matches!(err, EvaluateError::AllocationMismatch(_)));
    }

    #[test]
    fn empty_steps_do_not_drag_the_objective_down() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        // Area 1 is empty at every step; only area 0 constrains the
        // objective even though area 1 receives nothing.
        let n = VehicleCounts::from_rows(2, 3, vec![5, 5, 5, 0, 0, 0]);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
        ]);
        let mut alloc = AllocationMatrix::new(2, 1, 3, 2);
        for k in 0..3 {
            alloc.set(0, 0, k, 0, 1.0);
        }
        let m = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap();
        assert_abs_diff_eq!(m.objective_bps, 2e5, epsilon = 1e-9);
        assert!(m.jain.is_some());
    }

    #[test]
    fn all_empty_counts_are_rejected() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = VehicleCounts::zeros(2, 3);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        let alloc = AllocationMatrix::new(2, 1, 3, 2);
        let err = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap_err();
        assert!(matches!(err, EvaluateError::ObjectiveUndefined));
    }

    #[test]
    fn jain_index_matches_known_values() {
        assert_abs_diff_eq!(jain_index(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(jain_index(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert_abs_diff_eq!(
            jain_index(&[4.0, 5.0, 6.0]).unwrap(),
            225.0 / 231.0,
            epsilon = 1e-12
        );
        assert!(jain_index(&[]).is_err());
        assert!(jain_index(&[0.0, 0.0]).is_err());
        assert!(jain_index(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn csv_exports_have_the_expected_headers() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        let mut alloc = AllocationMatrix::new(2, 1, 3, 2);
        alloc.set(0, 0, 0, 0, 0.5);
        alloc.set(1, 0, 0, 0, 0.5);
        let m = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap();

        let mut buf = Vec::new();
        m.write_step_csv(&mut buf, &n).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,total_bps,min_mubar_bps\n"));
        assert_eq!(text.lines().count(), 4);

        let mut buf = Vec::new();
        m.write_area_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("area_id,total_bits\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn summary_round_trips_through_json() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Travel { from: 0, to: 1 },
            Action::Recharge { zone: 0 },
        ]);
        let violations = check_feasibility(&plan, &s);
        assert_eq!(violations.len(), 1, "travel away then recharge at 0 teleports");
        // Use a feasible plan instead.
        let plan = plan_of(vec![
            Action::Cover { zone: 0 },
            Action::Cover { zone: 0 },
            Action::Recharge { zone: 0 },
        ]);
        assert!(check_feasibility(&plan, &s).is_empty());
        let mut alloc = AllocationMatrix::new(2, 1, 3, 2);
        alloc.set(0, 0, 0, 0, 1.0);
        alloc.set(1, 0, 1, 0, 1.0);
        let m = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap();
        let summary = m.summary();
        let mut buf = Vec::new();
        summary.to_json_writer(&mut buf).unwrap();
        let back = MetricsSummary::from_json_reader(buf.as_slice()).unwrap();
        assert_eq!(summary, back);
    }
}
