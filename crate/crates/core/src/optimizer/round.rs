//! Greedy realization of a fractional schedule.
//!
//! Each UAV walks forward step by step, picking the feasible action with
//! the highest relaxed value. Feasible means the action continues from
//! the UAV's current zone, respects links and sites, and never strands
//! the battery: after the action, the hop distance to the nearest
//! recharge site must still fit in the remaining charge. That reachability
//! guard subsumes the plain "recharge before the battery empties" rule;
//! without it a UAV could wander one hop too far and have no feasible
//! future (the plain rule only notices once it is too late).
//!
//! Ties prefer covering over recharging over traveling, and travel
//! candidates are tried in ascending destination order, so exact ties
//! resolve deterministically.

use crate::evaluator::check_feasibility;
use crate::scenario::Scenario;

use super::relax::FractionalSolution;
use super::{Action, OptimizeError, Plan};

/// Rounds a fractional schedule to a feasible integral plan.
///
/// The result always passes [`check_feasibility`]; this is re-checked
/// before returning. The walk cannot get stuck as long as every UAV
/// starts at a recharge site: covering in place, backtracking toward a
/// site, and recharging together cover every state the guard allows.
pub fn round_solution(f: &FractionalSolution, s: &Scenario) -> Result<Plan, OptimizeError> {
    let num_uavs = s.uavs.len();
    let num_steps = s.num_steps;
    assert_eq!(f.num_uavs(), num_uavs, "solution does not match scenario");
    assert_eq!(f.num_steps(), num_steps, "solution does not match scenario");
    assert_eq!(f.num_zones(), s.zones.len(), "solution does not match scenario");

    let dist = s.distance_to_recharge();
    let mut actions = Vec::with_capacity(num_uavs * num_steps);
    for d in 0..num_uavs {
        let battery = s.uavs[d].battery_capacity_steps;
        let mut zone = s.uavs[d].home_zone;
        let mut used = 0usize;
        for k in 0..num_steps {
            let mut best: Option<(Action, f64)> = None;
            let consider = |action: Action, value: f64, best: &mut Option<(Action, f64)>| {
                let replace = match best {
                    Some((_, incumbent)) => value > *incumbent,
                    None => true,
                };
                if replace {
                    *best = Some((action, value));
                }
            };

            // A non-recharge action spends one charge step; it is allowed
            // only if a recharge site stays reachable afterwards.
            let spend_ok = |target: usize| {
                used + 1 <= battery && dist[target] <= battery - (used + 1)
            };
            if spend_ok(zone) {
                consider(Action::Cover { zone }, f.gamma(d, k, zone), &mut best);
            }
            if s.is_recharge_site(zone) {
                consider(Action::Recharge { zone }, f.rho(d, k, zone), &mut best);
            }
            for to in s.zone_neighbors(zone) {
                if spend_ok(to) {
                    consider(
                        Action::Travel { from: zone, to },
                        f.tau(d, k, zone, to),
                        &mut best,
                    );
                }
            }

            let (action, _) = best.ok_or(OptimizeError::BatteryTrap { uav: d, step: k })?;
            match action {
                Action::Recharge { .. } => used = 0,
                _ => used += 1,
            }
            zone = action.end_zone();
            actions.push(action);
        }
    }

    let plan = Plan::from_actions(num_uavs, num_steps, actions);
    let violations = check_feasibility(&plan, s);
    if let Some(v) = violations.first() {
        return Err(OptimizeError::RoundedPlanInfeasible(v.to_string()));
    }
    Ok(plan)
}
