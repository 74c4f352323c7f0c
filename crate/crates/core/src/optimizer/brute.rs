//! Exhaustive search for tiny instances.
//!
//! Enumerates every feasible action sequence per UAV, then every
//! combination across the fleet, and values each combination with the
//! optimal spectrum LP. Two collapses keep this tractable: sequences
//! with the same set of covered (step, zone) pairs are interchangeable
//! (the spectrum value depends only on that set, because co-covering
//! UAVs share one zone-wide unit of spectrum), so only one
//! representative per cover set survives; and values are memoized per
//! distinct union of cover sets.

use std::collections::{BTreeMap, BTreeSet};

use crate::linkbudget::ThroughputMatrix;
use crate::mobility::VehicleCounts;
use crate::scenario::Scenario;

use super::allocate::{allocate_spectrum, allocation_value_for_covers};
use super::{Action, OptimizeError, Plan};

/// Instance caps for [`brute_force_optimum`]; enumeration is exponential
/// beyond toy sizes.
#[derive(Debug, Clone, Copy)]
pub struct BruteForceLimits {
    /// Maximum fleet size.
    pub max_uavs: usize,
    /// Maximum zone count.
    pub max_zones: usize,
    /// Maximum step count.
    pub max_steps: usize,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        Self {
            max_uavs: 2,
            max_zones: 4,
            max_steps: 6,
        }
    }
}

/// One UAV's enumerated possibilities: each distinct cover set with its
/// first (in canonical enumeration order) realizing sequence.
struct UavChoices {
    cover_sets: Vec<Vec<(usize, usize)>>,
    representatives: Vec<Vec<Action>>,
}

fn enumerate_uav(s: &Scenario, d: usize) -> UavChoices {
    let battery = s.uavs[d].battery_capacity_steps;
    let num_steps = s.num_steps;
    let mut seen: BTreeSet<Vec<(usize, usize)>> = BTreeSet::new();
    let mut choices = UavChoices {
        cover_sets: Vec::new(),
        representatives: Vec::new(),
    };
    let mut seq: Vec<Action> = Vec::with_capacity(num_steps);
    let mut covers: Vec<(usize, usize)> = Vec::new();

    fn walk(
        s: &Scenario,
        battery: usize,
        num_steps: usize,
        zone: usize,
        used: usize,
        seq: &mut Vec<Action>,
        covers: &mut Vec<(usize, usize)>,
        seen: &mut BTreeSet<Vec<(usize, usize)>>,
        choices: &mut UavChoices,
    ) {
        let k = seq.len();
        if k == num_steps {
            let mut set = covers.clone();
            set.sort_unstable();
            if seen.insert(set.clone()) {
                choices.cover_sets.push(set);
                choices.representatives.push(seq.clone());
            }
            return;
        }
        if used < battery {
            seq.push(Action::Cover { zone });
            covers.push((k, zone));
            walk(s, battery, num_steps, zone, used + 1, seq, covers, seen, choices);
            covers.pop();
            seq.pop();
        }
        if s.is_recharge_site(zone) {
            seq.push(Action::Recharge { zone });
            walk(s, battery, num_steps, zone, 0, seq, covers, seen, choices);
            seq.pop();
        }
        if used < battery {
            for to in s.zone_neighbors(zone) {
                seq.push(Action::Travel { from: zone, to });
                walk(s, battery, num_steps, to, used + 1, seq, covers, seen, choices);
                seq.pop();
            }
        }
    }

    walk(
        s,
        battery,
        num_steps,
        s.uavs[d].home_zone,
        0,
        &mut seq,
        &mut covers,
        &mut seen,
        &mut choices,
    );
    choices
}

/// Finds a true optimum of the integral planning problem by exhaustive
/// enumeration, for instances within `limits`.
///
/// Returns the first optimal plan in canonical enumeration order (cover
/// before recharge before travel, destinations ascending) and its
/// objective, computed by [`allocate_spectrum`] so it matches the
/// evaluator exactly.
pub fn brute_force_optimum(
    s: &Scenario,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
    limits: BruteForceLimits,
) -> Result<(Plan, f64), OptimizeError> {
    let checks = [
        ("uavs", s.uavs.len(), limits.max_uavs),
        ("zones", s.zones.len(), limits.max_zones),
        ("steps", s.num_steps, limits.max_steps),
    ];
    for (dimension, actual, limit) in checks {
        if actual > limit {
            return Err(OptimizeError::LimitExceeded {
                dimension,
                actual,
                limit,
            });
        }
    }

    let per_uav: Vec<UavChoices> = (0..s.uavs.len()).map(|d| enumerate_uav(s, d)).collect();
    if per_uav.iter().any(|c| c.cover_sets.is_empty()) {
        // Some UAV has no feasible sequence at all: no recharge site is
        // reachable within its battery, so every window overruns.
        return Err(OptimizeError::Infeasible {
            family: "battery-window".into(),
        });
    }

    let mut memo: BTreeMap<BTreeSet<(usize, usize)>, f64> = BTreeMap::new();
    let mut value_of = |union: BTreeSet<(usize, usize)>| -> Result<f64, OptimizeError> {
        if let Some(&v) = memo.get(&union) {
            return Ok(v);
        }
        let v = allocation_value_for_covers(&union, t, n, horizon)?;
        memo.insert(union, v);
        Ok(v)
    };

    // Walk the cartesian product of per-UAV choices in index order; the
    // first maximum wins so the result is deterministic.
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut picks = vec![0usize; per_uav.len()];
    loop {
        let mut union: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (d, &pick) in picks.iter().enumerate() {
            union.extend(per_uav[d].cover_sets[pick].iter().copied());
        }
        let value = value_of(union)?;
        let improves = match &best {
            Some((incumbent, _)) => value > *incumbent,
            None => true,
        };
        if improves {
            best = Some((value, picks.clone()));
        }

        // Advance the mixed-radix counter.
        let mut pos = per_uav.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            picks[pos] += 1;
            if picks[pos] < per_uav[pos].cover_sets.len() {
                break;
            }
            picks[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX || per_uav.is_empty() {
            break;
        }
    }

    let (search_value, picks) = best.expect("at least one combination exists");
    let mut actions = Vec::with_capacity(s.uavs.len() * s.num_steps);
    for (d, &pick) in picks.iter().enumerate() {
        actions.extend_from_slice(&per_uav[d].representatives[pick]);
    }
    let plan = Plan::from_actions(s.uavs.len(), s.num_steps, actions);

    let (_, objective) = allocate_spectrum(&plan, s, t, n, horizon)?;
    let scale = t.max_entry().max(1.0);
    if (objective - search_value).abs() > 1e-6 * scale {
        return Err(OptimizeError::SolutionRejected {
            family: "objective-epigraph".into(),
            detail: format!(
                "search valued the winning cover set at {search_value} bps but its \
                 allocation solves to {objective} bps"
            ),
        });
    }
    Ok((plan, objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::check_feasibility;
    use crate::testfix::{full_matrix, tiny_scenario, uniform_counts};
    use approx::assert_abs_diff_eq;

    #[test]
    fn the_tiny_instance_optimum_matches_the_hand_derivation() {
        // Battery 2 of 3 steps and no site at zone 1 mean zone 1 cannot
        // be covered and returned from; the only cover sets in play sit
        // over zone 0. Covering at steps {0, 1} splits the spectrum
        // evenly (equal rates, equal users), so each covered step yields
        // 1e5 bps per user and the binding window is the full three-step
        // average (1e5 + 1e5 + 0) / 3. Covering at {0, 2} instead leaves
        // the step-1 window at (1e5 + 0) / 2 = 5e4, which loses.
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let (plan, objective) =
            brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        assert_abs_diff_eq!(objective, 2e5 / 3.0, epsilon = 1e-6 * 2e5 / 3.0);
        assert_eq!(
            plan.uav_actions(0),
            &[
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
            ]
        );
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn the_relaxation_bounds_the_brute_force_optimum() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let m = crate::optimizer::build_model(&s, &t, &n, 2).unwrap();
        let relaxed = crate::optimizer::solve_relaxation(&m).unwrap();
        let (_, exact) = brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        assert!(relaxed.objective_bps >= exact - 1e-6 * exact.max(1.0));
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let (plan_a, obj_a) =
            brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        let (plan_b, obj_b) =
            brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        assert_eq!(plan_a, plan_b);
        assert_eq!(obj_a.to_bits(), obj_b.to_bits());
    }

    #[test]
    fn two_uav_fleets_split_the_work() {
        // With two UAVs and high battery, one covers while the other
        // covers another step; the optimum must be at least the single
        // UAV optimum.
        let mut s = tiny_scenario();
        s.uavs[0].battery_capacity_steps = 3;
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let (_, single) = brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        s.uavs.push(crate::scenario::Uav {
            id: 1,
            battery_capacity_steps: 3,
            home_zone: 0,
        });
        let (plan, double) =
            brute_force_optimum(&s, &t, &n, 2, BruteForceLimits::default()).unwrap();
        assert!(double >= single - 1e-6 * single.max(1.0));
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn oversized_instances_are_refused() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let limits = BruteForceLimits {
            max_uavs: 2,
            max_zones: 1,
            max_steps: 6,
        };
        match brute_force_optimum(&s, &t, &n, 2, limits).unwrap_err() {
            OptimizeError::LimitExceeded {
                dimension, actual, ..
            } => {
                assert_eq!(dimension, "zones");
                assert_eq!(actual, 2);
            }
            other => panic!("expected a limit error, got {other}"),
        }
    }
}
