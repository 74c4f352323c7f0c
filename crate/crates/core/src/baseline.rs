//! Least-recently-visited baseline planner.
//!
//! A deliberately simple reference policy: each UAV steers toward the
//! zone the fleet has not covered for the longest time, covers it,
//! picks the next stalest zone, and keeps flying. Only zones whose
//! round trip fits in one battery charge are candidates; anything
//! farther from a recharge site can never be covered by any policy.
//! Battery safety overrides everything: a UAV recharges when empty, and
//! an action that would leave the nearest recharge site out of reach is
//! replaced by a hop back toward the site (or a recharge when already
//! on one).
//!
//! Its spectrum use is equally simple: every covered zone splits its
//! spectrum evenly among the UAVs covering it, and each UAV splits its
//! share evenly among the areas it can reach.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::linkbudget::ThroughputMatrix;
use crate::optimizer::{Action, AllocationMatrix, Plan};
use crate::scenario::Scenario;

/// Why a baseline plan could not be produced.
#[derive(Debug, Error)]
pub enum BaselineError {
    /// A zone cannot reach any recharge site over the link graph.
    #[error("zone {zone} cannot reach any recharge site")]
    ZoneUnreachable {
        /// Offending zone.
        zone: usize,
    },
    /// No path between two zones.
    #[error("no path from zone {from} to zone {to}")]
    Disconnected {
        /// Start zone.
        from: usize,
        /// Goal zone.
        to: usize,
    },
}

/// Hop distances from `source` to every zone (`usize::MAX` when
/// unreachable).
fn bfs_distances(s: &Scenario, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; s.zones.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(z) = queue.pop_front() {
        for n in s.zone_neighbors(z) {
            if dist[n] == usize::MAX {
                dist[n] = dist[z] + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Shortest zone path from `from` to `to`, both endpoints included.
///
/// Among equally short paths, returns the lexicographically smallest
/// zone sequence: at every hop it takes the lowest-id neighbor that
/// still lies on a shortest path.
pub fn shortest_zone_path(
    s: &Scenario,
    from: usize,
    to: usize,
) -> Result<Vec<usize>, BaselineError> {
    let dist = bfs_distances(s, to);
    if dist[from] == usize::MAX {
        return Err(BaselineError::Disconnected { from, to });
    }
    let mut path = vec![from];
    let mut zone = from;
    while zone != to {
        let next = s
            .zone_neighbors(zone)
            .into_iter()
            .filter(|&n| dist[n] == dist[zone] - 1)
            .min()
            .expect("a shortest path always has a next hop");
        path.push(next);
        zone = next;
    }
    Ok(path)
}

/// Per-UAV progress of the baseline walk.
struct UavState {
    zone: usize,
    used: usize,
    waypoint: usize,
    /// Zones the UAV can patrol, ascending: reachable from its home and
    /// close enough to a recharge site that traveling there, covering,
    /// and returning fits in one battery charge.
    eligible: Vec<usize>,
}

/// Builds the least-recently-visited baseline plan.
///
/// Errors when any zone cannot reach a recharge site; such an instance
/// has no meaningful battery-safe patrol.
pub fn baseline_plan(s: &Scenario) -> Result<Plan, BaselineError> {
    let site_dist = s.distance_to_recharge();
    if let Some(zone) = site_dist.iter().position(|&d| d == usize::MAX) {
        return Err(BaselineError::ZoneUnreachable { zone });
    }

    let num_steps = s.num_steps;
    let num_uavs = s.uavs.len();
    // Step when each zone was last covered or recharged at; -1 is never.
    let mut last_visited = vec![-1i64; s.zones.len()];
    let pick_waypoint = |eligible: &[usize], last_visited: &[i64]| {
        eligible
            .iter()
            .copied()
            .min_by_key(|&z| (last_visited[z], z))
            .expect("a UAV's home site is always eligible")
    };

    let mut states: Vec<UavState> = s
        .uavs
        .iter()
        .map(|u| {
            let dist = bfs_distances(s, u.home_zone);
            // Covering z costs site_dist[z] hops out, one cover step, and
            // site_dist[z] hops back to the nearest site.
            let eligible: Vec<usize> = (0..s.zones.len())
                .filter(|&z| {
                    dist[z] != usize::MAX
                        && 2 * site_dist[z] + 1 <= u.battery_capacity_steps
                })
                .collect();
            UavState {
                zone: u.home_zone,
                used: 0,
                waypoint: pick_waypoint(&eligible, &last_visited),
                eligible,
            }
        })
        .collect();

    // Distance fields toward waypoints, shared across the fleet.
    let mut toward: BTreeMap<usize, Vec<usize>> = BTreeMap::new();

    let mut actions = vec![Action::Recharge { zone: 0 }; num_uavs * num_steps];
    for k in 0..num_steps {
        for d in 0..num_uavs {
            let battery = s.uavs[d].battery_capacity_steps;
            let state = &mut states[d];

            let action = if state.used == battery {
                // Empty battery; the safety invariant has kept the UAV on
                // a site.
                Action::Recharge { zone: state.zone }
            } else {
                let intended = if state.zone == state.waypoint {
                    Action::Cover { zone: state.zone }
                } else {
                    let dist = toward
                        .entry(state.waypoint)
                        .or_insert_with(|| bfs_distances(s, state.waypoint));
                    let next = s
                        .zone_neighbors(state.zone)
                        .into_iter()
                        .filter(|&n| dist[n] == dist[state.zone] - 1)
                        .min()
                        .expect("waypoints are reachable");
                    Action::Travel {
                        from: state.zone,
                        to: next,
                    }
                };
                // An action is safe when a recharge site stays within the
                // remaining charge afterwards; otherwise head back.
                if site_dist[intended.end_zone()] <= battery - (state.used + 1) {
                    intended
                } else if s.is_recharge_site(state.zone) {
                    Action::Recharge { zone: state.zone }
                } else {
                    let back = s
                        .zone_neighbors(state.zone)
                        .into_iter()
                        .filter(|&n| site_dist[n] == site_dist[state.zone] - 1)
                        .min()
                        .expect("every zone reaches a site");
                    Action::Travel {
                        from: state.zone,
                        to: back,
                    }
                }
            };

            match action {
                Action::Cover { zone } => {
                    state.used += 1;
                    last_visited[zone] = k as i64;
                    state.waypoint = pick_waypoint(&state.eligible, &last_visited);
                }
                Action::Recharge { zone } => {
                    state.used = 0;
                    last_visited[zone] = k as i64;
                }
                Action::Travel { to, .. } => {
                    state.used += 1;
                    state.zone = to;
                }
            }
            actions[d * num_steps + k] = action;
        }
    }
    Ok(Plan::from_actions(num_uavs, num_steps, actions))
}

/// Uniform spectrum split for a plan: each covered zone's unit of
/// spectrum divides evenly among its covering UAVs, and each UAV's share
/// divides evenly among the areas in range of the zone.
pub fn baseline_allocation(plan: &Plan, s: &Scenario, t: &ThroughputMatrix) -> AllocationMatrix {
    let num_steps = plan.num_steps();
    let mut alloc =
        AllocationMatrix::new(s.areas.len(), plan.num_uavs(), num_steps, s.zones.len());
    for k in 0..num_steps {
        let mut covering: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for d in 0..plan.num_uavs() {
            if let Action::Cover { zone } = plan.action(d, k) {
                covering.entry(zone).or_default().push(d);
            }
        }
        for (&z, uavs) in &covering {
            let areas: Vec<usize> = (0..s.areas.len()).filter(|&a| t.get(a, z) > 0.0).collect();
            if areas.is_empty() {
                continue;
            }
            let share = 1.0 / (areas.len() as f64 * uavs.len() as f64);
            for &d in uavs {
                for &a in &areas {
                    alloc.set(a, d, k, z, share);
                }
            }
        }
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{check_feasibility, evaluate_plan};
    use crate::scenario::{generate_scenario, GeneratorConfig};
    use crate::testfix::{full_matrix, line_scenario, uniform_counts};

    #[test]
    fn a_single_zone_is_covered_until_the_battery_empties() {
        let s = line_scenario(1, 3, 4);
        let plan = baseline_plan(&s).unwrap();
        assert_eq!(
            plan.uav_actions(0),
            &[
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
            ]
        );
    }

    #[test]
    fn the_walk_alternates_covering_and_advancing_down_a_line() {
        let s = line_scenario(3, 10, 5);
        let plan = baseline_plan(&s).unwrap();
        assert_eq!(
            plan.uav_actions(0),
            &[
                Action::Cover { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Cover { zone: 1 },
                Action::Travel { from: 1, to: 2 },
                Action::Cover { zone: 2 },
            ]
        );
    }

    #[test]
    fn the_patrol_rotates_between_eligible_zones() {
        // Battery 4 reaches only zones within one hop of the site, so the
        // patrol alternates between zones 0 and 1 and recharges on time.
        let s = line_scenario(3, 4, 5);
        let plan = baseline_plan(&s).unwrap();
        assert_eq!(
            plan.uav_actions(0),
            &[
                Action::Cover { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Cover { zone: 1 },
                Action::Travel { from: 1, to: 0 },
                Action::Recharge { zone: 0 },
            ]
        );
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn zones_beyond_a_battery_round_trip_are_never_targeted() {
        let s = line_scenario(3, 4, 12);
        let plan = baseline_plan(&s).unwrap();
        assert!(!plan
            .uav_actions(0)
            .iter()
            .any(|&a| a == Action::Cover { zone: 2 }));
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn the_battery_guard_diverts_transit_through_a_recharge() {
        // Sites at both ends of a five-zone line, battery 6. Zone 2 is
        // eligible (round trip 5), but the first approach starts with a
        // partly drained battery: the guard turns the UAV back at zone 2,
        // sends it home through zone 1, and the second approach after the
        // recharge covers zone 2 with charge to spare.
        let mut s = line_scenario(5, 6, 10);
        s.recharge_sites = vec![0, 4];
        let plan = baseline_plan(&s).unwrap();
        assert_eq!(
            plan.uav_actions(0),
            &[
                Action::Cover { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Cover { zone: 1 },
                Action::Travel { from: 1, to: 2 },
                Action::Travel { from: 2, to: 1 },
                Action::Travel { from: 1, to: 0 },
                Action::Recharge { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Travel { from: 1, to: 2 },
                Action::Cover { zone: 2 },
            ]
        );
        assert!(check_feasibility(&plan, &s).is_empty());
    }

    #[test]
    fn zones_cut_off_from_recharge_sites_are_an_instance_error() {
        let mut s = line_scenario(3, 4, 5);
        // Disconnect zone 2 entirely.
        s.links.retain(|&(a, b)| a != 2 && b != 2);
        match baseline_plan(&s).unwrap_err() {
            BaselineError::ZoneUnreachable { zone } => assert_eq!(zone, 2),
            other => panic!("expected unreachable zone, got {other}"),
        }
    }

    #[test]
    fn shortest_paths_prefer_the_lexicographically_smallest_route() {
        let mut s = line_scenario(4, 4, 5);
        // Turn the line into a diamond: 0-1, 0-2, 1-3, 2-3.
        s.links = vec![
            (0, 1),
            (0, 2),
            (1, 0),
            (1, 3),
            (2, 0),
            (2, 3),
            (3, 1),
            (3, 2),
        ];
        let path = shortest_zone_path(&s, 0, 3).unwrap();
        assert_eq!(path, vec![0, 1, 3]);
        assert_eq!(shortest_zone_path(&s, 2, 2).unwrap(), vec![2]);

        s.links.retain(|&(a, b)| a != 3 && b != 3);
        assert!(matches!(
            shortest_zone_path(&s, 0, 3),
            Err(BaselineError::Disconnected { from: 0, to: 3 })
        ));
    }

    #[test]
    fn every_reachable_zone_is_eventually_covered() {
        let s = line_scenario(4, 10, 16);
        let plan = baseline_plan(&s).unwrap();
        for z in 0..4 {
            assert!(
                plan.uav_actions(0)
                    .iter()
                    .any(|&a| a == Action::Cover { zone: z }),
                "zone {z} never covered"
            );
        }
    }

    #[test]
    fn the_allocation_splits_spectrum_evenly_and_evaluates_cleanly() {
        let mut s = line_scenario(2, 6, 4);
        s.uavs.push(crate::scenario::Uav {
            id: 1,
            battery_capacity_steps: 6,
            home_zone: 0,
        });
        let plan = baseline_plan(&s).unwrap();
        assert!(check_feasibility(&plan, &s).is_empty());
        let t = full_matrix(2, 2, 1e6);
        let alloc = baseline_allocation(&plan, &s, &t);
        // Both UAVs start at zone 0 and cover it together at step 0.
        assert_eq!(plan.action(0, 0), Action::Cover { zone: 0 });
        assert_eq!(plan.action(1, 0), Action::Cover { zone: 0 });
        for a in 0..2 {
            for d in 0..2 {
                assert_eq!(alloc.get(a, d, 0, 0), 0.25);
            }
        }
        let n = uniform_counts(2, 4, 3);
        let metrics = evaluate_plan(&plan, &alloc, &s, &t, &n, 2).unwrap();
        assert!(metrics.objective_bps >= 0.0);
    }

    #[test]
    fn baseline_plans_for_generated_scenarios_are_feasible() {
        for seed in 0..5 {
            let config = GeneratorConfig {
                grid_rows: 3,
                grid_cols: 3,
                num_areas: 12,
                num_uavs: 2,
                num_recharge_sites: 2,
                battery_steps: 4,
                num_steps: 12,
                seed,
                ..GeneratorConfig::default()
            };
            let s = generate_scenario(&config).unwrap();
            let plan = baseline_plan(&s).unwrap();
            let violations = check_feasibility(&plan, &s);
            assert!(
                violations.is_empty(),
                "seed {seed}: {}",
                violations[0]
            );
        }
    }
}
