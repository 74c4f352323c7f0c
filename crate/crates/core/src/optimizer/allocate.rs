//! Spectrum re-optimization for a fixed plan.
//!
//! Once the cover schedule is integral, the motion variables are gone
//! and only the spectrum fractions remain. The max-min objective alone
//! leaves the fractions badly underdetermined: every allocation whose
//! worst rolling average hits the optimum is "optimal", including ones
//! that waste all spectrum the bottleneck pair cannot use (when the
//! bottleneck is stuck at zero, even the all-zero allocation qualifies).
//! The re-optimization therefore runs in stages: the first solve pins
//! the worst rolling average at its maximum, then progressive filling
//! rounds lift the common floor of per-area delivered bits, freezing
//! areas as they hit their ceilings, until no area can be raised
//! further. A capped pass spends spare capacity on areas stuck below
//! the highest level reached, and a final squeeze trims the overshoot
//! the per-user guarantees do not require, so delivered bits end up as
//! even across areas as the fixed plan allows. Every stage after the
//! first is best effort: it pins values the previous stage satisfied
//! only to the solver's feasibility tolerance, and when that stack
//! tips a stage into infeasibility the stage is skipped and the
//! previous fractions kept. The returned objective is recomputed from
//! the final fractions through the evaluator's arithmetic, so
//! evaluating the returned allocation reproduces it exactly.

use std::collections::{BTreeMap, BTreeSet};

use crate::linkbudget::ThroughputMatrix;
use crate::lp::{LpError, LpProblem, RowOp};
use crate::mobility::VehicleCounts;
use crate::scenario::Scenario;

use super::{
    window_divisor, window_start, Action, AllocationMatrix, ModelError, OptimizeError, Plan,
};

/// Values below this are treated as solver dust and dropped.
const DUST: f64 = 1e-12;

/// Populated (area, step) pairs, or `None` when every pair is empty.
fn included_pairs(n: &VehicleCounts) -> Option<Vec<(usize, usize)>> {
    let mut included = Vec::new();
    for a in 0..n.num_areas() {
        for k in 0..n.num_steps() {
            if n.get(a, k) > 0 {
                included.push((a, k));
            }
        }
    }
    if included.is_empty() {
        None
    } else {
        Some(included)
    }
}

/// Optimal max-min objective when the covered (step, zone) pairs are
/// fixed, in bps.
///
/// Which UAV covers a pair does not matter: every UAV at a zone shares
/// the single zone-wide unit of spectrum, so only the set of covered
/// pairs constrains the rates. Multiply-covered pairs gain nothing.
pub(crate) fn allocation_value_for_covers(
    covered: &BTreeSet<(usize, usize)>,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
) -> Result<f64, OptimizeError> {
    let included = included_pairs(n).ok_or(OptimizeError::Model(ModelError::ObjectiveUndefined))?;
    let num_steps = n.num_steps();

    let mut lp = LpProblem::new();
    let max_rate = t.max_entry();
    let scale = if max_rate > 0.0 { max_rate } else { 1.0 };

    // One shared fraction per covered (step, zone) and in-range area.
    let mut vars: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); num_steps];
    for &(k, z) in covered {
        for a in 0..t.num_areas() {
            if t.get(a, z) > 0.0 {
                let col = lp.add_col(0.0, 0.0, 1.0);
                vars[k].push((col, a, z));
            }
        }
        let terms: Vec<(usize, f64)> = vars[k]
            .iter()
            .rev()
            .take_while(|&&(_, _, vz)| vz == z)
            .map(|&(col, _, _)| (col, 1.0))
            .collect();
        if !terms.is_empty() {
            lp.add_row(terms, RowOp::Le, 1.0);
        }
    }
    if lp.num_cols() == 0 {
        return Ok(0.0);
    }

    let mut mu_col = vec![usize::MAX; n.num_areas() * num_steps];
    for &(a, k) in &included {
        mu_col[a * num_steps + k] = lp.add_col(0.0, 0.0, f64::INFINITY);
    }
    let t_col = lp.add_col(1.0, 0.0, f64::INFINITY);

    for &(a, k) in &included {
        let users = f64::from(n.get(a, k));
        let mut terms = vec![(mu_col[a * num_steps + k], -1.0)];
        for &(col, va, vz) in &vars[k] {
            if va == a {
                terms.push((col, t.get(a, vz) / (scale * users)));
            }
        }
        lp.add_row(terms, RowOp::Eq, 0.0);
    }
    for &(a, k) in &included {
        let divisor = window_divisor(k, horizon, false);
        let mut terms = vec![(t_col, 1.0)];
        for h in window_start(k, horizon)..=k {
            let col = mu_col[a * num_steps + h];
            if col != usize::MAX {
                terms.push((col, -1.0 / divisor));
            }
        }
        lp.add_row(terms, RowOp::Le, 0.0);
    }

    let solution = lp
        .solve_max()
        .map_err(|e| OptimizeError::Solver(e.to_string()))?;
    Ok(solution.objective * scale)
}

/// Spectrum fractions of a plan, one per covering (uav, step, zone) and
/// in-range area, as `(area, uav, step, zone)` in a fixed order. The
/// position of each entry doubles as its LP column index.
fn cover_vars(
    covers: &[(usize, usize, usize)],
    t: &ThroughputMatrix,
) -> Vec<(usize, usize, usize, usize)> {
    let mut vars = Vec::new();
    for &(d, k, z) in covers {
        for a in 0..t.num_areas() {
            if t.get(a, z) > 0.0 {
                vars.push((a, d, k, z));
            }
        }
    }
    vars
}

/// Solution of one allocation round.
struct RoundOutcome {
    /// Round objective in scaled units: the worst rolling average in the
    /// max-min phase, the common per-area bits level in filling rounds,
    /// the negated overshoot in the squeeze phases.
    objective: f64,
    /// Fraction per [`cover_vars`] entry.
    phi: Vec<f64>,
    /// Scaled per-area delivered bits: `sum(users * mu)` over the
    /// populated steps (the step duration cancels out of comparisons).
    bits: Vec<f64>,
}

/// What one allocation round optimizes.
enum RoundPhase<'a> {
    /// Maximize the worst rolling average.
    MaxMin,
    /// Pin the worst rolling average at `t_floor` and maximize the
    /// common level of per-area delivered bits over the `active` areas,
    /// holding each frozen area at its `floors` entry.
    Fill {
        t_floor: f64,
        floors: &'a BTreeMap<usize, f64>,
        active: &'a BTreeSet<usize>,
    },
    /// Pin the worst rolling average and the `floors`, then lift every
    /// floored area toward `target`: maximize the sum of per-area bits
    /// capped at `target`, so spare capacity raises the least served
    /// areas without rewarding overshoot.
    CappedFill {
        t_floor: f64,
        floors: &'a BTreeMap<usize, f64>,
        target: f64,
    },
    /// Pin everything and minimize the worst overshoot above `target`:
    /// the rolling-average guarantees force user-heavy areas above the
    /// common level, but nothing else should float there.
    SqueezeMax {
        t_floor: f64,
        floors: &'a BTreeMap<usize, f64>,
        target: f64,
    },
    /// With the worst overshoot capped at `max_over`, minimize the total
    /// overshoot above `target`.
    SqueezeTotal {
        t_floor: f64,
        floors: &'a BTreeMap<usize, f64>,
        target: f64,
        max_over: f64,
    },
}

/// Builds and solves the fixed-plan allocation LP for one round.
fn solve_round(
    covers: &[(usize, usize, usize)],
    vars: &[(usize, usize, usize, usize)],
    included: &[(usize, usize)],
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
    scale: f64,
    phase: RoundPhase<'_>,
) -> Result<RoundOutcome, LpError> {
    let num_areas = t.num_areas();
    let num_steps = n.num_steps();
    let mut lp = LpProblem::new();
    for _ in vars {
        lp.add_col(0.0, 0.0, 1.0);
    }

    // Per covering UAV: its zone's fractions sum to at most one unit.
    let mut next = 0;
    for &(d, k, z) in covers {
        let first = next;
        while next < vars.len() && vars[next].1 == d && vars[next].2 == k && vars[next].3 == z {
            next += 1;
        }
        if next > first {
            lp.add_row((first..next).map(|col| (col, 1.0)).collect(), RowOp::Le, 1.0);
        }
    }

    // All UAVs covering one zone at one step share a unit of spectrum.
    let mut zone_groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (col, &(_, _, k, z)) in vars.iter().enumerate() {
        zone_groups.entry((k, z)).or_default().push(col);
    }
    for cols in zone_groups.values() {
        let terms: Vec<(usize, f64)> = cols.iter().map(|&c| (c, 1.0)).collect();
        lp.add_row(terms, RowOp::Le, 1.0);
    }

    let mut mu_col = vec![usize::MAX; num_areas * num_steps];
    for &(a, k) in included {
        mu_col[a * num_steps + k] = lp.add_col(0.0, 0.0, f64::INFINITY);
    }
    let (t_obj, t_lb) = match phase {
        RoundPhase::MaxMin => (1.0, 0.0),
        RoundPhase::Fill { t_floor, .. }
        | RoundPhase::CappedFill { t_floor, .. }
        | RoundPhase::SqueezeMax { t_floor, .. }
        | RoundPhase::SqueezeTotal { t_floor, .. } => (0.0, t_floor.max(0.0)),
    };
    let t_col = lp.add_col(t_obj, t_lb, f64::INFINITY);

    let mut supply: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for (col, &(a, _, k, z)) in vars.iter().enumerate() {
        supply.entry((a, k)).or_default().push((col, t.get(a, z)));
    }
    for &(a, k) in included {
        let users = f64::from(n.get(a, k));
        let mut terms = vec![(mu_col[a * num_steps + k], -1.0)];
        if let Some(cols) = supply.get(&(a, k)) {
            for &(col, rate) in cols {
                terms.push((col, rate / (scale * users)));
            }
        }
        lp.add_row(terms, RowOp::Eq, 0.0);
    }
    for &(a, k) in included {
        let divisor = window_divisor(k, horizon, false);
        let mut terms = vec![(t_col, 1.0)];
        for h in window_start(k, horizon)..=k {
            let col = mu_col[a * num_steps + h];
            if col != usize::MAX {
                terms.push((col, -1.0 / divisor));
            }
        }
        lp.add_row(terms, RowOp::Le, 0.0);
    }

    let mut bits_terms: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for &(a, k) in included {
        bits_terms
            .entry(a)
            .or_default()
            .push((mu_col[a * num_steps + k], f64::from(n.get(a, k))));
    }
    match phase {
        RoundPhase::MaxMin => {}
        RoundPhase::Fill { floors, active, .. } => {
            let s_col = lp.add_col(1.0, 0.0, f64::INFINITY);
            for (&a, &floor) in floors {
                if let Some(terms) = bits_terms.get(&a) {
                    lp.add_row(terms.clone(), RowOp::Ge, floor);
                }
            }
            for &a in active {
                let mut terms = bits_terms.get(&a).cloned().unwrap_or_default();
                terms.push((s_col, -1.0));
                lp.add_row(terms, RowOp::Ge, 0.0);
            }
        }
        RoundPhase::CappedFill { floors, target, .. } => {
            for (&a, &floor) in floors {
                let Some(terms) = bits_terms.get(&a) else {
                    continue;
                };
                lp.add_row(terms.clone(), RowOp::Ge, floor);
                let cap_col = lp.add_col(1.0, 0.0, target.max(0.0));
                let mut capped = terms.clone();
                capped.push((cap_col, -1.0));
                lp.add_row(capped, RowOp::Ge, 0.0);
            }
        }
        RoundPhase::SqueezeMax { floors, target, .. } => {
            let z_col = lp.add_col(-1.0, 0.0, f64::INFINITY);
            for (&a, &floor) in floors {
                let Some(terms) = bits_terms.get(&a) else {
                    continue;
                };
                lp.add_row(terms.clone(), RowOp::Ge, floor);
                let mut over = terms.clone();
                over.push((z_col, -1.0));
                lp.add_row(over, RowOp::Le, target);
            }
        }
        RoundPhase::SqueezeTotal {
            floors,
            target,
            max_over,
            ..
        } => {
            let e_cap = max_over.max(0.0) + 1e-7 * max_over.abs().max(1.0);
            for (&a, &floor) in floors {
                let Some(terms) = bits_terms.get(&a) else {
                    continue;
                };
                lp.add_row(terms.clone(), RowOp::Ge, floor);
                let e_col = lp.add_col(-1.0, 0.0, e_cap);
                let mut over = terms.clone();
                over.push((e_col, -1.0));
                lp.add_row(over, RowOp::Le, target);
            }
        }
    }

    let solution = lp.solve_max()?;
    let phi = solution.values[..vars.len()].to_vec();
    let mut bits = vec![0.0; num_areas];
    for (&a, terms) in &bits_terms {
        bits[a] = terms
            .iter()
            .map(|&(col, users)| users * solution.values[col])
            .sum();
    }
    Ok(RoundOutcome {
        objective: solution.objective,
        phi,
        bits,
    })
}

/// Re-optimizes the spectrum fractions for a fixed plan.
///
/// Returns the allocation and its max-min objective in bps. The first
/// solve maximizes the worst rolling average; progressive filling rounds
/// then spread the remaining spectrum, lifting the least-served areas
/// without ever dipping below that optimum. The objective is recomputed
/// from the returned fractions with the evaluator's arithmetic, so
/// `evaluate_plan` on the pair reproduces it bit for bit. A plan that
/// never covers yields the empty allocation and objective zero.
pub fn allocate_spectrum(
    plan: &Plan,
    s: &Scenario,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
) -> Result<(AllocationMatrix, f64), OptimizeError> {
    let num_areas = s.areas.len();
    let num_zones = s.zones.len();
    let num_steps = s.num_steps;
    let num_uavs = s.uavs.len();
    if plan.num_uavs() != num_uavs || plan.num_steps() != num_steps {
        return Err(OptimizeError::AllocationMismatch(format!(
            "plan is {} uavs x {} steps, scenario needs {num_uavs} x {num_steps}",
            plan.num_uavs(),
            plan.num_steps()
        )));
    }
    if t.num_areas() != num_areas || t.num_zones() != num_zones {
        return Err(OptimizeError::Model(ModelError::DimensionMismatch(format!(
            "throughput matrix is {}x{}, scenario has {num_areas} areas and {num_zones} zones",
            t.num_areas(),
            t.num_zones()
        ))));
    }
    if n.num_areas() != num_areas || n.num_steps() != num_steps {
        return Err(OptimizeError::Model(ModelError::DimensionMismatch(format!(
            "vehicle counts are {}x{}, scenario has {num_areas} areas and {num_steps} steps",
            n.num_areas(),
            n.num_steps()
        ))));
    }
    if horizon == 0 {
        return Err(OptimizeError::Model(ModelError::InvalidHorizon));
    }
    let included = included_pairs(n).ok_or(OptimizeError::Model(ModelError::ObjectiveUndefined))?;

    let mut covers = Vec::new();
    for d in 0..num_uavs {
        for k in 0..num_steps {
            if let Action::Cover { zone } = plan.action(d, k) {
                covers.push((d, k, zone));
            }
        }
    }

    let max_rate = t.max_entry();
    let scale = if max_rate > 0.0 { max_rate } else { 1.0 };
    let vars = cover_vars(&covers, t);

    let empty = AllocationMatrix::new(num_areas, num_uavs, num_steps, num_zones);
    if vars.is_empty() {
        // Nothing is covered in range: the zero allocation is optimal.
        let delivered = vec![0.0; num_areas * num_steps];
        let series = crate::evaluator::rate_series(&delivered, n, horizon, false)
            .ok_or(OptimizeError::Model(ModelError::ObjectiveUndefined))?;
        return Ok((empty, series.objective));
    }

    let phase_one = solve_round(
        &covers, &vars, &included, t, n, horizon, scale, RoundPhase::MaxMin,
    )?;
    let t_star = phase_one.objective;
    let t_floor = t_star - 1e-9 * t_star.abs().max(1.0);

    // Only areas that can actually receive something participate in the
    // filling rounds: they need an in-range fraction at a step where the
    // area is populated.
    let mut active: BTreeSet<usize> = BTreeSet::new();
    for &(a, _, k, _) in &vars {
        if n.get(a, k) > 0 {
            active.insert(a);
        }
    }

    let mut floors: BTreeMap<usize, f64> = BTreeMap::new();
    let mut last = phase_one;
    while !active.is_empty() {
        let round = solve_round(
            &covers,
            &vars,
            &included,
            t,
            n,
            horizon,
            scale,
            RoundPhase::Fill {
                t_floor,
                floors: &floors,
                active: &active,
            },
        )?;
        let level = round.objective;
        let slack = 1e-6 * level.abs().max(1.0);
        let frozen: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&a| round.bits[a] <= level + slack)
            .collect();
        if frozen.is_empty() {
            // Numerically nothing sits on the level; stop refining.
            last = round;
            break;
        }
        for a in frozen {
            active.remove(&a);
            floors.insert(a, level);
        }
        last = round;
    }

    // A bottleneck area pins each filling round's level for every area
    // frozen alongside it, even ones with headroom. One last pass lifts
    // all floored areas toward the highest level reached, spending spare
    // capacity on the least served areas first.
    if !floors.is_empty() {
        let target = floors.values().fold(0.0_f64, |acc, &v| acc.max(v));
        last = solve_round(
            &covers,
            &vars,
            &included,
            t,
            n,
            horizon,
            scale,
            RoundPhase::CappedFill {
                t_floor,
                floors: &floors,
                target,
            },
        )?;

        // The rolling-average guarantees push user-heavy areas above the
        // common level, and above it the capped pass is indifferent, so
        // an arbitrary optimal vertex can pile spectrum on a few areas.
        // Pin what every area has reached up to the target, then trim
        // the overshoot: first its worst case, then its total.
        let pin = 1e-9 * target.abs().max(1.0);
        let mut pinned: BTreeMap<usize, f64> = BTreeMap::new();
        for (&a, &floor) in &floors {
            pinned.insert(a, floor.max(last.bits[a].min(target) - pin));
        }
        let squeezed = solve_round(
            &covers,
            &vars,
            &included,
            t,
            n,
            horizon,
            scale,
            RoundPhase::SqueezeMax {
                t_floor,
                floors: &pinned,
                target,
            },
        )?;
        let max_over = (-squeezed.objective).max(0.0);
        last = solve_round(
            &covers,
            &vars,
            &included,
            t,
            n,
            horizon,
            scale,
            RoundPhase::SqueezeTotal {
                t_floor,
                floors: &pinned,
                target,
                max_over,
            },
        )?;
    }

    // The solver observes capacities only to its feasibility tolerance;
    // rescale any oversubscribed group so every shared unit holds
    // exactly. Scaling down never lifts the other family's sums.
    let mut phi = last.phi;
    for key in [
        |&(_, d, k, z): &(usize, usize, usize, usize)| (d, k, z),
        |&(_, _, k, z): &(usize, usize, usize, usize)| (usize::MAX, k, z),
    ] {
        let mut sums: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for (col, var) in vars.iter().enumerate() {
            *sums.entry(key(var)).or_default() += phi[col];
        }
        for (col, var) in vars.iter().enumerate() {
            let sum = sums[&key(var)];
            if sum > 1.0 {
                phi[col] /= sum;
            }
        }
    }

    let mut alloc = empty;
    for (col, &(a, d, k, z)) in vars.iter().enumerate() {
        let phi = phi[col];
        if phi > DUST {
            alloc.set(a, d, k, z, phi.min(1.0));
        }
    }

    let delivered = crate::evaluator::delivered_rates(&alloc, t);
    let series = crate::evaluator::rate_series(&delivered, n, horizon, false)
        .ok_or(OptimizeError::Model(ModelError::ObjectiveUndefined))?;
    let max_min = t_star * scale;
    let drift = (series.objective - max_min).abs() / scale;
    if drift > 1e-6 * t_star.abs().max(1.0) {
        return Err(OptimizeError::SolutionRejected {
            family: "objective-epigraph".into(),
            detail: format!(
                "recomputed objective {} bps drifts from the solver's {} bps",
                series.objective, max_min
            ),
        });
    }
    Ok((alloc, series.objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate_plan;
    use crate::testfix::{full_matrix, tiny_scenario, uniform_counts};
    use approx::assert_abs_diff_eq;

    fn all_cover_plan(num_uavs: usize, num_steps: usize, zone: usize) -> Plan {
        Plan::from_actions(
            num_uavs,
            num_steps,
            vec![Action::Cover { zone }; num_uavs * num_steps],
        )
    }

    #[test]
    fn two_areas_sharing_one_zone_get_inverse_rate_shares() {
        // Rates 10 and 5 bps to one covered zone, one user each: the
        // max-min split is 1/3 and 2/3 with both per-user rates at 10/3.
        let mut s = tiny_scenario();
        s.uavs[0].battery_capacity_steps = 3;
        let t = ThroughputMatrix::from_rows(2, 2, vec![10.0, 0.0, 5.0, 0.0]);
        let n = uniform_counts(2, 3, 1);
        let plan = all_cover_plan(1, 3, 0);
        let (alloc, objective) = allocate_spectrum(&plan, &s, &t, &n, 5).unwrap();
        assert_abs_diff_eq!(objective, 10.0 / 3.0, epsilon = 1e-7);
        for k in 0..3 {
            assert_abs_diff_eq!(alloc.get(0, 0, k, 0), 1.0 / 3.0, epsilon = 1e-7);
            assert_abs_diff_eq!(alloc.get(1, 0, k, 0), 2.0 / 3.0, epsilon = 1e-7);
        }

        // Evaluating the returned pair reproduces the objective exactly.
        let metrics = evaluate_plan(&plan, &alloc, &s, &t, &n, 5).unwrap();
        assert_eq!(metrics.objective_bps.to_bits(), objective.to_bits());
    }

    #[test]
    fn plans_that_never_cover_get_the_empty_allocation() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let plan = Plan::from_actions(1, 3, vec![Action::Recharge { zone: 0 }; 3]);
        let (alloc, objective) = allocate_spectrum(&plan, &s, &t, &n, 2).unwrap();
        assert_eq!(alloc.num_nonzero(), 0);
        assert_eq!(objective, 0.0);
    }

    #[test]
    fn a_stuck_pair_does_not_zero_the_rest_of_the_allocation() {
        // Area 1 is populated only at step 2, after the plan has stopped
        // covering: its rolling average is stuck at zero, so the max-min
        // value is zero and any allocation attains it. The filling
        // rounds must still hand area 0 the whole unit at the covered
        // steps instead of the all-zero solution.
        let mut s = tiny_scenario();
        s.uavs[0].battery_capacity_steps = 3;
        let t = ThroughputMatrix::from_rows(2, 2, vec![10.0, 0.0, 5.0, 0.0]);
        let n = VehicleCounts::from_rows(2, 3, vec![1, 1, 0, 0, 0, 1]);
        let plan = Plan::from_actions(
            1,
            3,
            vec![
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
            ],
        );
        let (alloc, objective) = allocate_spectrum(&plan, &s, &t, &n, 2).unwrap();
        assert_eq!(objective, 0.0);
        assert_abs_diff_eq!(alloc.get(0, 0, 0, 0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(alloc.get(0, 0, 1, 0), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn leftover_spectrum_equalizes_per_area_totals() {
        // Area 2 is populated only at the uncovered step 2, pinning the
        // max-min value at zero; areas 0 and 1 share the two covered
        // steps. Filling equalizes their delivered bits: with rates 10
        // and 5, the fraction totals come out 2/3 and 4/3.
        let mut s = tiny_scenario();
        s.uavs[0].battery_capacity_steps = 3;
        s.areas.push(crate::scenario::Area {
            id: 2,
            x_m: 0.0,
            y_m: 0.0,
            length_m: 100.0,
            free_flow_ticks: 10,
            storage_capacity: 10,
        });
        let t = ThroughputMatrix::from_rows(3, 2, vec![10.0, 0.0, 5.0, 0.0, 8.0, 0.0]);
        let n = VehicleCounts::from_rows(3, 3, vec![1, 1, 0, 1, 1, 0, 0, 0, 1]);
        let plan = Plan::from_actions(
            1,
            3,
            vec![
                Action::Cover { zone: 0 },
                Action::Cover { zone: 0 },
                Action::Recharge { zone: 0 },
            ],
        );
        let (alloc, objective) = allocate_spectrum(&plan, &s, &t, &n, 1).unwrap();
        assert_eq!(objective, 0.0);
        let share_0: f64 = (0..2).map(|k| alloc.get(0, 0, k, 0)).sum();
        let share_1: f64 = (0..2).map(|k| alloc.get(1, 0, k, 0)).sum();
        assert_abs_diff_eq!(share_0, 2.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(share_1, 4.0 / 3.0, epsilon = 1e-6);
        let bits_0 = 10.0 * share_0;
        let bits_1 = 5.0 * share_1;
        assert_abs_diff_eq!(bits_0, bits_1, epsilon = 1e-6);
    }

    #[test]
    fn double_covering_one_zone_adds_nothing() {
        let mut s = tiny_scenario();
        s.uavs[0].battery_capacity_steps = 3;
        let t = ThroughputMatrix::from_rows(2, 2, vec![8e5, 0.0, 6e5, 0.0]);
        let n = uniform_counts(2, 3, 5);
        let (_, single) = allocate_spectrum(&all_cover_plan(1, 3, 0), &s, &t, &n, 2).unwrap();

        s.uavs.push(crate::scenario::Uav {
            id: 1,
            battery_capacity_steps: 3,
            home_zone: 0,
        });
        let (alloc, double) =
            allocate_spectrum(&all_cover_plan(2, 3, 0), &s, &t, &n, 2).unwrap();
        assert_abs_diff_eq!(single, double, epsilon = 1e-6 * single.max(1.0));
        // The shared zone budget holds across both UAVs.
        for k in 0..3 {
            let total: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |d| (a, d)))
                .map(|(a, d)| alloc.get(a, d, k, 0))
                .sum();
            assert!(total <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn cover_set_valuation_agrees_with_the_full_allocation() {
        let s = tiny_scenario();
        let t = ThroughputMatrix::from_rows(2, 2, vec![8e5, 3e5, 2e5, 6e5]);
        let n = crate::mobility::VehicleCounts::from_rows(2, 3, vec![4, 2, 7, 3, 5, 1]);
        let plan = Plan::from_actions(
            1,
            3,
            vec![
                Action::Cover { zone: 0 },
                Action::Travel { from: 0, to: 1 },
                Action::Cover { zone: 1 },
            ],
        );
        let (_, from_plan) = allocate_spectrum(&plan, &s, &t, &n, 2).unwrap();
        let covered: BTreeSet<(usize, usize)> = [(0, 0), (2, 1)].into_iter().collect();
        let from_set = allocation_value_for_covers(&covered, &t, &n, 2).unwrap();
        assert_abs_diff_eq!(from_plan, from_set, epsilon = 1e-6 * from_set.max(1.0));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let short = Plan::from_actions(1, 2, vec![Action::Cover { zone: 0 }; 2]);
        assert!(matches!(
            allocate_spectrum(&short, &s, &t, &n, 2),
            Err(OptimizeError::AllocationMismatch(_))
        ));
        let wrong_t = full_matrix(3, 2, 1e6);
        let plan = all_cover_plan(1, 3, 0);
        assert!(matches!(
            allocate_spectrum(&plan, &s, &wrong_t, &n, 2),
            Err(OptimizeError::Model(ModelError::DimensionMismatch(_)))
        ));
        assert!(matches!(
            allocate_spectrum(&plan, &s, &t, &VehicleCounts::zeros(2, 3), 2),
            Err(OptimizeError::Model(ModelError::ObjectiveUndefined))
        ));
    }
}
