//! Continuous relaxation of the planning model.
//!
//! The relaxation is solved on an aggregated formulation that is exactly
//! equivalent to relaxing the full model: per-UAV spectrum fractions
//! `phi(a, d, k, z)` enter every constraint and the objective only
//! through their UAV sums, so the LP works with `psi(a, k, z) =
//! sum_d phi` instead. The UAV capacity rows aggregate to
//! `sum_a psi <= sum_d gamma` (summing the per-UAV rows), the zone
//! capacity rows keep their form, and any `psi` solution splits back
//! into per-UAV fractions proportional to each UAV's cover value, which
//! satisfies every disaggregated row. This drops the dominant variable
//! block by a factor of the fleet size. Auxiliary per-(area, step) rate
//! variables keep the epigraph rows sparse, and all rates are normalized
//! by the largest matrix entry so the LP works near unit scale.
//!
//! The lifted solution is validated against every materialized row of
//! the full model before it is returned.

use std::collections::BTreeMap;

use crate::lp::{LpError, LpProblem, RowOp};

use super::model::{PlanningModel, RowKind, VarLayout};
use super::{window_divisor, window_start, ModelError, OptimizeError};

/// Values below this are treated as solver dust and dropped.
const DUST: f64 = 1e-12;

/// Relative feasibility tolerance when validating the lifted solution.
const VALIDATION_TOLERANCE: f64 = 1e-6;

/// A feasible solution of the relaxed planning model.
#[derive(Debug, Clone)]
pub struct FractionalSolution {
    layout: VarLayout,
    /// Cover / travel / recharge values, indexed by the full layout.
    motion: Vec<f64>,
    /// Spectrum fractions keyed by (area, uav, step, zone).
    phi: BTreeMap<(usize, usize, usize, usize), f64>,
    /// Per-user rates, area-major.
    mu: Vec<f64>,
    /// Rolling averages of `mu`, area-major.
    mubar: Vec<f64>,
    num_areas: usize,
    /// Max-min objective recomputed from the stored fractions, in bps.
    pub objective_bps: f64,
    /// The solver's objective, in bps.
    pub lp_objective_bps: f64,
}

impl FractionalSolution {
    /// Number of UAVs.
    pub fn num_uavs(&self) -> usize {
        self.layout.num_uavs
    }

    /// Number of steps.
    pub fn num_steps(&self) -> usize {
        self.layout.num_steps
    }

    /// Number of zones.
    pub fn num_zones(&self) -> usize {
        self.layout.num_zones
    }

    /// Number of areas.
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    /// Relaxed cover value.
    pub fn gamma(&self, d: usize, k: usize, z: usize) -> f64 {
        self.motion[self.layout.gamma(d, k, z)]
    }

    /// Relaxed travel value; zero when (from, to) is not a link.
    pub fn tau(&self, d: usize, k: usize, from: usize, to: usize) -> f64 {
        self.layout
            .tau(d, k, from, to)
            .map_or(0.0, |idx| self.motion[idx])
    }

    /// Relaxed recharge value; zero when `z` is not a recharge site.
    pub fn rho(&self, d: usize, k: usize, z: usize) -> f64 {
        self.layout.rho(d, k, z).map_or(0.0, |idx| self.motion[idx])
    }

    /// Relaxed spectrum fraction.
    pub fn phi(&self, a: usize, d: usize, k: usize, z: usize) -> f64 {
        self.phi.get(&(a, d, k, z)).copied().unwrap_or(0.0)
    }

    /// Nonzero spectrum fractions in (area, uav, step, zone) order.
    pub fn phi_entries(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), f64)> + '_ {
        self.phi.iter().map(|(&key, &v)| (key, v))
    }

    /// Per-user rate for (area, step), in bps.
    pub fn mu(&self, a: usize, k: usize) -> f64 {
        self.mu[a * self.layout.num_steps + k]
    }

    /// Rolling per-user average for (area, step), in bps.
    pub fn mubar(&self, a: usize, k: usize) -> f64 {
        self.mubar[a * self.layout.num_steps + k]
    }

    /// Value of a full-layout variable index.
    fn full_value(&self, idx: usize, objective: f64) -> f64 {
        if idx < self.layout.phi_base() {
            self.motion[idx]
        } else if idx == self.layout.t_index() {
            objective
        } else {
            let offset = idx - self.layout.phi_base();
            let per_pair = self.layout.num_uavs * self.layout.num_steps;
            let (a, z) = self.layout.phi_pairs[offset / per_pair];
            let rem = offset % per_pair;
            let d = rem / self.layout.num_steps;
            let k = rem % self.layout.num_steps;
            self.phi(a, d, k, z)
        }
    }
}

#[cfg(test)]
impl FractionalSolution {
    /// Zero-filled stub for rounding tests; values are set directly.
    pub(crate) fn test_stub(
        s: &crate::scenario::Scenario,
        t: &crate::linkbudget::ThroughputMatrix,
    ) -> Self {
        let layout = VarLayout::new(s, t);
        let motion = vec![0.0; layout.phi_base()];
        let num_steps = layout.num_steps;
        Self {
            motion,
            phi: BTreeMap::new(),
            mu: vec![0.0; t.num_areas() * num_steps],
            mubar: vec![0.0; t.num_areas() * num_steps],
            num_areas: t.num_areas(),
            objective_bps: 0.0,
            lp_objective_bps: 0.0,
            layout,
        }
    }

    pub(crate) fn set_gamma(&mut self, d: usize, k: usize, z: usize, v: f64) {
        let idx = self.layout.gamma(d, k, z);
        self.motion[idx] = v;
    }

    pub(crate) fn set_tau(&mut self, d: usize, k: usize, from: usize, to: usize, v: f64) {
        let idx = self.layout.tau(d, k, from, to).expect("not a link");
        self.motion[idx] = v;
    }

    pub(crate) fn set_rho(&mut self, d: usize, k: usize, z: usize, v: f64) {
        let idx = self.layout.rho(d, k, z).expect("not a site");
        self.motion[idx] = v;
    }
}

/// Solves the continuous relaxation of the planning model.
///
/// The returned solution satisfies every constraint of the relaxed model
/// to solver tolerance (this is validated against the materialized rows
/// before returning), and its `objective_bps` is recomputed from the
/// stored fractions so it is exactly consistent with the evaluator.
pub fn solve_relaxation(m: &PlanningModel) -> Result<FractionalSolution, OptimizeError> {
    let layout = &m.layout;
    let num_uavs = layout.num_uavs;
    let num_steps = layout.num_steps;
    let num_zones = layout.num_zones;
    let num_areas = m.counts.num_areas();
    let max_rate = m.tmat.max_entry();
    let scale = if max_rate > 0.0 { max_rate } else { 1.0 };

    let mut lp = LpProblem::new();
    // Motion block first, mirroring the full layout so rows built for the
    // full model can be reused as-is.
    for _ in 0..layout.phi_base() {
        lp.add_col(0.0, 0.0, 1.0);
    }
    // Aggregated spectrum: one variable per (area, zone) pair and step.
    let num_pairs = layout.phi_pairs.len();
    let psi_base = lp.num_cols();
    for _ in 0..num_pairs * num_steps {
        lp.add_col(0.0, 0.0, 1.0);
    }
    let psi = |pair: usize, k: usize| psi_base + pair * num_steps + k;
    // One rate variable per populated (area, step).
    let mu_base = lp.num_cols();
    let mu_rank: BTreeMap<(usize, usize), usize> = m
        .included
        .iter()
        .enumerate()
        .map(|(rank, &pair)| (pair, rank))
        .collect();
    for _ in 0..m.included.len() {
        lp.add_col(0.0, 0.0, f64::INFINITY);
    }
    let t_col = lp.add_col(1.0, 0.0, f64::INFINITY);

    for row in &m.rows {
        match row.kind {
            RowKind::ActionExclusivity
            | RowKind::CoverContinuity
            | RowKind::RechargeContinuity
            | RowKind::TravelContinuity
            | RowKind::BatteryWindow => {
                debug_assert!(row.terms.iter().all(|&(idx, _)| idx < layout.phi_base()));
                lp.add_row(row.terms.clone(), row.op, row.rhs);
            }
            _ => {}
        }
    }

    let mut pairs_per_zone: Vec<Vec<usize>> = vec![Vec::new(); num_zones];
    for (rank, &(_, z)) in layout.phi_pairs.iter().enumerate() {
        pairs_per_zone[z].push(rank);
    }
    for k in 0..num_steps {
        for z in 0..num_zones {
            if pairs_per_zone[z].is_empty() {
                continue;
            }
            // Summed over the fleet, spectrum at a zone is capped by the
            // summed cover values.
            let mut terms: Vec<(usize, f64)> = pairs_per_zone[z]
                .iter()
                .map(|&pair| (psi(pair, k), 1.0))
                .collect();
            for d in 0..num_uavs {
                terms.push((layout.gamma(d, k, z), -1.0));
            }
            lp.add_row(terms, RowOp::Le, 0.0);
            // And by the single shared unit of spectrum.
            let terms: Vec<(usize, f64)> = pairs_per_zone[z]
                .iter()
                .map(|&pair| (psi(pair, k), 1.0))
                .collect();
            lp.add_row(terms, RowOp::Le, 1.0);
        }
    }

    let mut pairs_per_area: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_areas];
    for (rank, &(a, z)) in layout.phi_pairs.iter().enumerate() {
        pairs_per_area[a].push((rank, z));
    }
    for (rank, &(a, k)) in m.included.iter().enumerate() {
        let users = f64::from(m.counts.get(a, k));
        let mut terms = vec![(mu_base + rank, -1.0)];
        for &(pair, z) in &pairs_per_area[a] {
            terms.push((psi(pair, k), m.tmat.get(a, z) / (scale * users)));
        }
        lp.add_row(terms, RowOp::Eq, 0.0);
    }
    for &(a, k) in &m.included {
        let divisor = window_divisor(k, m.horizon, m.options.literal_window_divisor);
        let mut terms = vec![(t_col, 1.0)];
        for h in window_start(k, m.horizon)..=k {
            if let Some(&rank) = mu_rank.get(&(a, h)) {
                terms.push((mu_base + rank, -1.0 / divisor));
            }
        }
        lp.add_row(terms, RowOp::Le, 0.0);
    }

    let solution = match lp.solve_max() {
        Ok(solution) => solution,
        Err(LpError::Infeasible) => return Err(diagnose_infeasibility(m)),
        Err(e) => return Err(OptimizeError::Solver(e.to_string())),
    };

    let motion: Vec<f64> = solution.values[..layout.phi_base()]
        .iter()
        .map(|&v| v.clamp(0.0, 1.0))
        .collect();

    // Split each aggregated fraction across the fleet proportionally to
    // cover values; a zone nobody covers gets no spectrum.
    let mut phi = BTreeMap::new();
    for (pair, &(a, z)) in layout.phi_pairs.iter().enumerate() {
        for k in 0..num_steps {
            let total = solution.values[psi(pair, k)];
            if total <= DUST {
                continue;
            }
            let cover_sum: f64 = (0..num_uavs)
                .map(|d| motion[layout.gamma(d, k, z)])
                .sum();
            if cover_sum <= DUST {
                continue;
            }
            for d in 0..num_uavs {
                let share = total * motion[layout.gamma(d, k, z)] / cover_sum;
                if share > 0.0 {
                    phi.insert((a, d, k, z), share.min(1.0));
                }
            }
        }
    }

    let mut delivered = vec![0.0; num_areas * num_steps];
    for (&(a, _, k, z), &share) in &phi {
        delivered[a * num_steps + k] += share * m.tmat.get(a, z);
    }
    let series = crate::evaluator::rate_series(
        &delivered,
        &m.counts,
        m.horizon,
        m.options.literal_window_divisor,
    )
    .ok_or(OptimizeError::Model(ModelError::ObjectiveUndefined))?;

    let lp_objective_bps = solution.objective * scale;
    let drift = (series.objective - lp_objective_bps).abs() / scale;
    if drift > VALIDATION_TOLERANCE * solution.objective.abs().max(1.0) {
        return Err(OptimizeError::SolutionRejected {
            family: "objective-epigraph".into(),
            detail: format!(
                "recomputed objective {} bps drifts from the solver's {} bps",
                series.objective, lp_objective_bps
            ),
        });
    }

    let result = FractionalSolution {
        layout: layout.clone(),
        motion,
        phi,
        mu: series.mu,
        mubar: series.mubar,
        num_areas,
        objective_bps: series.objective,
        lp_objective_bps,
    };

    validate_against_full_rows(m, &result)?;
    Ok(result)
}

/// Checks the lifted solution against every materialized row of the full
/// model, at a tolerance scaled by the largest term of each row.
fn validate_against_full_rows(
    m: &PlanningModel,
    f: &FractionalSolution,
) -> Result<(), OptimizeError> {
    for row in &m.rows {
        let mut lhs = 0.0;
        let mut magnitude: f64 = 1.0;
        for &(idx, coef) in &row.terms {
            let term = coef * f.full_value(idx, f.objective_bps);
            lhs += term;
            magnitude = magnitude.max(term.abs());
        }
        let tolerance = VALIDATION_TOLERANCE * magnitude.max(row.rhs.abs());
        let violated = match row.op {
            RowOp::Eq => (lhs - row.rhs).abs() > tolerance,
            RowOp::Le => lhs > row.rhs + tolerance,
            RowOp::Ge => lhs < row.rhs - tolerance,
        };
        if violated {
            return Err(OptimizeError::SolutionRejected {
                family: row.kind.to_string(),
                detail: format!(
                    "row evaluates to {lhs} against bound {} (tolerance {tolerance})",
                    row.rhs
                ),
            });
        }
    }
    Ok(())
}

/// Explains an infeasible relaxation by testing the canonical idle
/// candidate (every UAV parks at its home zone forever, recharging when
/// the home is a site) against the materialized rows.
fn diagnose_infeasibility(m: &PlanningModel) -> OptimizeError {
    let layout = &m.layout;
    let mut values = vec![0.0; layout.num_vars()];
    for d in 0..layout.num_uavs {
        let home = m.homes[d];
        for k in 0..layout.num_steps {
            match layout.rho(d, k, home) {
                Some(idx) => values[idx] = 1.0,
                None => values[layout.gamma(d, k, home)] = 1.0,
            }
        }
    }
    for row in &m.rows {
        let lhs: f64 = row.terms.iter().map(|&(idx, c)| c * values[idx]).sum();
        let violated = match row.op {
            RowOp::Eq => (lhs - row.rhs).abs() > 1e-9,
            RowOp::Le => lhs > row.rhs + 1e-9,
            RowOp::Ge => lhs < row.rhs - 1e-9,
        };
        if violated {
            return OptimizeError::Infeasible {
                family: row.kind.to_string(),
            };
        }
    }
    OptimizeError::Solver(
        "solver reported infeasibility but the idle candidate satisfies every row".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::model::{build_model, build_model_with_options, ModelOptions};
    use crate::testfix::{full_matrix, tiny_scenario, uniform_counts};
    use approx::assert_abs_diff_eq;

    #[test]
    fn tiny_relaxation_is_feasible_and_profitable() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let m = build_model(&s, &t, &n, 2).unwrap();
        let f = solve_relaxation(&m).unwrap();
        assert!(f.objective_bps > 0.0);
        // Per-user rate can never beat full spectrum over 5 users.
        assert!(f.objective_bps <= 1e6 / 5.0 + 1e-6);
        // Exactly one action per step, fractionally.
        for k in 0..3 {
            let total: f64 = (0..2).map(|z| f.gamma(0, k, z)).sum::<f64>()
                + f.tau(0, k, 0, 1)
                + f.tau(0, k, 1, 0)
                + f.rho(0, k, 0);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(
            f.objective_bps,
            f.lp_objective_bps,
            epsilon = 1e-6 * f.lp_objective_bps.max(1.0)
        );
    }

    #[test]
    fn aggregated_formulation_matches_the_full_relaxation() {
        let s = tiny_scenario();
        let t = crate::linkbudget::ThroughputMatrix::from_rows(
            2,
            2,
            vec![8e5, 3e5, 0.0, 6e5],
        );
        let n = crate::mobility::VehicleCounts::from_rows(2, 3, vec![4, 2, 7, 3, 5, 1]);
        let m = build_model(&s, &t, &n, 2).unwrap();

        // Solve the full, unaggregated relaxation straight from the
        // materialized rows.
        let mut lp = LpProblem::new();
        for _ in 0..m.layout.t_index() {
            lp.add_col(0.0, 0.0, 1.0);
        }
        lp.add_col(1.0, 0.0, f64::INFINITY);
        for row in &m.rows {
            lp.add_row(row.terms.clone(), row.op, row.rhs);
        }
        let full = lp.solve_max().unwrap();

        let f = solve_relaxation(&m).unwrap();
        let scale = full.objective.abs().max(1.0);
        assert_abs_diff_eq!(f.lp_objective_bps, full.objective, epsilon = 1e-5 * scale);
        assert_abs_diff_eq!(f.objective_bps, full.objective, epsilon = 1e-5 * scale);
    }

    #[test]
    fn removing_a_uav_cannot_improve_the_relaxation() {
        let mut s = tiny_scenario();
        s.uavs.push(crate::scenario::Uav {
            id: 1,
            battery_capacity_steps: 2,
            home_zone: 0,
        });
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let two = solve_relaxation(&build_model(&s, &t, &n, 2).unwrap())
            .unwrap()
            .objective_bps;
        s.uavs.pop();
        let one = solve_relaxation(&build_model(&s, &t, &n, 2).unwrap())
            .unwrap()
            .objective_bps;
        assert!(one <= two + 1e-6 * two.max(1.0));
    }

    #[test]
    fn literal_window_divisor_deflates_early_windows() {
        let s = tiny_scenario();
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let truncated = solve_relaxation(&build_model(&s, &t, &n, 3).unwrap())
            .unwrap()
            .objective_bps;
        let literal = solve_relaxation(
            &build_model_with_options(
                &s,
                &t,
                &n,
                3,
                ModelOptions {
                    literal_window_divisor: true,
                },
            )
            .unwrap(),
        )
        .unwrap()
        .objective_bps;
        assert!(literal <= truncated + 1e-9);
        assert!(literal > 0.0);
    }

    #[test]
    fn scaling_every_rate_by_a_power_of_two_scales_the_objective_exactly() {
        let s = tiny_scenario();
        let n = crate::mobility::VehicleCounts::from_rows(2, 3, vec![4, 2, 7, 3, 5, 1]);
        let base = crate::linkbudget::ThroughputMatrix::from_rows(
            2,
            2,
            vec![8e5, 3e5, 1e5, 6e5],
        );
        let quadrupled = crate::linkbudget::ThroughputMatrix::from_rows(
            2,
            2,
            vec![4.0 * 8e5, 4.0 * 3e5, 4.0 * 1e5, 4.0 * 6e5],
        );
        let a = solve_relaxation(&build_model(&s, &base, &n, 2).unwrap()).unwrap();
        let b = solve_relaxation(&build_model(&s, &quadrupled, &n, 2).unwrap()).unwrap();
        assert_eq!((4.0 * a.objective_bps).to_bits(), b.objective_bps.to_bits());
    }

    #[test]
    fn no_recharge_sites_makes_battery_windows_infeasible() {
        let mut s = tiny_scenario();
        s.recharge_sites.clear();
        s.uavs[0].battery_capacity_steps = 1;
        let t = full_matrix(2, 2, 1e6);
        let n = uniform_counts(2, 3, 5);
        let m = build_model(&s, &t, &n, 2).unwrap();
        let err = solve_relaxation(&m).unwrap_err();
        match err {
            OptimizeError::Infeasible { family } => {
                assert_eq!(family, "battery-window");
            }
            other => panic!("expected infeasibility, got {other}"),
        }
    }
}
