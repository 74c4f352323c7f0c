//! Materialized planning model: variable layout, constraint rows, stats.

use std::collections::BTreeMap;
use std::fmt;

use crate::linkbudget::ThroughputMatrix;
use crate::lp::RowOp;
use crate::mobility::VehicleCounts;
use crate::scenario::Scenario;

use super::{window_divisor, window_start, ModelError};

/// Hard cap on constraint-matrix nonzeros; beyond this the instance is
/// out of planning scope.
const MAX_NONZEROS: usize = 50_000_000;

/// Constraint families of the planning model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum RowKind {
    ActionExclusivity,
    CoverContinuity,
    RechargeContinuity,
    TravelContinuity,
    BatteryWindow,
    UavSpectrumCapacity,
    ZoneSpectrumCapacity,
    ObjectiveEpigraph,
}

impl RowKind {
    pub(crate) const ALL: [RowKind; 8] = [
        RowKind::ActionExclusivity,
        RowKind::CoverContinuity,
        RowKind::RechargeContinuity,
        RowKind::TravelContinuity,
        RowKind::BatteryWindow,
        RowKind::UavSpectrumCapacity,
        RowKind::ZoneSpectrumCapacity,
        RowKind::ObjectiveEpigraph,
    ];

    pub(crate) fn name(self) -> &'static str {
        match self {
            RowKind::ActionExclusivity => "action-exclusivity",
            RowKind::CoverContinuity => "cover-continuity",
            RowKind::RechargeContinuity => "recharge-continuity",
            RowKind::TravelContinuity => "travel-continuity",
            RowKind::BatteryWindow => "battery-window",
            RowKind::UavSpectrumCapacity => "uav-spectrum-capacity",
            RowKind::ZoneSpectrumCapacity => "zone-spectrum-capacity",
            RowKind::ObjectiveEpigraph => "objective-epigraph",
        }
    }
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One materialized constraint row over the full variable space.
#[derive(Debug, Clone)]
pub(crate) struct ModelRow {
    pub(crate) kind: RowKind,
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) op: RowOp,
    pub(crate) rhs: f64,
}

/// Index layout of the full variable space: `gamma` block, then `tau`,
/// `rho`, `phi`, and the epigraph scalar last.
#[derive(Debug, Clone)]
pub(crate) struct VarLayout {
    pub(crate) num_uavs: usize,
    pub(crate) num_steps: usize,
    pub(crate) num_zones: usize,
    /// Links in sorted order; `tau` is indexed by link rank.
    pub(crate) links: Vec<(usize, usize)>,
    link_rank: BTreeMap<(usize, usize), usize>,
    /// Recharge sites in sorted order; `rho` is indexed by site rank.
    pub(crate) sites: Vec<usize>,
    site_rank: BTreeMap<usize, usize>,
    /// (area, zone) pairs with positive throughput, sorted; `phi` exists
    /// only for these.
    pub(crate) phi_pairs: Vec<(usize, usize)>,
    tau_base: usize,
    rho_base: usize,
    phi_base: usize,
}

impl VarLayout {
    pub(crate) fn new(s: &Scenario, t: &ThroughputMatrix) -> Self {
        let num_zones = s.zones.len();
        let num_steps = s.num_steps;
        let num_uavs = s.uavs.len();
        let mut links = s.links.clone();
        links.sort_unstable();
        links.dedup();
        let link_rank = links.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut sites = s.recharge_sites.clone();
        sites.sort_unstable();
        sites.dedup();
        let site_rank = sites.iter().enumerate().map(|(i, &z)| (z, i)).collect();
        let mut phi_pairs = Vec::new();
        for a in 0..t.num_areas() {
            for z in 0..num_zones {
                if t.get(a, z) > 0.0 {
                    phi_pairs.push((a, z));
                }
            }
        }
        let dk = num_uavs * num_steps;
        let tau_base = dk * num_zones;
        let rho_base = tau_base + dk * links.len();
        let phi_base = rho_base + dk * sites.len();
        Self {
            num_uavs,
            num_steps,
            num_zones,
            links,
            link_rank,
            sites,
            site_rank,
            phi_pairs,
            tau_base,
            rho_base,
            phi_base,
        }
    }

    pub(crate) fn gamma(&self, d: usize, k: usize, z: usize) -> usize {
        (d * self.num_steps + k) * self.num_zones + z
    }

    pub(crate) fn tau_by_rank(&self, d: usize, k: usize, link: usize) -> usize {
        self.tau_base + (d * self.num_steps + k) * self.links.len() + link
    }

    pub(crate) fn tau(&self, d: usize, k: usize, from: usize, to: usize) -> Option<usize> {
        self.link_rank
            .get(&(from, to))
            .map(|&l| self.tau_by_rank(d, k, l))
    }

    pub(crate) fn rho_by_rank(&self, d: usize, k: usize, site: usize) -> usize {
        self.rho_base + (d * self.num_steps + k) * self.sites.len() + site
    }

    pub(crate) fn rho(&self, d: usize, k: usize, z: usize) -> Option<usize> {
        self.site_rank.get(&z).map(|&r| self.rho_by_rank(d, k, r))
    }

    pub(crate) fn phi_by_rank(&self, pair: usize, d: usize, k: usize) -> usize {
        self.phi_base + (pair * self.num_uavs + d) * self.num_steps + k
    }

    /// Index of the epigraph scalar `t`.
    pub(crate) fn t_index(&self) -> usize {
        self.phi_base + self.phi_pairs.len() * self.num_uavs * self.num_steps
    }

    /// Total variable count, `t` included.
    pub(crate) fn num_vars(&self) -> usize {
        self.t_index() + 1
    }

    /// First index of the `phi` block.
    pub(crate) fn phi_base(&self) -> usize {
        self.phi_base
    }
}

/// Behavior switches for model building.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelOptions {
    /// Divide early rolling averages by the full horizon instead of the
    /// number of steps actually summed. Off by default: the truncated
    /// divisor makes early and late windows comparable, while the literal
    /// divisor deflates the first `horizon - 1` steps.
    pub literal_window_divisor: bool,
}

/// Variable and constraint counts of a built model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelStats {
    /// Cover variables.
    pub num_gamma: usize,
    /// Travel variables.
    pub num_tau: usize,
    /// Recharge variables.
    pub num_rho: usize,
    /// Spectrum variables (after pruning zero-throughput pairs).
    pub num_phi: usize,
    /// All variables including the epigraph scalar.
    pub num_vars: usize,
    /// Rows per constraint family, in declaration order.
    pub rows_by_family: Vec<(&'static str, usize)>,
    /// Total constraint rows.
    pub num_rows: usize,
    /// Total constraint-matrix nonzeros.
    pub num_nonzeros: usize,
}

impl fmt::Display for ModelStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "variables: {} ({} cover, {} travel, {} recharge, {} spectrum, 1 objective)",
            self.num_vars, self.num_gamma, self.num_tau, self.num_rho, self.num_phi
        )?;
        writeln!(f, "rows: {} ({} nonzeros)", self.num_rows, self.num_nonzeros)?;
        for (name, count) in &self.rows_by_family {
            writeln!(f, "  {name}: {count}")?;
        }
        Ok(())
    }
}

/// A fully materialized planning model plus the data needed to interpret
/// solutions.
#[derive(Debug)]
pub struct PlanningModel {
    pub(crate) layout: VarLayout,
    pub(crate) rows: Vec<ModelRow>,
    pub(crate) homes: Vec<usize>,
    pub(crate) tmat: ThroughputMatrix,
    pub(crate) counts: VehicleCounts,
    pub(crate) horizon: usize,
    pub(crate) options: ModelOptions,
    /// (area, step) pairs with vehicles present, sorted; the objective
    /// minimizes over exactly these.
    pub(crate) included: Vec<(usize, usize)>,
    stats: ModelStats,
}

impl PlanningModel {
    /// Size audit of the built model.
    pub fn stats(&self) -> &ModelStats {
        &self.stats
    }

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
        self.tmat.num_areas()
    }

    /// Averaging horizon in steps.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Exact nonzero / row counts computed arithmetically before any row is
/// materialized, so oversized instances are rejected cheaply.
struct SizePlan {
    rows: Vec<(RowKind, usize)>,
    nonzeros: usize,
}

fn plan_size(
    s: &Scenario,
    layout: &VarLayout,
    counts: &VehicleCounts,
    batteries: &[usize],
    horizon: usize,
) -> SizePlan {
    let d = layout.num_uavs;
    let k = layout.num_steps;
    let z = layout.num_zones;
    let l = layout.links.len();
    let r = layout.sites.len();

    let indegree = |zone: usize| layout.links.iter().filter(|&&(_, to)| to == zone).count();
    let indegree_sum_sites: usize = layout.sites.iter().map(|&site| indegree(site)).sum();
    let is_site = |zone: usize| s.is_recharge_site(zone);

    let mut rows = Vec::new();
    let mut nnz = 0;

    rows.push((RowKind::ActionExclusivity, d * k));
    nnz += d * k * (z + l + r);

    rows.push((RowKind::CoverContinuity, d * k * z));
    nnz += d * z;
    if k > 1 {
        nnz += d * (k - 1) * (2 * z + l + r);
    }

    rows.push((RowKind::RechargeContinuity, d * k * r));
    nnz += d * r;
    if k > 1 {
        nnz += d * (k - 1) * (3 * r + indegree_sum_sites);
    }

    rows.push((RowKind::TravelContinuity, d * k * l));
    nnz += d * l;
    if k > 1 {
        let per_link: usize = layout
            .links
            .iter()
            .map(|&(from, _)| 2 + indegree(from) + usize::from(is_site(from)))
            .sum();
        nnz += d * (k - 1) * per_link;
    }

    let battery_rows: usize = batteries.iter().map(|&b| k.saturating_sub(b)).sum();
    rows.push((RowKind::BatteryWindow, battery_rows));
    nnz += batteries
        .iter()
        .map(|&b| k.saturating_sub(b) * (b + 1) * r)
        .sum::<usize>();

    let mut areas_per_zone = vec![0usize; z];
    for &(_, zone) in &layout.phi_pairs {
        areas_per_zone[zone] += 1;
    }
    let covered_zones = areas_per_zone.iter().filter(|&&c| c > 0).count();
    let pairs = layout.phi_pairs.len();

    rows.push((RowKind::UavSpectrumCapacity, d * k * covered_zones));
    nnz += d * k * (pairs + covered_zones);

    rows.push((RowKind::ZoneSpectrumCapacity, k * covered_zones));
    nnz += k * d * pairs;

    let mut zones_per_area = vec![0usize; counts.num_areas()];
    for &(area, _) in &layout.phi_pairs {
        zones_per_area[area] += 1;
    }
    let mut epigraph_rows = 0;
    let mut epigraph_nnz = 0;
    for a in 0..counts.num_areas() {
        for step in 0..k {
            if counts.get(a, step) == 0 {
                continue;
            }
            epigraph_rows += 1;
            let populated = (window_start(step, horizon)..=step)
                .filter(|&h| counts.get(a, h) > 0)
                .count();
            epigraph_nnz += 1 + d * populated * zones_per_area[a];
        }
    }
    rows.push((RowKind::ObjectiveEpigraph, epigraph_rows));
    nnz += epigraph_nnz;

    SizePlan {
        rows,
        nonzeros: nnz,
    }
}

/// Builds the planning model with default options.
pub fn build_model(
    s: &Scenario,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
) -> Result<PlanningModel, ModelError> {
    build_model_with_options(s, t, n, horizon, ModelOptions::default())
}

/// Builds the planning model.
///
/// Errors when the matrices disagree with the scenario, when the horizon
/// is zero, when no (area, step) pair has vehicles (the max-min objective
/// would range over nothing), or when the instance is too large.
pub fn build_model_with_options(
    s: &Scenario,
    t: &ThroughputMatrix,
    n: &VehicleCounts,
    horizon: usize,
    options: ModelOptions,
) -> Result<PlanningModel, ModelError> {
    if t.num_areas() != s.areas.len() || t.num_zones() != s.zones.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "throughput matrix is {}x{}, scenario has {} areas and {} zones",
            t.num_areas(),
            t.num_zones(),
            s.areas.len(),
            s.zones.len()
        )));
    }
    if n.num_areas() != s.areas.len() || n.num_steps() != s.num_steps {
        return Err(ModelError::DimensionMismatch(format!(
            "vehicle counts are {}x{}, scenario has {} areas and {} steps",
            n.num_areas(),
            n.num_steps(),
            s.areas.len(),
            s.num_steps
        )));
    }
    if horizon == 0 {
        return Err(ModelError::InvalidHorizon);
    }
    if n.is_all_zero() {
        return Err(ModelError::ObjectiveUndefined);
    }

    let layout = VarLayout::new(s, t);
    let homes: Vec<usize> = s.uavs.iter().map(|u| u.home_zone).collect();
    let batteries: Vec<usize> = s.uavs.iter().map(|u| u.battery_capacity_steps).collect();

    let size = plan_size(s, &layout, n, &batteries, horizon);
    if size.nonzeros > MAX_NONZEROS {
        return Err(ModelError::InstanceTooLarge {
            estimated_nonzeros: size.nonzeros,
            limit: MAX_NONZEROS,
        });
    }

    let num_uavs = layout.num_uavs;
    let num_steps = layout.num_steps;
    let num_zones = layout.num_zones;

    // Incoming structure per zone: which (gamma / tau / rho) variables at
    // step k-1 leave a UAV at that zone.
    let mut in_links: Vec<Vec<usize>> = vec![Vec::new(); num_zones];
    for (rank, &(_, to)) in layout.links.iter().enumerate() {
        in_links[to].push(rank);
    }

    let mut rows = Vec::new();

    // Exactly one action per UAV per step.
    for d in 0..num_uavs {
        for k in 0..num_steps {
            let mut terms = Vec::with_capacity(num_zones + layout.links.len() + layout.sites.len());
            for z in 0..num_zones {
                terms.push((layout.gamma(d, k, z), 1.0));
            }
            for l in 0..layout.links.len() {
                terms.push((layout.tau_by_rank(d, k, l), 1.0));
            }
            for r in 0..layout.sites.len() {
                terms.push((layout.rho_by_rank(d, k, r), 1.0));
            }
            rows.push(ModelRow {
                kind: RowKind::ActionExclusivity,
                terms,
                op: RowOp::Eq,
                rhs: 1.0,
            });
        }
    }

    // Presence at zone `z` when step `k` starts: the UAV covered z,
    // arrived over a link into z, or recharged at z during step k-1. At
    // step 0 presence is fixed by the home zone (a virtual recharge).
    let presence_terms = |d: usize, k: usize, z: usize, terms: &mut Vec<(usize, f64)>| {
        terms.push((layout.gamma(d, k - 1, z), -1.0));
        for &rank in &in_links[z] {
            terms.push((layout.tau_by_rank(d, k - 1, rank), -1.0));
        }
        if let Some(idx) = layout.rho(d, k - 1, z) {
            terms.push((idx, -1.0));
        }
    };

    for d in 0..num_uavs {
        for k in 0..num_steps {
            for z in 0..num_zones {
                let mut terms = vec![(layout.gamma(d, k, z), 1.0)];
                let rhs = if k == 0 {
                    f64::from(homes[d] == z)
                } else {
                    presence_terms(d, k, z, &mut terms);
                    0.0
                };
                rows.push(ModelRow {
                    kind: RowKind::CoverContinuity,
                    terms,
                    op: RowOp::Le,
                    rhs,
                });
            }
        }
    }

    for d in 0..num_uavs {
        for k in 0..num_steps {
            for &site in &layout.sites {
                let mut terms = vec![(layout.rho(d, k, site).unwrap(), 1.0)];
                let rhs = if k == 0 {
                    f64::from(homes[d] == site)
                } else {
                    presence_terms(d, k, site, &mut terms);
                    0.0
                };
                rows.push(ModelRow {
                    kind: RowKind::RechargeContinuity,
                    terms,
                    op: RowOp::Le,
                    rhs,
                });
            }
        }
    }

    for d in 0..num_uavs {
        for k in 0..num_steps {
            for (rank, &(from, _)) in layout.links.iter().enumerate() {
                let mut terms = vec![(layout.tau_by_rank(d, k, rank), 1.0)];
                let rhs = if k == 0 {
                    f64::from(homes[d] == from)
                } else {
                    presence_terms(d, k, from, &mut terms);
                    0.0
                };
                rows.push(ModelRow {
                    kind: RowKind::TravelContinuity,
                    terms,
                    op: RowOp::Le,
                    rhs,
                });
            }
        }
    }

    // At least one recharge in every window of battery-capacity + 1 steps.
    for d in 0..num_uavs {
        let b = batteries[d];
        for k in b..num_steps {
            let mut terms = Vec::with_capacity((b + 1) * layout.sites.len());
            for h in (k - b)..=k {
                for r in 0..layout.sites.len() {
                    terms.push((layout.rho_by_rank(d, h, r), 1.0));
                }
            }
            rows.push(ModelRow {
                kind: RowKind::BatteryWindow,
                terms,
                op: RowOp::Ge,
                rhs: 1.0,
            });
        }
    }

    // Spectrum only flows from a UAV that covers the zone, and sums to at
    // most its whole bandwidth.
    let mut pairs_per_zone: Vec<Vec<usize>> = vec![Vec::new(); num_zones];
    for (rank, &(_, z)) in layout.phi_pairs.iter().enumerate() {
        pairs_per_zone[z].push(rank);
    }
    for d in 0..num_uavs {
        for k in 0..num_steps {
            for z in 0..num_zones {
                if pairs_per_zone[z].is_empty() {
                    continue;
                }
                let mut terms: Vec<(usize, f64)> = pairs_per_zone[z]
                    .iter()
                    .map(|&pair| (layout.phi_by_rank(pair, d, k), 1.0))
                    .collect();
                terms.push((layout.gamma(d, k, z), -1.0));
                rows.push(ModelRow {
                    kind: RowKind::UavSpectrumCapacity,
                    terms,
                    op: RowOp::Le,
                    rhs: 0.0,
                });
            }
        }
    }

    // All UAVs at one zone share a single unit of spectrum.
    for k in 0..num_steps {
        for z in 0..num_zones {
            if pairs_per_zone[z].is_empty() {
                continue;
            }
            let mut terms = Vec::with_capacity(pairs_per_zone[z].len() * num_uavs);
            for &pair in &pairs_per_zone[z] {
                for d in 0..num_uavs {
                    terms.push((layout.phi_by_rank(pair, d, k), 1.0));
                }
            }
            rows.push(ModelRow {
                kind: RowKind::ZoneSpectrumCapacity,
                terms,
                op: RowOp::Le,
                rhs: 1.0,
            });
        }
    }

    // The epigraph scalar sits below every rolling per-user average over
    // the populated (area, step) pairs.
    let mut zones_per_area: Vec<Vec<(usize, usize)>> = vec![Vec::new(); t.num_areas()];
    for (rank, &(a, z)) in layout.phi_pairs.iter().enumerate() {
        zones_per_area[a].push((rank, z));
    }
    let mut included = Vec::new();
    for a in 0..t.num_areas() {
        for k in 0..num_steps {
            if n.get(a, k) == 0 {
                continue;
            }
            included.push((a, k));
            let divisor = window_divisor(k, horizon, options.literal_window_divisor);
            let mut terms = vec![(layout.t_index(), 1.0)];
            for h in window_start(k, horizon)..=k {
                let users = n.get(a, h);
                if users == 0 {
                    continue;
                }
                let weight = -1.0 / (divisor * f64::from(users));
                for &(pair, z) in &zones_per_area[a] {
                    let rate = t.get(a, z);
                    for d in 0..num_uavs {
                        terms.push((layout.phi_by_rank(pair, d, h), weight * rate));
                    }
                }
            }
            rows.push(ModelRow {
                kind: RowKind::ObjectiveEpigraph,
                terms,
                op: RowOp::Le,
                rhs: 0.0,
            });
        }
    }

    // The arithmetic size plan must agree with what was materialized.
    let mut by_family: BTreeMap<RowKind, (usize, usize)> = BTreeMap::new();
    for row in &rows {
        let entry = by_family.entry(row.kind).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += row.terms.len();
    }
    let mut rows_by_family = Vec::new();
    let mut total_nnz = 0;
    for kind in RowKind::ALL {
        let (count, nnz) = by_family.get(&kind).copied().unwrap_or((0, 0));
        rows_by_family.push((kind.name(), count));
        total_nnz += nnz;
        let planned = size
            .rows
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|&(_, c)| c)
            .unwrap_or(0);
        debug_assert_eq!(planned, count, "row count drift for {kind}");
    }
    debug_assert_eq!(size.nonzeros, total_nnz, "nonzero count drift");

    let stats = ModelStats {
        num_gamma: num_uavs * num_steps * num_zones,
        num_tau: num_uavs * num_steps * layout.links.len(),
        num_rho: num_uavs * num_steps * layout.sites.len(),
        num_phi: layout.phi_pairs.len() * num_uavs * num_steps,
        num_vars: layout.num_vars(),
        rows_by_family,
        num_rows: rows.len(),
        num_nonzeros: total_nnz,
    };

    Ok(PlanningModel {
        layout,
        rows,
        homes,
        tmat: t.clone(),
        counts: n.clone(),
        horizon,
        options,
        included,
        stats,
    })
}
