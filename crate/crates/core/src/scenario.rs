//! Problem-instance data model, validation, and synthetic generation.
//!
//! A [`Scenario`] bundles everything static about one disaster instance:
//! the zone grid UAVs move over, the population areas (which double as road
//! segments for the mobility simulation), the zone adjacency links, the
//! recharge sites, the UAV fleet, and the planning time grid.
//!
//! [`generate_scenario`] builds synthetic instances on a regular grid, with
//! a road network that drains toward a safe corner of the map, so that any
//! scale from a one-zone toy to the full default (100 zones, 500 areas,
//! 20 UAVs) is reproducible from a seed.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Error raised by scenario construction, generation, or I/O.
#[derive(Debug, Error)]
pub enum ScenarioError {
    /// A generator configuration field is out of range.
    #[error("invalid generator config: {field} {problem}")]
    InvalidConfig {
        /// Name of the offending configuration field.
        field: &'static str,
        /// What is wrong with it.
        problem: String,
    },
    /// The scenario file could not be read or written.
    #[error("scenario I/O failed: {0}")]
    Io(#[from] std::io::Error),
    /// The scenario file is not valid JSON or has the wrong shape.
    #[error("scenario parse failed: {0}")]
    Parse(#[from] serde_json::Error),
}

/// An aerial location where a UAV can hover, cover, or recharge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// Zone id, dense from 0.
    pub id: usize,
    /// Horizontal position in meters.
    pub x_m: f64,
    /// Vertical position in meters.
    pub y_m: f64,
}

/// A ground area needing coverage. Each area is also one road segment of
/// the evacuation network, so it carries the segment metadata used by the
/// mobility simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    /// Area id, dense from 0.
    pub id: usize,
    /// Centroid x in meters.
    pub x_m: f64,
    /// Centroid y in meters.
    pub y_m: f64,
    /// Segment length in meters.
    pub length_m: f64,
    /// Ticks a vehicle needs to traverse the segment when uncongested.
    pub free_flow_ticks: u64,
    /// Maximum vehicles the segment can hold.
    pub storage_capacity: u64,
}

/// A UAV and its battery/home configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    /// UAV id, dense from 0.
    pub id: usize,
    /// Maximum consecutive non-recharge steps the battery allows.
    pub battery_capacity_steps: usize,
    /// Recharge site the UAV starts from (virtually recharged before step 0).
    pub home_zone: usize,
}

/// Directed road network over the areas.
///
/// Nodes are area ids; an edge `(u, v)` means traffic leaving segment `u`
/// may enter segment `v`. Origins are flooded areas where evacuating
/// vehicles start; destinations are safe areas where they leave the
/// network after traversing the segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaGraph {
    /// Directed edges between area ids.
    pub edges: Vec<(usize, usize)>,
    /// Areas where vehicles start.
    pub origins: Vec<usize>,
    /// Areas where vehicles exit the network.
    pub destinations: Vec<usize>,
}

/// One static problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Zones the UAVs can occupy.
    pub zones: Vec<Zone>,
    /// Population areas / road segments.
    pub areas: Vec<Area>,
    /// Ordered zone-id pairs a UAV can travel along in one step. Symmetric.
    pub links: Vec<(usize, usize)>,
    /// Zone ids where batteries can be swapped in one step.
    pub recharge_sites: Vec<usize>,
    /// The fleet.
    pub uavs: Vec<Uav>,
    /// Number of planning steps.
    pub num_steps: usize,
    /// Seconds per planning step.
    pub step_duration_s: f64,
    /// Maximum zone distance for a link, in meters.
    pub link_range_m: f64,
    /// Evacuation road network.
    pub area_graph: AreaGraph,
}

impl Scenario {
    /// Serializes the scenario as pretty-printed JSON.
    pub fn to_json_writer<W: Write>(&self, mut w: W) -> Result<(), ScenarioError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a scenario from JSON.
    pub fn from_json_reader<R: Read>(r: R) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_reader(r)?)
    }

    /// True when `(z1, z2)` is a link.
    pub fn has_link(&self, z1: usize, z2: usize) -> bool {
        self.links.binary_search(&(z1, z2)).is_ok()
    }

    /// True when `z` is a recharge site.
    pub fn is_recharge_site(&self, z: usize) -> bool {
        self.recharge_sites.contains(&z)
    }

    /// Neighbors of `z` in the zone-link graph, ascending.
    pub fn zone_neighbors(&self, z: usize) -> Vec<usize> {
        let start = self.links.partition_point(|&(a, _)| a < z);
        self.links[start..]
            .iter()
            .take_while(|&&(a, _)| a == z)
            .map(|&(_, b)| b)
            .collect()
    }

    /// Hop distance from every zone to its nearest recharge site
    /// (`usize::MAX` when unreachable). Multi-source breadth-first search
    /// over the link graph.
    pub fn distance_to_recharge(&self) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.zones.len()];
        let mut queue = std::collections::VecDeque::new();
        for &r in &self.recharge_sites {
            dist[r] = 0;
            queue.push_back(r);
        }
        while let Some(z) = queue.pop_front() {
            for n in self.zone_neighbors(z) {
                if dist[n] == usize::MAX {
                    dist[n] = dist[z] + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

/// Knobs for [`generate_scenario`]. Defaults reproduce the full-scale
/// instance family: 100 zones, 7 recharge sites, 500 areas, 20 UAVs with
/// 20-step batteries, 150 ten-minute steps, 1 km link range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Zone grid rows.
    pub grid_rows: usize,
    /// Zone grid columns.
    pub grid_cols: usize,
    /// Number of areas (road segments).
    pub num_areas: usize,
    /// Fleet size.
    pub num_uavs: usize,
    /// Number of recharge sites.
    pub num_recharge_sites: usize,
    /// Battery capacity in steps, shared by the fleet.
    pub battery_steps: usize,
    /// Planning steps.
    pub num_steps: usize,
    /// Seconds per step.
    pub step_duration_s: f64,
    /// Maximum link length in meters.
    pub link_range_m: f64,
    /// RNG seed.
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            grid_rows: 10,
            grid_cols: 10,
            num_areas: 500,
            num_uavs: 20,
            num_recharge_sites: 7,
            battery_steps: 20,
            num_steps: 150,
            step_duration_s: 600.0,
            link_range_m: 1000.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    fn check(&self) -> Result<(), ScenarioError> {
        let positive = |field, v: usize| {
            if v == 0 {
                Err(ScenarioError::InvalidConfig {
                    field,
                    problem: "must be at least 1".into(),
                })
            } else {
                Ok(())
            }
        };
        positive("grid_rows", self.grid_rows)?;
        positive("grid_cols", self.grid_cols)?;
        positive("num_areas", self.num_areas)?;
        positive("num_uavs", self.num_uavs)?;
        positive("num_recharge_sites", self.num_recharge_sites)?;
        positive("battery_steps", self.battery_steps)?;
        positive("num_steps", self.num_steps)?;
        if self.num_recharge_sites > self.grid_rows * self.grid_cols {
            return Err(ScenarioError::InvalidConfig {
                field: "num_recharge_sites",
                problem: format!(
                    "{} exceeds the zone count {}",
                    self.num_recharge_sites,
                    self.grid_rows * self.grid_cols
                ),
            });
        }
        if !(self.link_range_m > 0.0) || !self.link_range_m.is_finite() {
            return Err(ScenarioError::InvalidConfig {
                field: "link_range_m",
                problem: "must be positive and finite".into(),
            });
        }
        if !(self.step_duration_s > 0.0) || !self.step_duration_s.is_finite() {
            return Err(ScenarioError::InvalidConfig {
                field: "step_duration_s",
                problem: "must be positive and finite".into(),
            });
        }
        Ok(())
    }
}

/// Vehicle speed used to derive segment free-flow times, in m/s (50 km/h).
const SEGMENT_SPEED_M_PER_S: f64 = 13.9;

/// Jam spacing used to derive segment storage capacity, in meters per
/// vehicle.
const VEHICLE_JAM_SPACING_M: f64 = 7.5;

/// Fraction of areas designated as safe destinations (at least one).
const DESTINATION_FRACTION: f64 = 0.02;

/// Fraction of areas designated as flooded origins (at least one).
const ORIGIN_FRACTION: f64 = 0.2;

/// Probability that a non-destination area gets a second outgoing road.
const EXTRA_EDGE_PROB: f64 = 0.3;

/// Builds a synthetic instance deterministically from `config.seed`.
///
/// Zones sit on a regular grid spaced at 90% of the link range, so
/// horizontal and vertical grid neighbors are linked. Recharge sites are
/// spread evenly over the zone id space. Areas are scattered uniformly
/// over the grid's bounding box; their road network drains toward a safe
/// corner beyond the grid: every non-destination area gets an edge to its
/// nearest area strictly closer to the safe point, which makes the graph
/// acyclic and guarantees every origin reaches a destination.
pub fn generate_scenario(config: &GeneratorConfig) -> Result<Scenario, ScenarioError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let spacing = 0.9 * config.link_range_m;
    let num_zones = config.grid_rows * config.grid_cols;
    let zones: Vec<Zone> = (0..num_zones)
        .map(|id| Zone {
            id,
            x_m: (id % config.grid_cols) as f64 * spacing,
            y_m: (id / config.grid_cols) as f64 * spacing,
        })
        .collect();

    let mut links = Vec::new();
    for a in &zones {
        for b in &zones {
            if a.id != b.id {
                let d = ((a.x_m - b.x_m).powi(2) + (a.y_m - b.y_m).powi(2)).sqrt();
                if d <= config.link_range_m {
                    links.push((a.id, b.id));
                }
            }
        }
    }
    links.sort_unstable();

    let recharge_sites: Vec<usize> = (0..config.num_recharge_sites)
        .map(|i| (i as f64 + 0.5) * num_zones as f64 / config.num_recharge_sites as f64)
        .map(|x| (x as usize).min(num_zones - 1))
        .collect();

    let uavs: Vec<Uav> = (0..config.num_uavs)
        .map(|id| Uav {
            id,
            battery_capacity_steps: config.battery_steps,
            home_zone: recharge_sites[id % recharge_sites.len()],
        })
        .collect();

    let width = (config.grid_cols - 1).max(1) as f64 * spacing;
    let height = (config.grid_rows - 1).max(1) as f64 * spacing;
    let areas: Vec<Area> = (0..config.num_areas)
        .map(|id| {
            let x_m = rng.random_range(0.0..=width);
            let y_m = rng.random_range(0.0..=height);
            let length_m = rng.random_range(300.0..700.0);
            Area {
                id,
                x_m,
                y_m,
                length_m,
                free_flow_ticks: (length_m / SEGMENT_SPEED_M_PER_S).ceil().max(1.0) as u64,
                storage_capacity: (length_m / VEHICLE_JAM_SPACING_M).round().max(1.0) as u64,
            }
        })
        .collect();

    // The safe point sits beyond the far grid corner; squared distance to it
    // is the drainage potential of each area.
    let safe = (width * 1.2 + spacing, height * 1.2 + spacing);
    let potential: Vec<f64> = areas
        .iter()
        .map(|a| (a.x_m - safe.0).powi(2) + (a.y_m - safe.1).powi(2))
        .collect();

    let mut by_potential: Vec<usize> = (0..config.num_areas).collect();
    by_potential.sort_by(|&a, &b| potential[a].total_cmp(&potential[b]).then(a.cmp(&b)));

    let num_destinations = ((config.num_areas as f64 * DESTINATION_FRACTION).ceil() as usize)
        .clamp(1, config.num_areas);
    let num_origins = ((config.num_areas as f64 * ORIGIN_FRACTION).ceil() as usize)
        .clamp(1, config.num_areas);
    let mut destinations: Vec<usize> = by_potential[..num_destinations].to_vec();
    let mut origins: Vec<usize> = by_potential[config.num_areas - num_origins..].to_vec();
    destinations.sort_unstable();
    origins.sort_unstable();
    let dest_set: BTreeSet<usize> = destinations.iter().copied().collect();

    let mut edges = Vec::new();
    for a in 0..config.num_areas {
        if dest_set.contains(&a) {
            continue;
        }
        let closer = |b: &&usize| potential[**b] < potential[a];
        let nearest = by_potential
            .iter()
            .filter(closer)
            .min_by(|&&x, &&y| {
                let dx = (areas[x].x_m - areas[a].x_m).powi(2)
                    + (areas[x].y_m - areas[a].y_m).powi(2);
                let dy = (areas[y].x_m - areas[a].x_m).powi(2)
                    + (areas[y].y_m - areas[a].y_m).powi(2);
                dx.total_cmp(&dy).then(x.cmp(&y))
            })
            .copied()
            .expect("a non-destination area always has a strictly closer area");
        edges.push((a, nearest));
        if rng.random_range(0.0..1.0) < EXTRA_EDGE_PROB {
            let candidates: Vec<usize> = by_potential
                .iter()
                .filter(closer)
                .copied()
                .filter(|&b| b != nearest)
                .collect();
            if !candidates.is_empty() {
                let pick = candidates[rng.random_range(0..candidates.len())];
                edges.push((a, pick));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    Ok(Scenario {
        zones,
        areas,
        links,
        recharge_sites,
        uavs,
        num_steps: config.num_steps,
        step_duration_s: config.step_duration_s,
        link_range_m: config.link_range_m,
        area_graph: AreaGraph {
            edges,
            origins,
            destinations,
        },
    })
}

/// One finding from [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    /// Zone ids are not dense from 0 or coordinates are not finite.
    BadZone { zone: usize, problem: String },
    /// Area ids or segment metadata break their invariants.
    BadArea { area: usize, problem: String },
    /// A link references a missing zone, exceeds the range, or has no
    /// reverse twin.
    BadLink { from: usize, to: usize, problem: String },
    /// A recharge site is not a zone.
    BadRechargeSite { zone: usize },
    /// A UAV's home is not a recharge site or its battery is zero.
    BadUav { uav: usize, problem: String },
    /// The time grid is degenerate.
    BadTimeGrid { problem: String },
    /// The area graph references missing areas or has no origin or
    /// destination.
    BadAreaGraph { problem: String },
    /// No zone at positive throughput serves this area; it can never
    /// receive coverage, which pins the max-min objective at zero.
    AreaUnreachable { area: usize },
    /// This zone cannot reach any recharge site over the link graph, so no
    /// UAV can ever visit it sustainably.
    ZoneCutOffFromRecharge { zone: usize },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BadZone { zone, problem } => write!(f, "zone {zone}: {problem}"),
            Self::BadArea { area, problem } => write!(f, "area {area}: {problem}"),
            Self::BadLink { from, to, problem } => {
                write!(f, "link ({from}, {to}): {problem}")
            }
            Self::BadRechargeSite { zone } => {
                write!(f, "recharge site {zone} is not a valid zone id")
            }
            Self::BadUav { uav, problem } => write!(f, "uav {uav}: {problem}"),
            Self::BadTimeGrid { problem } => write!(f, "time grid: {problem}"),
            Self::BadAreaGraph { problem } => write!(f, "area graph: {problem}"),
            Self::AreaUnreachable { area } => {
                write!(f, "area {area} unreachable: zero throughput from every zone")
            }
            Self::ZoneCutOffFromRecharge { zone } => {
                write!(f, "zone {zone} cannot reach any recharge site")
            }
        }
    }
}

/// Result of [`validate_scenario`]: hard invariant breaks in `violations`,
/// soft findings (instance is usable but degenerate) in `warnings`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Invariant violations; empty means the scenario is valid.
    pub violations: Vec<ValidationIssue>,
    /// Non-fatal findings worth surfacing before a planning run.
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    /// True when no violations were found (warnings allowed).
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every scenario invariant and reports degeneracies.
///
/// When a throughput matrix is supplied, areas with zero throughput from
/// every zone are flagged as warnings, since they pin the max-min
/// objective at zero.
pub fn validate_scenario(
    s: &Scenario,
    tmatrix: Option<&crate::linkbudget::ThroughputMatrix>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let nz = s.zones.len();

    for (i, z) in s.zones.iter().enumerate() {
        if z.id != i {
            report.violations.push(ValidationIssue::BadZone {
                zone: z.id,
                problem: format!("id out of order at index {i}; ids must be dense from 0"),
            });
        }
        if !z.x_m.is_finite() || !z.y_m.is_finite() {
            report.violations.push(ValidationIssue::BadZone {
                zone: z.id,
                problem: "coordinates must be finite".into(),
            });
        }
    }

    for (i, a) in s.areas.iter().enumerate() {
        if a.id != i {
            report.violations.push(ValidationIssue::BadArea {
                area: a.id,
                problem: format!("id out of order at index {i}; ids must be dense from 0"),
            });
        }
        if !a.x_m.is_finite() || !a.y_m.is_finite() || !a.length_m.is_finite() {
            report.violations.push(ValidationIssue::BadArea {
                area: a.id,
                problem: "coordinates and length must be finite".into(),
            });
        }
        if a.storage_capacity == 0 {
            report.violations.push(ValidationIssue::BadArea {
                area: a.id,
                problem: "storage capacity must be at least 1".into(),
            });
        }
        if a.free_flow_ticks == 0 {
            report.violations.push(ValidationIssue::BadArea {
                area: a.id,
                problem: "free-flow time must be at least 1 tick".into(),
            });
        }
    }

    let link_set: BTreeSet<(usize, usize)> = s.links.iter().copied().collect();
    for &(z1, z2) in &s.links {
        if z1 >= nz || z2 >= nz {
            report.violations.push(ValidationIssue::BadLink {
                from: z1,
                to: z2,
                problem: "endpoint is not a valid zone id".into(),
            });
            continue;
        }
        if z1 == z2 {
            report.violations.push(ValidationIssue::BadLink {
                from: z1,
                to: z2,
                problem: "self-links are not allowed".into(),
            });
        }
        let a = &s.zones[z1];
        let b = &s.zones[z2];
        let d = ((a.x_m - b.x_m).powi(2) + (a.y_m - b.y_m).powi(2)).sqrt();
        if d > s.link_range_m {
            report.violations.push(ValidationIssue::BadLink {
                from: z1,
                to: z2,
                problem: format!("distance {d:.1} m exceeds link range {} m", s.link_range_m),
            });
        }
        if !link_set.contains(&(z2, z1)) {
            report.violations.push(ValidationIssue::BadLink {
                from: z1,
                to: z2,
                problem: "missing the reverse link; the link set must be symmetric".into(),
            });
        }
    }

    for &r in &s.recharge_sites {
        if r >= nz {
            report
                .violations
                .push(ValidationIssue::BadRechargeSite { zone: r });
        }
    }

    for u in &s.uavs {
        if u.battery_capacity_steps == 0 {
            report.violations.push(ValidationIssue::BadUav {
                uav: u.id,
                problem: "battery capacity must be at least 1 step".into(),
            });
        }
        if !s.recharge_sites.contains(&u.home_zone) {
            report.violations.push(ValidationIssue::BadUav {
                uav: u.id,
                problem: format!("home zone {} is not a recharge site", u.home_zone),
            });
        }
    }

    if s.num_steps == 0 {
        report.violations.push(ValidationIssue::BadTimeGrid {
            problem: "num_steps must be at least 1".into(),
        });
    }
    if !(s.step_duration_s > 0.0) || !s.step_duration_s.is_finite() {
        report.violations.push(ValidationIssue::BadTimeGrid {
            problem: "step_duration_s must be positive and finite".into(),
        });
    }

    let na = s.areas.len();
    for &(u, v) in &s.area_graph.edges {
        if u >= na || v >= na {
            report.violations.push(ValidationIssue::BadAreaGraph {
                problem: format!("edge ({u}, {v}) references a missing area"),
            });
        }
    }
    if s.area_graph.origins.is_empty() {
        report.violations.push(ValidationIssue::BadAreaGraph {
            problem: "no origin areas".into(),
        });
    }
    if s.area_graph.destinations.is_empty() {
        report.violations.push(ValidationIssue::BadAreaGraph {
            problem: "no destination areas".into(),
        });
    }
    for &a in s.area_graph.origins.iter().chain(&s.area_graph.destinations) {
        if a >= na {
            report.violations.push(ValidationIssue::BadAreaGraph {
                problem: format!("origin/destination {a} is not a valid area id"),
            });
        }
    }

    if report.is_valid() {
        let dist = s.distance_to_recharge();
        for (z, &d) in dist.iter().enumerate() {
            if d == usize::MAX {
                report
                    .warnings
                    .push(ValidationIssue::ZoneCutOffFromRecharge { zone: z });
            }
        }
        if let Some(t) = tmatrix {
            for a in 0..na {
                if (0..nz).all(|z| t.get(a, z) == 0.0) {
                    report.warnings.push(ValidationIssue::AreaUnreachable { area: a });
                }
            }
        }
    }

    report
}
