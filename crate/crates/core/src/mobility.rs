//! Evacuation mobility: routing and queue-based mesoscopic simulation.
//!
//! Every area doubles as one road segment with a free-flow traversal time
//! and a storage capacity. Vehicles all depart at tick 0 (by default),
//! follow the cheapest free-flow route from their origin to the nearest
//! destination, and queue through segments under three exit rules: the
//! free-flow time must have elapsed, the vehicle must be at the head of
//! the segment's FIFO queue within the per-tick outflow budget, and the
//! downstream segment must have a free storage slot. Vehicles finishing
//! their final segment leave the network.
//!
//! The simulator samples each segment's queue length at the tick closing
//! every planning step, producing the vehicle-count matrix the planner
//! consumes. A [`MobilityTrace`] records enough per-vehicle events to
//! audit conservation, FIFO order, and the free-flow lower bound.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Area, AreaGraph, Scenario};

/// Error raised by the mobility stage.
#[derive(Debug, Error)]
pub enum MobilityError {
    /// A configuration field is out of range.
    #[error("invalid mobility config: {field} {problem}")]
    InvalidConfig {
        /// Offending field.
        field: &'static str,
        /// What is wrong.
        problem: String,
    },
    /// An origin area cannot reach any destination.
    #[error("origin area {origin} has no route to any destination")]
    UnroutableOrigin {
        /// The origin area id.
        origin: usize,
    },
    /// CSV I/O failed.
    #[error("csv I/O failed: {0}")]
    Csv(#[from] csv::Error),
    /// Raw I/O failed.
    #[error("I/O failed: {0}")]
    Io(#[from] std::io::Error),
    /// A counts file was malformed.
    #[error("invalid vehicle counts: {0}")]
    InvalidCounts(String),
}

/// Simulation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    /// Vehicles to evacuate.
    pub total_vehicles: u64,
    /// Tick length in seconds; must divide the scenario step duration.
    pub tick_s: f64,
    /// Vehicles allowed to exit a segment per tick.
    pub outflow_per_tick: u64,
    /// Seed for the departure jitter.
    pub seed: u64,
    /// Departures are drawn uniformly from `0..=departure_spread_ticks`;
    /// zero (the default) sends everyone at tick 0.
    pub departure_spread_ticks: u64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            total_vehicles: 10_000,
            tick_s: 1.0,
            outflow_per_tick: 1,
            seed: 0,
            departure_spread_ticks: 0,
        }
    }
}

/// Vehicles per area per step: the planner's N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleCounts {
    num_areas: usize,
    num_steps: usize,
    data: Vec<u32>,
}

impl VehicleCounts {
    /// Builds a matrix from a dense area-major vector.
    pub fn from_rows(num_areas: usize, num_steps: usize, data: Vec<u32>) -> Self {
        assert_eq!(data.len(), num_areas * num_steps);
        Self {
            num_areas,
            num_steps,
            data,
        }
    }

    /// All-zero matrix.
    pub fn zeros(num_areas: usize, num_steps: usize) -> Self {
        Self::from_rows(num_areas, num_steps, vec![0; num_areas * num_steps])
    }

    /// Number of areas.
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    /// Number of steps.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Vehicles in area `a` at step `k`.
    pub fn get(&self, a: usize, k: usize) -> u32 {
        self.data[a * self.num_steps + k]
    }

    fn set(&mut self, a: usize, k: usize, v: u32) {
        self.data[a * self.num_steps + k] = v;
    }

    /// True when every entry is zero.
    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Writes the matrix as CSV with header `area_id,step,count`,
    /// area-major.
    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<(), MobilityError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["area_id", "step", "count"])?;
        for a in 0..self.num_areas {
            for k in 0..self.num_steps {
                wtr.write_record(&[a.to_string(), k.to_string(), self.get(a, k).to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a dense matrix from CSV with header `area_id,step,count`.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self, MobilityError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        let mut max_a = 0usize;
        let mut max_k = 0usize;
        for record in rdr.deserialize() {
            let (a, k, c): (usize, usize, u32) = record?;
            max_a = max_a.max(a);
            max_k = max_k.max(k);
            entries.push((a, k, c));
        }
        if entries.is_empty() {
            return Err(MobilityError::InvalidCounts("CSV has no rows".into()));
        }
        let (na, nk) = (max_a + 1, max_k + 1);
        if entries.len() != na * nk {
            return Err(MobilityError::InvalidCounts(format!(
                "expected a dense {na} x {nk} matrix, got {} rows",
                entries.len()
            )));
        }
        let mut seen = vec![false; na * nk];
        let mut m = Self::zeros(na, nk);
        for (a, k, c) in entries {
            if seen[a * nk + k] {
                return Err(MobilityError::InvalidCounts(format!(
                    "duplicate row for area {a} step {k}"
                )));
            }
            seen[a * nk + k] = true;
            m.set(a, k, c);
        }
        Ok(m)
    }
}

/// Per-tick system balance snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickAudit {
    /// Vehicles currently inside some segment.
    pub in_network: u64,
    /// Vehicles that have completed their route.
    pub arrived: u64,
    /// Vehicles that have not departed yet.
    pub pending: u64,
}

/// Event log of one simulation run, sufficient to audit the queue rules.
#[derive(Debug, Clone, Default)]
pub struct MobilityTrace {
    /// Vehicles in the run.
    pub total_vehicles: u64,
    /// Balance after every tick, index = tick.
    pub per_tick: Vec<TickAudit>,
    /// Per segment: (vehicle, tick) in entry order.
    pub segment_entries: Vec<Vec<(u64, u64)>>,
    /// Per segment: (vehicle, tick) in exit order; leaving the network
    /// counts as an exit from the final segment.
    pub segment_exits: Vec<Vec<(u64, u64)>>,
    /// (vehicle, tick) pairs for vehicles completing their route.
    pub arrivals: Vec<(u64, u64)>,
}

impl MobilityTrace {
    /// Checks conservation, FIFO order per segment, and the free-flow
    /// lower bound against the scenario's segment metadata. Returns
    /// human-readable violation descriptions; empty means the trace is
    /// consistent.
    pub fn audit(&self, s: &Scenario) -> Vec<String> {
        let mut problems = Vec::new();
        for (tick, audit) in self.per_tick.iter().enumerate() {
            let sum = audit.in_network + audit.arrived + audit.pending;
            if sum != self.total_vehicles {
                problems.push(format!(
                    "tick {tick}: {} in network + {} arrived + {} pending != {} total",
                    audit.in_network, audit.arrived, audit.pending, self.total_vehicles
                ));
            }
        }
        for (seg, entries) in self.segment_entries.iter().enumerate() {
            let exits = &self.segment_exits[seg];
            let exited: std::collections::BTreeSet<u64> =
                exits.iter().map(|&(v, _)| v).collect();
            let expected_order: Vec<u64> = entries
                .iter()
                .map(|&(v, _)| v)
                .filter(|v| exited.contains(v))
                .collect();
            let actual_order: Vec<u64> = exits.iter().map(|&(v, _)| v).collect();
            if expected_order != actual_order {
                problems.push(format!("segment {seg}: exits violate FIFO entry order"));
            }
            let entry_tick: std::collections::BTreeMap<u64, u64> =
                entries.iter().map(|&(v, t)| (v, t)).collect();
            for &(v, exit_tick) in exits {
                match entry_tick.get(&v) {
                    None => problems.push(format!(
                        "segment {seg}: vehicle {v} exited without entering"
                    )),
                    Some(&et) => {
                        if exit_tick < et + s.areas[seg].free_flow_ticks {
                            problems.push(format!(
                                "segment {seg}: vehicle {v} traversed in {} ticks, \
                                 below free-flow {}",
                                exit_tick - et,
                                s.areas[seg].free_flow_ticks
                            ));
                        }
                    }
                }
            }
        }
        problems
    }
}

/// Cheapest route (by summed free-flow ticks, including both endpoint
/// segments) from each origin to its nearest destination.
///
/// Returned in the order of `graph.origins`; `None` marks an origin with
/// no route to any destination. Ties pick the smallest next-area id at
/// each hop.
pub fn route_vehicles(areas: &[Area], graph: &AreaGraph) -> Vec<Option<Vec<usize>>> {
    let n = areas.len();
    let mut reverse_adj = vec![Vec::new(); n];
    let mut forward_adj = vec![Vec::new(); n];
    for &(u, v) in &graph.edges {
        reverse_adj[v].push(u);
        forward_adj[u].push(v);
    }
    for list in forward_adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }

    // Cost to finish the evacuation starting inside each segment, via a
    // multi-source Dijkstra from the destinations over reversed edges.
    let mut dist = vec![u64::MAX; n];
    let mut heap = std::collections::BinaryHeap::new();
    for &d in &graph.destinations {
        let c = areas[d].free_flow_ticks;
        if c < dist[d] {
            dist[d] = c;
            heap.push(std::cmp::Reverse((c, d)));
        }
    }
    while let Some(std::cmp::Reverse((c, v))) = heap.pop() {
        if c > dist[v] {
            continue;
        }
        for &u in &reverse_adj[v] {
            let nc = c + areas[u].free_flow_ticks;
            if nc < dist[u] {
                dist[u] = nc;
                heap.push(std::cmp::Reverse((nc, u)));
            }
        }
    }

    let dest_cost = |v: usize| -> u64 {
        if graph.destinations.contains(&v) {
            areas[v].free_flow_ticks
        } else {
            u64::MAX
        }
    };

    graph
        .origins
        .iter()
        .map(|&o| {
            if dist[o] == u64::MAX {
                return None;
            }
            let mut path = vec![o];
            let mut cur = o;
            // A destination always terminates the route: continuing costs
            // at least one more positive free-flow time.
            while dest_cost(cur) != dist[cur] {
                let next = forward_adj[cur]
                    .iter()
                    .copied()
                    .filter(|&v| dist[v] != u64::MAX)
                    .min_by_key(|&v| (dist[v], v))
                    .expect("a finite-cost non-destination has a finite-cost successor");
                path.push(next);
                cur = next;
            }
            Some(path)
        })
        .collect()
}

struct QueuedVehicle {
    id: u64,
    origin_index: usize,
    entry_tick: u64,
    route_pos: usize,
}

/// Runs the queue simulation and returns the sampled count matrix.
pub fn simulate_evacuation(
    s: &Scenario,
    cfg: &MobilityConfig,
) -> Result<VehicleCounts, MobilityError> {
    simulate_evacuation_traced(s, cfg).map(|(counts, _)| counts)
}

/// Like [`simulate_evacuation`], additionally returning the audit trace.
pub fn simulate_evacuation_traced(
    s: &Scenario,
    cfg: &MobilityConfig,
) -> Result<(VehicleCounts, MobilityTrace), MobilityError> {
    if cfg.outflow_per_tick == 0 {
        return Err(MobilityError::InvalidConfig {
            field: "outflow_per_tick",
            problem: "must be at least 1".into(),
        });
    }
    if !(cfg.tick_s > 0.0) || !cfg.tick_s.is_finite() {
        return Err(MobilityError::InvalidConfig {
            field: "tick_s",
            problem: "must be positive and finite".into(),
        });
    }
    let ratio = s.step_duration_s / cfg.tick_s;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(MobilityError::InvalidConfig {
            field: "tick_s",
            problem: format!(
                "must divide the step duration {} s, got {} s",
                s.step_duration_s, cfg.tick_s
            ),
        });
    }
    let ticks_per_step = ratio.round() as u64;
    let num_areas = s.areas.len();
    let num_steps = s.num_steps;
    let total_ticks = ticks_per_step * num_steps as u64;

    let routes = route_vehicles(&s.areas, &s.area_graph);
    let mut origin_routes = Vec::with_capacity(routes.len());
    for (i, route) in routes.iter().enumerate() {
        match route {
            Some(r) => origin_routes.push(r.clone()),
            None => {
                if cfg.total_vehicles > 0 {
                    return Err(MobilityError::UnroutableOrigin {
                        origin: s.area_graph.origins[i],
                    });
                }
                origin_routes.push(Vec::new());
            }
        }
    }

    // Vehicles split evenly across origins in listed order; the remainder
    // goes to the earliest origins. Ids are assigned origin-major so runs
    // are reproducible.
    let num_origins = s.area_graph.origins.len() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vehicles = Vec::new();
    if num_origins > 0 {
        let base = cfg.total_vehicles / num_origins;
        let remainder = cfg.total_vehicles % num_origins;
        let mut id = 0u64;
        for (oi, _) in s.area_graph.origins.iter().enumerate() {
            let n = base + u64::from((oi as u64) < remainder);
            for _ in 0..n {
                let departure = if cfg.departure_spread_ticks == 0 {
                    0
                } else {
                    rng.random_range(0..=cfg.departure_spread_ticks)
                };
                vehicles.push((id, oi, departure));
                id += 1;
            }
        }
    }
    // Stable departure order: by departure tick, then vehicle id.
    vehicles.sort_by_key(|&(id, _, dep)| (dep, id));

    let mut queues: Vec<VecDeque<QueuedVehicle>> =
        (0..num_areas).map(|_| VecDeque::new()).collect();
    let mut counts = VehicleCounts::zeros(num_areas, num_steps);
    let mut trace = MobilityTrace {
        total_vehicles: cfg.total_vehicles,
        per_tick: Vec::with_capacity(total_ticks as usize),
        segment_entries: vec![Vec::new(); num_areas],
        segment_exits: vec![Vec::new(); num_areas],
        arrivals: Vec::new(),
    };

    let mut next_departure = 0usize;
    let mut in_network = 0u64;
    let mut arrived = 0u64;

    for tick in 0..total_ticks {
        // Departures scheduled for this tick join their origin queue.
        while next_departure < vehicles.len() && vehicles[next_departure].2 == tick {
            let (id, oi, _) = vehicles[next_departure];
            let seg = origin_routes[oi][0];
            queues[seg].push_back(QueuedVehicle {
                id,
                origin_index: oi,
                entry_tick: tick,
                route_pos: 0,
            });
            trace.segment_entries[seg].push((id, tick));
            in_network += 1;
            next_departure += 1;
        }

        // Movement: each segment may release up to the outflow budget from
        // the head of its queue; a blocked head blocks everyone behind it.
        for seg in 0..num_areas {
            let mut budget = cfg.outflow_per_tick;
            while budget > 0 {
                let Some(head) = queues[seg].front() else { break };
                if tick < head.entry_tick + s.areas[seg].free_flow_ticks {
                    break;
                }
                let route = &origin_routes[head.origin_index];
                let route_pos = head.route_pos;
                if route_pos + 1 == route.len() {
                    let v = queues[seg].pop_front().expect("head exists");
                    trace.segment_exits[seg].push((v.id, tick));
                    trace.arrivals.push((v.id, tick));
                    in_network -= 1;
                    arrived += 1;
                    budget -= 1;
                    continue;
                }
                let next_seg = route[route_pos + 1];
                if (queues[next_seg].len() as u64) < s.areas[next_seg].storage_capacity {
                    let mut v = queues[seg].pop_front().expect("head exists");
                    trace.segment_exits[seg].push((v.id, tick));
                    v.entry_tick = tick;
                    v.route_pos += 1;
                    trace.segment_entries[next_seg].push((v.id, tick));
                    queues[next_seg].push_back(v);
                    budget -= 1;
                } else {
                    break;
                }
            }
        }

        trace.per_tick.push(TickAudit {
            in_network,
            arrived,
            pending: cfg.total_vehicles - in_network - arrived,
        });

        // Sample queue lengths at the tick that closes each step.
        if (tick + 1) % ticks_per_step == 0 {
            let k = ((tick + 1) / ticks_per_step - 1) as usize;
            for (seg, q) in queues.iter().enumerate() {
                counts.set(seg, k, q.len() as u32);
            }
        }
    }

    Ok((counts, trace))
}
