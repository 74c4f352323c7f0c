//! Shared fixtures for unit tests.

use crate::linkbudget::ThroughputMatrix;
use crate::mobility::VehicleCounts;
use crate::scenario::{Area, AreaGraph, Scenario, Uav, Zone};

/// Two linked zones, one recharge site at zone 0, one UAV homed there,
/// three steps, one area near each zone.
pub(crate) fn tiny_scenario() -> Scenario {
    Scenario {
        zones: vec![
            Zone { id: 0, x_m: 0.0, y_m: 0.0 },
            Zone { id: 1, x_m: 900.0, y_m: 0.0 },
        ],
        areas: vec![
            Area {
                id: 0,
                x_m: 100.0,
                y_m: 50.0,
                length_m: 200.0,
                free_flow_ticks: 15,
                storage_capacity: 26,
            },
            Area {
                id: 1,
                x_m: 800.0,
                y_m: 50.0,
                length_m: 200.0,
                free_flow_ticks: 15,
                storage_capacity: 26,
            },
        ],
        links: vec![(0, 1), (1, 0)],
        recharge_sites: vec![0],
        uavs: vec![Uav {
            id: 0,
            battery_capacity_steps: 2,
            home_zone: 0,
        }],
        num_steps: 3,
        step_duration_s: 600.0,
        link_range_m: 1000.0,
        area_graph: AreaGraph {
            edges: vec![(0, 1)],
            origins: vec![0],
            destinations: vec![1],
        },
    }
}

/// Zones `0..num_zones` on a line with bidirectional links between
/// neighbors, one recharge site at zone 0, one UAV homed there, and one
/// area per zone.
pub(crate) fn line_scenario(num_zones: usize, battery: usize, num_steps: usize) -> Scenario {
    let spacing = 900.0;
    let zones: Vec<Zone> = (0..num_zones)
        .map(|i| Zone {
            id: i,
            x_m: i as f64 * spacing,
            y_m: 0.0,
        })
        .collect();
    let areas: Vec<Area> = (0..num_zones)
        .map(|i| Area {
            id: i,
            x_m: i as f64 * spacing,
            y_m: 100.0,
            length_m: 200.0,
            free_flow_ticks: 15,
            storage_capacity: 26,
        })
        .collect();
    let mut links = Vec::new();
    for i in 0..num_zones.saturating_sub(1) {
        links.push((i, i + 1));
        links.push((i + 1, i));
    }
    links.sort_unstable();
    let edges: Vec<(usize, usize)> = (0..num_zones.saturating_sub(1))
        .map(|i| (i, i + 1))
        .collect();
    Scenario {
        zones,
        areas,
        links,
        recharge_sites: vec![0],
        uavs: vec![Uav {
            id: 0,
            battery_capacity_steps: battery,
            home_zone: 0,
        }],
        num_steps,
        step_duration_s: 600.0,
        link_range_m: 1000.0,
        area_graph: AreaGraph {
            edges,
            origins: vec![0],
            destinations: vec![num_zones.saturating_sub(1)],
        },
    }
}

/// Vehicle counts with the same value everywhere.
pub(crate) fn uniform_counts(num_areas: usize, num_steps: usize, users: u32) -> VehicleCounts {
    VehicleCounts::from_rows(num_areas, num_steps, vec![users; num_areas * num_steps])
}

/// Throughput matrix with the same rate everywhere.
pub(crate) fn full_matrix(num_areas: usize, num_zones: usize, rate: f64) -> ThroughputMatrix {
    ThroughputMatrix::from_rows(num_areas, num_zones, vec![rate; num_areas * num_zones])
}
