//! Link budget: geometry to achievable downlink throughput.
//!
//! The chain is: 3D slant distance between a UAV hovering over a zone and
//! an area centroid, a log-distance path-loss model, transmit power minus
//! path loss minus noise floor for the SNR, and a monotone SNR-to-rate
//! table for the full-spectrum throughput. Interference is deliberately
//! absent: spectrum exclusivity is enforced by the planner, so the rate
//! depends only on the (area, zone) geometry and the radio configuration.
//!
//! The scalar kernels are generic over [`Real`] so they run in `f32` or
//! `f64`; the matrix builder is `f64` like the rest of the pipeline.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::scenario::Scenario;

/// Error raised by link-budget computations and table I/O.
#[derive(Debug, Error)]
pub enum LinkBudgetError {
    /// A kernel argument was outside its domain.
    #[error("domain error: {argument} must be positive, got {value}")]
    Domain {
        /// Which argument was out of domain.
        argument: &'static str,
        /// The offending value, formatted.
        value: String,
    },
    /// A rate table broke its monotonicity invariants.
    #[error("invalid rate table: {0}")]
    InvalidTable(String),
    /// Table or matrix I/O failed.
    #[error("csv I/O failed: {0}")]
    Csv(#[from] csv::Error),
    /// Raw I/O failed.
    #[error("I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Radio parameters of the UAV-mounted base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Thermal noise floor in dBm.
    pub noise_dbm: f64,
    /// Carrier frequency in GHz.
    pub freq_ghz: f64,
    /// Base-station (UAV hover) height in meters.
    pub h_bs_m: f64,
    /// User-equipment height in meters.
    pub h_ue_m: f64,
    /// Bandwidth in Hz; throughput at full spectrum is spectral efficiency
    /// times this constant.
    pub bandwidth_hz: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 30.0,
            noise_dbm: -121.45,
            freq_ghz: 1.8,
            h_bs_m: 50.0,
            h_ue_m: 1.5,
            bandwidth_hz: 1.0e7,
        }
    }
}

/// Log-distance path loss in dB.
///
/// `40·log10(d) + 7.8 − 18·log10(h_bs) − 18·log10(h_ue) + 2·log10(f)` with
/// the distance in meters and the frequency in GHz (micro-cell convention;
/// the worked default is documented in the tests).
pub fn path_loss_db<S: Real>(
    d_m: S,
    h_bs_m: S,
    h_ue_m: S,
    f_ghz: S,
) -> Result<S, LinkBudgetError> {
    let check = |argument: &'static str, v: S| {
        if v > S::zero() && v.is_finite() {
            Ok(())
        } else {
            Err(LinkBudgetError::Domain {
                argument,
                value: format!("{v}"),
            })
        }
    };
    check("d_m", d_m)?;
    check("h_bs_m", h_bs_m)?;
    check("h_ue_m", h_ue_m)?;
    check("f_ghz", f_ghz)?;
    let c40 = S::from_f64_const(40.0);
    let c18 = S::from_f64_const(18.0);
    let c2 = S::from_f64_const(2.0);
    let c78 = S::from_f64_const(7.8);
    Ok(c40 * d_m.log10() + c78 - c18 * h_bs_m.log10() - c18 * h_ue_m.log10()
        + c2 * f_ghz.log10())
}

/// Signal-to-noise ratio in dB: transmit power minus path loss minus noise.
pub fn snr_db<S: Real>(tx_dbm: S, pl_db: S, noise_dbm: S) -> S {
    tx_dbm - pl_db - noise_dbm
}

/// Monotone SNR-to-throughput step table.
///
/// Row `(threshold_db, throughput_bps)` means: at SNR at or above
/// `threshold_db` (and below the next row's threshold) the full spectrum
/// delivers `throughput_bps`. Below the first threshold the link is dead.
/// Above the top threshold the rate saturates at the top row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable<S = f64> {
    rows: Vec<(S, S)>,
}

impl<S: Real> RateTable<S> {
    /// Builds a table from `(snr_threshold_db, throughput_bps)` rows,
    /// checking the monotonicity invariants.
    pub fn new(rows: Vec<(S, S)>) -> Result<Self, LinkBudgetError> {
        if rows.is_empty() {
            return Err(LinkBudgetError::InvalidTable("table is empty".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(LinkBudgetError::InvalidTable(format!(
                    "thresholds must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(LinkBudgetError::InvalidTable(format!(
                    "throughputs must be non-decreasing, got {} then {}",
                    w[0].1, w[1].1
                )));
            }
        }
        if rows.iter().any(|r| !r.1.is_finite() || r.1 < S::zero()) {
            return Err(LinkBudgetError::InvalidTable(
                "throughputs must be finite and non-negative".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// The default 15-row table: thresholds from −6 dB to 22 dB in 2 dB
    /// steps, spectral efficiency linear from 0.15 to 5.55 bits/s/Hz,
    /// scaled by the given bandwidth.
    pub fn lte_default(bandwidth_hz: S) -> Self {
        let rows = (0..15)
            .map(|i| {
                let threshold = S::from_f64_const(-6.0 + 2.0 * i as f64);
                let efficiency = S::from_f64_const(0.15 + i as f64 * 5.4 / 14.0);
                (threshold, efficiency * bandwidth_hz)
            })
            .collect();
        Self::new(rows).expect("default table satisfies the invariants")
    }

    /// Table rows, ascending by threshold.
    pub fn rows(&self) -> &[(S, S)] {
        &self.rows
    }

    /// Throughput of the highest row whose threshold is at or below
    /// `snr_db`; zero when the SNR is below the first threshold.
    pub fn throughput(&self, snr_db: S) -> S {
        let mut best = S::zero();
        for &(threshold, rate) in &self.rows {
            if snr_db >= threshold {
                best = rate;
            } else {
                break;
            }
        }
        best
    }

    /// Writes the table as CSV with header `snr_db,throughput_bps`.
    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<(), LinkBudgetError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["snr_db", "throughput_bps"])?;
        for &(snr, rate) in &self.rows {
            wtr.write_record(&[format!("{snr}"), format!("{rate}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl RateTable<f64> {
    /// Reads a table from CSV with header `snr_db,throughput_bps`.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self, LinkBudgetError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for record in rdr.deserialize() {
            let (snr, rate): (f64, f64) = record?;
            rows.push((snr, rate));
        }
        Self::new(rows)
    }
}

/// Convenience alias: the table lookup as a free function.
pub fn snr_to_throughput<S: Real>(snr_db: S, table: &RateTable<S>) -> S {
    table.throughput(snr_db)
}

/// Best-case full-spectrum throughput per (area, zone) pair, in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputMatrix {
    num_areas: usize,
    num_zones: usize,
    data: Vec<f64>,
}

impl ThroughputMatrix {
    /// Builds a matrix from a dense row-major (area-major) vector.
    pub fn from_rows(num_areas: usize, num_zones: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), num_areas * num_zones);
        Self {
            num_areas,
            num_zones,
            data,
        }
    }

    /// Number of areas.
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    /// Number of zones.
    pub fn num_zones(&self) -> usize {
        self.num_zones
    }

    /// Throughput for area `a` served from zone `z`.
    pub fn get(&self, a: usize, z: usize) -> f64 {
        self.data[a * self.num_zones + z]
    }

    /// Largest entry (zero for an all-zero matrix).
    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the matrix as CSV with header `area_id,zone_id,throughput_bps`,
    /// area-major.
    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<(), LinkBudgetError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["area_id", "zone_id", "throughput_bps"])?;
        for a in 0..self.num_areas {
            for z in 0..self.num_zones {
                wtr.write_record(&[a.to_string(), z.to_string(), format!("{}", self.get(a, z))])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a matrix from CSV with header `area_id,zone_id,throughput_bps`.
    /// The matrix must be dense: every (area, zone) pair present exactly
    /// once.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self, LinkBudgetError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        let mut max_a = 0usize;
        let mut max_z = 0usize;
        for record in rdr.deserialize() {
            let (a, z, t): (usize, usize, f64) = record?;
            max_a = max_a.max(a);
            max_z = max_z.max(z);
            entries.push((a, z, t));
        }
        if entries.is_empty() {
            return Err(LinkBudgetError::InvalidTable(
                "throughput matrix CSV has no rows".into(),
            ));
        }
        let (na, nz) = (max_a + 1, max_z + 1);
        if entries.len() != na * nz {
            return Err(LinkBudgetError::InvalidTable(format!(
                "expected a dense {na} x {nz} matrix, got {} rows",
                entries.len()
            )));
        }
        let mut data = vec![f64::NAN; na * nz];
        for (a, z, t) in entries {
            data[a * nz + z] = t;
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(LinkBudgetError::InvalidTable(
                "duplicate or missing (area, zone) rows".into(),
            ));
        }
        Ok(Self {
            num_areas: na,
            num_zones: nz,
            data,
        })
    }
}

/// Computes T(a, z) for every pair: slant distance (zones at base-station
/// height, areas at user height), path loss, SNR, then the rate table.
pub fn build_throughput_matrix(
    s: &Scenario,
    cfg: &RadioConfig,
    table: &RateTable<f64>,
) -> Result<ThroughputMatrix, LinkBudgetError> {
    let height = cfg.h_bs_m - cfg.h_ue_m;
    let mut data = Vec::with_capacity(s.areas.len() * s.zones.len());
    for a in &s.areas {
        for z in &s.zones {
            let d = ((a.x_m - z.x_m).powi(2) + (a.y_m - z.y_m).powi(2) + height.powi(2)).sqrt();
            let pl = path_loss_db(d, cfg.h_bs_m, cfg.h_ue_m, cfg.freq_ghz)?;
            let snr = snr_db(cfg.tx_power_dbm, pl, cfg.noise_dbm);
            data.push(table.throughput(snr));
        }
    }
    Ok(ThroughputMatrix::from_rows(s.areas.len(), s.zones.len(), data))
}
