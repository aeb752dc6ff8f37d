//! Typed JSON reports shared by the command-line surface.
//!
//! Every command emits one of these shapes tagged with `schema_version` and
//! `command`; the machine-readable schema ships in `schema/` at the
//! repository root and the CLI tests validate emitted reports against it.

use crate::inference::ConfidenceReport;
use crate::program::{Estimand, IdentifiedInterval, IntervalStatus, WitnessEntry};
use crate::restrictions::Restriction;
use crate::typespace::PairType;
use crate::verify::TheoremCheckResult;
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// Interval endpoints, omitted when the identified set is empty.
#[derive(Clone, Debug, Serialize)]
pub struct IntervalReport {
    pub status: IntervalStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl From<&IdentifiedInterval> for IntervalReport {
    fn from(i: &IdentifiedInterval) -> Self {
        match i.status {
            IntervalStatus::Interval => IntervalReport {
                status: i.status,
                lower: Some(i.lower),
                upper: Some(i.upper),
            },
            IntervalStatus::Empty => IntervalReport {
                status: i.status,
                lower: None,
                upper: None,
            },
        }
    }
}

/// One vertex-supporting type, decoded for readability.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub s: u16,
    pub s_other: u16,
    pub selection: u8,
    pub mass: f64,
    pub merged_types: u64,
}

impl From<&WitnessEntry> for WitnessReport {
    fn from(w: &WitnessEntry) -> Self {
        let pair = PairType::from_id(w.representative);
        WitnessReport {
            s: pair.s.code(),
            s_other: pair.s_other.code(),
            selection: pair.e.code(),
            mass: w.mass,
            merged_types: w.multiplicity,
        }
    }
}

/// Summaries of the endpoint-attaining distributions (largest masses first).
pub fn witness_summary(entries: &[WitnessEntry], limit: usize) -> Vec<WitnessReport> {
    entries.iter().take(limit).map(WitnessReport::from).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgramStats {
    pub raw_pair_types: u64,
    pub dedup_columns: usize,
    pub dedup_ratio: f64,
    pub equality_rows: usize,
    pub inequality_rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub build_ms: u64,
    pub solve_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub estimand: Estimand,
    pub restrictions: Vec<Restriction>,
    pub interval: IntervalReport,
    pub witness_lower: Vec<WitnessReport>,
    pub witness_upper: Vec<WitnessReport>,
    pub warnings: Vec<String>,
    pub stats: ProgramStats,
    pub timings: Timings,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CiReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub estimand: Estimand,
    pub restrictions: Vec<Restriction>,
    pub report: ConfidenceReport,
    pub warnings: Vec<String>,
    pub timings: Timings,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub dgp: String,
    pub n: usize,
    pub seed: u64,
    pub out_path: String,
    pub block_counts: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<TheoremCheckResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub estimand: Estimand,
    pub restrictions: Vec<Restriction>,
    pub stats: ProgramStats,
    pub active_blocks: usize,
    pub matrix_rank: usize,
    pub full_row_rank: bool,
}
