//! Household records and the empirical conditional cell distribution.
//!
//! A record carries the six binaries `(y, d, z)` for both members. The
//! observed distribution holds, for each offer pair, the 16 conditional
//! frequencies over `(y, y', d, d')`, accumulated as integer counts so block
//! normalization is exact before the float conversion.

use crate::typespace::{InstrumentProfile, ProfileSet};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("duplicate household '{id}' at line {line}")]
    DuplicateHousehold { id: String, line: u64 },
    #[error("household '{id}' is missing role {role}")]
    MissingRole { id: String, role: u8 },
    #[error("no records: every offer block is empty")]
    AllBlocksEmpty,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One household: outcomes, take-up, and offers for both members.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct HouseholdRecord {
    pub household_id: String,
    pub y1: bool,
    pub d1: bool,
    pub z1: bool,
    pub y2: bool,
    pub d2: bool,
    pub z2: bool,
}

impl HouseholdRecord {
    pub fn profile(&self) -> InstrumentProfile {
        InstrumentProfile::new(self.z1, self.z2)
    }

    /// Within-block cell index `8y + 4y' + 2d + d'`.
    pub fn cell_within(&self) -> usize {
        cell_within(self.y1, self.y2, self.d1, self.d2)
    }
}

/// Cell index inside one offer block.
pub fn cell_within(y: bool, y_other: bool, d: bool, d_other: bool) -> usize {
    8 * y as usize + 4 * y_other as usize + 2 * d as usize + d_other as usize
}

pub const CELLS_PER_BLOCK: usize = 16;
pub const TOTAL_CELLS: usize = 64;

/// Input layout of a data file.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSchema {
    /// `household_id,y1,d1,z1,y2,d2,z2`
    Wide,
    /// `household_id,role,y,d,z` with role in {1,2}
    Long,
}

fn parse_binary(field: &str, name: &str, line: u64) -> Result<bool, DataError> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(DataError::Parse {
            line,
            msg: format!("column '{name}' must be 0 or 1, got '{other}'"),
        }),
    }
}

/// Read and validate household records from a CSV file.
pub fn ingest(path: &Path, schema: DataSchema) -> Result<Vec<HouseholdRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    match schema {
        DataSchema::Wide => ingest_wide(&mut reader),
        DataSchema::Long => ingest_long(&mut reader),
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| DataError::Parse {
            line: 1,
            msg: format!("missing required column '{name}'"),
        })
}

fn ingest_wide<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
) -> Result<Vec<HouseholdRecord>, DataError> {
    let headers = reader.headers()?.clone();
    let id_i = header_index(&headers, "household_id")?;
    let names = ["y1", "d1", "z1", "y2", "d2", "z2"];
    let cols: Vec<usize> = names
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<_, _>>()?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| -> Result<&str, DataError> {
            row.get(i).ok_or(DataError::Parse {
                line,
                msg: "short row".into(),
            })
        };
        let id = get(id_i)?.to_string();
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateHousehold { id, line });
        }
        let mut vals = [false; 6];
        for (k, &i) in cols.iter().enumerate() {
            vals[k] = parse_binary(get(i)?, names[k], line)?;
        }
        records.push(HouseholdRecord {
            household_id: id,
            y1: vals[0],
            d1: vals[1],
            z1: vals[2],
            y2: vals[3],
            d2: vals[4],
            z2: vals[5],
        });
    }
    Ok(records)
}

fn ingest_long<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
) -> Result<Vec<HouseholdRecord>, DataError> {
    let headers = reader.headers()?.clone();
    let id_i = header_index(&headers, "household_id")?;
    let role_i = header_index(&headers, "role")?;
    let y_i = header_index(&headers, "y")?;
    let d_i = header_index(&headers, "d")?;
    let z_i = header_index(&headers, "z")?;

    struct Partial {
        order: usize,
        m1: Option<(bool, bool, bool)>,
        m2: Option<(bool, bool, bool)>,
    }
    let mut partials: std::collections::HashMap<String, Partial> = Default::default();
    let mut order = 0usize;
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| -> Result<&str, DataError> {
            row.get(i).ok_or(DataError::Parse {
                line,
                msg: "short row".into(),
            })
        };
        let id = get(id_i)?.to_string();
        let role = match get(role_i)?.trim() {
            "1" => 1u8,
            "2" => 2u8,
            other => {
                return Err(DataError::Parse {
                    line,
                    msg: format!("role must be 1 or 2, got '{other}'"),
                })
            }
        };
        let y = parse_binary(get(y_i)?, "y", line)?;
        let d = parse_binary(get(d_i)?, "d", line)?;
        let z = parse_binary(get(z_i)?, "z", line)?;
        let entry = partials.entry(id.clone()).or_insert(Partial {
            order,
            m1: None,
            m2: None,
        });
        order += 1;
        let slot = if role == 1 { &mut entry.m1 } else { &mut entry.m2 };
        if slot.is_some() {
            return Err(DataError::DuplicateHousehold { id, line });
        }
        *slot = Some((y, d, z));
    }
    // Emit households in first-seen order so ingestion stays deterministic.
    let mut entries: Vec<(String, Partial)> = partials.into_iter().collect();
    entries.sort_by_key(|(_, p)| p.order);
    let mut records = Vec::new();
    for (id, p) in entries {
        let (y1, d1, z1) = p.m1.ok_or(DataError::MissingRole {
            id: id.clone(),
            role: 1,
        })?;
        let (y2, d2, z2) = p.m2.ok_or(DataError::MissingRole {
            id: id.clone(),
            role: 2,
        })?;
        records.push(HouseholdRecord {
            household_id: id,
            y1,
            d1,
            z1,
            y2,
            d2,
            z2,
        });
    }
    Ok(records)
}

/// Write records as a wide-format CSV.
pub fn write_wide_csv(path: &Path, records: &[HouseholdRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["household_id", "y1", "d1", "z1", "y2", "d2", "z2"])?;
    for r in records {
        w.write_record([
            r.household_id.as_str(),
            if r.y1 { "1" } else { "0" },
            if r.d1 { "1" } else { "0" },
            if r.z1 { "1" } else { "0" },
            if r.y2 { "1" } else { "0" },
            if r.d2 { "1" } else { "0" },
            if r.z2 { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(DataError::Io)?;
    Ok(())
}

/// Conditional cell probabilities per offer block, with per-block counts.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ObservedDistribution {
    cells: Vec<f64>,
    n_z: [u64; 4],
    active: ProfileSet,
}

impl ObservedDistribution {
    /// Empirical frequencies: counts per cell over the block's sample size.
    /// Blocks with no observations are inactive and carry all-zero cells.
    pub fn from_records(records: &[HouseholdRecord]) -> Result<Self, DataError> {
        let mut counts = [0u64; TOTAL_CELLS];
        let mut n_z = [0u64; 4];
        for r in records {
            let block = r.profile().index();
            counts[16 * block + r.cell_within()] += 1;
            n_z[block] += 1;
        }
        if n_z.iter().all(|&n| n == 0) {
            return Err(DataError::AllBlocksEmpty);
        }
        let mut cells = vec![0.0; TOTAL_CELLS];
        for block in 0..4 {
            if n_z[block] == 0 {
                continue;
            }
            for w in 0..CELLS_PER_BLOCK {
                cells[16 * block + w] = counts[16 * block + w] as f64 / n_z[block] as f64;
            }
        }
        let active = ProfileSet::from_profiles(
            &InstrumentProfile::ALL
                .into_iter()
                .filter(|p| n_z[p.index()] > 0)
                .collect::<Vec<_>>(),
        );
        Ok(ObservedDistribution { cells, n_z, active })
    }

    /// From explicit cell probabilities (population or external source).
    /// Each active block's 16 cells must sum to one.
    pub fn from_cells(
        cells: Vec<f64>,
        n_z: [u64; 4],
        active: ProfileSet,
    ) -> Result<Self, crate::EngineError> {
        if cells.len() != TOTAL_CELLS {
            return Err(crate::EngineError::InvalidConfig(format!(
                "expected {TOTAL_CELLS} cells, got {}",
                cells.len()
            )));
        }
        for p in InstrumentProfile::ALL {
            let block = p.index();
            let sum: f64 = cells[16 * block..16 * (block + 1)].iter().sum();
            if active.contains(p) {
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(crate::EngineError::InvalidConfig(format!(
                        "block {p:?} cells sum to {sum}, expected 1"
                    )));
                }
            } else if sum != 0.0 {
                return Err(crate::EngineError::InvalidConfig(format!(
                    "inactive block {p:?} must have all-zero cells"
                )));
            }
        }
        Ok(ObservedDistribution { cells, n_z, active })
    }

    pub fn active_blocks(&self) -> ProfileSet {
        self.active
    }

    pub fn n_z(&self, profile: InstrumentProfile) -> u64 {
        self.n_z[profile.index()]
    }

    pub fn total_n(&self) -> u64 {
        self.n_z.iter().sum()
    }

    pub fn cell(&self, profile: InstrumentProfile, within: usize) -> f64 {
        self.cells[16 * profile.index() + within]
    }

    pub fn block(&self, profile: InstrumentProfile) -> &[f64] {
        let b = profile.index();
        &self.cells[16 * b..16 * (b + 1)]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Replace one block's cells, keeping counts and activity flags.
    pub fn with_block(mut self, profile: InstrumentProfile, block: [f64; 16]) -> Self {
        let b = profile.index();
        self.cells[16 * b..16 * (b + 1)].copy_from_slice(&block);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;
    use std::sync::atomic::{AtomicU64, Ordering};

    static COUNTER: AtomicU64 = AtomicU64::new(0);

    struct TempCsv(PathBuf);

    impl TempCsv {
        fn path(&self) -> &Path {
            &self.0
        }
    }

    impl Drop for TempCsv {
        fn drop(&mut self) {
            let _ = std::fs::remove_file(&self.0);
        }
    }

    fn write_temp(content: &str) -> TempCsv {
        let n = COUNTER.fetch_add(1, Ordering::SeqCst);
        let path = std::env::temp_dir().join(format!(
            "pairbounds-data-test-{}-{n}.csv",
            std::process::id()
        ));
        std::fs::write(&path, content).unwrap();
        TempCsv(path)
    }

    #[test]
    fn wide_file_parses() {
        let f = write_temp(
            "household_id,y1,d1,z1,y2,d2,z2\nh1,1,0,1,0,0,0\nh2,0,0,0,1,1,1\nh3,1,1,1,1,1,1\n",
        );
        let records = ingest(f.path(), DataSchema::Wide).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].household_id, "h1");
        assert!(records[0].y1 && records[0].z1 && !records[0].d1);
    }

    #[test]
    fn non_binary_value_reports_row() {
        let f = write_temp("household_id,y1,d1,z1,y2,d2,z2\nh1,2,0,1,0,0,0\n");
        match ingest(f.path(), DataSchema::Wide) {
            Err(DataError::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("y1"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_household_rejected_in_wide_mode() {
        let f = write_temp("household_id,y1,d1,z1,y2,d2,z2\nh1,1,0,1,0,0,0\nh1,0,0,0,0,0,0\n");
        match ingest(f.path(), DataSchema::Wide) {
            Err(DataError::DuplicateHousehold { id, line }) => {
                assert_eq!(id, "h1");
                assert_eq!(line, 3);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn long_format_round_trips_against_wide() {
        let wide = write_temp("household_id,y1,d1,z1,y2,d2,z2\nh1,1,0,1,0,1,0\nh2,0,0,0,1,1,1\n");
        let long = write_temp(
            "household_id,role,y,d,z\nh1,1,1,0,1\nh1,2,0,1,0\nh2,2,1,1,1\nh2,1,0,0,0\n",
        );
        let a = ingest(wide.path(), DataSchema::Wide).unwrap();
        let b = ingest(long.path(), DataSchema::Long).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_format_missing_role_is_an_error() {
        let long = write_temp("household_id,role,y,d,z\nh1,1,1,0,1\n");
        match ingest(long.path(), DataSchema::Long) {
            Err(DataError::MissingRole { id, role }) => {
                assert_eq!(id, "h1");
                assert_eq!(role, 2);
            }
            other => panic!("expected missing role, got {other:?}"),
        }
    }

    fn rec(id: &str, y1: u8, y2: u8, d1: u8, d2: u8, z1: u8, z2: u8) -> HouseholdRecord {
        HouseholdRecord {
            household_id: id.into(),
            y1: y1 != 0,
            d1: d1 != 0,
            z1: z1 != 0,
            y2: y2 != 0,
            d2: d2 != 0,
            z2: z2 != 0,
        }
    }

    #[test]
    fn single_record_activates_one_block() {
        // (y, y', d, d', z, z') = (1, 0, 1, 0, 1, 0)
        let records = vec![rec("h1", 1, 0, 1, 0, 1, 0)];
        let obs = ObservedDistribution::from_records(&records).unwrap();
        let p10 = InstrumentProfile::new(true, false);
        assert!(obs.active_blocks().contains(p10));
        assert_eq!(obs.active_blocks().len(), 1);
        assert_eq!(obs.cell(p10, cell_within(true, false, true, false)), 1.0);
        assert_eq!(obs.n_z(p10), 1);
    }

    #[test]
    fn balanced_blocks_split_counts_evenly() {
        let mut records = Vec::new();
        for (i, (z1, z2)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            for k in 0..5 {
                records.push(rec(&format!("h{i}_{k}"), 0, 0, 0, 0, *z1, *z2));
            }
        }
        let obs = ObservedDistribution::from_records(&records).unwrap();
        assert_eq!(obs.active_blocks().len(), 4);
        for p in InstrumentProfile::ALL {
            assert_eq!(obs.n_z(p), 5);
        }
    }

    #[test]
    fn permutation_invariance_and_exact_normalization() {
        let mut records = Vec::new();
        for k in 0..7 {
            records.push(rec(&format!("a{k}"), 1, 0, 1, 0, 0, 0));
            records.push(rec(&format!("b{k}"), 0, 1, 0, 1, 0, 0));
            records.push(rec(&format!("c{k}"), 0, 0, 0, 0, 1, 1));
        }
        let obs1 = ObservedDistribution::from_records(&records).unwrap();
        records.reverse();
        let obs2 = ObservedDistribution::from_records(&records).unwrap();
        assert_eq!(obs1, obs2);
        for p in obs1.active_blocks().iter() {
            let sum: f64 = obs1.block(p).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        match ObservedDistribution::from_records(&[]) {
            Err(DataError::AllBlocksEmpty) => {}
            other => panic!("expected AllBlocksEmpty, got {other:?}"),
        }
    }

    #[test]
    fn wide_csv_write_read_round_trip() {
        let records = vec![rec("h1", 1, 0, 1, 0, 1, 0), rec("h2", 0, 1, 0, 1, 0, 1)];
        let f = write_temp("");
        write_wide_csv(f.path(), &records).unwrap();
        let back = ingest(f.path(), DataSchema::Wide).unwrap();
        assert_eq!(records, back);
    }
}
