//! From pair types to the linear program: observable-cell columns, estimand
//! objectives, deduplicated sparse assembly, and identified intervals.
//!
//! Every admissible pair type contributes one column with a single cell entry
//! per active offer block. Columns agreeing in (cell signature, objective
//! coefficient, inequality weights) are interchangeable in the program, so
//! they are merged with multiplicity and one representative type retained.
//! The equality system drops the last cell row of each active block: within a
//! block the 16 cell rows sum to the unit row that is appended explicitly, so
//! one row per block is linearly dependent.

use crate::data::{cell_within, ObservedDistribution, CELLS_PER_BLOCK};
use crate::lpsolve::{self, SolveStatus, SolverOptions, SparseCol, StandardLp};
use crate::restrictions::{compile_all, ConstraintSet, MassBound, Restriction};
use crate::typespace::{
    nash_set, InstrumentProfile, PairFilter, PairType, ProfileSet, TypeSpaceConfig,
};
use crate::EngineError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Which member of the pair an estimand concerns.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Member {
    One,
    Two,
}

impl TryFrom<u8> for Member {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Member::One),
            2 => Ok(Member::Two),
            other => Err(format!("member must be 1 or 2, got {other}")),
        }
    }
}

impl From<Member> for u8 {
    fn from(m: Member) -> u8 {
        match m {
            Member::One => 1,
            Member::Two => 2,
        }
    }
}

/// A treatment pair stated own-first for the scoped member.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct Allocation {
    pub own: bool,
    pub partner: bool,
}

impl Allocation {
    pub const fn new(own: bool, partner: bool) -> Self {
        Allocation { own, partner }
    }
}

impl TryFrom<[u8; 2]> for Allocation {
    type Error = String;
    fn try_from(v: [u8; 2]) -> Result<Self, Self::Error> {
        if v.iter().any(|&b| b > 1) {
            return Err(format!("allocation entries must be 0 or 1, got {v:?}"));
        }
        Ok(Allocation::new(v[0] == 1, v[1] == 1))
    }
}

impl From<Allocation> for [u8; 2] {
    fn from(a: Allocation) -> [u8; 2] {
        [a.own as u8, a.partner as u8]
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyArmRepr {
    forced: u8,
    offers: [u8; 2],
}

/// One policy-targeting configuration: the scoped member's treatment is
/// forced, offers are fixed (targeted member's offer first), and the partner
/// best-responds.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "PolicyArmRepr", into = "PolicyArmRepr")]
pub struct PolicyArm {
    pub forced: bool,
    pub offer_own: bool,
    pub offer_partner: bool,
}

impl TryFrom<PolicyArmRepr> for PolicyArm {
    type Error = String;
    fn try_from(r: PolicyArmRepr) -> Result<Self, Self::Error> {
        if r.forced > 1 || r.offers.iter().any(|&b| b > 1) {
            return Err("policy arm entries must be 0 or 1".into());
        }
        Ok(PolicyArm {
            forced: r.forced == 1,
            offer_own: r.offers[0] == 1,
            offer_partner: r.offers[1] == 1,
        })
    }
}

impl From<PolicyArm> for PolicyArmRepr {
    fn from(a: PolicyArm) -> PolicyArmRepr {
        PolicyArmRepr {
            forced: a.forced as u8,
            offers: [a.offer_own as u8, a.offer_partner as u8],
        }
    }
}

/// The estimand whose identified set the program bounds.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimand {
    /// Expected outcome contrast between two enforced treatment allocations;
    /// with `alloc2` absent, the plain expected outcome at `alloc1`.
    FixedAllocation {
        member: Member,
        alloc1: Allocation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alloc2: Option<Allocation>,
    },
    /// Expected outcome when the member's treatment is forced and the partner
    /// best-responds under the stated offers.
    PolicyTarget {
        member: Member,
        arm: PolicyArm,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<PolicyArm>,
    },
}

impl Estimand {
    /// Average direct effect: own treatment on vs off, partner untreated.
    pub fn ade(member: Member) -> Self {
        Estimand::FixedAllocation {
            member,
            alloc1: Allocation::new(true, false),
            alloc2: Some(Allocation::new(false, false)),
        }
    }

    /// Average spillover effect: partner treated vs neither, own off.
    pub fn ase(member: Member) -> Self {
        Estimand::FixedAllocation {
            member,
            alloc1: Allocation::new(false, true),
            alloc2: Some(Allocation::new(false, false)),
        }
    }

    pub fn member(&self) -> Member {
        match self {
            Estimand::FixedAllocation { member, .. } => *member,
            Estimand::PolicyTarget { member, .. } => *member,
        }
    }

    /// Offer profile in member-1-first coordinates for one policy arm.
    fn global_profile(member: Member, arm: &PolicyArm) -> InstrumentProfile {
        match member {
            Member::One => InstrumentProfile::new(arm.offer_own, arm.offer_partner),
            Member::Two => InstrumentProfile::new(arm.offer_partner, arm.offer_own),
        }
    }

    /// Policy targeting reads the partner's response in the arm's game, so
    /// that game must be active.
    pub fn validate(&self, active: ProfileSet) -> Result<(), EngineError> {
        if let Estimand::PolicyTarget {
            member,
            arm,
            contrast,
        } = self
        {
            for a in std::iter::once(arm).chain(contrast.iter()) {
                let p = Self::global_profile(*member, a);
                if !active.contains(p) {
                    return Err(EngineError::InvalidConfig(format!(
                        "policy-target offers {p:?} are outside the active profiles"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Objective coefficient for a fixed-allocation estimand: the scoped
/// member's outcome at `alloc1` minus at `alloc2`.
pub fn objective_theta(pair: &PairType, estimand: &Estimand) -> i32 {
    let Estimand::FixedAllocation {
        member,
        alloc1,
        alloc2,
    } = estimand
    else {
        panic!("objective_theta requires a fixed-allocation estimand");
    };
    let s = match member {
        Member::One => pair.s,
        Member::Two => pair.s_other,
    };
    let y1 = s.potential_outcome(alloc1.own, alloc1.partner) as i32;
    let y2 = alloc2
        .map(|a| s.potential_outcome(a.own, a.partner) as i32)
        .unwrap_or(0);
    y1 - y2
}

/// Objective coefficient for a policy-targeting estimand: the partner's best
/// response to the forced treatment is evaluated first, then the scoped
/// member's outcome. Constant in the equilibrium selection by construction.
pub fn objective_gamma(pair: &PairType, estimand: &Estimand) -> i32 {
    let Estimand::PolicyTarget {
        member,
        arm,
        contrast,
    } = estimand
    else {
        panic!("objective_gamma requires a policy-target estimand");
    };
    let eval = |a: &PolicyArm| -> i32 {
        let (target, partner) = match member {
            Member::One => (pair.s, pair.s_other),
            Member::Two => (pair.s_other, pair.s),
        };
        // The partner's own-frame game: their offer first, then the target's.
        let partner_profile = InstrumentProfile::new(a.offer_partner, a.offer_own);
        let partner_takeup = partner.best_response(partner_profile, a.forced);
        target.potential_outcome(a.forced, partner_takeup) as i32
    };
    eval(arm) - contrast.as_ref().map(&eval).unwrap_or(0)
}

/// Objective coefficient for any estimand.
pub fn objective(pair: &PairType, estimand: &Estimand) -> i32 {
    match estimand {
        Estimand::FixedAllocation { .. } => objective_theta(pair, estimand),
        Estimand::PolicyTarget { .. } => objective_gamma(pair, estimand),
    }
}

/// Sentinel for inactive blocks in a column signature.
pub const INACTIVE_BLOCK: u8 = 0xFF;

/// The observable cell hit in each active block: take-up from the selected
/// equilibrium, outcomes from the members' potential-outcome bits.
pub fn column_of(pair: &PairType, active: ProfileSet) -> [u8; 4] {
    let mut sig = [INACTIVE_BLOCK; 4];
    for p in active.iter() {
        let t = pair.e.chosen(p);
        let y = pair.s.potential_outcome(t.d, t.d_other);
        let y_other = pair.s_other.potential_outcome(t.d_other, t.d);
        sig[p.index()] = cell_within(y, y_other, t.d, t.d_other) as u8;
    }
    sig
}

pub const MAX_MASS_BOUNDS: usize = 8;

/// Dedup key packed into 64 bits: one signature nibble per active block
/// position (bits 0-15), the objective as a signed byte (bits 16-23), and a
/// weight nibble per mass bound (bits 24-55). All weight kinds count at most
/// 8 violations, so nibbles suffice.
fn pack_key(sig_nibbles: u64, objective: i32, weights: &[u32; MAX_MASS_BOUNDS]) -> u64 {
    debug_assert!((-128..=127).contains(&objective));
    let mut key = sig_nibbles | (((objective as i8) as u8 as u64) << 16);
    for (i, &w) in weights.iter().enumerate() {
        debug_assert!(w <= 15);
        key |= (w as u64) << (24 + 4 * i);
    }
    key
}

fn unpack_key(
    key: u64,
    blocks: &[InstrumentProfile],
    n_bounds: usize,
) -> ([u8; 4], i32, Vec<u32>) {
    let mut signature = [INACTIVE_BLOCK; 4];
    for (pos, p) in blocks.iter().enumerate() {
        signature[p.index()] = ((key >> (4 * pos)) & 0xF) as u8;
    }
    let objective = ((key >> 16) & 0xFF) as u8 as i8 as i32;
    let weights = (0..n_bounds)
        .map(|i| ((key >> (24 + 4 * i)) & 0xF) as u32)
        .collect();
    (signature, objective, weights)
}

/// A deduplicated column of the program.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct ColumnEntry {
    /// Within-block cell per block; `0xFF` marks an inactive block.
    pub signature: [u8; 4],
    pub objective: i32,
    /// Violation counts against each mass bound, in `bounds` order.
    pub weights: Vec<u32>,
    /// Number of raw pair types merged into this column.
    pub multiplicity: u64,
    /// Lexicographically smallest merged pair type id.
    pub representative: u32,
}

/// The assembled program: deduplicated columns plus constraint metadata.
/// Right-hand sides come from an observed distribution at solve time.
#[derive(Clone, Debug)]
pub struct LinearProgramSpec {
    pub active: ProfileSet,
    pub columns: Vec<ColumnEntry>,
    pub bounds: Vec<MassBound>,
    pub estimand: Estimand,
    /// Raw admissible pair types enumerated (before dedup).
    pub raw_count: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Lower,
    Upper,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalStatus {
    Interval,
    Empty,
}

/// Sparse distribution over representative pair types attaining one endpoint.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct WitnessEntry {
    pub representative: u32,
    pub multiplicity: u64,
    pub mass: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct IdentifiedInterval {
    pub lower: f64,
    pub upper: f64,
    pub status: IntervalStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<(Vec<WitnessEntry>, Vec<WitnessEntry>)>,
}

impl IdentifiedInterval {
    pub fn empty() -> Self {
        IdentifiedInterval {
            lower: f64::NAN,
            upper: f64::NAN,
            status: IntervalStatus::Empty,
            witnesses: None,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Build the program from a restriction list.
pub fn build_program(
    config: &TypeSpaceConfig,
    restrictions: &[Restriction],
    estimand: &Estimand,
    observed: &ObservedDistribution,
) -> Result<LinearProgramSpec, EngineError> {
    let constraints = compile_all(restrictions)?;
    build_program_with(config, &constraints, estimand, observed, &[])
}

/// Build with precompiled constraints and optional ad-hoc hard filters.
pub fn build_program_with(
    config: &TypeSpaceConfig,
    constraints: &ConstraintSet,
    estimand: &Estimand,
    observed: &ObservedDistribution,
    extra_filters: &[&PairFilter],
) -> Result<LinearProgramSpec, EngineError> {
    config.validate()?;
    estimand.validate(config.active_profiles)?;
    if observed.active_blocks() != config.active_profiles {
        return Err(EngineError::InvalidConfig(
            "observed blocks do not match the active profiles".into(),
        ));
    }
    if constraints.bounds.len() > MAX_MASS_BOUNDS {
        return Err(EngineError::InvalidConfig(format!(
            "at most {MAX_MASS_BOUNDS} mass-bound restrictions are supported"
        )));
    }
    let active = config.active_profiles;
    let blocks: Vec<InstrumentProfile> = active.iter().collect();
    let m1_brf = config.member1_brf_codes();
    let m2_brf = config.member2_brf_codes();
    let n_bounds = constraints.bounds.len();

    // Everything response-only is hoisted out of the outcome-bit loops.
    let po_filters: Vec<_> = constraints
        .filters
        .iter()
        .filter(|f| f.reads_outcomes())
        .collect();
    let brf_filters: Vec<_> = constraints
        .filters
        .iter()
        .filter(|f| !f.reads_outcomes())
        .collect();
    let slow_inner = !po_filters.is_empty() || !extra_filters.is_empty();
    let member = estimand.member();

    type Accum = HashMap<u64, (u64, u32)>;
    let merge = |mut a: Accum, b: Accum| -> Accum {
        for (k, (mult, rep)) in b {
            let e = a.entry(k).or_insert((0, u32::MAX));
            e.0 += mult;
            e.1 = e.1.min(rep);
        }
        a
    };

    let accum: Accum = m1_brf
        .par_chunks(1.max(m1_brf.len() / 256))
        .map(|chunk| {
            let mut local: Accum = HashMap::new();
            let e0 = crate::typespace::EquilibriumSelection::from_code(0);
            for &brf1 in chunk {
                let s0 = crate::typespace::IndividualType::from_parts(0, brf1);
                for &brf2 in &m2_brf {
                    let so0 = crate::typespace::IndividualType::from_parts(0, brf2);
                    if let Some(f) = config.class_filter {
                        if !f.accepts(s0, so0, active) {
                            continue;
                        }
                    }
                    let mut sets = Vec::with_capacity(blocks.len());
                    let mut ok = true;
                    for &p in &blocks {
                        let ns = nash_set(s0, so0, p);
                        if ns.is_empty() {
                            ok = false;
                            break;
                        }
                        sets.push((p, ns));
                    }
                    if !ok {
                        continue;
                    }
                    let pair0 = PairType::new(s0, so0, e0);
                    if !brf_filters.iter().all(|f| f.accepts(&pair0, active)) {
                        continue;
                    }
                    let mut base_weights = [0u32; MAX_MASS_BOUNDS];
                    let mut po_weight_slots: Vec<usize> = Vec::new();
                    for (i, b) in constraints.bounds.iter().enumerate() {
                        if b.reads_outcomes() {
                            po_weight_slots.push(i);
                        } else {
                            base_weights[i] = b.weight(&pair0, active);
                        }
                    }
                    // Objective per scoped-member outcome nibble; the other
                    // member's responses are already fixed, and no estimand
                    // reads the equilibrium selection.
                    let mut obj_table = [0i32; 16];
                    for po in 0..16u16 {
                        let probe = match member {
                            Member::One => PairType::new(
                                crate::typespace::IndividualType::from_parts(po, brf1),
                                so0,
                                e0,
                            ),
                            Member::Two => PairType::new(
                                s0,
                                crate::typespace::IndividualType::from_parts(po, brf2),
                                e0,
                            ),
                        };
                        obj_table[po as usize] = objective(&probe, estimand);
                    }
                    for e in crate::typespace::selection_product(&sets) {
                        // Per block: the take-up nibble part and the shifts
                        // that pick each member's outcome bit.
                        let mut dd_part = [0u64; 4];
                        let mut shift1 = [0u32; 4];
                        let mut shift2 = [0u32; 4];
                        for (pos, &p) in blocks.iter().enumerate() {
                            let t = e.chosen(p);
                            let dd = 2 * t.d as u64 + t.d_other as u64;
                            dd_part[pos] = dd << (4 * pos);
                            shift1[pos] = 2 * t.d as u32 + t.d_other as u32;
                            shift2[pos] = 2 * t.d_other as u32 + t.d as u32;
                        }
                        for po1 in 0..16u16 {
                            for po2 in 0..16u16 {
                                if slow_inner {
                                    let pair = PairType::new(
                                        crate::typespace::IndividualType::from_parts(po1, brf1),
                                        crate::typespace::IndividualType::from_parts(po2, brf2),
                                        e,
                                    );
                                    if !po_filters.iter().all(|f| f.accepts(&pair, active)) {
                                        continue;
                                    }
                                    if !extra_filters.iter().all(|f| f(&pair)) {
                                        continue;
                                    }
                                }
                                let mut sig = 0u64;
                                for pos in 0..blocks.len() {
                                    let y1 = ((po1 >> shift1[pos]) & 1) as u64;
                                    let y2 = ((po2 >> shift2[pos]) & 1) as u64;
                                    sig |= dd_part[pos] | ((8 * y1 + 4 * y2) << (4 * pos));
                                }
                                let mut weights = base_weights;
                                for &slot in &po_weight_slots {
                                    weights[slot] = (po1 ^ po2).count_ones();
                                }
                                let obj = match member {
                                    Member::One => obj_table[po1 as usize],
                                    Member::Two => obj_table[po2 as usize],
                                };
                                let key = pack_key(sig, obj, &weights);
                                let id = PairType::new(
                                    crate::typespace::IndividualType::from_parts(po1, brf1),
                                    crate::typespace::IndividualType::from_parts(po2, brf2),
                                    e,
                                )
                                .id();
                                let entry = local.entry(key).or_insert((0, u32::MAX));
                                entry.0 += 1;
                                entry.1 = entry.1.min(id);
                            }
                        }
                    }
                }
            }
            local
        })
        .reduce(HashMap::new, merge);

    if accum.is_empty() {
        return Err(EngineError::EmptyTypeSpace);
    }
    let mut columns: Vec<ColumnEntry> = accum
        .into_iter()
        .map(|(key, (multiplicity, representative))| {
            let (signature, objective, weights) = unpack_key(key, &blocks, n_bounds);
            ColumnEntry {
                signature,
                objective,
                weights,
                multiplicity,
                representative,
            }
        })
        .collect();
    columns.sort_unstable_by(|a, b| {
        (a.signature, a.objective, &a.weights).cmp(&(b.signature, b.objective, &b.weights))
    });
    let raw_count = columns.iter().map(|c| c.multiplicity).sum();
    Ok(LinearProgramSpec {
        active,
        columns,
        bounds: constraints.bounds.clone(),
        estimand: *estimand,
        raw_count,
    })
}

/// Build without merging: one column per raw pair type. Test-scale only.
pub fn build_program_raw(
    config: &TypeSpaceConfig,
    constraints: &ConstraintSet,
    estimand: &Estimand,
    observed: &ObservedDistribution,
) -> Result<LinearProgramSpec, EngineError> {
    config.validate()?;
    estimand.validate(config.active_profiles)?;
    if observed.active_blocks() != config.active_profiles {
        return Err(EngineError::InvalidConfig(
            "observed blocks do not match the active profiles".into(),
        ));
    }
    let active = config.active_profiles;
    let filters = &constraints.filters;
    let keep = |pair: &PairType| filters.iter().all(|f| f.accepts(pair, active));
    let keep_ref: &PairFilter = &keep;
    let mut columns = Vec::new();
    for pair in crate::typespace::enumerate_pair_types(config, &[keep_ref]) {
        let weights: Vec<u32> = constraints
            .bounds
            .iter()
            .map(|b| b.weight(&pair, active))
            .collect();
        columns.push(ColumnEntry {
            signature: column_of(&pair, active),
            objective: objective(&pair, estimand),
            weights,
            multiplicity: 1,
            representative: pair.id(),
        });
        if columns.len() > 200_000 {
            return Err(EngineError::InvalidConfig(
                "raw build is restricted to small spaces".into(),
            ));
        }
    }
    if columns.is_empty() {
        return Err(EngineError::EmptyTypeSpace);
    }
    let raw_count = columns.len() as u64;
    Ok(LinearProgramSpec {
        active,
        columns,
        bounds: constraints.bounds.clone(),
        estimand: *estimand,
        raw_count,
    })
}

impl LinearProgramSpec {
    pub fn n_equality_rows(&self) -> usize {
        15 * self.active.len() + 1
    }

    pub fn n_rows(&self) -> usize {
        self.n_equality_rows() + self.bounds.len()
    }

    /// Active blocks in canonical order.
    fn blocks(&self) -> Vec<InstrumentProfile> {
        self.active.iter().collect()
    }

    /// Row index of a block cell, if the cell row is kept. The last cell of
    /// each block is dropped as linearly dependent.
    fn cell_row(&self, block_pos: usize, within: usize) -> Option<usize> {
        if within + 1 == CELLS_PER_BLOCK {
            None
        } else {
            Some(15 * block_pos + within)
        }
    }

    /// The sparse structural column for one deduplicated entry.
    fn structural_col(&self, entry: &ColumnEntry) -> SparseCol {
        let mut col: SparseCol = Vec::with_capacity(self.active.len() + 1 + self.bounds.len());
        for (pos, p) in self.blocks().iter().enumerate() {
            let within = entry.signature[p.index()] as usize;
            if let Some(row) = self.cell_row(pos, within) {
                col.push((row, 1.0));
            }
        }
        let ones_row = 15 * self.active.len();
        col.push((ones_row, 1.0));
        for (i, &w) in entry.weights.iter().enumerate() {
            if w > 0 {
                col.push((self.n_equality_rows() + i, w as f64));
            }
        }
        col
    }

    /// Right-hand side for a given observed distribution.
    pub fn rhs(&self, observed: &ObservedDistribution) -> Vec<f64> {
        let mut b = vec![0.0; self.n_rows()];
        for (pos, p) in self.blocks().iter().enumerate() {
            for within in 0..CELLS_PER_BLOCK {
                if let Some(row) = self.cell_row(pos, within) {
                    b[row] = observed.cell(*p, within);
                }
            }
        }
        b[15 * self.active.len()] = 1.0;
        for (i, bound) in self.bounds.iter().enumerate() {
            b[self.n_equality_rows() + i] = bound.eps;
        }
        b
    }

    /// Assemble the standard-form LP. Mass bounds become equalities through
    /// one slack column each; `Upper` negates the objective.
    pub fn to_standard_lp(&self, observed: &ObservedDistribution, sense: Sense) -> StandardLp {
        let n_rows = self.n_rows();
        let mut cols: Vec<SparseCol> = Vec::with_capacity(self.columns.len() + self.bounds.len());
        let mut c: Vec<f64> = Vec::with_capacity(cols.capacity());
        let sign = match sense {
            Sense::Lower => 1.0,
            Sense::Upper => -1.0,
        };
        for entry in &self.columns {
            cols.push(self.structural_col(entry));
            c.push(sign * entry.objective as f64);
        }
        for i in 0..self.bounds.len() {
            cols.push(vec![(self.n_equality_rows() + i, 1.0)]);
            c.push(0.0);
        }
        StandardLp {
            n_rows,
            cols,
            b: self.rhs(observed),
            c,
        }
    }

    /// Solve both endpoint programs.
    pub fn bounds(
        &self,
        observed: &ObservedDistribution,
        opts: &SolverOptions,
    ) -> Result<IdentifiedInterval, EngineError> {
        self.bounds_impl(observed, opts, true)
    }

    /// As `bounds` but without witness extraction.
    pub fn bounds_values(
        &self,
        observed: &ObservedDistribution,
        opts: &SolverOptions,
    ) -> Result<IdentifiedInterval, EngineError> {
        self.bounds_impl(observed, opts, false)
    }

    fn bounds_impl(
        &self,
        observed: &ObservedDistribution,
        opts: &SolverOptions,
        with_witnesses: bool,
    ) -> Result<IdentifiedInterval, EngineError> {
        if observed.active_blocks() != self.active {
            return Err(EngineError::InvalidConfig(
                "observed blocks do not match the program".into(),
            ));
        }
        let pruned = PrunedProgram::new(self, observed);
        let lower_out = lpsolve::solve(&pruned.lp(Sense::Lower, observed), opts);
        let upper_out = lpsolve::solve(&pruned.lp(Sense::Upper, observed), opts);
        match (lower_out.status, upper_out.status) {
            (SolveStatus::Optimal, SolveStatus::Optimal) => {
                let lo = lower_out.solution.as_ref().unwrap();
                let hi = upper_out.solution.as_ref().unwrap();
                let witnesses = with_witnesses.then(|| {
                    (
                        self.extract_witness(&lo.x, &pruned.col_map),
                        self.extract_witness(&hi.x, &pruned.col_map),
                    )
                });
                Ok(IdentifiedInterval {
                    lower: lo.value,
                    upper: -hi.value,
                    status: IntervalStatus::Interval,
                    witnesses,
                })
            }
            (SolveStatus::Infeasible, SolveStatus::Infeasible) => Ok(IdentifiedInterval::empty()),
            (a, b) => Err(EngineError::Solver(format!(
                "endpoint solves disagreed or failed: lower {a:?}, upper {b:?}"
            ))),
        }
    }

    /// Mass per representative type at a vertex, largest first.
    fn extract_witness(&self, x: &[f64], col_map: &[usize]) -> Vec<WitnessEntry> {
        let mut entries: Vec<WitnessEntry> = col_map
            .iter()
            .zip(x.iter())
            .filter(|(_, &mass)| mass > 1e-12)
            .map(|(&orig, &mass)| WitnessEntry {
                representative: self.columns[orig].representative,
                multiplicity: self.columns[orig].multiplicity,
                mass,
            })
            .collect();
        entries.sort_by(|a, b| b.mass.partial_cmp(&a.mass).unwrap());
        entries
    }

    /// Canonical block order used by the row layout.
    pub fn block_order(&self) -> Vec<InstrumentProfile> {
        self.blocks()
    }

    /// Sparse triplet dump of the equality-and-bound matrix for external
    /// cross-checks: one `row col value` line per nonzero, then `# rhs` and
    /// `# objective` sections.
    pub fn write_triplets<W: Write>(
        &self,
        observed: &ObservedDistribution,
        mut w: W,
    ) -> std::io::Result<()> {
        let lp = self.to_standard_lp(observed, Sense::Lower);
        writeln!(w, "# rows {} cols {}", lp.n_rows, lp.cols.len())?;
        for (j, col) in lp.cols.iter().enumerate() {
            for (r, v) in col {
                writeln!(w, "{r} {j} {v}")?;
            }
        }
        writeln!(w, "# rhs")?;
        for (r, v) in lp.b.iter().enumerate() {
            writeln!(w, "{r} {v}")?;
        }
        writeln!(w, "# objective")?;
        for (j, v) in lp.c.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{j} {v}")?;
            }
        }
        Ok(())
    }
}

/// The program restricted to the support of one dataset.
///
/// A column whose signature touches a zero-probability cell in any active
/// block can never carry mass, and resampled or perturbed right-hand sides
/// derived from the same records can never repopulate a cell with zero
/// observations, so the reduction stays valid across bootstrap replicates.
/// This is what keeps repeated solves cheap: the support LP typically has a
/// few dozen rows and a few hundred columns.
pub struct PrunedProgram<'a> {
    spec: &'a LinearProgramSpec,
    /// Pruned column index -> index into `spec.columns`.
    pub col_map: Vec<usize>,
    /// Kept cell rows as (block position, within-block cell).
    kept_cells: Vec<(usize, usize)>,
    blocks: Vec<InstrumentProfile>,
}

impl<'a> PrunedProgram<'a> {
    pub fn new(spec: &'a LinearProgramSpec, observed: &ObservedDistribution) -> Self {
        let blocks = spec.blocks();
        // A block cell is allowed when its observed probability is positive;
        // the dropped sixteenth cell participates through its implied value.
        let mut allowed = [[false; CELLS_PER_BLOCK]; 4];
        let mut kept_cells = Vec::new();
        for (pos, p) in blocks.iter().enumerate() {
            for w in 0..CELLS_PER_BLOCK {
                allowed[pos][w] = observed.cell(*p, w) > 0.0;
                if allowed[pos][w] && w + 1 < CELLS_PER_BLOCK {
                    kept_cells.push((pos, w));
                }
            }
        }
        let col_map: Vec<usize> = spec
            .columns
            .iter()
            .enumerate()
            .filter(|(_, entry)| {
                blocks
                    .iter()
                    .enumerate()
                    .all(|(pos, p)| allowed[pos][entry.signature[p.index()] as usize])
            })
            .map(|(j, _)| j)
            .collect();
        PrunedProgram {
            spec,
            col_map,
            kept_cells,
            blocks,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.kept_cells.len() + 1 + self.spec.bounds.len()
    }

    fn ones_row(&self) -> usize {
        self.kept_cells.len()
    }

    /// Right-hand side in the pruned row layout. Valid for any distribution
    /// whose support is contained in the pruning support.
    pub fn rhs(&self, observed: &ObservedDistribution) -> Vec<f64> {
        let mut b = vec![0.0; self.n_rows()];
        for (i, &(pos, w)) in self.kept_cells.iter().enumerate() {
            b[i] = observed.cell(self.blocks[pos], w);
        }
        b[self.ones_row()] = 1.0;
        for (i, bound) in self.spec.bounds.iter().enumerate() {
            b[self.ones_row() + 1 + i] = bound.eps;
        }
        b
    }

    pub fn lp(&self, sense: Sense, observed: &ObservedDistribution) -> StandardLp {
        // Row lookup: (block pos, within) -> pruned row.
        let mut row_of = [[usize::MAX; CELLS_PER_BLOCK]; 4];
        for (i, &(pos, w)) in self.kept_cells.iter().enumerate() {
            row_of[pos][w] = i;
        }
        let sign = match sense {
            Sense::Lower => 1.0,
            Sense::Upper => -1.0,
        };
        let mut cols: Vec<SparseCol> =
            Vec::with_capacity(self.col_map.len() + self.spec.bounds.len());
        let mut c: Vec<f64> = Vec::with_capacity(cols.capacity());
        for &orig in &self.col_map {
            let entry = &self.spec.columns[orig];
            let mut col: SparseCol = Vec::with_capacity(self.blocks.len() + 1);
            for (pos, p) in self.blocks.iter().enumerate() {
                let within = entry.signature[p.index()] as usize;
                let row = row_of[pos][within];
                if row != usize::MAX {
                    col.push((row, 1.0));
                }
            }
            col.push((self.ones_row(), 1.0));
            for (i, &w) in entry.weights.iter().enumerate() {
                if w > 0 {
                    col.push((self.ones_row() + 1 + i, w as f64));
                }
            }
            col.sort_unstable_by_key(|(r, _)| *r);
            cols.push(col);
            c.push(sign * entry.objective as f64);
        }
        for i in 0..self.spec.bounds.len() {
            cols.push(vec![(self.ones_row() + 1 + i, 1.0)]);
            c.push(0.0);
        }
        StandardLp {
            n_rows: self.n_rows(),
            cols,
            b: self.rhs(observed),
            c,
        }
    }

    /// Structural (non-slack) column count of the pruned system.
    pub fn n_structural(&self) -> usize {
        self.col_map.len()
    }
}
