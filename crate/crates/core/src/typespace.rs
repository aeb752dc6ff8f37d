//! Latent types for two-person take-up games and the admissible pair-type space.
//!
//! An individual type packs, into 12 bits, the four potential outcomes
//! `Y(d, d')` and the eight best responses `D(z, z', d')`. A pair type is two
//! individual types plus a deterministic equilibrium selection, one take-up
//! profile per offer pair. All argument conventions are own-first: the first
//! treatment/offer always belongs to the individual whose type is queried.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Joint offer assignment `(z, z_other)` for a pair, member 1's offer first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstrumentProfile {
    pub z: bool,
    pub z_other: bool,
}

impl InstrumentProfile {
    pub const ALL: [InstrumentProfile; 4] = [
        InstrumentProfile::new(false, false),
        InstrumentProfile::new(false, true),
        InstrumentProfile::new(true, false),
        InstrumentProfile::new(true, true),
    ];

    pub const fn new(z: bool, z_other: bool) -> Self {
        InstrumentProfile { z, z_other }
    }

    /// Canonical block index in `0..4`: (0,0), (0,1), (1,0), (1,1).
    pub fn index(self) -> usize {
        2 * self.z as usize + self.z_other as usize
    }

    pub fn from_index(idx: usize) -> Self {
        assert!(idx < 4, "profile index out of range: {idx}");
        Self::ALL[idx]
    }

    /// The same game seen from the partner's side: offers swapped.
    pub fn mirrored(self) -> Self {
        InstrumentProfile::new(self.z_other, self.z)
    }
}

impl fmt::Debug for InstrumentProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.z as u8, self.z_other as u8)
    }
}

/// Nonempty subset of the four instrument profiles, as a 4-bit mask.
///
/// Reduced supports let equivalence checks run exhaustively at a
/// 6-bit-per-individual scale instead of the full 12-bit space.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProfileSet(u8);

impl ProfileSet {
    pub const FULL: ProfileSet = ProfileSet(0b1111);

    pub fn single(profile: InstrumentProfile) -> Self {
        ProfileSet(1 << profile.index())
    }

    pub fn from_profiles(profiles: &[InstrumentProfile]) -> Self {
        let mut mask = 0u8;
        for p in profiles {
            mask |= 1 << p.index();
        }
        ProfileSet(mask)
    }

    pub fn contains(self, profile: InstrumentProfile) -> bool {
        self.0 & (1 << profile.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Offers swapped in every member profile.
    pub fn mirrored(self) -> Self {
        let mut mask = 0u8;
        for p in self.iter() {
            mask |= 1 << p.mirrored().index();
        }
        ProfileSet(mask)
    }

    pub fn iter(self) -> impl Iterator<Item = InstrumentProfile> {
        InstrumentProfile::ALL
            .into_iter()
            .filter(move |p| self.contains(*p))
    }
}

impl fmt::Debug for ProfileSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A 12-bit individual latent type.
///
/// Bit layout: bits 0-3 hold the potential outcomes, bit `2d + d'` giving
/// `Y(d, d')`; bits 4-11 hold the best responses, bit `4 + 2(2z + z') + d'`
/// giving `D(z, z', d')` with `z` the individual's own offer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndividualType(u16);

pub const TYPE_CODE_BOUND: u16 = 1 << 12;

impl IndividualType {
    pub fn new(code: u16) -> Self {
        assert!(code < TYPE_CODE_BOUND, "type code out of range: {code}");
        IndividualType(code)
    }

    /// Build a type from a 4-bit outcome nibble and an 8-bit response byte.
    pub fn from_parts(po_bits: u16, brf_bits: u16) -> Self {
        assert!(po_bits < 16 && brf_bits < 256);
        IndividualType(po_bits | (brf_bits << 4))
    }

    pub fn code(self) -> u16 {
        self.0
    }

    pub fn po_bits(self) -> u16 {
        self.0 & 0xF
    }

    pub fn brf_bits(self) -> u16 {
        self.0 >> 4
    }

    /// Potential outcome `Y(d, d_other)`. Offers never enter: the exclusion
    /// restriction holds by construction.
    pub fn potential_outcome(self, d: bool, d_other: bool) -> bool {
        self.0 & (1 << (2 * d as u16 + d_other as u16)) != 0
    }

    /// Best response `D(z, z_other, d_other)`; `profile.z` is the own offer.
    pub fn best_response(self, profile: InstrumentProfile, d_other: bool) -> bool {
        let pos = 4 + 2 * profile.index() as u16 + d_other as u16;
        self.0 & (1 << pos) != 0
    }

    /// The in-game response vector `(D(z,z',0), D(z,z',1))`.
    pub fn delta(self, profile: InstrumentProfile) -> Delta {
        Delta {
            at_zero: self.best_response(profile, false),
            at_one: self.best_response(profile, true),
        }
    }

    pub fn classify(self, profile: InstrumentProfile) -> ResponseClass {
        self.delta(profile).classify()
    }
}

impl fmt::Debug for IndividualType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IndividualType({:#05x})", self.0)
    }
}

/// Response vector of one member within one game.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Delta {
    pub at_zero: bool,
    pub at_one: bool,
}

impl Delta {
    pub fn classify(self) -> ResponseClass {
        match (self.at_zero, self.at_one) {
            (false, true) => ResponseClass::StrictlySupermodular,
            (true, false) => ResponseClass::StrictlySubmodular,
            _ => ResponseClass::Dominant,
        }
    }

    pub fn is_dominant(self) -> bool {
        self.at_zero == self.at_one
    }

    /// Weakly increasing in the partner's take-up.
    pub fn is_supermodular(self) -> bool {
        self.at_zero <= self.at_one
    }

    /// Weakly decreasing in the partner's take-up.
    pub fn is_submodular(self) -> bool {
        self.at_zero >= self.at_one
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ResponseClass {
    Dominant,
    StrictlySupermodular,
    StrictlySubmodular,
}

/// Whether both members play the same response vector in the game at
/// `profile` (member 1's view): `delta_s(z,z') = delta_s'(z',z)`.
pub fn is_symmetric(s: IndividualType, s_other: IndividualType, profile: InstrumentProfile) -> bool {
    s.delta(profile) == s_other.delta(profile.mirrored())
}

/// A take-up profile `(d, d_other)`, member 1 first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TakeUp {
    pub d: bool,
    pub d_other: bool,
}

impl TakeUp {
    pub const ALL: [TakeUp; 4] = [
        TakeUp::new(false, false),
        TakeUp::new(false, true),
        TakeUp::new(true, false),
        TakeUp::new(true, true),
    ];

    pub const fn new(d: bool, d_other: bool) -> Self {
        TakeUp { d, d_other }
    }

    pub fn index(self) -> usize {
        2 * self.d as usize + self.d_other as usize
    }

    pub fn from_index(idx: usize) -> Self {
        assert!(idx < 4);
        Self::ALL[idx]
    }

    pub fn is_asymmetric(self) -> bool {
        self.d != self.d_other
    }
}

impl fmt::Debug for TakeUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.d as u8, self.d_other as u8)
    }
}

/// Set of pure-strategy equilibria of one game, as a mask over `TakeUp`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NashSet(u8);

impl NashSet {
    pub const EMPTY: NashSet = NashSet(0);

    pub fn contains(self, t: TakeUp) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = TakeUp> {
        TakeUp::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

/// Pure-strategy Nash equilibria in take-up for `(s, s_other)` at `profile`:
/// the fixed points `d = D_s(z, z', d')` and `d' = D_s'(z', z, d)`.
pub fn nash_set(
    s: IndividualType,
    s_other: IndividualType,
    profile: InstrumentProfile,
) -> NashSet {
    nash_of_deltas(s.delta(profile), s_other.delta(profile.mirrored()))
}

/// Nash fixed points from the two in-game response vectors.
pub fn nash_of_deltas(d1: Delta, d2: Delta) -> NashSet {
    let mut mask = 0u8;
    for t in TakeUp::ALL {
        let own = if t.d_other { d1.at_one } else { d1.at_zero };
        let other = if t.d { d2.at_one } else { d2.at_zero };
        if own == t.d && other == t.d_other {
            mask |= 1 << t.index();
        }
    }
    NashSet(mask)
}

/// Deterministic equilibrium selection: one take-up profile per game, packed
/// two bits per block. Inactive blocks are pinned to (0,0).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EquilibriumSelection(u8);

impl EquilibriumSelection {
    pub fn from_choices(choices: [TakeUp; 4]) -> Self {
        let mut bits = 0u8;
        for (k, t) in choices.iter().enumerate() {
            bits |= (t.index() as u8) << (2 * k);
        }
        EquilibriumSelection(bits)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn from_code(code: u8) -> Self {
        EquilibriumSelection(code)
    }

    pub fn chosen(self, profile: InstrumentProfile) -> TakeUp {
        TakeUp::from_index(((self.0 >> (2 * profile.index())) & 0b11) as usize)
    }

    fn with_choice(self, profile: InstrumentProfile, t: TakeUp) -> Self {
        let shift = 2 * profile.index();
        EquilibriumSelection((self.0 & !(0b11 << shift)) | ((t.index() as u8) << shift))
    }
}

impl fmt::Debug for EquilibriumSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(InstrumentProfile::ALL.iter().map(|p| self.chosen(*p)))
            .finish()
    }
}

/// A complete pair type `(s, s_other, e)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct PairType {
    pub s: IndividualType,
    pub s_other: IndividualType,
    pub e: EquilibriumSelection,
}

impl PairType {
    pub fn new(s: IndividualType, s_other: IndividualType, e: EquilibriumSelection) -> Self {
        PairType { s, s_other, e }
    }

    /// Stable 32-bit identifier: `s` in bits 20-31, `s_other` in 8-19, `e` in 0-7.
    pub fn id(self) -> u32 {
        ((self.s.code() as u32) << 20) | ((self.s_other.code() as u32) << 8) | self.e.code() as u32
    }

    pub fn from_id(id: u32) -> Self {
        PairType {
            s: IndividualType::new((id >> 20) as u16 & 0xFFF),
            s_other: IndividualType::new((id >> 8) as u16 & 0xFFF),
            e: EquilibriumSelection::from_code(id as u8),
        }
    }

    /// The selected equilibrium is a Nash profile of every active game.
    pub fn is_consistent(&self, active: ProfileSet) -> bool {
        active
            .iter()
            .all(|p| nash_set(self.s, self.s_other, p).contains(self.e.chosen(p)))
    }
}

/// Pre-filters for the classified subspaces used by the equivalence checks.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ClassFilter {
    /// Both members dominant in every active game.
    DominantOnly,
    /// Both members' in-game vectors coincide in every active game.
    SymmetricOnly,
    /// Both members weakly supermodular in every active game.
    SupermodularOnly,
    /// Both members weakly submodular in every active game.
    SubmodularOnly,
}

impl ClassFilter {
    pub fn accepts(self, s: IndividualType, s_other: IndividualType, active: ProfileSet) -> bool {
        active.iter().all(|p| {
            let d1 = s.delta(p);
            let d2 = s_other.delta(p.mirrored());
            match self {
                ClassFilter::DominantOnly => d1.is_dominant() && d2.is_dominant(),
                ClassFilter::SymmetricOnly => d1 == d2,
                ClassFilter::SupermodularOnly => d1.is_supermodular() && d2.is_supermodular(),
                ClassFilter::SubmodularOnly => d1.is_submodular() && d2.is_submodular(),
            }
        })
    }
}

/// Scope of the enumeration: which games are active, plus an optional
/// class pre-filter.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TypeSpaceConfig {
    pub active_profiles: ProfileSet,
    pub class_filter: Option<ClassFilter>,
}

impl TypeSpaceConfig {
    pub fn full() -> Self {
        TypeSpaceConfig {
            active_profiles: ProfileSet::FULL,
            class_filter: None,
        }
    }

    pub fn reduced(profile: InstrumentProfile) -> Self {
        TypeSpaceConfig {
            active_profiles: ProfileSet::single(profile),
            class_filter: None,
        }
    }

    pub fn with_filter(mut self, filter: ClassFilter) -> Self {
        self.class_filter = Some(filter);
        self
    }

    pub fn validate(&self) -> Result<(), crate::EngineError> {
        if self.active_profiles.is_empty() {
            return Err(crate::EngineError::InvalidConfig(
                "active_profiles must be nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Individual brf codes that vary under this support, for the member whose
    /// own-frame active profiles are `own_active`. Bits at inactive games are
    /// pinned to zero so codes stay canonical.
    fn brf_codes(own_active: ProfileSet) -> Vec<u16> {
        let mut free_bits: Vec<u16> = Vec::new();
        for p in own_active.iter() {
            free_bits.push(2 * p.index() as u16);
            free_bits.push(2 * p.index() as u16 + 1);
        }
        let n = free_bits.len();
        (0..1u16 << n)
            .map(|pattern| {
                let mut code = 0u16;
                for (i, bit) in free_bits.iter().enumerate() {
                    if pattern & (1 << i) != 0 {
                        code |= 1 << bit;
                    }
                }
                code
            })
            .collect()
    }

    /// Member 1 individual codes admissible under this support.
    pub fn member1_codes(&self) -> Vec<u16> {
        Self::member_codes(self.active_profiles)
    }

    /// Member 2 individual codes; their own-frame games are the mirrored set.
    pub fn member2_codes(&self) -> Vec<u16> {
        Self::member_codes(self.active_profiles.mirrored())
    }

    /// Member 1 response bytes (outcome bits excluded) under this support.
    pub fn member1_brf_codes(&self) -> Vec<u16> {
        Self::brf_codes(self.active_profiles)
    }

    /// Member 2 response bytes under this support.
    pub fn member2_brf_codes(&self) -> Vec<u16> {
        Self::brf_codes(self.active_profiles.mirrored())
    }

    fn member_codes(own_active: ProfileSet) -> Vec<u16> {
        let mut codes = Vec::new();
        for brf in Self::brf_codes(own_active) {
            for po in 0..16u16 {
                codes.push(po | (brf << 4));
            }
        }
        codes.sort_unstable();
        codes
    }
}

/// Predicate over pair types used as a hard filter during enumeration.
pub type PairFilter<'a> = dyn Fn(&PairType) -> bool + Sync + 'a;

/// Enumerate every admissible pair type under `config`, in lexicographic
/// `(s, s_other, e)` order, surviving all `hard_filters`.
///
/// A pair is admissible when every active game has a nonempty Nash set, and
/// `e` ranges over the Cartesian product of per-game Nash choices.
pub fn enumerate_pair_types<'a>(
    config: &'a TypeSpaceConfig,
    hard_filters: &'a [&'a PairFilter<'a>],
) -> impl Iterator<Item = PairType> + 'a {
    let m1 = config.member1_codes();
    let m2 = config.member2_codes();
    let active: Vec<InstrumentProfile> = config.active_profiles.iter().collect();
    let class_filter = config.class_filter;
    let active_set = config.active_profiles;

    m1.into_iter().flat_map(move |code1| {
        let s = IndividualType::new(code1);
        let m2 = m2.clone();
        let active = active.clone();
        m2.into_iter().flat_map(move |code2| {
            let s_other = IndividualType::new(code2);
            let keep_class = class_filter
                .map(|f| f.accepts(s, s_other, active_set))
                .unwrap_or(true);
            let mut sets = Vec::with_capacity(active.len());
            let mut admissible = keep_class;
            if admissible {
                for p in &active {
                    let ns = nash_set(s, s_other, *p);
                    if ns.is_empty() {
                        admissible = false;
                        break;
                    }
                    sets.push((*p, ns));
                }
            }
            let selections = if admissible {
                selection_product(&sets)
            } else {
                Vec::new()
            };
            selections.into_iter().filter_map(move |e| {
                let pair = PairType::new(s, s_other, e);
                if hard_filters.iter().all(|f| f(&pair)) {
                    Some(pair)
                } else {
                    None
                }
            })
        })
    })
}

/// All deterministic selections over the given per-game Nash sets, in
/// ascending selection-code order.
pub fn selection_product(sets: &[(InstrumentProfile, NashSet)]) -> Vec<EquilibriumSelection> {
    let mut out = vec![EquilibriumSelection::from_code(0)];
    for (profile, ns) in sets {
        let mut next = Vec::with_capacity(out.len() * ns.len());
        for t in ns.iter() {
            for e in &out {
                next.push(e.with_choice(*profile, t));
            }
        }
        out = next;
    }
    out.sort_unstable_by_key(|e| e.code());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(z: u8, z_other: u8) -> InstrumentProfile {
        InstrumentProfile::new(z != 0, z_other != 0)
    }

    /// The example pair from the take-up response table: participate only if
    /// the other participates, and only under joint offers.
    fn table1_type() -> IndividualType {
        // Single brf bit at (z,z',d') = (1,1,1): position 4 + 2*3 + 1 = 11.
        IndividualType::new(1 << 11)
    }

    #[test]
    fn best_response_bit_positions() {
        let s = table1_type();
        assert!(s.best_response(profile(1, 1), true));
        for p in InstrumentProfile::ALL {
            for d_other in [false, true] {
                if p != profile(1, 1) || !d_other {
                    assert!(!s.best_response(p, d_other));
                }
            }
        }

        let zero = IndividualType::new(0);
        let saturated = IndividualType::new(0xFF0);
        for p in InstrumentProfile::ALL {
            for d_other in [false, true] {
                assert!(!zero.best_response(p, d_other));
                assert!(saturated.best_response(p, d_other));
            }
        }
    }

    #[test]
    fn potential_outcome_bit_positions() {
        // Outcome pattern of the policy-targeting counterexample: Y(1,1)=1 only.
        let s = IndividualType::new(0b1000);
        assert!(s.potential_outcome(true, true));
        assert!(!s.potential_outcome(true, false));
        assert!(!s.potential_outcome(false, true));
        assert!(!s.potential_outcome(false, false));

        let zero = IndividualType::new(0);
        for d in [false, true] {
            for d_other in [false, true] {
                assert!(!zero.potential_outcome(d, d_other));
            }
        }

        let s = IndividualType::new(0b1010);
        assert!(!s.potential_outcome(false, false));
        assert!(s.potential_outcome(false, true));
        assert!(!s.potential_outcome(true, false));
        assert!(s.potential_outcome(true, true));
    }

    #[test]
    fn outcomes_never_read_offer_bits() {
        // Exclusion restriction: flipping any brf bit leaves all outcomes fixed.
        for code in (0..TYPE_CODE_BOUND).step_by(7) {
            let s = IndividualType::new(code);
            let brf_flipped = IndividualType::new(code ^ (0xFF << 4));
            for d in [false, true] {
                for d_other in [false, true] {
                    assert_eq!(
                        s.potential_outcome(d, d_other),
                        brf_flipped.potential_outcome(d, d_other)
                    );
                }
            }
        }
    }

    #[test]
    fn nash_set_table1_pair() {
        let s = table1_type();
        let ns = nash_set(s, s, profile(1, 1));
        assert!(ns.contains(TakeUp::new(false, false)));
        assert!(ns.contains(TakeUp::new(true, true)));
        assert_eq!(ns.len(), 2);

        let ns = nash_set(s, s, profile(0, 0));
        assert_eq!(ns.len(), 1);
        assert!(ns.contains(TakeUp::new(false, false)));
    }

    #[test]
    fn nash_set_no_equilibrium() {
        // delta_s = (0,1) against delta_s' = (1,0) has no pure fixed point.
        let d1 = Delta { at_zero: false, at_one: true };
        let d2 = Delta { at_zero: true, at_one: false };
        assert!(nash_of_deltas(d1, d2).is_empty());
    }

    fn brute_force_nash(d1: Delta, d2: Delta) -> Vec<TakeUp> {
        let mut out = Vec::new();
        for t in TakeUp::ALL {
            let r1 = if t.d_other { d1.at_one } else { d1.at_zero };
            let r2 = if t.d { d2.at_one } else { d2.at_zero };
            if r1 == t.d && r2 == t.d_other {
                out.push(t);
            }
        }
        out
    }

    #[test]
    fn nash_matches_equilibria_taxonomy() {
        // All 16 response-vector combinations, checked against the published
        // per-game equilibrium table (entries transcribed member-1-first).
        let deltas = [
            Delta { at_zero: false, at_one: false },
            Delta { at_zero: false, at_one: true },
            Delta { at_zero: true, at_one: false },
            Delta { at_zero: true, at_one: true },
        ];
        let expect: [[&[(u8, u8)]; 4]; 4] = [
            // Rows: member 1's vector; columns: member 2's, both in own frames.
            [&[(0, 0)], &[(0, 0)], &[(0, 1)], &[(0, 1)]],
            [&[(0, 0)], &[(0, 0), (1, 1)], &[], &[(1, 1)]],
            [&[(1, 0)], &[], &[(1, 0), (0, 1)], &[(0, 1)]],
            [&[(1, 0)], &[(1, 1)], &[(1, 0)], &[(1, 1)]],
        ];
        let mut total = 0;
        for (i, d1) in deltas.iter().enumerate() {
            for (j, d2) in deltas.iter().enumerate() {
                let got = nash_of_deltas(*d1, *d2);
                let brute = brute_force_nash(*d1, *d2);
                assert_eq!(got.iter().collect::<Vec<_>>(), brute);
                let want: Vec<TakeUp> = expect[i][j]
                    .iter()
                    .map(|(d, dp)| TakeUp::new(*d != 0, *dp != 0))
                    .collect();
                let mut want = want;
                want.sort();
                assert_eq!(got.iter().collect::<Vec<_>>(), want, "delta pair ({i},{j})");
                total += got.len();
            }
        }
        assert_eq!(total, 16);
    }

    #[test]
    fn classify_response_vectors() {
        assert_eq!(
            Delta { at_zero: false, at_one: false }.classify(),
            ResponseClass::Dominant
        );
        assert_eq!(
            Delta { at_zero: true, at_one: true }.classify(),
            ResponseClass::Dominant
        );
        assert_eq!(
            Delta { at_zero: false, at_one: true }.classify(),
            ResponseClass::StrictlySupermodular
        );
        assert_eq!(
            Delta { at_zero: true, at_one: false }.classify(),
            ResponseClass::StrictlySubmodular
        );
    }

    #[test]
    fn symmetry_is_in_game_equality() {
        // Both members supermodular in the mirrored games.
        let p = profile(0, 1);
        let mut s = 0u16;
        s |= 1 << (4 + 2 * p.index() + 1); // member 1: delta(0,1) = (0,1)
        let q = p.mirrored();
        let mut s_other = 0u16;
        s_other |= 1 << (4 + 2 * q.index() + 1); // member 2: delta(1,0) = (0,1)
        assert!(is_symmetric(
            IndividualType::new(s),
            IndividualType::new(s_other),
            p
        ));
        // Member 2 dominant instead: no longer symmetric at this game.
        assert!(!is_symmetric(
            IndividualType::new(s),
            IndividualType::new(0),
            p
        ));
    }

    #[test]
    fn dominant_individual_count_is_256() {
        let count = (0..TYPE_CODE_BOUND)
            .map(IndividualType::new)
            .filter(|s| InstrumentProfile::ALL.iter().all(|p| s.delta(*p).is_dominant()))
            .count();
        assert_eq!(count, 256);
    }

    #[test]
    fn dominant_pairs_have_unique_selection() {
        let config = TypeSpaceConfig::full().with_filter(ClassFilter::DominantOnly);
        let mut count = 0u64;
        let mut seen_pair = None;
        for pair in enumerate_pair_types(&config, &[]) {
            count += 1;
            if let Some((s, so)) = seen_pair {
                // Dominant deltas give singleton Nash sets, so (s, s') never repeats.
                assert!((pair.s, pair.s_other) != (s, so));
            }
            seen_pair = Some((pair.s, pair.s_other));
        }
        assert_eq!(count, 65_536);
    }

    #[test]
    fn single_profile_count_matches_brute_force() {
        let config = TypeSpaceConfig::reduced(profile(0, 1));
        let enumerated = enumerate_pair_types(&config, &[]).count();
        let mut expected = 0usize;
        for s in config.member1_codes() {
            for so in config.member2_codes() {
                expected += nash_set(
                    IndividualType::new(s),
                    IndividualType::new(so),
                    profile(0, 1),
                )
                .len();
            }
        }
        assert_eq!(enumerated, expected);
        assert_eq!(config.member1_codes().len(), 64);
    }

    #[test]
    fn rejecting_filter_empties_stream() {
        let config = TypeSpaceConfig::reduced(profile(0, 0));
        let reject: &PairFilter = &|_: &PairType| false;
        assert_eq!(enumerate_pair_types(&config, &[reject]).count(), 0);
    }

    #[test]
    fn enumeration_is_deterministic_and_consistent() {
        let config = TypeSpaceConfig::reduced(profile(1, 0));
        let a: Vec<PairType> = enumerate_pair_types(&config, &[]).collect();
        let b: Vec<PairType> = enumerate_pair_types(&config, &[]).collect();
        assert_eq!(a, b);
        for pair in a.iter().take(500) {
            assert!(pair.is_consistent(config.active_profiles));
            // Selected profile satisfies both best-response equations.
            let p = profile(1, 0);
            let t = pair.e.chosen(p);
            assert_eq!(pair.s.best_response(p, t.d_other), t.d);
            assert_eq!(pair.s_other.best_response(p.mirrored(), t.d), t.d_other);
        }
    }

    #[test]
    fn pair_id_round_trips() {
        let config = TypeSpaceConfig::reduced(profile(1, 1));
        for pair in enumerate_pair_types(&config, &[]).step_by(97) {
            assert_eq!(PairType::from_id(pair.id()), pair);
        }
    }
}
