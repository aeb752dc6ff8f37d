//! The restriction menu: hard zero-mass exclusions and weighted mass-bound
//! inequalities over the pair-type distribution.
//!
//! Equality-style assumptions rule latent types out altogether and compile to
//! pure predicates. The epsilon-graded assumptions bound the probability of
//! violating types; with deterministic types every summand in their defining
//! sums is an indicator, so each compiles to an integer violation count per
//! pair type and the constraint `sum_t mu_t w(t) <= eps`.

use crate::typespace::{is_symmetric, IndividualType, InstrumentProfile, PairType, ProfileSet};
use crate::EngineError;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Which member(s) of the pair a restriction binds.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Member1,
    Member2,
    #[default]
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionKind {
    Dominance,
    Symmetry,
    Supermodular,
    Submodular,
    MonotoneIa,
    VbMonotone,
    EpsVbMonotone,
    Ior,
    OneSidedNc,
    StrategicSubstitutes,
    StrategicComplements,
    EpsStrategicNeutrality,
    MonotoneTreatmentResponse,
    EpsOutcomeAssort,
    EpsTreatmentAssort,
    /// Conditions on outcomes given realized take-up: nonlinear in the type
    /// distribution, rejected at compile time.
    MonotoneTreatmentSelection,
    /// Stochastic dominance across principal strata: likewise nonlinear.
    StochasticDominance,
}

impl RestrictionKind {
    pub fn is_eps_graded(self) -> bool {
        matches!(
            self,
            RestrictionKind::EpsVbMonotone
                | RestrictionKind::EpsStrategicNeutrality
                | RestrictionKind::EpsOutcomeAssort
                | RestrictionKind::EpsTreatmentAssort
        )
    }
}

/// One entry of the restriction menu as configured by the user.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Restriction {
    pub kind: RestrictionKind,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl Restriction {
    pub fn new(kind: RestrictionKind) -> Self {
        Restriction {
            kind,
            scope: Scope::Both,
            eps: None,
        }
    }

    pub fn with_eps(kind: RestrictionKind, eps: f64) -> Self {
        Restriction {
            kind,
            scope: Scope::Both,
            eps: Some(eps),
        }
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }
}

/// CLI form `kind[:eps][:scope]`, e.g. `eps_vb_monotone:0.02:both`.
impl FromStr for Restriction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let kind_str = parts.next().unwrap_or_default();
        let kind: RestrictionKind =
            serde_json::from_value(serde_json::Value::String(kind_str.to_string()))
                .map_err(|_| format!("unknown restriction kind '{kind_str}'"))?;
        let mut eps = None;
        let mut scope = Scope::Both;
        for part in parts {
            if let Ok(v) = part.parse::<f64>() {
                eps = Some(v);
            } else {
                scope = match part {
                    "member1" => Scope::Member1,
                    "member2" => Scope::Member2,
                    "both" => Scope::Both,
                    other => return Err(format!("unknown scope '{other}'")),
                };
            }
        }
        Ok(Restriction { kind, scope, eps })
    }
}

/// A compiled restriction: either a pure predicate over pair types or a
/// nonnegative violation weight bounded by eps.
#[derive(Clone, PartialEq, Debug, Serialize)]
#[serde(tag = "constraint")]
pub enum CompiledConstraint {
    HardFilter(HardFilter),
    MassBound(MassBound),
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct HardFilter {
    pub kind: RestrictionKind,
    pub scope: Scope,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct MassBound {
    pub kind: RestrictionKind,
    pub scope: Scope,
    pub eps: f64,
}

/// Chain order of the four-way take-up monotonicity.
const VB_CHAIN: [InstrumentProfile; 4] = [
    InstrumentProfile::new(false, false),
    InstrumentProfile::new(false, true),
    InstrumentProfile::new(true, false),
    InstrumentProfile::new(true, true),
];

fn dominance_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    own_active.iter().all(|p| s.delta(p).is_dominant())
}

fn supermodular_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    own_active.iter().all(|p| s.delta(p).is_supermodular())
}

fn submodular_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    own_active.iter().all(|p| s.delta(p).is_submodular())
}

/// Own-offer monotonicity holding the partner offer and take-up fixed.
fn monotone_ia_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    for z_other in [false, true] {
        let lo = InstrumentProfile::new(false, z_other);
        let hi = InstrumentProfile::new(true, z_other);
        if own_active.contains(lo) && own_active.contains(hi) {
            for d_other in [false, true] {
                if s.best_response(lo, d_other) > s.best_response(hi, d_other) {
                    return false;
                }
            }
        }
    }
    true
}

/// The four-way ordering over the whole offer grid, per partner take-up.
fn vb_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    let chain: Vec<InstrumentProfile> = VB_CHAIN
        .into_iter()
        .filter(|p| own_active.contains(*p))
        .collect();
    for w in chain.windows(2) {
        for d_other in [false, true] {
            if s.best_response(w[0], d_other) > s.best_response(w[1], d_other) {
                return false;
            }
        }
    }
    true
}

/// Take-up depends on the own offer alone.
fn ior_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    for z in [false, true] {
        let mut seen: Option<bool> = None;
        for z_other in [false, true] {
            let p = InstrumentProfile::new(z, z_other);
            if !own_active.contains(p) {
                continue;
            }
            for d_other in [false, true] {
                let v = s.best_response(p, d_other);
                match seen {
                    None => seen = Some(v),
                    Some(prev) if prev != v => return false,
                    _ => {}
                }
            }
        }
    }
    true
}

/// Partner take-up irrelevant, and no take-up without an own offer.
fn one_sided_ok(s: IndividualType, own_active: ProfileSet) -> bool {
    for p in own_active.iter() {
        let at0 = s.best_response(p, false);
        let at1 = s.best_response(p, true);
        if at0 != at1 {
            return false;
        }
        if !p.z && at0 {
            return false;
        }
    }
    true
}

/// Outcomes coordinate-wise nondecreasing in the treatment pair.
fn mtr_ok(s: IndividualType) -> bool {
    let y = |d: bool, d_other: bool| s.potential_outcome(d, d_other);
    y(false, false) <= y(false, true)
        && y(false, false) <= y(true, false)
        && y(false, true) <= y(true, true)
        && y(true, false) <= y(true, true)
}

fn scoped_members(scope: Scope) -> &'static [bool] {
    // false = member 1, true = member 2.
    match scope {
        Scope::Member1 => &[false],
        Scope::Member2 => &[true],
        Scope::Both => &[false, true],
    }
}

fn member_view(pair: &PairType, member2: bool, active: ProfileSet) -> (IndividualType, ProfileSet) {
    if member2 {
        (pair.s_other, active.mirrored())
    } else {
        (pair.s, active)
    }
}

impl HardFilter {
    /// Whether the predicate reads potential-outcome bits (as opposed to
    /// response bits only). Lets enumeration hoist response-only filters.
    pub fn reads_outcomes(&self) -> bool {
        matches!(
            self.kind,
            RestrictionKind::MonotoneTreatmentResponse | RestrictionKind::EpsOutcomeAssort
        )
    }

    /// Evaluate against the active games. Pure and deterministic.
    pub fn accepts(&self, pair: &PairType, active: ProfileSet) -> bool {
        let per_member = |ok: &dyn Fn(IndividualType, ProfileSet) -> bool| {
            scoped_members(self.scope).iter().all(|&m2| {
                let (s, own) = member_view(pair, m2, active);
                ok(s, own)
            })
        };
        match self.kind {
            RestrictionKind::Dominance => per_member(&dominance_ok),
            RestrictionKind::Supermodular | RestrictionKind::StrategicComplements => {
                per_member(&supermodular_ok)
            }
            RestrictionKind::Submodular | RestrictionKind::StrategicSubstitutes => {
                per_member(&submodular_ok)
            }
            RestrictionKind::MonotoneIa => per_member(&monotone_ia_ok),
            RestrictionKind::VbMonotone => per_member(&vb_ok),
            RestrictionKind::Ior => per_member(&ior_ok),
            RestrictionKind::OneSidedNc => per_member(&one_sided_ok),
            RestrictionKind::MonotoneTreatmentResponse => per_member(&|s, _| mtr_ok(s)),
            RestrictionKind::Symmetry => {
                active.iter().all(|p| is_symmetric(pair.s, pair.s_other, p))
            }
            // An eps-graded kind compiled at eps = 0: accept zero-weight types.
            k if k.is_eps_graded() => {
                MassBound {
                    kind: k,
                    scope: self.scope,
                    eps: 0.0,
                }
                .weight(pair, active)
                    == 0
            }
            _ => unreachable!("nonlinear kinds are rejected at compile time"),
        }
    }
}

impl MassBound {
    /// Whether the weight reads potential-outcome bits.
    pub fn reads_outcomes(&self) -> bool {
        matches!(self.kind, RestrictionKind::EpsOutcomeAssort)
    }

    /// Integer violation count for one pair type.
    pub fn weight(&self, pair: &PairType, active: ProfileSet) -> u32 {
        match self.kind {
            RestrictionKind::EpsVbMonotone => {
                let violated = scoped_members(self.scope).iter().any(|&m2| {
                    let (s, own) = member_view(pair, m2, active);
                    !vb_ok(s, own)
                });
                violated as u32
            }
            RestrictionKind::EpsStrategicNeutrality => {
                let mut count = 0;
                for &m2 in scoped_members(self.scope) {
                    let (s, own) = member_view(pair, m2, active);
                    for p in own.iter() {
                        if !s.delta(p).is_dominant() {
                            count += 1;
                        }
                    }
                }
                count
            }
            RestrictionKind::EpsOutcomeAssort => {
                (pair.s.po_bits() ^ pair.s_other.po_bits()).count_ones()
            }
            RestrictionKind::EpsTreatmentAssort => {
                // Compare the members' response functions at own-frame
                // arguments meaningful for both.
                let mut count = 0;
                for p in active.iter() {
                    if !active.contains(p.mirrored()) {
                        continue;
                    }
                    for d_other in [false, true] {
                        if pair.s.best_response(p, d_other)
                            != pair.s_other.best_response(p, d_other)
                        {
                            count += 1;
                        }
                    }
                }
                count
            }
            _ => unreachable!("only eps-graded kinds carry weights"),
        }
    }
}

/// Compile one restriction. Epsilon-graded kinds at `eps = 0` collapse to the
/// equivalent hard filter: a zero bound on a nonnegative weight pins the mass
/// of every violating type to zero.
pub fn compile(restriction: &Restriction) -> Result<CompiledConstraint, EngineError> {
    match restriction.kind {
        RestrictionKind::MonotoneTreatmentSelection => {
            return Err(EngineError::UnsupportedNonlinear(
                "monotone_treatment_selection conditions on realized take-up".into(),
            ))
        }
        RestrictionKind::StochasticDominance => {
            return Err(EngineError::UnsupportedNonlinear(
                "stochastic_dominance across strata is a ratio of type masses".into(),
            ))
        }
        _ => {}
    }
    if restriction.kind.is_eps_graded() {
        let eps = restriction.eps.ok_or_else(|| {
            EngineError::InvalidConfig(format!("{:?} requires an eps value", restriction.kind))
        })?;
        if !(0.0..=1.0).contains(&eps) {
            return Err(EngineError::InvalidConfig(format!(
                "eps must lie in [0, 1], got {eps}"
            )));
        }
        if eps == 0.0 {
            return Ok(CompiledConstraint::HardFilter(HardFilter {
                kind: restriction.kind,
                scope: restriction.scope,
            }));
        }
        return Ok(CompiledConstraint::MassBound(MassBound {
            kind: restriction.kind,
            scope: restriction.scope,
            eps,
        }));
    }
    if restriction.eps.is_some() {
        return Err(EngineError::InvalidConfig(format!(
            "{:?} does not take an eps value",
            restriction.kind
        )));
    }
    Ok(CompiledConstraint::HardFilter(HardFilter {
        kind: restriction.kind,
        scope: restriction.scope,
    }))
}

/// Compiled form of a whole restriction list, split by constraint shape.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub filters: Vec<HardFilter>,
    pub bounds: Vec<MassBound>,
}

pub fn compile_all(restrictions: &[Restriction]) -> Result<ConstraintSet, EngineError> {
    let mut set = ConstraintSet::default();
    for r in restrictions {
        match compile(r)? {
            CompiledConstraint::HardFilter(f) => set.filters.push(f),
            CompiledConstraint::MassBound(b) => set.bounds.push(b),
        }
    }
    Ok(set)
}

/// Warn about combinations that positive data mass can falsify outright:
/// dominance and symmetry jointly rule out every asymmetric take-up profile.
pub fn falsifiable_combination_check(restrictions: &[Restriction]) -> Vec<String> {
    let dominance_like = restrictions.iter().any(|r| {
        r.kind == RestrictionKind::Dominance
            || (r.kind == RestrictionKind::EpsStrategicNeutrality && r.eps == Some(0.0))
    });
    let symmetry = restrictions
        .iter()
        .any(|r| r.kind == RestrictionKind::Symmetry);
    let mut warnings = Vec::new();
    if dominance_like && symmetry {
        warnings.push(
            "dominance and symmetry jointly exclude asymmetric take-up profiles; \
             the identified set is empty whenever such cells have positive empirical mass"
                .to_string(),
        );
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typespace::{enumerate_pair_types, ClassFilter, EquilibriumSelection, TypeSpaceConfig};

    fn full() -> ProfileSet {
        ProfileSet::FULL
    }

    #[test]
    fn neutrality_at_zero_equals_dominance_filter() {
        let a = compile(&Restriction::with_eps(
            RestrictionKind::EpsStrategicNeutrality,
            0.0,
        ))
        .unwrap();
        let b = compile(&Restriction::new(RestrictionKind::Dominance)).unwrap();
        let (CompiledConstraint::HardFilter(fa), CompiledConstraint::HardFilter(fb)) = (&a, &b)
        else {
            panic!("expected hard filters");
        };
        let config = TypeSpaceConfig::reduced(InstrumentProfile::new(false, true));
        for pair in enumerate_pair_types(&config, &[]) {
            assert_eq!(
                fa.accepts(&pair, config.active_profiles),
                fb.accepts(&pair, config.active_profiles)
            );
        }
    }

    #[test]
    fn vb_weight_is_an_indicator() {
        let bound = match compile(&Restriction::with_eps(RestrictionKind::EpsVbMonotone, 1.0))
            .unwrap()
        {
            CompiledConstraint::MassBound(b) => b,
            _ => panic!("eps = 1 stays an inequality"),
        };
        assert_eq!(bound.eps, 1.0);
        let config = TypeSpaceConfig::full().with_filter(ClassFilter::DominantOnly);
        for pair in enumerate_pair_types(&config, &[]).step_by(101) {
            assert!(bound.weight(&pair, full()) <= 1);
        }
    }

    #[test]
    fn ior_rejects_partner_dependent_response() {
        // Participates only when both are offered and the partner participates:
        // D(1,1,0) = 0 differs from D(1,1,1) = 1.
        let table1 = IndividualType::new(1 << 11);
        assert!(!ior_ok(table1, full()));
        let filter = HardFilter {
            kind: RestrictionKind::Ior,
            scope: Scope::Member1,
        };
        let pair = PairType::new(
            table1,
            IndividualType::new(0),
            EquilibriumSelection::from_code(0),
        );
        assert!(!filter.accepts(&pair, full()));
    }

    #[test]
    fn dominance_accepts_256_individual_types() {
        let count = (0..crate::typespace::TYPE_CODE_BOUND)
            .map(IndividualType::new)
            .filter(|s| dominance_ok(*s, full()))
            .count();
        assert_eq!(count, 256);
    }

    #[test]
    fn one_sided_types_never_take_up_unoffered() {
        for code in 0..crate::typespace::TYPE_CODE_BOUND {
            let s = IndividualType::new(code);
            if one_sided_ok(s, full()) {
                for z_other in [false, true] {
                    let p = InstrumentProfile::new(false, z_other);
                    assert!(!s.best_response(p, false));
                    assert!(!s.best_response(p, true));
                }
            }
        }
    }

    #[test]
    fn dominance_plus_symmetry_never_selects_asymmetric_takeup() {
        let config = TypeSpaceConfig::full().with_filter(ClassFilter::DominantOnly);
        let sym = HardFilter {
            kind: RestrictionKind::Symmetry,
            scope: Scope::Both,
        };
        let keep = |pair: &PairType| sym.accepts(pair, ProfileSet::FULL);
        let mut survivors = 0;
        for pair in enumerate_pair_types(&config, &[&keep]) {
            survivors += 1;
            for p in InstrumentProfile::ALL {
                let t = pair.e.chosen(p);
                assert!(!t.is_asymmetric(), "dominant+symmetric pair selected {t:?}");
            }
        }
        assert!(survivors > 0);
    }

    #[test]
    fn vb_implies_own_offer_monotonicity() {
        for code in (0..crate::typespace::TYPE_CODE_BOUND).step_by(3) {
            let s = IndividualType::new(code);
            if vb_ok(s, full()) {
                assert!(monotone_ia_ok(s, full()), "code {code:#x}");
            }
        }
    }

    #[test]
    fn assortative_weights_count_differing_bits() {
        let a = IndividualType::from_parts(0, 0b1111_0000);
        let b = IndividualType::from_parts(0, 0b0000_0000);
        let pair = PairType::new(a, b, EquilibriumSelection::from_code(0));
        let bound = MassBound {
            kind: RestrictionKind::EpsTreatmentAssort,
            scope: Scope::Both,
            eps: 0.5,
        };
        assert_eq!(bound.weight(&pair, full()), 4);
        let outcome_bound = MassBound {
            kind: RestrictionKind::EpsOutcomeAssort,
            scope: Scope::Both,
            eps: 0.5,
        };
        let c = PairType::new(
            IndividualType::from_parts(0b1010, 0),
            IndividualType::from_parts(0b0101, 0),
            EquilibriumSelection::from_code(0),
        );
        assert_eq!(outcome_bound.weight(&c, full()), 4);
    }

    #[test]
    fn nonlinear_kinds_rejected() {
        for kind in [
            RestrictionKind::MonotoneTreatmentSelection,
            RestrictionKind::StochasticDominance,
        ] {
            match compile(&Restriction::new(kind)) {
                Err(EngineError::UnsupportedNonlinear(_)) => {}
                other => panic!("expected UnsupportedNonlinear, got {other:?}"),
            }
        }
    }

    #[test]
    fn falsifiable_combination_warnings() {
        let both = vec![
            Restriction::new(RestrictionKind::Dominance),
            Restriction::new(RestrictionKind::Symmetry),
        ];
        assert_eq!(falsifiable_combination_check(&both).len(), 1);
        let alone = vec![Restriction::new(RestrictionKind::Dominance)];
        assert!(falsifiable_combination_check(&alone).is_empty());
        let other = vec![
            Restriction::new(RestrictionKind::Symmetry),
            Restriction::new(RestrictionKind::MonotoneIa),
        ];
        assert!(falsifiable_combination_check(&other).is_empty());
        // Strategic neutrality at zero acts as dominance.
        let neutral = vec![
            Restriction::with_eps(RestrictionKind::EpsStrategicNeutrality, 0.0),
            Restriction::new(RestrictionKind::Symmetry),
        ];
        assert_eq!(falsifiable_combination_check(&neutral).len(), 1);
    }

    #[test]
    fn compile_is_pure() {
        let r = Restriction::with_eps(RestrictionKind::EpsOutcomeAssort, 0.25);
        let a = serde_json::to_string(&compile(&r).unwrap()).unwrap();
        let b = serde_json::to_string(&compile(&r).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn restriction_parses_from_cli_form() {
        let r: Restriction = "eps_vb_monotone:0.02:both".parse().unwrap();
        assert_eq!(r.kind, RestrictionKind::EpsVbMonotone);
        assert_eq!(r.eps, Some(0.02));
        assert_eq!(r.scope, Scope::Both);
        let r: Restriction = "dominance:member2".parse().unwrap();
        assert_eq!(r.kind, RestrictionKind::Dominance);
        assert_eq!(r.scope, Scope::Member2);
        assert!("made_up_kind".parse::<Restriction>().is_err());
    }

    #[test]
    fn scope_member1_leaves_member2_free() {
        let filter = HardFilter {
            kind: RestrictionKind::Dominance,
            scope: Scope::Member1,
        };
        let dominant = IndividualType::from_parts(0, 0);
        let strategic = IndividualType::new(1 << 11);
        let e = EquilibriumSelection::from_code(0);
        assert!(filter.accepts(&PairType::new(dominant, strategic, e), full()));
        assert!(!filter.accepts(&PairType::new(strategic, dominant, e), full()));
    }

    #[test]
    fn supermodular_pair_fails_dominance_at_fixed_game() {
        let p = InstrumentProfile::new(false, false);
        let s = IndividualType::new(1 << (4 + 2 * p.index() as u16 + 1));
        let pair = PairType::new(s, s, EquilibriumSelection::from_code(0));
        let active = ProfileSet::single(p);
        let sup = HardFilter {
            kind: RestrictionKind::Supermodular,
            scope: Scope::Both,
        };
        let dom = HardFilter {
            kind: RestrictionKind::Dominance,
            scope: Scope::Both,
        };
        assert!(sup.accepts(&pair, active));
        assert!(!dom.accepts(&pair, active));
    }
}
