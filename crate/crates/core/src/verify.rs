//! Executable checks of the identification results at desk scale.
//!
//! Each check builds the relevant programs, runs them over randomized or
//! hand-constructed inputs, and reports the worst endpoint discrepancy. The
//! checks double as the core property suite: deterministic selections
//! suffice, dominance/symmetry/super/submodularity leave fixed-allocation
//! bounds unchanged, the policy-targeting counterexample separates them, and
//! stacking dominance with symmetry is falsified by asymmetric take-up.

use crate::data::ObservedDistribution;
use crate::lpsolve::{self, SolveStatus, SolverOptions};
use crate::program::{
    build_program_with, column_of, objective, Allocation, Estimand, IntervalStatus,
    LinearProgramSpec, Member, PolicyArm, Sense,
};
use crate::restrictions::{compile_all, ConstraintSet, Restriction, RestrictionKind};
use crate::simulate::replicate_rng;
use crate::typespace::{
    nash_set, selection_product, ClassFilter, EquilibriumSelection, IndividualType,
    InstrumentProfile, NashSet, PairFilter, PairType, ProfileSet, TypeSpaceConfig,
};
use crate::EngineError;
use rand::Rng;
use serde::Serialize;

/// Scale of the randomized checks: one active game (64 types per member) or
/// the full instrument support (4096 per member).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckScale {
    Reduced,
    Full,
}

impl CheckScale {
    fn config(self) -> TypeSpaceConfig {
        match self {
            // An asymmetric-offer game exercises the frame conventions.
            CheckScale::Reduced => TypeSpaceConfig::reduced(InstrumentProfile::new(false, true)),
            CheckScale::Full => TypeSpaceConfig::full(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub discrepancy: f64,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremCheckResult {
    pub name: String,
    pub passed: bool,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub details: Vec<TrialRecord>,
}

impl TheoremCheckResult {
    fn from_trials(name: &str, tolerance: f64, details: Vec<TrialRecord>) -> Self {
        let max_discrepancy = details
            .iter()
            .map(|t| t.discrepancy)
            .fold(0.0f64, f64::max);
        TheoremCheckResult {
            name: name.to_string(),
            passed: max_discrepancy <= tolerance,
            max_discrepancy,
            tolerance,
            details,
        }
    }

    fn failed(name: &str, tolerance: f64, note: String) -> Self {
        TheoremCheckResult {
            name: name.to_string(),
            passed: false,
            max_discrepancy: f64::INFINITY,
            tolerance,
            details: vec![TrialRecord {
                trial: 0,
                discrepancy: f64::INFINITY,
                note,
            }],
        }
    }
}

/// A random mixture over admissible pair types and its induced cells.
pub struct FeasibleInstance {
    pub observed: ObservedDistribution,
    pub mixture: Vec<(PairType, f64)>,
}

/// Sample `n_types` admissible pair types (rejection on empty Nash sets) and
/// a random mass vector; the induced cells are feasible by construction, so
/// equivalence checks test set equality rather than feasibility edge cases.
pub fn random_feasible(config: &TypeSpaceConfig, seed: u64, n_types: usize) -> FeasibleInstance {
    let mut rng = replicate_rng(seed, 0);
    let active = config.active_profiles;
    let m1 = config.member1_brf_codes();
    let m2 = config.member2_brf_codes();
    let mut mixture: Vec<(PairType, f64)> = Vec::with_capacity(n_types);
    while mixture.len() < n_types {
        let brf1 = m1[rng.gen_range(0..m1.len())];
        let brf2 = m2[rng.gen_range(0..m2.len())];
        let s = IndividualType::from_parts(rng.gen_range(0..16), brf1);
        let s_other = IndividualType::from_parts(rng.gen_range(0..16), brf2);
        let mut sets: Vec<(InstrumentProfile, NashSet)> = Vec::with_capacity(active.len());
        let mut ok = true;
        for p in active.iter() {
            let ns = nash_set(s, s_other, p);
            if ns.is_empty() {
                ok = false;
                break;
            }
            sets.push((p, ns));
        }
        if !ok {
            continue;
        }
        let selections = selection_product(&sets);
        let e = selections[rng.gen_range(0..selections.len())];
        mixture.push((PairType::new(s, s_other, e), rng.gen_range(0.05..1.0)));
    }
    let total: f64 = mixture.iter().map(|(_, m)| m).sum();
    for (_, m) in mixture.iter_mut() {
        *m /= total;
    }
    let mut cells = vec![0.0; 64];
    for (pair, mass) in &mixture {
        let sig = column_of(pair, active);
        for p in active.iter() {
            cells[16 * p.index() + sig[p.index()] as usize] += mass;
        }
    }
    for p in active.iter() {
        let b = p.index();
        let sum: f64 = cells[16 * b..16 * (b + 1)].iter().sum();
        for c in &mut cells[16 * b..16 * (b + 1)] {
            *c /= sum;
        }
    }
    let mut n_z = [0u64; 4];
    for p in active.iter() {
        n_z[p.index()] = 1000;
    }
    let observed = ObservedDistribution::from_cells(cells, n_z, active)
        .expect("forward-simulated cells are normalized");
    FeasibleInstance { observed, mixture }
}

fn interval_discrepancy(
    a: &crate::program::IdentifiedInterval,
    b: &crate::program::IdentifiedInterval,
) -> f64 {
    match (a.status, b.status) {
        (IntervalStatus::Interval, IntervalStatus::Interval) => {
            (a.lower - b.lower).abs().max((a.upper - b.upper).abs())
        }
        (IntervalStatus::Empty, IntervalStatus::Empty) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Deterministic selections suffice: appending columns that mix a pair's
/// deterministic selections (a stochastic selection rule) never moves either
/// endpoint.
pub fn check_deterministic_closure(trials: u32, seed: u64) -> TheoremCheckResult {
    let tolerance = 1e-9;
    let config = CheckScale::Reduced.config();
    let est = Estimand::ade(Member::One);
    let mut details = Vec::new();
    for trial in 0..trials {
        let inst = random_feasible(&config, seed.wrapping_add(trial as u64), 6);
        let spec = match build_program_with(&config, &ConstraintSet::default(), &est, &inst.observed, &[])
        {
            Ok(s) => s,
            Err(e) => return TheoremCheckResult::failed("deterministic_closure", tolerance, e.to_string()),
        };
        let opts = SolverOptions::default();
        let base = match spec.bounds_values(&inst.observed, &opts) {
            Ok(i) => i,
            Err(e) => return TheoremCheckResult::failed("deterministic_closure", tolerance, e.to_string()),
        };
        // Augment with stochastic-selection columns: random convex mixtures
        // over one pair's deterministic selections.
        let mut rng = replicate_rng(seed ^ 0x5b5b, trial as u64);
        let mut lp_lower = spec.to_standard_lp(&inst.observed, Sense::Lower);
        let mut lp_upper = spec.to_standard_lp(&inst.observed, Sense::Upper);
        let mut added = 0;
        let mut guard = 0;
        while added < 8 && guard < 200 {
            guard += 1;
            let m1 = config.member1_brf_codes();
            let m2 = config.member2_brf_codes();
            let s = IndividualType::from_parts(rng.gen_range(0..16), m1[rng.gen_range(0..m1.len())]);
            let s_other =
                IndividualType::from_parts(rng.gen_range(0..16), m2[rng.gen_range(0..m2.len())]);
            let mut sets = Vec::new();
            let mut ok = true;
            for p in config.active_profiles.iter() {
                let ns = nash_set(s, s_other, p);
                if ns.is_empty() {
                    ok = false;
                    break;
                }
                sets.push((p, ns));
            }
            if !ok {
                continue;
            }
            let selections = selection_product(&sets);
            if selections.len() < 2 {
                continue;
            }
            let mut weights: Vec<f64> = (0..selections.len())
                .map(|_| rng.gen_range(0.01..1.0))
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            // Mixture column: convex combination of the per-selection cells.
            let mut dense = vec![0.0; lp_lower.n_rows];
            let mut obj = None;
            for (e, w) in selections.iter().zip(&weights) {
                let pair = PairType::new(s, s_other, *e);
                let sig = column_of(&pair, config.active_profiles);
                for (pos, p) in config.active_profiles.iter().enumerate() {
                    let within = sig[p.index()] as usize;
                    if within + 1 < 16 {
                        dense[15 * pos + within] += w;
                    }
                }
                let o = objective(&pair, &est);
                // Fixed-allocation objectives ignore the selection.
                if let Some(prev) = obj {
                    assert_eq!(prev, o);
                }
                obj = Some(o);
            }
            dense[15 * config.active_profiles.len()] = 1.0;
            let col: Vec<(usize, f64)> = dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(r, v)| (r, *v))
                .collect();
            let o = obj.unwrap() as f64;
            lp_lower.cols.push(col.clone());
            lp_lower.c.push(o);
            lp_upper.cols.push(col);
            lp_upper.c.push(-o);
            added += 1;
        }
        let lo = lpsolve::solve(&lp_lower, &opts);
        let hi = lpsolve::solve(&lp_upper, &opts);
        let (Some(lo), Some(hi)) = (lo.solution, hi.solution) else {
            return TheoremCheckResult::failed(
                "deterministic_closure",
                tolerance,
                "augmented solve failed".into(),
            );
        };
        let disc = (lo.value - base.lower)
            .abs()
            .max((-hi.value - base.upper).abs());
        details.push(TrialRecord {
            trial,
            discrepancy: disc,
            note: format!("{added} mixture columns appended"),
        });
    }
    TheoremCheckResult::from_trials("deterministic_closure", tolerance, details)
}

fn equivalence_check(
    name: &str,
    filter: ClassFilter,
    trials: u32,
    seed: u64,
    scale: CheckScale,
) -> TheoremCheckResult {
    let tolerance = 1e-7;
    let config = scale.config();
    let sub_config = config.with_filter(filter);
    let est = Estimand::ade(Member::One);
    // Build both programs once; only the right-hand side varies per trial.
    let probe = random_feasible(&config, seed, 5);
    let full_spec = match build_program_with(
        &config,
        &ConstraintSet::default(),
        &est,
        &probe.observed,
        &[],
    ) {
        Ok(s) => s,
        Err(e) => return TheoremCheckResult::failed(name, tolerance, e.to_string()),
    };
    let sub_spec = match build_program_with(
        &sub_config,
        &ConstraintSet::default(),
        &est,
        &probe.observed,
        &[],
    ) {
        Ok(s) => s,
        Err(e) => return TheoremCheckResult::failed(name, tolerance, e.to_string()),
    };
    let opts = SolverOptions::default();
    let mut details = Vec::new();
    for trial in 0..trials {
        let inst = random_feasible(&config, seed.wrapping_add(1 + trial as u64), 8);
        let a = full_spec.bounds_values(&inst.observed, &opts);
        let b = sub_spec.bounds_values(&inst.observed, &opts);
        match (a, b) {
            (Ok(a), Ok(b)) => details.push(TrialRecord {
                trial,
                discrepancy: interval_discrepancy(&a, &b),
                note: format!(
                    "full [{:.6}, {:.6}] vs subspace [{:.6}, {:.6}]",
                    a.lower, a.upper, b.lower, b.upper
                ),
            }),
            (e1, e2) => {
                return TheoremCheckResult::failed(
                    name,
                    tolerance,
                    format!("solve failure: {:?} / {:?}", e1.err(), e2.err()),
                )
            }
        }
    }
    TheoremCheckResult::from_trials(name, tolerance, details)
}

/// Dominance leaves fixed-allocation bounds unchanged.
pub fn check_dominance_equivalence(trials: u32, seed: u64, scale: CheckScale) -> TheoremCheckResult {
    let mut result = equivalence_check("dominance_equivalence", ClassFilter::DominantOnly, trials, seed, scale);
    // The policy-targeting contrast: on the two-type counterexample space the
    // dominant subspace pins the estimand while the full space does not.
    match counterexample_gamma_bounds() {
        Ok(cx) => {
            let expected = cx.full.0.abs() < 1e-12
                && (cx.full.1 - 1.0).abs() < 1e-12
                && cx.dominant.0.abs() < 1e-12
                && cx.dominant.1.abs() < 1e-12;
            result.details.push(TrialRecord {
                trial: u32::MAX,
                discrepancy: if expected { 0.0 } else { f64::INFINITY },
                note: format!(
                    "policy contrast: full [{}, {}], dominant [{}, {}] (expected [0,1] vs [0,0])",
                    cx.full.0, cx.full.1, cx.dominant.0, cx.dominant.1
                ),
            });
            if !expected {
                result.passed = false;
                result.max_discrepancy = f64::INFINITY;
            }
        }
        Err(e) => {
            result.passed = false;
            result.details.push(TrialRecord {
                trial: u32::MAX,
                discrepancy: f64::INFINITY,
                note: e.to_string(),
            });
        }
    }
    result
}

/// Symmetry leaves fixed-allocation bounds unchanged.
pub fn check_symmetry_equivalence(trials: u32, seed: u64, scale: CheckScale) -> TheoremCheckResult {
    let mut result = equivalence_check("symmetry_equivalence", ClassFilter::SymmetricOnly, trials, seed, scale);
    // Policy-targeting contrast in the game the estimand lives in: the
    // symmetric subspace of the counterexample keeps only the twin pair.
    match counterexample_symmetric_gamma() {
        Ok((full, sym)) => {
            let expected = full.0.abs() < 1e-12
                && (full.1 - 1.0).abs() < 1e-12
                && sym.0.abs() < 1e-12
                && sym.1.abs() < 1e-12;
            result.details.push(TrialRecord {
                trial: u32::MAX,
                discrepancy: if expected { 0.0 } else { f64::INFINITY },
                note: format!(
                    "policy contrast at the estimand's game: full [{}, {}], symmetric [{}, {}]",
                    full.0, full.1, sym.0, sym.1
                ),
            });
            if !expected {
                result.passed = false;
                result.max_discrepancy = f64::INFINITY;
            }
        }
        Err(e) => {
            result.passed = false;
            result.details.push(TrialRecord {
                trial: u32::MAX,
                discrepancy: f64::INFINITY,
                note: e.to_string(),
            });
        }
    }
    result
}

/// Super- and submodular subspaces bracket the dominant one.
pub fn check_sandwich(trials: u32, seed: u64, scale: CheckScale) -> TheoremCheckResult {
    let tolerance = 1e-7;
    let config = scale.config();
    let est = Estimand::ade(Member::One);
    let probe = random_feasible(&config, seed, 5);
    let specs: Result<Vec<LinearProgramSpec>, EngineError> = [
        ClassFilter::SupermodularOnly,
        ClassFilter::SubmodularOnly,
        ClassFilter::DominantOnly,
    ]
    .into_iter()
    .map(|f| {
        build_program_with(
            &config.with_filter(f),
            &ConstraintSet::default(),
            &est,
            &probe.observed,
            &[],
        )
    })
    .collect();
    let specs = match specs {
        Ok(s) => s,
        Err(e) => return TheoremCheckResult::failed("modularity_sandwich", tolerance, e.to_string()),
    };
    let opts = SolverOptions::default();
    let mut details = Vec::new();
    for trial in 0..trials {
        let inst = random_feasible(&config, seed.wrapping_add(1 + trial as u64), 8);
        let mut intervals = Vec::new();
        for spec in &specs {
            match spec.bounds_values(&inst.observed, &opts) {
                Ok(i) => intervals.push(i),
                Err(e) => {
                    return TheoremCheckResult::failed("modularity_sandwich", tolerance, e.to_string())
                }
            }
        }
        let mut disc = 0.0f64;
        for pair in intervals.windows(2) {
            disc = disc.max(interval_discrepancy(&pair[0], &pair[1]));
        }
        details.push(TrialRecord {
            trial,
            discrepancy: disc,
            note: format!(
                "super [{:.6}, {:.6}] sub [{:.6}, {:.6}] dominant [{:.6}, {:.6}]",
                intervals[0].lower,
                intervals[0].upper,
                intervals[1].lower,
                intervals[1].upper,
                intervals[2].lower,
                intervals[2].upper
            ),
        });
    }
    TheoremCheckResult::from_trials("modularity_sandwich", tolerance, details)
}

/// The two-type counterexample space and its observed full-compliance cells.
pub struct Counterexample {
    pub config: TypeSpaceConfig,
    pub observed: ObservedDistribution,
    pub gamma: Estimand,
    pub pair_ids: [u32; 2],
}

/// Construct the two-type policy-targeting space: member 1 never takes at
/// the no-offer game and complies elsewhere; the partner responds to the
/// forced treatment in one type and ignores it in the twin; outcomes are 1
/// only under joint take-up; selections follow the offers.
pub fn counterexample() -> Counterexample {
    let po = 0b1000u16;
    let comply = crate::simulate::comply_brf();
    let s = IndividualType::from_parts(po, comply);
    let s_super = IndividualType::from_parts(po, comply | 0b0000_0010);
    let e = crate::simulate::full_compliance_selection();
    let strategic = PairType::new(s, s_super, e);
    let twin = PairType::new(s, s, e);
    let dgp = crate::simulate::TypeDgp::new(vec![strategic, twin], vec![0.5, 0.5], [0.25; 4])
        .expect("counterexample types are admissible");
    Counterexample {
        config: TypeSpaceConfig::full(),
        observed: dgp.population_cells(),
        gamma: Estimand::PolicyTarget {
            member: Member::One,
            arm: PolicyArm {
                forced: true,
                offer_own: false,
                offer_partner: false,
            },
            contrast: None,
        },
        pair_ids: [strategic.id(), twin.id()],
    }
}

struct CounterexampleBounds {
    full: (f64, f64),
    supermodular: (f64, f64),
    dominant: (f64, f64),
    submodular: (f64, f64),
}

fn gamma_bounds_with(
    cx: &Counterexample,
    restrictions: &[Restriction],
) -> Result<(f64, f64), EngineError> {
    let ids = cx.pair_ids;
    let keep = move |pair: &PairType| ids.contains(&pair.id());
    let keep_ref: &PairFilter = &keep;
    let constraints = compile_all(restrictions)?;
    let spec = build_program_with(&cx.config, &constraints, &cx.gamma, &cx.observed, &[keep_ref])?;
    let interval = spec.bounds_values(&cx.observed, &SolverOptions::default())?;
    if interval.status != IntervalStatus::Interval {
        return Err(EngineError::Solver("expected a nonempty interval".into()));
    }
    Ok((interval.lower, interval.upper))
}

fn counterexample_gamma_bounds() -> Result<CounterexampleBounds, EngineError> {
    let cx = counterexample();
    Ok(CounterexampleBounds {
        full: gamma_bounds_with(&cx, &[])?,
        supermodular: gamma_bounds_with(&cx, &[Restriction::new(RestrictionKind::Supermodular)])?,
        dominant: gamma_bounds_with(&cx, &[Restriction::new(RestrictionKind::Dominance)])?,
        submodular: gamma_bounds_with(&cx, &[Restriction::new(RestrictionKind::Submodular)])?,
    })
}

/// The symmetric variant, evaluated at the game the estimand fixes: with the
/// no-offer game active, in-game symmetry keeps exactly the twin pair.
fn counterexample_symmetric_gamma() -> Result<((f64, f64), (f64, f64)), EngineError> {
    let cx = counterexample();
    let reduced = TypeSpaceConfig::reduced(InstrumentProfile::new(false, false));
    let mut cells = vec![0.0; 64];
    for w in 0..16 {
        cells[w] = cx.observed.cell(InstrumentProfile::new(false, false), w);
    }
    let observed = ObservedDistribution::from_cells(
        cells,
        [100, 0, 0, 0],
        ProfileSet::single(InstrumentProfile::new(false, false)),
    )?;
    let ids = cx.pair_ids;
    // Project the two types onto the reduced support: response bits at
    // inactive games are pinned to zero there.
    let project = |id: u32| -> PairType {
        let pair = PairType::from_id(id);
        let mask_po = 0xFu16;
        let keep_bits_m1 = mask_po | (0b11 << 4);
        let keep_bits_m2 = mask_po | (0b11 << 4);
        PairType::new(
            IndividualType::new(pair.s.code() & keep_bits_m1),
            IndividualType::new(pair.s_other.code() & keep_bits_m2),
            EquilibriumSelection::from_code(0),
        )
    };
    let projected = [project(ids[0]).id(), project(ids[1]).id()];
    let keep = move |pair: &PairType| projected.contains(&pair.id());
    let keep_ref: &PairFilter = &keep;
    let full = {
        let spec = build_program_with(
            &reduced,
            &ConstraintSet::default(),
            &cx.gamma,
            &observed,
            &[keep_ref],
        )?;
        let i = spec.bounds_values(&observed, &SolverOptions::default())?;
        (i.lower, i.upper)
    };
    let sym = {
        let constraints = compile_all(&[Restriction::new(RestrictionKind::Symmetry)])?;
        let spec = build_program_with(&reduced, &constraints, &cx.gamma, &observed, &[keep_ref])?;
        let i = spec.bounds_values(&observed, &SolverOptions::default())?;
        (i.lower, i.upper)
    };
    Ok((full, sym))
}

/// The policy-targeting counterexample, exactly: the identified set is {0}
/// under dominance or submodularity and [0, 1] otherwise.
pub fn check_counterexample() -> TheoremCheckResult {
    let tolerance = 1e-12;
    let bounds = match counterexample_gamma_bounds() {
        Ok(b) => b,
        Err(e) => return TheoremCheckResult::failed("policy_counterexample", tolerance, e.to_string()),
    };
    let cases = [
        ("unrestricted", bounds.full, (0.0, 1.0)),
        ("supermodular", bounds.supermodular, (0.0, 1.0)),
        ("dominant", bounds.dominant, (0.0, 0.0)),
        ("submodular", bounds.submodular, (0.0, 0.0)),
    ];
    let details = cases
        .iter()
        .enumerate()
        .map(|(i, (name, got, want))| TrialRecord {
            trial: i as u32,
            discrepancy: (got.0 - want.0).abs().max((got.1 - want.1).abs()),
            note: format!("{name}: [{}, {}] expected [{}, {}]", got.0, got.1, want.0, want.1),
        })
        .collect();
    TheoremCheckResult::from_trials("policy_counterexample", tolerance, details)
}

/// Dominance plus symmetry is falsified by asymmetric take-up mass; dropping
/// either restriction restores feasibility.
pub fn check_emptiness() -> TheoremCheckResult {
    let tolerance = 0.0;
    let e = crate::simulate::full_compliance_selection();
    let comply = IndividualType::from_parts(0b1000, crate::simulate::comply_brf());
    let asym_dgp = crate::simulate::TypeDgp::new(
        vec![PairType::new(comply, comply, e)],
        vec![1.0],
        [0.25; 4],
    )
    .expect("compliance pair is admissible");
    let asym_obs = asym_dgp.population_cells();

    let never = IndividualType::from_parts(0b0001, crate::simulate::constant_brf(false));
    let sym_dgp = crate::simulate::TypeDgp::new(
        vec![PairType::new(never, never, EquilibriumSelection::from_code(0))],
        vec![1.0],
        [0.25; 4],
    )
    .expect("never-taker pair is admissible");
    let sym_obs = sym_dgp.population_cells();

    let config = TypeSpaceConfig::full();
    let both = [
        Restriction::new(RestrictionKind::Dominance),
        Restriction::new(RestrictionKind::Symmetry),
    ];
    let run = |observed: &ObservedDistribution,
               restrictions: &[Restriction],
               est: Estimand|
     -> Result<IntervalStatus, EngineError> {
        let constraints = compile_all(restrictions)?;
        let spec = build_program_with(&config, &constraints, &est, observed, &[])?;
        Ok(spec
            .bounds_values(observed, &SolverOptions::default())?
            .status)
    };
    let gamma = Estimand::PolicyTarget {
        member: Member::One,
        arm: PolicyArm {
            forced: true,
            offer_own: false,
            offer_partner: false,
        },
        contrast: None,
    };
    let theta = Estimand::FixedAllocation {
        member: Member::One,
        alloc1: Allocation::new(true, false),
        alloc2: Some(Allocation::new(false, false)),
    };
    let mut details = Vec::new();
    let mut expect = |i: u32, note: &str, got: Result<IntervalStatus, EngineError>, want: IntervalStatus| {
        let disc = match &got {
            Ok(s) if *s == want => 0.0,
            _ => f64::INFINITY,
        };
        details.push(TrialRecord {
            trial: i,
            discrepancy: disc,
            note: format!("{note}: got {got:?}, want {want:?}"),
        });
    };
    expect(
        0,
        "asymmetric cells, dominance + symmetry, fixed allocation",
        run(&asym_obs, &both, theta),
        IntervalStatus::Empty,
    );
    expect(
        1,
        "asymmetric cells, dominance + symmetry, policy targeting",
        run(&asym_obs, &both, gamma),
        IntervalStatus::Empty,
    );
    expect(
        2,
        "asymmetric cells, dominance only",
        run(&asym_obs, &both[..1], theta),
        IntervalStatus::Interval,
    );
    expect(
        3,
        "asymmetric cells, symmetry only",
        run(&asym_obs, &both[1..], theta),
        IntervalStatus::Interval,
    );
    expect(
        4,
        "symmetric cells, dominance + symmetry",
        run(&sym_obs, &both, theta),
        IntervalStatus::Interval,
    );
    TheoremCheckResult::from_trials("emptiness_falsification", tolerance, details)
}

/// LP solver against exhaustive vertex enumeration on random small programs.
pub fn check_lp_oracle(trials: u32, seed: u64) -> TheoremCheckResult {
    let tolerance = 1e-9;
    let mut details = Vec::new();
    for trial in 0..trials {
        let mut rng = replicate_rng(seed ^ 0x17, trial as u64);
        let m = 4usize;
        let n = rng.gen_range(5..=8);
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        for _ in 0..n {
            let col: Vec<(usize, f64)> = (0..m)
                .map(|r| (r, rng.gen_range(-2.0..2.0)))
                .filter(|(_, v): &(usize, f64)| v.abs() > 0.05)
                .collect();
            cols.push(col);
        }
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut b = vec![0.0; m + 1];
        for (j, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                b[r] += v * x0[j];
            }
        }
        b[m] = x0.iter().sum();
        for col in cols.iter_mut() {
            col.push((m, 1.0));
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lp = lpsolve::StandardLp {
            n_rows: m + 1,
            cols,
            b,
            c,
        };
        let out = lpsolve::solve(&lp, &SolverOptions::default());
        let disc = match out.status {
            SolveStatus::Optimal => {
                let got = out.solution.as_ref().unwrap().value;
                let oracle = vertex_enumeration_min(&lp).expect("feasible by construction");
                let cert_ok = out.diagnostics.min_reduced_cost >= -1e-9;
                if cert_ok {
                    (got - oracle).abs()
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        };
        details.push(TrialRecord {
            trial,
            discrepancy: disc,
            note: format!("{n} columns"),
        });
    }
    TheoremCheckResult::from_trials("lp_vertex_oracle", tolerance, details)
}

/// Independent oracle: enumerate all basis subsets, keep feasible vertices,
/// take the best value.
pub fn vertex_enumeration_min(lp: &lpsolve::StandardLp) -> Option<f64> {
    let m = lp.n_rows;
    let n = lp.cols.len();
    if n < m {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut subset = vec![0usize; m];
    fn visit(
        lp: &lpsolve::StandardLp,
        subset: &mut Vec<usize>,
        start: usize,
        depth: usize,
        best: &mut Option<f64>,
    ) {
        let m = lp.n_rows;
        if depth == m {
            let mut bmat = vec![0.0; m * m];
            for (i, &j) in subset.iter().enumerate() {
                for &(r, v) in &lp.cols[j] {
                    bmat[r * m + i] = v;
                }
            }
            if let Some(lu) = lpsolve::DenseLu::factor(&bmat, m) {
                if let Some(x) = lu.solve(&lp.b) {
                    if x.iter().all(|&v| v >= -1e-9) {
                        let val: f64 = subset.iter().zip(&x).map(|(&j, &v)| lp.c[j] * v).sum();
                        *best = Some(best.map_or(val, |b: f64| b.min(val)));
                    }
                }
            }
            return;
        }
        for j in start..lp.cols.len() {
            subset[depth] = j;
            visit(lp, subset, j + 1, depth + 1, best);
        }
    }
    visit(lp, &mut subset, 0, 0, &mut best);
    best
}

/// Standard profile of every check, as run by the verification command.
pub fn run_all(seed: u64, full_scale: bool) -> Vec<TheoremCheckResult> {
    let mut results = vec![
        check_counterexample(),
        check_deterministic_closure(20, seed),
        check_dominance_equivalence(50, seed, CheckScale::Reduced),
        check_symmetry_equivalence(50, seed, CheckScale::Reduced),
        check_sandwich(20, seed, CheckScale::Reduced),
        check_emptiness(),
        check_lp_oracle(200, seed),
    ];
    if full_scale {
        results.push(check_dominance_equivalence(5, seed, CheckScale::Full));
        results.push(check_symmetry_equivalence(5, seed, CheckScale::Full));
    }
    results
}
