//! Synthetic data generators with exact population cells and true estimands.
//!
//! Two flavors: an explicit distribution over pair types, and a
//! threshold-crossing structural design where each member's full contingent
//! plan is a step function of one latent standard normal (latents correlated
//! across the pair). The structural design compiles exactly to a type
//! distribution by enumerating the latent segments and integrating the
//! bivariate normal over segment rectangles, so population cells and true
//! estimand values need no Monte Carlo.

use crate::data::{HouseholdRecord, ObservedDistribution};
use crate::program::{column_of, objective, Estimand};
use crate::typespace::{
    nash_set, EquilibriumSelection, IndividualType, InstrumentProfile, NashSet, PairType,
    ProfileSet, TakeUp,
};
use crate::EngineError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Independent generator for one replicate or household index. Streams keep
/// draws independent across indices while the master seed pins the study.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Explicit distribution over admissible pair types.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeDgp {
    pub support: Vec<PairType>,
    pub masses: Vec<f64>,
    /// Offer-assignment probabilities over the four instrument profiles.
    pub offer_probs: [f64; 4],
}

impl TypeDgp {
    pub fn new(
        support: Vec<PairType>,
        masses: Vec<f64>,
        offer_probs: [f64; 4],
    ) -> Result<Self, EngineError> {
        let dgp = TypeDgp {
            support,
            masses,
            offer_probs,
        };
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn active_blocks(&self) -> ProfileSet {
        ProfileSet::from_profiles(
            &InstrumentProfile::ALL
                .into_iter()
                .filter(|p| self.offer_probs[p.index()] > 0.0)
                .collect::<Vec<_>>(),
        )
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.support.len() != self.masses.len() || self.support.is_empty() {
            return Err(EngineError::InvalidConfig(
                "support and masses must be nonempty and equal length".into(),
            ));
        }
        if self.masses.iter().any(|&m| m < 0.0) {
            return Err(EngineError::InvalidConfig(
                "masses must be nonnegative".into(),
            ));
        }
        let total: f64 = self.masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EngineError::InvalidConfig(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        let offer_total: f64 = self.offer_probs.iter().sum();
        if self.offer_probs.iter().any(|&p| p < 0.0) || (offer_total - 1.0).abs() > 1e-9 {
            return Err(EngineError::InvalidConfig(
                "offer probabilities must be nonnegative and sum to 1".into(),
            ));
        }
        let active = self.active_blocks();
        if active.is_empty() {
            return Err(EngineError::InvalidConfig(
                "at least one offer profile needs positive probability".into(),
            ));
        }
        for pair in &self.support {
            if !pair.is_consistent(active) {
                return Err(EngineError::InvalidConfig(format!(
                    "support pair {pair:?} is not Nash-consistent on the active profiles"
                )));
            }
        }
        Ok(())
    }

    /// Exact population cells: the type-to-cell map pushed through the masses.
    pub fn population_cells(&self) -> ObservedDistribution {
        let active = self.active_blocks();
        let mut cells = vec![0.0; 64];
        for (pair, &mass) in self.support.iter().zip(&self.masses) {
            let sig = column_of(pair, active);
            for p in active.iter() {
                cells[16 * p.index() + sig[p.index()] as usize] += mass;
            }
        }
        // Exact renormalization guards the block-sum invariant.
        for p in active.iter() {
            let b = p.index();
            let sum: f64 = cells[16 * b..16 * (b + 1)].iter().sum();
            for c in &mut cells[16 * b..16 * (b + 1)] {
                *c /= sum;
            }
        }
        ObservedDistribution::from_cells(cells, [0; 4], active)
            .expect("population cells are normalized by construction")
    }

    /// Population value of the estimand under this distribution.
    pub fn true_estimand(&self, estimand: &Estimand) -> f64 {
        self.support
            .iter()
            .zip(&self.masses)
            .map(|(pair, &mass)| mass * objective(pair, estimand) as f64)
            .sum()
    }

    /// i.i.d. households: draw a pair type and an offer profile, take-up from
    /// the selected equilibrium, outcomes from the potential-outcome bits.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<HouseholdRecord> {
        let cum_mass = cumulative(&self.masses);
        let cum_offer = cumulative(&self.offer_probs);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(seed, i as u64);
                let pair = self.support[draw_index(&cum_mass, rng.gen::<f64>())];
                let profile =
                    InstrumentProfile::from_index(draw_index(&cum_offer, rng.gen::<f64>()));
                let t = pair.e.chosen(profile);
                HouseholdRecord {
                    household_id: format!("h{i:06}"),
                    y1: pair.s.potential_outcome(t.d, t.d_other),
                    d1: t.d,
                    z1: profile.z,
                    y2: pair.s_other.potential_outcome(t.d_other, t.d),
                    d2: t.d_other,
                    z2: profile.z_other,
                }
            })
            .collect()
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(weights.len());
    for w in weights {
        acc += w;
        out.push(acc);
    }
    out
}

fn draw_index(cum: &[f64], u: f64) -> usize {
    let target = u * cum.last().copied().unwrap_or(1.0);
    let i = cum.partition_point(|&v| v <= target);
    i.min(cum.len() - 1)
}

/// Outcome equation for one member: `Y(d, d') = 1{own*d + spillover*d' +
/// baseline + noise[2d+d'] * eps > 0}` with a shared latent `eps`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OutcomeCoeffs {
    pub own: f64,
    pub spillover: f64,
    pub baseline: f64,
    /// Scale per treatment pair, indexed `2d + d'`.
    pub noise: [f64; 4],
}

/// Take-up equation: `D(z, z', d') = 1{baseline + own_offer*z +
/// partner_offer*z' + strategic*d' > noise * eps}` with the same latent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TakeupCoeffs {
    pub baseline: f64,
    pub own_offer: f64,
    pub partner_offer: f64,
    pub strategic: f64,
    pub noise: f64,
}

/// How multi-equilibrium games resolve for structurally induced pairs.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Smallest `(d, d')` in the canonical cell order.
    #[default]
    LexSmallest,
    LexLargest,
    /// Random convex split over all deterministic selections, drawn once from
    /// the given seed at compile time.
    SeededRandom(u64),
}

/// Threshold-crossing structural design with one latent normal per member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructuralDgp {
    pub outcome1: OutcomeCoeffs,
    pub outcome2: OutcomeCoeffs,
    pub takeup1: TakeupCoeffs,
    pub takeup2: TakeupCoeffs,
    /// Latent correlation across the pair.
    pub rho: f64,
    pub offer_probs: [f64; 4],
    #[serde(default)]
    pub selection: SelectionRule,
}

impl StructuralDgp {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.rho.abs() >= 0.995 {
            return Err(EngineError::InvalidConfig(
                "latent correlation must satisfy |rho| < 0.995".into(),
            ));
        }
        for c in [&self.outcome1, &self.outcome2] {
            if c.noise.iter().any(|&s| s <= 0.0) {
                return Err(EngineError::InvalidConfig(
                    "outcome noise scales must be positive".into(),
                ));
            }
        }
        if self.takeup1.noise <= 0.0 || self.takeup2.noise <= 0.0 {
            return Err(EngineError::InvalidConfig(
                "take-up noise scales must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Latent segments `(lo, hi, type code)` for one member: the contingent
    /// plan is piecewise constant in the latent with at most 12 breakpoints.
    fn member_segments(outcome: &OutcomeCoeffs, takeup: &TakeupCoeffs) -> Vec<(f64, f64, u16)> {
        let mut breaks: Vec<f64> = Vec::with_capacity(12);
        let mut outcome_threshold = [0.0f64; 4];
        for d in [false, true] {
            for d_other in [false, true] {
                let idx = 2 * d as usize + d_other as usize;
                let mean = outcome.own * d as u8 as f64
                    + outcome.spillover * d_other as u8 as f64
                    + outcome.baseline;
                // Y = 1 iff eps > -mean / noise.
                outcome_threshold[idx] = -mean / outcome.noise[idx];
                breaks.push(outcome_threshold[idx]);
            }
        }
        let mut takeup_threshold = [0.0f64; 8];
        for p in InstrumentProfile::ALL {
            for d_other in [false, true] {
                let idx = 2 * p.index() + d_other as usize;
                let lhs = takeup.baseline
                    + takeup.own_offer * p.z as u8 as f64
                    + takeup.partner_offer * p.z_other as u8 as f64
                    + takeup.strategic * d_other as u8 as f64;
                // D = 1 iff eps < lhs / noise.
                takeup_threshold[idx] = lhs / takeup.noise;
                breaks.push(takeup_threshold[idx]);
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut segments = Vec::with_capacity(breaks.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        for i in 0..=breaks.len() {
            let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY);
            let rep = representative(lo, hi);
            let mut code = 0u16;
            for idx in 0..4 {
                if rep > outcome_threshold[idx] {
                    code |= 1 << idx;
                }
            }
            for idx in 0..8 {
                if rep < takeup_threshold[idx] {
                    code |= 1 << (4 + idx);
                }
            }
            segments.push((lo, hi, code));
            lo = hi;
        }
        segments
    }

    /// Compile to an exact type distribution over latent segment rectangles.
    pub fn compile(&self) -> Result<TypeDgp, EngineError> {
        self.validate()?;
        let segs1 = Self::member_segments(&self.outcome1, &self.takeup1);
        let segs2 = Self::member_segments(&self.outcome2, &self.takeup2);
        let active = ProfileSet::from_profiles(
            &InstrumentProfile::ALL
                .into_iter()
                .filter(|p| self.offer_probs[p.index()] > 0.0)
                .collect::<Vec<_>>(),
        );
        let mut support = Vec::new();
        let mut masses = Vec::new();
        let mut selection_rng = match self.selection {
            SelectionRule::SeededRandom(seed) => Some(replicate_rng(seed, 0)),
            _ => None,
        };
        for &(lo1, hi1, code1) in &segs1 {
            for &(lo2, hi2, code2) in &segs2 {
                let mass = rectangle_probability(lo1, hi1, lo2, hi2, self.rho);
                if mass < 1e-14 {
                    continue;
                }
                let s = IndividualType::new(code1);
                let s_other = IndividualType::new(code2);
                let mut sets: Vec<(InstrumentProfile, NashSet)> = Vec::with_capacity(active.len());
                for p in active.iter() {
                    let ns = nash_set(s, s_other, p);
                    if ns.is_empty() {
                        return Err(EngineError::InvalidConfig(format!(
                            "structural parameters induce a pair with no pure-strategy \
                             equilibrium at {p:?} (types {code1:#05x}, {code2:#05x})"
                        )));
                    }
                    sets.push((p, ns));
                }
                match (&self.selection, &mut selection_rng) {
                    (SelectionRule::SeededRandom(_), Some(rng)) => {
                        let selections = crate::typespace::selection_product(&sets);
                        let mut weights: Vec<f64> = (0..selections.len())
                            .map(|_| rng.gen_range(0.01..1.0))
                            .collect();
                        let total: f64 = weights.iter().sum();
                        for w in &mut weights {
                            *w /= total;
                        }
                        for (e, w) in selections.into_iter().zip(weights) {
                            support.push(PairType::new(s, s_other, e));
                            masses.push(mass * w);
                        }
                    }
                    _ => {
                        let mut choices = [TakeUp::new(false, false); 4];
                        for (p, ns) in &sets {
                            let pick = match self.selection {
                                SelectionRule::LexSmallest => ns.iter().next(),
                                SelectionRule::LexLargest => ns.iter().last(),
                                SelectionRule::SeededRandom(_) => unreachable!(),
                            };
                            choices[p.index()] = pick.expect("nonempty by the check above");
                        }
                        support.push(PairType::new(
                            s,
                            s_other,
                            EquilibriumSelection::from_choices(choices),
                        ));
                        masses.push(mass);
                    }
                }
            }
        }
        let total: f64 = masses.iter().sum();
        for m in &mut masses {
            *m /= total;
        }
        TypeDgp::new(support, masses, self.offer_probs)
    }
}

fn representative(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Either flavor of generator, addressable by preset name or config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Dgp {
    Type(TypeDgp),
    Structural(StructuralDgp),
}

impl Dgp {
    pub fn to_type_dgp(&self) -> Result<TypeDgp, EngineError> {
        match self {
            Dgp::Type(t) => {
                t.validate()?;
                Ok(t.clone())
            }
            Dgp::Structural(s) => s.compile(),
        }
    }
}

/// Compliance-with-own-offer response byte: `D(z, z', d') = z`.
pub fn comply_brf() -> u16 {
    0b1111_0000
}

/// Dominant response byte ignoring everything: always or never take up.
pub fn constant_brf(take: bool) -> u16 {
    if take {
        0xFF
    } else {
        0
    }
}

pub fn full_compliance_selection() -> EquilibriumSelection {
    EquilibriumSelection::from_choices([
        TakeUp::new(false, false),
        TakeUp::new(false, true),
        TakeUp::new(true, false),
        TakeUp::new(true, true),
    ])
}

/// Named generators used by the verification suite, the CLI, and tests.
pub fn preset(name: &str) -> Option<Dgp> {
    match name {
        // Every member complies with their own offer; outcomes heterogeneous.
        // Point-identifies fixed-allocation estimands with all blocks active.
        "full_compliance" => {
            let e = full_compliance_selection();
            let pos = [0b0000u16, 0b1000, 0b1100, 0b1110, 0b1111];
            let masses = [0.25, 0.2, 0.25, 0.15, 0.15];
            let mut support = Vec::new();
            for (po1, po2) in pos.iter().zip(pos.iter().rev()) {
                support.push(PairType::new(
                    IndividualType::from_parts(*po1, comply_brf()),
                    IndividualType::from_parts(*po2, comply_brf()),
                    e,
                ));
            }
            Some(Dgp::Type(
                TypeDgp::new(support, masses.to_vec(), [0.25; 4]).unwrap(),
            ))
        }
        // Benchmark for inference studies: a compliance mixture with
        // heterogeneous outcomes and partially identified fixed-allocation
        // effects, all four blocks active.
        "benchmark" => {
            let always = constant_brf(true);
            let never = constant_brf(false);
            let mut support = Vec::new();
            let mut masses = Vec::new();
            // (member1 brf, po1, member2 brf, po2, mass)
            let rows: [(u16, u16, u16, u16, f64); 7] = [
                (comply_brf(), 0b1100, comply_brf(), 0b1010, 0.28),
                (comply_brf(), 0b0000, always, 0b1111, 0.12),
                (always, 0b1000, comply_brf(), 0b0010, 0.14),
                (never, 0b0010, comply_brf(), 0b1100, 0.16),
                (comply_brf(), 0b1110, never, 0b0000, 0.12),
                (always, 0b1111, never, 0b1000, 0.08),
                (never, 0b0000, always, 0b0110, 0.10),
            ];
            for (brf1, po1, brf2, po2, mass) in rows {
                let s = IndividualType::from_parts(po1, brf1);
                let s_other = IndividualType::from_parts(po2, brf2);
                let mut choices = [TakeUp::new(false, false); 4];
                for p in InstrumentProfile::ALL {
                    choices[p.index()] = nash_set(s, s_other, p)
                        .iter()
                        .next()
                        .expect("dominant pairs always have an equilibrium");
                }
                support.push(PairType::new(
                    s,
                    s_other,
                    EquilibriumSelection::from_choices(choices),
                ));
                masses.push(mass);
            }
            Some(Dgp::Type(TypeDgp::new(support, masses, [0.25; 4]).unwrap()))
        }
        // Offer-dependent take-up for member 2 with a slight reversal between
        // the partner-offered and both-offered blocks, so four-way take-up
        // monotonicity fails for about one percent of types.
        "vb_violation" => Some(Dgp::Structural(StructuralDgp {
            outcome1: OutcomeCoeffs {
                own: 0.8,
                spillover: 0.3,
                baseline: -0.5,
                noise: [1.0; 4],
            },
            outcome2: OutcomeCoeffs {
                own: 0.6,
                spillover: 0.2,
                baseline: -0.3,
                noise: [1.0; 4],
            },
            takeup1: TakeupCoeffs {
                baseline: -3.0,
                own_offer: 3.5,
                partner_offer: 0.0,
                strategic: 0.0,
                noise: 1.0,
            },
            takeup2: TakeupCoeffs {
                baseline: -3.0,
                own_offer: 3.39,
                partner_offer: -0.03,
                strategic: 0.0,
                noise: 1.0,
            },
            rho: 0.3,
            offer_probs: [0.25; 4],
            selection: SelectionRule::LexSmallest,
        })),
        // The two-type policy-targeting space: observationally identical
        // pairs whose partner responses differ only off-path.
        "counterexample" => {
            let po = 0b1000u16;
            let s = IndividualType::from_parts(po, comply_brf());
            let s_super = IndividualType::from_parts(po, comply_brf() | 0b0000_0010);
            let e = full_compliance_selection();
            Some(Dgp::Type(
                TypeDgp::new(
                    vec![PairType::new(s, s_super, e), PairType::new(s, s, e)],
                    vec![0.5, 0.5],
                    [0.25; 4],
                )
                .unwrap(),
            ))
        }
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "full_compliance",
        "benchmark",
        "vb_violation",
        "counterexample",
    ]
}

// --- Normal distribution helpers -------------------------------------------

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, accurate to near machine precision: the
/// all-positive confluent series below 3, a Laplace continued fraction above.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * x2 / (2.0 * n as f64 + 1.0);
        let prev = sum;
        sum += term;
        if sum == prev || n > 300 {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum * (-x2).exp()
}

fn erfc_cf(x: f64) -> f64 {
    let u = 1.0 / (2.0 * x * x);
    let mut frac = 1.0;
    for i in (1..=120).rev() {
        frac = 1.0 + i as f64 * u / frac;
    }
    (-x * x).exp() / (x * std::f64::consts::PI.sqrt() * frac)
}

/// Bivariate standard normal CDF `P(X <= h, Y <= k)` with correlation `rho`:
/// Gauss-Legendre quadrature on the arcsine-substituted correlation integral.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal_cdf(k);
    }
    if k == f64::INFINITY {
        return normal_cdf(h);
    }
    debug_assert!(rho.abs() < 1.0);
    let base = normal_cdf(h) * normal_cdf(k);
    if rho == 0.0 {
        return base;
    }
    let upper = rho.asin();
    let (nodes, weights) = gauss_legendre_64();
    let mut acc = 0.0;
    for (t, w) in nodes.iter().zip(weights.iter()) {
        let theta = 0.5 * upper * (t + 1.0);
        let sin_t = theta.sin();
        let cos2 = 1.0 - sin_t * sin_t;
        let expo = -(h * h + k * k - 2.0 * h * k * sin_t) / (2.0 * cos2);
        acc += w * expo.exp();
    }
    acc *= 0.5 * upper / (2.0 * std::f64::consts::PI);
    (base + acc).clamp(0.0, 1.0)
}

/// `P(lo1 < X < hi1, lo2 < Y < hi2)` for correlated standard normals.
pub fn rectangle_probability(lo1: f64, hi1: f64, lo2: f64, hi2: f64, rho: f64) -> f64 {
    let phi2 = |a: f64, b: f64| bivariate_normal_cdf(a, b, rho);
    (phi2(hi1, hi2) - phi2(lo1, hi2) - phi2(hi1, lo2) + phi2(lo1, lo2)).max(0.0)
}

/// Nodes and weights for 64-point Gauss-Legendre on [-1, 1], found once by
/// Newton iteration on the Legendre recurrence.
fn gauss_legendre_64() -> (&'static [f64; 64], &'static [f64; 64]) {
    use std::sync::OnceLock;
    static TABLE: OnceLock<([f64; 64], [f64; 64])> = OnceLock::new();
    let (n, w) = TABLE.get_or_init(|| {
        let n = 64usize;
        let mut nodes = [0.0f64; 64];
        let mut weights = [0.0f64; 64];
        let legendre = |x: f64| -> (f64, f64) {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            (p1, dp)
        };
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre(x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    });
    (n, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::cell_within;
    use crate::lpsolve::SolverOptions;
    use crate::program::{build_program, Member, PolicyArm};
    use crate::typespace::TypeSpaceConfig;

    #[test]
    fn normal_cdf_reference_values() {
        let cases = [
            (0.0, 0.5),
            (1.0, 0.8413447460685429),
            (-1.0, 0.15865525393145705),
            (2.0, 0.9772498680518208),
            (3.0, 0.9986501019683699),
            (-3.0, 0.0013498980316300933),
            (5.0, 0.9999997133484281),
        ];
        for (x, want) in cases {
            assert!(
                (normal_cdf(x) - want).abs() < 1e-13,
                "Phi({x}) = {} want {want}",
                normal_cdf(x)
            );
        }
    }

    #[test]
    fn bivariate_cdf_closed_forms() {
        // Phi2(0, 0, rho) = 1/4 + asin(rho) / (2 pi), exactly.
        for rho in [-0.9f64, -0.5, -0.1, 0.2, 0.6, 0.95] {
            let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            let got = bivariate_normal_cdf(0.0, 0.0, rho);
            assert!((got - want).abs() < 1e-12, "rho {rho}: {got} vs {want}");
        }
        // Independence factors, and the marginal limit.
        let got = bivariate_normal_cdf(0.7, -0.4, 0.0);
        assert!((got - normal_cdf(0.7) * normal_cdf(-0.4)).abs() < 1e-13);
        for rho in [-0.7, 0.3] {
            let marginal = bivariate_normal_cdf(1.3, f64::INFINITY, rho);
            assert!((marginal - normal_cdf(1.3)).abs() < 1e-13);
        }
        // Symmetry in the arguments.
        let a = bivariate_normal_cdf(0.3, -1.1, 0.45);
        let b = bivariate_normal_cdf(-1.1, 0.3, 0.45);
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn single_type_dgp_concentrates_cells() {
        let Dgp::Type(dgp) = preset("counterexample").unwrap() else {
            panic!()
        };
        let single = TypeDgp::new(vec![dgp.support[0]], vec![1.0], [0.25; 4]).unwrap();
        let cells = single.population_cells();
        for p in InstrumentProfile::ALL {
            let block = cells.block(p);
            assert_eq!(block.iter().filter(|&&c| c > 0.0).count(), 1);
            assert_eq!(block.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn two_type_cells_are_convex_combination() {
        let Dgp::Type(dgp) = preset("counterexample").unwrap() else {
            panic!()
        };
        let a = TypeDgp::new(vec![dgp.support[0]], vec![1.0], [0.25; 4]).unwrap();
        let b = TypeDgp::new(vec![dgp.support[1]], vec![1.0], [0.25; 4]).unwrap();
        let mix = dgp.population_cells();
        let ca = a.population_cells();
        let cb = b.population_cells();
        for i in 0..64 {
            let want = 0.5 * ca.cells()[i] + 0.5 * cb.cells()[i];
            assert!((mix.cells()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_matches_population_at_scale() {
        let Dgp::Type(dgp) = preset("benchmark").unwrap() else {
            panic!()
        };
        let records = dgp.sample(100_000, 7);
        let empirical = ObservedDistribution::from_records(&records).unwrap();
        let population = dgp.population_cells();
        let mut max_dev = 0.0f64;
        for p in InstrumentProfile::ALL {
            for w in 0..16 {
                max_dev = max_dev.max((empirical.cell(p, w) - population.cell(p, w)).abs());
            }
        }
        assert!(max_dev < 0.01, "max deviation {max_dev}");
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let Dgp::Type(dgp) = preset("full_compliance").unwrap() else {
            panic!()
        };
        assert_eq!(dgp.sample(500, 11), dgp.sample(500, 11));
        assert_ne!(dgp.sample(500, 11), dgp.sample(500, 12));
    }

    #[test]
    fn structural_zero_interaction_types_satisfy_ior_and_monotonicity() {
        let Dgp::Structural(mut s) = preset("vb_violation").unwrap() else {
            panic!()
        };
        s.takeup1.partner_offer = 0.0;
        s.takeup2.partner_offer = 0.0;
        s.outcome1.spillover = 0.0;
        s.outcome2.spillover = 0.0;
        let dgp = s.compile().unwrap();
        let active = dgp.active_blocks();
        for pair in &dgp.support {
            for (member, own_active) in [(pair.s, active), (pair.s_other, active.mirrored())] {
                // Response depends on the own offer only.
                for z in [false, true] {
                    let mut vals = Vec::new();
                    for z_other in [false, true] {
                        let p = InstrumentProfile::new(z, z_other);
                        if own_active.contains(p) {
                            vals.push(member.best_response(p, false));
                            vals.push(member.best_response(p, true));
                        }
                    }
                    assert!(vals.windows(2).all(|w| w[0] == w[1]));
                }
                // Positive offer coefficient: own-offer monotone.
                for z_other in [false, true] {
                    let lo = InstrumentProfile::new(false, z_other);
                    let hi = InstrumentProfile::new(true, z_other);
                    for d_other in [false, true] {
                        assert!(
                            member.best_response(lo, d_other) <= member.best_response(hi, d_other)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn structural_cells_match_monte_carlo() {
        let Dgp::Structural(s) = preset("vb_violation").unwrap() else {
            panic!()
        };
        let dgp = s.compile().unwrap();
        let analytic = dgp.population_cells();
        let records = dgp.sample(1_000_000, 3);
        let empirical = ObservedDistribution::from_records(&records).unwrap();
        for p in InstrumentProfile::ALL {
            for w in 0..16 {
                let pop = analytic.cell(p, w);
                let emp = empirical.cell(p, w);
                let se = (pop * (1.0 - pop) / 250_000.0).sqrt().max(1e-4);
                assert!(
                    (pop - emp).abs() < 4.0 * se,
                    "cell ({p:?}, {w}): pop {pop} emp {emp}"
                );
            }
        }
    }

    #[test]
    fn vb_violation_preset_reproduces_reversal() {
        let Dgp::Structural(s) = preset("vb_violation").unwrap() else {
            panic!()
        };
        let dgp = s.compile().unwrap();
        let cells = dgp.population_cells();
        let takeup2 = |p: InstrumentProfile| -> f64 {
            let mut acc = 0.0;
            for y1 in [false, true] {
                for y2 in [false, true] {
                    for d1 in [false, true] {
                        acc += cells.cell(p, cell_within(y1, y2, d1, true));
                    }
                }
            }
            acc
        };
        let partner_only = takeup2(InstrumentProfile::new(false, true));
        let both = takeup2(InstrumentProfile::new(true, true));
        assert!(
            (partner_only - 0.6517).abs() < 0.01,
            "partner-only take-up {partner_only}"
        );
        assert!((both - 0.6406).abs() < 0.01, "joint take-up {both}");
        assert!(partner_only > both, "reversal must hold");
        // The violating mass stays under two percent.
        let bound = crate::restrictions::MassBound {
            kind: crate::restrictions::RestrictionKind::EpsVbMonotone,
            scope: crate::restrictions::Scope::Both,
            eps: 1.0,
        };
        let violating: f64 = dgp
            .support
            .iter()
            .zip(&dgp.masses)
            .filter(|(pair, _)| bound.weight(pair, ProfileSet::FULL) > 0)
            .map(|(_, m)| m)
            .sum();
        assert!(
            violating > 0.005 && violating < 0.02,
            "violating mass {violating}"
        );
    }

    #[test]
    fn true_estimand_examples() {
        let Dgp::Type(dgp) = preset("counterexample").unwrap() else {
            panic!()
        };
        let single = TypeDgp::new(vec![dgp.support[0]], vec![1.0], [0.25; 4]).unwrap();
        let gamma = Estimand::PolicyTarget {
            member: Member::One,
            arm: PolicyArm {
                forced: true,
                offer_own: false,
                offer_partner: false,
            },
            contrast: None,
        };
        assert_eq!(single.true_estimand(&gamma), 1.0);
        // Swapping the allocations negates the contrast.
        let Dgp::Type(bench) = preset("benchmark").unwrap() else {
            panic!()
        };
        let fwd = Estimand::ade(Member::One);
        let back = Estimand::FixedAllocation {
            member: Member::One,
            alloc1: crate::program::Allocation::new(false, false),
            alloc2: Some(crate::program::Allocation::new(true, false)),
        };
        assert!((bench.true_estimand(&fwd) + bench.true_estimand(&back)).abs() < 1e-12);
    }

    #[test]
    fn true_estimand_lies_inside_population_bounds() {
        let Dgp::Type(dgp) = preset("benchmark").unwrap() else {
            panic!()
        };
        let obs = dgp.population_cells();
        for est in [Estimand::ade(Member::One), Estimand::ase(Member::Two)] {
            let spec = build_program(&TypeSpaceConfig::full(), &[], &est, &obs).unwrap();
            let interval = spec.bounds(&obs, &SolverOptions::default()).unwrap();
            let truth = dgp.true_estimand(&est);
            assert!(
                truth >= interval.lower - 1e-9 && truth <= interval.upper + 1e-9,
                "{est:?}: {truth} outside [{}, {}]",
                interval.lower,
                interval.upper
            );
        }
    }
}
