//! Pointwise confidence intervals for the bound endpoints.
//!
//! Three routes:
//!
//! * `relaxed_box`: re-solve with the observed cells replaced by free cell
//!   variables confined to per-block boxes around the empirical frequencies,
//!   the box radius set from a critical value `kappa` (analytic or
//!   bootstrapped). Relaxing the data constraint to a high-probability region
//!   can only widen the program, so the resulting interval nests the point
//!   bounds.
//! * `basis_bootstrap`: household bootstrap of the LP value function. Each
//!   replicate re-solves and records its optimal basis; bases whose replicate
//!   values sit within `c_n` of the sample optimum form the candidate set,
//!   and the endpoint shift comes from quantiles of the max (over candidate
//!   bases) of the revalued basis differences.
//! * `numerical_delta`: difference quotients of the value function along
//!   bootstrap perturbations, with step size `e_n`; quantiles of the absolute
//!   directional derivatives scale the endpoint shift.
//!
//! Replicates resample whole households (clustered), each from its own
//! counter-seeded generator, so reports are byte-identical across runs with
//! the same seed.

use crate::data::{HouseholdRecord, ObservedDistribution, CELLS_PER_BLOCK};
use crate::lpsolve::{
    self, BasisFactor, SolveStatus, SolverOptions, SparseCol, StandardLp, WarmSolver,
};
use crate::program::{IdentifiedInterval, IntervalStatus, LinearProgramSpec, PrunedProgram, Sense};
use crate::simulate::replicate_rng;
use crate::typespace::InstrumentProfile;
use crate::EngineError;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    RelaxedBox,
    BasisBootstrap,
    NumericalDelta,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaRule {
    #[default]
    Analytic,
    Bootstrap,
}

/// Weight matrix for the bootstrap kappa quadratic form.
#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsilonRule {
    #[default]
    Identity,
    /// `(Sigma_hat + eps I)^-1`, keeping the form well defined under the
    /// rank-deficient multinomial covariance.
    Regularized { epsilon: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub method: InferenceMethod,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// Step size exponent: `e_n = n^-e_n_exponent`.
    pub e_n_exponent: f64,
    /// Basis-screening exponent: `c_n = n^-c_n_exponent`.
    pub c_n_exponent: f64,
    pub kappa_rule: KappaRule,
    pub upsilon: UpsilonRule,
    /// Linearly independent entries per block in the analytic kappa formula
    /// (15 at full cell support; configurable for reduced-support runs).
    pub independent_entries: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            method: InferenceMethod::RelaxedBox,
            alpha: 0.05,
            reps: 200,
            seed: 0,
            e_n_exponent: 1.0 / 3.0,
            c_n_exponent: 1.0 / 3.0,
            kappa_rule: KappaRule::Analytic,
            upsilon: UpsilonRule::Identity,
            independent_entries: 15,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let needs_reps = !matches!(
            (self.method, self.kappa_rule),
            (InferenceMethod::RelaxedBox, KappaRule::Analytic)
        );
        if needs_reps && self.reps < 100 {
            return Err(EngineError::InvalidConfig(
                "bootstrap methods need at least 100 replicates".into(),
            ));
        }
        if self.e_n_exponent <= 0.0 || self.e_n_exponent >= 0.5 {
            return Err(EngineError::InvalidConfig(
                "e_n exponent must lie in (0, 0.5) so sqrt(n) e_n diverges".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InferenceDiagnostics {
    pub infeasible_replicates: usize,
    /// Replicates whose perturbed cells left the simplex and were projected.
    pub projected_replicates: usize,
    pub degenerate_basis: bool,
    pub distinct_bases: usize,
    /// Critical values per active block (relaxed box only).
    pub kappa: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfidenceReport {
    pub method: InferenceMethod,
    pub alpha: f64,
    pub lower_ci: f64,
    pub upper_ci: f64,
    pub point_bounds: IdentifiedInterval,
    pub diagnostics: InferenceDiagnostics,
}

/// Dispatch on the configured method.
pub fn confidence_interval(
    spec: &LinearProgramSpec,
    records: &[HouseholdRecord],
    config: &InferenceConfig,
) -> Result<ConfidenceReport, EngineError> {
    config.validate()?;
    match config.method {
        InferenceMethod::RelaxedBox => relaxed_box_ci(spec, records, config),
        InferenceMethod::BasisBootstrap => basis_bootstrap_ci(spec, records, config),
        InferenceMethod::NumericalDelta => numerical_delta_ci(spec, records, config),
    }
}

fn observed_for(
    spec: &LinearProgramSpec,
    records: &[HouseholdRecord],
) -> Result<ObservedDistribution, EngineError> {
    let observed = ObservedDistribution::from_records(records)?;
    if observed.active_blocks() != spec.active {
        return Err(EngineError::InvalidConfig(
            "data blocks do not match the program's active profiles".into(),
        ));
    }
    Ok(observed)
}

/// Household-level resampling pool: one `(block, cell)` pair per household.
struct ResamplePool {
    entries: Vec<(u8, u8)>,
    active: crate::typespace::ProfileSet,
}

impl ResamplePool {
    fn new(records: &[HouseholdRecord], active: crate::typespace::ProfileSet) -> Self {
        ResamplePool {
            entries: records
                .iter()
                .map(|r| (r.profile().index() as u8, r.cell_within() as u8))
                .collect(),
            active,
        }
    }

    /// One bootstrap draw; `None` when a block comes back empty.
    fn draw<R: Rng>(&self, rng: &mut R) -> Option<ObservedDistribution> {
        let n = self.entries.len();
        let mut counts = [0u64; 64];
        let mut n_z = [0u64; 4];
        for _ in 0..n {
            let (block, cell) = self.entries[rng.gen_range(0..n)];
            counts[16 * block as usize + cell as usize] += 1;
            n_z[block as usize] += 1;
        }
        let mut cells = vec![0.0; 64];
        for p in self.active.iter() {
            let b = p.index();
            if n_z[b] == 0 {
                return None;
            }
            for w in 0..CELLS_PER_BLOCK {
                cells[16 * b + w] = counts[16 * b + w] as f64 / n_z[b] as f64;
            }
        }
        ObservedDistribution::from_cells(cells, n_z, self.active).ok()
    }
}

/// Lower empirical quantile: smallest value with at least `q` mass below it.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = ((q * sorted.len() as f64).ceil() as usize).saturating_sub(1);
    sorted[idx.min(sorted.len() - 1)]
}

// --- Relaxed box program ----------------------------------------------------

/// Critical values per active block.
fn kappa_values(
    observed: &ObservedDistribution,
    pool: &ResamplePool,
    config: &InferenceConfig,
) -> (Vec<f64>, Vec<f64>) {
    let blocks: Vec<InstrumentProfile> = observed.active_blocks().iter().collect();
    match config.kappa_rule {
        KappaRule::Analytic => {
            let m = config.independent_entries as f64;
            let kappas: Vec<f64> = blocks
                .iter()
                .map(|p| {
                    let sigma2 = observed
                        .block(*p)
                        .iter()
                        .map(|&v| v * (1.0 - v))
                        .fold(0.0f64, f64::max);
                    sigma2 * 2.0 * m * (2.0 * m / config.alpha).ln()
                })
                .collect();
            let radii = blocks
                .iter()
                .zip(&kappas)
                .map(|(p, k)| (k / observed.n_z(*p) as f64).sqrt())
                .collect();
            (kappas, radii)
        }
        KappaRule::Bootstrap => {
            // Quantiles of the scaled quadratic form centered at the sample
            // frequencies.
            let mut forms: Vec<Vec<f64>> = vec![Vec::with_capacity(config.reps); blocks.len()];
            let upsilon = config.upsilon;
            for rep in 0..config.reps {
                let mut rng = replicate_rng(config.seed, 1_000_000 + rep as u64);
                let Some(star) = pool.draw(&mut rng) else {
                    continue;
                };
                for (bi, p) in blocks.iter().enumerate() {
                    let d: Vec<f64> = star
                        .block(*p)
                        .iter()
                        .zip(observed.block(*p))
                        .map(|(a, b)| a - b)
                        .collect();
                    let q = quadratic_form(&d, observed.block(*p), upsilon);
                    forms[bi].push(observed.n_z(*p) as f64 * q);
                }
            }
            let kappas: Vec<f64> = forms
                .iter_mut()
                .map(|f| {
                    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    empirical_quantile(f, 1.0 - config.alpha)
                })
                .collect();
            let radii = blocks
                .iter()
                .zip(&kappas)
                .map(|(p, k)| {
                    let scale = match upsilon {
                        UpsilonRule::Identity => 1.0,
                        UpsilonRule::Regularized { epsilon } => {
                            // |d|^2 <= (lambda_max(Sigma) + eps) * d' Upsilon d.
                            sigma_lambda_max(observed.block(*p)) + epsilon
                        }
                    };
                    (k * scale / observed.n_z(*p) as f64).sqrt()
                })
                .collect();
            (kappas, radii)
        }
    }
}

/// `d' Upsilon d` for one block.
fn quadratic_form(d: &[f64], phat: &[f64], upsilon: UpsilonRule) -> f64 {
    match upsilon {
        UpsilonRule::Identity => d.iter().map(|v| v * v).sum(),
        UpsilonRule::Regularized { epsilon } => {
            // Sigma = diag(p) - p p'; solve (Sigma + eps I) x = d.
            let k = d.len();
            let mut m = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    let sigma = if i == j {
                        phat[i] * (1.0 - phat[i])
                    } else {
                        -phat[i] * phat[j]
                    };
                    m[i * k + j] = sigma + if i == j { epsilon } else { 0.0 };
                }
            }
            let lu = lpsolve::DenseLu::factor(&m, k).expect("regularized matrix is PD");
            let x = lu.solve(d).expect("regularized solve");
            d.iter().zip(&x).map(|(a, b)| a * b).sum()
        }
    }
}

/// Largest eigenvalue of the multinomial covariance, by power iteration.
fn sigma_lambda_max(phat: &[f64]) -> f64 {
    let k = phat.len();
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut lambda = 0.0;
    for _ in 0..200 {
        // Sigma v = diag(p) v - p (p' v).
        let pv: f64 = phat.iter().zip(&v).map(|(p, x)| p * x).sum();
        let mut w: Vec<f64> = phat
            .iter()
            .zip(&v)
            .map(|(p, x)| p * x - p * pv)
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-15 {
            return 0.0;
        }
        for x in &mut w {
            *x /= norm;
        }
        let new_lambda = norm;
        if (new_lambda - lambda).abs() < 1e-12 {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
        v = w;
    }
    lambda
}

/// The relaxed program: free cell variables per block, confined to boxes of
/// the given radii around the empirical frequencies.
pub fn relaxed_lp(
    spec: &LinearProgramSpec,
    observed: &ObservedDistribution,
    radii: &[f64],
    sense: Sense,
) -> StandardLp {
    let blocks: Vec<InstrumentProfile> = spec.active.iter().collect();
    let a = blocks.len();
    let n_eq = spec.n_equality_rows();
    let n_bounds = spec.bounds.len();
    let simplex_base = n_eq + n_bounds;
    let box_base = simplex_base + a;
    let n_rows = box_base + 16 * a;

    // Box geometry: p = floor + q with q in [0, width].
    let mut floor = vec![0.0; 16 * a];
    let mut width = vec![0.0; 16 * a];
    for (pos, p) in blocks.iter().enumerate() {
        for w in 0..CELLS_PER_BLOCK {
            let center = observed.cell(*p, w);
            let lo = (center - radii[pos]).max(0.0);
            let hi = (center + radii[pos]).min(1.0);
            floor[16 * pos + w] = lo;
            width[16 * pos + w] = (hi - lo).max(0.0);
        }
    }

    let sign = match sense {
        Sense::Lower => 1.0,
        Sense::Upper => -1.0,
    };
    let base = spec.to_standard_lp(observed, Sense::Lower);
    let mut cols: Vec<SparseCol> = Vec::with_capacity(base.cols.len() + 32 * a);
    let mut c: Vec<f64> = Vec::with_capacity(cols.capacity());
    // Structural mu columns and bound slacks carry over unchanged.
    for (j, col) in base.cols.iter().enumerate() {
        cols.push(col.clone());
        c.push(sign * base.c[j] * if j < spec.columns.len() { 1.0 } else { 0.0 });
    }
    // Cell variables q: -1 on their kept cell row, +1 on the block simplex
    // row, +1 on their box row.
    for (pos, _) in blocks.iter().enumerate() {
        for w in 0..CELLS_PER_BLOCK {
            let mut col: SparseCol = Vec::with_capacity(3);
            if w + 1 < CELLS_PER_BLOCK {
                col.push((15 * pos + w, -1.0));
            }
            col.push((simplex_base + pos, 1.0));
            col.push((box_base + 16 * pos + w, 1.0));
            cols.push(col);
            c.push(0.0);
        }
    }
    // Upper-bound slacks for the boxes.
    for i in 0..16 * a {
        cols.push(vec![(box_base + i, 1.0)]);
        c.push(0.0);
    }
    let mut b = vec![0.0; n_rows];
    // Cell rows: A mu - q = floor.
    for (pos, _) in blocks.iter().enumerate() {
        for w in 0..CELLS_PER_BLOCK - 1 {
            b[15 * pos + w] = floor[16 * pos + w];
        }
    }
    b[15 * a] = 1.0;
    for (i, bound) in spec.bounds.iter().enumerate() {
        b[n_eq + i] = bound.eps;
    }
    for (pos, _) in blocks.iter().enumerate() {
        let floor_sum: f64 = floor[16 * pos..16 * (pos + 1)].iter().sum();
        b[simplex_base + pos] = 1.0 - floor_sum;
    }
    for i in 0..16 * a {
        b[box_base + i] = width[i];
    }
    StandardLp {
        n_rows,
        cols,
        b,
        c,
    }
}

pub fn relaxed_box_ci(
    spec: &LinearProgramSpec,
    records: &[HouseholdRecord],
    config: &InferenceConfig,
) -> Result<ConfidenceReport, EngineError> {
    let observed = observed_for(spec, records)?;
    let pool = ResamplePool::new(records, spec.active);
    let (kappa, radii) = kappa_values(&observed, &pool, config);
    let opts = SolverOptions::empirical();
    let point_bounds = spec.bounds_values(&observed, &opts)?;

    let solve_endpoint = |sense: Sense| -> Result<(f64, bool), EngineError> {
        let lp = relaxed_lp(spec, &observed, &radii, sense);
        let out = lpsolve::solve(&lp, &opts);
        match out.status {
            SolveStatus::Optimal => {
                let sol = out.solution.unwrap();
                Ok((sol.value, out.diagnostics.degenerate_basis))
            }
            SolveStatus::Infeasible => Err(EngineError::Solver(
                "relaxed program infeasible: the restrictions are rejected \
                 beyond the sampling-uncertainty region"
                    .into(),
            )),
            s => Err(EngineError::Solver(format!("relaxed solve failed: {s:?}"))),
        }
    };
    let (lower_ci, deg1) = solve_endpoint(Sense::Lower)?;
    let (neg_upper, deg2) = solve_endpoint(Sense::Upper)?;
    Ok(ConfidenceReport {
        method: InferenceMethod::RelaxedBox,
        alpha: config.alpha,
        lower_ci,
        upper_ci: -neg_upper,
        point_bounds,
        diagnostics: InferenceDiagnostics {
            infeasible_replicates: 0,
            projected_replicates: 0,
            degenerate_basis: deg1 || deg2,
            distinct_bases: 0,
            kappa,
        },
    })
}

// --- Basis bootstrap --------------------------------------------------------

struct EndpointBootstrap {
    /// Point value in min form (the solved LP's objective).
    base_value: f64,
    /// Factors of every distinct optimal basis encountered, keyed by the
    /// sorted basic column set.
    registry: HashMap<Vec<usize>, BasisFactor>,
    /// Per kept replicate: (basis key, min-form value, rhs).
    replicates: Vec<(Vec<usize>, f64, Vec<f64>)>,
    infeasible: usize,
    degenerate: bool,
}

fn bootstrap_endpoint(
    pruned: &PrunedProgram,
    observed: &ObservedDistribution,
    pool: &ResamplePool,
    config: &InferenceConfig,
    sense: Sense,
) -> Result<EndpointBootstrap, EngineError> {
    let opts = SolverOptions::empirical();
    let lp = pruned.lp(sense, observed);
    let (mut warm, base) = WarmSolver::new(lp, opts);
    let SolveStatus::Optimal = base.status else {
        return Err(EngineError::Solver(format!(
            "base solve failed: {:?}",
            base.status
        )));
    };
    let base_sol = base.solution.unwrap();
    let mut registry = HashMap::new();
    let mut key = base_sol.basis.clone();
    key.sort_unstable();
    registry.insert(key, base_sol.factor.clone());
    let mut out = EndpointBootstrap {
        base_value: base_sol.value,
        registry,
        replicates: Vec::with_capacity(config.reps),
        infeasible: 0,
        degenerate: base.diagnostics.degenerate_basis,
    };
    let salt = match sense {
        Sense::Lower => 0u64,
        Sense::Upper => 500_000,
    };
    for rep in 0..config.reps {
        let mut rng = replicate_rng(config.seed, salt + rep as u64);
        let Some(star) = pool.draw(&mut rng) else {
            out.infeasible += 1;
            continue;
        };
        let rhs = pruned.rhs(&star);
        let outcome = warm.solve_rhs(&rhs);
        match outcome.status {
            SolveStatus::Optimal => {
                let sol = outcome.solution.unwrap();
                let mut key = sol.basis.clone();
                key.sort_unstable();
                out.registry.entry(key.clone()).or_insert(sol.factor);
                out.replicates.push((key, sol.value, rhs));
            }
            SolveStatus::Infeasible => out.infeasible += 1,
            s => {
                return Err(EngineError::Solver(format!(
                    "bootstrap re-solve failed: {s:?}"
                )))
            }
        }
    }
    if out.replicates.is_empty() {
        return Err(EngineError::Solver(
            "every bootstrap replicate was infeasible".into(),
        ));
    }
    Ok(out)
}

/// One-sided outward shift for one endpoint per the optimal-basis bootstrap.
/// Works in "max form": for either endpoint the solved LP is a minimization
/// and the max-form value of basis `b` at rhs `r` is `-revalue_b(r)`.
fn basis_bootstrap_shift(
    boot: &EndpointBootstrap,
    base_rhs: &[f64],
    n: f64,
    config: &InferenceConfig,
) -> (f64, usize) {
    let c_n = n.powf(-config.c_n_exponent);
    let base_max = -boot.base_value;
    // Candidate bases: replicate-optimal bases whose bootstrap value lies
    // within c_n of the sample optimum.
    let mut candidates: Vec<&Vec<usize>> = Vec::new();
    let mut seen: Vec<&Vec<usize>> = Vec::new();
    for (key, value, _) in &boot.replicates {
        let w_star = -*value;
        if (w_star - base_max).abs() <= c_n && !seen.contains(&key) {
            seen.push(key);
            candidates.push(key);
        }
    }
    if candidates.is_empty() {
        // Fall back to the base-optimal basis alone.
        candidates = boot.registry.keys().take(1).collect();
    }
    let factors: Vec<&BasisFactor> = candidates
        .iter()
        .map(|k| boot.registry.get(*k).expect("registered"))
        .collect();
    let base_vals: Vec<f64> = factors
        .iter()
        .map(|f| f.revalue(base_rhs).unwrap_or(boot.base_value))
        .collect();
    let mut deltas: Vec<f64> = Vec::with_capacity(boot.replicates.len());
    for (_, _, rhs) in &boot.replicates {
        let mut best = f64::NEG_INFINITY;
        for (f, base_v) in factors.iter().zip(&base_vals) {
            if let Ok(v) = f.revalue(rhs) {
                // Max-form difference: (-v) - (-base_v).
                let d = n.sqrt() * (base_v - v);
                if d > best {
                    best = d;
                }
            }
        }
        if best.is_finite() {
            deltas.push(best);
        }
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_alpha = empirical_quantile(&deltas, config.alpha);
    // Max-form endpoint: M_hat + n^{-1/2} * (-q_alpha).
    (-q_alpha / n.sqrt(), candidates.len())
}

pub fn basis_bootstrap_ci(
    spec: &LinearProgramSpec,
    records: &[HouseholdRecord],
    config: &InferenceConfig,
) -> Result<ConfidenceReport, EngineError> {
    let observed = observed_for(spec, records)?;
    let pool = ResamplePool::new(records, spec.active);
    let n = records.len() as f64;
    let pruned = PrunedProgram::new(spec, &observed);
    let base_rhs = pruned.rhs(&observed);

    let lower_boot = bootstrap_endpoint(&pruned, &observed, &pool, config, Sense::Lower)?;
    let upper_boot = bootstrap_endpoint(&pruned, &observed, &pool, config, Sense::Upper)?;
    let (lower_shift, bases_lo) = basis_bootstrap_shift(&lower_boot, &base_rhs, n, config);
    let (upper_shift, bases_hi) = basis_bootstrap_shift(&upper_boot, &base_rhs, n, config);

    let lower_hat = lower_boot.base_value;
    let upper_hat = -upper_boot.base_value;
    // Lower endpoint: V_low >= V_hat - shift with probability 1 - alpha.
    let lower_ci = lower_hat - lower_shift;
    let upper_ci = upper_hat + upper_shift;
    let opts = SolverOptions::empirical();
    let point_bounds = spec.bounds_values(&observed, &opts)?;
    Ok(ConfidenceReport {
        method: InferenceMethod::BasisBootstrap,
        alpha: config.alpha,
        lower_ci,
        upper_ci,
        point_bounds,
        diagnostics: InferenceDiagnostics {
            infeasible_replicates: lower_boot.infeasible + upper_boot.infeasible,
            projected_replicates: 0,
            degenerate_basis: lower_boot.degenerate || upper_boot.degenerate,
            distinct_bases: bases_lo.max(bases_hi),
            kappa: Vec::new(),
        },
    })
}

// --- Numerical delta method -------------------------------------------------

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let k = v.len();
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if i + 1 == k || sorted[i + 1] <= t {
            tau = t;
            break;
        }
    }
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
        total += *x;
    }
    // Exact renormalization keeps the block-sum invariant tight.
    if total > 0.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}

pub fn numerical_delta_ci(
    spec: &LinearProgramSpec,
    records: &[HouseholdRecord],
    config: &InferenceConfig,
) -> Result<ConfidenceReport, EngineError> {
    let observed = observed_for(spec, records)?;
    let pool = ResamplePool::new(records, spec.active);
    let n = records.len() as f64;
    let e_n = n.powf(-config.e_n_exponent);
    let opts = SolverOptions::empirical();

    let pruned = PrunedProgram::new(spec, &observed);
    let (mut warm_lo, base_lo) = WarmSolver::new(pruned.lp(Sense::Lower, &observed), opts);
    let (mut warm_hi, base_hi) = WarmSolver::new(pruned.lp(Sense::Upper, &observed), opts);
    let (SolveStatus::Optimal, SolveStatus::Optimal) = (base_lo.status, base_hi.status) else {
        return Err(EngineError::Solver(format!(
            "base solves failed: {:?} / {:?}",
            base_lo.status, base_hi.status
        )));
    };
    let lower_hat = base_lo.solution.as_ref().unwrap().value;
    let upper_hat = -base_hi.solution.as_ref().unwrap().value;

    let mut derivs_lo: Vec<f64> = Vec::with_capacity(config.reps);
    let mut derivs_hi: Vec<f64> = Vec::with_capacity(config.reps);
    let mut infeasible = 0usize;
    let mut projected = 0usize;
    let blocks: Vec<InstrumentProfile> = spec.active.iter().collect();
    for rep in 0..config.reps {
        let mut rng = replicate_rng(config.seed, rep as u64);
        let Some(star) = pool.draw(&mut rng) else {
            infeasible += 1;
            continue;
        };
        // Perturbed cells p_hat + e_n sqrt(n) (p* - p_hat), projected back to
        // each block simplex when the step leaves it.
        let mut perturbed = observed.clone();
        let mut was_projected = false;
        for p in &blocks {
            let mut block = [0.0f64; 16];
            for w in 0..CELLS_PER_BLOCK {
                let base = observed.cell(*p, w);
                block[w] = base + e_n * n.sqrt() * (star.cell(*p, w) - base);
            }
            if block.iter().any(|&v| v < 0.0) {
                project_simplex(&mut block);
                was_projected = true;
            } else {
                let total: f64 = block.iter().sum();
                for v in &mut block {
                    *v /= total;
                }
            }
            perturbed = perturbed.with_block(*p, block);
        }
        if was_projected {
            projected += 1;
        }
        let rhs = pruned.rhs(&perturbed);
        let out_lo = warm_lo.solve_rhs(&rhs);
        let out_hi = warm_hi.solve_rhs(&rhs);
        match (out_lo.status, out_hi.status) {
            (SolveStatus::Optimal, SolveStatus::Optimal) => {
                let v_lo = out_lo.solution.unwrap().value;
                let v_hi = -out_hi.solution.unwrap().value;
                derivs_lo.push((v_lo - lower_hat) / e_n);
                derivs_hi.push((v_hi - upper_hat) / e_n);
            }
            (SolveStatus::Infeasible, _) | (_, SolveStatus::Infeasible) => infeasible += 1,
            (a, b) => {
                return Err(EngineError::Solver(format!(
                    "perturbed solve failed: {a:?} / {b:?}"
                )))
            }
        }
    }
    if derivs_lo.is_empty() {
        return Err(EngineError::Solver(
            "every perturbed replicate was infeasible".into(),
        ));
    }
    let mut abs_lo: Vec<f64> = derivs_lo.iter().map(|v| v.abs()).collect();
    let mut abs_hi: Vec<f64> = derivs_hi.iter().map(|v| v.abs()).collect();
    abs_lo.sort_by(|a, b| a.partial_cmp(b).unwrap());
    abs_hi.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c_lo = empirical_quantile(&abs_lo, 1.0 - config.alpha);
    let c_hi = empirical_quantile(&abs_hi, 1.0 - config.alpha);

    let opts = SolverOptions::empirical();
    let point_bounds = spec.bounds_values(&observed, &opts)?;
    Ok(ConfidenceReport {
        method: InferenceMethod::NumericalDelta,
        alpha: config.alpha,
        lower_ci: lower_hat - c_lo / n.sqrt(),
        upper_ci: upper_hat + c_hi / n.sqrt(),
        point_bounds,
        diagnostics: InferenceDiagnostics {
            infeasible_replicates: infeasible,
            projected_replicates: projected,
            degenerate_basis: base_lo.diagnostics.degenerate_basis
                || base_hi.diagnostics.degenerate_basis,
            distinct_bases: 0,
            kappa: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{build_program, Estimand, Member};
    use crate::simulate::{preset, Dgp};
    use crate::typespace::TypeSpaceConfig;

    fn benchmark_setup(n: usize, seed: u64) -> (LinearProgramSpec, Vec<HouseholdRecord>) {
        let Dgp::Type(dgp) = preset("benchmark").unwrap() else {
            panic!()
        };
        let records = dgp.sample(n, seed);
        let observed = ObservedDistribution::from_records(&records).unwrap();
        let spec = build_program(
            &TypeSpaceConfig::full(),
            &[],
            &Estimand::ade(Member::One),
            &observed,
        )
        .unwrap();
        (spec, records)
    }

    #[test]
    fn relaxed_box_nests_point_bounds() {
        let (spec, records) = benchmark_setup(2000, 5);
        let config = InferenceConfig {
            method: InferenceMethod::RelaxedBox,
            ..Default::default()
        };
        let report = relaxed_box_ci(&spec, &records, &config).unwrap();
        assert_eq!(report.point_bounds.status, IntervalStatus::Interval);
        assert!(report.lower_ci <= report.point_bounds.lower + 1e-9);
        assert!(report.upper_ci >= report.point_bounds.upper - 1e-9);
        assert_eq!(report.diagnostics.kappa.len(), 4);
    }

    #[test]
    fn relaxed_box_alpha_monotonicity() {
        // Smaller alpha means a wider region, hence a wider interval.
        let (spec, records) = benchmark_setup(1500, 9);
        let at_alpha = |alpha: f64| {
            let config = InferenceConfig {
                method: InferenceMethod::RelaxedBox,
                alpha,
                ..Default::default()
            };
            relaxed_box_ci(&spec, &records, &config).unwrap()
        };
        let tight = at_alpha(0.2);
        let wide = at_alpha(0.01);
        assert!(wide.lower_ci <= tight.lower_ci + 1e-12);
        assert!(wide.upper_ci >= tight.upper_ci - 1e-12);
    }

    #[test]
    fn relaxed_box_degenerate_region_recovers_point_bounds() {
        // kappa -> 0 collapses every box to the empirical cells.
        let (spec, records) = benchmark_setup(1500, 13);
        let observed = ObservedDistribution::from_records(&records).unwrap();
        let opts = SolverOptions::empirical();
        let point = spec.bounds_values(&observed, &opts).unwrap();
        let radii = vec![0.0; spec.active.len()];
        let lo = lpsolve::solve(&relaxed_lp(&spec, &observed, &radii, Sense::Lower), &opts);
        let hi = lpsolve::solve(&relaxed_lp(&spec, &observed, &radii, Sense::Upper), &opts);
        let lower = lo.solution.unwrap().value;
        let upper = -hi.solution.unwrap().value;
        assert!((lower - point.lower).abs() < 1e-6);
        assert!((upper - point.upper).abs() < 1e-6);
    }

    #[test]
    fn relaxed_box_radius_shrinks_with_n() {
        let mut widths = Vec::new();
        for (n, seed) in [(1_000usize, 21u64), (10_000, 22), (100_000, 23)] {
            let (spec, records) = benchmark_setup(n, seed);
            let config = InferenceConfig {
                method: InferenceMethod::RelaxedBox,
                ..Default::default()
            };
            let report = relaxed_box_ci(&spec, &records, &config).unwrap();
            widths.push(report.upper_ci - report.lower_ci);
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn bootstrap_kappa_is_smaller_than_analytic() {
        let (spec, records) = benchmark_setup(2000, 31);
        let analytic = relaxed_box_ci(
            &spec,
            &records,
            &InferenceConfig {
                method: InferenceMethod::RelaxedBox,
                kappa_rule: KappaRule::Analytic,
                ..Default::default()
            },
        )
        .unwrap();
        let boot = relaxed_box_ci(
            &spec,
            &records,
            &InferenceConfig {
                method: InferenceMethod::RelaxedBox,
                kappa_rule: KappaRule::Bootstrap,
                reps: 200,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in analytic.diagnostics.kappa.iter().zip(&boot.diagnostics.kappa) {
            assert!(b < a, "bootstrap kappa {b} vs analytic {a}");
        }
        // Both still nest the point bounds.
        assert!(boot.lower_ci <= boot.point_bounds.lower + 1e-9);
        assert!(boot.upper_ci >= boot.point_bounds.upper - 1e-9);
    }

    #[test]
    fn basis_bootstrap_zero_width_on_degenerate_data() {
        // A single full-compliance type with constant outcomes: every
        // replicate reproduces the same cells, so the CI collapses.
        let e = crate::simulate::full_compliance_selection();
        let s = crate::typespace::IndividualType::from_parts(0b1111, crate::simulate::comply_brf());
        let dgp = crate::simulate::TypeDgp::new(
            vec![crate::typespace::PairType::new(s, s, e)],
            vec![1.0],
            [0.25; 4],
        )
        .unwrap();
        let records = dgp.sample(400, 3);
        let observed = ObservedDistribution::from_records(&records).unwrap();
        let spec = build_program(
            &TypeSpaceConfig::full(),
            &[],
            &Estimand::ade(Member::One),
            &observed,
        )
        .unwrap();
        let config = InferenceConfig {
            method: InferenceMethod::BasisBootstrap,
            reps: 120,
            ..Default::default()
        };
        let report = basis_bootstrap_ci(&spec, &records, &config).unwrap();
        assert!(
            (report.lower_ci - report.point_bounds.lower).abs() < 1e-9,
            "lower shifted: {} vs {}",
            report.lower_ci,
            report.point_bounds.lower
        );
        assert!((report.upper_ci - report.point_bounds.upper).abs() < 1e-9);
    }

    #[test]
    fn basis_bootstrap_covers_outward() {
        let (spec, records) = benchmark_setup(2000, 41);
        let config = InferenceConfig {
            method: InferenceMethod::BasisBootstrap,
            reps: 150,
            ..Default::default()
        };
        let report = basis_bootstrap_ci(&spec, &records, &config).unwrap();
        assert!(report.lower_ci <= report.point_bounds.lower + 1e-9);
        assert!(report.upper_ci >= report.point_bounds.upper - 1e-9);
        assert!(report.diagnostics.distinct_bases >= 1);
    }

    #[test]
    fn numerical_delta_zero_variance_data() {
        let e = crate::simulate::full_compliance_selection();
        let s = crate::typespace::IndividualType::from_parts(0b1010, crate::simulate::comply_brf());
        let dgp = crate::simulate::TypeDgp::new(
            vec![crate::typespace::PairType::new(s, s, e)],
            vec![1.0],
            [0.25; 4],
        )
        .unwrap();
        let records = dgp.sample(400, 17);
        let observed = ObservedDistribution::from_records(&records).unwrap();
        let spec = build_program(
            &TypeSpaceConfig::full(),
            &[],
            &Estimand::ade(Member::One),
            &observed,
        )
        .unwrap();
        let config = InferenceConfig {
            method: InferenceMethod::NumericalDelta,
            reps: 120,
            ..Default::default()
        };
        let report = numerical_delta_ci(&spec, &records, &config).unwrap();
        assert!((report.lower_ci - report.point_bounds.lower).abs() < 1e-9);
        assert!((report.upper_ci - report.point_bounds.upper).abs() < 1e-9);
    }

    #[test]
    fn numerical_delta_step_size_sensitivity() {
        let (spec, records) = benchmark_setup(5000, 51);
        let at_exp = |e: f64| {
            let config = InferenceConfig {
                method: InferenceMethod::NumericalDelta,
                reps: 150,
                e_n_exponent: e,
                ..Default::default()
            };
            numerical_delta_ci(&spec, &records, &config).unwrap()
        };
        let a = at_exp(1.0 / 3.0);
        let b = at_exp(1.0 / 6.0);
        let width_a = a.upper_ci - a.lower_ci;
        let width_b = b.upper_ci - b.lower_ci;
        let rel = (width_a - width_b).abs() / width_a.max(width_b);
        assert!(rel < 0.2, "step sizes disagree by {rel}");
    }

    #[test]
    fn seed_determinism_byte_identical_reports() {
        let (spec, records) = benchmark_setup(800, 61);
        for method in [
            InferenceMethod::RelaxedBox,
            InferenceMethod::BasisBootstrap,
            InferenceMethod::NumericalDelta,
        ] {
            let config = InferenceConfig {
                method,
                reps: 120,
                seed: 77,
                kappa_rule: KappaRule::Bootstrap,
                ..Default::default()
            };
            let a = confidence_interval(&spec, &records, &config).unwrap();
            let b = confidence_interval(&spec, &records, &config).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap(),
                "{method:?}"
            );
        }
    }

    #[test]
    fn config_validation() {
        let mut config = InferenceConfig::default();
        config.alpha = 1.5;
        assert!(config.validate().is_err());
        let mut config = InferenceConfig {
            method: InferenceMethod::BasisBootstrap,
            reps: 10,
            ..Default::default()
        };
        assert!(config.validate().is_err());
        config.reps = 100;
        assert!(config.validate().is_ok());
    }

    #[test]
    fn simplex_projection_properties() {
        let mut v = [0.5, -0.2, 0.4, 0.3];
        project_simplex(&mut v);
        assert!(v.iter().all(|&x| x >= 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Already-feasible points stay put.
        let mut w = [0.25, 0.25, 0.25, 0.25];
        project_simplex(&mut w);
        for x in w {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }
}
