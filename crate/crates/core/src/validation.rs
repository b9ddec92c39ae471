//! Cross-checks of the samplers against the exact oracles. Each check
//! returns a [`CheckOutcome`] instead of panicking so the same code backs
//! the test suites and the command-line `validate` runs.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::estimators::{
    estimate_es, estimate_one_point_direct, estimate_one_point_factored, EstimatorError,
    EstimatorResult, RadiusTwoReference, SamplingPlan,
};
use crate::exact_oracle::{
    Descend, ExitLeaf, FiniteDomain, GreenSolver, InteriorNode, Oracle, OracleError, SapEnumerator,
    SapVisitor,
};
use crate::lattice::{Ball, LatticePoint};
use crate::loop_erase::{loop_erase_fast, loop_erase_reference, reverse_path, GridSiteIndex, LoopEraser, PathCode};
use crate::loop_soup::reconstruct_srw;
use crate::rng::RngStream;
use crate::stats::{chi_square_gof, chi_square_homogeneity};
use crate::walk::{sample_h_transform, sample_srw_exit, stream_srw_exit, Path};

/// Significance level of the distributional checks.
pub const P_THRESHOLD: f64 = 0.001;
/// Allowed deviation of a Monte Carlo estimate from an exact value.
pub const SIGMA_TOLERANCE: f64 = 3.0;

const O: LatticePoint = LatticePoint::ORIGIN;
const E1: LatticePoint = LatticePoint::new(1, 0, 0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.to_string(), passed, detail }
    }

    fn sigma(name: &str, r: &EstimatorResult, exact: f64) -> Self {
        let z = (r.estimate - exact) / r.stderr;
        let passed = (r.estimate - exact).abs() <= SIGMA_TOLERANCE * r.stderr;
        CheckOutcome::new(
            name,
            passed,
            format!("estimate {:.6} +- {:.6} vs exact {exact:.6} (z = {z:.2}, n = {})", r.estimate, r.stderr, r.n_samples),
        )
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums leaf probabilities; interior paths of `cutoff` steps contribute
/// their prefix probability instead of being expanded.
struct Closure {
    cutoff: usize,
    sum: Compensated,
    leaves: u64,
    frontier: u64,
}

impl SapVisitor for Closure {
    fn interior(&mut self, node: &InteriorNode<'_>) -> Descend {
        if node.depth() >= self.cutoff {
            self.sum.add(node.prefix_probability());
            self.frontier += 1;
            return Descend::Prune;
        }
        Descend::Continue
    }

    fn exit(&mut self, leaf: &ExitLeaf<'_>) {
        self.sum.add(leaf.probability());
        self.leaves += 1;
    }
}

/// Total probability of the loop-erased exit paths of `B(radius)`.
/// Paths are enumerated with first step `+x` and the total multiplied by 6.
/// With a `cutoff`, unfinished paths of that many steps count with their
/// prefix probability, which checks the law's consistency between each
/// path and its extensions down to that depth.
pub fn normalization(oracle: &Oracle, radius: f64, cutoff: Option<usize>) -> Result<CheckOutcome, OracleError> {
    let domain = FiniteDomain::from_ball(&Ball::centered(radius).map_err(|e| OracleError::InvalidPath(e.to_string()))?);
    let mut en = SapEnumerator::new(oracle, &domain)?;
    let mut c = Closure { cutoff: cutoff.unwrap_or(usize::MAX), sum: Compensated::default(), leaves: 0, frontier: 0 };
    let mult = if domain.contains(E1) {
        en.run(&[O, E1], &mut c)?;
        6
    } else {
        en.run(&[O], &mut c)?;
        1
    };
    let total = mult as f64 * c.sum.value();
    let depth = cutoff.map_or("all paths".to_string(), |k| format!("closed at {k} steps, {} open paths", mult * c.frontier));
    Ok(CheckOutcome::new(
        &format!("normalization B({radius})"),
        (total - 1.0).abs() <= 1e-8,
        format!("sum = {total:.15} ({} exit paths, {depth})", mult * c.leaves),
    ))
}

/// Multiset equality of `LE(l)` and `reverse(LE(reverse(l)))` over all
/// `6^m` walks of `m` steps from the origin, for `m = 1..=max_steps`.
pub fn reversal_identity(max_steps: usize) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut total = 0u64;
    for m in 1..=max_steps {
        let mut balance: FxHashMap<PathCode, i64> = FxHashMap::default();
        let mut dirs = vec![0usize; m];
        loop {
            let path = Path::from_directions(O, &dirs);
            let forward = loop_erase_reference(&path);
            let backward = reverse_path(&loop_erase_reference(&reverse_path(&path)).as_path());
            *balance.entry(PathCode::from_points(forward.points()).expect("short")).or_default() += 1;
            *balance.entry(PathCode::from_points(backward.points()).expect("short")).or_default() -= 1;
            total += 1;
            // Next direction word in base 6.
            let mut k = 0;
            while k < m && dirs[k] == 5 {
                dirs[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
            dirs[k] += 1;
        }
        let off = balance.values().filter(|&&v| v != 0).count();
        if off > 0 {
            failures.push(format!("m = {m}: {off} unbalanced paths"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{total} walks, multisets equal for m = 1..={max_steps}")
    } else {
        failures.join("; ")
    };
    CheckOutcome::new("reversal identity", failures.is_empty(), detail)
}

/// `Es(1)` by the 36 equally likely (first erased step, first step of the
/// second walk) pairs: the event fails only when the two coincide.
pub fn es_one_enumeration() -> CheckOutcome {
    let misses = (0..6).flat_map(|a| (0..6).map(move |b| (a, b))).filter(|(a, b)| a != b).count();
    let value = misses as f64 / 36.0;
    CheckOutcome::new("Es(1) by enumeration", (value - 5.0 / 6.0).abs() < 1e-15, format!("{misses}/36 = {value:.12}"))
}

/// Solver agreement, symmetry and residual of the Green's matrix of `B(radius)`.
pub fn green_table_checks(oracle: &Oracle, radius: f64) -> Result<CheckOutcome, OracleError> {
    let domain = FiniteDomain::from_ball(&Ball::centered(radius).map_err(|e| OracleError::InvalidPath(e.to_string()))?);
    let dense = oracle.green_matrix_with(&domain, GreenSolver::Dense)?;
    let iterative = oracle.green_matrix_with(&domain, GreenSolver::Iterative)?;
    let n = domain.len();
    let (mut diff, mut asym, mut min_diag, mut min_entry) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for i in 0..n {
        for j in 0..n {
            let g = dense.get_index(i, j);
            diff = diff.max((g - iterative.get_index(i, j)).abs());
            asym = asym.max((g - dense.get_index(j, i)).abs());
            min_entry = min_entry.min(g);
        }
        min_diag = min_diag.min(dense.get_index(i, i));
    }
    let residual = dense.residual_inf();
    let passed = diff < 1e-8 && asym < 1e-12 && residual < 1e-10 && min_diag >= 1.0 && min_entry >= 0.0;
    Ok(CheckOutcome::new(
        &format!("Green's matrix B({radius})"),
        passed,
        format!("{n} sites, solver gap {diff:.2e}, asymmetry {asym:.2e}, residual {residual:.2e}, min diagonal {min_diag:.4}"),
    ))
}

/// Internal consistency of the `B(2)` reference: total probability and
/// length distribution sum to 1, the distribution's mean is the mean
/// length, `Es(2) < Es(1)` and the one-point value is at least `1/6`
/// (every path visits a neighbor of the origin).
pub fn reference_consistency(reference: &RadiusTwoReference) -> CheckOutcome {
    let dist_total: f64 = reference.length_distribution.iter().sum();
    let dist_mean: f64 = reference.length_distribution.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let passed = (reference.total_probability - 1.0).abs() < 1e-10
        && (dist_total - 1.0).abs() < 1e-10
        && (dist_mean - reference.length_mean).abs() < 1e-10
        && reference.es < reference.es_one
        && reference.one_point >= 1.0 / 6.0;
    CheckOutcome::new(
        "B(2) reference",
        passed,
        format!(
            "total {:.12}, Es(2) {:.12}, Es(1,2) {:.12}, E M {:.12}, one-point {:.12}",
            reference.total_probability, reference.es, reference.es_annulus, reference.length_mean, reference.one_point
        ),
    )
}

fn block_counts<F>(plan: &SamplingPlan, ball: Ball, cells: usize, classify: F) -> Vec<u64>
where
    F: Fn(&mut LoopEraser<GridSiteIndex>, &mut RngStream) -> usize + Sync + Send,
{
    let blocks = plan.run_blocks(
        || LoopEraser::for_ball(&ball),
        |eraser, rng, n| (0..n).map(|_| classify(eraser, rng) as u32).collect::<Vec<u32>>(),
    );
    let mut counts = vec![0u64; cells];
    for b in blocks {
        for c in b {
            counts[c as usize] += 1;
        }
    }
    counts
}

/// Exact probabilities of all loop-erased exit paths of `domain` from the
/// origin with probability at least `threshold`, plus the mass of the rest.
struct LargePaths {
    threshold: f64,
    cells: FxHashMap<PathCode, usize>,
    probs: Vec<f64>,
    rest: Compensated,
}

impl SapVisitor for LargePaths {
    fn interior(&mut self, node: &InteriorNode<'_>) -> Descend {
        let q = node.prefix_probability();
        if q < self.threshold {
            self.rest.add(q);
            return Descend::Prune;
        }
        Descend::Continue
    }

    fn exit(&mut self, leaf: &ExitLeaf<'_>) {
        let q = leaf.probability();
        if q < self.threshold {
            self.rest.add(q);
        } else {
            self.cells.insert(PathCode::from_points(leaf.path()).expect("short"), self.probs.len());
            self.probs.push(q);
        }
    }
}

/// Chi-square test of the empirical law of `LE(S[0, T])` on `B(2)` against
/// the exact law. Paths with expected count below 5 share one cell.
pub fn lerw_law_chi_square(oracle: &Oracle, plan: &SamplingPlan) -> Result<CheckOutcome, OracleError> {
    let ball = Ball::centered(2.0).expect("valid");
    let domain = FiniteDomain::from_ball(&ball);
    let mut large = LargePaths {
        threshold: 5.0 / plan.samples as f64,
        cells: FxHashMap::default(),
        probs: Vec::new(),
        rest: Compensated::default(),
    };
    SapEnumerator::new(oracle, &domain)?.run(&[O], &mut large)?;
    let k = large.probs.len();
    let mut probs = large.probs.clone();
    probs.push(large.rest.value());
    let counts = block_counts(plan, ball, k + 1, |eraser, rng| {
        eraser.reset();
        stream_srw_exit(O, &ball, rng, |p| eraser.push(p)).expect("inside");
        PathCode::from_points(eraser.current()).and_then(|c| large.cells.get(&c).copied()).unwrap_or(k)
    });
    let t = chi_square_gof(&counts, &probs);
    Ok(CheckOutcome::new(
        "LERW law on B(2)",
        t.p_value > P_THRESHOLD,
        format!("{k} path cells + pooled tail of mass {:.3e}; chi2 = {:.1}, dof = {}, p = {:.4}", probs[k], t.statistic, t.dof, t.p_value),
    ))
}

/// Exit point of SRW from the origin on `B(radius)` against harmonic measure.
pub fn walk_exit_law(oracle: &Oracle, radius: f64, plan: &SamplingPlan) -> Result<CheckOutcome, OracleError> {
    let ball = Ball::centered(radius).expect("valid");
    let domain = FiniteDomain::from_ball(&ball);
    let law = oracle.srw_exit_law_exact(&domain, O)?;
    let slot: FxHashMap<LatticePoint, usize> = law.points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let counts = block_counts(plan, ball, law.points.len(), |_, rng| {
        let mut last = O;
        stream_srw_exit(O, &ball, rng, |p| last = p).expect("inside");
        slot[&last]
    });
    let t = chi_square_gof(&counts, &law.probabilities);
    Ok(CheckOutcome::new(
        &format!("SRW exit law on B({radius})"),
        t.p_value > P_THRESHOLD,
        format!("{} exit points; chi2 = {:.1}, dof = {}, p = {:.4}", law.points.len(), t.statistic, t.dof, t.p_value),
    ))
}

/// Continuation cells: the first `steps` steps after the prefix, or the
/// whole continuation when it exits sooner.
struct Continuations {
    prefix_len: usize,
    steps: usize,
    cells: FxHashMap<PathCode, f64>,
}

impl Continuations {
    fn key(&self, path: &[LatticePoint]) -> PathCode {
        let end = (self.prefix_len + self.steps).min(path.len());
        PathCode::from_points(&path[self.prefix_len - 1..end]).expect("short")
    }
}

impl SapVisitor for Continuations {
    fn interior(&mut self, node: &InteriorNode<'_>) -> Descend {
        if node.path().len() == self.prefix_len + self.steps {
            let key = self.key(node.path());
            *self.cells.entry(key).or_default() += node.prefix_probability();
            return Descend::Prune;
        }
        Descend::Continue
    }

    fn exit(&mut self, leaf: &ExitLeaf<'_>) {
        let key = self.key(leaf.path());
        *self.cells.entry(key).or_default() += leaf.probability();
    }
}

/// Domain Markov property on `B(3)`: given that the erased path starts with
/// `prefix`, its continuation is the loop-erasure of SRW from the prefix's
/// end conditioned to leave `B(3)` before returning to the prefix. The
/// exact conditional law of the first `steps` continuation steps is
/// compared with samples of that conditioned walk.
pub fn domain_markov(
    oracle: &Oracle,
    prefix: &[LatticePoint],
    steps: usize,
    plan: &SamplingPlan,
) -> Result<CheckOutcome, OracleError> {
    let ball = Ball::centered(3.0).expect("valid");
    let domain = FiniteDomain::from_ball(&ball);
    let mut cont = Continuations { prefix_len: prefix.len(), steps, cells: FxHashMap::default() };
    SapEnumerator::new(oracle, &domain)?.run(prefix, &mut cont)?;
    let mut keys: Vec<PathCode> = cont.cells.keys().copied().collect();
    keys.sort();
    let index: FxHashMap<PathCode, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mass: f64 = keys.iter().map(|k| cont.cells[k]).sum();
    let probs: Vec<f64> = keys.iter().map(|k| cont.cells[k] / mass).collect();
    let h = oracle.escape_table(&domain, prefix)?;
    let start = *prefix.last().expect("nonempty");
    let unknown = keys.len();
    let counts = block_counts(plan, ball, unknown + 1, |eraser, rng| {
        let y = sample_h_transform(start, &h, rng).expect("escape is possible");
        eraser.reset();
        y.points().iter().for_each(|&p| eraser.push(p));
        let pts = eraser.current();
        let end = (steps + 1).min(pts.len());
        PathCode::from_points(&pts[..end]).and_then(|c| index.get(&c).copied()).unwrap_or(unknown)
    });
    let mut probs_ext = probs;
    probs_ext.push(0.0);
    let t = chi_square_gof(&counts, &probs_ext);
    Ok(CheckOutcome::new(
        "domain Markov on B(3)",
        t.p_value > P_THRESHOLD,
        format!(
            "prefix of {} steps, {} continuation cells (prefix probability {mass:.6}); chi2 = {:.1}, dof = {}, p = {:.4}",
            prefix.len() - 1,
            keys.len(),
            t.statistic,
            t.dof,
            t.p_value
        ),
    ))
}

/// Loop insertion round trip on `B(radius)`: `LE(reconstruct(LE(S))) =
/// LE(S)` on every sample; the reconstructed walks and independent plain
/// walks agree in exit point, length (cells `0..40` plus a tail cell) and
/// number of returns to the origin.
pub fn loop_soup_round_trip(oracle: &Oracle, radius: f64, plan: &SamplingPlan) -> Result<CheckOutcome, OracleError> {
    const MAX_LEN: usize = 40;
    const MAX_RETURNS: usize = 10;
    let ball = Ball::centered(radius).expect("valid");
    let domain = FiniteDomain::from_ball(&ball);
    let law = oracle.srw_exit_law_exact(&domain, O)?;
    let slot: FxHashMap<LatticePoint, usize> = law.points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let nb = law.points.len();
    let summary = |walk: &Path| -> (usize, usize, usize) {
        let returns = walk.points()[1..].iter().filter(|&&p| p == O).count().min(MAX_RETURNS);
        (slot[&walk.last()], walk.len().min(MAX_LEN), returns)
    };
    let blocks = plan.run_blocks(
        || (),
        |_, rng, n| {
            let mut broken = 0u64;
            let mut rows = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let s = sample_srw_exit(O, &ball, rng).expect("inside");
                let lambda = loop_erase_fast(&s);
                let gamma = reconstruct_srw(&lambda, &domain, rng).expect("valid erased path");
                if loop_erase_fast(&gamma) != lambda {
                    broken += 1;
                }
                let plain = sample_srw_exit(O, &ball, rng).expect("inside");
                rows.push((summary(&gamma), summary(&plain)));
            }
            (broken, rows)
        },
    );
    let mut broken = 0u64;
    let mut exit = vec![0u64; nb];
    let (mut len_a, mut len_b) = (vec![0u64; MAX_LEN + 1], vec![0u64; MAX_LEN + 1]);
    let (mut ret_a, mut ret_b) = (vec![0u64; MAX_RETURNS + 1], vec![0u64; MAX_RETURNS + 1]);
    for (b, rows) in blocks {
        broken += b;
        for (g, p) in rows {
            exit[g.0] += 1;
            len_a[g.1] += 1;
            len_b[p.1] += 1;
            ret_a[g.2] += 1;
            ret_b[p.2] += 1;
        }
    }
    let te = chi_square_gof(&exit, &law.probabilities);
    let tl = chi_square_homogeneity(&len_a, &len_b);
    let tr = chi_square_homogeneity(&ret_a, &ret_b);
    let passed = broken == 0 && te.p_value > P_THRESHOLD && tl.p_value > P_THRESHOLD && tr.p_value > P_THRESHOLD;
    Ok(CheckOutcome::new(
        &format!("loop insertion on B({radius})"),
        passed,
        format!(
            "{broken} erasure mismatches; exit p = {:.4}, length p = {:.4}, returns p = {:.4}",
            te.p_value, tl.p_value, tr.p_value
        ),
    ))
}

/// Monte Carlo `Es(1)` against `5/6`.
pub fn es_one_monte_carlo(plan: &SamplingPlan) -> Result<CheckOutcome, ValidationError> {
    let r = estimate_es(1.0, plan)?;
    Ok(CheckOutcome::sigma("Es(1) Monte Carlo", &r, 5.0 / 6.0))
}

/// Monte Carlo `Es(2)`, `Es(1, 2)`, the mean length and the level-1
/// one-point value on `B(2)` against the exact reference.
pub fn radius_two_monte_carlo(reference: &RadiusTwoReference, plan: &SamplingPlan) -> Result<Vec<CheckOutcome>, ValidationError> {
    let run = crate::estimators::es_annulus_paired(&[1.0], 2.0, plan)?;
    let length = crate::estimators::estimate_length(2.0, &plan.offset(1))?;
    let one = estimate_one_point_direct(1, [0.5, 0.0, 0.0], &plan.offset(2))?;
    let factored = estimate_one_point_factored(1, [0.5, 0.0, 0.0], &plan.offset(3), &Oracle::default())?;
    Ok(vec![
        CheckOutcome::sigma("Es(2) vs exact", &run.es, reference.es),
        CheckOutcome::sigma("Es(1,2) vs exact", &run.annulus[0], reference.es_annulus),
        CheckOutcome::sigma("mean LERW length on B(2) vs exact", &length, reference.length_mean),
        CheckOutcome::sigma("one-point at level 1 vs exact", &one, reference.one_point),
        CheckOutcome::sigma("factored one-point at level 1 vs exact", &factored, reference.one_point),
    ])
}

/// Direct and factored one-point estimators at level `n` agree within
/// three combined standard errors.
pub fn one_point_identity(
    oracle: &Oracle,
    n: u32,
    x: [f64; 3],
    plan: &SamplingPlan,
) -> Result<(CheckOutcome, EstimatorResult, EstimatorResult), ValidationError> {
    let direct = estimate_one_point_direct(n, x, plan)?;
    let factored = estimate_one_point_factored(n, x, &plan.offset(1), oracle)?;
    let se = direct.stderr.hypot(factored.stderr);
    let z = (direct.estimate - factored.estimate) / se;
    let check = CheckOutcome::new(
        &format!("one-point identity at level {n}"),
        z.abs() <= SIGMA_TOLERANCE,
        format!(
            "direct {:.6} +- {:.6}, factored {:.6} +- {:.6} (z = {z:.2})",
            direct.estimate, direct.stderr, factored.estimate, factored.stderr
        ),
    );
    Ok((check, direct, factored))
}

/// Exact Green's functions against the continuum shape `(1 - |x|) / (R |x|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenAsymptotics {
    pub radii: Vec<u32>,
    pub norms: Vec<f64>,
    /// Fitted `a` in `G(0, x_n) ~ a (1 - |x|) / (2^n |x|)`.
    pub a: f64,
    /// Fitted `b` in `P^{x_n}(hit 0 before exit) ~ b (1 - |x|) / (2^n |x|)`.
    pub b: f64,
    /// `G / shape` per radius and point.
    pub green_ratio: Vec<Vec<f64>>,
    pub hitting_ratio: Vec<Vec<f64>>,
    /// Largest relative deviation from the fitted curve at each radius.
    pub green_deviation: Vec<f64>,
    pub hitting_deviation: Vec<f64>,
}

/// Solves `G_{B(R)}(0, .)` for each radius `R = 2^k` (one column each),
/// fits `a` and `b` by least squares on relative error over all radii and
/// the points `x_k` for `x = (t, 0, 0)`, `t` in `norms`.
pub fn green_asymptotics(oracle: &Oracle, exps: &[u32], norms: &[f64]) -> Result<GreenAsymptotics, OracleError> {
    let mut green_ratio = Vec::new();
    let mut hitting_ratio = Vec::new();
    for &k in exps {
        let ball = Ball::dyadic(k).map_err(|e| OracleError::InvalidPath(e.to_string()))?;
        let domain = FiniteDomain::from_ball(&ball);
        let col = oracle.green_column(&domain, O)?;
        let g00 = col[domain.index_of(O).expect("origin")];
        let r = (1u64 << k) as f64;
        let (mut gs, mut hs) = (Vec::new(), Vec::new());
        for &t in norms {
            let p = crate::lattice::nearest_scaled_point([t, 0.0, 0.0], k)
                .map_err(|e| OracleError::InvalidPath(e.to_string()))?;
            let g = col[domain.index_of(p).ok_or(OracleError::NotInDomain(p))?];
            let shape = (1.0 - t) / (r * t);
            gs.push(g / shape);
            hs.push(g / g00 / shape);
        }
        green_ratio.push(gs);
        hitting_ratio.push(hs);
    }
    // Minimizes sum (c / q - 1)^2 over c: c = sum(1 / q) / sum(1 / q^2).
    let fit = |ratios: &[Vec<f64>]| -> f64 {
        let num: f64 = ratios.iter().flatten().map(|q| 1.0 / q).sum();
        let den: f64 = ratios.iter().flatten().map(|q| 1.0 / (q * q)).sum();
        num / den
    };
    let deviation = |ratios: &[Vec<f64>], c: f64| -> Vec<f64> {
        ratios.iter().map(|qs| qs.iter().map(|q| (c / q - 1.0).abs()).fold(0.0, f64::max)).collect()
    };
    let a = fit(&green_ratio);
    let b = fit(&hitting_ratio);
    Ok(GreenAsymptotics {
        radii: exps.iter().map(|&k| 1u32 << k).collect(),
        norms: norms.to_vec(),
        a,
        b,
        green_deviation: deviation(&green_ratio, a),
        hitting_deviation: deviation(&hitting_ratio, b),
        green_ratio,
        hitting_ratio,
    })
}

/// At every point, the change of `ratio` between consecutive radii
/// shrinks as the radius grows.
fn steps_shrink(ratios: &[Vec<f64>]) -> bool {
    let steps: Vec<Vec<f64>> = ratios.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).collect()).collect();
    steps.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b < a))
}

impl GreenAsymptotics {
    /// Deviation below `tolerance` at the largest radius and smaller there
    /// than at the smallest radius; the scaled values settle at every point
    /// (consecutive changes shrink with the radius).
    pub fn check(&self, tolerance: f64) -> CheckOutcome {
        let last = |v: &[f64]| *v.last().expect("radii");
        let passed = last(&self.green_deviation) < tolerance
            && last(&self.hitting_deviation) < tolerance
            && last(&self.green_deviation) < self.green_deviation[0]
            && last(&self.hitting_deviation) < self.hitting_deviation[0]
            && steps_shrink(&self.green_ratio)
            && steps_shrink(&self.hitting_ratio);
        let fmt = |v: &[f64]| v.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ");
        CheckOutcome::new(
            "Green's function asymptotics",
            passed,
            format!(
                "a = {:.5}, b = {:.5}; radii {:?}: G deviation [{}], hitting deviation [{}], settling {}",
                self.a,
                self.b,
                self.radii,
                fmt(&self.green_deviation),
                fmt(&self.hitting_deviation),
                steps_shrink(&self.green_ratio) && steps_shrink(&self.hitting_ratio)
            ),
        )
    }
}

/// The exact-oracle suite: normalization on `B(2)` and `B(3)`, the reversal
/// identity, `Es(1)`, Green's matrices, the `B(2)` reference values and the
/// Green's function asymptotics on radii 16 to 64.
pub fn oracle_suite(oracle: &Oracle) -> Result<Vec<CheckOutcome>, ValidationError> {
    let reference = crate::estimators::radius_two_reference(oracle)?;
    Ok(vec![
        normalization(oracle, 2.0, None)?,
        normalization(oracle, 3.0, Some(B3_CUTOFF))?,
        reversal_identity(6),
        es_one_enumeration(),
        green_table_checks(oracle, 2.0)?,
        green_table_checks(oracle, 3.0)?,
        reference_consistency(&reference),
        green_asymptotics(oracle, &GREEN_EXPS, &GREEN_NORMS)?.check(GREEN_TOLERANCE),
    ])
}

/// Radii `2^k` of the Green's function asymptotics check.
pub const GREEN_EXPS: [u32; 3] = [4, 5, 6];
/// Values of `|x|` along the first axis.
pub const GREEN_NORMS: [f64; 5] = [0.25, 0.375, 0.5, 0.625, 0.75];
pub const GREEN_TOLERANCE: f64 = 0.1;

/// Depth at which the `B(3)` normalization closes open paths.
pub const B3_CUTOFF: usize = 11;

/// Prefix used by the domain Markov check on `B(3)`.
pub fn markov_prefix() -> Vec<LatticePoint> {
    vec![O, E1, LatticePoint::new(1, 1, 0)]
}

/// The Monte Carlo suite at `samples` per check (the LERW law uses ten
/// times as many).
pub fn monte_carlo_suite(oracle: &Oracle, master_seed: u64, samples: u64, workers: usize) -> Result<Vec<CheckOutcome>, ValidationError> {
    let plan = |k: u64, n: u64| SamplingPlan::new(master_seed, n).with_workers(workers).offset(k);
    let reference = crate::estimators::radius_two_reference(oracle)?;
    let mut out = vec![
        es_one_monte_carlo(&plan(0, samples))?,
        walk_exit_law(oracle, 2.0, &plan(1, samples))?,
        lerw_law_chi_square(oracle, &plan(2, 10 * samples))?,
        domain_markov(oracle, &markov_prefix(), 3, &plan(3, samples))?,
        loop_soup_round_trip(oracle, 2.0, &plan(4, samples))?,
        loop_soup_round_trip(oracle, 3.0, &plan(5, samples))?,
    ];
    out.extend(radius_two_monte_carlo(&reference, &plan(6, samples))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        assert!(reversal_identity(4).passed);
        assert!(es_one_enumeration().passed);
        let o = Oracle::default();
        assert!(green_table_checks(&o, 2.0).unwrap().passed);
        let one = normalization(&o, 1.0, None).unwrap();
        assert!(one.passed && one.detail.contains("(6 exit paths"), "{one}");
    }

    #[test]
    fn small_monte_carlo_checks_pass() {
        let o = Oracle::default();
        let plan = SamplingPlan::new(21, 20_000);
        for c in [
            walk_exit_law(&o, 2.0, &plan).unwrap(),
            domain_markov(&o, &markov_prefix(), 2, &plan).unwrap(),
            loop_soup_round_trip(&o, 2.0, &plan).unwrap(),
        ] {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn outcome_display() {
        let c = CheckOutcome::new("x", false, "detail".into());
        assert_eq!(c.to_string(), "FAIL x: detail");
    }
}
