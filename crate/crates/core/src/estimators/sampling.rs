use std::collections::BTreeMap;

use super::fit::{ratio_result, scaling_rows, ScalingRow};
use super::plan::{SamplingPlan, Tally};
use super::{point_param, EstimatorError, EstimatorResult};
use crate::exact_oracle::{FiniteDomain, Oracle};
use crate::lattice::{nearest_scaled_point, Ball, LatticePoint};
use crate::loop_erase::{GridSiteIndex, LoopEraser};
use crate::rng::RngStream;
use crate::walk::{last_visit_index, sample_conditioned_walk, stream_srw_exit, stream_srw_exit_until};

/// Largest level accepted by [`estimate_one_point_factored`].
pub const FACTORED_MAX_EXP: u32 = 6;

const O: LatticePoint = LatticePoint::ORIGIN;

struct Workspace {
    ball: Ball,
    eraser: LoopEraser<GridSiteIndex>,
}

impl Workspace {
    fn new(ball: Ball) -> Self {
        Workspace { eraser: LoopEraser::for_ball(&ball), ball }
    }

    /// Loop-erases SRW from the origin to its exit from the ball into the
    /// eraser and returns the erased length.
    fn erase_from_origin(&mut self, rng: &mut RngStream) -> u64 {
        self.eraser.reset();
        let eraser = &mut self.eraser;
        stream_srw_exit(O, &self.ball, rng, |p| eraser.push(p)).expect("origin is inside");
        self.eraser.len() as u64
    }

    /// Whether SRW from `start` leaves the ball with `S[1, T]` missing the
    /// erased path.
    fn second_walk_misses(&self, start: LatticePoint, rng: &mut RngStream) -> bool {
        let mut first = true;
        stream_srw_exit_until(start, &self.ball, rng, |p| {
            if first {
                first = false;
                return true;
            }
            !self.eraser.contains(p)
        })
        .expect("start is inside")
    }
}

fn check_radius(radius: f64) -> Result<Ball, EstimatorError> {
    if !(radius >= 1.0) || !radius.is_finite() {
        return Err(EstimatorError::InvalidParameter(format!("radius must be at least 1, got {radius}")));
    }
    Ok(Ball::centered(radius)?)
}

/// Escape indicator and erased length of each sample.
#[derive(Clone, Debug)]
pub struct EsRun {
    pub es: EstimatorResult,
    pub length: EstimatorResult,
    pub lengths: Vec<u64>,
}

/// `Es(radius)` together with the LERW length of the same samples.
pub fn es_and_length(radius: f64, plan: &SamplingPlan) -> Result<EsRun, EstimatorError> {
    let ball = check_radius(radius)?;
    let blocks = plan.run_blocks(
        || Workspace::new(ball),
        |ws, rng, n| {
            let mut escapes = 0u64;
            let mut lengths = Vec::with_capacity(n as usize);
            for _ in 0..n {
                lengths.push(ws.erase_from_origin(rng));
                if ws.second_walk_misses(O, rng) {
                    escapes += 1;
                }
            }
            (escapes, lengths)
        },
    );
    let escapes = blocks.iter().map(|b| b.0).sum();
    let lengths: Vec<u64> = blocks.into_iter().flat_map(|b| b.1).collect();
    let es = EstimatorResult::bernoulli("es", escapes, plan.samples, plan.manifest()).with_param("radius", radius);
    let length = length_result(&lengths, radius, plan);
    Ok(EsRun { es, length, lengths })
}

/// Fraction of pairs with `LE(S1[0, T]) ∩ S2[1, T] = ∅`.
pub fn estimate_es(radius: f64, plan: &SamplingPlan) -> Result<EstimatorResult, EstimatorError> {
    Ok(es_and_length(radius, plan)?.es)
}

/// Moments and quantiles of the erased length at `radius`.
pub fn estimate_length(radius: f64, plan: &SamplingPlan) -> Result<EstimatorResult, EstimatorError> {
    let ball = check_radius(radius)?;
    let lengths: Vec<u64> = plan
        .run_blocks(
            || Workspace::new(ball),
            |ws, rng, n| (0..n).map(|_| ws.erase_from_origin(rng)).collect::<Vec<_>>(),
        )
        .into_iter()
        .flatten()
        .collect();
    Ok(length_result(&lengths, radius, plan))
}

fn length_result(lengths: &[u64], radius: f64, plan: &SamplingPlan) -> EstimatorResult {
    let mut t = Tally::default();
    lengths.iter().for_each(|&m| t.push(m as f64));
    let mut r = EstimatorResult {
        label: "length".into(),
        estimate: if t.n == 0 { 0.0 } else { t.mean() },
        stderr: t.stderr(),
        n_samples: t.n,
        params: summarize_lengths(lengths),
        seed_manifest: plan.manifest(),
        convention: super::CONVENTION.into(),
    };
    r.params.insert("radius".into(), radius);
    r
}

/// Mean, variance, extremes and the 5/25/50/75/95% quantiles (nearest rank).
pub fn summarize_lengths(lengths: &[u64]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if lengths.is_empty() {
        return out;
    }
    let mut t = Tally::default();
    lengths.iter().for_each(|&m| t.push(m as f64));
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let q = |p: f64| {
        let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[rank - 1] as f64
    };
    out.insert("mean".into(), t.mean());
    out.insert("variance".into(), t.variance());
    out.insert("min".into(), sorted[0] as f64);
    out.insert("max".into(), sorted[sorted.len() - 1] as f64);
    for (name, p) in [("q05", 0.05), ("q25", 0.25), ("q50", 0.5), ("q75", 0.75), ("q95", 0.95)] {
        out.insert(name.into(), q(p));
    }
    out
}

/// `Es(radius)` and `Es(m, radius)` for several `m` from the same pairs.
#[derive(Clone, Debug)]
pub struct AnnulusRun {
    pub es: EstimatorResult,
    pub annulus: Vec<EstimatorResult>,
    /// Samples where the full event held but a truncated one failed
    /// (always zero: the truncated event is larger).
    pub dominance_violations: u64,
}

/// Runs `S2` to its exit every time and records the largest erased index
/// it touches, so that every `m` is decided on the same pair of walks.
pub fn es_annulus_paired(ms: &[f64], n: f64, plan: &SamplingPlan) -> Result<AnnulusRun, EstimatorError> {
    let ball = check_radius(n)?;
    let inner: Vec<Ball> = ms
        .iter()
        .map(|&m| {
            if !(m >= 1.0 && m < n) {
                return Err(EstimatorError::InvalidParameter(format!("need 1 <= m < n, got m = {m}, n = {n}")));
            }
            Ok(Ball::centered(m)?)
        })
        .collect::<Result<_, _>>()?;
    let k = ms.len();
    let blocks = plan.run_blocks(
        || Workspace::new(ball),
        |ws, rng, count| {
            let mut full = 0u64;
            let mut part = vec![0u64; k];
            let mut violations = 0u64;
            for _ in 0..count {
                ws.erase_from_origin(rng);
                let path = ws.eraser.current();
                let u = path.len() - 1;
                let starts: Vec<usize> = inner
                    .iter()
                    .map(|b| last_visit_index(path, u, |p| b.is_on_outer_boundary(p)).expect("path crosses"))
                    .collect();
                let mut max_hit: Option<usize> = None;
                let mut first = true;
                stream_srw_exit(O, &ws.ball, rng, |p| {
                    if first {
                        first = false;
                        return;
                    }
                    if let Some(i) = ws.eraser.position(p) {
                        max_hit = Some(max_hit.map_or(i, |h| h.max(i)));
                    }
                })
                .expect("origin is inside");
                let full_ok = max_hit.is_none();
                full += full_ok as u64;
                for (j, &s) in starts.iter().enumerate() {
                    let ok = max_hit.map_or(true, |h| h < s);
                    part[j] += ok as u64;
                    violations += (full_ok && !ok) as u64;
                }
            }
            (full, part, violations)
        },
    );
    let full: u64 = blocks.iter().map(|b| b.0).sum();
    let violations = blocks.iter().map(|b| b.2).sum();
    let annulus = (0..k)
        .map(|j| {
            let hits = blocks.iter().map(|b| b.1[j]).sum();
            EstimatorResult::bernoulli("es_annulus", hits, plan.samples, plan.manifest())
                .with_param("m", ms[j])
                .with_param("n", n)
        })
        .collect();
    let es = EstimatorResult::bernoulli("es", full, plan.samples, plan.manifest()).with_param("radius", n);
    Ok(AnnulusRun { es, annulus, dominance_violations: violations })
}

/// `Es(m, n)`: only the erased path after its last visit to the outer
/// boundary of `B(m)` has to be missed.
pub fn estimate_es_annulus(m: f64, n: f64, plan: &SamplingPlan) -> Result<EstimatorResult, EstimatorError> {
    Ok(es_annulus_paired(&[m], n, plan)?.annulus.remove(0))
}

/// `b_n = Es(2^n) / Es(2^{n-1})` from independent runs.
pub fn estimate_bn(n: f64, plan: &SamplingPlan) -> Result<EstimatorResult, EstimatorError> {
    let num = estimate_es(2f64.powf(n), plan)?;
    let den = estimate_es(2f64.powf(n - 1.0), &plan.offset(1))?;
    let mut r = ratio_result(&num, &den, "b_n")?;
    r.params.insert("n".into(), n);
    r.seed_manifest.stream_end = plan.offset(1).manifest().stream_end;
    Ok(r)
}

fn scaled_point(n: u32, x: [f64; 3]) -> Result<LatticePoint, EstimatorError> {
    let p = nearest_scaled_point(x, n)?;
    if p == O {
        return Err(EstimatorError::DegeneratePoint(n));
    }
    Ok(p)
}

/// Fraction of samples with `x_n` on `LE(S[0, T_{2^n}])`.
pub fn estimate_one_point_direct(n: u32, x: [f64; 3], plan: &SamplingPlan) -> Result<EstimatorResult, EstimatorError> {
    let xn = scaled_point(n, x)?;
    let ball = Ball::dyadic(n)?;
    if !ball.contains(xn) {
        log::warn!("x_n = {xn} lies outside B(2^{n}); the one-point probability is 0");
        let r = EstimatorResult::bernoulli("one_point", 0, plan.samples, plan.manifest()).with_param("n", n as f64);
        return Ok(point_param(r, xn));
    }
    let hits: u64 = plan
        .run_blocks(
            || Workspace::new(ball),
            |ws, rng, count| {
                (0..count)
                    .filter(|_| {
                        ws.erase_from_origin(rng);
                        ws.eraser.contains(xn)
                    })
                    .count() as u64
            },
        )
        .into_iter()
        .sum();
    let r = EstimatorResult::bernoulli("one_point", hits, plan.samples, plan.manifest()).with_param("n", n as f64);
    Ok(point_param(r, xn))
}

/// `a_{n,x} = G_{B(2^n)}(0, x_n) P(LE(X[0, tau_0]) ∩ Y[1, T] = ∅)` with the
/// Green's function solved exactly and the probability sampled: `X` is SRW
/// from `x_n` conditioned to hit the origin before leaving the ball, `Y` an
/// independent SRW from `x_n`.
pub fn estimate_one_point_factored(
    n: u32,
    x: [f64; 3],
    plan: &SamplingPlan,
    oracle: &Oracle,
) -> Result<EstimatorResult, EstimatorError> {
    if n > FACTORED_MAX_EXP {
        return Err(EstimatorError::InvalidParameter(format!(
            "factored estimator supports n <= {FACTORED_MAX_EXP}, got {n}"
        )));
    }
    let xn = scaled_point(n, x)?;
    let ball = Ball::dyadic(n)?;
    if !ball.contains(xn) {
        log::warn!("x_n = {xn} lies outside B(2^{n}); the one-point probability is 0");
        let r = EstimatorResult::bernoulli("one_point_factored", 0, plan.samples, plan.manifest())
            .with_param("n", n as f64);
        return Ok(point_param(r, xn));
    }
    let domain = FiniteDomain::from_ball(&ball);
    let h = oracle.hitting_table(&domain, O)?;
    let g = oracle.green_column(&domain, O)?[domain.index_of(xn).expect("inside")];
    let misses: u64 = plan
        .run_blocks(
            || Workspace::new(ball),
            |ws, rng, count| {
                let mut ok = 0u64;
                for _ in 0..count {
                    let walk = sample_conditioned_walk(xn, &ball, &h, rng).expect("h(x_n) > 0");
                    ws.eraser.reset();
                    for &p in walk.points() {
                        ws.eraser.push(p);
                    }
                    ok += ws.second_walk_misses(xn, rng) as u64;
                }
                ok
            },
        )
        .into_iter()
        .sum();
    let q = EstimatorResult::bernoulli("one_point_factored", misses, plan.samples, plan.manifest());
    let r = EstimatorResult { estimate: g * q.estimate, stderr: g * q.stderr, ..q.clone() }
        .with_param("n", n as f64)
        .with_param("green", g)
        .with_param("non_intersection", q.estimate)
        .with_param("non_intersection_stderr", q.stderr);
    Ok(point_param(r, xn))
}

/// Direct one-point estimates at each level, each on its own stream range.
pub fn one_point_ratios(
    levels: &[u32],
    x: [f64; 3],
    plan: &SamplingPlan,
) -> Result<Vec<EstimatorResult>, EstimatorError> {
    levels
        .iter()
        .enumerate()
        .map(|(k, &n)| estimate_one_point_direct(n, x, &plan.offset(k as u64)))
        .collect()
}

/// Runs `Es` and length at radius `2^n` for each `n` (each on its own
/// stream range) and builds the normalized rows.
pub fn scaling_table(exps: &[f64], plan: &SamplingPlan, alpha: f64) -> Result<Vec<ScalingRow>, EstimatorError> {
    let runs = exps
        .iter()
        .enumerate()
        .map(|(k, &n)| es_and_length(2f64.powf(n), &plan.offset(k as u64)).map(|r| (n, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<(f64, &EstimatorResult, &EstimatorResult)> =
        runs.iter().map(|(n, r)| (*n, &r.es, &r.length)).collect();
    Ok(scaling_rows(&refs, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_one_is_five_sixths() {
        let r = estimate_es(1.0, &SamplingPlan::new(11, 60_000)).unwrap();
        assert!((r.estimate - 5.0 / 6.0).abs() < 4.0 * r.stderr, "{r:?}");
        let l = estimate_length(1.0, &SamplingPlan::new(11, 1000)).unwrap();
        assert_eq!(l.estimate, 1.0);
        assert_eq!(l.param("variance"), Some(0.0));
    }

    #[test]
    fn invalid_inputs() {
        let p = SamplingPlan::new(1, 10);
        assert!(estimate_es(0.5, &p).is_err());
        assert!(estimate_es(f64::NAN, &p).is_err());
        assert!(estimate_es_annulus(4.0, 4.0, &p).is_err());
        assert!(matches!(
            estimate_one_point_direct(2, [0.01, 0.0, 0.0], &p),
            Err(EstimatorError::DegeneratePoint(2))
        ));
        assert!(estimate_one_point_factored(7, [0.5, 0.0, 0.0], &p, &Oracle::default()).is_err());
    }

    #[test]
    fn point_outside_ball_gives_zero() {
        // 4 * 0.99 rounds to (4, 0, 0), on the boundary of B(4).
        let r = estimate_one_point_direct(2, [0.99, 0.0, 0.0], &SamplingPlan::new(1, 100)).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.param("x_n.x"), Some(4.0));
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let a = es_and_length(8.0, &SamplingPlan::new(3, 3000)).unwrap();
        let b = es_and_length(8.0, &SamplingPlan::new(3, 3000).with_workers(2)).unwrap();
        assert_eq!(a.es, b.es);
        assert_eq!(a.lengths, b.lengths);
    }

    #[test]
    fn annulus_dominates_full_event() {
        let run = es_annulus_paired(&[1.0, 2.0, 3.9], 4.0, &SamplingPlan::new(9, 20_000)).unwrap();
        assert_eq!(run.dominance_violations, 0);
        for r in &run.annulus {
            assert!(r.estimate >= run.es.estimate);
        }
        assert!(run.annulus[2].estimate >= run.annulus[0].estimate);
    }

    #[test]
    fn quantiles() {
        let s = summarize_lengths(&[5, 1, 4, 2, 3]);
        assert_eq!(s["q50"], 3.0);
        assert_eq!(s["q05"], 1.0);
        assert_eq!(s["q95"], 5.0);
        assert_eq!(s["mean"], 3.0);
        assert_eq!(s["variance"], 2.5);
    }
}
