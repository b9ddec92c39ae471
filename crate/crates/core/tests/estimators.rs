use lerwlab::estimators::*;
use lerwlab::Oracle;

// Exact values on B(2), from the enumeration checked in tests/exact_oracle.rs.
const ES_TWO: f64 = 0.570116224004;
const ES_ONE_TWO: f64 = 0.720837678052;
const LENGTH_TWO: f64 = 3.422154089941;
const ONE_POINT_LEVEL_ONE: f64 = 0.190387643457;

fn within(r: &EstimatorResult, exact: f64) {
    let z = (r.estimate - exact) / r.stderr;
    println!("{}: {:.6} ± {:.6} vs {exact:.6} (z = {z:.2})", r.label, r.estimate, r.stderr);
    assert!(z.abs() < 3.0, "{r:?}");
}

fn combined(a: &EstimatorResult, b: &EstimatorResult) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

#[test]
fn es_radius_one() {
    within(&estimate_es(1.0, &SamplingPlan::new(1, 1_000_000)).unwrap(), 5.0 / 6.0);
}

#[test]
fn radius_two_against_exact_values() {
    let plan = SamplingPlan::new(2, 1_000_000);
    let run = es_and_length(2.0, &plan).unwrap();
    within(&run.es, ES_TWO);
    within(&run.length, LENGTH_TWO);
    assert!(run.lengths.iter().all(|&m| m >= 2));
    within(&estimate_es_annulus(1.0, 2.0, &plan.offset(1)).unwrap(), ES_ONE_TWO);
}

#[test]
fn length_at_radius_one_is_one() {
    let r = estimate_length(1.0, &SamplingPlan::new(3, 10_000)).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.param("variance"), Some(0.0));
    assert_eq!(r.param("q95"), Some(1.0));
}

#[test]
fn es_decreases_along_dyadic_radii() {
    let mut prev: Option<EstimatorResult> = None;
    for n in 2..=8u32 {
        let samples = if n == 8 { 2_000 } else { 5_000 };
        let r = estimate_es((1u64 << n) as f64, &SamplingPlan::new(4, samples).offset(n as u64)).unwrap();
        if let Some(p) = &prev {
            println!("Es(2^{n}) = {:.4} after {:.4}", r.estimate, p.estimate);
            assert!(p.estimate >= r.estimate - 3.0 * combined(p, &r), "n = {n}");
        }
        prev = Some(r);
    }
}

#[test]
fn annulus_event_contains_full_event() {
    // B(1.99) and B(2) have the same sites, so at m = 1.99 only the
    // endpoint of the erased path has to be missed.
    let run = es_annulus_paired(&[1.0, 1.5, 1.99], 2.0, &SamplingPlan::new(5, 200_000)).unwrap();
    assert_eq!(run.dominance_violations, 0);
    for a in &run.annulus {
        assert!(a.estimate >= run.es.estimate - 3.0 * combined(a, &run.es), "{a:?}");
    }
    assert!(es_annulus_paired(&[2.0], 2.0, &SamplingPlan::new(5, 10)).is_err());
}

#[test]
fn bn_against_exact_ratio() {
    let r = estimate_bn(1.0, &SamplingPlan::new(6, 1_000_000)).unwrap();
    within(&r, ES_TWO / (5.0 / 6.0));
    let plan = SamplingPlan::new(7, 200_000);
    let a = estimate_es(4.0, &plan).unwrap();
    let b = estimate_es(4.0, &plan.offset(1)).unwrap();
    within(&ratio_result(&a, &b, "same radius").unwrap(), 1.0);
}

#[test]
fn one_point_level_one() {
    let plan = SamplingPlan::new(8, 1_000_000);
    let x = [0.5, 0.0, 0.0];
    within(&estimate_one_point_direct(1, x, &plan).unwrap(), ONE_POINT_LEVEL_ONE);
    let f = estimate_one_point_factored(1, x, &plan.offset(1), &Oracle::default()).unwrap();
    within(&f, ONE_POINT_LEVEL_ONE);
    assert!(f.param("green").unwrap() > 0.0);
}

#[test]
fn one_point_degenerate_points() {
    let plan = SamplingPlan::new(9, 1_000);
    assert!(matches!(
        estimate_one_point_direct(1, [0.1, 0.0, 0.0], &plan),
        Err(EstimatorError::DegeneratePoint(1))
    ));
    assert!(estimate_one_point_factored(1, [0.1, 0.0, 0.0], &plan, &Oracle::default()).is_err());
    // 2 * 0.99 rounds to (2, 0, 0), which is outside B(2).
    let r = estimate_one_point_direct(1, [0.99, 0.0, 0.0], &plan).unwrap();
    assert_eq!(r.estimate, 0.0);
    assert!(estimate_one_point_factored(FACTORED_MAX_EXP + 1, [0.5, 0.0, 0.0], &plan, &Oracle::default()).is_err());
}

#[test]
fn one_point_level_ratios() {
    let x = [0.5, 0.0, 0.0];
    let oracle = Oracle::with_cap(2_000_000);
    let plan = SamplingPlan::new(10, 20_000);
    let mut levels: Vec<EstimatorResult> =
        (4..=6).map(|n| estimate_one_point_factored(n, x, &plan.offset(n as u64), &oracle).unwrap()).collect();
    levels.push(estimate_one_point_direct(7, x, &SamplingPlan::new(11, 300_000)).unwrap());
    for (k, w) in levels.windows(2).enumerate() {
        let r = ratio_result(&w[1], &w[0], "a ratio").unwrap();
        println!("a_{}/a_{} = {:.4} ± {:.4}", k + 5, k + 4, r.estimate, r.stderr);
        assert!((0.2..=0.55).contains(&r.estimate), "{r:?}");
    }
}

#[test]
fn scaling_table_at_radius_one() {
    let rows = scaling_table(&[0.0], &SamplingPlan::new(12, 1_000_000), 0.38).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert!((row.es - 5.0 / 6.0).abs() < 3.0 * row.es_stderr);
    assert_eq!(row.length_mean, 1.0);
    assert_eq!(row.b_n, None);
    assert_eq!(row.es_normalized, row.es);
}

#[test]
fn worker_count_does_not_change_results() {
    let plan = SamplingPlan::new(13, 5_500);
    let one = es_and_length(8.0, &plan.with_workers(1)).unwrap();
    let three = es_and_length(8.0, &plan.with_workers(3)).unwrap();
    assert_eq!(one.es, three.es);
    assert_eq!(one.lengths, three.lengths);
}

#[test]
fn merged_blocks_match_concatenated_sample() {
    let plan = SamplingPlan::new(14, 3_500);
    let run = es_and_length(4.0, &plan).unwrap();
    let mut t = Tally::default();
    run.lengths.iter().for_each(|&m| t.push(m as f64));
    let mean = run.lengths.iter().sum::<u64>() as f64 / run.lengths.len() as f64;
    assert!((t.mean() - mean).abs() < 1e-12);
    assert!((run.length.estimate - mean).abs() < 1e-12);
    assert_eq!(run.length.n_samples, 3_500);
    assert!((0.0..=1.0).contains(&run.es.estimate));
}
