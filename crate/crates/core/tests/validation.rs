use lerwlab::validation::{green_asymptotics, monte_carlo_suite, oracle_suite};
use lerwlab::Oracle;

#[test]
fn oracle_suite_passes() {
    for c in oracle_suite(&Oracle::default()).unwrap() {
        println!("{c}");
        assert!(c.passed, "{c}");
    }
}

#[test]
fn monte_carlo_suite_passes_at_small_size() {
    for c in monte_carlo_suite(&Oracle::default(), 71, 100_000, 2).unwrap() {
        println!("{c}");
        assert!(c.passed, "{c}");
    }
}

#[test]
fn green_function_settles_at_small_radii() {
    let g = green_asymptotics(&Oracle::with_cap(300_000), &[3, 4, 5], &[0.25, 0.5, 0.75]).unwrap();
    println!("{}", g.check(0.1));
    // Deviations shrink with the radius at every point.
    for dev in [&g.green_deviation, &g.hitting_deviation] {
        assert!(dev[2] < dev[0], "{dev:?}");
    }
    assert_eq!(g.radii, vec![8, 16, 32]);
}
