use lerwlab::estimators::SamplingPlan;
use lerwlab::loop_soup::{loops_at_vertex, reconstruct_srw};
use lerwlab::validation::loop_soup_round_trip;
use lerwlab::walk::sample_srw_exit;
use lerwlab::loop_erase::loop_erase_fast;
use lerwlab::{Ball, FiniteDomain, LatticePoint, Oracle, RngStream};

const O: LatticePoint = LatticePoint::ORIGIN;

#[test]
fn at_least_one_excursion_at_origin() {
    let d = FiniteDomain::from_ball(&Ball::centered(2.0).unwrap());
    let g = Oracle::default().green_diagonal(&d, O).unwrap();
    let p = 1.0 - 1.0 / g;
    let n = 1_000_000u64;
    let mut rng = RngStream::new(51, 0);
    let hits = (0..n).filter(|_| loops_at_vertex(O, &d, &mut rng).unwrap().len() > 0).count();
    let est = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    println!("P(excursion) = {est:.5} vs {p:.5} (z = {:.2})", (est - p) / se);
    assert!((est - p).abs() < 3.0 * se);
}

#[test]
fn single_site_domain_reconstructs_itself() {
    let d = FiniteDomain::from_sites(vec![O]).unwrap();
    let ball = Ball::centered(1.0).unwrap();
    let mut rng = RngStream::new(52, 0);
    for _ in 0..100 {
        let lerw = loop_erase_fast(&sample_srw_exit(O, &ball, &mut rng).unwrap());
        let walk = reconstruct_srw(&lerw, &d, &mut rng).unwrap();
        assert_eq!(walk.points(), lerw.points());
    }
}

#[test]
fn round_trip_on_small_balls() {
    let o = Oracle::default();
    for (radius, seed) in [(2.0, 53), (3.0, 54)] {
        let c = loop_soup_round_trip(&o, radius, &SamplingPlan::new(seed, 200_000)).unwrap();
        println!("{c}");
        assert!(c.passed, "{c}");
    }
}
