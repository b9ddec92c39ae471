use lerwlab::estimators::SamplingPlan;
use lerwlab::loop_erase::PathCode;
use lerwlab::stats::chi_square_gof;
use lerwlab::validation::{walk_exit_law, P_THRESHOLD};
use lerwlab::walk::{sample_conditioned_walk, HarmonicWeights};
use lerwlab::{Ball, FiniteDomain, LatticePoint, Oracle, RngStream};
use rustc_hash::FxHashMap;

const O: LatticePoint = LatticePoint::ORIGIN;

#[test]
fn exit_point_law_on_radius_two() {
    let c = walk_exit_law(&Oracle::default(), 2.0, &SamplingPlan::new(31, 1_000_000)).unwrap();
    println!("{c}");
    assert!(c.passed, "{c}");
}

#[test]
fn conditioned_first_step() {
    let ball = Ball::centered(2.0).unwrap();
    let d = FiniteDomain::from_ball(&ball);
    let h = Oracle::default().hitting_table(&d, O).unwrap();
    let start = LatticePoint::new(1, 0, 0);
    let probs: Vec<f64> = start.neighbors().iter().map(|&w| h.weight(w) / (6.0 * h.weight(start))).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let mut counts = vec![0u64; 6];
    let mut rng = RngStream::new(32, 0);
    for _ in 0..200_000 {
        let x = sample_conditioned_walk(start, &ball, &h, &mut rng).unwrap();
        let pts = x.points();
        assert_eq!(x.last(), O);
        assert!(pts.iter().all(|&p| ball.contains(p)));
        assert!(pts[..pts.len() - 1].iter().all(|&p| p != O));
        counts[start.direction_to(pts[1]).unwrap()] += 1;
    }
    let t = chi_square_gof(&counts, &probs);
    assert!(t.p_value > P_THRESHOLD, "{t:?}");
}

/// SRW paths from `start` that first hit the origin at step `<= max_len`
/// without leaving `domain`, each with weight `6^-len`.
struct ShortPaths {
    max_len: usize,
    threshold: f64,
    cells: FxHashMap<PathCode, usize>,
    weights: Vec<f64>,
    small: f64,
}

impl ShortPaths {
    fn walk(&mut self, d: &FiniteDomain, path: &mut Vec<LatticePoint>, weight: f64) {
        let cur = *path.last().unwrap();
        if cur == O {
            if weight >= self.threshold {
                self.cells.insert(PathCode::from_points(path).unwrap(), self.weights.len());
                self.weights.push(weight);
            } else {
                self.small += weight;
            }
            return;
        }
        let left = self.max_len + 1 - path.len();
        for w in cur.neighbors() {
            if d.contains(w) && (w.l1_dist(O) as usize) < left {
                path.push(w);
                self.walk(d, path, weight / 6.0);
                path.pop();
            }
        }
    }
}

/// Law of the Doob-transformed walk against the conditional law of SRW
/// given `tau_0 < T`: every path of at most 12 steps is its own cell
/// (rare ones pooled), longer paths form a tail cell whose mass is
/// `1 - (enumerated mass) / h(start)`.
fn doob_law(radius: f64, start: LatticePoint, samples: u64, seed: u64) {
    const MAX_LEN: usize = 12;
    let ball = Ball::centered(radius).unwrap();
    let d = FiniteDomain::from_ball(&ball);
    let h = Oracle::default().hitting_table(&d, O).unwrap();
    let hs = h.weight(start);
    let mut sp = ShortPaths {
        max_len: MAX_LEN,
        threshold: 5.0 * hs / samples as f64,
        cells: FxHashMap::default(),
        weights: Vec::new(),
        small: 0.0,
    };
    sp.walk(&d, &mut vec![start], 1.0);
    let k = sp.weights.len();
    let enumerated: f64 = sp.weights.iter().sum::<f64>() + sp.small;
    let tail = 1.0 - enumerated / hs;
    println!("B({radius}) from {start}: {k} cells, pooled short mass {:.3e}, tail bound {tail:.4}", sp.small / hs);
    assert!(tail > 0.0 && tail < 1.0);
    let mut probs: Vec<f64> = sp.weights.iter().map(|w| w / hs).collect();
    probs.push(sp.small / hs);
    probs.push(tail);
    let mut counts = vec![0u64; k + 2];
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..samples {
        let x = sample_conditioned_walk(start, &ball, &h, &mut rng).unwrap();
        let cell = if x.len() > MAX_LEN {
            k + 1
        } else {
            sp.cells.get(&PathCode::from_points(x.points()).unwrap()).copied().unwrap_or(k)
        };
        counts[cell] += 1;
    }
    let t = chi_square_gof(&counts, &probs);
    println!("chi2 = {:.1}, dof = {}, p = {:.4}", t.statistic, t.dof, t.p_value);
    assert!(t.p_value > P_THRESHOLD, "{t:?}");
}

#[test]
fn doob_transform_law_radius_two() {
    doob_law(2.0, LatticePoint::new(1, 0, 0), 1_000_000, 33);
}

#[test]
fn doob_transform_law_radius_four() {
    doob_law(4.0, LatticePoint::new(2, 0, 0), 1_000_000, 34);
}
