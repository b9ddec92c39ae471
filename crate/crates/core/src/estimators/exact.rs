use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::exact_oracle::{ExitLeaf, FiniteDomain, Oracle, OracleError, SapEnumerator, SapVisitor};
use crate::lattice::{Ball, LatticePoint};
use crate::loop_erase::PathCode;

/// Exact values on `B(2)` from a full enumeration of its loop-erased exit
/// paths. Used as the reference for the Monte Carlo cross-checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusTwoReference {
    /// `Es(1) = 5/6`.
    pub es_one: f64,
    pub es: f64,
    /// `Es(1, 2)`.
    pub es_annulus: f64,
    pub length_mean: f64,
    /// `P(M = k)` indexed by `k`.
    pub length_distribution: Vec<f64>,
    /// `P((1, 0, 0) on the erased path)`, the one-point function at
    /// level 1 for `x = (1/2, 0, 0)`.
    pub one_point: f64,
    pub total_probability: f64,
    pub paths: u64,
}

#[derive(Default)]
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

struct Collector<'a> {
    oracle: &'a Oracle,
    domain: &'a FiniteDomain,
    inner: Ball,
    segment_cache: FxHashMap<(LatticePoint, PathCode), f64>,
    error: Option<OracleError>,
    total: Compensated,
    es: Compensated,
    annulus: Compensated,
    length: Compensated,
    one_point: Compensated,
    lengths: Vec<Compensated>,
    paths: u64,
}

impl Collector<'_> {
    fn segment_escape(&mut self, segment: &[LatticePoint]) -> f64 {
        let key = (segment[0], PathCode::from_points(segment).expect("short path"));
        if let Some(&v) = self.segment_cache.get(&key) {
            return v;
        }
        let v = match self.oracle.escape_table(self.domain, segment) {
            Ok(t) => t.escape_from(LatticePoint::ORIGIN),
            Err(e) => {
                self.error.get_or_insert(e);
                f64::NAN
            }
        };
        self.segment_cache.insert(key, v);
        v
    }
}

impl SapVisitor for Collector<'_> {
    fn exit(&mut self, leaf: &ExitLeaf<'_>) {
        let q = leaf.probability();
        let path = leaf.path();
        let m = leaf.len();
        self.paths += 1;
        self.total.add(q);
        self.es.add(q * leaf.escape_from(LatticePoint::ORIGIN));
        self.length.add(q * m as f64);
        if self.lengths.len() <= m {
            self.lengths.resize_with(m + 1, Compensated::default);
        }
        self.lengths[m].add(q);
        let on_path = path.iter().filter(|p| p.norm_sq() == 1).count();
        self.one_point.add(q * on_path as f64);
        let s = (0..=m).rev().find(|&t| self.inner.is_on_outer_boundary(path[t])).expect("path leaves B(1)");
        let esc = self.segment_escape(&path[s..]);
        self.annulus.add(q * esc);
    }
}

/// Sums over the loop-erased exit paths of `B(2)` whose first step is
/// `+x` (about 1.1e7 of them) and uses the lattice symmetry for the rest.
/// The one-point value is `P(e on the path)` for a unit vector `e`, which is
/// `E[#unit vectors on the path] / 6`.
pub fn radius_two_reference(oracle: &Oracle) -> Result<RadiusTwoReference, OracleError> {
    let domain = FiniteDomain::from_ball(&Ball::centered(2.0).expect("valid radius"));
    let mut en = SapEnumerator::new(oracle, &domain)?;
    let mut c = Collector {
        oracle,
        domain: &domain,
        inner: Ball::centered(1.0).expect("valid radius"),
        segment_cache: FxHashMap::default(),
        error: None,
        total: Compensated::default(),
        es: Compensated::default(),
        annulus: Compensated::default(),
        length: Compensated::default(),
        one_point: Compensated::default(),
        lengths: Vec::new(),
        paths: 0,
    };
    en.run(&[LatticePoint::ORIGIN, LatticePoint::new(1, 0, 0)], &mut c)?;
    if let Some(e) = c.error {
        return Err(e);
    }
    Ok(RadiusTwoReference {
        es_one: 5.0 / 6.0,
        es: 6.0 * c.es.value(),
        es_annulus: 6.0 * c.annulus.value(),
        length_mean: 6.0 * c.length.value(),
        length_distribution: c.lengths.iter().map(|q| 6.0 * q.value()).collect(),
        one_point: c.one_point.value(),
        total_probability: 6.0 * c.total.value(),
        paths: 6 * c.paths,
    })
}
