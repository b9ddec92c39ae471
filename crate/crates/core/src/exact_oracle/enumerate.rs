//! Depth-first enumeration of self-avoiding paths with their exact
//! loop-erased-walk probabilities.
//!
//! Along a branch `eta[0..j]` the enumerator keeps `G_{A}` and the exit
//! vector `e_A = P^.(leave D before hitting eta)` for `A = D \ eta[0..j]`.
//! Extending the path by one site removes it from `A`, which is a rank-one
//! downdate `G' = G - G(., v) G(v, .) / G(v, v)` instead of a fresh solve.

use super::domain::{FiniteDomain, NO_SITE};
use super::{Oracle, OracleError};
use crate::lattice::LatticePoint;

/// Domains above this size are refused (each level stores an `n x n` table).
pub const ENUMERATION_SITE_LIMIT: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Descend {
    Continue,
    Prune,
}

pub trait SapVisitor {
    /// Called on every path that has not yet left the domain. Returning
    /// [`Descend::Prune`] skips all of its extensions.
    fn interior(&mut self, _node: &InteriorNode<'_>) -> Descend {
        Descend::Continue
    }

    /// Called on every path whose last point is outside the domain.
    fn exit(&mut self, leaf: &ExitLeaf<'_>);
}

#[derive(Clone, Debug, Default)]
struct Level {
    g: Vec<f64>,
    e: Vec<f64>,
    active: Vec<u32>,
}

/// View of `G_A` and `e_A` on `A = D \ path[..len]`.
#[derive(Clone, Copy)]
struct LevelView<'a> {
    domain: &'a FiniteDomain,
    level: &'a Level,
    in_path: &'a [bool],
}

impl LevelView<'_> {
    fn index(&self, p: LatticePoint) -> Option<usize> {
        self.domain.index_of(p).filter(|&i| !self.in_path[i])
    }

    fn green(&self, x: LatticePoint, y: LatticePoint) -> f64 {
        let n = self.domain.len();
        match (self.index(x), self.index(y)) {
            (Some(i), Some(j)) => self.level.g[i * n + j],
            _ => 0.0,
        }
    }

    fn exit_probability(&self, x: LatticePoint) -> f64 {
        match self.domain.index_of(x) {
            Some(i) if self.in_path[i] => 0.0,
            Some(i) => self.level.e[i],
            None => 1.0,
        }
    }
}

/// A path `eta[0..j]` inside the domain.
pub struct InteriorNode<'a> {
    path: &'a [LatticePoint],
    weight: f64,
    view: LevelView<'a>,
}

impl InteriorNode<'_> {
    pub fn path(&self) -> &[LatticePoint] {
        self.path
    }

    /// Number of steps.
    pub fn depth(&self) -> usize {
        self.path.len() - 1
    }

    /// `6^{-j} F_eta(D)`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Probability that the loop-erasure of SRW stopped on leaving `D`
    /// starts with this path: `6^{-j} F_eta(D) Esc_{eta,D}(eta(j))`.
    pub fn prefix_probability(&self) -> f64 {
        self.weight * self.escape_from(*self.path.last().expect("nonempty"))
    }

    /// `P^x(S[1, ..] leaves D before touching the path)`.
    pub fn escape_from(&self, x: LatticePoint) -> f64 {
        x.neighbors().iter().map(|&w| self.view.exit_probability(w)).sum::<f64>() / 6.0
    }

    /// `G_A(x, y)` on `A = D` minus this path.
    pub fn green(&self, x: LatticePoint, y: LatticePoint) -> f64 {
        self.view.green(x, y)
    }
}

/// A complete path `eta[0..n]` with `eta(n)` outside the domain.
pub struct ExitLeaf<'a> {
    path: &'a [LatticePoint],
    probability: f64,
    view: LevelView<'a>,
}

impl ExitLeaf<'_> {
    pub fn path(&self) -> &[LatticePoint] {
        self.path
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.path.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.path.len() == 1
    }

    /// `P[LE(S[0, T]) = eta]`.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    /// `G_A(x, y)` on `A = D` minus the path.
    pub fn green(&self, x: LatticePoint, y: LatticePoint) -> f64 {
        self.view.green(x, y)
    }

    /// `P^x(S[1, T] misses the path)` for SRW stopped on leaving `D`, where
    /// the exit point itself counts as part of the path.
    pub fn escape_from(&self, x: LatticePoint) -> f64 {
        let exit = *self.path.last().expect("nonempty");
        let corrected = |w: LatticePoint| -> f64 {
            if w == exit {
                return 0.0;
            }
            match self.view.index(w) {
                None => self.view.exit_probability(w),
                Some(_) => {
                    // Remove exits through the path's own exit point.
                    let through: f64 = exit
                        .neighbors()
                        .iter()
                        .map(|&y| self.view.green(w, y))
                        .sum::<f64>()
                        / 6.0;
                    (self.view.exit_probability(w) - through).max(0.0)
                }
            }
        };
        x.neighbors().iter().map(|&w| corrected(w)).sum::<f64>() / 6.0
    }
}

pub struct SapEnumerator<'d> {
    domain: &'d FiniteDomain,
    levels: Vec<Level>,
    path: Vec<LatticePoint>,
    path_idx: Vec<u32>,
    in_path: Vec<bool>,
}

impl<'d> SapEnumerator<'d> {
    pub fn new(oracle: &Oracle, domain: &'d FiniteDomain) -> Result<Self, OracleError> {
        let n = domain.len();
        if n > ENUMERATION_SITE_LIMIT {
            return Err(OracleError::CapExceeded { sites: n, cap: ENUMERATION_SITE_LIMIT });
        }
        let table = oracle.green_matrix(domain)?;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = table.get_index(i, j);
            }
        }
        let k: Vec<f64> = (0..n).map(|i| domain.exit_count(i) as f64 / 6.0).collect();
        let e: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[i * n + j] * k[j]).sum()).collect();
        let root = Level { g, e, active: (0..n as u32).collect() };
        Ok(SapEnumerator {
            domain,
            levels: vec![root],
            path: Vec::new(),
            path_idx: Vec::new(),
            in_path: vec![false; n],
        })
    }

    /// Enumerator over the sites of `inner` carrying the Green's function
    /// and exit probabilities of the larger domain `outer`. Removing path
    /// sites from `outer` only touches entries indexed by `inner`, so the
    /// weights and prefix probabilities of paths inside `inner` are those of
    /// `outer`. Exit leaves refer to `inner` and carry no meaning here:
    /// prune paths before they reach a site with a neighbor outside `inner`.
    pub fn restricted(oracle: &Oracle, outer: &FiniteDomain, inner: &'d FiniteDomain) -> Result<Self, OracleError> {
        let n = inner.len();
        if n > ENUMERATION_SITE_LIMIT {
            return Err(OracleError::CapExceeded { sites: n, cap: ENUMERATION_SITE_LIMIT });
        }
        let outer_index: Vec<usize> = inner
            .sites()
            .iter()
            .map(|&p| outer.index_of(p).ok_or(OracleError::NotInDomain(p)))
            .collect::<Result<_, _>>()?;
        let mut g = vec![0.0; n * n];
        for (j, &p) in inner.sites().iter().enumerate() {
            let col = oracle.green_column(outer, p)?;
            for (i, &oi) in outer_index.iter().enumerate() {
                g[i * n + j] = col[oi];
            }
        }
        let k: Vec<f64> = (0..outer.len()).map(|i| outer.exit_count(i) as f64 / 6.0).collect();
        let e_outer = oracle.solve_checked(outer, &k)?;
        let e = outer_index.iter().map(|&oi| e_outer[oi]).collect();
        let root = Level { g, e, active: (0..n as u32).collect() };
        Ok(SapEnumerator { domain: inner, levels: vec![root], path: Vec::new(), path_idx: Vec::new(), in_path: vec![false; n] })
    }

    /// Visits every self-avoiding path that starts with `prefix`, whose
    /// points other than the last lie in the domain, and whose last point
    /// is outside (leaves) or has not yet been pruned (interior nodes).
    pub fn run<V: SapVisitor>(&mut self, prefix: &[LatticePoint], visitor: &mut V) -> Result<(), OracleError> {
        let Some(&start) = prefix.first() else {
            return Err(OracleError::InvalidPath("empty prefix".into()));
        };
        self.path.clear();
        self.path_idx.clear();
        self.in_path.iter_mut().for_each(|b| *b = false);
        let n = self.domain.len();
        let s = self.domain.index_of(start).ok_or(OracleError::NotInDomain(start))?;
        let mut weight = self.levels[0].g[s * n + s];
        self.push(start, s);
        for &p in &prefix[1..] {
            let prev = *self.path.last().expect("nonempty");
            if !prev.is_adjacent(p) {
                return Err(OracleError::InvalidPath(format!("{prev:?} and {p:?} are not adjacent")));
            }
            let i = self.domain.index_of(p).ok_or(OracleError::NotInDomain(p))?;
            if self.in_path[i] {
                return Err(OracleError::InvalidPath(format!("{p:?} repeats")));
            }
            let j = self.path.len();
            self.downdate(j);
            weight *= self.levels[j].g[i * n + i] / 6.0;
            self.push(p, i);
        }
        self.dfs(visitor, weight);
        Ok(())
    }

    fn push(&mut self, p: LatticePoint, i: usize) {
        self.path.push(p);
        self.path_idx.push(i as u32);
        self.in_path[i] = true;
    }

    fn pop(&mut self) {
        self.path.pop();
        let i = self.path_idx.pop().expect("nonempty") as usize;
        self.in_path[i] = false;
    }

    /// Fills level `j` from level `j - 1` by removing `path_idx[j - 1]`.
    fn downdate(&mut self, j: usize) {
        let n = self.domain.len();
        if self.levels.len() <= j {
            self.levels.push(Level { g: vec![0.0; n * n], e: vec![0.0; n], active: Vec::with_capacity(n) });
        }
        let v = self.path_idx[j - 1] as usize;
        let (lo, hi) = self.levels.split_at_mut(j);
        let src = &lo[j - 1];
        let dst = &mut hi[0];
        dst.active.clear();
        dst.active.extend(src.active.iter().copied().filter(|&a| a as usize != v));
        let inv = 1.0 / src.g[v * n + v];
        let ev = src.e[v];
        let row_v = &src.g[v * n..(v + 1) * n];
        for &a in &dst.active {
            let a = a as usize;
            let c = src.g[a * n + v] * inv;
            dst.e[a] = src.e[a] - c * ev;
            let src_row = &src.g[a * n..(a + 1) * n];
            let dst_row = &mut dst.g[a * n..(a + 1) * n];
            for &b in &dst.active {
                let b = b as usize;
                dst_row[b] = src_row[b] - c * row_v[b];
            }
        }
    }

    fn dfs<V: SapVisitor>(&mut self, visitor: &mut V, weight: f64) {
        let n = self.domain.len();
        let j = self.path.len();
        self.downdate(j);
        let last = *self.path.last().expect("nonempty");
        {
            let node = InteriorNode {
                path: &self.path,
                weight,
                view: LevelView { domain: self.domain, level: &self.levels[j], in_path: &self.in_path },
            };
            if visitor.interior(&node) == Descend::Prune {
                return;
            }
        }
        let v = self.path_idx[j - 1] as usize;
        let row = *self.domain.neighbor_row(v);
        for (dir, &w) in row.iter().enumerate() {
            if w == NO_SITE {
                self.path.push(last.step(dir));
                let leaf = ExitLeaf {
                    path: &self.path,
                    probability: weight / 6.0,
                    view: LevelView { domain: self.domain, level: &self.levels[j], in_path: &self.in_path },
                };
                visitor.exit(&leaf);
                self.path.pop();
            } else {
                let w = w as usize;
                if self.in_path[w] {
                    continue;
                }
                let child = weight / 6.0 * self.levels[j].g[w * n + w];
                self.push(self.domain.site(w), w);
                self.dfs(visitor, child);
                self.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ball;
    use crate::loop_erase::SelfAvoidingPath;

    fn p(x: i64, y: i64, z: i64) -> LatticePoint {
        LatticePoint::new(x, y, z)
    }

    struct Collect {
        leaves: Vec<(Vec<LatticePoint>, f64, f64)>,
        max_depth: usize,
        interior: Vec<(Vec<LatticePoint>, f64)>,
    }

    impl SapVisitor for Collect {
        fn interior(&mut self, node: &InteriorNode<'_>) -> Descend {
            self.interior.push((node.path().to_vec(), node.prefix_probability()));
            if node.depth() >= self.max_depth {
                Descend::Prune
            } else {
                Descend::Continue
            }
        }

        fn exit(&mut self, leaf: &ExitLeaf<'_>) {
            let esc = leaf.escape_from(LatticePoint::ORIGIN);
            self.leaves.push((leaf.path().to_vec(), leaf.probability(), esc));
        }
    }

    #[test]
    fn matches_naive_formula_on_small_ball() {
        let o = Oracle::default();
        let d = FiniteDomain::from_ball(&Ball::centered(2.0).unwrap());
        let mut en = SapEnumerator::new(&o, &d).unwrap();
        let mut c = Collect { leaves: vec![], max_depth: 4, interior: vec![] };
        en.run(&[LatticePoint::ORIGIN], &mut c).unwrap();
        assert_eq!(c.leaves.iter().filter(|l| l.0.len() == 2).count(), 0);
        assert!(!c.leaves.is_empty());
        for (path, prob, _) in c.leaves.iter().take(40) {
            let eta = SelfAvoidingPath::new(path.clone()).unwrap();
            let exact = o.lerw_law_exact(&eta, &d).unwrap();
            assert!((prob - exact).abs() < 1e-12 * exact.max(1e-300), "{path:?}: {prob} vs {exact}");
        }
        for (path, prob) in c.interior.iter().step_by(37).take(40) {
            let eta = SelfAvoidingPath::new(path.clone()).unwrap();
            let exact = o.lerw_law_exact(&eta, &d).unwrap();
            assert!((prob - exact).abs() < 1e-12, "{path:?}: {prob} vs {exact}");
        }
    }

    #[test]
    fn leaf_escape_counts_exit_point() {
        // In the single-site domain the walk from the origin misses a
        // one-step path exactly when its first step differs.
        let o = Oracle::default();
        let d = FiniteDomain::from_sites(vec![LatticePoint::ORIGIN]).unwrap();
        let mut en = SapEnumerator::new(&o, &d).unwrap();
        let mut c = Collect { leaves: vec![], max_depth: 10, interior: vec![] };
        en.run(&[LatticePoint::ORIGIN], &mut c).unwrap();
        assert_eq!(c.leaves.len(), 6);
        let es: f64 = c.leaves.iter().map(|(_, pr, esc)| pr * esc).sum();
        assert!((es - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn prefix_closure_sums_to_one() {
        // Completed exits plus the prefix mass at the depth cutoff account
        // for every outcome.
        let o = Oracle::default();
        let d = FiniteDomain::from_ball(&Ball::centered(3.0).unwrap());
        let mut en = SapEnumerator::new(&o, &d).unwrap();
        let mut c = Collect { leaves: vec![], max_depth: 5, interior: vec![] };
        en.run(&[LatticePoint::ORIGIN], &mut c).unwrap();
        let exits: f64 = c.leaves.iter().map(|l| l.1).sum();
        let frontier: f64 =
            c.interior.iter().filter(|(path, _)| path.len() == 6).map(|(_, q)| q).sum();
        assert!((exits + frontier - 1.0).abs() < 1e-10, "{exits} + {frontier}");
    }

    #[test]
    fn prefix_run_starts_below_root() {
        let o = Oracle::default();
        let d = FiniteDomain::from_ball(&Ball::centered(2.0).unwrap());
        let mut en = SapEnumerator::new(&o, &d).unwrap();
        let prefix = [p(0, 0, 0), p(1, 0, 0), p(1, 1, 0), p(1, 1, 1), p(0, 1, 1)];
        struct Sum(f64, bool);
        impl SapVisitor for Sum {
            fn exit(&mut self, leaf: &ExitLeaf<'_>) {
                self.0 += leaf.probability();
                self.1 &= leaf.path().starts_with(&[p(0, 0, 0), p(1, 0, 0), p(1, 1, 0), p(1, 1, 1), p(0, 1, 1)]);
            }
        }
        let mut c = Sum(0.0, true);
        en.run(&prefix, &mut c).unwrap();
        assert!(c.1);
        let total = c.0;
        let eta = SelfAvoidingPath::new(prefix.to_vec()).unwrap();
        let expect = o.lerw_law_exact(&eta, &d).unwrap();
        assert!((total - expect).abs() < 1e-12, "{total} vs {expect}");
        assert!(en.run(&[p(0, 0, 0), p(1, 1, 0)], &mut c).is_err());
        assert!(en.run(&[p(0, 0, 0), p(1, 0, 0), p(0, 0, 0)], &mut c).is_err());
    }

    #[test]
    fn restricted_matches_outer_domain() {
        let o = Oracle::default();
        let outer = FiniteDomain::from_ball(&Ball::centered(4.0).unwrap());
        let inner = FiniteDomain::from_ball(&Ball::centered(3.0).unwrap());
        let small = Ball::centered(2.0).unwrap();
        let mut en = SapEnumerator::restricted(&o, &outer, &inner).unwrap();
        let mut c = Collect { leaves: vec![], max_depth: 3, interior: vec![] };
        en.run(&[LatticePoint::ORIGIN], &mut c).unwrap();
        let mut checked = 0;
        for (path, prob) in c.interior.iter().filter(|(path, _)| small.contains(*path.last().unwrap())).step_by(3) {
            let eta = SelfAvoidingPath::new(path.clone()).unwrap();
            let exact = o.lerw_law_exact(&eta, &outer).unwrap();
            assert!((prob - exact).abs() < 1e-12, "{path:?}: {prob} vs {exact}");
            checked += 1;
        }
        assert!(checked > 10);
        let same = SapEnumerator::restricted(&o, &inner, &inner).unwrap();
        let plain = SapEnumerator::new(&o, &inner).unwrap();
        let diff = same.levels[0].g.iter().zip(&plain.levels[0].g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert!(SapEnumerator::restricted(&o, &inner, &outer).is_err());
    }
}
