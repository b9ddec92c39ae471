use rustc_hash::FxHashSet;

use super::domain::FiniteDomain;
use super::{Oracle, OracleError};
use crate::lattice::LatticePoint;
use crate::loop_erase::SelfAvoidingPath;

/// Rounding slack below which a negative loop term is reported as zero.
const LOOP_TERM_SLACK: f64 = 1e-12;

impl Oracle {
    /// Loop-measure mass of loops in `D` touching the union of `targets`:
    /// `sum_j log G_{D_j}(v_j, v_j)` with `D_j = D \ {v_0, .., v_{j-1}}`,
    /// over the union's sites inside `D` in first-appearance order.
    pub fn loop_mass_touching(
        &self,
        targets: &[&[LatticePoint]],
        domain: &FiniteDomain,
    ) -> Result<f64, OracleError> {
        let mut seen = FxHashSet::default();
        let order: Vec<LatticePoint> = targets
            .iter()
            .flat_map(|t| t.iter().copied())
            .filter(|&p| domain.contains(p) && seen.insert(p))
            .collect();
        self.loop_mass_ordered(&order, domain)
    }

    /// As [`Oracle::loop_mass_touching`] with the enumeration order given
    /// explicitly. Repeated or outside points are skipped.
    pub fn loop_mass_ordered(&self, order: &[LatticePoint], domain: &FiniteDomain) -> Result<f64, OracleError> {
        self.check(domain)?;
        let mut mass = 0.0;
        let mut removed: Vec<LatticePoint> = Vec::with_capacity(order.len());
        for &v in order {
            if !domain.contains(v) || removed.contains(&v) {
                continue;
            }
            let dj = domain.without(&removed);
            mass += self.green_diagonal(&dj, v)?.ln();
            removed.push(v);
        }
        Ok(mass)
    }

    /// Mass of loops in `D` touching both paths:
    /// `M(g1) + M(g2) - M(g1 u g2)`.
    pub fn loop_term_ln(
        &self,
        gamma1: &SelfAvoidingPath,
        gamma2: &SelfAvoidingPath,
        domain: &FiniteDomain,
    ) -> Result<f64, OracleError> {
        let m1 = self.loop_mass_touching(&[gamma1.points()], domain)?;
        let m2 = self.loop_mass_touching(&[gamma2.points()], domain)?;
        let m12 = self.loop_mass_touching(&[gamma1.points(), gamma2.points()], domain)?;
        let v = m1 + m2 - m12;
        if v < 0.0 && v > -LOOP_TERM_SLACK {
            Ok(0.0)
        } else {
            Ok(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ball;

    fn p(x: i64, y: i64, z: i64) -> LatticePoint {
        LatticePoint::new(x, y, z)
    }

    fn b3() -> FiniteDomain {
        FiniteDomain::from_ball(&Ball::centered(3.0).unwrap())
    }

    #[test]
    fn single_site_mass_is_zero() {
        let d = FiniteDomain::from_sites(vec![LatticePoint::ORIGIN]).unwrap();
        let m = Oracle::default().loop_mass_touching(&[&[LatticePoint::ORIGIN]], &d).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn order_invariance() {
        let o = Oracle::default();
        let d = b3();
        let set = [p(0, 0, 0), p(1, 0, 0), p(2, 1, 0), p(-1, 0, 1), p(0, 2, 0)];
        let a = o.loop_mass_ordered(&set, &d).unwrap();
        let mut rev = set;
        rev.reverse();
        let b = o.loop_mass_ordered(&rev, &d).unwrap();
        let c = o.loop_mass_ordered(&[set[2], set[0], set[4], set[1], set[3]], &d).unwrap();
        assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "{a} {b} {c}");
    }

    #[test]
    fn mass_matches_log_f_eta() {
        let o = Oracle::default();
        let d = b3();
        let eta = SelfAvoidingPath::new(vec![p(0, 0, 0), p(0, 1, 0)]).unwrap();
        let m = o.loop_mass_touching(&[eta.points()], &d).unwrap();
        let f = o.f_eta(&eta, &d).unwrap();
        assert!((m - f.ln()).abs() < 1e-10);
    }

    #[test]
    fn loop_term_identities() {
        let o = Oracle::default();
        let d = b3();
        let g1 = SelfAvoidingPath::new(vec![p(2, 1, 1), p(2, 1, 0)]).unwrap();
        let g2 = SelfAvoidingPath::new(vec![p(-2, -1, -1), p(-2, -1, 0)]).unwrap();
        let l = o.loop_term_ln(&g1, &g2, &d).unwrap();
        let m12 = o.loop_mass_touching(&[g1.points(), g2.points()], &d).unwrap();
        assert!(l >= 0.0 && l <= m12, "{l} {m12}");
        let m1 = o.loop_mass_touching(&[g1.points()], &d).unwrap();
        assert!((o.loop_term_ln(&g1, &g1, &d).unwrap() - m1).abs() < 1e-12);
    }
}
