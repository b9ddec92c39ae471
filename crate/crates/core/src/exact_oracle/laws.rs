use rustc_hash::{FxHashMap, FxHashSet};

use super::domain::FiniteDomain;
use super::{Oracle, OracleError};
use crate::lattice::LatticePoint;
use crate::loop_erase::SelfAvoidingPath;
use crate::walk::HarmonicWeights;

/// `h(v) = P^v(hit target before leaving D)`.
#[derive(Clone, Debug)]
pub struct HittingTable {
    domain: FiniteDomain,
    target: LatticePoint,
    values: Vec<f64>,
}

impl HittingTable {
    pub fn target(&self) -> LatticePoint {
        self.target
    }

    pub fn domain(&self) -> &FiniteDomain {
        &self.domain
    }

    /// Zero outside the domain.
    pub fn get(&self, p: LatticePoint) -> f64 {
        self.domain.index_of(p).map_or(0.0, |i| self.values[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_v |h(v) - (1/6) sum_w h(w)|` over `v` in `D` other than the target.
    pub fn harmonic_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &p) in self.domain.sites().iter().enumerate() {
            if p == self.target {
                continue;
            }
            let avg: f64 = p.neighbors().iter().map(|&q| self.get(q)).sum::<f64>() / 6.0;
            worst = worst.max((self.values[i] - avg).abs());
        }
        worst
    }
}

impl HarmonicWeights for HittingTable {
    fn weight(&self, p: LatticePoint) -> f64 {
        self.get(p)
    }

    fn is_terminal(&self, p: LatticePoint) -> bool {
        p == self.target
    }
}

/// `e(v) = P^v(leave D before hitting the avoided set)`: 1 off `D`, 0 on the
/// avoided set. As an h-transform it drives SRW conditioned to leave `D`
/// without returning to the avoided set.
#[derive(Clone, Debug)]
pub struct EscapeTable {
    domain: FiniteDomain,
    avoid: FxHashSet<LatticePoint>,
    values: Vec<f64>,
}

impl EscapeTable {
    pub fn get(&self, p: LatticePoint) -> f64 {
        if self.avoid.contains(&p) {
            0.0
        } else {
            self.domain.index_of(p).map_or(1.0, |i| self.values[i])
        }
    }

    /// Probability that SRW from `tau` leaves `D` at some time `>= 1` before
    /// touching the avoided set at any time `>= 1`.
    pub fn escape_from(&self, tau: LatticePoint) -> f64 {
        tau.neighbors().iter().map(|&w| self.get(w)).sum::<f64>() / 6.0
    }

    pub fn domain(&self) -> &FiniteDomain {
        &self.domain
    }
}

impl HarmonicWeights for EscapeTable {
    fn weight(&self, p: LatticePoint) -> f64 {
        self.get(p)
    }

    fn is_terminal(&self, p: LatticePoint) -> bool {
        !self.domain.contains(p) && !self.avoid.contains(&p)
    }
}

/// Distribution of the first site outside `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitLaw {
    pub points: Vec<LatticePoint>,
    pub probabilities: Vec<f64>,
}

impl ExitLaw {
    pub fn probability(&self, p: LatticePoint) -> f64 {
        self.points.binary_search(&p).map_or(0.0, |i| self.probabilities[i])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

impl Oracle {
    pub fn hitting_table(
        &self,
        domain: &FiniteDomain,
        target: LatticePoint,
    ) -> Result<HittingTable, OracleError> {
        let col = self.green_column(domain, target)?;
        let t = domain.index_of(target).ok_or(OracleError::NotInDomain(target))?;
        let gtt = col[t];
        let mut values: Vec<f64> = col.iter().map(|g| (g / gtt).max(0.0)).collect();
        values[t] = 1.0;
        Ok(HittingTable { domain: domain.clone(), target, values })
    }

    /// Escape probabilities from `D` avoiding `avoid`, by one solve on
    /// `D \ avoid`. Avoided points outside `D` block exits through them.
    pub fn escape_table(
        &self,
        domain: &FiniteDomain,
        avoid: &[LatticePoint],
    ) -> Result<EscapeTable, OracleError> {
        self.check(domain)?;
        let reduced = domain.without(avoid);
        let avoid: FxHashSet<LatticePoint> = avoid.iter().copied().collect();
        let k: Vec<f64> = reduced
            .sites()
            .iter()
            .map(|&p| {
                let out = p.neighbors().iter().filter(|&&q| !domain.contains(q) && !avoid.contains(&q)).count();
                out as f64 / 6.0
            })
            .collect();
        let sol = if reduced.is_empty() { Vec::new() } else { self.solve_checked(&reduced, &k)? };
        let mut values = vec![0.0; domain.len()];
        for (i, &p) in reduced.sites().iter().enumerate() {
            values[domain.index_of(p).expect("subset")] = sol[i].clamp(0.0, 1.0);
        }
        Ok(EscapeTable { domain: domain.clone(), avoid, values })
    }

    /// `Esc_{eta,D}(tau)`: SRW from `tau` reaches the outer boundary of `D`
    /// before returning to `eta`. Equal to 1 when `tau` is on the boundary.
    /// `tau` must be the endpoint of `eta` or adjacent to it.
    pub fn escape_exact(
        &self,
        eta: &SelfAvoidingPath,
        domain: &FiniteDomain,
        tau: LatticePoint,
    ) -> Result<f64, OracleError> {
        self.check(domain)?;
        let end = eta.last();
        if tau != end && !tau.is_adjacent(end) {
            return Err(OracleError::InvalidPath(format!(
                "{tau:?} is neither the endpoint of the path nor adjacent to it"
            )));
        }
        if !domain.contains(tau) {
            return if domain.is_boundary(tau) { Ok(1.0) } else { Err(OracleError::NotInDomain(tau)) };
        }
        let table = self.escape_table(domain, eta.points())?;
        Ok(table.escape_from(tau))
    }

    /// `F_eta(D) = prod_j G_{A_j}(eta(j), eta(j))` with
    /// `A_j = D \ eta[0, j-1]`; a factor is 1 when `eta(j)` is outside `D`.
    /// Every factor is a separate solve on the shrunken domain.
    pub fn f_eta(&self, eta: &SelfAvoidingPath, domain: &FiniteDomain) -> Result<f64, OracleError> {
        check_admissible(eta, domain)?;
        self.check(domain)?;
        let pts = eta.points();
        let mut f = 1.0;
        for j in 0..pts.len() {
            if !domain.contains(pts[j]) {
                continue;
            }
            let a = domain.without(&pts[..j]);
            f *= self.green_diagonal(&a, pts[j])?;
        }
        Ok(f)
    }

    /// `P[LE(S[0, T]) starts with eta] = 6^{-n} F_eta(D) Esc_{eta,D}(eta(n))`
    /// for SRW from `eta(0)` stopped on leaving `D`. When `eta(n)` is on the
    /// boundary this is the probability that the whole loop-erasure equals
    /// `eta`.
    pub fn lerw_law_exact(&self, eta: &SelfAvoidingPath, domain: &FiniteDomain) -> Result<f64, OracleError> {
        check_admissible(eta, domain)?;
        let n = eta.len() as i32;
        let f = self.f_eta(eta, domain)?;
        let esc = self.escape_exact(eta, domain, eta.last())?;
        Ok(6f64.powi(-n) * f * esc)
    }

    /// Harmonic measure of `D` from `start`.
    pub fn srw_exit_law_exact(
        &self,
        domain: &FiniteDomain,
        start: LatticePoint,
    ) -> Result<ExitLaw, OracleError> {
        let col = self.green_column(domain, start)?;
        let points = domain.boundary();
        let slot: FxHashMap<LatticePoint, usize> =
            points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut probabilities = vec![0.0; points.len()];
        for (i, &y) in domain.sites().iter().enumerate() {
            for z in y.neighbors() {
                if let Some(&k) = slot.get(&z) {
                    probabilities[k] += col[i] / 6.0;
                }
            }
        }
        Ok(ExitLaw { points, probabilities })
    }
}

/// `eta[0, n-1]` inside `D` and `eta(n)` in the closure.
pub(crate) fn check_admissible(eta: &SelfAvoidingPath, domain: &FiniteDomain) -> Result<(), OracleError> {
    let pts = eta.points();
    let (last, body) = pts.split_last().expect("paths are nonempty");
    if let Some(p) = body.iter().find(|p| !domain.contains(**p)) {
        return Err(OracleError::InvalidPath(format!("{p:?} leaves the domain before the endpoint")));
    }
    if !domain.contains(*last) && !domain.is_boundary(*last) {
        return Err(OracleError::InvalidPath(format!("endpoint {last:?} is not in the closure")));
    }
    Ok(())
}
