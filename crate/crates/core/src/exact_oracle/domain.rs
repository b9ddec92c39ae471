use rustc_hash::{FxHashMap, FxHashSet};

use super::OracleError;
use crate::lattice::{outer_boundary_test, Ball, LatticePoint};

pub(crate) const NO_SITE: u32 = u32::MAX;

/// An enumerated finite subset of Z^3 with its lattice adjacency.
#[derive(Clone, Debug)]
pub struct FiniteDomain {
    sites: Vec<LatticePoint>,
    index: FxHashMap<LatticePoint, u32>,
    neighbors: Vec<[u32; 6]>,
    exits: Vec<u8>,
}

impl FiniteDomain {
    pub fn from_sites(sites: Vec<LatticePoint>) -> Result<Self, OracleError> {
        let mut index = FxHashMap::default();
        index.reserve(sites.len());
        for (i, &p) in sites.iter().enumerate() {
            if index.insert(p, i as u32).is_some() {
                return Err(OracleError::DuplicateSite(p));
            }
        }
        let mut neighbors = Vec::with_capacity(sites.len());
        let mut exits = Vec::with_capacity(sites.len());
        for &p in &sites {
            let mut row = [NO_SITE; 6];
            let mut out = 0u8;
            for (k, q) in p.neighbors().into_iter().enumerate() {
                match index.get(&q) {
                    Some(&j) => row[k] = j,
                    None => out += 1,
                }
            }
            neighbors.push(row);
            exits.push(out);
        }
        Ok(FiniteDomain { sites, index, neighbors, exits })
    }

    /// Lattice sites of `ball`, in lexicographic order.
    pub fn from_ball(ball: &Ball) -> Self {
        Self::from_sites(ball.sites()).expect("ball sites are distinct")
    }

    /// This domain with `removed` taken out (points not in the domain are ignored).
    pub fn without(&self, removed: &[LatticePoint]) -> Self {
        let drop: FxHashSet<LatticePoint> = removed.iter().copied().collect();
        let sites = self.sites.iter().copied().filter(|p| !drop.contains(p)).collect();
        Self::from_sites(sites).expect("subset of distinct sites")
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    #[inline]
    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.index.get(&p).map(|&i| i as usize)
    }

    #[inline]
    pub fn contains(&self, p: LatticePoint) -> bool {
        self.index.contains_key(&p)
    }

    pub fn site(&self, i: usize) -> LatticePoint {
        self.sites[i]
    }

    /// Domain indices of the neighbors of site `i`, `NO_SITE` where the
    /// neighbor lies outside.
    #[inline]
    pub(crate) fn neighbor_row(&self, i: usize) -> &[u32; 6] {
        &self.neighbors[i]
    }

    /// Number of neighbors of site `i` outside the domain.
    #[inline]
    pub(crate) fn exit_count(&self, i: usize) -> u8 {
        self.exits[i]
    }

    pub fn is_boundary(&self, p: LatticePoint) -> bool {
        outer_boundary_test(|q| self.contains(q), p)
    }

    /// Outer boundary, lexicographically sorted.
    pub fn boundary(&self) -> Vec<LatticePoint> {
        let mut out: Vec<LatticePoint> = self
            .sites
            .iter()
            .flat_map(|p| p.neighbors())
            .filter(|q| !self.contains(*q))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}
