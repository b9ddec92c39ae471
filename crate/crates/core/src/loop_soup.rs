//! Reinsertion of loops into a loop-erased path.
//!
//! The loops attached at a vertex `v` inside a domain `A` are sampled as a
//! run of SRW excursions from `v`: every excursion that comes back to `v`
//! before leaving `A` is kept, the first one that leaves is thrown away.
//! The number of kept excursions is geometric with success probability
//! `1 / G_A(v, v)`, matching the loop-soup mass at `v`.

use rustc_hash::FxHashMap;

use crate::exact_oracle::FiniteDomain;
use crate::lattice::LatticePoint;
use crate::loop_erase::SelfAvoidingPath;
use crate::rng::RngStream;
use crate::walk::Path;

#[derive(Debug, thiserror::Error)]
pub enum LoopSoupError {
    #[error("vertex {0:?} is not in the domain")]
    NotInDomain(LatticePoint),
    #[error("not a loop-erased exit path of the domain: {0}")]
    InvalidLerw(String),
}

/// Appends to `out` the loops at `v` in the domain given by `inside`, not
/// including the leading `v`. Returns the number of kept excursions.
pub fn append_loops_at<F: Fn(LatticePoint) -> bool>(
    v: LatticePoint,
    inside: F,
    rng: &mut RngStream,
    out: &mut Vec<LatticePoint>,
) -> u64 {
    let mut kept = 0;
    let mut mark = out.len();
    loop {
        let mut cur = v;
        loop {
            cur = cur.step(rng.direction());
            if !inside(cur) {
                out.truncate(mark);
                return kept;
            }
            out.push(cur);
            if cur == v {
                break;
            }
        }
        kept += 1;
        mark = out.len();
    }
}

/// Loops at `v` in `domain` as a closed path from `v` to `v` (just `[v]`
/// when no excursion returns).
pub fn loops_at_vertex(
    v: LatticePoint,
    domain: &FiniteDomain,
    rng: &mut RngStream,
) -> Result<Path, LoopSoupError> {
    if !domain.contains(v) {
        return Err(LoopSoupError::NotInDomain(v));
    }
    let mut pts = vec![v];
    append_loops_at(v, |p| domain.contains(p), rng, &mut pts);
    Ok(Path::new(pts).expect("excursions are nearest-neighbor"))
}

/// `l_0 + lambda[0,1] + l_1 + ... + l_{n-1} + lambda[n-1,n]` with `l_j` the
/// loops at `lambda(j)` in `D \ lambda[0, j-1]`. Has the law of SRW from
/// `lambda(0)` stopped on leaving `D` when `lambda` is loop-erased SRW.
pub fn reconstruct_srw(
    lerw: &SelfAvoidingPath,
    domain: &FiniteDomain,
    rng: &mut RngStream,
) -> Result<Path, LoopSoupError> {
    reconstruct_srw_in(lerw, |p| domain.contains(p), rng)
}

/// [`reconstruct_srw`] for a domain given by a membership predicate.
pub fn reconstruct_srw_in<F: Fn(LatticePoint) -> bool>(
    lerw: &SelfAvoidingPath,
    inside: F,
    rng: &mut RngStream,
) -> Result<Path, LoopSoupError> {
    let pts = lerw.points();
    let n = pts.len() - 1;
    if n == 0 {
        return Err(LoopSoupError::InvalidLerw("path has no steps".into()));
    }
    if let Some(p) = pts[..n].iter().find(|p| !inside(**p)) {
        return Err(LoopSoupError::InvalidLerw(format!("{p:?} is outside the domain")));
    }
    if inside(pts[n]) {
        return Err(LoopSoupError::InvalidLerw(format!("endpoint {:?} is inside the domain", pts[n])));
    }
    let position: FxHashMap<LatticePoint, usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut out = Vec::with_capacity(4 * pts.len());
    for j in 0..n {
        out.push(pts[j]);
        // D \ lambda[0, j-1]: later path sites stay available.
        let allowed = |p: LatticePoint| inside(p) && position.get(&p).map_or(true, |&i| i >= j);
        append_loops_at(pts[j], allowed, rng, &mut out);
    }
    out.push(pts[n]);
    Ok(Path::new(out).expect("nearest-neighbor by construction"))
}
