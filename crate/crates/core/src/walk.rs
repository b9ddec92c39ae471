//! Simple random walk sampling on Z^3 with ball-exit stopping, index helpers
//! for hitting and last-visit times, and Doob h-transformed walks.

use thiserror::Error;

use crate::lattice::{Ball, LatticePoint};
use crate::rng::RngStream;

/// Walks longer than this are not materialized; callers stream instead.
pub const DEFAULT_MAX_STORED_STEPS: usize = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("start {0} is not strictly inside the ball")]
    StartOutside(LatticePoint),
    #[error("path never leaves the ball")]
    NotReached,
    #[error("no index up to {0} satisfies the region test")]
    NotFound(usize),
    #[error("path is empty")]
    Empty,
    #[error("points {0} and {1} at step {2} are not nearest neighbors")]
    NotNearestNeighbor(LatticePoint, LatticePoint, usize),
    #[error("walk exceeded the {0}-step storage cap; stream it instead")]
    TooLong(usize),
    #[error("harmonic weight vanishes at start {0}")]
    ZeroWeight(LatticePoint),
}

/// A nearest-neighbor path `[p(0), ..., p(len)]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    points: Vec<LatticePoint>,
}

impl Path {
    pub fn new(points: Vec<LatticePoint>) -> Result<Self, WalkError> {
        check_steps(&points)?;
        Ok(Path { points })
    }

    pub(crate) fn from_trusted(points: Vec<LatticePoint>) -> Self {
        debug_assert!(check_steps(&points).is_ok());
        Path { points }
    }

    pub fn single(p: LatticePoint) -> Self {
        Path { points: vec![p] }
    }

    /// Path from a start point and a sequence of direction indices.
    pub fn from_directions(start: LatticePoint, dirs: &[usize]) -> Self {
        let mut points = Vec::with_capacity(dirs.len() + 1);
        let mut cur = start;
        points.push(cur);
        for &d in dirs {
            cur = cur.step(d);
            points.push(cur);
        }
        Path { points }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    /// Always false: a path has at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<LatticePoint> {
        self.points
    }

    pub fn first(&self) -> LatticePoint {
        self.points[0]
    }

    pub fn last(&self) -> LatticePoint {
        *self.points.last().expect("nonempty")
    }

    /// Concatenation `self ⊕ other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &Path) -> Option<Path> {
        if self.last() != other.first() {
            return None;
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        Some(Path { points })
    }
}

pub(crate) fn check_steps(points: &[LatticePoint]) -> Result<(), WalkError> {
    if points.is_empty() {
        return Err(WalkError::Empty);
    }
    for (i, w) in points.windows(2).enumerate() {
        if !w[0].is_adjacent(w[1]) {
            return Err(WalkError::NotNearestNeighbor(w[0], w[1], i + 1));
        }
    }
    Ok(())
}

/// Runs SRW from `start` until it first leaves `ball`, feeding every point
/// (the start and the exit point included) to `visit`. Returns the number of
/// steps taken. Nothing is stored.
#[inline]
pub fn stream_srw_exit<F: FnMut(LatticePoint)>(
    start: LatticePoint,
    ball: &Ball,
    rng: &mut RngStream,
    mut visit: F,
) -> Result<u64, WalkError> {
    if !ball.contains(start) {
        return Err(WalkError::StartOutside(start));
    }
    let mut cur = start;
    let mut steps = 0u64;
    visit(cur);
    loop {
        cur = cur.step(rng.direction());
        steps += 1;
        visit(cur);
        if !ball.contains(cur) {
            return Ok(steps);
        }
    }
}

/// Like [`stream_srw_exit`] but `visit` may stop the walk early by returning
/// `false`. Returns `true` when the walk reached the exit point.
#[inline]
pub fn stream_srw_exit_until<F: FnMut(LatticePoint) -> bool>(
    start: LatticePoint,
    ball: &Ball,
    rng: &mut RngStream,
    mut visit: F,
) -> Result<bool, WalkError> {
    if !ball.contains(start) {
        return Err(WalkError::StartOutside(start));
    }
    let mut cur = start;
    if !visit(cur) {
        return Ok(false);
    }
    loop {
        cur = cur.step(rng.direction());
        if !visit(cur) {
            return Ok(false);
        }
        if !ball.contains(cur) {
            return Ok(true);
        }
    }
}

/// `S[0, T]` for SRW started at `start`, `T` the first exit time of `ball`.
pub fn sample_srw_exit(
    start: LatticePoint,
    ball: &Ball,
    rng: &mut RngStream,
) -> Result<Path, WalkError> {
    sample_srw_exit_capped(start, ball, rng, DEFAULT_MAX_STORED_STEPS)
}

pub fn sample_srw_exit_capped(
    start: LatticePoint,
    ball: &Ball,
    rng: &mut RngStream,
    max_steps: usize,
) -> Result<Path, WalkError> {
    let mut points = Vec::new();
    let reached = stream_srw_exit_until(start, ball, rng, |p| {
        points.push(p);
        points.len() <= max_steps + 1
    })?;
    if !reached {
        return Err(WalkError::TooLong(max_steps));
    }
    Ok(Path::from_trusted(points))
}

/// Smallest index `t` with `path(t)` outside `ball`.
pub fn first_exit_index(path: &[LatticePoint], ball: &Ball) -> Result<usize, WalkError> {
    path.iter().position(|&p| !ball.contains(p)).ok_or(WalkError::NotReached)
}

/// Largest `t <= upto` with `region(path(t))`.
pub fn last_visit_index<F: Fn(LatticePoint) -> bool>(
    path: &[LatticePoint],
    upto: usize,
    region: F,
) -> Result<usize, WalkError> {
    let end = upto.min(path.len().saturating_sub(1));
    if path.is_empty() {
        return Err(WalkError::Empty);
    }
    (0..=end).rev().find(|&t| region(path[t])).ok_or(WalkError::NotFound(upto))
}

/// A nonnegative function driving a Doob h-transform: from a non-terminal
/// site the walk moves to neighbor `w` with probability proportional to
/// `h(w)`, and stops on the first terminal site.
pub trait HarmonicWeights {
    fn weight(&self, p: LatticePoint) -> f64;
    fn is_terminal(&self, p: LatticePoint) -> bool;
}

/// Samples the h-transformed walk from `start` until it reaches a terminal
/// site. Step probabilities are `h(w) / sum_{w'} h(w')`, which equals
/// `h(w) / (6 h(v))` wherever `h` is harmonic; normalizing by the actual sum
/// also covers a start on the zero set of `h` (conditioning on `S[1, T]`).
pub fn sample_h_transform<H: HarmonicWeights + ?Sized>(
    start: LatticePoint,
    h: &H,
    rng: &mut RngStream,
) -> Result<Path, WalkError> {
    let mut points = vec![start];
    let mut cur = start;
    let mut w = [0.0f64; 6];
    while !h.is_terminal(cur) {
        let ns = cur.neighbors();
        let mut total = 0.0;
        for (k, &q) in ns.iter().enumerate() {
            w[k] = h.weight(q);
            total += w[k];
        }
        if !(total > 0.0) {
            return Err(WalkError::ZeroWeight(cur));
        }
        let mut u = rng.uniform() * total;
        let mut pick = 5;
        for (k, &wk) in w.iter().enumerate() {
            if u < wk {
                pick = k;
                break;
            }
            u -= wk;
        }
        // Floating-point leftovers must not select a zero-weight neighbor.
        while w[pick] == 0.0 {
            pick -= 1;
        }
        cur = ns[pick];
        points.push(cur);
        if points.len() > DEFAULT_MAX_STORED_STEPS {
            return Err(WalkError::TooLong(DEFAULT_MAX_STORED_STEPS));
        }
    }
    Ok(Path::from_trusted(points))
}

/// `X[0, tau]` for SRW from `start` conditioned to hit the table's target
/// before leaving `ball`, by the Doob transform with `h(v) = P^v(hit target
/// before exit)`.
pub fn sample_conditioned_walk<H: HarmonicWeights + ?Sized>(
    start: LatticePoint,
    ball: &Ball,
    h_table: &H,
    rng: &mut RngStream,
) -> Result<Path, WalkError> {
    if !ball.contains(start) {
        return Err(WalkError::StartOutside(start));
    }
    if h_table.weight(start) <= 0.0 {
        return Err(WalkError::ZeroWeight(start));
    }
    sample_h_transform(start, h_table, rng)
}
