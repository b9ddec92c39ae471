//! Integer lattice geometry on Z^3: points, Euclidean balls with real radii,
//! outer boundaries and the `x -> x_n` scaling map.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("ball radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("scaled point requires |x| < 1, got |x| = {0}")]
    OutsideUnitBall(f64),
    #[error("scale exponent {0} overflows 64-bit lattice coordinates")]
    ScaleOverflow(u32),
}

/// A site of Z^3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

/// The six unit steps, in the fixed order +x, -x, +y, -y, +z, -z.
pub const UNIT_STEPS: [LatticePoint; 6] = [
    LatticePoint::new(1, 0, 0),
    LatticePoint::new(-1, 0, 0),
    LatticePoint::new(0, 1, 0),
    LatticePoint::new(0, -1, 0),
    LatticePoint::new(0, 0, 1),
    LatticePoint::new(0, 0, -1),
];

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint::new(0, 0, 0);

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        LatticePoint { x, y, z }
    }

    #[inline]
    pub fn norm_sq(self) -> i64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn l1_dist(self, other: LatticePoint) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs() + (self.z - other.z).abs()
    }

    pub fn is_adjacent(self, other: LatticePoint) -> bool {
        self.l1_dist(other) == 1
    }

    /// Neighbor in direction `dir` (an index into [`UNIT_STEPS`]).
    #[inline]
    pub fn step(self, dir: usize) -> LatticePoint {
        self + UNIT_STEPS[dir]
    }

    /// Direction index taking `self` to the adjacent point `to`.
    pub fn direction_to(self, to: LatticePoint) -> Option<usize> {
        let d = to - self;
        UNIT_STEPS.iter().position(|&s| s == d)
    }

    pub fn neighbors(self) -> [LatticePoint; 6] {
        UNIT_STEPS.map(|s| self + s)
    }

    pub fn to_array(self) -> [i64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    #[inline]
    fn add(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    #[inline]
    fn sub(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<[i64; 3]> for LatticePoint {
    fn from(a: [i64; 3]) -> Self {
        LatticePoint::new(a[0], a[1], a[2])
    }
}

/// Neighbors of `p` in the order +x, -x, +y, -y, +z, -z.
pub fn neighbors(p: LatticePoint) -> [LatticePoint; 6] {
    p.neighbors()
}

/// Euclidean lattice ball `{p : |p - center| < radius}`.
///
/// Membership compares the exact integer `|p - c|^2` against an integer
/// bound derived once from `radius^2`: the bound is `ceil(radius^2 - eps)`
/// with `eps` a relative guard of `1e-9`, so radii whose square is an integer
/// up to floating-point noise (for instance `sqrt(2)^2`) keep the strict
/// inequality exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: LatticePoint,
    radius: f64,
    norm_sq_bound: i64,
}

impl Ball {
    pub fn new(center: LatticePoint, radius: f64) -> Result<Self, LatticeError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(LatticeError::InvalidRadius(radius));
        }
        let r2 = radius * radius;
        let eps = 1e-9 * r2.max(1.0);
        let norm_sq_bound = (r2 - eps).ceil() as i64;
        Ok(Ball { center, radius, norm_sq_bound })
    }

    /// Ball centered at the origin.
    pub fn centered(radius: f64) -> Result<Self, LatticeError> {
        Ball::new(LatticePoint::ORIGIN, radius)
    }

    /// Ball of radius `2^exp` centered at the origin.
    pub fn dyadic(exp: u32) -> Result<Self, LatticeError> {
        if exp > 60 {
            return Err(LatticeError::ScaleOverflow(exp));
        }
        Ball::centered((1u64 << exp) as f64)
    }

    pub fn center(&self) -> LatticePoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn contains(&self, p: LatticePoint) -> bool {
        (p - self.center).norm_sq() < self.norm_sq_bound
    }

    /// All lattice sites of the ball, in lexicographic (x, y, z) order.
    pub fn sites(&self) -> Vec<LatticePoint> {
        let h = self.radius.ceil() as i64;
        let c = self.center;
        let mut out = Vec::new();
        for x in -h..=h {
            for y in -h..=h {
                for z in -h..=h {
                    let p = LatticePoint::new(c.x + x, c.y + y, c.z + z);
                    if self.contains(p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Outer boundary of the ball's lattice sites, lexicographically sorted.
    pub fn outer_boundary(&self) -> Vec<LatticePoint> {
        let h = self.radius.ceil() as i64 + 1;
        let c = self.center;
        let mut out = Vec::new();
        for x in -h..=h {
            for y in -h..=h {
                for z in -h..=h {
                    let p = LatticePoint::new(c.x + x, c.y + y, c.z + z);
                    if outer_boundary_test(|q| self.contains(q), p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    pub fn is_on_outer_boundary(&self, p: LatticePoint) -> bool {
        outer_boundary_test(|q| self.contains(q), p)
    }
}

/// `p` is in the outer boundary of `A`: not in `A` but adjacent to a site of `A`.
pub fn outer_boundary_test<F: Fn(LatticePoint) -> bool>(in_set: F, p: LatticePoint) -> bool {
    !in_set(p) && p.neighbors().iter().any(|&q| in_set(q))
}

/// Lattice point nearest to `2^n x`, ties resolved toward the
/// lexicographically smallest candidate.
pub fn nearest_scaled_point(x: [f64; 3], n: u32) -> Result<LatticePoint, LatticeError> {
    let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if !(norm < 1.0) {
        return Err(LatticeError::OutsideUnitBall(norm));
    }
    if n > 60 {
        return Err(LatticeError::ScaleOverflow(n));
    }
    let scale = (1u64 << n) as f64;
    let target = x.map(|c| c * scale);
    // Per coordinate the minimizers lie in {floor, ceil}; the lexicographic
    // order over the 8 corners is the order of this nested enumeration.
    let mut best: Option<(f64, LatticePoint)> = None;
    let lo = target.map(|c| c.floor() as i64);
    for dx in 0..2 {
        for dy in 0..2 {
            for dz in 0..2 {
                let p = LatticePoint::new(lo[0] + dx, lo[1] + dy, lo[2] + dz);
                let d = (p.x as f64 - target[0]).powi(2)
                    + (p.y as f64 - target[1]).powi(2)
                    + (p.z as f64 - target[2]).powi(2);
                match best {
                    Some((bd, _)) if d >= bd => {}
                    _ => best = Some((d, p)),
                }
            }
        }
    }
    Ok(best.expect("eight candidates").1)
}
