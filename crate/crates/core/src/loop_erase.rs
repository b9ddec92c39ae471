//! Chronological loop-erasure.
//!
//! Two independent formulations live here: [`loop_erase_reference`] follows
//! the last-visit recursion `s_0 = max{t : p(t) = p(0)}`,
//! `s_i = max{t : p(t) = p(s_{i-1} + 1)}` literally, while [`LoopEraser`]
//! erases on revisit while the walk streams in. They agree on every finite
//! path; the test suite checks this instead of assuming it.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::lattice::{Ball, LatticePoint};
use crate::walk::{check_steps, Path, WalkError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SapError {
    #[error(transparent)]
    Steps(#[from] WalkError),
    #[error("site {0} repeats at indices {1} and {2}")]
    Repeated(LatticePoint, usize, usize),
}

/// A nearest-neighbor path with pairwise distinct sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelfAvoidingPath {
    points: Vec<LatticePoint>,
}

impl SelfAvoidingPath {
    pub fn new(points: Vec<LatticePoint>) -> Result<Self, SapError> {
        check_steps(&points)?;
        let mut seen = FxHashMap::default();
        for (i, &p) in points.iter().enumerate() {
            if let Some(j) = seen.insert(p, i) {
                return Err(SapError::Repeated(p, j, i));
            }
        }
        Ok(SelfAvoidingPath { points })
    }

    pub(crate) fn from_trusted(points: Vec<LatticePoint>) -> Self {
        SelfAvoidingPath { points }
    }

    pub fn single(p: LatticePoint) -> Self {
        SelfAvoidingPath { points: vec![p] }
    }

    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn first(&self) -> LatticePoint {
        self.points[0]
    }

    pub fn last(&self) -> LatticePoint {
        *self.points.last().expect("nonempty")
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        self.points.contains(&p)
    }

    pub fn as_path(&self) -> Path {
        Path::from_trusted(self.points.clone())
    }

    pub fn code(&self) -> Option<PathCode> {
        PathCode::from_points(&self.points)
    }
}

/// Compact key for short paths: step directions packed 3 bits apiece.
/// Holds paths of up to [`PathCode::MAX_LEN`] steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathCode {
    len: u8,
    bits: u128,
}

impl PathCode {
    pub const MAX_LEN: usize = 42;

    pub fn from_points(points: &[LatticePoint]) -> Option<Self> {
        if points.len() > Self::MAX_LEN + 1 {
            return None;
        }
        let mut bits = 0u128;
        for (i, w) in points.windows(2).enumerate() {
            let d = w[0].direction_to(w[1])? as u128;
            bits |= d << (3 * i);
        }
        Some(PathCode { len: (points.len() - 1) as u8, bits })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn directions(&self) -> Vec<usize> {
        (0..self.len as usize).map(|i| ((self.bits >> (3 * i)) & 7) as usize).collect()
    }

    pub fn to_points(&self, start: LatticePoint) -> Vec<LatticePoint> {
        Path::from_directions(start, &self.directions()).into_points()
    }
}

/// Loop-erasure computed by the last-visit recursion, as an oracle.
pub fn loop_erase_reference(path: &Path) -> SelfAvoidingPath {
    let pts = path.points();
    let m = pts.len() - 1;
    let last_visit = |v: LatticePoint| -> usize {
        (0..=m).rev().find(|&t| pts[t] == v).expect("v occurs in the path")
    };
    let mut s = last_visit(pts[0]);
    let mut out = vec![pts[s]];
    while s != m {
        s = last_visit(pts[s + 1]);
        out.push(pts[s]);
    }
    SelfAvoidingPath::from_trusted(out)
}

/// Site -> position lookup used by [`LoopEraser`].
///
/// Lazy indices (`EXACT = false`) may hold stale entries: the eraser then
/// validates every hit against the current path and never deletes. Exact
/// indices get a `remove` for every erased site and are trusted as is.
pub trait SiteIndex {
    const EXACT: bool;
    fn get(&self, p: LatticePoint) -> Option<u32>;
    fn set(&mut self, p: LatticePoint, pos: u32);
    fn remove(&mut self, p: LatticePoint);
    fn clear(&mut self);
}

/// Hash map keyed by lattice point; works for unbounded walks.
#[derive(Default, Debug, Clone)]
pub struct HashSiteIndex {
    map: FxHashMap<LatticePoint, u32>,
}

impl SiteIndex for HashSiteIndex {
    const EXACT: bool = false;

    #[inline]
    fn get(&self, p: LatticePoint) -> Option<u32> {
        self.map.get(&p).copied()
    }

    #[inline]
    fn set(&mut self, p: LatticePoint, pos: u32) {
        self.map.insert(p, pos);
    }

    fn remove(&mut self, p: LatticePoint) {
        self.map.remove(&p);
    }

    fn clear(&mut self) {
        self.map.clear();
    }
}

/// Dense index over the cube `[-h, h]^3`, split into `2^b`-sided blocks that
/// are handed out lazily from a reusable pool.
///
/// Walks stopped on exiting a ball of radius `r` fit when `h >= r + 1`.
/// Lookups of points outside the cube report a miss.
#[derive(Debug, Clone)]
pub struct GridSiteIndex {
    half_width: i64,
    block_bits: u32,
    dim: usize,
    directory: Vec<u32>,
    blocks: Vec<u32>,
    used_blocks: usize,
    touched: Vec<usize>,
}

const GRID_DIRECTORY_LIMIT: usize = 1 << 25;

impl GridSiteIndex {
    pub fn new(half_width: i64) -> Self {
        let side = (2 * half_width + 1) as usize;
        let mut block_bits = 3;
        while side.div_ceil(1 << block_bits).pow(3) > GRID_DIRECTORY_LIMIT {
            block_bits += 1;
        }
        let dim = side.div_ceil(1 << block_bits);
        GridSiteIndex {
            half_width,
            block_bits,
            dim,
            directory: vec![0; dim * dim * dim],
            blocks: Vec::new(),
            used_blocks: 0,
            touched: Vec::new(),
        }
    }

    /// Index large enough for walks stopped at exiting `ball`.
    pub fn for_ball(ball: &Ball) -> Self {
        let c = ball.center();
        let reach = ball.radius().ceil() as i64 + 1;
        let h = reach + c.x.abs().max(c.y.abs()).max(c.z.abs());
        Self::new(h)
    }

    #[inline]
    fn locate(&self, p: LatticePoint) -> Option<(usize, usize)> {
        let h = self.half_width;
        if p.x < -h || p.x > h || p.y < -h || p.y > h || p.z < -h || p.z > h {
            return None;
        }
        let (ox, oy, oz) = ((p.x + h) as usize, (p.y + h) as usize, (p.z + h) as usize);
        let b = self.block_bits;
        let mask = (1usize << b) - 1;
        let slot = ((ox >> b) * self.dim + (oy >> b)) * self.dim + (oz >> b);
        let cell = (((ox & mask) << b) | (oy & mask)) << b | (oz & mask);
        Some((slot, cell))
    }

    /// Offset of a cell in the block pool, allocating its block if needed.
    #[inline]
    fn cell_index(&mut self, slot: usize, cell: usize) -> usize {
        let size = 1usize << (3 * self.block_bits);
        let mut block = self.directory[slot];
        if block == 0 {
            if self.used_blocks * size == self.blocks.len() {
                self.blocks.resize(self.blocks.len() + size, u32::MAX);
            }
            self.used_blocks += 1;
            block = self.used_blocks as u32;
            self.directory[slot] = block;
            self.touched.push(slot);
        }
        (block as usize - 1) * size + cell
    }
}

impl SiteIndex for GridSiteIndex {
    const EXACT: bool = true;

    #[inline]
    fn get(&self, p: LatticePoint) -> Option<u32> {
        let (slot, cell) = self.locate(p)?;
        let block = self.directory[slot];
        if block == 0 {
            return None;
        }
        let size = 1usize << (3 * self.block_bits);
        let v = self.blocks[(block as usize - 1) * size + cell];
        (v != u32::MAX).then_some(v)
    }

    #[inline]
    fn set(&mut self, p: LatticePoint, pos: u32) {
        let (slot, cell) = self
            .locate(p)
            .unwrap_or_else(|| panic!("{p} outside grid index of half-width {}", self.half_width));
        let idx = self.cell_index(slot, cell);
        self.blocks[idx] = pos;
    }

    #[inline]
    fn remove(&mut self, p: LatticePoint) {
        if let Some((slot, cell)) = self.locate(p) {
            let block = self.directory[slot];
            if block != 0 {
                let size = 1usize << (3 * self.block_bits);
                self.blocks[(block as usize - 1) * size + cell] = u32::MAX;
            }
        }
    }

    /// Releases blocks back to the pool. Callers remove every live site
    /// first, so released blocks are blank.
    fn clear(&mut self) {
        for &slot in &self.touched {
            self.directory[slot] = 0;
        }
        self.touched.clear();
        self.used_blocks = 0;
    }
}

/// Streaming erase-on-revisit loop-erasure.
///
/// Keeps the current self-avoiding prefix and a site -> position index. With
/// a lazy index nothing is deleted on truncation: an entry is live only while
/// its position is inside the prefix and the prefix still holds that site
/// there. With an exact index erased sites are removed, amortized O(1) per
/// step since every site is erased at most once.
#[derive(Default, Debug, Clone)]
pub struct LoopEraser<I: SiteIndex = HashSiteIndex> {
    sap: Vec<LatticePoint>,
    index: I,
}

impl LoopEraser<HashSiteIndex> {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LoopEraser<GridSiteIndex> {
    /// Eraser backed by a dense grid sized for walks stopped at exiting `ball`.
    pub fn for_ball(ball: &Ball) -> Self {
        LoopEraser { sap: Vec::new(), index: GridSiteIndex::for_ball(ball) }
    }
}

impl<I: SiteIndex> LoopEraser<I> {
    pub fn with_index(index: I) -> Self {
        LoopEraser { sap: Vec::new(), index }
    }

    pub fn reset(&mut self) {
        if I::EXACT {
            for &q in &self.sap {
                self.index.remove(q);
            }
        }
        self.sap.clear();
        self.index.clear();
    }

    #[inline]
    pub fn push(&mut self, p: LatticePoint) {
        match self.position(p) {
            Some(pos) => {
                if I::EXACT {
                    for &q in &self.sap[pos + 1..] {
                        self.index.remove(q);
                    }
                }
                self.sap.truncate(pos + 1)
            }
            None => {
                self.index.set(p, self.sap.len() as u32);
                self.sap.push(p);
            }
        }
    }

    /// Position of `p` in the current erased path.
    #[inline]
    pub fn position(&self, p: LatticePoint) -> Option<usize> {
        let pos = self.index.get(p)? as usize;
        if I::EXACT {
            return Some(pos);
        }
        (pos < self.sap.len() && self.sap[pos] == p).then_some(pos)
    }

    #[inline]
    pub fn contains(&self, p: LatticePoint) -> bool {
        self.position(p).is_some()
    }

    pub fn current(&self) -> &[LatticePoint] {
        &self.sap
    }

    /// Number of steps of the current erased path.
    pub fn len(&self) -> usize {
        self.sap.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.sap.is_empty()
    }

    pub fn to_sap(&self) -> SelfAvoidingPath {
        SelfAvoidingPath::from_trusted(self.sap.clone())
    }

    pub fn into_sap(self) -> SelfAvoidingPath {
        SelfAvoidingPath::from_trusted(self.sap)
    }
}

/// Loop-erasure of a finite path by erase-on-revisit.
pub fn loop_erase_fast(path: &Path) -> SelfAvoidingPath {
    loop_erase_stream(path.points().iter().copied())
}

/// Loop-erasure of a streamed sequence of points.
pub fn loop_erase_stream<I: IntoIterator<Item = LatticePoint>>(points: I) -> SelfAvoidingPath {
    let mut le = LoopEraser::new();
    for p in points {
        le.push(p);
    }
    le.into_sap()
}

pub fn reverse_path(path: &Path) -> Path {
    let mut pts = path.points().to_vec();
    pts.reverse();
    Path::from_trusted(pts)
}

/// Number of steps of the loop-erasure of an exit-stopped walk.
pub fn lerw_length(path: &Path, ball: &Ball) -> usize {
    debug_assert!(!ball.contains(path.last()));
    loop_erase_fast(path).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::UNIT_STEPS;
    use crate::rng::RngStream;
    use crate::walk::sample_srw_exit;
    use proptest::prelude::*;

    const O: LatticePoint = LatticePoint::ORIGIN;
    const E1: LatticePoint = UNIT_STEPS[0];
    const E2: LatticePoint = UNIT_STEPS[2];
    const E3: LatticePoint = UNIT_STEPS[4];

    fn path(pts: &[LatticePoint]) -> Path {
        Path::new(pts.to_vec()).unwrap()
    }

    #[test]
    fn reference_examples() {
        let sap = path(&[O, E1, E1 + E2, E1 + E2 + E3]);
        assert_eq!(loop_erase_reference(&sap).points(), sap.points());
        assert_eq!(loop_erase_reference(&path(&[O, E1, O, E2])).points(), &[O, E2]);
        assert_eq!(
            loop_erase_reference(&path(&[O, E1, E1 + E2, E2, O, E3])).points(),
            &[O, E3]
        );
        assert_eq!(loop_erase_reference(&Path::single(O)).points(), &[O]);
    }

    #[test]
    fn fast_examples() {
        assert_eq!(loop_erase_fast(&path(&[O, E1, O, E2])).points(), &[O, E2]);
        assert_eq!(loop_erase_fast(&path(&[O, E1, E1 + E2, E2, O, E3])).points(), &[O, E3]);
        let sap = path(&[O, E2, E2 + E2]);
        assert_eq!(loop_erase_fast(&sap).points(), sap.points());
    }

    #[test]
    fn exhaustive_agreement_length_6() {
        let mut dirs = [0usize; 6];
        let mut checked = 0;
        for code in 0..6usize.pow(6) {
            let mut c = code;
            for d in dirs.iter_mut() {
                *d = c % 6;
                c /= 6;
            }
            let p = Path::from_directions(O, &dirs);
            assert_eq!(loop_erase_fast(&p), loop_erase_reference(&p), "{:?}", p.points());
            checked += 1;
        }
        assert_eq!(checked, 46_656);
    }

    #[test]
    fn randomized_agreement_in_b16() {
        let b = Ball::centered(16.0).unwrap();
        let mut le = LoopEraser::new();
        for k in 0..100_000u64 {
            let walk = sample_srw_exit(O, &b, &mut RngStream::new(17, k)).unwrap();
            le.reset();
            for &q in walk.points() {
                le.push(q);
            }
            let fast = le.to_sap();
            let reference = loop_erase_reference(&walk);
            assert_eq!(fast, reference);
            assert_eq!(fast.first(), O);
            assert_eq!(fast.last(), walk.last());
            assert_eq!(lerw_length(&walk, &b), fast.len());
        }
    }

    #[test]
    fn grid_eraser_matches_reference() {
        let b = Ball::centered(24.0).unwrap();
        let mut grid = LoopEraser::for_ball(&b);
        for k in 0..20_000u64 {
            let walk = sample_srw_exit(O, &b, &mut RngStream::new(19, k)).unwrap();
            grid.reset();
            for &q in walk.points() {
                grid.push(q);
            }
            let reference = loop_erase_reference(&walk);
            assert_eq!(grid.current(), reference.points());
            for &q in walk.points() {
                assert_eq!(grid.position(q), reference.points().iter().position(|&r| r == q));
            }
        }
    }

    #[test]
    fn grid_index_bounds() {
        let mut g = GridSiteIndex::new(3);
        assert_eq!(g.get(LatticePoint::new(4, 0, 0)), None);
        g.set(LatticePoint::new(-3, 3, -3), 7);
        assert_eq!(g.get(LatticePoint::new(-3, 3, -3)), Some(7));
        g.remove(LatticePoint::new(-3, 3, -3));
        assert_eq!(g.get(LatticePoint::new(-3, 3, -3)), None);
        g.clear();
        assert_eq!(g.used_blocks, 0);
    }

    #[test]
    fn lerw_length_small_balls() {
        let b1 = Ball::centered(1.0).unwrap();
        let b2 = Ball::centered(2.0).unwrap();
        for k in 0..1000 {
            let w = sample_srw_exit(O, &b1, &mut RngStream::new(2, k)).unwrap();
            assert_eq!(lerw_length(&w, &b1), 1);
            let w = sample_srw_exit(O, &b2, &mut RngStream::new(3, k)).unwrap();
            assert!(lerw_length(&w, &b2) >= 2);
        }
    }

    #[test]
    fn reverse_examples() {
        let p = path(&[O, E1]);
        assert_eq!(reverse_path(&p).points(), &[E1, O]);
        let q = path(&[O, E1, E1 + E2, E2]);
        assert_eq!(reverse_path(&reverse_path(&q)), q);
        assert_eq!(reverse_path(&q).len(), q.len());
    }

    #[test]
    fn eraser_position_tracks_truncation() {
        let mut le = LoopEraser::new();
        for q in [O, E1, E1 + E2, E1] {
            le.push(q);
        }
        assert_eq!(le.current(), &[O, E1]);
        assert!(!le.contains(E1 + E2));
        assert_eq!(le.position(E1), Some(1));
        le.push(E1 + E2);
        assert_eq!(le.position(E1 + E2), Some(2));
    }

    #[test]
    fn sap_validation_and_codes() {
        assert!(SelfAvoidingPath::new(vec![O, E1, O]).is_err());
        let s = SelfAvoidingPath::new(vec![O, E1, E1 + E2]).unwrap();
        let code = s.code().unwrap();
        assert_eq!(code.len(), 2);
        assert_eq!(code.to_points(O), s.points());
    }

    fn arb_path(max_len: usize) -> impl Strategy<Value = Path> {
        proptest::collection::vec(0usize..6, 0..max_len)
            .prop_map(|dirs| Path::from_directions(O, &dirs))
    }

    proptest! {
        #[test]
        fn fast_equals_reference(p in arb_path(200)) {
            prop_assert_eq!(loop_erase_fast(&p), loop_erase_reference(&p));
        }

        #[test]
        fn grid_eraser_equals_hash_eraser(p in arb_path(300)) {
            let mut grid = LoopEraser::with_index(GridSiteIndex::new(301));
            let mut hash = LoopEraser::new();
            for &q in p.points() {
                grid.push(q);
                hash.push(q);
                prop_assert_eq!(grid.current(), hash.current());
            }
        }

        #[test]
        fn erasure_is_idempotent_and_self_avoiding(p in arb_path(200)) {
            let le = loop_erase_fast(&p);
            prop_assert!(SelfAvoidingPath::new(le.points().to_vec()).is_ok());
            prop_assert_eq!(le.first(), p.first());
            prop_assert_eq!(le.last(), p.last());
            prop_assert_eq!(loop_erase_fast(&le.as_path()), le);
        }
    }
}
