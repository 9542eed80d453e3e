//! Exact integer winding numbers of closed polylines.
//!
//! Every routine uses the same crossing rule: a segment is crossed by the
//! rightward horizontal ray from `z` when its y-interval half-open-straddles
//! the ray (`y_lo <= z.y < y_hi`) and `z` lies strictly to the left of it.
//! Upward segments count `+1`, downward `-1`. Side tests go through the exact
//! orientation predicate, so results are exact integers for the polygon as
//! represented in floating point. Points within the curve's degeneracy
//! tolerance of a segment are reported (pointwise) or masked (grids).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{orient, point_segment_distance, Point};
use crate::paths::{joint_polygon, ClosedCurve, PieceSet};

/// Contribution of segment `a -> b` to the winding around `z`.
/// `None` when `z` lies on the segment line within its y-range.
#[inline]
fn ray_crossing(a: Point, b: Point, z: Point) -> Option<i32> {
    if a.y <= z.y {
        if z.y < b.y {
            if z.x < a.x.min(b.x) {
                return Some(1);
            }
            if z.x > a.x.max(b.x) {
                return Some(0);
            }
            let o = orient(a, b, z);
            return if o > 0.0 {
                Some(1)
            } else if o < 0.0 {
                Some(0)
            } else {
                None
            };
        }
    } else if b.y <= z.y {
        if z.x < a.x.min(b.x) {
            return Some(-1);
        }
        if z.x > a.x.max(b.x) {
            return Some(0);
        }
        let o = orient(a, b, z);
        return if o < 0.0 {
            Some(-1)
        } else if o > 0.0 {
            Some(0)
        } else {
            None
        };
    }
    Some(0)
}

#[inline]
fn near_segment(a: Point, b: Point, z: Point, tau: f64) -> bool {
    if z.x < a.x.min(b.x) - tau
        || z.x > a.x.max(b.x) + tau
        || z.y < a.y.min(b.y) - tau
        || z.y > a.y.max(b.y) + tau
    {
        return false;
    }
    point_segment_distance(z, a, b) <= tau
}

/// Winding number of `curve` around `z`, counterclockwise positive.
pub fn winding_number(curve: &ClosedCurve, z: Point) -> Result<i32> {
    let tau = curve.degeneracy_tolerance();
    let mut w = 0;
    for (a, b) in curve.segments() {
        if near_segment(a, b, z, tau) {
            return Err(Error::Degenerate { x: z.x, y: z.y });
        }
        match ray_crossing(a, b, z) {
            Some(c) => w += c,
            None => return Err(Error::Degenerate { x: z.x, y: z.y }),
        }
    }
    Ok(w)
}

/// Winding change `theta(q) - theta(p)` accumulated by the segments listed in
/// `segs` crossing the straight segment `p -> q`.
///
/// Endpoints of curve segments lying exactly on the line `pq` are consistently
/// treated as lying to its right, so shared vertices are counted once. Returns
/// `None` when `p` or `q` lies on one of the segments.
pub(crate) fn winding_delta(curve: &ClosedCurve, segs: &[u32], p: Point, q: Point) -> Option<i32> {
    let mut d = 0;
    let (lo_x, hi_x) = (p.x.min(q.x), p.x.max(q.x));
    let (lo_y, hi_y) = (p.y.min(q.y), p.y.max(q.y));
    for &k in segs {
        let (a, b) = curve.segment(k as usize);
        if a.x.max(b.x) < lo_x || a.x.min(b.x) > hi_x || a.y.max(b.y) < lo_y || a.y.min(b.y) > hi_y {
            continue;
        }
        let op = orient(a, b, p);
        let oq = orient(a, b, q);
        if (op == 0.0 && on_segment_collinear(a, b, p)) || (oq == 0.0 && on_segment_collinear(a, b, q)) {
            return None;
        }
        if !((op > 0.0 && oq < 0.0) || (op < 0.0 && oq > 0.0)) {
            continue;
        }
        let left_a = orient(p, q, a) > 0.0;
        let left_b = orient(p, q, b) > 0.0;
        if left_a != left_b {
            d += if left_a { 1 } else { -1 };
        }
    }
    Some(d)
}

#[inline]
fn on_segment_collinear(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Uniform grid of query points at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, y_min: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return invalid("grid cell sizes must be positive and finite");
        }
        if nx == 0 || ny == 0 {
            return invalid("grid must have at least one cell in each direction");
        }
        if !x_min.is_finite() || !y_min.is_finite() {
            return invalid("grid origin must be finite");
        }
        Ok(GridSpec { x_min, y_min, dx, dy, nx, ny })
    }

    /// `n x n` grid of centres covering `[lo, hi]^2`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let d = (hi - lo) / n as f64;
        Self::new(lo, lo, d, d, n, n)
    }

    #[inline]
    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_min + (ix as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y_at(&self, iy: usize) -> f64 {
        self.y_min + (iy as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(self.x_at(ix), self.y_at(iy))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First row whose centre is `>= y` (or `> y` when `strict`).
    fn first_row_from(&self, y: f64, strict: bool) -> usize {
        let above = |iy: usize| if strict { self.y_at(iy) > y } else { self.y_at(iy) >= y };
        let guess = ((y - self.y_min) / self.dy - 0.5).ceil();
        let mut iy = if guess.is_nan() || guess < 0.0 {
            0
        } else if guess > self.ny as f64 {
            self.ny
        } else {
            guess as usize
        };
        while iy > 0 && above(iy - 1) {
            iy -= 1;
        }
        while iy < self.ny && !above(iy) {
            iy += 1;
        }
        iy
    }

    /// Columns whose centre lies in `[x0, x1]`.
    fn columns_in(&self, x0: f64, x1: f64) -> std::ops::Range<usize> {
        let lo = ((x0 - self.x_min) / self.dx - 0.5).ceil().max(0.0);
        let hi = ((x1 - self.x_min) / self.dx - 0.5).floor() + 1.0;
        let lo = if lo > self.nx as f64 { self.nx } else { lo as usize };
        let hi = if hi <= 0.0 { 0 } else if hi > self.nx as f64 { self.nx } else { hi as usize };
        lo..hi.max(lo)
    }
}

/// Winding numbers of one curve at every centre of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingField {
    pub grid: GridSpec,
    /// Row-major: `values[iy * nx + ix]`.
    pub values: Vec<i32>,
    pub degenerate_mask: Vec<bool>,
}

impl WindingField {
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid.nx + ix
    }

    /// Winding at `(ix, iy)`, `None` where masked.
    pub fn get(&self, ix: usize, iy: usize) -> Option<i32> {
        let k = self.index(ix, iy);
        (!self.degenerate_mask[k]).then_some(self.values[k])
    }

    pub fn masked_count(&self) -> usize {
        self.degenerate_mask.iter().filter(|&&m| m).count()
    }

    /// CSV dump `ix,iy,theta,masked`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ix,iy,theta,masked")?;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let k = self.index(ix, iy);
                writeln!(w, "{ix},{iy},{},{}", self.values[k], u8::from(self.degenerate_mask[k]))?;
            }
        }
        Ok(())
    }

    /// Dense JSON: `{grid, values, masked}` with row-major arrays.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "values": self.values,
            "masked": self.degenerate_mask,
        })
    }
}

#[derive(Clone, Copy)]
struct RowCrossing {
    x: f64,
    seg: u32,
}

#[derive(Clone, Copy)]
struct RowNear {
    x0: f64,
    x1: f64,
    seg: u32,
}

/// Compressed per-row lists built by a count-then-fill pass.
struct RowBuckets<T> {
    offsets: Vec<usize>,
    items: Vec<T>,
}

impl<T: Copy + Default> RowBuckets<T> {
    fn build(ny: usize, mut emit: impl FnMut(&mut dyn FnMut(usize, T))) -> Self {
        let mut counts = vec![0usize; ny + 1];
        emit(&mut |iy, _| counts[iy + 1] += 1);
        for i in 0..ny {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut items = vec![T::default(); counts[ny]];
        emit(&mut |iy, item| {
            items[cursor[iy]] = item;
            cursor[iy] += 1;
        });
        RowBuckets { offsets: counts, items }
    }

    fn row(&self, iy: usize) -> &[T] {
        &self.items[self.offsets[iy]..self.offsets[iy + 1]]
    }
}

impl Default for RowCrossing {
    fn default() -> Self {
        RowCrossing { x: 0.0, seg: 0 }
    }
}

impl Default for RowNear {
    fn default() -> Self {
        RowNear { x0: 0.0, x1: 0.0, seg: 0 }
    }
}

/// Winding numbers of `curve` on every centre of `grid`.
///
/// Segments are bucketed by grid row in one pass; each row sorts its
/// crossings by abscissa and resolves all points by a suffix sum, so the cost
/// is `O((S + P) log S)` rather than `O(S * P)`. Points within the degeneracy
/// tolerance of a segment are masked.
pub fn winding_field(curve: &ClosedCurve, grid: &GridSpec) -> WindingField {
    let tau = curve.degeneracy_tolerance();
    let bb = curve.bbox();
    let coord_scale = bb.min.x.abs().max(bb.max.x.abs()) + bb.diameter();
    // float abscissae within this distance of a point are re-decided exactly
    let slack = 1e-9 * coord_scale + f64::MIN_POSITIVE;

    let crossings = RowBuckets::build(grid.ny, |push| {
        for (k, (a, b)) in curve.segments().enumerate() {
            if a.y == b.y {
                continue;
            }
            let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
            let r0 = grid.first_row_from(lo.y, false);
            let r1 = grid.first_row_from(hi.y, false);
            let inv = (hi.x - lo.x) / (hi.y - lo.y);
            for iy in r0..r1 {
                let y = grid.y_at(iy);
                push(iy, RowCrossing { x: lo.x + (y - lo.y) * inv, seg: k as u32 });
            }
        }
    });

    let near = RowBuckets::build(grid.ny, |push| {
        for (k, (a, b)) in curve.segments().enumerate() {
            let (lo, hi) = if a.y <= b.y { (a, b) } else { (b, a) };
            let r0 = grid.first_row_from(lo.y - tau, false);
            let r1 = grid.first_row_from(hi.y + tau, true);
            for iy in r0..r1 {
                let y = grid.y_at(iy);
                let (x0, x1) = if hi.y == lo.y {
                    (lo.x.min(hi.x), lo.x.max(hi.x))
                } else {
                    let t0 = ((y - tau - lo.y) / (hi.y - lo.y)).clamp(0.0, 1.0);
                    let t1 = ((y + tau - lo.y) / (hi.y - lo.y)).clamp(0.0, 1.0);
                    let xa = lo.x + t0 * (hi.x - lo.x);
                    let xb = lo.x + t1 * (hi.x - lo.x);
                    (xa.min(xb), xa.max(xb))
                };
                push(iy, RowNear { x0: x0 - tau - slack, x1: x1 + tau + slack, seg: k as u32 });
            }
        }
    });

    let mut values = vec![0i32; grid.len()];
    let mut mask = vec![false; grid.len()];
    values
        .par_chunks_mut(grid.nx)
        .zip(mask.par_chunks_mut(grid.nx))
        .enumerate()
        .for_each(|(iy, (vals, masked))| {
            let y = grid.y_at(iy);
            let mut row: Vec<RowCrossing> = crossings.row(iy).to_vec();
            row.sort_by(|p, q| p.x.total_cmp(&q.x));
            let sign = |c: &RowCrossing| {
                let (a, b) = curve.segment(c.seg as usize);
                if a.y < b.y {
                    1
                } else {
                    -1
                }
            };
            let mut suffix = vec![0i32; row.len() + 1];
            for k in (0..row.len()).rev() {
                suffix[k] = suffix[k + 1] + sign(&row[k]);
            }
            let mut lo = 0;
            let mut hi = 0;
            for ix in 0..grid.nx {
                let px = grid.x_at(ix);
                while lo < row.len() && row[lo].x < px - slack {
                    lo += 1;
                }
                if hi < lo {
                    hi = lo;
                }
                while hi < row.len() && row[hi].x <= px + slack {
                    hi += 1;
                }
                let mut w = suffix[hi];
                let z = Point::new(px, y);
                for c in &row[lo..hi] {
                    let (a, b) = curve.segment(c.seg as usize);
                    match ray_crossing(a, b, z) {
                        Some(d) => w += d,
                        None => masked[ix] = true,
                    }
                }
                vals[ix] = w;
            }
            for nr in near.row(iy) {
                let (a, b) = curve.segment(nr.seg as usize);
                for ix in grid.columns_in(nr.x0, nr.x1) {
                    if point_segment_distance(Point::new(grid.x_at(ix), y), a, b) <= tau {
                        masked[ix] = true;
                    }
                }
            }
        });

    WindingField { grid: *grid, values, degenerate_mask: mask }
}

/// Precomputed closures for repeated additivity checks on one piece set.
pub struct AdditivityChecker {
    parent: ClosedCurve,
    pieces: Vec<ClosedCurve>,
    polygon: ClosedCurve,
}

impl AdditivityChecker {
    pub fn new(ps: &PieceSet) -> Self {
        AdditivityChecker {
            parent: ClosedCurve::new(ps.parent().clone()),
            pieces: ps.closures(),
            polygon: joint_polygon(ps),
        }
    }

    /// `(theta_parent, sum of piece windings, theta_polygon)` at `z`.
    pub fn check(&self, z: Point) -> Result<(i32, i32, i32)> {
        let parent = winding_number(&self.parent, z)?;
        let mut sum = 0;
        for c in &self.pieces {
            sum += winding_number(c, z)?;
        }
        let poly = winding_number(&self.polygon, z)?;
        Ok((parent, sum, poly))
    }

    pub fn parent(&self) -> &ClosedCurve {
        &self.parent
    }

    pub fn pieces(&self) -> &[ClosedCurve] {
        &self.pieces
    }
}

/// `(theta_parent, sum_i theta_i, theta_polygon)`; the parent winding equals
/// the sum of the other two.
pub fn additivity_check(ps: &PieceSet, z: Point) -> Result<(i32, i32, i32)> {
    AdditivityChecker::new(ps).check(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{decompose, PlanarPath};

    fn unit_square() -> ClosedCurve {
        ClosedCurve::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn circle(n: usize, turns: usize) -> ClosedCurve {
        let mut v = Vec::new();
        for _ in 0..turns {
            for k in 0..n {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                v.push(Point::new(a.cos(), a.sin()));
            }
        }
        ClosedCurve::polygon(v).unwrap()
    }

    #[test]
    fn square_windings() {
        let sq = unit_square();
        assert_eq!(winding_number(&sq, Point::new(0.5, 0.5)).unwrap(), 1);
        assert_eq!(winding_number(&sq, Point::new(10.0, 10.0)).unwrap(), 0);
        let mut rev = sq.vertices().to_vec();
        rev.reverse();
        let rev = ClosedCurve::polygon(rev).unwrap();
        assert_eq!(winding_number(&rev, Point::new(0.5, 0.5)).unwrap(), -1);
    }

    #[test]
    fn on_segment_is_degenerate() {
        let sq = unit_square();
        assert!(matches!(winding_number(&sq, Point::new(0.5, 0.0)), Err(Error::Degenerate { .. })));
        assert!(matches!(winding_number(&sq, Point::new(1.0, 1.0)), Err(Error::Degenerate { .. })));
        assert!(matches!(winding_number(&sq, Point::new(0.0, 0.3)), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn vertex_level_rays_are_consistent() {
        // the ray from z passes exactly through vertices (1,1) and (0,1)'s level
        let diamond = ClosedCurve::polygon(vec![
            Point::new(1.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(winding_number(&diamond, Point::new(1.0, 1.0)).unwrap(), 1);
        assert_eq!(winding_number(&diamond, Point::new(-1.0, 1.0)).unwrap(), 0);
        assert_eq!(winding_number(&diamond, Point::new(3.0, 1.0)).unwrap(), 0);
    }

    #[test]
    fn circle_field_is_jordan() {
        let c = circle(64, 1);
        let grid = GridSpec::square(-2.0, 2.0, 21).unwrap();
        let f = winding_field(&c, &grid);
        for iy in 0..21 {
            for ix in 0..21 {
                let z = grid.center(ix, iy);
                let r = z.norm();
                if r <= 0.9 {
                    assert_eq!(f.get(ix, iy), Some(1));
                } else if r >= 1.1 {
                    assert_eq!(f.get(ix, iy), Some(0));
                }
            }
        }
        let c2 = circle(64, 2);
        let f2 = winding_field(&c2, &grid);
        for k in 0..grid.len() {
            assert_eq!(f2.values[k], 2 * f.values[k]);
        }
    }

    #[test]
    fn field_masks_points_on_segments() {
        let sq = unit_square();
        // centres at 0.0, 0.5, 1.0 along both axes hit the edges
        let grid = GridSpec::new(-0.25, -0.25, 0.5, 0.5, 3, 3).unwrap();
        let f = winding_field(&sq, &grid);
        for iy in 0..3 {
            for ix in 0..3 {
                let z = grid.center(ix, iy);
                let expected = winding_number(&sq, z).ok();
                assert_eq!(f.get(ix, iy), expected, "at {z:?}");
            }
        }
        assert_eq!(f.get(1, 1), Some(1));
        assert_eq!(f.masked_count(), 8);
    }

    #[test]
    fn field_outside_bbox_is_zero() {
        let c = circle(16, 3);
        let grid = GridSpec::square(-3.0, 3.0, 30).unwrap();
        let f = winding_field(&c, &grid);
        for iy in 0..30 {
            for ix in 0..30 {
                if !c.bbox().contains(grid.center(ix, iy)) {
                    assert_eq!(f.get(ix, iy), Some(0));
                }
            }
        }
    }

    #[test]
    fn winding_delta_matches_pointwise_difference() {
        let c = circle(64, 2);
        let all: Vec<u32> = (0..c.segment_count() as u32).collect();
        let p = Point::new(0.1, 0.05);
        for q in [Point::new(2.0, 0.3), Point::new(0.0, 0.0), Point::new(-0.99, 0.0), Point::new(0.5, -1.7)] {
            let d = winding_delta(&c, &all, p, q).unwrap();
            let expect = winding_number(&c, q).unwrap() - winding_number(&c, p).unwrap();
            assert_eq!(d, expect);
        }
    }

    #[test]
    fn winding_delta_through_vertex() {
        let sq = unit_square();
        let all: Vec<u32> = (0..4).collect();
        // passes exactly through the corner (1,1)
        assert_eq!(winding_delta(&sq, &all, Point::new(0.5, 0.5), Point::new(1.5, 1.5)), Some(-1));
        // grazes the corner (1,0) from outside
        assert_eq!(winding_delta(&sq, &all, Point::new(2.0, 1.0), Point::new(0.0, -1.0)), Some(0));
        // runs along the edge y = 0 from outside: the collinear edge is ignored
        assert_eq!(winding_delta(&sq, &all, Point::new(-1.0, 0.0), Point::new(0.5, 0.0)), None);
    }

    #[test]
    fn additivity_square_halves() {
        let p = PlanarPath::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.0, 0.2),
        ])
        .unwrap();
        let ps = decompose(&p, 2).unwrap();
        let (parent, sum, poly) = additivity_check(&ps, Point::new(0.7, 0.4)).unwrap();
        assert_eq!(parent, 1);
        assert_eq!(parent, sum + poly);
        let one = decompose(&p, 1).unwrap();
        assert_eq!(additivity_check(&one, Point::new(0.5, 0.5)).unwrap(), (1, 1, 0));
    }
}
