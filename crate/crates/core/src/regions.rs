//! Areas and measures of large-winding sets.
//!
//! All estimates live on a square lattice of cell size `h` anchored at a
//! fixed point: the estimated set is the union of lattice cells whose centre
//! satisfies the winding condition. A quadtree over aligned blocks of lattice
//! cells evaluates this count without visiting every cell. A block is decided
//! in bulk when its centre winding `w` and the number `k` of curve segments
//! touching it certify the condition (every point of the block has winding in
//! `[w - k, w + k]`); otherwise it is split, down to single lattice cells.
//!
//! Because the answer depends only on the lattice, estimates computed with the
//! same lattice are comparable cell by cell: monotonicity in the level, nesting
//! and the exactly-n decomposition hold exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{point_segment_distance, segment_may_touch_box, BBox, Point};
use crate::measure::MeasureAtoms;
use crate::paths::{ClosedCurve, PieceSet};
use crate::winding::{winding_delta, winding_number};

/// Which winding values belong to the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMode {
    /// `theta >= n`
    AtLeast,
    /// `theta == n`
    Exactly,
    /// `|theta| >= n`
    AbsAtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Threshold {
    mode: LevelMode,
    n: i32,
}

impl Threshold {
    fn holds(&self, w: i32) -> bool {
        match self.mode {
            LevelMode::AtLeast => w >= self.n,
            LevelMode::Exactly => w == self.n,
            LevelMode::AbsAtLeast => w.abs() >= self.n,
        }
    }

    /// Decision for every winding in `[lo, hi]`: `Some(true)` when all satisfy
    /// the condition, `Some(false)` when none does.
    fn decide(&self, lo: i32, hi: i32) -> Option<bool> {
        let n = self.n;
        match self.mode {
            LevelMode::AtLeast => {
                if lo >= n {
                    Some(true)
                } else if hi < n {
                    Some(false)
                } else {
                    None
                }
            }
            LevelMode::Exactly => {
                if lo == hi {
                    Some(lo == n)
                } else if n < lo || n > hi {
                    Some(false)
                } else {
                    None
                }
            }
            LevelMode::AbsAtLeast => {
                if lo >= n || hi <= -n {
                    Some(true)
                } else if lo > -n && hi < n {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }
}

/// Lattice cell size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Floor {
    /// Cell size as a fraction of the bounding-box diameter.
    Relative(f64),
    /// Fixed cell size.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    pub floor: Floor,
    /// Cap on visited quadtree nodes; blocks left undecided are masked.
    pub max_cells: usize,
    pub anchor: Point,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy {
            floor: Floor::Relative(2f64.powi(-14)),
            max_cells: 10_000_000,
            anchor: Point::ORIGIN,
        }
    }
}

impl ResolutionPolicy {
    pub fn absolute(h: f64) -> Self {
        ResolutionPolicy { floor: Floor::Absolute(h), ..Default::default() }
    }

    pub fn relative(fraction: f64) -> Self {
        ResolutionPolicy { floor: Floor::Relative(fraction), ..Default::default() }
    }

    /// Concrete cell size for a region of the given diameter.
    pub fn cell_size(&self, diameter: f64) -> f64 {
        match self.floor {
            Floor::Relative(f) => {
                let d = if diameter > 0.0 { diameter } else { 1.0 };
                d * f
            }
            Floor::Absolute(h) => h,
        }
    }

    /// The same lattice, pinned to the size computed for `diameter`.
    pub fn pinned(&self, diameter: f64) -> Self {
        ResolutionPolicy { floor: Floor::Absolute(self.cell_size(diameter)), ..*self }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.floor {
            Floor::Relative(f) => f > 0.0 && f.is_finite(),
            Floor::Absolute(h) => h > 0.0 && h.is_finite(),
        };
        if !ok {
            return invalid("resolution floor must be positive and finite");
        }
        if self.max_cells == 0 {
            return invalid("max_cells must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Inside,
    Masked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub center: Point,
    /// Side length of the (square) block.
    pub size: f64,
    pub area: f64,
    pub state: CellState,
}

/// Area of a winding set with its error accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub area: f64,
    /// Area of lattice cells whose centre could not be classified.
    pub masked_area: f64,
    /// Lattice cell size.
    pub resolution: f64,
    /// Decided inside blocks and masked blocks.
    pub cells: Vec<RegionCell>,
    /// Quadtree nodes visited.
    pub n_nodes: usize,
    pub inside_count: u64,
    pub masked_count: u64,
}

impl RegionEstimate {
    fn empty(h: f64) -> Self {
        RegionEstimate {
            area: 0.0,
            masked_area: 0.0,
            resolution: h,
            cells: Vec::new(),
            n_nodes: 0,
            inside_count: 0,
            masked_count: 0,
        }
    }

    /// `masked / (area + masked)`, zero for an empty estimate.
    pub fn masked_fraction(&self) -> f64 {
        let tot = self.area + self.masked_area;
        if tot > 0.0 {
            self.masked_area / tot
        } else {
            0.0
        }
    }

    /// `{area, masked_area, resolution, n_cells}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "area": self.area,
            "masked_area": self.masked_area,
            "resolution": self.resolution,
            "n_cells": self.cells.len(),
        })
    }

    /// Cell dump `cx,cy,size,inside`.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "cx,cy,size,inside")?;
        for c in &self.cells {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                c.center.x,
                c.center.y,
                c.size,
                u8::from(c.state == CellState::Inside)
            )?;
        }
        Ok(())
    }
}

struct Constraint<'a> {
    curve: &'a ClosedCurve,
    tau: f64,
}

#[derive(Clone)]
struct CurveState {
    /// Winding at the node centre; `None` when the centre lies on the curve.
    winding: Option<i32>,
    segs: Vec<u32>,
}

struct Quadtree<'a> {
    constraints: Vec<Constraint<'a>>,
    /// `levels[l][c]` is the condition on curve `c` for output `l`.
    levels: Vec<Vec<Threshold>>,
    anchor: Point,
    h: f64,
    max_nodes: usize,
    n_nodes: usize,
    out: Vec<RegionEstimate>,
}

impl<'a> Quadtree<'a> {
    fn block_box(&self, i0: i64, j0: i64, level: u32) -> BBox {
        let s = (1i64 << level) as f64;
        BBox {
            min: Point::new(self.anchor.x + i0 as f64 * self.h, self.anchor.y + j0 as f64 * self.h),
            max: Point::new(
                self.anchor.x + (i0 as f64 + s) * self.h,
                self.anchor.y + (j0 as f64 + s) * self.h,
            ),
        }
    }

    fn block_center(&self, i0: i64, j0: i64, level: u32) -> Point {
        let half = (1i64 << level) as f64 * 0.5;
        Point::new(
            self.anchor.x + (i0 as f64 + half) * self.h,
            self.anchor.y + (j0 as f64 + half) * self.h,
        )
    }

    fn record(&mut self, out: usize, i0: i64, j0: i64, level: u32, state: CellState) {
        let side = 1u64 << level;
        let count = side * side;
        let size = side as f64 * self.h;
        let center = self.block_center(i0, j0, level);
        let est = &mut self.out[out];
        match state {
            CellState::Inside => est.inside_count += count,
            CellState::Masked => est.masked_count += count,
        }
        est.cells.push(RegionCell { center, size, area: size * size, state });
    }

    fn visit(&mut self, i0: i64, j0: i64, level: u32, states: Vec<CurveState>, pending: Vec<usize>) {
        self.n_nodes += 1;
        for &l in &pending {
            self.out[l].n_nodes += 1;
        }

        let mut open = Vec::with_capacity(pending.len());
        for l in pending {
            let mut all_inside = true;
            let mut outside = false;
            for (th, st) in self.levels[l].iter().zip(&states) {
                let decision = st.winding.and_then(|w| {
                    let k = st.segs.len() as i32;
                    th.decide(w - k, w + k)
                });
                match decision {
                    Some(false) => {
                        outside = true;
                        break;
                    }
                    Some(true) => {}
                    None => all_inside = false,
                }
            }
            if outside {
                continue;
            }
            if all_inside {
                self.record(l, i0, j0, level, CellState::Inside);
            } else {
                open.push(l);
            }
        }
        if open.is_empty() {
            return;
        }

        if level == 0 {
            let center = self.block_center(i0, j0, 0);
            let mut windings = Vec::with_capacity(states.len());
            for (c, st) in self.constraints.iter().zip(&states) {
                let near = st.segs.iter().any(|&k| {
                    let (a, b) = c.curve.segment(k as usize);
                    point_segment_distance(center, a, b) <= c.tau
                });
                windings.push(if near { None } else { st.winding });
            }
            for l in open {
                let mut degenerate = false;
                let mut holds = true;
                for (th, w) in self.levels[l].iter().zip(&windings) {
                    match w {
                        Some(w) => holds &= th.holds(*w),
                        None => degenerate = true,
                    }
                }
                if !holds {
                    continue;
                }
                let state = if degenerate { CellState::Masked } else { CellState::Inside };
                self.record(l, i0, j0, 0, state);
            }
            return;
        }

        if self.n_nodes >= self.max_nodes {
            for l in open {
                self.record(l, i0, j0, level, CellState::Masked);
            }
            return;
        }

        let parent_center = self.block_center(i0, j0, level);
        let half = 1i64 << (level - 1);
        for (di, dj) in [(0, 0), (half, 0), (0, half), (half, half)] {
            let (ci, cj) = (i0 + di, j0 + dj);
            let bx = self.block_box(ci, cj, level - 1);
            let cc = self.block_center(ci, cj, level - 1);
            let child_states: Vec<CurveState> = self
                .constraints
                .iter()
                .zip(&states)
                .map(|(c, st)| {
                    let probe = bx.expand(c.tau + 1e-12 * self.h);
                    let segs: Vec<u32> = st
                        .segs
                        .iter()
                        .copied()
                        .filter(|&k| {
                            let (a, b) = c.curve.segment(k as usize);
                            segment_may_touch_box(a, b, &probe)
                        })
                        .collect();
                    let winding = match st.winding {
                        Some(w) => winding_delta(c.curve, &st.segs, parent_center, cc).map(|d| w + d),
                        None => winding_number(c.curve, cc).ok(),
                    };
                    CurveState { winding, segs }
                })
                .collect();
            self.visit(ci, cj, level - 1, child_states, open.clone());
        }
    }
}

/// One quadtree pass over `curves`; output `l` is the set where every curve
/// `c` satisfies `levels[l][c]`.
fn run_quadtree(
    curves: &[&ClosedCurve],
    levels: Vec<Vec<Threshold>>,
    policy: &ResolutionPolicy,
) -> Result<Vec<RegionEstimate>> {
    policy.validate()?;
    let diameter = curves.iter().map(|c| c.bbox().diameter()).fold(0.0, f64::max);
    let h = policy.cell_size(diameter);
    let mut roi = curves[0].bbox();
    for c in &curves[1..] {
        roi = roi.intersection(&c.bbox());
    }
    if roi.is_empty() {
        return Ok(levels.iter().map(|_| RegionEstimate::empty(h)).collect());
    }

    let anchor = policy.anchor;
    let i_lo = ((roi.min.x - anchor.x) / h).floor() as i64;
    let i_hi = ((roi.max.x - anchor.x) / h).floor() as i64;
    let j_lo = ((roi.min.y - anchor.y) / h).floor() as i64;
    let j_hi = ((roi.max.y - anchor.y) / h).floor() as i64;
    let span = (i_hi - i_lo + 1).max(j_hi - j_lo + 1).max(1) as u64;
    let level = 64 - (span - 1).leading_zeros();
    if level > 40 {
        return invalid(format!("resolution {h} is too fine for a region of diameter {diameter}"));
    }

    let constraints: Vec<Constraint> =
        curves.iter().map(|&curve| Constraint { curve, tau: curve.degeneracy_tolerance() }).collect();
    let n_out = levels.len();
    let mut tree = Quadtree {
        constraints,
        levels,
        anchor,
        h,
        max_nodes: policy.max_cells,
        n_nodes: 0,
        out: (0..n_out).map(|_| RegionEstimate::empty(h)).collect(),
    };
    let center = tree.block_center(i_lo, j_lo, level);
    let root_box = tree.block_box(i_lo, j_lo, level);
    let states = tree
        .constraints
        .iter()
        .map(|c| {
            let probe = root_box.expand(c.tau);
            let segs = (0..c.curve.segment_count() as u32)
                .filter(|&k| {
                    let (a, b) = c.curve.segment(k as usize);
                    segment_may_touch_box(a, b, &probe)
                })
                .collect();
            CurveState { winding: winding_number(c.curve, center).ok(), segs }
        })
        .collect();
    tree.visit(i_lo, j_lo, level, states, (0..n_out).collect());

    let mut out = tree.out;
    for est in &mut out {
        est.area = est.inside_count as f64 * h * h;
        est.masked_area = est.masked_count as f64 * h * h;
    }
    Ok(out)
}

fn level_threshold(mode: LevelMode, n: i32) -> Result<Threshold> {
    if n < 1 {
        return invalid(format!("winding level must be at least 1, got {n}"));
    }
    Ok(Threshold { mode, n })
}

/// Area of `{theta >= n}`, `{theta == n}` or `{|theta| >= n}` for one curve.
pub fn level_set_area(
    curve: &ClosedCurve,
    n: i32,
    mode: LevelMode,
    policy: &ResolutionPolicy,
) -> Result<RegionEstimate> {
    let mut out = run_quadtree(&[curve], vec![vec![level_threshold(mode, n)?]], policy)?;
    Ok(out.remove(0))
}

/// [`level_set_area`] for several levels in one pass.
pub fn level_set_areas(
    curve: &ClosedCurve,
    ns: &[i32],
    mode: LevelMode,
    policy: &ResolutionPolicy,
) -> Result<Vec<RegionEstimate>> {
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    let levels = ns.iter().map(|&n| Ok(vec![level_threshold(mode, n)?])).collect::<Result<_>>()?;
    run_quadtree(&[curve], levels, policy)
}

/// Area of `{theta_X >= n, theta_Y >= m}`.
pub fn joint_area(
    cx: &ClosedCurve,
    cy: &ClosedCurve,
    n: i32,
    m: i32,
    policy: &ResolutionPolicy,
) -> Result<RegionEstimate> {
    let mut out = joint_areas(cx, cy, &[(n, m)], policy)?;
    Ok(out.remove(0))
}

/// [`joint_area`] for several `(n, m)` in one pass.
pub fn joint_areas(
    cx: &ClosedCurve,
    cy: &ClosedCurve,
    nm: &[(i32, i32)],
    policy: &ResolutionPolicy,
) -> Result<Vec<RegionEstimate>> {
    if nm.is_empty() {
        return Ok(Vec::new());
    }
    let levels = nm
        .iter()
        .map(|&(n, m)| {
            Ok(vec![level_threshold(LevelMode::AtLeast, n)?, level_threshold(LevelMode::AtLeast, m)?])
        })
        .collect::<Result<_>>()?;
    run_quadtree(&[cx, cy], levels, policy)
}

/// Atoms of density `n m` on the joint set: one per inside block.
pub fn measure_from_region(est: &RegionEstimate, n: i32, m: i32) -> MeasureAtoms {
    let nm = f64::from(n) * f64::from(m);
    let atoms = est
        .cells
        .iter()
        .filter(|c| c.state == CellState::Inside)
        .map(|c| (c.center, nm * c.area))
        .collect();
    MeasureAtoms::from_atoms_unchecked(atoms)
}

/// The measure with density `n m` on `{theta_X >= n, theta_Y >= m}`, with the
/// underlying region estimate.
pub fn mu_measure(
    cx: &ClosedCurve,
    cy: &ClosedCurve,
    n: i32,
    m: i32,
    policy: &ResolutionPolicy,
) -> Result<(MeasureAtoms, RegionEstimate)> {
    let est = joint_area(cx, cy, n, m, policy)?;
    Ok((measure_from_region(&est, n, m), est))
}

/// Result of [`piecewise_sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSum {
    /// `n m sum_{i,j} |D^{i,j}_{n,m}|`.
    pub value: f64,
    /// `sum_{i,j}` of masked areas.
    pub masked_area: f64,
    pub resolution: f64,
}

/// `n m` times the sum over all piece pairs `(i, j)` of the joint area of the
/// closed pieces `X^i`, `Y^j`. The policy is pinned to the parents' diameter
/// so every term shares one lattice.
pub fn piecewise_sum(
    psx: &PieceSet,
    psy: &PieceSet,
    n: i32,
    m: i32,
    policy: &ResolutionPolicy,
) -> Result<PiecewiseSum> {
    if psx.count() != psy.count() {
        return invalid(format!("piece counts differ: {} vs {}", psx.count(), psy.count()));
    }
    let diameter = psx.parent().bbox().diameter().max(psy.parent().bbox().diameter());
    let pinned = policy.pinned(diameter);
    let xs = psx.closures();
    let ys = psy.closures();
    let mut area = 0.0;
    let mut masked = 0.0;
    for cx in &xs {
        for cy in &ys {
            let est = joint_area(cx, cy, n, m, &pinned)?;
            area += est.area;
            masked += est.masked_area;
        }
    }
    let nm = f64::from(n) * f64::from(m);
    Ok(PiecewiseSum { value: nm * area, masked_area: masked, resolution: pinned.cell_size(diameter) })
}

/// Outcome of [`sandwich_check`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub degenerate: usize,
    /// Points with `theta >= n` but none of the covering conditions.
    pub upper_violations: Vec<Point>,
    /// Points satisfying the inner condition but with `theta < n`.
    pub lower_violations: Vec<Point>,
    /// Points where `theta >= n` (the non-vacuous cases of the upper check).
    pub active_upper: usize,
    /// Points satisfying the inner condition.
    pub active_lower: usize,
}

impl SandwichReport {
    pub fn violations(&self) -> usize {
        self.upper_violations.len() + self.lower_violations.len()
    }
}

/// Pointwise check of the piece-decomposition inclusions for one path.
///
/// With `q = T (p + 1)`:
///
/// - upper: `theta >= n` implies some piece has `theta_i >= n - q`, or two
///   distinct pieces have `|theta_i| >= n/3` and `|theta_j| >= p`, or three
///   distinct pieces have `|theta| >= p`;
/// - lower: some piece with `theta_i >= n + q` and no pair as above implies
///   `theta >= n`.
///
/// Requires `n / 3 > T (p + 1)`.
pub fn sandwich_check(psx: &PieceSet, n: i32, p: i32, t: usize, points: &[Point]) -> Result<SandwichReport> {
    if t != psx.count() {
        return invalid(format!("T = {t} but the piece set has {} pieces", psx.count()));
    }
    if p < 0 || n < 1 {
        return invalid("sandwich check needs n >= 1 and p >= 0");
    }
    let q = t as i64 * (i64::from(p) + 1);
    if i64::from(n) <= 3 * q {
        return invalid(format!("precondition n/3 > T(p+1) violated: n = {n}, T = {t}, p = {p}"));
    }
    let parent = ClosedCurve::new(psx.parent().clone());
    let pieces = psx.closures();
    let n64 = i64::from(n);
    let p64 = i64::from(p);
    let mut rep = SandwichReport::default();
    let mut thetas = vec![0i64; pieces.len()];
    'points: for &z in points {
        let Ok(theta) = winding_number(&parent, z) else {
            rep.degenerate += 1;
            continue;
        };
        for (slot, c) in thetas.iter_mut().zip(&pieces) {
            match winding_number(c, z) {
                Ok(w) => *slot = i64::from(w),
                Err(_) => {
                    rep.degenerate += 1;
                    continue 'points;
                }
            }
        }
        rep.checked += 1;
        let theta = i64::from(theta);

        // |theta_i| >= n/3 and |theta_j| >= p for some i != j
        let big_pair = thetas.iter().enumerate().any(|(i, &a)| {
            3 * a.abs() >= n64 && thetas.iter().enumerate().any(|(j, &b)| j != i && b.abs() >= p64)
        });
        let big_triple = thetas.iter().filter(|&&a| a.abs() >= p64).count() >= 3;

        if theta >= n64 {
            rep.active_upper += 1;
            let single = thetas.iter().any(|&a| a >= n64 - q);
            if !(single || big_pair || big_triple) {
                rep.upper_violations.push(z);
            }
        }
        if thetas.iter().any(|&a| a >= n64 + q) && !big_pair {
            rep.active_lower += 1;
            if theta < n64 {
                rep.lower_violations.push(z);
            }
        }
    }
    Ok(rep)
}
