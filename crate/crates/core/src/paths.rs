//! Discretised planar Brownian paths, their closures and equal-time pieces.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geom::{BBox, Point};

/// Time-uniform polyline `t -> X_t` sampled at `steps + 1` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPath {
    vertices: Vec<Point>,
    t_start: f64,
    t_end: f64,
}

impl PlanarPath {
    pub fn new(vertices: Vec<Point>, t_start: f64, t_end: f64) -> Result<Self> {
        if vertices.len() < 2 {
            return invalid(format!("a path needs at least 2 vertices, got {}", vertices.len()));
        }
        if let Some(k) = vertices.iter().position(|p| !p.is_finite()) {
            return invalid(format!("vertex {k} is not finite"));
        }
        if !(0.0..=1.0).contains(&t_start) || !(0.0..=1.0).contains(&t_end) || t_start >= t_end {
            return invalid(format!("time span [{t_start}, {t_end}] is not an interval of [0, 1]"));
        }
        Ok(PlanarPath { vertices, t_start, t_end })
    }

    /// Path on `[0, 1]` through the given vertices.
    pub fn from_vertices(vertices: Vec<Point>) -> Result<Self> {
        Self::new(vertices, 0.0, 1.0)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t_start + k as f64 * (self.t_end - self.t_start) / self.steps() as f64
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().unwrap()
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(&self.vertices)
    }

    /// `sqrt(factor) * (X - X_start)` re-timed onto `[0, 1]`: the Brownian
    /// rescaling of a piece of duration `1 / factor`.
    pub fn brownian_rescale(&self, factor: f64) -> Result<PlanarPath> {
        if !(factor > 0.0) {
            return invalid("rescale factor must be positive");
        }
        let s = factor.sqrt();
        let x0 = self.start();
        PlanarPath::new(self.vertices.iter().map(|&p| (p - x0) * s).collect(), 0.0, 1.0)
    }

    /// Every `k`-th vertex; `steps` must be divisible by `k`.
    pub fn coarsen(&self, k: usize) -> Result<PlanarPath> {
        if k == 0 || self.steps() % k != 0 {
            return invalid(format!("cannot coarsen {} steps by {k}", self.steps()));
        }
        let v = self.vertices.iter().step_by(k).copied().collect();
        PlanarPath::new(v, self.t_start, self.t_end)
    }

    pub fn translate(&self, v: Point) -> PlanarPath {
        PlanarPath {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
            t_start: self.t_start,
            t_end: self.t_end,
        }
    }

    pub fn close(self) -> ClosedCurve {
        ClosedCurve::new(self)
    }

    /// CSV dump `t,x,y`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (k, p) in self.vertices.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", self.time_at(k), p.x, p.y)?;
        }
        Ok(())
    }
}

/// A path closed by the straight segment from its last vertex to its first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    base: PlanarPath,
    bbox: BBox,
}

impl ClosedCurve {
    pub fn new(base: PlanarPath) -> Self {
        let bbox = base.bbox();
        ClosedCurve { base, bbox }
    }

    /// Closed polygon through `vertices` (the closing edge is implicit).
    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        Ok(ClosedCurve::new(PlanarPath::from_vertices(vertices)?))
    }

    pub fn base(&self) -> &PlanarPath {
        &self.base
    }

    pub fn vertices(&self) -> &[Point] {
        self.base.vertices()
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Number of segments, closure included.
    pub fn segment_count(&self) -> usize {
        self.base.vertices.len()
    }

    /// Segment `k`; the last one is the closure.
    #[inline]
    pub fn segment(&self, k: usize) -> (Point, Point) {
        let v = &self.base.vertices;
        let next = if k + 1 == v.len() { 0 } else { k + 1 };
        (v[k], v[next])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.segment_count()).map(move |k| self.segment(k))
    }

    /// Distance below which a point counts as lying on the curve.
    pub fn degeneracy_tolerance(&self) -> f64 {
        1e-12 * self.bbox.diameter()
    }

    pub fn translate(&self, v: Point) -> ClosedCurve {
        ClosedCurve::new(self.base.translate(v))
    }
}

/// `T` equal-time pieces of a parent path.
#[derive(Debug, Clone)]
pub struct PieceSet {
    pieces: Vec<PlanarPath>,
    parent: Arc<PlanarPath>,
}

impl PieceSet {
    pub fn count(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[PlanarPath] {
        &self.pieces
    }

    pub fn parent(&self) -> &PlanarPath {
        &self.parent
    }

    pub fn closures(&self) -> Vec<ClosedCurve> {
        self.pieces.iter().cloned().map(ClosedCurve::new).collect()
    }

    /// Joins the pieces back, dropping duplicated joints.
    pub fn concatenate(&self) -> Vec<Point> {
        let mut out = self.pieces[0].vertices().to_vec();
        for p in &self.pieces[1..] {
            out.extend_from_slice(&p.vertices()[1..]);
        }
        out
    }
}

/// Brownian path on `[0, 1]` started at `start`, with i.i.d. centred Gaussian
/// increments of per-coordinate variance `1 / steps`.
pub fn simulate_bm(steps: usize, seed: u64, start: Point) -> Result<PlanarPath> {
    if steps == 0 {
        return invalid("steps must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (1.0 / steps as f64).sqrt();
    let mut v = Vec::with_capacity(steps + 1);
    let mut p = start;
    v.push(p);
    for _ in 0..steps {
        let dx: f64 = StandardNormal.sample(&mut rng);
        let dy: f64 = StandardNormal.sample(&mut rng);
        p = Point::new(p.x + sd * dx, p.y + sd * dy);
        v.push(p);
    }
    PlanarPath::new(v, 0.0, 1.0)
}

/// Splits `path` into `t` pieces of equal duration.
pub fn decompose(path: &PlanarPath, t: usize) -> Result<PieceSet> {
    if t == 0 {
        return invalid("piece count must be positive");
    }
    if path.steps() % t != 0 {
        return invalid(format!("{} steps are not divisible into {t} pieces", path.steps()));
    }
    let k = path.steps() / t;
    let dt = (path.t_end - path.t_start) / t as f64;
    let pieces = (0..t)
        .map(|i| {
            let t0 = path.t_start + i as f64 * dt;
            let t1 = if i + 1 == t { path.t_end } else { path.t_start + (i + 1) as f64 * dt };
            PlanarPath::new(path.vertices[i * k..=(i + 1) * k].to_vec(), t0, t1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PieceSet { pieces, parent: Arc::new(path.clone()) })
}

/// Closed polygon through the piece joints `X_0, X_{1/T}, ..., X_1`.
pub fn joint_polygon(ps: &PieceSet) -> ClosedCurve {
    let mut v: Vec<Point> = ps.pieces.iter().map(|p| p.start()).collect();
    v.push(ps.pieces.last().unwrap().end());
    let base = PlanarPath::new(v, ps.parent.t_start, ps.parent.t_end)
        .expect("joints of a valid path form a valid path");
    ClosedCurve::new(base)
}

/// Role of a random stream inside one Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    PathX = 1,
    PathY = 2,
    QueryPoints = 3,
}

/// Per-path seed from `(master, sample, role)`; independent of evaluation order.
pub fn derive_seed(master: u64, sample: u64, role: StreamRole) -> u64 {
    let mut z = master ^ splitmix(sample.wrapping_add(0x9E37_79B9_7F4A_7C15));
    z = splitmix(z ^ (role as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
