//! Kernel estimates of the mutual intersection local time of two paths.
//!
//! For a probability density `f` on the plane and a smoothing scale `s`,
//!
//! `l_hat = s / (K L) * sum_{i,j} f(sqrt(s) (X_i - Y_j))`
//!
//! over the `K` and `L` vertices of the two paths. Pairs farther apart than
//! the kernel radius over `sqrt(s)` are skipped through a uniform hash of the
//! second path's vertices.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::Point;
use crate::measure::MeasureAtoms;
use crate::paths::PlanarPath;
use crate::sum::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Standard two-dimensional normal density, cut at radius 6.
    Gaussian,
    /// `(2/pi)(1 - |x|^2)` on the unit disc.
    Epanechnikov,
}

impl Kernel {
    pub fn density(self, x: Point) -> f64 {
        let r2 = x.norm2();
        match self {
            Kernel::Gaussian => {
                if r2 > 36.0 {
                    0.0
                } else {
                    (-0.5 * r2).exp() / (2.0 * PI)
                }
            }
            Kernel::Epanechnikov => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    2.0 / PI * (1.0 - r2)
                }
            }
        }
    }

    /// Support radius used for truncation (unscaled).
    pub fn radius(self) -> f64 {
        match self {
            Kernel::Gaussian => 6.0,
            Kernel::Epanechnikov => 1.0,
        }
    }

    /// Kernel mass outside [`Kernel::radius`].
    pub fn dropped_mass(self) -> f64 {
        match self {
            Kernel::Gaussian => (-18.0f64).exp(),
            Kernel::Epanechnikov => 0.0,
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => invalid(format!("unknown kernel '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub value: f64,
    pub scale: f64,
    pub kernel: Kernel,
    /// Half the gap between the estimates over even and odd vertices of the second path.
    pub se_proxy: f64,
    /// Number of vertex pairs inside the kernel support.
    pub pairs: u64,
    /// Upper bound on the truncated contribution, `value`-relative: the kernel tail mass.
    pub dropped_mass_bound: f64,
}

/// Uniform hash of points into square cells of side `cell`.
struct SpatialHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl SpatialHash {
    fn new(points: &[Point], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            buckets.entry(Self::key_for(cell, *p)).or_default().push(k as u32);
        }
        SpatialHash { cell, buckets }
    }

    #[inline]
    fn key_for(cell: f64, p: Point) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices in the 3x3 block of cells around `p`, in a fixed order.
    fn neighbours(&self, p: Point) -> impl Iterator<Item = u32> + '_ {
        let (cx, cy) = Self::key_for(self.cell, p);
        (-1..=1).flat_map(move |dy| {
            (-1..=1).flat_map(move |dx| self.buckets.get(&(cx + dx, cy + dy)).into_iter().flatten().copied())
        })
    }
}

fn check_inputs(px: &PlanarPath, py: &PlanarPath, scale: f64) -> Result<()> {
    if !(scale > 0.0) || !scale.is_finite() {
        return invalid(format!("scale must be positive, got {scale}"));
    }
    if px.t_start() != 0.0 || px.t_end() != 1.0 || py.t_start() != 0.0 || py.t_end() != 1.0 {
        return invalid("local time needs both paths on [0, 1]");
    }
    Ok(())
}

const CHUNK: usize = 256;

/// Calls `visit(i, j, weight)` for every contributing pair, chunked over the
/// first path. Returns per-chunk results in chunk order.
fn for_each_pair<R: Send>(
    px: &PlanarPath,
    py: &PlanarPath,
    scale: f64,
    kernel: Kernel,
    init: impl Fn() -> R + Sync,
    visit: impl Fn(&mut R, usize, usize, f64) + Sync,
) -> Vec<R> {
    let rs = scale.sqrt();
    let cutoff = kernel.radius() / rs;
    let ys = py.vertices();
    let hash = SpatialHash::new(ys, cutoff);
    px.vertices()
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, xs)| {
            let mut acc = init();
            for (o, &x) in xs.iter().enumerate() {
                let i = c * CHUNK + o;
                for j in hash.neighbours(x) {
                    let y = ys[j as usize];
                    let f = kernel.density((x - y) * rs);
                    if f > 0.0 {
                        visit(&mut acc, i, j as usize, f);
                    }
                }
            }
            acc
        })
        .collect()
}

#[derive(Default)]
struct PairSums {
    even: KahanSum,
    odd: KahanSum,
    pairs: u64,
}

/// Kernel estimate of the total mutual intersection local time.
pub fn local_time(px: &PlanarPath, py: &PlanarPath, scale: f64, kernel: Kernel) -> Result<LocalTimeEstimate> {
    check_inputs(px, py, scale)?;
    let parts = for_each_pair(px, py, scale, kernel, PairSums::default, |acc, _, j, f| {
        if j % 2 == 0 {
            acc.even.add(f);
        } else {
            acc.odd.add(f);
        }
        acc.pairs += 1;
    });
    let mut even = KahanSum::new();
    let mut odd = KahanSum::new();
    let mut pairs = 0;
    for p in &parts {
        even.merge(&p.even);
        odd.merge(&p.odd);
        pairs += p.pairs;
    }
    let k = px.vertices().len() as f64;
    let l = py.vertices().len();
    let (l_even, l_odd) = (l.div_ceil(2) as f64, (l / 2) as f64);
    let mut total = even.clone();
    total.merge(&odd);
    let value = scale * total.value() / (k * l as f64);
    let v_even = scale * even.value() / (k * l_even);
    let v_odd = if l_odd > 0.0 { scale * odd.value() / (k * l_odd) } else { v_even };
    Ok(LocalTimeEstimate {
        value,
        scale,
        kernel,
        se_proxy: 0.5 * (v_even - v_odd).abs(),
        pairs,
        dropped_mass_bound: kernel.dropped_mass(),
    })
}

/// Unaccelerated double sum with the same truncation as [`local_time`].
pub fn local_time_dense(px: &PlanarPath, py: &PlanarPath, scale: f64, kernel: Kernel) -> Result<f64> {
    check_inputs(px, py, scale)?;
    let rs = scale.sqrt();
    let mut s = KahanSum::new();
    for &x in px.vertices() {
        for &y in py.vertices() {
            s.add(kernel.density((x - y) * rs));
        }
    }
    Ok(scale * s.value() / (px.vertices().len() * py.vertices().len()) as f64)
}

/// The intersection measure: one atom per contributing pair at the pair midpoint.
pub fn intersection_measure(px: &PlanarPath, py: &PlanarPath, scale: f64, kernel: Kernel) -> Result<MeasureAtoms> {
    check_inputs(px, py, scale)?;
    let norm = scale / (px.vertices().len() * py.vertices().len()) as f64;
    let xs = px.vertices();
    let ys = py.vertices();
    let parts = for_each_pair(px, py, scale, kernel, Vec::new, |acc: &mut Vec<(Point, f64)>, i, j, f| {
        acc.push((xs[i].midpoint(ys[j]), norm * f));
    });
    Ok(MeasureAtoms::from_atoms_unchecked(parts.into_iter().flatten().collect()))
}

/// The intersection measure aggregated on a square lattice of side `bin`:
/// one atom per nonempty bin, at the mass centroid of its pair midpoints.
pub fn intersection_measure_binned(
    px: &PlanarPath,
    py: &PlanarPath,
    scale: f64,
    kernel: Kernel,
    bin: f64,
) -> Result<MeasureAtoms> {
    check_inputs(px, py, scale)?;
    if !(bin > 0.0) || !bin.is_finite() {
        return invalid(format!("bin size must be positive, got {bin}"));
    }
    let xs = px.vertices();
    let ys = py.vertices();
    type Bins = HashMap<(i64, i64), (KahanSum, KahanSum, KahanSum)>;
    let parts = for_each_pair(px, py, scale, kernel, Bins::new, |acc: &mut Bins, i, j, f| {
        let m = xs[i].midpoint(ys[j]);
        let key = ((m.x / bin).floor() as i64, (m.y / bin).floor() as i64);
        let e = acc.entry(key).or_default();
        e.0.add(f);
        e.1.add(f * m.x);
        e.2.add(f * m.y);
    });
    let mut merged: std::collections::BTreeMap<(i64, i64), (KahanSum, KahanSum, KahanSum)> = Default::default();
    for part in parts {
        let mut keys: Vec<_> = part.into_iter().collect();
        keys.sort_by_key(|(k, _)| *k);
        for (k, (w, wx, wy)) in keys {
            let e = merged.entry(k).or_default();
            e.0.merge(&w);
            e.1.merge(&wx);
            e.2.merge(&wy);
        }
    }
    let norm = scale / (xs.len() * ys.len()) as f64;
    let atoms = merged
        .into_values()
        .map(|(w, wx, wy)| {
            let w = w.value();
            (Point::new(wx.value() / w, wy.value() / w), w * norm)
        })
        .collect();
    Ok(MeasureAtoms::from_atoms_unchecked(atoms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScale {
    pub coarse: f64,
    pub fine: f64,
    pub relative_gap: f64,
}

/// Estimates at two smoothing scales and their relative gap
/// `|v1 - v2| / max(v1, v2, eps)`.
pub fn two_scale_consistency(px: &PlanarPath, py: &PlanarPath, scale1: f64, scale2: f64) -> Result<TwoScale> {
    let v1 = local_time(px, py, scale1, Kernel::Gaussian)?.value;
    let v2 = local_time(px, py, scale2, Kernel::Gaussian)?.value;
    let denom = v1.max(v2).max(f64::MIN_POSITIVE);
    let relative_gap = if v1 == v2 { 0.0 } else { (v1 - v2).abs() / denom };
    Ok(TwoScale { coarse: v1, fine: v2, relative_gap })
}

/// `int_0^1 int_0^1 (f_scale * p_{s+u})(d) ds du` for the Gaussian kernel,
/// the expectation of the continuous-time estimator for paths started at
/// points `d` apart.
pub fn smoothed_reference(d: Point, scale: f64, cfg: &crate::quadrature::QuadratureConfig) -> Result<f64> {
    if !(scale > 0.0) {
        return invalid("scale must be positive");
    }
    let d2 = d.norm2();
    let eps = 1.0 / scale;
    // int int g(s + u) = int_0^2 min(w, 2 - w) g(w) dw
    crate::quadrature::integrate_value(
        |w| w.min(2.0 - w) * (-d2 / (2.0 * (w + eps))).exp() / (2.0 * PI * (w + eps)),
        0.0,
        2.0,
        cfg,
    )
}

/// Expectation of [`local_time`] with the Gaussian kernel for Brownian paths
/// on the given vertex grids, started at points `d` apart.
pub fn discrete_reference(d: Point, scale: f64, steps_x: usize, steps_y: usize) -> f64 {
    let d2 = d.norm2();
    let eps = 1.0 / scale;
    let mut s = KahanSum::new();
    for i in 0..=steps_x {
        for j in 0..=steps_y {
            let w = i as f64 / steps_x as f64 + j as f64 / steps_y as f64 + eps;
            s.add((-d2 / (2.0 * w)).exp() / (2.0 * PI * w));
        }
    }
    s.value() / ((steps_x + 1) * (steps_y + 1)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::simulate_bm;
    use crate::quadrature::{integrate_to_infinity_value, QuadratureConfig};

    fn segment(n: usize, from: Point, to: Point) -> PlanarPath {
        PlanarPath::from_vertices((0..=n).map(|k| from + (to - from) * (k as f64 / n as f64)).collect()).unwrap()
    }

    #[test]
    fn kernels_are_densities() {
        let cfg = QuadratureConfig::default();
        for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
            let m = integrate_to_infinity_value(|r| 2.0 * PI * r * k.density(Point::new(r, 0.0)), 0.0, &cfg).unwrap();
            assert!((m + k.dropped_mass() - 1.0).abs() < 1e-9, "{k:?}: {m}");
        }
    }

    #[test]
    fn disjoint_paths_give_zero() {
        let a = segment(16, Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let b = segment(16, Point::new(0.0, 5.0), Point::new(1.0, 5.0));
        let est = local_time(&a, &b, 100.0, Kernel::Gaussian).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(intersection_measure(&a, &b, 100.0, Kernel::Gaussian).unwrap().is_empty());
        let ts = two_scale_consistency(&a, &b, 100.0, 400.0).unwrap();
        assert_eq!((ts.coarse, ts.fine, ts.relative_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identical_paths_overlap() {
        let a = segment(32, Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let est = local_time(&a, &a, 1e-3, Kernel::Gaussian).unwrap();
        assert!(est.value > 0.0);
        let ts = two_scale_consistency(&a, &a, 50.0, 50.0).unwrap();
        assert_eq!(ts.relative_gap, 0.0);
        assert!(local_time(&a, &a, 0.0, Kernel::Gaussian).is_err());
        assert!(local_time(&a, &a, -1.0, Kernel::Gaussian).is_err());
    }

    #[test]
    fn hashed_sum_equals_dense() {
        let x = simulate_bm(1 << 10, 11, Point::ORIGIN).unwrap();
        let y = simulate_bm(1 << 10, 12, Point::ORIGIN).unwrap();
        for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
            for scale in [16.0, 256.0, 1024.0] {
                let a = local_time(&x, &y, scale, k).unwrap().value;
                let b = local_time_dense(&x, &y, scale, k).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.abs(), "{k:?} {scale}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn measure_mass_matches_scalar() {
        let x = simulate_bm(512, 3, Point::ORIGIN).unwrap();
        let y = simulate_bm(512, 4, Point::ORIGIN).unwrap();
        let est = local_time(&x, &y, 256.0, Kernel::Gaussian).unwrap();
        let mu = intersection_measure(&x, &y, 256.0, Kernel::Gaussian).unwrap();
        assert_eq!(mu.len() as u64, est.pairs);
        assert!((mu.total_mass() - est.value).abs() <= 1e-12 * est.value);
        let binned = intersection_measure_binned(&x, &y, 256.0, Kernel::Gaussian, 0.05).unwrap();
        assert!((binned.total_mass() - est.value).abs() <= 1e-12 * est.value);
        assert!(binned.len() < mu.len());
    }

    #[test]
    fn measure_supported_near_common_segment() {
        let a = segment(64, Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let scale = 400.0;
        let mu = intersection_measure(&a, &a, scale, Kernel::Epanechnikov).unwrap();
        let r = Kernel::Epanechnikov.radius() / scale.sqrt();
        assert!(mu.atoms().iter().all(|(p, _)| p.y.abs() <= r && p.x >= -r && p.x <= 1.0 + r));
        assert!(mu.total_mass() > 0.0);
    }

    #[test]
    fn references_agree() {
        let cfg = QuadratureConfig::default();
        let cont = smoothed_reference(Point::ORIGIN, 1024.0, &cfg).unwrap();
        let disc = discrete_reference(Point::ORIGIN, 1024.0, 1 << 10, 1 << 10);
        assert!((cont - disc).abs() < 0.01 * cont);
        let limit = std::f64::consts::LN_2 / PI;
        assert!((cont - limit).abs() < 0.01 * limit);
    }
}
