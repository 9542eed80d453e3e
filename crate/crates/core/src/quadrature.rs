//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_931_996_400,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 2000 }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = QuadratureConfig { abs_tol, rel_tol, max_subdivisions };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return invalid("quadrature tolerances must be positive");
        }
        if self.max_subdivisions == 0 {
            return invalid("max_subdivisions must be positive");
        }
        Ok(())
    }

    /// Tolerances multiplied by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureConfig {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub intervals: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        e = res_asc * (200.0 * e / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = (fc * WGK[10]).abs();
    let mut f1 = [0.0; 10];
    let mut f2 = [0.0; 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let (u, v) = (f(c - dx), f(c + dx));
        f1[j] = u;
        f2[j] = v;
        res_k += WGK[j] * (u + v);
        res_abs += WGK[j] * (u.abs() + v.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (u + v);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }
    let ah = h.abs();
    let err = rescale_error((res_k - res_g) * h, res_abs * ah, res_asc * ah);
    (res_k * h, err)
}

/// Integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return invalid("integrate needs finite limits; use integrate_to_infinity");
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, intervals: 0, converged: true });
    }
    let mut evals = 0usize;
    let mut g = |x: f64| {
        evals += 1;
        f(x)
    };
    let (v, e) = gk21(&mut g, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut converged = false;
    for _ in 0..cfg.max_subdivisions {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            converged = true;
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a.min(worst.b) || m >= worst.a.max(worst.b) {
            // interval cannot be split further in floating point
            heap.push(Interval { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut g, worst.a, m);
        let (v2, e2) = gk21(&mut g, m, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Interval { a: m, b: worst.b, value: v2, error: e2 });
    }
    if !converged && total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        converged = true;
    }
    let intervals = heap.len();
    let items = heap.into_vec();
    let value = crate::sum::compensated_sum(items.iter().map(|i| i.value));
    let abs_error = crate::sum::compensated_sum(items.iter().map(|i| i.error));
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(QuadResult { value, abs_error, evaluations: evals, intervals, converged })
}

/// Integral of `f` over `[a, inf)` via the map `x = a + u/(1-u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if !a.is_finite() {
        return invalid("lower limit must be finite");
    }
    integrate(
        |u| {
            let w = 1.0 - u;
            let x = a + u / w;
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx / (w * w)
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Value of [`integrate`], failing when the tolerance was not met.
pub fn integrate_value<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let r = integrate(f, a, b, cfg)?;
    if !r.converged {
        return Err(Error::Numeric(format!(
            "quadrature on [{a}, {b}] did not converge: estimate {} with error {}",
            r.value, r.abs_error
        )));
    }
    Ok(r.value)
}

/// Value of [`integrate_to_infinity`], failing when the tolerance was not met.
pub fn integrate_to_infinity_value<F: FnMut(f64) -> f64>(f: F, a: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let r = integrate_to_infinity(f, a, cfg)?;
    if !r.converged {
        return Err(Error::Numeric(format!(
            "quadrature on [{a}, inf) did not converge: estimate {} with error {}",
            r.value, r.abs_error
        )));
    }
    Ok(r.value)
}
