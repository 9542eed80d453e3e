//! Reference functions for winding statistics of planar Brownian motion.
//!
//! Radial functions take a point but only depend on its norm. Quadrature
//! routines use [`QuadratureConfig`] tolerances; closed forms are exact up to
//! the special-function accuracy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::Point;
use crate::quadrature::{integrate_to_infinity_value, integrate_value, QuadratureConfig};
use crate::special::{erfcx, expint_e1};

/// Two-dimensional heat kernel `p_t(x, y)`.
pub fn heat_kernel(t: f64, x: Point, y: Point) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("heat kernel needs t > 0, got {t}"));
    }
    Ok(heat(t, (y - x).norm2()))
}

#[inline]
fn heat(t: f64, d2: f64) -> f64 {
    (-d2 / (2.0 * t)).exp() / (2.0 * PI * t)
}

fn nonzero_radius(z: Point, what: &str) -> Result<f64> {
    let r = z.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("{what} is undefined at z = ({}, {})", z.x, z.y)));
    }
    Ok(r)
}

/// Limit density `l(z) = (1/2 pi) int_0^1 p_s(0, z) ds = E1(|z|^2/2) / (4 pi^2)`.
pub fn func_l(z: Point) -> Result<f64> {
    let r = nonzero_radius(z, "l")?;
    Ok(expint_e1(0.5 * r * r)? / (4.0 * PI * PI))
}

/// `l(z)` by adaptive quadrature of its defining time integral.
pub fn func_l_quadrature(z: Point, cfg: &QuadratureConfig) -> Result<f64> {
    let r = nonzero_radius(z, "l")?;
    let d2 = r * r;
    let v = integrate_value(|s| if s > 0.0 { heat(s, d2) } else { 0.0 }, 0.0, 1.0, cfg)?;
    Ok(v / (2.0 * PI))
}

/// `L(0) = ln 2 / (4 pi^3)`.
pub fn func_big_l_origin() -> f64 {
    std::f64::consts::LN_2 / (4.0 * PI * PI * PI)
}

/// `L_y = (1/4 pi^2) int_0^1 int_0^1 p_{s+u}(0, y) du ds`, by nested quadrature.
pub fn func_big_l(y: Point, cfg: &QuadratureConfig) -> Result<f64> {
    let d2 = y.norm2();
    if d2 == 0.0 {
        return Ok(func_big_l_origin());
    }
    let inner_cfg = cfg.tightened(0.1);
    let mut failure = None;
    let v = integrate_value(
        |s| match integrate_value(|u| heat(s + u, d2), 0.0, 1.0, &inner_cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(v? / (4.0 * PI * PI))
}

/// `C_n = 2 pi ln(1 + 1/(2 pi n - 1))`.
pub fn coeff_c(n: u32) -> Result<f64> {
    if n < 2 {
        return invalid(format!("C_n needs n >= 2, got {n}"));
    }
    Ok(2.0 * PI * (1.0 / (2.0 * PI * f64::from(n) - 1.0)).ln_1p())
}

/// `int_{2 pi (n-1)}^{2 pi n} x / (x^2 + t^2) dx`.
fn winding_window(n: u32, t: f64) -> f64 {
    let hi = 2.0 * PI * f64::from(n);
    let lo = 2.0 * PI * f64::from(n - 1);
    // 0.5 ln((hi^2 + t^2)/(lo^2 + t^2)) without cancellation
    0.5 * ((hi * hi - lo * lo) / (lo * lo + t * t)).ln_1p()
}

/// `int_0^inf rho exp(-rho^2/2 - b rho) d rho` for `b >= 0`.
pub(crate) fn radial_moment(b: f64) -> f64 {
    if b < 2.0 {
        return 1.0 - b * (PI / 2.0).sqrt() * erfcx(b / std::f64::consts::SQRT_2);
    }
    // 1 - b R(b) = q / (b + q), R the Mills ratio, q = 1/(b + 2/(b + 3/(b + ...)))
    const TINY: f64 = 1e-300;
    let mut f = b;
    let mut c = b;
    let mut d = 0.0;
    for k in 2..10_000 {
        let a = k as f64;
        d = b + a * d;
        d = if d == 0.0 { 1.0 / TINY } else { 1.0 / d };
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    let q = 1.0 / f;
    q / (b + q)
}

/// Probability that the closed Brownian path started at `0` winds at least
/// `n` times around `z`.
///
/// Integrating the conditional law of the winding given `|B_1|` against the
/// radial density, the angular integral cancels the Bessel factor and the
/// radial one is `int rho e^{-rho^2/2 - b rho} d rho` with `b = |z| cosh t`:
///
/// `g_n(z) = (1 / 2 pi^2) e^{-|z|^2/2} int_0^inf W_n(t) M(|z| cosh t) dt`
///
/// where `W_n(t)` is the integral of `x / (x^2 + t^2)` over `[2 pi (n-1), 2 pi n]`.
pub fn prob_g(n: u32, z: Point, cfg: &QuadratureConfig) -> Result<f64> {
    if n < 2 {
        return invalid(format!("g_n needs n >= 2, got {n}"));
    }
    let r = nonzero_radius(z, "g_n")?;
    let integrand = |t: f64| {
        let b = r * t.cosh();
        if !b.is_finite() {
            return 0.0;
        }
        winding_window(n, t) * radial_moment(b)
    };
    // M(b) ~ 1 until b ~ 1, then decays like b^{-2}
    let knee = if r < 1.0 { (1.0 / r).acosh().max(1.0) } else { 1.0 };
    let head = integrate_value(integrand, 0.0, knee, cfg)?;
    let tail = integrate_to_infinity_value(integrand, knee, cfg)?;
    let g = (-0.5 * r * r).exp() * (head + tail) / (2.0 * PI * PI);
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::Numeric(format!("g_{n}({r}) = {g} is not a probability")));
    }
    Ok(g)
}

/// Both sides of the second-moment identity for the Brownian-bridge density ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeMoment {
    /// `int (p_{gap-delta}(y, y2)/p_gap(y1, y2) - 1)^2 p_delta(y1, y) dy` by quadrature.
    pub lhs: f64,
    /// `((k-1)/(k+1)) p_{(k-1) delta}(y1, y2) - p_{k delta}(y1, y2)`.
    pub rhs: f64,
    /// `p_{(gap-delta)/2 + delta}(y1, y2) / (4 pi (gap-delta) p_gap(y1, y2)^2) - 1`.
    pub exact: f64,
}

/// Second moment of `dQ/dP - 1` where `Q` is a bridge of duration `gap = k delta`
/// from `y1` to `y2`, restricted to its first `delta` time units.
pub fn bridge_moment_identity(k: u32, delta: f64, y1: Point, y2: Point, cfg: &QuadratureConfig) -> Result<BridgeMoment> {
    if k < 2 {
        return invalid(format!("gap must exceed delta: gap/delta = {k}"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    let kf = f64::from(k);
    let gap = kf * delta;
    let rest = gap - delta;
    let d2 = (y2 - y1).norm2();
    let p_gap = heat(gap, d2);

    let rhs = (kf - 1.0) / (kf + 1.0) * heat(rest, d2) - p_gap;
    let exact = heat(0.5 * rest + delta, d2) / (4.0 * PI * rest * p_gap * p_gap) - 1.0;

    // polar coordinates around y1
    let inner_cfg = cfg.tightened(0.1);
    let sd = delta.sqrt();
    let mut failure = None;
    let radial = |rho: f64| -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        let weight = heat(delta, rho * rho) * rho;
        if weight == 0.0 {
            return 0.0;
        }
        let angular = integrate_value(
            |u: f64| {
                let y = Point::new(y1.x + rho * u.cos(), y1.y + rho * u.sin());
                let ratio = heat(rest, (y2 - y).norm2()) / p_gap - 1.0;
                ratio * ratio
            },
            0.0,
            2.0 * PI,
            &inner_cfg,
        );
        match angular {
            Ok(a) => a * weight,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut radial = radial;
    let near = integrate_value(&mut radial, 0.0, 8.0 * sd, cfg);
    let far = integrate_to_infinity_value(&mut radial, 8.0 * sd, cfg);
    if let Some(e) = failure {
        return Err(e);
    }
    let lhs = near? + far?;
    Ok(BridgeMoment { lhs, rhs, exact })
}
