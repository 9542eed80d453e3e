//! Modified Bessel function `I0`, exponential integral `E1` and related helpers.

use crate::error::{invalid, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return invalid(format!("I0 needs a finite x >= 0, got {x}"));
    }
    if x <= 30.0 {
        Ok(i0_series(x))
    } else {
        let v = x.exp() * i0_asymptotic_scaled(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("I0({x}) overflows")))
        }
    }
}

/// `exp(-x) I0(x)`, finite for every finite `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return invalid(format!("I0 needs a finite x >= 0, got {x}"));
    }
    if x <= 30.0 {
        Ok(i0_series(x) * (-x).exp())
    } else {
        Ok(i0_asymptotic_scaled(x))
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

// e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
fn i0_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * x * kf);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Exponential integral `E1(x) = int_x^inf e^{-t}/t dt` for `x > 0`.
pub fn expint_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return invalid(format!("E1 needs x > 0, got {x}"));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        // -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -x / kf;
            let add = -term / kf;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() + sum)
    } else {
        Ok(e1_continued_fraction(x) * (-x).exp())
    }
}

/// `exp(x) E1(x)` for `x > 1`, by the modified Lentz method.
fn e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `exp(x^2) erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    if x < 2.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // erfc(x) e^{x^2} sqrt(pi) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        d = if d == 0.0 { 1.0 / TINY } else { 1.0 / d };
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * std::f64::consts::PI.sqrt())
}
