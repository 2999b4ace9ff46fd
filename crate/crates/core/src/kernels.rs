//! Closed-form kernels, dissipation rates and antiderivatives.
//!
//! Public functions validate their input and return `Result`; the
//! `*_unchecked` variants are for inner loops whose callers already
//! guarantee finite, pole-free arguments.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};

/// Slope bound `a ∈ (0, 1]` together with the derived `A = 1/a - a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeParam {
    a: f64,
    big_a: f64,
}

impl SlopeParam {
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 || a > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "slope parameter a = {a} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            a,
            big_a: 1.0 / a - a,
        })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `A = 1/a - a`.
    #[inline]
    pub fn big_a(&self) -> f64 {
        self.big_a
    }
}

/// Sign of the paired term: `Minus` is the difference (whole-plane) term,
/// `Plus` the reflected term induced by the impermeable bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sigma {
    Minus,
    Plus,
}

impl Sigma {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sigma::Minus => -1.0,
            Sigma::Plus => 1.0,
        }
    }
}

impl TryFrom<i32> for Sigma {
    type Error = Error;

    fn try_from(v: i32) -> Result<Self> {
        match v {
            -1 => Ok(Sigma::Minus),
            1 => Ok(Sigma::Plus),
            other => Err(Error::InvalidParameter(format!(
                "sigma must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// `y (f_x(x) + σ f_x(x-y)) / (y² + (f(x) + σ f(x-y))²)`.
///
/// Returns 0 at `y = 0`; the limits at the diagonal are applied by the
/// right-hand-side assembly.
pub fn integrand_pair(y: f64, fx0: f64, fxy: f64, f0: f64, fy: f64, sigma: Sigma) -> Result<f64> {
    ensure_finite("integrand_pair", &[y, fx0, fxy, f0, fy])?;
    if y == 0.0 {
        return Ok(0.0);
    }
    let s = sigma.value();
    let d = f0 + s * fy;
    Ok(y * (fx0 + s * fxy) / (y * y + d * d))
}

/// `h_a(y, r) = (y² - r² - A y r) / (y² + r²)²`.
pub fn h_kernel(p: SlopeParam, y: f64, r: f64) -> Result<f64> {
    ensure_finite("h_kernel", &[y, r])?;
    if y == 0.0 && r == 0.0 {
        return Err(Error::Pole { what: "h_kernel", y, r });
    }
    Ok(h_unchecked(p, y, r))
}

#[inline]
pub fn h_unchecked(p: SlopeParam, y: f64, r: f64) -> f64 {
    let q = y * y + r * r;
    (y * y - r * r - p.big_a * y * r) / (q * q)
}

/// `∂_r h(y, r) = g(r / y) / y³`, written without the division by `y`.
#[inline]
pub fn h_r_unchecked(p: SlopeParam, y: f64, r: f64) -> f64 {
    let a = p.big_a;
    let q = y * y + r * r;
    (2.0 * r * r * r + 3.0 * a * y * r * r - 6.0 * y * y * r - a * y * y * y) / (q * q * q)
}

/// `g(s) = (2s³ + 3As² - 6s - A) / (1 + s²)³`.
pub fn g_fun(p: SlopeParam, s: f64) -> Result<f64> {
    ensure_finite("g_fun", &[s])?;
    Ok(g_unchecked(p, s))
}

#[inline]
pub fn g_unchecked(p: SlopeParam, s: f64) -> f64 {
    let a = p.big_a;
    let q = 1.0 + s * s;
    (2.0 * s * s * s + 3.0 * a * s * s - 6.0 * s - a) / (q * q * q)
}

/// Numerator of `g'(s) = -6 (s⁴ + 2As³ - 6s² - 2As + 1) / (1 + s²)⁴`,
/// without the `-6` factor.
#[inline]
pub fn g_prime_numerator(p: SlopeParam, s: f64) -> f64 {
    let a = p.big_a;
    (((s + 2.0 * a) * s - 6.0) * s - 2.0 * a) * s + 1.0
}

#[inline]
pub fn g_prime(p: SlopeParam, s: f64) -> f64 {
    let q = 1.0 + s * s;
    -6.0 * g_prime_numerator(p, s) / (q * q * q * q)
}

fn check_heights(what: &'static str, a: f64, b: f64, c: f64) -> Result<()> {
    ensure_finite(what, &[a, b, c])?;
    if a < 0.0 || b < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{what}: heights must be non-negative, got ({a}, {b})"
        )));
    }
    Ok(())
}

/// `λ(a, b, c) = (a+b)²(a-b)² / (2 [c² + (a+b)²] [c² + (a-b)²])`.
pub fn lambda_rate(a: f64, b: f64, c: f64) -> Result<f64> {
    check_heights("lambda_rate", a, b, c)?;
    Ok(lambda_unchecked(a, b, c))
}

#[inline]
pub fn lambda_unchecked(a: f64, b: f64, c: f64) -> f64 {
    let s2 = (a + b) * (a + b);
    let d2 = (a - b) * (a - b);
    let num = s2 * d2;
    if num == 0.0 {
        return 0.0;
    }
    let c2 = c * c;
    num / (2.0 * (c2 + s2) * (c2 + d2))
}

/// `λ̃(a, b, c) = (a+b)²(a-b)² / ([c² + 2a² + 2b²] [c² + (a-b)²])`.
pub fn tilde_lambda_rate(a: f64, b: f64, c: f64) -> Result<f64> {
    check_heights("tilde_lambda_rate", a, b, c)?;
    let s2 = (a + b) * (a + b);
    let d2 = (a - b) * (a - b);
    let num = s2 * d2;
    if num == 0.0 {
        return Ok(0.0);
    }
    let c2 = c * c;
    Ok(num / ((c2 + 2.0 * a * a + 2.0 * b * b) * (c2 + d2)))
}

/// `Σ_n (y + nν) / ((y + nν)² + d²)` under symmetric summation:
/// `(π/ν) sin(2πy/ν) / (cosh(2πd/ν) - cos(2πy/ν))`.
pub fn periodized_kernel(y: f64, d: f64, nu: f64) -> Result<f64> {
    ensure_finite("periodized_kernel", &[y, d, nu])?;
    if nu <= 0.0 {
        return Err(Error::InvalidParameter(format!("period must be positive, got {nu}")));
    }
    let phase = (y / nu).rem_euclid(1.0);
    if d == 0.0 && (phase == 0.0 || phase == 1.0) {
        return Err(Error::Pole {
            what: "periodized_kernel",
            y,
            r: d,
        });
    }
    let w = PI / nu;
    let s = (w * y).sin();
    let sh = (w * d).sinh();
    Ok(periodized_from_parts(w, (2.0 * w * y).sin(), 2.0 * s * s, 2.0 * sh * sh))
}

/// Periodized kernel from precomputed pieces: `w = π/ν`,
/// `sin2 = sin(2πy/ν)`, `one_minus_cos = 2 sin²(πy/ν)`,
/// `cosh_minus_one = 2 sinh²(πd/ν)`. The split form avoids cancellation
/// in `cosh - cos` when both arguments are small.
#[inline]
pub fn periodized_from_parts(w: f64, sin2: f64, one_minus_cos: f64, cosh_minus_one: f64) -> f64 {
    w * sin2 / (cosh_minus_one + one_minus_cos)
}

/// `G⁺(B, y) = B / (2a (y² + (B + ay)²))`, an antiderivative in `y` of `h(y, B + ay)`.
pub fn g_plus(p: SlopeParam, big_b: f64, y: f64) -> Result<f64> {
    ensure_finite("g_plus", &[big_b, y])?;
    let a = p.a;
    let r = big_b + a * y;
    if y == 0.0 && r == 0.0 {
        return Err(Error::Pole { what: "g_plus", y, r });
    }
    Ok(big_b / (2.0 * a * (y * y + r * r)))
}

/// `G⁻(B, y)`, an antiderivative in `y` of `h(y, B - ay)`.
pub fn g_minus(p: SlopeParam, big_b: f64, y: f64) -> Result<f64> {
    ensure_finite("g_minus", &[big_b, y])?;
    let a = p.a;
    let r = big_b - a * y;
    if y == 0.0 && r == 0.0 {
        return Err(Error::Pole { what: "g_minus", y, r });
    }
    let q = y * y + r * r;
    let a2 = a * a;
    Ok((1.0 - 3.0 * a2) / (2.0 * a * (1.0 + a2)) * big_b / q - 2.0 * (1.0 - a2) / (1.0 + a2) * y / q)
}

/// `∂_B G⁺(B, y)`.
pub fn db_g_plus(p: SlopeParam, big_b: f64, y: f64) -> Result<f64> {
    ensure_finite("db_g_plus", &[big_b, y])?;
    let a = p.a;
    let r = big_b + a * y;
    if y == 0.0 && r == 0.0 {
        return Err(Error::Pole { what: "db_g_plus", y, r });
    }
    let q = y * y + r * r;
    Ok(((1.0 + a * a) * y * y - big_b * big_b) / (2.0 * a * q * q))
}

/// `∂_B G⁻(B, y)`.
pub fn db_g_minus(p: SlopeParam, big_b: f64, y: f64) -> Result<f64> {
    ensure_finite("db_g_minus", &[big_b, y])?;
    let a = p.a;
    let r = big_b - a * y;
    if y == 0.0 && r == 0.0 {
        return Err(Error::Pole { what: "db_g_minus", y, r });
    }
    let a2 = a * a;
    let q = y * y + r * r;
    let num = (3.0 * a2 - 1.0) * big_b * big_b
        + 8.0 * a * (1.0 - a2) * y * big_b
        + (1.0 - 10.0 * a2 + 5.0 * a2 * a2) * y * y;
    Ok(num / (2.0 * a * (1.0 + a2) * q * q))
}

/// `∫₀^s arctan r dr = s arctan s - ln √(1 + s²)`.
pub fn arctan_primitive(s: f64) -> Result<f64> {
    ensure_finite("arctan_primitive", &[s])?;
    Ok(s * s.atan() - 0.5 * (s * s).ln_1p())
}
