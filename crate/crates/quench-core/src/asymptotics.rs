//! Bessel and Airy evaluation, the `t^{-1/3}` decay on the light cone and
//! the oscillatory structure inside it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::evolution::EvolvedTrace;
use crate::formfactor::linear_fit;

pub const BESSEL_MAX_ORDER: usize = 2000;
pub const BESSEL_MAX_ARG: f64 = 2000.0;
const BESSEL_MIN_NODES: usize = 4096;

/// `Gamma(2/3)`.
pub const GAMMA_TWO_THIRDS: f64 = 1.354_117_939_426_400_4;
/// `Ai(0) = 1 / (3^{2/3} Gamma(2/3))`.
pub const AIRY_AT_ZERO: f64 = 0.355_028_053_887_817_24;
/// `-Ai'(0) = 1 / (3^{1/3} Gamma(1/3))`.
const AIRY_SLOPE_AT_ZERO: f64 = 0.258_819_403_792_806_8;

/// Limit of `x^{1/3} J_x(x)` for large `x`.
pub fn bessel_diagonal_limit() -> f64 {
    2f64.cbrt() * AIRY_AT_ZERO
}

/// Leading on-cone amplitude of the dimer correlator.
pub fn dimer_oncone_amplitude() -> f64 {
    0.5 * AIRY_AT_ZERO
}

/// `J_n(nu)` by the trapezoid rule on `(1/2pi) int_0^{2pi} cos(n tau - nu sin tau)`.
///
/// The integrand is periodic and entire, so the rule converges geometrically
/// once the node count exceeds `n + nu`; the count is raised above the
/// default floor for large arguments.
pub fn bessel_j(n: usize, nu: f64) -> Result<f64> {
    if n > BESSEL_MAX_ORDER || !(0.0..=BESSEL_MAX_ARG).contains(&nu) {
        return Err(QuenchError::OutOfRange(format!(
            "J_{n}({nu}) outside n <= {BESSEL_MAX_ORDER}, 0 <= nu <= {BESSEL_MAX_ARG}"
        )));
    }
    let m = BESSEL_MIN_NODES.max(2 * (n + nu.ceil() as usize) + 256);
    let h = 2.0 * PI / m as f64;
    let nf = n as f64;
    let sum: f64 = (0..m)
        .map(|j| {
            let tau = j as f64 * h;
            (nf * tau - nu * tau.sin()).cos()
        })
        .sum();
    Ok(sum / m as f64)
}

/// Magnitude of the continuum dimer correlator at distance `x`, time `t`.
pub fn dimer_bessel_correlator(x: usize, t: f64) -> Result<f64> {
    if x <= 1 {
        return Err(QuenchError::OutOfRange(format!("distance {x} must exceed 1")));
    }
    let a = bessel_j(x - 1, 2.0 * t)?;
    let b = bessel_j(x + 1, 2.0 * t)?;
    Ok(0.25 * (a + b).abs())
}

pub const AIRY_MAX_ARG: f64 = 50.0;
const AIRY_SERIES_LIMIT: f64 = 7.0;

/// `Ai(z)` for `|z| <= 50`.
pub fn airy(z: f64) -> Result<f64> {
    if !z.is_finite() || z.abs() > AIRY_MAX_ARG {
        return Err(QuenchError::OutOfRange(format!("Ai({z}) outside |z| <= {AIRY_MAX_ARG}")));
    }
    if z.abs() <= AIRY_SERIES_LIMIT {
        Ok(airy_series(z))
    } else if z > 0.0 {
        Ok(airy_decaying(z))
    } else {
        Ok(airy_oscillating(-z))
    }
}

fn airy_series(z: f64) -> f64 {
    let z3 = z * z * z;
    let mut f = 1.0;
    let mut g = z;
    let mut tf = 1.0;
    let mut tg = z;
    for k in 1..200 {
        let k3 = 3.0 * k as f64;
        tf *= z3 / ((k3 - 1.0) * k3);
        tg *= z3 / (k3 * (k3 + 1.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs().max(1.0) && tg.abs() < 1e-18 * g.abs().max(1.0) {
            break;
        }
    }
    AIRY_AT_ZERO * f - AIRY_SLOPE_AT_ZERO * g
}

/// Coefficients `u_k` of the large-argument expansions.
fn airy_u(count: usize) -> Vec<f64> {
    let mut u = vec![1.0];
    for k in 1..count {
        let kf = k as f64;
        let prev = u[k - 1];
        u.push(prev * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf));
    }
    u
}

/// Sums `sum_k c_k (sign/zeta)^k` until the terms stop shrinking.
fn asymptotic_sum(coeffs: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut last = f64::INFINITY;
    for term in coeffs {
        if term.abs() > last {
            break;
        }
        s += term;
        last = term.abs();
        if last < 1e-17 {
            break;
        }
    }
    s
}

fn airy_decaying(z: f64) -> f64 {
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let u = airy_u(60);
    let series = asymptotic_sum(u.iter().enumerate().map(|(k, c)| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * c / zeta.powi(k as i32)
    }));
    (-zeta).exp() / (2.0 * PI.sqrt() * z.powf(0.25)) * series
}

fn airy_oscillating(z: f64) -> f64 {
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let u = airy_u(60);
    let even = asymptotic_sum((0..30).map(|k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * u[2 * k] / zeta.powi(2 * k as i32)
    }));
    let odd = asymptotic_sum((0..29).map(|k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * u[2 * k + 1] / zeta.powi(2 * k as i32 + 1)
    }));
    let phase = zeta + PI / 4.0;
    (phase.sin() * even - phase.cos() * odd) / (PI.sqrt() * z.powf(0.25))
}

/// Leading large-`z` form of `Ai(-z)`.
pub fn airy_negative_asymptote(z: f64) -> f64 {
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    (zeta + PI / 4.0).sin() / (PI.sqrt() * z.powf(0.25))
}

/// Leading uniform approximation `J_nu(nu + z nu^{1/3}) ~ (2/nu)^{1/3} Ai(-2^{1/3} z)`.
pub fn uniform_airy_bessel(nu: f64, z: f64) -> Result<f64> {
    Ok((2.0 / nu).cbrt() * airy(-(2f64.cbrt()) * z)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiryRegionPoint {
    pub x: f64,
    pub t: f64,
    /// Scaled distance `(2t - x) / x^{1/3}` behind the front.
    pub z: f64,
}

impl AiryRegionPoint {
    pub fn new(x: f64, t: f64) -> Self {
        AiryRegionPoint {
            x,
            t,
            z: (2.0 * t - x) / x.cbrt(),
        }
    }
}

/// Phase `(4t - 2x)^{3/2} / (3 x^{1/2}) - pi/4` of the interior oscillation.
pub fn cosine_argument(x: f64, t: f64) -> f64 {
    (4.0 * t - 2.0 * x).max(0.0).powf(1.5) / (3.0 * x.sqrt()) - PI / 4.0
}

/// Oscillatory interior prediction for the dimer correlator magnitude.
pub fn offcone_prediction(x: f64, t: f64) -> Result<f64> {
    if x <= 0.0 || x >= 2.0 * t {
        return Err(QuenchError::OutOfRange(format!(
            "interior prediction needs 0 < x < 2t, got x = {x}, t = {t}"
        )));
    }
    let amp = 2f64.powf(0.75) * PI.sqrt() * x.powf(0.25) * (2.0 * t - x).powf(0.25);
    Ok(cosine_argument(x, t).cos().abs() / amp)
}

/// Times at which the interior phase equals `n pi`, one per distance.
pub fn extremal_lines(n: usize, xs: &[f64]) -> Result<Vec<AiryRegionPoint>> {
    if n == 0 {
        return Err(QuenchError::InvalidParameter("extremal line index must be >= 1".into()));
    }
    let phase = n as f64 * PI + PI / 4.0;
    Ok(xs
        .iter()
        .map(|&x| {
            let t = (2.0 * x + (3.0 * x.sqrt() * phase).powf(2.0 / 3.0)) / 4.0;
            AiryRegionPoint::new(x, t)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnConeOptions {
    /// Defaults to `[8, N / (2 v) - 5]`.
    pub window: Option<(f64, f64)>,
    /// Shift of the sampled site relative to `v t`.
    pub offset: f64,
    /// Half width of a Hann-weighted RMS envelope; zero samples the nearest site.
    pub envelope_halfwidth: f64,
}

impl Default for OnConeOptions {
    fn default() -> Self {
        OnConeOptions {
            window: None,
            offset: 0.0,
            envelope_halfwidth: 0.0,
        }
    }
}

impl OnConeOptions {
    /// Envelope wide enough to span one beat of the lines at `alpha` and `2 pi - alpha`.
    pub fn for_shift(alpha: f64) -> Self {
        let w = if (alpha - PI).abs() < 1e-9 || alpha <= 0.0 {
            0.0
        } else {
            2.0 * PI / alpha
        };
        OnConeOptions {
            envelope_halfwidth: w,
            ..Default::default()
        }
    }
}

pub fn default_oncone_window(n: usize, v_max: f64) -> (f64, f64) {
    (8.0, n as f64 / (2.0 * v_max) - 5.0)
}

const MIN_DECAY_SAMPLES: usize = 15;

fn envelope(row: &[f64], c: f64, w: f64) -> f64 {
    let n = row.len() as i64;
    let at = |x: i64| row[x.rem_euclid(n) as usize];
    if w <= 0.0 {
        return at(c.round() as i64);
    }
    let lo = (c - w).floor() as i64 - 1;
    let hi = (c + w).ceil() as i64 + 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for x in lo..=hi {
        let u = (x as f64 - c) / w;
        if u.abs() < 1.0 {
            let wt = (PI * u / 2.0).cos().powi(2);
            num += wt * at(x).powi(2);
            den += wt;
        }
    }
    (num / den).sqrt()
}

/// Power-law fit of `|C_{1,1+x}(t)|` along `x = v t`.
pub fn oncone_decay_fit(trace: &EvolvedTrace, v_eff: f64, opts: &OnConeOptions) -> Result<DecayFit> {
    if v_eff <= 0.0 {
        return Err(QuenchError::InvalidParameter("cone velocity must be positive".into()));
    }
    let window = opts.window.unwrap_or_else(|| default_oncone_window(trace.n, v_eff));
    let mut lt = Vec::new();
    let mut ly = Vec::new();
    let mut all_small = true;
    for (i, &t) in trace.times.iter().enumerate() {
        if t < window.0 - 1e-12 || t > window.1 + 1e-12 || t <= 0.0 {
            continue;
        }
        let row: Vec<f64> = trace.rows[i].iter().map(|z| z.norm()).collect();
        let y = envelope(&row, v_eff * t + opts.offset, opts.envelope_halfwidth);
        if y >= 1e-12 {
            all_small = false;
        }
        lt.push(t.ln());
        ly.push(y.max(1e-300).ln());
    }
    if lt.len() < MIN_DECAY_SAMPLES {
        return Err(QuenchError::InsufficientSamples {
            need: MIN_DECAY_SAMPLES,
            got: lt.len(),
        });
    }
    if all_small {
        return Err(QuenchError::FitRejected("on-cone magnitudes all below 1e-12".into()));
    }
    let (slope, intercept, r2) = linear_fit(&lt, &ly);
    Ok(DecayFit {
        window,
        exponent: slope,
        amplitude: intercept.exp(),
        r_squared: r2.clamp(0.0, 1.0),
        samples: lt.len(),
    })
}
