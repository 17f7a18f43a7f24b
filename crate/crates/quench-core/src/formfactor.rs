//! Momentum-space correlation matrix `F_{kk'} = (1/N) sum e^{i(lk - l'k')} C_{ll'}`
//! and the light-cone velocities encoded in its line structure.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::evolution::EvolvedTrace;
use crate::linalg::{CMatrix, C64, ZERO};
use crate::model::ChainSpec;
use crate::states::{BondPattern, CorrelationMatrix, StateFamily};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub struct FormFactor {
    pub matrix: CMatrix,
}

impl FormFactor {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.matrix.row(i).iter().map(|z| z.norm()).collect())
            .collect()
    }
}

/// `W_{m,l} = e^{i l k_m} / sqrt(N)` with 1-based site label `l`.
fn fourier_matrix(n: usize) -> CMatrix {
    let norm = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |m, l0| {
        let r = (m * (l0 + 1)) % n;
        C64::from_polar(norm, 2.0 * PI * r as f64 / n as f64)
    })
}

pub fn form_factor(c: &CorrelationMatrix) -> FormFactor {
    form_factor_of(&c.matrix)
}

pub fn form_factor_of(c: &CMatrix) -> FormFactor {
    let w = fourier_matrix(c.rows());
    let wc = c.sparse_rows().left_mul(&w);
    FormFactor {
        matrix: wc.matmul_adjoint(&w),
    }
}

pub fn inverse_form_factor(f: &FormFactor) -> CMatrix {
    let w = fourier_matrix(f.n());
    w.adjoint().matmul(&f.matrix).matmul(&w)
}

/// Direct valence-bond sum for a single grid pair, valid everywhere
/// including the rainbow poles.
pub fn vbs_form_factor_entry(pattern: &BondPattern, m: usize, mp: usize) -> C64 {
    let n = pattern.n();
    let phase = |r: usize| C64::from_polar(1.0, 2.0 * PI * (r % n) as f64 / n as f64);
    let mut acc = ZERO;
    for l in 1..=n {
        let s = pattern.partner(l);
        // e^{i(k l - k' sigma(l))}
        let r = (m * l + n * n - (mp * s) % n) % n;
        acc += phase(r) * pattern.sign_of(l) as f64;
    }
    let mut val = acc / (2.0 * n as f64);
    if m == mp {
        val += 0.5;
    }
    val
}

/// Value of a closed-form expression on one grid pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormValue {
    Value(C64),
    /// The simplified expression has a vanishing denominator here.
    DivergentLine,
}

impl ClosedFormValue {
    pub fn value(self) -> Option<C64> {
        match self {
            ClosedFormValue::Value(z) => Some(z),
            ClosedFormValue::DivergentLine => None,
        }
    }
}

/// Closed-form `F` at grid indices `(m, m')`.
pub fn closed_form_ff(
    family: StateFamily,
    spec: ChainSpec,
    m: usize,
    mp: usize,
) -> Result<ClosedFormValue> {
    let n = spec.n();
    if m >= n || mp >= n {
        return Err(QuenchError::OutOfRange(format!(
            "grid indices ({m}, {mp}) outside 0..{n}"
        )));
    }
    // Validate divisibility through the pattern constructors.
    family.pattern(spec)?;
    let k = spec.k(m);
    let kp = spec.k(mp);
    let delta = if m == mp { 0.5 } else { 0.0 };
    let diff = (m + n - mp) % n;
    let sum = (m + mp) % n;
    let modulation = C64::from_polar(1.0, kp) + C64::from_polar(1.0, -k);
    let v = match family {
        StateFamily::Dimer => {
            let mut z = C64::new(delta, 0.0);
            if diff == 0 || 2 * diff == n {
                z += modulation / 4.0;
            }
            z
        }
        StateFamily::DimerQ { q } => {
            let mut z = C64::new(delta, 0.0);
            // lines k - k' = (2j+1) pi / (2q)
            if (4 * q * diff) % n == 0 && ((4 * q * diff) / n) % 2 == 1 {
                let w = C64::from_polar(1.0, 4.0 * PI * diff as f64 / n as f64);
                z += modulation / ((C64::new(1.0, 0.0) - w) * (2.0 * q as f64));
            }
            z
        }
        StateFamily::Wigner { p } => {
            if n % p != 0 {
                return Err(QuenchError::Divisibility {
                    n,
                    family: family.name(),
                    requirement: format!("N must be a multiple of {p}"),
                });
            }
            if diff % (n / p) == 0 {
                C64::new(1.0 / p as f64, 0.0)
            } else {
                ZERO
            }
        }
        StateFamily::Rainbow => {
            if 2 * sum == n {
                return Ok(ClosedFormValue::DivergentLine);
            }
            let half = n / 2;
            let sgn = if (half + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let parity = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
            // e^{ikN/2} = (-1)^m on the grid
            let inner = C64::new(parity(m) + sgn * parity(mp), 0.0);
            let pref = C64::from_polar(sgn, (k - kp) / 2.0);
            C64::new(delta, 0.0) + pref * inner * inner / (4.0 * n as f64 * ((k + kp) / 2.0).cos())
        }
        StateFamily::FrozenRainbow => {
            let mut z = C64::new(delta, 0.0);
            if sum == 0 {
                let r = ((n + 1) * mp) % n;
                z += C64::from_polar(0.5, -2.0 * PI * r as f64 / n as f64);
            }
            z
        }
        StateFamily::Island { .. } => return Err(QuenchError::NoClosedForm(family.name())),
    };
    Ok(ClosedFormValue::Value(v))
}

/// Largest deviation between the closed form and the transform of the
/// constructed state, over all grid pairs except flagged poles.
pub fn verify_closed_forms(family: StateFamily, spec: ChainSpec, tol: &Tolerances) -> Result<f64> {
    let c = family.build(spec, tol)?;
    let f = form_factor(&c);
    let n = spec.n();
    let mut worst: f64 = 0.0;
    for m in 0..n {
        for mp in 0..n {
            if let ClosedFormValue::Value(z) = closed_form_ff(family, spec, m, mp)? {
                worst = worst.max((z - f.matrix[(m, mp)]).norm());
            }
        }
    }
    Ok(worst)
}

/// One detected line `k' = s k + alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightConeSpecies {
    pub sign: i8,
    /// Shift in `[0, pi]` after merging `alpha` with `2 pi - alpha`.
    pub alpha: f64,
    /// Grid offset of the shift, `alpha = 2 pi offset / N`.
    pub offset: usize,
    pub weight: f64,
    pub v_eff: f64,
}

pub const DEFAULT_LINE_THRESHOLD: f64 = 0.1;
const UNCORRELATED_MASS: f64 = 1e-9;

pub fn detect_lines(f: &FormFactor, threshold_fraction: f64) -> Vec<LightConeSpecies> {
    let n = f.n();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut total = 0.0;
    for m in 0..n {
        for (mp, z) in f.matrix.row(m).iter().enumerate() {
            if m == mp {
                continue;
            }
            let a = z.norm();
            total += a;
            plus[(mp + n - m) % n] += a;
            minus[(m + mp) % n] += a;
        }
    }
    if total < UNCORRELATED_MASS {
        return Vec::new();
    }
    let mut merged = Vec::new();
    for (sign, bins) in [(1i8, &plus), (-1i8, &minus)] {
        for a in 0..=n / 2 {
            let partner = (n - a) % n;
            let w = if partner == a { bins[a] } else { bins[a] + bins[partner] };
            if w > 0.0 {
                let alpha = 2.0 * PI * a as f64 / n as f64;
                merged.push(LightConeSpecies {
                    sign,
                    alpha,
                    offset: a,
                    weight: w,
                    v_eff: 2.0 * (alpha / 2.0).sin(),
                });
            }
        }
    }
    let top = merged.iter().map(|s| s.weight).fold(0.0, f64::max);
    merged.retain(|s| s.weight > threshold_fraction * top);
    merged
}

/// Species with the largest line mass.
pub fn dominant_species(species: &[LightConeSpecies]) -> Option<LightConeSpecies> {
    species
        .iter()
        .copied()
        .max_by(|a, b| a.weight.total_cmp(&b.weight).then(a.v_eff.total_cmp(&b.v_eff)))
}

/// Distinct predicted cone velocities, ascending.
pub fn predicted_velocities(family: StateFamily) -> Vec<f64> {
    let mut v: Vec<f64> = match family {
        StateFamily::Dimer | StateFamily::Rainbow => vec![2.0],
        StateFamily::FrozenRainbow => vec![0.0],
        StateFamily::DimerQ { q } => (1..=q)
            .map(|p| 2.0 * ((2 * p - 1) as f64 * PI / (4 * q) as f64).sin())
            .collect(),
        StateFamily::Wigner { p } | StateFamily::Island { p, .. } => (1..p)
            .map(|m| 2.0 * (m as f64 * PI / p as f64).sin())
            .collect(),
    };
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

/// Tuning of the front detector; distances in sites, times in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontOptions {
    pub t_min: f64,
    /// Defaults to the last sample of the trace.
    pub t_max: Option<f64>,
    /// Front position is the farthest site at or above this fraction of the strip maximum.
    pub quantile: f64,
    pub min_distance: usize,
    pub ray_min: f64,
    pub ray_max: f64,
    pub ray_step: f64,
    pub ray_halfwidth_sites: f64,
    pub peak_window: f64,
    pub drop_lookahead: f64,
    pub min_drop: f64,
    pub strip_halfwidth: f64,
    pub min_r_squared: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            t_min: 15.0,
            t_max: None,
            quantile: 0.9,
            min_distance: 5,
            ray_min: 0.2,
            ray_max: 2.2,
            ray_step: 0.01,
            ray_halfwidth_sites: 2.0,
            peak_window: 0.06,
            drop_lookahead: 0.2,
            min_drop: 0.15,
            strip_halfwidth: 0.12,
            min_r_squared: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontFit {
    /// Ray `x = u t` on which the front was found.
    pub ray: f64,
    /// Relative fall of the ray profile just outside the front.
    pub drop: f64,
    pub velocity: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line `y = a + b x`: returns `(b, a, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Finds every correlation front in `|C_{1,1+x}(t)|` and fits its slope.
///
/// A ray profile `G(u)` (median over time of `t^{1/3}` times the strip
/// maximum around `x = u t`) peaks on each front and falls off just outside
/// it; each qualifying peak seeds a least-squares fit of the front position
/// against time.
pub fn measure_front_velocity(trace: &EvolvedTrace, opts: &FrontOptions) -> Result<Vec<FrontFit>> {
    let n = trace.n;
    let half = n / 2;
    let t_max = opts.t_max.unwrap_or(*trace.times.last().unwrap_or(&0.0));
    let sel: Vec<usize> = (0..trace.times.len())
        .filter(|&i| trace.times[i] >= opts.t_min - 1e-12 && trace.times[i] <= t_max + 1e-12)
        .collect();
    if sel.len() < 3 {
        return Err(QuenchError::InsufficientSamples { need: 3, got: sel.len() });
    }
    let mags = trace.magnitudes();
    let n_rays = ((opts.ray_max - opts.ray_min) / opts.ray_step).round() as usize;
    let rays: Vec<f64> = (0..n_rays).map(|i| opts.ray_min + i as f64 * opts.ray_step).collect();

    let profile: Vec<Option<f64>> = rays
        .iter()
        .map(|&u| {
            let mut vals = Vec::new();
            for &i in &sel {
                let t = trace.times[i];
                let x = u * t;
                let lo = (x - opts.ray_halfwidth_sites).floor() as i64;
                let hi = (x + opts.ray_halfwidth_sites).ceil() as i64;
                if hi > half as i64 {
                    continue;
                }
                let lo = lo.max(opts.min_distance as i64);
                if lo > hi {
                    continue;
                }
                let m = (lo..=hi)
                    .map(|xx| mags[i][xx as usize])
                    .fold(0.0, f64::max);
                vals.push(m * t.cbrt());
            }
            if vals.is_empty() {
                None
            } else {
                Some(median(&mut vals))
            }
        })
        .collect();

    let nw = (opts.peak_window / opts.ray_step).round() as usize;
    let nl = (opts.drop_lookahead / opts.ray_step).round() as usize;
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..rays.len() {
        let Some(g) = profile[i] else { continue };
        if g <= 0.0 {
            continue;
        }
        let lo = i.saturating_sub(nw);
        let hi = (i + nw + 1).min(rays.len());
        let local_max = profile[lo..hi].iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
        if g < local_max {
            continue;
        }
        let after: Vec<f64> = profile[(i + 1).min(rays.len())..(i + nl + 1).min(rays.len())]
            .iter()
            .flatten()
            .copied()
            .collect();
        if after.len() < nl / 2 {
            continue;
        }
        let min_after = after.iter().copied().fold(f64::INFINITY, f64::min);
        let drop = (g - min_after) / g;
        if drop >= opts.min_drop {
            candidates.push((rays[i], drop));
        }
    }
    // Plateaus produce runs of equal maxima; keep the sharpest drop per run.
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    for (u, d) in candidates {
        match seeds.last_mut() {
            Some(last) if u - last.0 <= opts.peak_window + 1e-9 => {
                if d > last.1 {
                    *last = (u, d);
                }
            }
            _ => seeds.push((u, d)),
        }
    }

    let mut fits = Vec::new();
    for (u, d) in seeds {
        let mut ts = Vec::new();
        let mut xs = Vec::new();
        for &i in &sel {
            let t = trace.times[i];
            let lo = (((u - opts.strip_halfwidth) * t).floor() as i64).max(opts.min_distance as i64);
            let hi = (((u + opts.strip_halfwidth) * t).ceil() as i64).min(half as i64);
            if lo > hi {
                continue;
            }
            let seg = &mags[i][lo as usize..=hi as usize];
            let m = seg.iter().copied().fold(0.0, f64::max);
            if m <= 0.0 {
                continue;
            }
            let idx = seg.iter().rposition(|&a| a >= opts.quantile * m).unwrap_or(0);
            ts.push(t);
            xs.push((lo as usize + idx) as f64);
        }
        if ts.len() < 3 {
            continue;
        }
        let (slope, intercept, r2) = linear_fit(&ts, &xs);
        if r2 >= opts.min_r_squared {
            fits.push(FrontFit {
                ray: u,
                drop: d,
                velocity: slope,
                intercept,
                r_squared: r2,
            });
        }
    }
    if fits.is_empty() {
        return Err(QuenchError::FitRejected(
            "no front with R^2 above the acceptance threshold".into(),
        ));
    }
    fits.sort_by(|a, b| a.velocity.total_cmp(&b.velocity));
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> ChainSpec {
        ChainSpec::new(n).unwrap()
    }

    #[test]
    fn uncorrelated_half_filling() {
        let n = 12;
        let c = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(0.5, 0.0) } else { ZERO });
        let f = form_factor_of(&c);
        assert!(f.matrix.max_abs_diff(&c) < 1e-14);
        assert!(detect_lines(&f, DEFAULT_LINE_THRESHOLD).is_empty());
    }

    #[test]
    fn dimer_one_quarter_line() {
        let s = spec(16);
        // k - k' = pi/2 -> offset N/4
        let (m, mp) = (5, 1);
        let z = closed_form_ff(StateFamily::DimerQ { q: 1 }, s, m, mp).unwrap().value().unwrap();
        let want = C64::from_polar(1.0, -s.k(m)) + C64::from_polar(1.0, s.k(mp));
        assert!((z - want / 4.0).norm() < 1e-14);
    }

    #[test]
    fn dimer_diagonal() {
        let s = spec(16);
        for m in 0..16 {
            let z = closed_form_ff(StateFamily::Dimer, s, m, m).unwrap().value().unwrap();
            assert!((z - C64::new(0.5 + 0.5 * s.k(m).cos(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rainbow_pole_is_flagged() {
        let s = spec(16);
        assert_eq!(
            closed_form_ff(StateFamily::Rainbow, s, 3, 5).unwrap(),
            ClosedFormValue::DivergentLine
        );
        assert!(closed_form_ff(StateFamily::Island { p: 3, gamma: 0.5 }, s, 0, 0).is_err());
    }

    #[test]
    fn predicted_sets() {
        let w4 = predicted_velocities(StateFamily::Wigner { p: 4 });
        assert_eq!(w4.len(), 2);
        assert!((w4[0] - 2f64.sqrt()).abs() < 1e-12 && (w4[1] - 2.0).abs() < 1e-12);
        let d3 = predicted_velocities(StateFamily::DimerQ { q: 3 });
        let want = [PI / 12.0, 3.0 * PI / 12.0, 5.0 * PI / 12.0].map(|a| 2.0 * a.sin());
        for (a, b) in d3.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let isl = predicted_velocities(StateFamily::Island { p: 3, gamma: 0.999 });
        assert_eq!(isl.len(), 1);
        assert!((isl[0] - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(predicted_velocities(StateFamily::FrozenRainbow), vec![0.0]);
    }

    #[test]
    fn linear_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b, a, r2) = linear_fit(&x, &y);
        assert!((b - 2.0).abs() < 1e-14 && (a - 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
