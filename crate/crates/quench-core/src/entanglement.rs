//! Block entanglement entropy of Gaussian states, its staged growth and
//! saturation, and the rescaled collapse of single-cone traces.

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::evolution::Evolver;
use crate::formfactor::linear_fit;
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::states::CorrelationMatrix;
use crate::tolerances::Tolerances;

fn binary_entropy(l: f64) -> f64 {
    let mut s = 0.0;
    if l > 0.0 {
        s -= l * l.ln();
    }
    if l < 1.0 {
        s -= (1.0 - l) * (1.0 - l).ln();
    }
    s
}

/// Entropy of a restricted correlation matrix, in nats.
pub fn restricted_entropy(block: &CMatrix, tol: &Tolerances) -> Result<f64> {
    let vals = hermitian_eigenvalues(block, 1e-6)?;
    let mut s = 0.0;
    for &l in &vals {
        if l < -tol.eigenvalue_clamp || l > 1.0 + tol.eigenvalue_clamp {
            return Err(QuenchError::NumericalValidity(format!(
                "restricted eigenvalue {l} outside [0, 1]"
            )));
        }
        s += binary_entropy(l.clamp(0.0, 1.0));
    }
    Ok(s)
}

/// Entropy of sites `start..=end` (1-based, inclusive).
pub fn block_entropy(c: &CorrelationMatrix, start: usize, end: usize, tol: &Tolerances) -> Result<f64> {
    let n = c.n();
    if start == 0 || start > end || end > n {
        return Err(QuenchError::OutOfRange(format!(
            "block {start}..={end} outside 1..={n}"
        )));
    }
    restricted_entropy(&c.matrix.principal_block(start - 1, end - start + 1), tol)
}

/// Entropy of an arbitrary set of 1-based sites.
pub fn subset_entropy(c: &CorrelationMatrix, sites: &[usize], tol: &Tolerances) -> Result<f64> {
    let n = c.n();
    if sites.is_empty() || sites.iter().any(|&s| s == 0 || s > n) {
        return Err(QuenchError::OutOfRange("site set empty or outside the chain".into()));
    }
    let sub = CMatrix::from_fn(sites.len(), sites.len(), |a, b| c.matrix[(sites[a] - 1, sites[b] - 1)]);
    restricted_entropy(&sub, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub t_start: f64,
    pub t_end: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageOptions {
    /// Half width, in time units, of the sliding fit giving local slopes.
    pub slope_halfwidth: f64,
    /// Allowed relative spread of local slopes within one stage.
    pub band: f64,
    pub min_duration: f64,
    /// Stages slower than this fraction of the fastest local slope count as flat.
    pub min_relative_slope: f64,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions {
            slope_halfwidth: 2.0,
            band: 0.2,
            min_duration: 10.0,
            min_relative_slope: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaturationOptions {
    /// Fraction of the trace, from the end, averaged into `S_sat`.
    pub tail_fraction: f64,
    /// Maximum relative spread over the tail for it to count as a plateau.
    pub plateau_spread: f64,
    /// Level, between `S(0)` and `S_sat`, that ends the reference ramp.
    pub ramp_level: f64,
    /// Start of the reference ramp as a fraction of its end time.
    pub ramp_start: f64,
    pub sigma_multiple: f64,
    /// Consecutive samples below the ramp needed to call the knee.
    pub run_length: usize,
}

impl Default for SaturationOptions {
    fn default() -> Self {
        SaturationOptions {
            tail_fraction: 0.1,
            plateau_spread: 0.02,
            ramp_level: 0.6,
            ramp_start: 0.4,
            sigma_multiple: 3.0,
            run_length: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub t_sat: f64,
    pub s_sat: f64,
    /// Slope of the reference ramp preceding the knee.
    pub ramp_slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub block_length: usize,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub stages: Vec<Stage>,
    pub saturation: Option<Saturation>,
}

impl EntropyTrace {
    pub fn from_samples(block_length: usize, times: Vec<f64>, entropy: Vec<f64>) -> Self {
        let stages = detect_stages(&times, &entropy, &StageOptions::default()).unwrap_or_default();
        let saturation = saturation(&times, &entropy, &SaturationOptions::default()).ok();
        EntropyTrace {
            block_length,
            times,
            entropy,
            stages,
            saturation,
        }
    }

    pub fn t_sat(&self) -> Option<f64> {
        self.saturation.map(|s| s.t_sat)
    }

    pub fn s_sat(&self) -> Option<f64> {
        self.saturation.map(|s| s.s_sat)
    }

    /// Maximum entropy of the block at half filling.
    pub fn max_entropy(&self) -> f64 {
        self.block_length as f64 * std::f64::consts::LN_2
    }
}

fn parallel_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (i, s) in slot.iter_mut().enumerate() {
                    *s = Some(f(w * chunk + i));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("every slot filled")).collect()
}

/// Entropy of the left-most block `{1..ell}` along a time grid.
pub fn entropy_trace(c0: &CorrelationMatrix, ell: usize, times: &[f64], tol: &Tolerances) -> Result<EntropyTrace> {
    let n = c0.n();
    if ell == 0 || ell >= n {
        return Err(QuenchError::OutOfRange(format!("block length {ell} must lie in 1..{n}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(QuenchError::InvalidParameter("trace times must be ascending".into()));
    }
    let ev = Evolver::new(c0)?;
    let values = parallel_map(times.len(), |i| restricted_entropy(&ev.block(times[i], 0, ell), tol));
    let entropy = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EntropyTrace::from_samples(ell, times.to_vec(), entropy))
}

/// Slopes of a sliding least-squares line, `half` samples either side.
pub fn local_slopes(t: &[f64], s: &[f64], half: usize) -> Vec<f64> {
    (0..t.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(t.len());
            linear_fit(&t[lo..hi], &s[lo..hi]).0
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut w = v.to_vec();
    w.sort_by(f64::total_cmp);
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

/// Linear growth stages: maximal runs where the local slope stays within a
/// band around its running median, long and steep enough to count.
pub fn detect_stages(t: &[f64], s: &[f64], opts: &StageOptions) -> Result<Vec<Stage>> {
    if t.len() < 20 || t.len() != s.len() {
        return Err(QuenchError::InsufficientSamples { need: 20, got: t.len().min(s.len()) });
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let half = ((opts.slope_halfwidth / dt).round() as usize).max(1);
    let sl = local_slopes(t, s, half);
    let smax = sl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut stages = Vec::new();
    let n = t.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n {
            let seg = &sl[i..j + 2];
            let m = median(seg);
            if seg.iter().all(|&x| (x - m).abs() <= opts.band * m.abs()) {
                j += 1;
            } else {
                break;
            }
        }
        // A run of clean local slopes ends about one fit half width before
        // the knee, so that much is credited back to its duration.
        let duration = t[j] - t[i] + opts.slope_halfwidth;
        if duration >= opts.min_duration && median(&sl[i..=j]) >= opts.min_relative_slope * smax {
            let (b, _, _) = linear_fit(&t[i..=j], &s[i..=j]);
            stages.push(Stage {
                t_start: t[i],
                t_end: t[j],
                slope: b,
            });
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(stages)
}

/// Saturation level and the time the growth leaves its last linear ramp.
///
/// `S_sat` is the tail mean. A line fitted to the ramp just below
/// `S0 + ramp_level (S_sat - S0)` is followed forward; `t_sat` is the first
/// time the trace stays more than `sigma_multiple` fit residuals below it
/// for `run_length` samples.
pub fn saturation(t: &[f64], s: &[f64], opts: &SaturationOptions) -> Result<Saturation> {
    let n = s.len();
    if n < 20 || t.len() != n {
        return Err(QuenchError::InsufficientSamples { need: 20, got: n.min(t.len()) });
    }
    let tail = ((n as f64 * opts.tail_fraction) as usize).max(1);
    let tail_vals = &s[n - tail..];
    let s_sat = tail_vals.iter().sum::<f64>() / tail as f64;
    let hi = tail_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail_vals.iter().copied().fold(f64::INFINITY, f64::min);
    if s_sat <= 0.0 || (hi - lo) > opts.plateau_spread * s_sat {
        return Err(QuenchError::NoPlateau(format!(
            "entropy still varies by {:.3} over the last {tail} samples; extend t_max while staying below (N - l)/v",
            hi - lo
        )));
    }
    let s0 = s[0];
    if s_sat - s0 <= opts.plateau_spread * s_sat {
        return Err(QuenchError::NoPlateau("trace shows no growth before its plateau".into()));
    }
    let target = s0 + opts.ramp_level * (s_sat - s0);
    let ib = s.iter().position(|&v| v >= target).ok_or_else(|| {
        QuenchError::NoPlateau("trace never approaches its tail mean".into())
    })?;
    let ia = t.partition_point(|&x| x < opts.ramp_start * t[ib]).min(ib.saturating_sub(2));
    let (b, a, _) = linear_fit(&t[ia..=ib], &s[ia..=ib]);
    let sse: f64 = (ia..=ib).map(|i| (s[i] - (a + b * t[i])).powi(2)).sum();
    let sigma = (sse / (ib - ia + 1) as f64).sqrt();
    let thr = opts.sigma_multiple * sigma;
    let resid: Vec<f64> = (0..n).map(|i| s[i] - (a + b * t[i])).collect();
    for j in ib..n {
        let end = (j + opts.run_length).min(n);
        if resid[j..end].iter().all(|&r| r < -thr) {
            return Ok(Saturation {
                t_sat: t[j],
                s_sat,
                ramp_slope: b,
            });
        }
    }
    Err(QuenchError::NoPlateau("no departure from the growth ramp found".into()))
}

/// First sample at or above `fraction * S_sat`.
pub fn threshold_crossing(t: &[f64], s: &[f64], s_sat: f64, fraction: f64) -> Option<f64> {
    s.iter().position(|&v| v >= fraction * s_sat).map(|i| t[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseNormalization {
    /// `S / S_sat`.
    Plain,
    /// `(S - S(0)) / (S_sat - S(0))`.
    Excess,
}

pub const COLLAPSE_GRID_POINTS: usize = 301;
pub const COLLAPSE_GRID_MAX: f64 = 1.5;
pub const COLLAPSE_WINDOW: (f64, f64) = (0.05, 0.95);

fn interp(x: f64, xs: &[f64], ys: &[f64]) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] * (1.0 - w) + ys[i] * w
}

/// Trace rescaled to `(t / t_sat, S / S_sat)` on the common collapse grid.
pub fn rescaled_curve(trace: &EntropyTrace, norm: CollapseNormalization) -> Result<Vec<f64>> {
    let sat = trace
        .saturation
        .ok_or(QuenchError::MissingSaturation(trace.block_length))?;
    let s0 = match norm {
        CollapseNormalization::Plain => 0.0,
        CollapseNormalization::Excess => trace.entropy[0],
    };
    let xs: Vec<f64> = trace.times.iter().map(|t| t / sat.t_sat).collect();
    let ys: Vec<f64> = trace.entropy.iter().map(|s| (s - s0) / (sat.s_sat - s0)).collect();
    Ok((0..COLLAPSE_GRID_POINTS)
        .map(|i| {
            let g = COLLAPSE_GRID_MAX * i as f64 / (COLLAPSE_GRID_POINTS - 1) as f64;
            interp(g, &xs, &ys)
        })
        .collect())
}

/// Largest pairwise vertical gap between rescaled traces over the growth window.
pub fn rescaled_collapse(traces: &[&EntropyTrace], norm: CollapseNormalization) -> Result<f64> {
    let curves = traces
        .iter()
        .map(|t| rescaled_curve(t, norm))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..COLLAPSE_GRID_POINTS {
        let g = COLLAPSE_GRID_MAX * i as f64 / (COLLAPSE_GRID_POINTS - 1) as f64;
        if g < COLLAPSE_WINDOW.0 - 1e-12 || g > COLLAPSE_WINDOW.1 + 1e-12 {
            continue;
        }
        for a in 0..curves.len() {
            for b in a + 1..curves.len() {
                worst = worst.max((curves[a][i] - curves[b][i]).abs());
            }
        }
    }
    Ok(worst)
}

/// Linear growth at `sigma_rate * v` until `t_sat = ell / v`, flat after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiparticleAnsatz {
    pub sigma_rate: f64,
    pub v: f64,
    pub ell: f64,
}

impl QuasiparticleAnsatz {
    pub fn t_sat(&self) -> f64 {
        self.ell / self.v
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.sigma_rate * self.v * t.min(self.t_sat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn binary_entropy_limits() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn clamp_window_enforced() {
        let tol = Tolerances::default();
        let bad = CMatrix::from_fn(1, 1, |_, _| C64::new(1.0 + 1e-6, 0.0));
        assert!(restricted_entropy(&bad, &tol).is_err());
        let ok = CMatrix::from_fn(1, 1, |_, _| C64::new(1.0 + 1e-10, 0.0));
        assert!(restricted_entropy(&ok, &tol).unwrap().abs() < 1e-12);
    }

    #[test]
    fn linear_input_single_stage() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        let s: Vec<f64> = t.iter().map(|x| 0.7 * x + 0.1).collect();
        let st = detect_stages(&t, &s, &StageOptions::default()).unwrap();
        assert_eq!(st.len(), 1);
        assert!((st[0].slope - 0.7).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let t = vec![0.0; 10];
        assert!(detect_stages(&t, &t, &StageOptions::default()).is_err());
    }

    #[test]
    fn ansatz_shape() {
        let q = QuasiparticleAnsatz { sigma_rate: 0.5, v: 2.0, ell: 50.0 };
        assert_eq!(q.t_sat(), 25.0);
        assert_eq!(q.predict(10.0), 10.0);
        assert_eq!(q.predict(40.0), 25.0);
    }
}
