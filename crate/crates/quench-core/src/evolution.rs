//! Unitary evolution `C(t) = P(t) C0 P(t)^dagger` under the uniform chain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::linalg::{CMatrix, SparseRows, C64, ZERO};
use crate::model::{ChainSpec, Propagator, PropagatorKernel};
use crate::states::CorrelationMatrix;

/// Evolves one initial state to arbitrary times, reusing the phase tables
/// and the sparse view of `C0`.
#[derive(Debug, Clone)]
pub struct Evolver {
    kernel: PropagatorKernel,
    c0: CorrelationMatrix,
    sparse: SparseRows,
}

impl Evolver {
    pub fn new(c0: &CorrelationMatrix) -> Result<Self> {
        let spec = ChainSpec::new(c0.n())?;
        Ok(Evolver {
            kernel: PropagatorKernel::new(spec),
            c0: c0.clone(),
            sparse: c0.sparse(),
        })
    }

    pub fn n(&self) -> usize {
        self.c0.n()
    }

    pub fn initial(&self) -> &CorrelationMatrix {
        &self.c0
    }

    pub fn propagator(&self, t: f64) -> Propagator {
        self.kernel.at(t)
    }

    pub fn evolve(&self, t: f64) -> CorrelationMatrix {
        let p = self.kernel.at(t);
        let pm = p.matrix();
        let left = self.sparse.left_mul(&pm);
        self.c0.with_matrix(left.matmul_adjoint(&pm))
    }

    /// 0-based row `j` of `C(t)`.
    pub fn row(&self, t: f64, j: usize) -> Vec<C64> {
        let p = self.kernel.at(t);
        self.row_with(&p, j)
    }

    fn row_with(&self, p: &Propagator, j: usize) -> Vec<C64> {
        let n = self.n();
        // r_l' = sum_l P_{j l} C0_{l l'}
        let mut r = vec![ZERO; n];
        for l in 0..n {
            let pjl = p.entry(j, l);
            for (lp, v) in self.sparse.row(l) {
                r[lp] += pjl * v;
            }
        }
        let k = p.kernel();
        (0..n)
            .map(|jp| {
                let mut acc = ZERO;
                for (lp, &rl) in r.iter().enumerate() {
                    acc += rl * k[(jp + n - lp) % n].conj();
                }
                acc
            })
            .collect()
    }

    /// Single 0-based entry `C_{j j'}(t)`.
    pub fn entry(&self, t: f64, j: usize, jp: usize) -> C64 {
        let p = self.kernel.at(t);
        self.entry_with(&p, j, jp)
    }

    fn entry_with(&self, p: &Propagator, j: usize, jp: usize) -> C64 {
        let mut acc = ZERO;
        for l in 0..self.n() {
            let pjl = p.entry(j, l);
            for (lp, v) in self.sparse.row(l) {
                acc += pjl * v * p.entry(jp, lp).conj();
            }
        }
        acc
    }

    /// Block `start..start+len` (0-based, no wrap) of `C(t)`.
    pub fn block(&self, t: f64, start: usize, len: usize) -> CMatrix {
        let p = self.kernel.at(t);
        let pb = p.rows_block(start, len);
        let left = self.sparse.left_mul(&pb);
        left.matmul_adjoint(&pb)
    }
}

pub fn evolve(c0: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    Ok(Evolver::new(c0)?.evolve(t))
}

/// Rows `C_{1,j}(t)` sampled on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolvedTrace {
    pub n: usize,
    pub times: Vec<f64>,
    /// `rows[i][j]` is `C_{1, j+1}(times[i])`.
    pub rows: Vec<Vec<C64>>,
}

impl EvolvedTrace {
    pub fn magnitude(&self, i: usize, x: usize) -> f64 {
        self.rows[i][x % self.n].norm()
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|z| z.norm()).collect())
            .collect()
    }
}

pub fn correlation_trace(c0: &CorrelationMatrix, times: &[f64]) -> Result<EvolvedTrace> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(QuenchError::InvalidParameter(
            "trace times must be ascending".into(),
        ));
    }
    let ev = Evolver::new(c0)?;
    let rows = times
        .iter()
        .map(|&t| ev.row_with(&ev.kernel.at(t), 0))
        .collect();
    Ok(EvolvedTrace {
        n: c0.n(),
        times: times.to_vec(),
        rows,
    })
}

/// Uniform grid `0, dt, 2dt, ...` up to and including `t_max` (within dt/2).
pub fn time_grid(dt: f64, t_max: f64) -> Vec<f64> {
    let steps = (t_max / dt + 0.5).floor() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

/// Time after which the fastest front, moving both ways, meets itself.
pub fn wrap_time(n: usize, v_max: f64) -> f64 {
    (n as f64 / 2.0) / v_max
}

/// Closed-form dimer correlator with 1-based sites, by direct momentum sum.
pub fn dimer_exact(j: usize, jp: usize, t: f64, spec: ChainSpec) -> Result<C64> {
    let n = spec.n();
    if n % 2 != 0 {
        return Err(QuenchError::Divisibility {
            n,
            family: "dimer".into(),
            requirement: "N must be even".into(),
        });
    }
    let (ji, jpi) = (j as i64, jp as i64);
    let ni = n as i64;
    let md = |d: i64| d.rem_euclid(ni);
    let mut local = 0.0;
    if ji == jpi {
        local += 0.5;
    }
    if md(ji - (jpi - 1)) == 0 {
        local += 0.25;
    }
    if md(ji - (jpi + 1)) == 0 {
        local += 0.25;
    }
    let a = md(-ji + jpi - 1);
    let b = md(-ji + jpi + 1);
    let mut sum = ZERO;
    for m in 0..n {
        let k = spec.k(m);
        let ea = C64::from_polar(1.0, 2.0 * PI * ((a * m as i64) % ni) as f64 / n as f64);
        let eb = C64::from_polar(1.0, 2.0 * PI * ((b * m as i64) % ni) as f64 / n as f64);
        sum += (ea - eb) * C64::from_polar(1.0, -2.0 * t * k.cos());
    }
    let parity = if jp % 2 == 0 { 1.0 } else { -1.0 };
    Ok(C64::new(local, 0.0) + sum * (parity / (4.0 * n as f64)))
}

/// Trapezoidal average of `C_{j j'}(t)` over `[0, T]` (1-based sites).
pub fn time_average(
    c0: &CorrelationMatrix,
    j: usize,
    jp: usize,
    horizon: f64,
    samples: usize,
) -> Result<C64> {
    if horizon <= 0.0 {
        return Err(QuenchError::InvalidParameter("T must be positive".into()));
    }
    if samples < 2 {
        return Err(QuenchError::InsufficientSamples { need: 2, got: samples });
    }
    let n = c0.n();
    if j == 0 || jp == 0 || j > n || jp > n {
        return Err(QuenchError::OutOfRange(format!("sites ({j}, {jp}) outside 1..={n}")));
    }
    let ev = Evolver::new(c0)?;
    let h = horizon / (samples - 1) as f64;
    let mut acc = ZERO;
    for i in 0..samples {
        let w = if i == 0 || i == samples - 1 { 0.5 } else { 1.0 };
        let p = ev.kernel.at(i as f64 * h);
        acc += ev.entry_with(&p, j - 1, jp - 1) * w;
    }
    Ok(acc * (h / horizon))
}
