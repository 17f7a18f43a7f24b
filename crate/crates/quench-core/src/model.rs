//! Periodic tight-binding chain: momenta, dispersion and the single-particle
//! propagator `P(t)_{jl} = (1/N) sum_k e^{-i(j-l)k} e^{i t eps_k}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::linalg::{CMatrix, C64};

/// Hard cap keeping dense O(N^3) work tractable.
pub const MAX_SITES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    n: usize,
}

impl ChainSpec {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&n) {
            return Err(QuenchError::InvalidChain(n));
        }
        Ok(ChainSpec { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Momentum of grid index `m`.
    pub fn k(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub momenta: Vec<f64>,
}

impl MomentumGrid {
    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.momenta.len() as f64
    }
}

pub fn valid_momenta(spec: ChainSpec) -> MomentumGrid {
    MomentumGrid {
        momenta: (0..spec.n()).map(|m| spec.k(m)).collect(),
    }
}

pub fn dispersion(k: f64) -> f64 {
    -k.cos()
}

/// Slope of the dispersion at the Fermi momentum of filling `1/p`.
pub fn group_velocity(p: usize) -> Result<f64> {
    if p < 2 {
        return Err(QuenchError::InvalidParameter(format!(
            "group velocity needs P >= 2, got {p}"
        )));
    }
    Ok((PI / p as f64).sin())
}

/// Circulant propagator, stored through its first column `p[d] = P_{d,0}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub n: usize,
    pub t: f64,
    kernel: Vec<C64>,
}

impl Propagator {
    /// `P_{jl}` for 0-based `j, l`.
    #[inline]
    pub fn entry(&self, j: usize, l: usize) -> C64 {
        self.kernel[(j + self.n - l) % self.n]
    }

    /// `p[d]` with `d = (j - l) mod N`.
    pub fn kernel(&self) -> &[C64] {
        &self.kernel
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, l| self.entry(j, l))
    }

    /// Rows `start..start+len` (0-based, wrapping) as a dense `len x N` block.
    pub fn rows_block(&self, start: usize, len: usize) -> CMatrix {
        CMatrix::from_fn(len, self.n, |i, l| self.entry((start + i) % self.n, l))
    }
}

/// Precomputed phases for building propagators at many times.
#[derive(Debug, Clone)]
pub struct PropagatorKernel {
    spec: ChainSpec,
    // e^{-2 pi i r / N} for r = 0..N
    twiddle: Vec<C64>,
    energies: Vec<f64>,
}

impl PropagatorKernel {
    pub fn new(spec: ChainSpec) -> Self {
        let n = spec.n();
        let twiddle = (0..n)
            .map(|r| C64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64))
            .collect();
        let energies = (0..n).map(|m| dispersion(spec.k(m))).collect();
        PropagatorKernel {
            spec,
            twiddle,
            energies,
        }
    }

    pub fn spec(&self) -> ChainSpec {
        self.spec
    }

    pub fn at(&self, t: f64) -> Propagator {
        let n = self.spec.n();
        let phases: Vec<C64> = self
            .energies
            .iter()
            .map(|&e| C64::from_polar(1.0, t * e))
            .collect();
        let norm = 1.0 / n as f64;
        let kernel = (0..n)
            .map(|d| {
                let mut acc = C64::new(0.0, 0.0);
                let mut r = 0usize;
                for ph in &phases {
                    acc += self.twiddle[r] * ph;
                    r += d;
                    if r >= n {
                        r -= n;
                    }
                }
                acc * norm
            })
            .collect();
        Propagator { n, t, kernel }
    }
}

pub fn propagator(spec: ChainSpec, t: f64) -> Propagator {
    PropagatorKernel::new(spec).at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids() {
        let g = valid_momenta(ChainSpec::new(4).unwrap());
        let want = [0.0, PI / 2.0, PI, 1.5 * PI];
        for (a, b) in g.momenta.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let g2 = valid_momenta(ChainSpec::new(2).unwrap());
        assert_eq!(g2.len(), 2);
        assert!((g2.momenta[1] - PI).abs() < 1e-15);
        let g240 = valid_momenta(ChainSpec::new(240).unwrap());
        assert_eq!(g240.len(), 240);
        assert!((g240.spacing() - 2.0 * PI / 240.0).abs() < 1e-16);
    }

    #[test]
    fn rejects_short_chain() {
        assert!(ChainSpec::new(1).is_err());
        assert!(ChainSpec::new(0).is_err());
        assert!(ChainSpec::new(MAX_SITES + 1).is_err());
    }

    #[test]
    fn dispersion_values() {
        assert_eq!(dispersion(0.0), -1.0);
        assert!((dispersion(PI) - 1.0).abs() < 1e-15);
        assert!(dispersion(PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn group_velocities() {
        assert!((group_velocity(2).unwrap() - 1.0).abs() < 1e-15);
        assert!((group_velocity(3).unwrap() - 0.8660254037844386).abs() < 1e-12);
        assert!((group_velocity(4).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(group_velocity(1).is_err());
    }

    #[test]
    fn two_site_propagator_by_hand() {
        let t = 0.83;
        let p = propagator(ChainSpec::new(2).unwrap(), t);
        let em = C64::from_polar(1.0, -t);
        let ep = C64::from_polar(1.0, t);
        let diag = (em + ep) * 0.5;
        let off = (em - ep) * 0.5;
        assert!((p.entry(0, 0) - diag).norm() < 1e-15);
        assert!((p.entry(1, 1) - diag).norm() < 1e-15);
        assert!((p.entry(0, 1) - off).norm() < 1e-15);
        assert!((p.entry(1, 0) - off).norm() < 1e-15);
    }

    #[test]
    fn identity_at_zero() {
        let p = propagator(ChainSpec::new(17).unwrap(), 0.0).matrix();
        assert!(p.max_abs_diff(&CMatrix::identity(17)) < 1e-12);
    }
}
