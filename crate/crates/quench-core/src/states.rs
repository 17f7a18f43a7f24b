//! Initial correlation matrices `C_{jj'} = <c_j^dagger c_j'>` for the state
//! families on the ring. Site labels in the public API are 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::linalg::{self, CMatrix, SparseRows, C64};
use crate::model::ChainSpec;
use crate::tolerances::Tolerances;

pub const DEFAULT_GAMMA: f64 = 1.0 - 1e-3;

/// One valence bond between 1-based sites with sign `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub left: usize,
    pub right: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondPattern {
    n: usize,
    bonds: Vec<Bond>,
    // partner[i-1] = sigma(i); bond_of[i-1] = index into bonds
    partner: Vec<usize>,
    bond_of: Vec<usize>,
}

impl BondPattern {
    pub fn new(spec: ChainSpec, bonds: Vec<Bond>) -> Result<Self> {
        let n = spec.n();
        let mut partner = vec![0usize; n];
        let mut bond_of = vec![usize::MAX; n];
        for (b, bond) in bonds.iter().enumerate() {
            let (l, r) = (bond.left, bond.right);
            if l == 0 || r == 0 || l > n || r > n {
                return Err(QuenchError::InvalidPattern(format!(
                    "bond ({l}, {r}) outside 1..={n}"
                )));
            }
            if l == r {
                return Err(QuenchError::InvalidPattern(format!("site {l} bonded to itself")));
            }
            if bond.sign != 1 && bond.sign != -1 {
                return Err(QuenchError::InvalidPattern(format!(
                    "bond ({l}, {r}) has sign {}",
                    bond.sign
                )));
            }
            for s in [l, r] {
                if bond_of[s - 1] != usize::MAX {
                    return Err(QuenchError::InvalidPattern(format!(
                        "site {s} belongs to two bonds"
                    )));
                }
                bond_of[s - 1] = b;
            }
            partner[l - 1] = r;
            partner[r - 1] = l;
        }
        if let Some(i) = bond_of.iter().position(|&b| b == usize::MAX) {
            return Err(QuenchError::InvalidPattern(format!(
                "site {} is not covered by any bond",
                i + 1
            )));
        }
        Ok(BondPattern {
            n,
            bonds,
            partner,
            bond_of,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Partner `sigma(i)` of 1-based site `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i - 1]
    }

    /// Sign of the bond containing 1-based site `i`.
    pub fn sign_of(&self, i: usize) -> i8 {
        self.bonds[self.bond_of[i - 1]].sign
    }

    /// Number of bonds with exactly one endpoint in the 1-based range `a..=b`.
    pub fn crossing_bonds(&self, a: usize, b: usize) -> usize {
        let inside = |s: usize| s >= a && s <= b;
        self.bonds
            .iter()
            .filter(|bd| inside(bd.left) != inside(bd.right))
            .count()
    }
}

fn require_even(spec: ChainSpec, family: &str) -> Result<()> {
    if spec.n() % 2 != 0 {
        return Err(QuenchError::Divisibility {
            n: spec.n(),
            family: family.into(),
            requirement: "N must be even".into(),
        });
    }
    Ok(())
}

pub fn dimer_pattern(spec: ChainSpec) -> Result<BondPattern> {
    require_even(spec, "dimer")?;
    let bonds = (1..=spec.n() / 2)
        .map(|p| Bond {
            left: 2 * p - 1,
            right: 2 * p,
            sign: 1,
        })
        .collect();
    BondPattern::new(spec, bonds)
}

/// Sign of bond `p` in the dimer-q pattern, `(-1)^(floor(p/q) mod 2)`.
pub fn dimer_q_sign(p: usize, q: usize) -> i8 {
    if (p / q) % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn dimer_q_pattern(spec: ChainSpec, q: usize) -> Result<BondPattern> {
    if q == 0 {
        return Err(QuenchError::InvalidParameter("dimer-q needs q >= 1".into()));
    }
    if spec.n() % (4 * q) != 0 {
        return Err(QuenchError::Divisibility {
            n: spec.n(),
            family: format!("dimer-{q}"),
            requirement: format!("N must be a multiple of {}", 4 * q),
        });
    }
    let bonds = (1..=spec.n() / 2)
        .map(|p| Bond {
            left: 2 * p - 1,
            right: 2 * p,
            sign: dimer_q_sign(p, q),
        })
        .collect();
    BondPattern::new(spec, bonds)
}

pub fn rainbow_pattern(spec: ChainSpec) -> Result<BondPattern> {
    require_even(spec, "rainbow")?;
    let n = spec.n();
    let bonds = (1..=n / 2)
        .map(|i| Bond {
            left: i,
            right: n + 1 - i,
            sign: if (n / 2 + i) % 2 == 0 { 1 } else { -1 },
        })
        .collect();
    BondPattern::new(spec, bonds)
}

pub fn frozen_rainbow_pattern(spec: ChainSpec) -> Result<BondPattern> {
    require_even(spec, "frozen rainbow")?;
    let n = spec.n();
    let bonds = (1..=n / 2)
        .map(|i| Bond {
            left: i,
            right: n + 1 - i,
            sign: 1,
        })
        .collect();
    BondPattern::new(spec, bonds)
}

/// How the density is distributed, which decides the checks that apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Filling {
    /// Every diagonal entry equals 1/2.
    UniformHalf,
    /// One fermion every `period` sites.
    Crystal { period: usize },
}

impl Filling {
    pub fn is_half_filling(&self) -> bool {
        matches!(self, Filling::UniformHalf)
    }

    pub fn fraction(&self) -> f64 {
        match self {
            Filling::UniformHalf => 0.5,
            Filling::Crystal { period } => 1.0 / *period as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub matrix: CMatrix,
    pub label: String,
    pub filling: Filling,
    pattern: Option<BondPattern>,
}

impl CorrelationMatrix {
    pub fn new(matrix: CMatrix, label: impl Into<String>, filling: Filling) -> Self {
        CorrelationMatrix {
            matrix,
            label: label.into(),
            filling,
            pattern: None,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// 1-based access.
    pub fn get(&self, j: usize, jp: usize) -> C64 {
        self.matrix[(j - 1, jp - 1)]
    }

    pub fn pattern(&self) -> Option<&BondPattern> {
        self.pattern.as_ref()
    }

    pub fn sparse(&self) -> SparseRows {
        self.matrix.sparse_rows()
    }

    pub fn with_matrix(&self, matrix: CMatrix) -> Self {
        CorrelationMatrix {
            matrix,
            label: self.label.clone(),
            filling: self.filling,
            pattern: self.pattern.clone(),
        }
    }

    pub fn check(&self, tol: &Tolerances) -> InvariantReport {
        InvariantReport::measure(self, tol)
    }
}

/// Measured deviations from the Gaussian-state invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantReport {
    pub hermiticity_error: f64,
    pub purity_error: f64,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
    /// `max |C_jj - 1/2|`; only meaningful at uniform half filling.
    pub density_error: Option<f64>,
    pub trace: f64,
    pub expected_trace: f64,
    pub hermitian: bool,
    pub pure: bool,
    pub spectrum_in_unit_interval: bool,
    pub diagonal_half: Option<bool>,
    pub trace_matches: bool,
}

impl InvariantReport {
    pub fn measure(c: &CorrelationMatrix, tol: &Tolerances) -> Self {
        let m = &c.matrix;
        let n = c.n();
        let herm = m.hermiticity_error();
        let purity = m.matmul(m).max_abs_diff(m);
        let (lo, hi) = match linalg::hermitian_eigenvalues(m, 1e-6) {
            Ok(vals) => (vals[0], vals[vals.len() - 1]),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let density = if c.filling.is_half_filling() {
            Some(
                (0..n)
                    .map(|j| (m[(j, j)] - C64::new(0.5, 0.0)).norm())
                    .fold(0.0, f64::max),
            )
        } else {
            None
        };
        let trace = m.trace().re;
        let expected = c.filling.fraction() * n as f64;
        InvariantReport {
            hermiticity_error: herm,
            purity_error: purity,
            spectrum_min: lo,
            spectrum_max: hi,
            density_error: density,
            trace,
            expected_trace: expected,
            hermitian: herm < tol.hermiticity,
            pure: purity < tol.purity,
            spectrum_in_unit_interval: lo >= -tol.spectrum && hi <= 1.0 + tol.spectrum,
            diagonal_half: density.map(|d| d < tol.density),
            trace_matches: (trace - expected).abs() < tol.delta_match,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.hermitian
            && self.pure
            && self.spectrum_in_unit_interval
            && self.diagonal_half.unwrap_or(true)
            && self.trace_matches
    }
}

pub fn wigner_state(spec: ChainSpec, p: usize) -> Result<CorrelationMatrix> {
    if p == 0 || spec.n() % p != 0 {
        return Err(QuenchError::Divisibility {
            n: spec.n(),
            family: format!("wigner-{p}"),
            requirement: format!("N must be a multiple of P = {p}"),
        });
    }
    let n = spec.n();
    let mut m = CMatrix::zeros(n, n);
    for j in (p..=n).step_by(p) {
        m[(j - 1, j - 1)] = C64::new(1.0, 0.0);
    }
    Ok(CorrelationMatrix::new(
        m,
        format!("wigner-{p}"),
        Filling::Crystal { period: p },
    ))
}

pub fn vbs_state(pattern: &BondPattern, label: impl Into<String>) -> CorrelationMatrix {
    let n = pattern.n();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(0.5, 0.0);
    }
    for b in pattern.bonds() {
        let v = C64::new(0.5 * b.sign as f64, 0.0);
        m[(b.left - 1, b.right - 1)] = v;
        m[(b.right - 1, b.left - 1)] = v;
    }
    CorrelationMatrix {
        matrix: m,
        label: label.into(),
        filling: Filling::UniformHalf,
        pattern: Some(pattern.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslandSpec {
    pub period: usize,
    pub gamma: f64,
}

impl IslandSpec {
    pub fn new(period: usize, gamma: f64) -> Result<Self> {
        if period < 2 {
            return Err(QuenchError::InvalidParameter(format!(
                "island period must be >= 2, got {period}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(QuenchError::InvalidParameter(format!(
                "island gamma must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(IslandSpec { period, gamma })
    }
}

/// Real symmetric single-particle hopping matrix of the weakened chain.
pub fn island_hamiltonian(spec: ChainSpec, island: IslandSpec) -> Vec<f64> {
    let n = spec.n();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let j = (i + 1) % n;
        let amp = if (i + 1) % island.period == 0 {
            -(1.0 - island.gamma) / 2.0
        } else {
            -0.5
        };
        h[i * n + j] += amp;
        h[j * n + i] += amp;
    }
    h
}

pub fn island_state(
    spec: ChainSpec,
    island: IslandSpec,
    tol: &Tolerances,
) -> Result<CorrelationMatrix> {
    let n = spec.n();
    let p = island.period;
    if n % p != 0 || n % 2 != 0 {
        return Err(QuenchError::Divisibility {
            n,
            family: format!("island-{p}"),
            requirement: format!("N must be even and a multiple of {p}"),
        });
    }
    let h = island_hamiltonian(spec, island);
    let eig = linalg::symmetric_eigen(&h, n, tol.eigensolver)?;
    let half = n / 2;
    let gap = eig.eigenvalues[half] - eig.eigenvalues[half - 1];
    if gap < tol.degeneracy {
        return Err(QuenchError::DegenerateFermiLevel { gap });
    }
    let mut m = CMatrix::zeros(n, n);
    for mode in 0..half {
        let v = eig.vector(mode);
        for j in 0..n {
            if v[j] == 0.0 {
                continue;
            }
            let row = m.row_mut(j);
            for (jp, r) in row.iter_mut().enumerate() {
                r.re += v[j] * v[jp];
            }
        }
    }
    Ok(CorrelationMatrix::new(
        m,
        format!("island-{p}"),
        Filling::UniformHalf,
    ))
}

/// Gap at the Fermi level of the weakened chain.
pub fn island_fermi_gap(spec: ChainSpec, island: IslandSpec, tol: &Tolerances) -> Result<f64> {
    let n = spec.n();
    let h = island_hamiltonian(spec, island);
    let vals = linalg::symmetric_eigenvalues(&h, n, tol.eigensolver)?;
    Ok(vals[n / 2] - vals[n / 2 - 1])
}

/// The state families in scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum StateFamily {
    Dimer,
    DimerQ { q: usize },
    Rainbow,
    FrozenRainbow,
    Wigner { p: usize },
    Island { p: usize, gamma: f64 },
}

impl StateFamily {
    /// Parses a family name plus optional numeric parameters.
    pub fn parse(name: &str, p: Option<usize>, q: Option<usize>, gamma: Option<f64>) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| QuenchError::InvalidParameter(format!("{name} needs --{what}")))
        };
        let fam = match lower.as_str() {
            "dimer" => StateFamily::Dimer,
            "rainbow" => StateFamily::Rainbow,
            "frozen-rainbow" | "frozen_rainbow" => StateFamily::FrozenRainbow,
            "dimer-q" | "dimerq" => StateFamily::DimerQ { q: need(q, "q")? },
            "wigner" => StateFamily::Wigner { p: need(p, "p")? },
            "island" => StateFamily::Island {
                p: need(p, "p")?,
                gamma: gamma.unwrap_or(DEFAULT_GAMMA),
            },
            other => {
                if let Some(rest) = other.strip_prefix("dimer-") {
                    let q = rest.parse().map_err(|_| {
                        QuenchError::InvalidParameter(format!("unknown family {name}"))
                    })?;
                    StateFamily::DimerQ { q }
                } else if let Some(rest) = other.strip_prefix("wigner-") {
                    let p = rest.parse().map_err(|_| {
                        QuenchError::InvalidParameter(format!("unknown family {name}"))
                    })?;
                    StateFamily::Wigner { p }
                } else if let Some(rest) = other.strip_prefix("island-") {
                    let p = rest.parse().map_err(|_| {
                        QuenchError::InvalidParameter(format!("unknown family {name}"))
                    })?;
                    StateFamily::Island {
                        p,
                        gamma: gamma.unwrap_or(DEFAULT_GAMMA),
                    }
                } else {
                    return Err(QuenchError::InvalidParameter(format!(
                        "unknown family {name}"
                    )));
                }
            }
        };
        Ok(fam)
    }

    pub fn name(&self) -> String {
        match self {
            StateFamily::Dimer => "dimer".into(),
            StateFamily::DimerQ { q } => format!("dimer-{q}"),
            StateFamily::Rainbow => "rainbow".into(),
            StateFamily::FrozenRainbow => "frozen-rainbow".into(),
            StateFamily::Wigner { p } => format!("wigner-{p}"),
            StateFamily::Island { p, .. } => format!("island-{p}"),
        }
    }

    pub fn pattern(&self, spec: ChainSpec) -> Result<Option<BondPattern>> {
        Ok(match self {
            StateFamily::Dimer => Some(dimer_pattern(spec)?),
            StateFamily::DimerQ { q } => Some(dimer_q_pattern(spec, *q)?),
            StateFamily::Rainbow => Some(rainbow_pattern(spec)?),
            StateFamily::FrozenRainbow => Some(frozen_rainbow_pattern(spec)?),
            _ => None,
        })
    }

    pub fn build(&self, spec: ChainSpec, tol: &Tolerances) -> Result<CorrelationMatrix> {
        match self {
            StateFamily::Wigner { p } => wigner_state(spec, *p),
            StateFamily::Island { p, gamma } => {
                island_state(spec, IslandSpec::new(*p, *gamma)?, tol)
            }
            _ => {
                let pattern = self.pattern(spec)?.expect("valence-bond family");
                Ok(vbs_state(&pattern, self.name()))
            }
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
