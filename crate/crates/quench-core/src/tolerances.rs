use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub unitarity: f64,
    pub delta_match: f64,
    pub eigensolver: f64,
    pub purity: f64,
    pub spectrum: f64,
    pub density: f64,
    pub eigenvalue_clamp: f64,
    pub degeneracy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-10,
            unitarity: 1e-10,
            delta_match: 1e-9,
            eigensolver: 1e-12,
            purity: 1e-8,
            spectrum: 1e-9,
            density: 1e-10,
            eigenvalue_clamp: 1e-8,
            degeneracy: 1e-10,
        }
    }
}
