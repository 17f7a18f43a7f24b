//! Quench dynamics of patterned free-fermion states on a periodic chain:
//! correlation light cones, momentum-space form factors, block entanglement
//! growth and the Bessel/Airy structure of the correlators.

pub mod asymptotics;
pub mod entanglement;
pub mod error;
pub mod evolution;
pub mod formfactor;
pub mod linalg;
pub mod model;
pub mod states;
pub mod tolerances;

pub use error::{QuenchError, Result};
pub use evolution::{correlation_trace, evolve, EvolvedTrace, Evolver};
pub use formfactor::{form_factor, FormFactor, LightConeSpecies};
pub use linalg::{CMatrix, C64};
pub use model::{ChainSpec, Propagator};
pub use states::{CorrelationMatrix, StateFamily};
pub use tolerances::Tolerances;
