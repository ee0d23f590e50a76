//! Musielak-Orlicz toolkit and Fourier-Galerkin solver for heat-conducting
//! incompressible non-Newtonian flow with variable density on the torus.

pub mod constitutive;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod io;
pub mod nfunction;
pub mod orlicz;
pub mod solver;
pub mod tensor;

pub use constitutive::{
    check_admissibility, validate_hypotheses, AdmissibilitySpec, Conductivity, HeatFluxModel, HypothesisVerdict,
    StressKind, StressModel, Viscosity,
};
pub use diagnostics::{DiagnosticsRecord, Trajectory};
pub use discretization::{GalerkinBasis, TorusGrid};
pub use error::{Error, Result};
pub use nfunction::NFunction;
pub use orlicz::SampledField;
pub use solver::{Forcing, InitialData, Scheme, SimConfig, SimState, Solver};
pub use tensor::SymMat;
