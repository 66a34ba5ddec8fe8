//! Counter-factual carving of Dicke-state superpositions in cavity QED.
//!
//! The crate simulates a source atom, a lossy cavity mode and an ensemble of
//! N two-level qubits restricted to one excitation. Post-selecting on the
//! source atom never having emitted carves the ensemble toward chosen Dicke
//! levels with phases and amplitudes under control.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod model;
pub mod operator;
pub mod phase_control;
pub mod state_space;

pub use error::{CarveError, Result};
pub use model::{DriveTone, PhysicalParams, RateLaw, RateTable};
pub use operator::SparseOperator;
pub use state_space::{build_basis, css_state, EnsembleState, JointBasis, JointState, Label};
