//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use carve_core::analytics::{plan_dicke_carve, PlanOptions};
use carve_core::dynamics::{default_frame, Propagator};
use carve_core::{build_basis, css_state, DriveTone, JointBasis, JointState, PhysicalParams};

/// A planned single-level carve starting from the coherent spin state.
pub struct CarveFixture {
    pub params: PhysicalParams,
    pub tones: Vec<DriveTone>,
    pub initial: JointState,
    pub basis: Arc<JointBasis>,
    pub dt: f64,
}

impl CarveFixture {
    pub fn new(n_qubits: usize) -> Self {
        let params = PhysicalParams::balanced(
            carve_core::model::mhz(8.5),
            carve_core::model::mhz(0.2),
            carve_core::model::mhz(6.0),
            n_qubits / 2,
        )
        .expect("valid parameters");
        let plan = plan_dicke_carve(n_qubits, n_qubits / 2, &params, &PlanOptions::default()).expect("plan");
        let tones = plan.drive_tones();
        let basis = Arc::new(build_basis(n_qubits).expect("basis"));
        let initial = css_state(n_qubits, &basis).expect("css");
        let dt = Propagator::new(&params, &tones, &basis, default_frame(&tones)).max_dt();
        Self { params, tones, initial, basis, dt }
    }

    /// A window of `steps` integration steps.
    pub fn window(&self, steps: usize) -> f64 {
        self.dt * steps as f64
    }
}
