//! Time evolution, post-selection and fidelity extraction.

mod evolve;
mod postselect;
mod propagator;
mod two_level;

pub use evolve::{
    apply_segment, evolve_master, evolve_no_jump, static_segment, Diagnostics, EvolutionResult,
    EvolveOptions, Frame, TRACE_ABORT,
};
pub use postselect::{
    find_t_1e, find_t_1e_level, non_dicke_weight, postselect_block, postselect_source_down,
    spin_flip, trace_out_probe, CarveOutcome,
};
pub use propagator::{default_frame, Propagator, STEP_FACTOR};
pub use two_level::{TwoLevelModel, TwoLevelRun};
