//! Seeded pseudo-experiments for the three studies and an ensemble runner
//! reporting bias, pulls and coverage.

mod ensemble;
mod generate;
mod spec;

pub use ensemble::{
    aggregate, analysis_model, run_ensemble, EnsembleConfig, EnsembleReport, MeanError, MethodAggregate,
    MethodRecord, ToyFailure, ToyRecord, MAX_FAILURE_FRACTION,
};
pub use generate::{
    generate, generate_multicomponent, generate_nonfactorising, generate_simple, multicomponent_shapes,
    toy_rng, toy_seed, MultiShapes, ToyRng, ENVELOPE_FACTOR,
};
pub use spec::{default_efficiency, Coupling, Study, ToyData, ToyShapes, ToySpec};
