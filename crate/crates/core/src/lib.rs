//! Simulation of one-axis twisting compiled into two-axis twisting by
//! Trotter-Suzuki sequences of quarter-turn pulses.

pub mod error;
pub mod experiment;
pub mod propagation;
pub mod schedule;
pub mod spin;
pub mod squeezing;
pub mod tolerance;

pub use error::{Error, Result};
pub use experiment::{
    compare, fit_power_law, ideal_optimum, nc_convergence, relative_error_curve, run_many, run_trace, scaling_fit,
    time_cost, Comparison, Convergence, ConvergenceRow, ErrorCurve, ExperimentSpec, PowerLawFit, Reference, Scheme,
    TimeCost,
};
pub use propagation::{
    evolve_oat, unitary_distance, Axis, EigenFactorization, NormKind, Propagator, SpinSystem, Turn, UnitaryDistance,
};
pub use schedule::{
    compile_general, compile_order1, compile_scheme_a, compile_scheme_b, suzuki_k, suzuki_s, Schedule, ScheduleStats,
    Segment, SequenceKind, TsCoefficients,
};
pub use spin::{build_operators, coherent_state_z, expectation, DickeState, SpinMoments, SpinOperators, C64};
pub use squeezing::{find_optimum, squeezing_parameter, Optimum, Sampling, SqueezingSample, SqueezingTrace};
pub use tolerance::Tolerances;
