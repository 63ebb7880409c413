//! Allocation of a global bit budget across heterogeneously quantized linear
//! sensors, minimizing the trace of the LMMSE error covariance.
//!
//! The relaxed problem is solved by Frank–Wolfe ([`fw`]) or a log-barrier
//! interior-point method ([`barrier`]); [`rounding`] recovers integral
//! allocations with a bounded objective gap.

pub mod barrier;
pub mod bench;
pub mod error;
pub mod fw;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod model;
pub mod quantizer;
pub mod rounding;
pub mod trace;

pub use barrier::{barrier_objective, solve_barrier, BarrierConfig, KktCertificate};
pub use bench::{run, Experiment, ExperimentOutput, ExperimentPlan, FwStart, PlanFile, SolverChoice};
pub use error::{Error, Result};
pub use fw::{fw_gap, lmo, solve_fw, FwConfig, StepRule};
pub use instances::{generate, uniform_allocation, InstanceKind, InstanceSpec, KappaRange};
pub use model::{BitVector, Evaluation, ProblemInstance};
pub use quantizer::{quantize, simulate_lmmse, DitherMode, MonteCarloReport, QuantizerBank};
pub use rounding::{round_and_report, round_largest_remainder, verify_nearest_point, RoundingReport};
pub use trace::{GapCertificate, IterationRecord, SolveTrace, SolverKind, Termination};
