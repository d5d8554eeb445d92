//! Exact and Monte Carlo analysis of a pair-replay attack on a
//! device-independent QKD protocol with random postselection.
//!
//! The protocol under study runs CHSH-style test rounds plus key rounds in
//! which each party randomly keeps an outcome 1 with probability p (outcome
//! 0 is always kept) and announces the keep/discard flags publicly. The
//! malicious device studied here answers key rounds in pairs: honestly on
//! even counts, and by replaying the previous honest outcome on odd counts.
//! The public flags then leak enough to push the eavesdropper's conditional
//! entropy below the collective-attack bound in part of the parameter range.
//!
//! Layers, bottom up:
//!
//! * [`quantum`]: exact Born-rule statistics of the honest devices on the
//!   shared Bell pair, including the CHSH value.
//! * [`devices`]: round-level state machines for Alice's honest measurements,
//!   Bob's counter-and-replay device, and postselection.
//! * [`analysis`]: the closed-form two-round joint distribution, its
//!   conditional Shannon entropy H(A₁A₂|S₁S₂T₁T₂), per-round rates, sweeps,
//!   and crossover detection against an imported collective-attack curve.
//! * [`montecarlo`]: seeded end-to-end simulation with empirical-vs-exact
//!   comparison reports.
//! * [`curve`]: the `p,ent` CSV format shared by sweeps and comparisons.
//!
//! All numerics are generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below fix the precision the CLI and the test suite use.

pub mod analysis;
pub mod curve;
pub mod devices;
pub mod montecarlo;
pub mod quantum;
pub mod scalar;

pub use scalar::Scalar;

/// Scalar precision used by the CLI and the acceptance suite.
pub type Real = f64;

pub type TwoQubitStateF64 = quantum::TwoQubitState<Real>;
pub type BinaryObservableF64 = quantum::BinaryObservable<Real>;
pub type OutcomeDistributionF64 = quantum::OutcomeDistribution<Real>;
pub type CorrelationTableF64 = quantum::CorrelationTable<Real>;
pub type KeepProbabilityF64 = devices::KeepProbability<Real>;
pub type KeyRoundParamsF64 = analysis::KeyRoundParams<Real>;
pub type RoundDistributionF64 = analysis::RoundDistribution<Real>;
pub type PairDistributionF64 = analysis::PairDistribution<Real>;
pub type SweepPointF64 = analysis::SweepPoint<Real>;
pub type IidCurveF64 = analysis::IidCurve<Real>;
pub type SimulationConfigF64 = montecarlo::SimulationConfig<Real>;
pub type RunReportF64 = montecarlo::RunReport<Real>;
