//! Simulation and worst-case security analysis for the three-state no-touch
//! sending-or-not-sending twin-field QKD protocol.
//!
//! The crate is layered bottom-up:
//!
//! * [`math`] and [`density`]: entropy, photon statistics, fiber loss and
//!   single-photon two-mode density operators.
//! * [`protocol`]: window sampling, classification, phase-slice
//!   post-selection, bit mapping and the source-equivalence checks.
//! * [`channel`]: the detection model, producing [`ObservedCounts`] either as
//!   exact expectations or by seeded Monte Carlo with photon-number
//!   [`GroundTruth`].
//! * [`security`]: worst-case bounds and the key-length formula.
//! * [`optimize`]: grid-plus-simplex rate maximisation and distance sweeps.
//! * [`verify`]: invariant suites shared by the CLI and the test-suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod density;
pub mod error;
pub mod math;
pub mod optimize;
pub mod protocol;
pub mod quadrature;
pub mod security;
pub mod verify;

pub use channel::{
    click_probabilities, expected_ground_truth, expected_observables, monte_carlo_observables,
    ChannelModel, GroundTruth, MonteCarlo, ObservedCounts, PhotonStatistics, SinglePhotonTallies,
};
pub use density::{density_distance, DensityOperator2Mode};
pub use error::{Error, Result};
pub use math::{binary_entropy, channel_transmittance, poisson_pmf, LossLaw, Probability};
pub use optimize::{
    evaluate, optimize, sweep, Axis, AxisScale, OptimizeResult, SearchSpace, SweepRow,
};
pub use protocol::{
    bit_value, check_source_equivalence, classify_window, phase_slice_accept, sample_window,
    slice_acceptance_probability, Basis, Party, ProtocolParams, WindowClass, WindowOutcome,
};
pub use security::{
    analyze, analyze_with_fault, key_length, single_photon_e1ph, BoundFault, Collapse,
    SecurityBounds,
};
