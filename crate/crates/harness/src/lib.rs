//! Seeded Monte-Carlo experiments: SNR sweeps, ε sweeps, CRB curves,
//! outage statistics and figure-data files.
//!
//! Every result is a pure function of its spec. Trial seeds are derived
//! from the base seed and the trial's labels, never from the clock or from
//! scheduling order.

// `!(a > b)` checks deliberately treat NaN as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod preset;
pub mod report;
pub mod run;
pub mod spec;
pub mod sweep;

pub use error::{HarnessError, Result};
pub use preset::{preset_names, Preset, Study};
pub use report::{emit_figure_data, outage_table, OutageTable, StudyResult, FIGURE_IDS};
pub use run::{run_experiment, CellSummary, ExperimentResult, Outcome, TrialRecord};
pub use spec::{Algorithm, EnsembleSpec, ExperimentSpec, InitKind, SignalSpec};
pub use sweep::{crb_sweep, epsilon_sweep, harmonic_crb, EpsilonCurve, EpsilonSpec};
