//! Seeded initial data, the paired-run experiments and rate fitting.

mod experiments;
mod fit;
mod sampling;
mod table;
pub mod verify;

pub use experiments::{
    contraction_curves, contraction_d0, contraction_experiment, log_spaced_times, meanfield_sweep,
    stability_d0, stability_experiment, stability_first_order, stability_second_order,
    ContractionCurve, ContractionCurves, MeanfieldDistance, MeanfieldSweep, Mode, StabilityCurve,
    StabilityCurves,
};
pub use fit::{fit_exponential_rate, ExponentialFit};
pub use sampling::{
    sample_columns, sample_initial, sample_order_preserving, InitSpec, Sampler, RNG_FAMILY,
};
pub use table::ResultTable;
