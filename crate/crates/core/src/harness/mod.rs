//! Reproducible Monte-Carlo BER experiments.

mod compare;
mod detector;
mod results;
pub mod stats;
mod sweep;

pub use compare::{compare_ml, ml_variant_specs, CompareConfig, CompareRow, CompareTable};
pub use detector::{Detector, DetectorFactory, DetectorSpec, NetSource, SpecFactory, Trial};
pub use results::{read_json, write_csv, write_json, write_results, ResultFormat, ResultsDocument, CSV_COLUMNS};
pub use sweep::{
    ber_sweep, check_detectors, draw_trial, run_sweep, BerResult, SweepConfig, SweepSettings, DEFAULT_MIN_ERRORS,
};
