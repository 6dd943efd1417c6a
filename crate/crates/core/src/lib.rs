//! Detection and classification of 1030 MHz SSR uplink interrogations
//! (Mode A, Mode C, their all-call variants, and the Mode S preamble) from
//! 8-bit IQ recordings at 2.5 MSPS.
//!
//! The crate also carries a deterministic generator of synthetic
//! interrogations, used to produce reference recordings and to drive the
//! confusion-matrix harness.

pub mod detector;
pub mod error;
pub mod iq;
pub mod report;
pub mod sigen;
pub mod stats;
pub mod templates;

pub use detector::{
    recommend_thresholds, scan, scan_chunks, Classifier, DetectionEvent, DetectorConfig,
    Recommendation, Scanner,
};
pub use error::{Error, Result};
pub use iq::{iq_to_magnitude, read_iq_stream, IqSampleFormat, MagnitudeStream};
pub use sigen::{generate_iq, generate_magnitude, write_reference_set, GenSpec};

pub use templates::{rasterize, skip_count_for, template_for, InterrogationType, PulseTemplate};
pub use stats::{run_confusion_experiment, ConfusionMatrix, ConfusionPlan, TypeCounters};
