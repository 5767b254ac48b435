//! Preprocessing: filtering, re-referencing and epoching of continuous
//! recordings.

pub mod filter;
pub mod pipeline;
pub mod recording;

pub use pipeline::{
    bandpass, common_average_reference, epoch_segment, highgamma_select, notch, run_pipeline, ArtifactStage, Epoch,
    PassThrough, PrepConfig, PrepReport, Segmented,
};
pub use recording::{Event, Recording};
