//! Vibration-record ingestion, generation, segmentation, and persistence.

mod csvio;
mod generator;
mod segments;

pub use csvio::{load_record, save_record};
pub use generator::{
    generate_gwn, synthesize_sdof_dataset, FrequencyLaw, GeneratorConfig, SdofGroundTruth,
};
pub use segments::split_segments;

use nalgebra::DMatrix;

use crate::model::{ModelError, SensorMap};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: need {needed} samples, record has {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: missing {missing:?}")]
    Schema { missing: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sampled input/output channels of one experiment (or one segment of one).
///
/// `input` is `N_I x n`, `output` is `N_o x n`; `sensor_map` states which
/// model DOFs and which kinematic quantity the output rows observe.
#[derive(Debug, Clone)]
pub struct TimeHistoryRecord {
    pub dt: f64,
    pub input: DMatrix<f64>,
    pub output: DMatrix<f64>,
    pub sensor_map: SensorMap,
}

impl TimeHistoryRecord {
    pub fn n_samples(&self) -> usize {
        self.output.ncols()
    }

    pub fn n_input_channels(&self) -> usize {
        self.input.nrows()
    }

    pub fn n_output_channels(&self) -> usize {
        self.output.nrows()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.input.ncols() != self.output.ncols() {
            return Err(DataError::InvalidConfig(format!(
                "input has {} samples, output has {}",
                self.input.ncols(),
                self.output.ncols()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(DataError::InvalidConfig(
                "sampling interval must be positive".into(),
            ));
        }
        if self.sensor_map.n_observed() != self.n_output_channels() {
            return Err(DataError::InvalidConfig(format!(
                "{} output channels but sensor map selects {}",
                self.n_output_channels(),
                self.sensor_map.n_observed()
            )));
        }
        Ok(())
    }
}

/// Where a segment family came from.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SegmentProvenance {
    pub source: String,
    /// Start offset of each segment in samples of the source record.
    pub offsets: Vec<usize>,
    pub segment_length: usize,
}

/// An ordered family of statistically independent segments.
#[derive(Debug, Clone)]
pub struct SegmentSet {
    pub segments: Vec<TimeHistoryRecord>,
    pub provenance: SegmentProvenance,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}
