//! Splitting a long record into contiguous, non-overlapping segments.

use super::{DataError, SegmentProvenance, SegmentSet, TimeHistoryRecord};

/// Cuts `count` segments of `segment_length` samples from the start of the
/// record. Trailing samples beyond `count * segment_length` are dropped so
/// every segment has the same length. Each segment carries the matching
/// input slice and inherits the sensor map.
pub fn split_segments(
    record: &TimeHistoryRecord,
    segment_length: usize,
    count: usize,
) -> Result<SegmentSet, DataError> {
    record.validate()?;
    if segment_length == 0 || count == 0 {
        return Err(DataError::InvalidConfig(
            "segment length and count must be positive".into(),
        ));
    }
    let needed = segment_length * count;
    if needed > record.n_samples() {
        return Err(DataError::InsufficientData {
            needed,
            available: record.n_samples(),
        });
    }
    let mut segments = Vec::with_capacity(count);
    let mut offsets = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * segment_length;
        offsets.push(start);
        segments.push(TimeHistoryRecord {
            dt: record.dt,
            input: record.input.columns(start, segment_length).into_owned(),
            output: record.output.columns(start, segment_length).into_owned(),
            sensor_map: record.sensor_map.clone(),
        });
    }
    Ok(SegmentSet {
        segments,
        provenance: SegmentProvenance {
            source: String::new(),
            offsets,
            segment_length,
        },
    })
}
