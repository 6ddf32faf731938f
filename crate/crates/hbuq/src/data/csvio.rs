//! Record CSV format.
//!
//! Two metadata lines, a header row, then one row per sample:
//!
//! ```text
//! # dt=0.005
//! # channels=u:1,y:1,quantity=disp
//! t,u1,y1
//! 0,0.0316,0.0021
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load round trip reproduces every value bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{DataError, TimeHistoryRecord};
use crate::model::{OutputQuantity, SensorMap};

fn quantity_token(q: OutputQuantity) -> &'static str {
    match q {
        OutputQuantity::Displacement => "disp",
        OutputQuantity::Velocity => "vel",
        OutputQuantity::Acceleration => "acc",
    }
}

fn parse_quantity(token: &str) -> Option<OutputQuantity> {
    match token {
        "disp" => Some(OutputQuantity::Displacement),
        "vel" => Some(OutputQuantity::Velocity),
        "acc" => Some(OutputQuantity::Acceleration),
        _ => None,
    }
}

/// Writes a record to `path` in the record CSV schema.
pub fn save_record(record: &TimeHistoryRecord, path: &Path) -> Result<(), DataError> {
    record.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# dt={}", record.dt)?;
    writeln!(
        w,
        "# channels=u:{},y:{},quantity={}",
        record.n_input_channels(),
        record.n_output_channels(),
        quantity_token(record.sensor_map.quantity)
    )?;
    write!(w, "t")?;
    for i in 0..record.n_input_channels() {
        write!(w, ",u{}", i + 1)?;
    }
    for i in 0..record.n_output_channels() {
        write!(w, ",y{}", i + 1)?;
    }
    writeln!(w)?;
    for k in 0..record.n_samples() {
        write!(w, "{}", k as f64 * record.dt)?;
        for i in 0..record.n_input_channels() {
            write!(w, ",{}", record.input[(i, k)])?;
        }
        for i in 0..record.n_output_channels() {
            write!(w, ",{}", record.output[(i, k)])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a record saved by [`save_record`].
///
/// The observed-DOF selection is not part of the file schema; loaded records
/// default to observing DOFs `0..N_o` of the recorded quantity, which callers
/// may override before pairing the record with a model.
pub fn load_record(path: &Path) -> Result<TimeHistoryRecord, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut dt: Option<f64> = None;
    let mut channels: Option<(usize, usize, OutputQuantity)> = None;
    let mut header_seen = false;
    let mut rows: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(value) = meta.strip_prefix("dt=") {
                dt = Some(value.trim().parse().map_err(|_| DataError::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("invalid dt value {value:?}"),
                })?);
            } else if let Some(value) = meta.strip_prefix("channels=") {
                channels = Some(parse_channels(value, line_no)?);
            }
            continue;
        }
        if !header_seen {
            // Header row; both metadata lines must precede it.
            let mut missing = Vec::new();
            if dt.is_none() {
                missing.push("# dt=".to_string());
            }
            if channels.is_none() {
                missing.push("# channels=".to_string());
            }
            if !missing.is_empty() {
                return Err(DataError::Schema { missing });
            }
            let (n_in, n_out, _) = channels.unwrap();
            let expected: Vec<String> = std::iter::once("t".to_string())
                .chain((1..=n_in).map(|i| format!("u{i}")))
                .chain((1..=n_out).map(|i| format!("y{i}")))
                .collect();
            let got: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let missing: Vec<String> = expected
                .iter()
                .filter(|c| !got.contains(&c.as_str()))
                .cloned()
                .collect();
            if !missing.is_empty() || got.len() != expected.len() {
                return Err(DataError::Schema {
                    missing: if missing.is_empty() {
                        vec![format!("expected columns {expected:?}, found {got:?}")]
                    } else {
                        missing
                    },
                });
            }
            header_seen = true;
            continue;
        }
        let (n_in, n_out, _) = channels.unwrap();
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 1 + n_in + n_out {
            return Err(DataError::Parse {
                line: line_no,
                column: fields.len().min(1 + n_in + n_out) + 1,
                message: format!(
                    "expected {} fields, found {}",
                    1 + n_in + n_out,
                    fields.len()
                ),
            });
        }
        let parse = |col: usize| -> Result<f64, DataError> {
            fields[col].trim().parse().map_err(|_| DataError::Parse {
                line: line_no,
                column: col + 1,
                message: format!("invalid number {:?}", fields[col]),
            })
        };
        let _t = parse(0)?;
        let mut u = Vec::with_capacity(n_in);
        for c in 0..n_in {
            u.push(parse(1 + c)?);
        }
        let mut y = Vec::with_capacity(n_out);
        for c in 0..n_out {
            y.push(parse(1 + n_in + c)?);
        }
        rows.push((u, y));
    }

    if !header_seen {
        let mut missing = Vec::new();
        if dt.is_none() {
            missing.push("# dt=".to_string());
        }
        if channels.is_none() {
            missing.push("# channels=".to_string());
        }
        missing.push("header row".to_string());
        return Err(DataError::Schema { missing });
    }
    let (n_in, n_out, quantity) = channels.unwrap();
    let n = rows.len();
    let input = DMatrix::from_fn(n_in, n, |i, k| rows[k].0[i]);
    let output = DMatrix::from_fn(n_out, n, |i, k| rows[k].1[i]);
    Ok(TimeHistoryRecord {
        dt: dt.unwrap(),
        input,
        output,
        sensor_map: SensorMap {
            observed_dofs: (0..n_out).collect(),
            quantity,
        },
    })
}

fn parse_channels(
    value: &str,
    line: usize,
) -> Result<(usize, usize, OutputQuantity), DataError> {
    let mut n_in = None;
    let mut n_out = None;
    let mut quantity = None;
    for (col, part) in value.split(',').enumerate() {
        let part = part.trim();
        let err = |message: String| DataError::Parse {
            line,
            column: col + 1,
            message,
        };
        if let Some(v) = part.strip_prefix("u:") {
            n_in = Some(v.parse().map_err(|_| err(format!("invalid input count {v:?}")))?);
        } else if let Some(v) = part.strip_prefix("y:") {
            n_out = Some(v.parse().map_err(|_| err(format!("invalid output count {v:?}")))?);
        } else if let Some(v) = part.strip_prefix("quantity=") {
            quantity =
                Some(parse_quantity(v).ok_or_else(|| err(format!("unknown quantity {v:?}")))?);
        } else {
            return Err(err(format!("unknown channels token {part:?}")));
        }
    }
    match (n_in, n_out, quantity) {
        (Some(i), Some(o), Some(q)) => Ok((i, o, q)),
        _ => Err(DataError::Schema {
            missing: ["u:", "y:", "quantity="]
                .iter()
                .zip([n_in.is_none(), n_out.is_none(), quantity.is_none()])
                .filter(|(_, m)| *m)
                .map(|(s, _)| s.to_string())
                .collect(),
        }),
    }
}
