//! Prequential error traces and their line-oriented file format.
//!
//! A trace file holds one `0` or `1` per line. An optional first line of the
//! form `# meta: {...}` carries a JSON document (usually the ground-truth
//! drift schedule) that readers hand back untouched.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sequence of per-timestamp prediction errors `e_t ∈ {0, 1}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorTrace {
    errors: Vec<u8>,
}

impl ErrorTrace {
    pub fn new(errors: Vec<u8>) -> Result<Self> {
        if let Some(pos) = errors.iter().position(|&e| e > 1) {
            return Err(Error::OutOfDomain(format!(
                "trace value {} at index {pos} is not 0 or 1",
                errors[pos]
            )));
        }
        Ok(Self { errors })
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self {
            errors: iter.into_iter().map(u8::from).collect(),
        }
    }

    pub fn push(&mut self, error: bool) {
        self.errors.push(u8::from(error));
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.errors
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.errors.iter().copied()
    }

    /// Fraction of erroneous predictions; 0 for an empty trace.
    pub fn error_rate(&self) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        let total: u64 = self.errors.iter().map(|&e| u64::from(e)).sum();
        total as f64 / self.errors.len() as f64
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.errors
    }
}

impl From<ErrorTrace> for Vec<u8> {
    fn from(trace: ErrorTrace) -> Self {
        trace.errors
    }
}

const META_PREFIX: &str = "# meta:";

/// Writes a trace in line format, with an optional `# meta:` JSON header.
pub fn write_trace<W: Write>(
    mut out: W,
    trace: &ErrorTrace,
    meta: Option<&serde_json::Value>,
) -> Result<()> {
    let mut buf = String::with_capacity(trace.len() * 2 + 64);
    if let Some(meta) = meta {
        writeln!(buf, "{META_PREFIX} {}", serde_json::to_string(meta)?).unwrap();
    }
    for e in trace.iter() {
        buf.push(if e == 1 { '1' } else { '0' });
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Reads a trace in line format. Blank lines and `#` comments other than the
/// leading meta header are ignored.
pub fn read_trace<R: BufRead>(input: R) -> Result<(ErrorTrace, Option<serde_json::Value>)> {
    let mut errors = Vec::new();
    let mut meta = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if let Some(json) = line.strip_prefix(META_PREFIX) {
            if lineno == 0 {
                meta = Some(serde_json::from_str(json.trim())?);
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "0" => errors.push(0),
            "1" => errors.push(1),
            other => {
                return Err(Error::Malformed(format!(
                    "line {}: expected 0 or 1, got `{other}`",
                    lineno + 1
                )))
            }
        }
    }
    Ok((ErrorTrace { errors }, meta))
}
