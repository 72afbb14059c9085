//! Stream CSV format: header `f0,...,fD,label`, one sample per row, and an
//! optional leading `# meta: {...}` line with the ground-truth drift schedule.

use std::io::{Read, Write};

use serde_json::Value;

use super::Sample;
use crate::error::{Error, Result};

const META_PREFIX: &str = "# meta:";

/// A stream read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub samples: Vec<Sample>,
    pub meta: Option<Value>,
}

pub fn write_stream_csv<W: Write>(mut out: W, samples: &[Sample], meta: Option<&Value>) -> Result<()> {
    if let Some(meta) = meta {
        writeln!(out, "{META_PREFIX} {}", serde_json::to_string(meta)?)?;
    }
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(dim + 1);
    for (row, s) in samples.iter().enumerate() {
        if s.features.len() != dim {
            return Err(Error::Malformed(format!(
                "row {row} has {} features, expected {dim}",
                s.features.len()
            )));
        }
        record.clear();
        record.extend(s.features.iter().map(|v| v.to_string()));
        record.push(s.label.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_stream_csv<R: Read>(mut input: R) -> Result<StreamFile> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let meta = match text.lines().next().and_then(|l| l.strip_prefix(META_PREFIX)) {
        Some(json) => Some(serde_json::from_str(json.trim())?),
        None => None,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(headers.len() - 1) != Some("label") {
        return Err(Error::Malformed("last column must be `label`".into()));
    }
    let dim = headers.len() - 1;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::Malformed(format!("row {row} has {} fields", record.len())));
        }
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("row {row}: bad number `{}`", &record[i])))
        };
        let features = (0..dim).map(parse).collect::<Result<Vec<_>>>()?;
        let label = record[dim]
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("row {row}: bad label `{}`", &record[dim])))?;
        samples.push(Sample { features, label });
    }
    Ok(StreamFile { samples, meta })
}
