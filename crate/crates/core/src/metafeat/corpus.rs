//! Meta-corpus CSV: header `gap_0,...,gap_{L-1},label`, one labeled
//! meta-sample per row.

use std::io::{Read, Write};

use super::{MetaSample, SampleSource};
use crate::error::{Error, Result};

pub fn write_meta_corpus<W: Write>(out: W, samples: &[MetaSample]) -> Result<()> {
    let l = samples.first().map_or(0, |s| s.gaps.len());
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..l).map(|i| format!("gap_{i}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, s) in samples.iter().enumerate() {
        if s.gaps.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: s.gaps.len(),
            });
        }
        let label = s
            .label
            .ok_or_else(|| Error::Malformed(format!("meta-sample {row} has no label")))?;
        let mut record: Vec<String> = s.gaps.iter().map(|g| g.to_string()).collect();
        record.push(label.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a corpus back. `window_size` is not stored in the file and is
/// attached to every sample; sources record the file row.
pub fn read_meta_corpus<R: Read>(input: R, window_size: usize, stream: &str) -> Result<Vec<MetaSample>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let l = headers.len().saturating_sub(1);
    if l == 0 || headers.get(l) != Some("label") {
        return Err(Error::Malformed("meta-corpus needs gap columns and a final `label`".into()));
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let gaps = (0..l)
            .map(|i| {
                let g: f64 = record[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("row {row}: bad gap `{}`", &record[i])))?;
                if (-1.0..=1.0).contains(&g) {
                    Ok(g)
                } else {
                    Err(Error::Malformed(format!("row {row}: gap {g} outside [-1, 1]")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let label = record[l].trim().parse()?;
        samples.push(MetaSample {
            gaps,
            label: Some(label),
            window_size,
            source: SampleSource {
                stream: stream.to_string(),
                offset: row,
            },
        });
    }
    Ok(samples)
}
