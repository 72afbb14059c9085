//! Loading real-world streams from CSV or ARFF.
//!
//! The last column is the label. Non-numeric columns (ARFF nominal
//! attributes, or CSV columns whose first value is not a number) are encoded
//! as integers in first-seen order, and so are labels. Rows that do not fit
//! the column types are skipped and counted.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streamgen::{DriftSpec, Sample};

/// Expected shape of a dataset, checked after loading when given.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub rows: Option<usize>,
    pub features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
    /// Original label values, indexed by encoded class.
    pub classes: Vec<String>,
    /// Rows dropped as malformed.
    pub skipped: usize,
    /// Ground-truth drift schedule, when the file carries one.
    pub drifts: Option<Vec<DriftSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Arff,
}

#[derive(Debug, Default)]
struct Column {
    numeric: Option<bool>,
    codes: HashMap<String, usize>,
    order: Vec<String>,
}

impl Column {
    fn nominal(values: Vec<String>) -> Self {
        let codes = values.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Self {
            numeric: Some(false),
            codes,
            order: values,
        }
    }

    fn encode(&mut self, raw: &str) -> Option<f64> {
        let v = raw.trim().trim_matches(|c| c == '\'' || c == '"');
        if v.is_empty() || v == "?" {
            return None;
        }
        let numeric = *self.numeric.get_or_insert_with(|| v.parse::<f64>().is_ok());
        if numeric {
            return v.parse::<f64>().ok().filter(|x| x.is_finite());
        }
        let next = self.order.len();
        let code = *self.codes.entry(v.to_string()).or_insert_with(|| {
            self.order.push(v.to_string());
            next
        });
        Some(code as f64)
    }
}

/// Loads a dataset file; the format follows the extension (`.arff`, else CSV).
pub fn ingest_real_dataset(path: &Path, schema: Option<&DatasetSchema>) -> Result<Dataset> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("arff") => Format::Arff,
        _ => Format::Csv,
    };
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let file = std::fs::File::open(path)?;
    ingest_reader(file, format, &name, schema)
}

pub fn ingest_reader<R: Read>(mut input: R, format: Format, name: &str, schema: Option<&DatasetSchema>) -> Result<Dataset> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Err(Error::Malformed(format!("{name}: empty file")));
    }
    let (drifts, text) = split_meta(&text)?;
    let (names, mut columns, data) = match format {
        Format::Csv => csv_header(text)?,
        Format::Arff => arff_header(text)?,
    };
    if names.len() < 2 {
        return Err(Error::Malformed(format!("{name}: need at least one feature and a label")));
    }
    // Labels are always treated as categories.
    if let Some(label) = columns.last_mut() {
        label.numeric = Some(false);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(if format == Format::Arff { Some(b'%') } else { None })
        .from_reader(data.as_bytes());
    let dim = names.len() - 1;
    let mut samples = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let row = match record {
            Ok(r) if r.len() == names.len() => r,
            Ok(r) if r.iter().all(|f| f.trim().is_empty()) => continue,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let encoded: Option<Vec<f64>> = row.iter().zip(&mut columns).map(|(f, c)| c.encode(f)).collect();
        match encoded {
            Some(mut values) => {
                let label = values.pop().expect("row has a label") as u32;
                samples.push(Sample {
                    features: values,
                    label,
                });
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{name}: skipped {skipped} malformed rows");
    }
    if samples.is_empty() {
        return Err(Error::Malformed(format!("{name}: no valid rows")));
    }
    if let Some(s) = schema {
        if s.features.is_some_and(|f| f != dim) {
            return Err(Error::Malformed(format!(
                "{name}: schema declares {} features, file has {dim}",
                s.features.unwrap_or_default()
            )));
        }
        if s.rows.is_some_and(|r| r != samples.len()) {
            return Err(Error::Malformed(format!(
                "{name}: schema declares {} rows, file has {}",
                s.rows.unwrap_or_default(),
                samples.len()
            )));
        }
    }
    let classes = columns.pop().expect("label column").order;
    Ok(Dataset {
        name: name.to_string(),
        samples,
        feature_names: names[..dim].to_vec(),
        classes,
        skipped,
        drifts,
    })
}

/// Strips a leading `# meta: {...}` line as written for generated streams and
/// extracts its drift schedule.
fn split_meta(text: &str) -> Result<(Option<Vec<DriftSpec>>, &str)> {
    let Some(rest) = text.strip_prefix("# meta:") else {
        return Ok((None, text));
    };
    let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
    let meta: serde_json::Value = serde_json::from_str(line.trim())?;
    let drifts = match meta.get("drifts").unwrap_or(&meta) {
        v @ serde_json::Value::Array(_) => Some(serde_json::from_value(v.clone())?),
        _ => None,
    };
    Ok((drifts, body))
}

type Header<'a> = (Vec<String>, Vec<Column>, &'a str);

fn csv_header(text: &str) -> Result<Header<'_>> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let names: Vec<String> = first.trim_end_matches('\r').split(',').map(|s| s.trim().to_string()).collect();
    let columns = names.iter().map(|_| Column::default()).collect();
    Ok((names, columns, rest))
}

fn arff_header(text: &str) -> Result<Header<'_>> {
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        offset += line.len();
        let l = line.trim();
        if l.is_empty() || l.starts_with('%') {
            continue;
        }
        let lower = l.to_ascii_lowercase();
        if lower.starts_with("@data") {
            return Ok((names, columns, &text[offset..]));
        }
        if lower.starts_with("@attribute") {
            let body = l["@attribute".len()..].trim();
            let (name, kind) = split_attribute(body)
                .ok_or_else(|| Error::Malformed(format!("bad attribute line `{l}`")))?;
            let column = if let Some(values) = kind.strip_prefix('{') {
                let values = values.trim_end_matches('}');
                Column::nominal(
                    values
                        .split(',')
                        .map(|v| v.trim().trim_matches(|c| c == '\'' || c == '"').to_string())
                        .collect(),
                )
            } else {
                match kind.to_ascii_lowercase().as_str() {
                    "numeric" | "real" | "integer" => Column {
                        numeric: Some(true),
                        ..Default::default()
                    },
                    _ => Column {
                        numeric: Some(false),
                        ..Default::default()
                    },
                }
            };
            names.push(name);
            columns.push(column);
        }
    }
    Err(Error::Malformed("ARFF file has no @data section".into()))
}

fn split_attribute(body: &str) -> Option<(String, &str)> {
    if let Some(quoted) = body.strip_prefix('\'') {
        let end = quoted.find('\'')?;
        return Some((quoted[..end].to_string(), quoted[end + 1..].trim()));
    }
    let end = body.find(char::is_whitespace)?;
    Some((body[..end].to_string(), body[end..].trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Dataset> {
        ingest_reader(text.as_bytes(), Format::Csv, "t", None)
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(csv("").is_err());
        assert!(csv("a,b,label\n").is_err());
    }

    #[test]
    fn one_malformed_row_among_100() {
        let mut text = String::from("x,y,label\n");
        for i in 0..100 {
            if i == 37 {
                text.push_str("1.0,oops,UP\n");
            } else {
                text.push_str(&format!("{i},{},{}\n", i * 2, if i % 2 == 0 { "UP" } else { "DOWN" }));
            }
        }
        let d = csv(&text).unwrap();
        assert_eq!((d.samples.len(), d.skipped), (99, 1));
        assert_eq!(d.classes, vec!["UP", "DOWN"]);
        assert_eq!(d.samples[1].label, 1);
    }

    #[test]
    fn categorical_features_in_first_seen_order() {
        let d = csv("day,price,label\nmon,1.5,0\ntue,2.5,1\nmon,0.5,1\n").unwrap();
        let days: Vec<f64> = d.samples.iter().map(|s| s.features[0]).collect();
        assert_eq!(days, vec![0.0, 1.0, 0.0]);
        assert_eq!(d.classes, vec!["0", "1"]);
    }

    #[test]
    fn wrong_field_count_and_missing_values_are_skipped() {
        let d = csv("a,b,label\n1,2,0\n1,0\n1,?,1\n3,4,1\n").unwrap();
        assert_eq!((d.samples.len(), d.skipped), (2, 2));
    }

    #[test]
    fn generated_stream_header_gives_ground_truth() {
        let drifts = vec![DriftSpec::sudden(2, 1.0)];
        let meta = serde_json::json!({ "generator": "sea", "drifts": drifts });
        let text = format!("# meta: {meta}\nf0,label\n0.5,0\n0.7,1\n0.1,0\n");
        let d = csv(&text).unwrap();
        assert_eq!(d.drifts, Some(drifts));
        assert_eq!(d.samples.len(), 3);
        assert_eq!(csv("f0,label\n1,0\n").unwrap().drifts, None);
    }

    #[test]
    fn schema_is_checked() {
        let text = "a,b,label\n1,2,0\n3,4,1\n";
        let ok = DatasetSchema {
            rows: Some(2),
            features: Some(2),
        };
        assert!(ingest_reader(text.as_bytes(), Format::Csv, "t", Some(&ok)).is_ok());
        let bad = DatasetSchema {
            rows: Some(3),
            features: None,
        };
        assert!(ingest_reader(text.as_bytes(), Format::Csv, "t", Some(&bad)).is_err());
        let bad = DatasetSchema {
            rows: None,
            features: Some(9),
        };
        assert!(ingest_reader(text.as_bytes(), Format::Csv, "t", Some(&bad)).is_err());
    }

    #[test]
    fn arff_with_nominal_attributes() {
        let text = "% comment\n@relation elec\n@attribute day {1,2,3}\n@attribute 'nsw price' numeric\n\
                    @attribute class {UP,DOWN}\n\n@data\n2,0.5,DOWN\n% mid comment\n1,0.25,UP\n3,bad,UP\n";
        let d = ingest_reader(text.as_bytes(), Format::Arff, "elec", None).unwrap();
        assert_eq!(d.feature_names, vec!["day", "nsw price"]);
        assert_eq!(d.samples.len(), 2);
        assert_eq!(d.skipped, 1);
        assert_eq!(d.samples[0].features, vec![1.0, 0.5]);
        assert_eq!(d.samples[0].label, 1);
        assert_eq!(d.classes, vec!["UP", "DOWN"]);
    }

    #[test]
    fn arff_without_data_is_rejected() {
        assert!(ingest_reader("@relation x\n@attribute a numeric\n".as_bytes(), Format::Arff, "x", None).is_err());
    }
}
