//! ndjson inputs and outputs of the batch commands.

use std::fs;
use std::io::{self, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cmrx_core::gateway::SampleSet;
use cmrx_core::pipeline::ExtractionOutput;
use cmrx_core::report::{parse_record, CmrRecord, ParseError};

use crate::CliError;

/// One line of `extract` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractLine {
    #[serde(flatten)]
    pub output: ExtractionOutput,
    #[serde(default)]
    pub scrubbed_text: String,
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Reads a whole file, or stdin for `-`.
pub fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| data_err(path, e))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| data_err(path, e))
    }
}

pub fn is_ndjson(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("ndjson" | "jsonl"))
}

/// Parses every non-blank line as a JSON object.
pub fn read_ndjson(path: &Path) -> Result<Vec<Value>, CliError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| data_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn report_id(v: &Value) -> Result<String, CliError> {
    v.get("report_id")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CliError::Data("line without a string report_id".into()))
}

fn record(v: &Value) -> Result<CmrRecord, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Data(format!("bad record: {e}")))
}

/// Reports to extract: `(report_id, text)`. ndjson files contribute one
/// report per line (`report_id` and `text`); any other file is one report
/// named after its stem.
pub fn read_reports(paths: &[impl AsRef<Path>]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        if is_ndjson(p) {
            for v in read_ndjson(p)? {
                let text = v
                    .get("text")
                    .and_then(Value::as_str)
                    .ok_or_else(|| data_err(p, "line without a string text"))?;
                out.push((report_id(&v)?, text.to_string()));
            }
        } else {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("stdin").to_string();
            out.push((id, read_text(p)?));
        }
    }
    Ok(out)
}

/// Reference record of a line: `gold_record`, else `record`.
pub fn gold_of(v: &Value) -> Result<CmrRecord, CliError> {
    match v.get("gold_record").or_else(|| v.get("record")) {
        Some(r) if !r.is_null() => record(r),
        _ => Err(CliError::Data(format!("{}: no gold record", report_id(v).unwrap_or_default()))),
    }
}

/// Prediction of a line: `record` (null means nothing parsed), else the
/// raw `corrupted_output` of a synthetic corpus, else `gold_record`.
pub fn pred_of(v: &Value) -> Result<Result<CmrRecord, ParseError>, CliError> {
    if let Some(r) = v.get("record") {
        return if r.is_null() {
            Ok(Err(ParseError::Invalid { message: "no sample parsed".into() }))
        } else {
            record(r).map(Ok)
        };
    }
    if let Some(raw) = v.get("corrupted_output").and_then(Value::as_str) {
        return Ok(parse_record(raw));
    }
    gold_of(v).map(Ok)
}

/// A sample set line, or a single prediction treated as one sample.
pub fn samples_of(v: &Value) -> Result<SampleSet, CliError> {
    if v.get("attempts").is_some() {
        return serde_json::from_value(v.clone()).map_err(|e| CliError::Data(format!("bad sample set: {e}")));
    }
    Ok(SampleSet { report_id: report_id(v)?, temperature: 0.0, attempts: vec![pred_of(v)?], raw: Vec::new() })
}

/// Serializes each item as one compact JSON line.
pub fn to_ndjson<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for i in items {
        s.push_str(&serde_json::to_string(i).expect("serializable"));
        s.push('\n');
    }
    s
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match path {
        Some(p) => fs::write(p, text).map_err(|e| data_err(p, e)),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}
