//! CSV and JSON emitters. Floats are written with `{:?}`, the shortest
//! decimal that parses back to the same `f64`.

use std::io::Write;

use pt_spectra::scan::{Label, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const CSV_COLUMNS: [&str; 7] = ["label", "eps", "re_lambda", "im_lambda", "residual", "real_flag", "trunc"];

/// Resolved run configuration, written at the top of every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub version: String,
    pub command: String,
    /// Sorted `key = value` pairs.
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        let mut entries = Vec::new();
        if let Ok(Value::Object(map)) = serde_json::to_value(config) {
            for (k, v) in map {
                let v = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                entries.push((k.replace('_', "-"), v));
            }
        }
        entries.sort();
        Self {
            version: pt_spectra::VERSION.to_string(),
            command: command.to_string(),
            entries,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self.entries.sort();
        self
    }

    pub fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![format!("# pt-spectra {}", self.version), format!("# command = {}", self.command)];
        out.extend(self.entries.iter().map(|(k, v)| format!("# {k} = {v}")));
        out
    }

    pub fn to_json(&self) -> Value {
        let config: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        serde_json::json!({
            "toolkit": "pt-spectra",
            "version": self.version,
            "command": self.command,
            "config": config,
        })
    }
}

/// One CSV data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub label: String,
    pub eps: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub residual: f64,
    pub real_flag: bool,
    pub trunc: String,
}

impl TrajectoryRow {
    fn fields(&self) -> [String; 7] {
        [
            self.label.clone(),
            format!("{:?}", self.eps),
            format!("{:?}", self.re_lambda),
            format!("{:?}", self.im_lambda),
            format!("{:?}", self.residual),
            self.real_flag.to_string(),
            self.trunc.clone(),
        ]
    }
}

/// Rows sorted by `(label, eps)`.
pub fn trajectory_rows(trajectories: &[Trajectory]) -> Vec<TrajectoryRow> {
    let mut keyed: Vec<(Label, TrajectoryRow)> = trajectories
        .iter()
        .flat_map(|t| {
            t.points.iter().map(move |p| {
                (
                    t.label,
                    TrajectoryRow {
                        label: t.label.to_string(),
                        eps: p.eps,
                        re_lambda: p.value.re,
                        im_lambda: p.value.im,
                        residual: p.residual,
                        real_flag: p.real,
                        trunc: t.truncation.to_string(),
                    },
                )
            })
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.eps.total_cmp(&b.1.eps)));
    keyed.into_iter().map(|(_, r)| r).collect()
}

pub fn write_csv(w: &mut impl Write, comments: &[String], rows: &[TrajectoryRow]) -> std::io::Result<()> {
    for line in comments {
        writeln!(w, "{line}")?;
    }
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    csv.write_record(CSV_COLUMNS)?;
    for row in rows {
        csv.write_record(row.fields())?;
    }
    csv.flush()
}

/// Comment lines and rows of an emitted trajectory file.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<TrajectoryRow>), CliError> {
    let comments: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Config(format!("malformed CSV header: {e}")))?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(CliError::Config(format!("unexpected CSV columns {header:?}")));
    }
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<TrajectoryRow>, _>>()
        .map_err(|e| CliError::Config(format!("malformed CSV row: {e}")))?;
    Ok((comments, rows))
}

/// Pretty JSON with a `_header` entry in front and a trailing newline.
pub fn write_json(w: &mut impl Write, header: &Header, body: Value) -> std::io::Result<()> {
    let mut map = Map::new();
    map.insert("_header".into(), header.to_json());
    match body {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    serde_json::to_writer_pretty(&mut *w, &Value::Object(map))?;
    writeln!(w)
}

/// JSON number, or the strings `"inf"` / `"-inf"` / `"nan"` which JSON cannot encode.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}
