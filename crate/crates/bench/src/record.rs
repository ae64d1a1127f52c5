//! Benchmark records and their CSV form.
//!
//! One row per (instance, solver) run. Floats are written in scientific
//! notation with 17 significant digits, so values survive a read/write cycle
//! bit for bit. Optional fields are written as empty cells. The first line
//! of every file is a `#` comment echoing the configuration that produced
//! it.
//!
//! `field_evals` counts evaluations of the vector field `X`: one at the
//! starting point and one per feasible line-search trial. Applications of
//! the covariant derivative are not counted.

use std::io::{Read, Write};

use riemann_newton::Status;

pub const HEADER: [&str; 16] = [
    "problem_id",
    "manifold",
    "family",
    "dims",
    "seed",
    "epsilon",
    "algorithm",
    "retraction",
    "theta",
    "sigma",
    "iters",
    "field_evals",
    "cpu_seconds",
    "status",
    "final_merit",
    "final_stationarity",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub problem_id: String,
    pub manifold: String,
    pub family: String,
    pub dims: String,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub algorithm: u8,
    pub retraction: String,
    pub theta: f64,
    pub sigma: f64,
    pub iters: usize,
    pub field_evals: usize,
    pub cpu_seconds: f64,
    pub status: Status,
    pub final_merit: f64,
    pub final_stationarity: f64,
}

impl BenchmarkRecord {
    /// Identifies the solver (algorithm, retraction and, for the modified
    /// damped method, theta) for profiles and tables.
    pub fn solver_label(&self) -> String {
        if self.algorithm == 3 {
            format!("alg3-{}-theta{}", self.retraction, self.theta)
        } else {
            format!("alg{}-{}", self.algorithm, self.retraction)
        }
    }

    pub fn solved(&self) -> bool {
        self.status == Status::Converged
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.problem_id.clone(),
            self.manifold.clone(),
            self.family.clone(),
            self.dims.clone(),
            self.seed.to_string(),
            self.epsilon.map(format_float).unwrap_or_default(),
            self.algorithm.to_string(),
            self.retraction.clone(),
            format_float(self.theta),
            format_float(self.sigma),
            self.iters.to_string(),
            self.field_evals.to_string(),
            format_float(self.cpu_seconds),
            self.status.to_string(),
            format_float(self.final_merit),
            format_float(self.final_stationarity),
        ]
    }

    fn from_row(row: &csv::StringRecord, line: usize) -> Result<Self, RecordError> {
        if row.len() != HEADER.len() {
            return Err(RecordError::Malformed {
                line,
                reason: format!("expected {} fields, found {}", HEADER.len(), row.len()),
            });
        }
        let field = |i: usize| &row[i];
        let bad = |i: usize, what: &str| RecordError::Malformed {
            line,
            reason: format!("column {}: {what} '{}'", HEADER[i], &row[i]),
        };
        let float = |i: usize| parse_float(field(i)).ok_or_else(|| bad(i, "not a number"));
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|_| bad(i, "not an integer"))
        };
        Ok(Self {
            problem_id: field(0).to_string(),
            manifold: field(1).to_string(),
            family: field(2).to_string(),
            dims: field(3).to_string(),
            seed: field(4).parse().map_err(|_| bad(4, "not an integer"))?,
            epsilon: if field(5).is_empty() {
                None
            } else {
                Some(float(5)?)
            },
            algorithm: field(6).parse().map_err(|_| bad(6, "not an algorithm"))?,
            retraction: field(7).to_string(),
            theta: float(8)?,
            sigma: float(9)?,
            iters: int(10)?,
            field_evals: int(11)?,
            cpu_seconds: float(12)?,
            status: field(13).parse().map_err(|_| bad(13, "unknown status"))?,
            final_merit: float(14)?,
            final_stationarity: float(15)?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("header does not match the record schema")]
    Header,
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_float(s: &str) -> Option<f64> {
    s.parse().ok()
}

/// Writes the config comment, the header and the rows.
pub fn write_records<W: Write>(
    mut out: W,
    config_line: &str,
    records: &[BenchmarkRecord],
) -> Result<(), RecordError> {
    writeln!(out, "# {}", config_line.replace('\n', " "))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a records file; returns the config comment (without `# `) and rows.
pub fn read_records<R: Read>(input: R) -> Result<(String, Vec<BenchmarkRecord>), RecordError> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let (config, body) = match text.strip_prefix("# ") {
        Some(rest) => {
            let end = rest.find('\n').unwrap_or(rest.len());
            (
                rest[..end].trim_end_matches('\r').to_string(),
                &rest[(end + 1).min(rest.len())..],
            )
        }
        None => (String::new(), text.as_str()),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let header = rdr.headers()?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(RecordError::Header);
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        records.push(BenchmarkRecord::from_row(&row?, i + 3)?);
    }
    Ok((config, records))
}
