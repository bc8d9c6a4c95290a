use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected header `t,u,y`, found `{0}`")]
    Header(String),
    #[error("dataset needs at least two rows")]
    TooFewRows,
    #[error("sample times are not uniformly spaced (row {row})")]
    NonUniform { row: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Uniformly sampled single-input single-output record.
#[derive(Debug, Clone, PartialEq)]
pub struct EraDataset {
    u: Vec<f64>,
    y: Vec<f64>,
    sample_rate: f64,
}

impl EraDataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, sample_rate: f64) -> Result<Self, super::EraError> {
        if u.len() != y.len() {
            return Err(super::EraError::LengthMismatch { input: u.len(), output: y.len() });
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(super::EraError::BadSpec("sample rate must be positive".into()));
        }
        Ok(Self { u, y, sample_rate })
    }

    pub fn input(&self) -> &[f64] {
        &self.u
    }
    pub fn output(&self) -> &[f64] {
        &self.y
    }
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
    pub fn len(&self) -> usize {
        self.u.len()
    }
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Reads the `t,u,y` CSV format. The sample rate is recovered from the
    /// time column, which must be uniformly spaced.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != ["t", "u", "y"] {
            return Err(DatasetError::Header(header.join(",")));
        }
        let (mut t, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record?;
            if record.len() != 3 {
                return Err(DatasetError::Parse { line, message: format!("expected 3 fields, found {}", record.len()) });
            }
            let mut values = [0.0; 3];
            for (slot, (field, name)) in values.iter_mut().zip(record.iter().zip(["t", "u", "y"])) {
                *slot = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::Parse { line, message: format!("column `{name}`: bad number `{field}`") })?;
            }
            t.push(values[0]);
            u.push(values[1]);
            y.push(values[2]);
        }
        if t.len() < 2 {
            return Err(DatasetError::TooFewRows);
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(DatasetError::NonUniform { row: 2 });
        }
        if let Some(row) = t.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
            return Err(DatasetError::NonUniform { row: row + 3 });
        }
        Ok(Self { u, y, sample_rate: 1.0 / dt })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,u,y")?;
        let dt = 1.0 / self.sample_rate;
        for (k, (u, y)) in self.u.iter().zip(&self.y).enumerate() {
            writeln!(out, "{},{},{}", k as f64 * dt, u, y)?;
        }
        Ok(())
    }
}
