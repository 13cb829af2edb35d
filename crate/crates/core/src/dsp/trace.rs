use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether explicit sample times are uniform.
const UNIFORM_TOLERANCE: f64 = 1e-9;

/// Time axis of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    Uniform {
        t0: f64,
        dt: f64,
    },
    /// Strictly increasing sample times, e.g. the log-spaced T1 grid.
    Explicit(Vec<f64>),
}

/// Sampled signal with free-form metadata tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    sampling: Sampling,
    values: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl TimeTrace {
    pub fn uniform(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(crate::error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: values.len(),
            });
        }
        Ok(Self {
            sampling: Sampling::Uniform { t0, dt },
            values,
            metadata: BTreeMap::new(),
        })
    }

    /// Builds a trace from explicit times, collapsing to a uniform axis when possible.
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(crate::error::invalid(
                "values",
                format!("{} times but {} values", times.len(), values.len()),
            ));
        }
        if values.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(crate::error::invalid("times", "must be strictly increasing"));
        }
        let n = times.len();
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        let uniform = times
            .iter()
            .enumerate()
            .all(|(i, t)| (t - (times[0] + i as f64 * dt)).abs() <= UNIFORM_TOLERANCE * dt);
        let sampling = if uniform {
            Sampling::Uniform { t0: times[0], dt }
        } else {
            Sampling::Explicit(times)
        };
        Ok(Self {
            sampling,
            values,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_tag(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn sampling(&self) -> &Sampling {
        &self.sampling
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample spacing when the trace is uniformly sampled.
    pub fn dt(&self) -> Option<f64> {
        match self.sampling {
            Sampling::Uniform { dt, .. } => Some(dt),
            Sampling::Explicit(_) => None,
        }
    }

    pub fn t0(&self) -> f64 {
        match &self.sampling {
            Sampling::Uniform { t0, .. } => *t0,
            Sampling::Explicit(t) => t[0],
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        match &self.sampling {
            Sampling::Uniform { t0, dt } => t0 + i as f64 * dt,
            Sampling::Explicit(t) => t[i],
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Copy with the mean removed, keeping sampling and metadata.
    pub fn centred(&self) -> Self {
        let mean = self.mean();
        Self {
            sampling: self.sampling.clone(),
            values: self.values.iter().map(|v| v - mean).collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Reads a two-column `time,value` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        if headers.len() != 2 {
            return Err(Error::Csv(format!(
                "expected 2 columns (time, value), found {}",
                headers.len()
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: column `{}`: {e}", line + 2, &headers[i])))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        let mut trace = Self::from_samples(times, values)?;
        trace.metadata.insert("source".into(), "csv".into());
        Ok(trace)
    }
}
