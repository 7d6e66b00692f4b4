use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Population statistics after one generation (generation 0 is the initial
/// population).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
    #[serde(rename = "lambda_G")]
    pub lambda: usize,
    pub nfe: usize,
}

impl TraceRow {
    pub fn from_fitness(generation: usize, fitness: &[f64], lambda: usize, nfe: usize) -> Self {
        let best = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
        Self { generation, best, worst, mean, lambda, nfe }
    }
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
