//! Monte-Carlo downlink: modulate, precode, add noise, equalize, detect and
//! count symbol errors for every user.
//!
//! Slots are processed in fixed-size batches, each with its own random
//! stream derived from `(seed, batch)`. Error counts are summed per user, so
//! the report is identical for every execution mode and thread count.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{aggregate, AggregatedChannel, ChannelRealization, PhaseVector, SystemDims};
use crate::cvec::{complex_gaussian, inner_h};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linkmath::{BeamformerSet, LinkBudget};
use crate::modem::Constellation;
use crate::rng::{stream, tag};

/// Symbol slots per random stream.
pub const BATCH_SLOTS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerReport {
    pub per_user_ser: Vec<f64>,
    pub avg_ser: f64,
    pub symbols_per_user: usize,
    pub seed: u64,
    pub errors: Vec<u64>,
}

impl SerReport {
    fn from_errors(errors: Vec<u64>, symbols_per_user: usize, seed: u64) -> Self {
        let per_user_ser: Vec<f64> = errors.iter().map(|&e| e as f64 / symbols_per_user as f64).collect();
        let avg_ser = per_user_ser.iter().sum::<f64>() / per_user_ser.len() as f64;
        Self { per_user_ser, avg_ser, symbols_per_user, seed, errors }
    }

    pub fn rows(&self, scheme: &str, dims: SystemDims, order: u32, rho_db: f64) -> Vec<SerRow> {
        self.per_user_ser
            .iter()
            .enumerate()
            .map(|(user, &ser)| SerRow {
                seed: self.seed,
                scheme: scheme.to_string(),
                m_antennas: dims.antennas,
                n_elements: dims.elements,
                k_users: dims.users,
                order,
                rho_db,
                user,
                ser,
            })
            .collect()
    }
}

/// One CSV line of a simulated SER sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerRow {
    pub seed: u64,
    pub scheme: String,
    #[serde(rename = "M")]
    pub m_antennas: usize,
    #[serde(rename = "N")]
    pub n_elements: usize,
    #[serde(rename = "K")]
    pub k_users: usize,
    #[serde(rename = "m")]
    pub order: u32,
    pub rho_db: f64,
    pub user: usize,
    pub ser: f64,
}

pub fn write_ser_csv<W: Write>(rows: &[SerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Where transmitted symbols come from.
#[derive(Clone, Copy, Debug)]
pub enum Symbols<'a> {
    /// I.i.d. equiprobable constellation indices.
    Uniform,
    /// Fixed per-user index streams, e.g. from [`Constellation::map_bits`].
    Given(&'a [Vec<usize>]),
}

/// Simulates `n_symbols` slots over one quasi-static channel realization.
pub fn run_downlink(
    ch: &ChannelRealization,
    theta: &PhaseVector,
    bf: &BeamformerSet,
    budget: &LinkBudget,
    order: u32,
    n_symbols: usize,
    seed: u64,
) -> Result<SerReport> {
    let agg = aggregate(ch, theta)?;
    let constellation = Constellation::new(order)?;
    simulate(&agg, bf, budget, &constellation, n_symbols, Symbols::Uniform, seed, Execution::default())
}

/// Runs the per-user bit streams through the link; each stream must hold the
/// same whole number of symbols.
pub fn run_downlink_bits(
    agg: &AggregatedChannel,
    bf: &BeamformerSet,
    budget: &LinkBudget,
    constellation: &Constellation,
    bits: &[Vec<u8>],
    seed: u64,
    exec: Execution,
) -> Result<SerReport> {
    let symbols = bits.iter().map(|b| constellation.map_bits(b)).collect::<Result<Vec<_>>>()?;
    let n = symbols.first().map_or(0, Vec::len);
    if symbols.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension("per-user bit streams differ in length".into()));
    }
    simulate(agg, bf, budget, constellation, n, Symbols::Given(&symbols), seed, exec)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    agg: &AggregatedChannel,
    bf: &BeamformerSet,
    budget: &LinkBudget,
    constellation: &Constellation,
    n_symbols: usize,
    symbols: Symbols<'_>,
    seed: u64,
    exec: Execution,
) -> Result<SerReport> {
    let k_users = agg.users();
    if n_symbols == 0 {
        return Err(Error::Config("need at least one symbol per user".into()));
    }
    if bf.users() != k_users || bf.vectors.iter().any(|w| w.len() != agg.antennas()) {
        return Err(Error::Dimension("beamformers do not match the aggregated channel".into()));
    }
    if let Symbols::Given(s) = symbols {
        if s.len() != k_users || s.iter().any(|v| v.len() < n_symbols) {
            return Err(Error::Dimension("symbol streams do not cover every user and slot".into()));
        }
    }

    // gain[k][j] = √ρ·z_kᴴw_j
    let sqrt_rho = budget.rho.sqrt();
    let gain: Vec<Vec<Complex64>> = agg
        .z
        .iter()
        .map(|z| bf.vectors.iter().map(|w| sqrt_rho * inner_h(z, w)).collect())
        .collect();
    let mut inv_direct = Vec::with_capacity(k_users);
    for (k, g) in gain.iter().enumerate() {
        if g[k].norm_sqr() == 0.0 {
            return Err(Error::EqualizationSingular { user: k });
        }
        inv_direct.push(g[k].inv());
    }

    let points = constellation.points();
    let order = points.len();
    let batches = n_symbols.div_ceil(BATCH_SLOTS);
    let per_batch = exec.map(batches, |b| {
        let mut rng = stream(seed, &[tag::SYMBOLS, b as u64]);
        let start = b * BATCH_SLOTS;
        let end = (start + BATCH_SLOTS).min(n_symbols);
        let mut errors = vec![0u64; k_users];
        let mut tx = vec![0usize; k_users];
        for slot in start..end {
            for (k, t) in tx.iter_mut().enumerate() {
                *t = match symbols {
                    Symbols::Uniform => rng.random_range(0..order),
                    Symbols::Given(s) => s[k][slot],
                };
            }
            for k in 0..k_users {
                let mut y = complex_gaussian(&mut rng, budget.sigma2);
                for (g, &t) in gain[k].iter().zip(&tx) {
                    y += g * points[t];
                }
                if constellation.detect(y * inv_direct[k]) != tx[k] {
                    errors[k] += 1;
                }
            }
        }
        errors
    });

    let mut errors = vec![0u64; k_users];
    for batch in per_batch {
        for (acc, e) in errors.iter_mut().zip(batch) {
            *acc += e;
        }
    }
    Ok(SerReport::from_errors(errors, n_symbols, seed))
}
