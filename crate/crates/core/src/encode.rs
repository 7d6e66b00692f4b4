//! Real-vector encoding of a candidate solution.
//!
//! An individual is `[x_1..x_N | w̃_1 | .. | w̃_K]` with every entry in
//! `[−1, 1]`: `θ_n = π·x_n`, and each `w̃_k` is `M` consecutive (re, im)
//! pairs that are normalized onto the power sphere when decoded.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{PhaseVector, SystemDims};
use crate::cvec::{norm_sqr, CVec};
use crate::error::{Error, Result};
use crate::linkmath::{BeamformerSet, LinkBudget};
use crate::rng::{stream, tag};

/// Which entries of an individual are phases and which are beam coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub dims: SystemDims,
    /// `false` when only the RIS phases are optimized.
    pub beams: bool,
}

impl Layout {
    pub fn joint(dims: SystemDims) -> Self {
        Self { dims, beams: true }
    }

    pub fn passive(dims: SystemDims) -> Self {
        Self { dims, beams: false }
    }

    pub fn len(&self) -> usize {
        if self.beams {
            self.dims.individual_len()
        } else {
            self.dims.elements
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phase_len(&self) -> usize {
        self.dims.elements
    }
}

/// A validated individual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Individual(Vec<f64>);

impl Individual {
    pub fn new(x: Vec<f64>, layout: &Layout) -> Result<Self> {
        if x.len() != layout.len() {
            return Err(Error::Dimension(format!("individual has {} entries, layout needs {}", x.len(), layout.len())));
        }
        if let Some(v) = x.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("individual entry {v} outside [-1, 1]")));
        }
        Ok(Self(x))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `e^{jπx_n}` for the phase part.
pub fn phasors(x: &[f64]) -> CVec {
    x.iter().map(|&v| Complex64::from_polar(1.0, std::f64::consts::PI * v)).collect()
}

pub fn decode_phases(x: &[f64], n: usize) -> Result<PhaseVector> {
    PhaseVector::new(x[..n].iter().map(|v| std::f64::consts::PI * v).collect())
}

/// Unscaled per-user directions from the beam part. A zero segment becomes
/// the first standard basis vector.
pub fn beam_directions(beam: &[f64], antennas: usize, users: usize) -> Vec<CVec> {
    debug_assert_eq!(beam.len(), 2 * antennas * users);
    beam.chunks_exact(2 * antennas)
        .map(|seg| {
            let mut w: CVec = seg.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
            if norm_sqr(&w) == 0.0 {
                w[0] = Complex64::new(1.0, 0.0);
            }
            w
        })
        .collect()
}

pub fn decode_beams(beam: &[f64], dims: SystemDims, budget: &LinkBudget) -> Result<BeamformerSet> {
    if beam.len() != 2 * dims.antennas * dims.users {
        return Err(Error::Dimension(format!("beam part has {} entries, need {}", beam.len(), 2 * dims.antennas * dims.users)));
    }
    BeamformerSet::from_directions(beam_directions(beam, dims.antennas, dims.users), budget)
}

/// Joint decoding of a full individual.
pub fn decode(x: &[f64], dims: SystemDims, budget: &LinkBudget) -> Result<(PhaseVector, BeamformerSet)> {
    if x.len() != dims.individual_len() {
        return Err(Error::Dimension(format!("individual has {} entries, need {}", x.len(), dims.individual_len())));
    }
    let n = dims.elements;
    Ok((decode_phases(x, n)?, decode_beams(&x[n..], dims, budget)?))
}

/// Folds a phase coordinate back into `(−1, 1]` without changing `e^{jπu}`.
#[inline]
pub fn wrap_phase_entry(u: f64) -> f64 {
    u + 2.0 * ((1.0 - u) / 2.0).floor()
}

/// Pulls an out-of-range beam coordinate halfway from the violated bound
/// towards the parent's value.
#[inline]
pub fn clamp_beam_entry(u: f64, parent: f64) -> f64 {
    if u < -1.0 {
        (-1.0 + parent) / 2.0
    } else if u > 1.0 {
        (1.0 + parent) / 2.0
    } else {
        u
    }
}

/// Applies both repairs in place; `parent` is the target vector the trial
/// was derived from.
pub fn repair(trial: &mut [f64], parent: &[f64], layout: &Layout) {
    let n = layout.phase_len();
    for v in &mut trial[..n] {
        *v = wrap_phase_entry(*v);
    }
    for (v, &p) in trial[n..].iter_mut().zip(&parent[n..]) {
        *v = clamp_beam_entry(*v, p);
    }
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

pub fn random_individual(dims: SystemDims, seed: u64) -> Individual {
    Individual(random_vector(&mut stream(seed, &[tag::INIT]), dims.individual_len()))
}
