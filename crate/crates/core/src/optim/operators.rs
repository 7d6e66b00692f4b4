//! Variation, selection and parameter-adaptation operators.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encode::{repair, Layout};
use crate::error::{Error, Result};

/// Standard deviation of the CR/F sampling distributions.
pub const PARAM_STD: f64 = 0.1;

/// `best + F·(x_r1 − x_r2)`, repaired against the target `parent`.
pub fn mutate_best1(
    pop: &[Vec<f64>],
    best: usize,
    target: usize,
    r1: usize,
    r2: usize,
    f: f64,
    layout: &Layout,
) -> Result<Vec<f64>> {
    if r1 == r2 || r1 == target || r2 == target {
        return Err(Error::Config(format!("mutation indices collide: target {target}, r1 {r1}, r2 {r2}")));
    }
    let (b, a, c) = (&pop[best], &pop[r1], &pop[r2]);
    let mut v: Vec<f64> = b.iter().zip(a).zip(c).map(|((b, a), c)| b + f * (a - c)).collect();
    repair(&mut v, &pop[target], layout);
    Ok(v)
}

/// Two distinct indices in `0..size`, both different from `target`.
pub fn pick_pair<R: Rng + ?Sized>(rng: &mut R, size: usize, target: usize) -> (usize, usize) {
    debug_assert!(size >= 3);
    let r1 = loop {
        let r = rng.random_range(0..size);
        if r != target {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.random_range(0..size);
        if r != target && r != r1 {
            break r;
        }
    };
    (r1, r2)
}

/// Takes each mutant entry with probability `cr`, and always at one index
/// drawn uniformly per trial.
pub fn crossover_binomial<R: Rng + ?Sized>(parent: &[f64], mutant: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    let forced = rng.random_range(0..parent.len());
    parent
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&p, &m))| if j == forced || rng.random::<f64>() <= cr { m } else { p })
        .collect()
}

/// Elitist replacement rule: ties go to the trial.
#[inline]
pub fn select(parent_fit: f64, trial_fit: f64) -> bool {
    trial_fit <= parent_fit
}

/// Number of local-search probes in generation `g`,
/// `⌊f_c·(G_max − g)·I / (f_best_prev·G_max)⌋` clamped to `[0, I]`.
pub fn local_search_count(f_c: f64, f_best_prev: f64, g: usize, g_max: usize, size: usize) -> usize {
    if f_best_prev == 0.0 || g >= g_max || g_max == 0 {
        return 0;
    }
    let raw = f_c * (g_max - g) as f64 * size as f64 / (f_best_prev * g_max as f64);
    if !(raw > 0.0) {
        return 0;
    }
    (raw.floor() as usize).min(size)
}

/// Gaussian neighbour `x + ξ`, `ξ ~ N(0, σ̃²)` per entry, then repaired.
pub fn perturb<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R, layout: &Layout) -> Vec<f64> {
    let mut y: Vec<f64> = x
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    repair(&mut y, x, layout);
    y
}

/// A parameter pair that produced a strictly better trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Success {
    pub cr: f64,
    pub f: f64,
    pub improvement: f64,
}

/// Success-history memories `MCR`, `MF` with a circular write slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMemory {
    pub mcr: Vec<f64>,
    pub mf: Vec<f64>,
    pub slot: usize,
    pub cr_init: f64,
    pub f_init: f64,
}

impl ParamMemory {
    pub fn new(len: usize, cr_init: f64, f_init: f64) -> Self {
        Self { mcr: vec![cr_init; len], mf: vec![f_init; len], slot: 0, cr_init, f_init }
    }

    /// Draws `(CR, F)` around a uniformly chosen memory slot; any draw
    /// outside `[0, 1]` is replaced by the initial value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let r = rng.random_range(0..self.mcr.len());
        let draw = |rng: &mut R, mean: f64, init: f64| {
            let v = Normal::new(mean, PARAM_STD).expect("finite mean").sample(rng);
            if (0.0..=1.0).contains(&v) {
                v
            } else {
                init
            }
        };
        let cr = draw(rng, self.mcr[r], self.cr_init);
        let f = draw(rng, self.mf[r], self.f_init);
        (cr, f)
    }

    /// Writes the improvement-weighted means of this generation's successes
    /// (Lehmer for F, arithmetic for CR) into the next slot.
    pub fn update(&mut self, successes: &[Success]) {
        let total: f64 = successes.iter().map(|s| s.improvement).sum();
        if successes.is_empty() || !(total > 0.0) {
            return;
        }
        let mut cr = 0.0;
        let (mut f2, mut f1) = (0.0, 0.0);
        for s in successes {
            let w = s.improvement / total;
            cr += w * s.cr;
            f2 += w * s.f * s.f;
            f1 += w * s.f;
        }
        self.mcr[self.slot] = cr;
        if f1 > 0.0 {
            self.mf[self.slot] = f2 / f1;
        }
        self.slot = (self.slot + 1) % self.mcr.len();
    }
}
