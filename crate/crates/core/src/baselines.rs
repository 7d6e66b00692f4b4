//! Comparison optimizers sharing the encoding and fitness of the improved DE:
//! canonical DE, a real-coded GA, and random phases with RZF precoding.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encode::{random_vector, repair};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linkmath::Precoder;
use crate::optim::{DeConfig, ImprovedDe, Objective, OptimizerState, Problem, Solution, TraceRow};
use crate::rng::{stream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    ImprovedDe,
    CanonicalDe,
    Ga,
    RandomRzf,
}

impl Optimizer {
    pub const ALL: [Optimizer; 4] = [Optimizer::ImprovedDe, Optimizer::CanonicalDe, Optimizer::Ga, Optimizer::RandomRzf];

    pub fn name(self) -> &'static str {
        match self {
            Optimizer::ImprovedDe => "improved_de",
            Optimizer::CanonicalDe => "canonical_de",
            Optimizer::Ga => "ga",
            Optimizer::RandomRzf => "random_rzf",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Optimizer::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown optimizer '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub g_max: usize,
    pub nfe_max: usize,
    pub tournament: usize,
    pub crossover_prob: f64,
    /// BLX-α blend range.
    pub blx_alpha: f64,
    /// Per-entry mutation probability; `None` means `1/dim`.
    pub mutation_prob: Option<f64>,
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 40,
            g_max: usize::MAX,
            nfe_max: 35_000,
            tournament: 2,
            crossover_prob: 1.0,
            blx_alpha: 0.5,
            mutation_prob: None,
            mutation_sigma: 0.1,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    /// Same population, budget and seed as a DE configuration.
    pub fn matched(de: &DeConfig) -> Self {
        Self { population: de.population, nfe_max: de.nfe_max, seed: de.seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.elitism >= self.population || self.tournament < 1 {
            return Err(Error::Config("GA needs population >= 2, elitism < population and tournament >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || self.mutation_prob.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("GA probabilities must lie in [0, 1]".into()));
        }
        if self.nfe_max < self.population {
            return Err(Error::Config("NFE_max cannot cover the initial population".into()));
        }
        Ok(())
    }
}

/// Result of any optimizer on a [`Problem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub optimizer: Optimizer,
    pub solution: Solution,
    /// Average analytical SER of the solution on the true channel.
    pub true_avg_ser: f64,
    pub trace: Vec<TraceRow>,
    pub nfe: usize,
}

fn finish(optimizer: Optimizer, problem: &Problem, x: &[f64], trace: Vec<TraceRow>, nfe: usize) -> Result<RunOutcome> {
    Ok(RunOutcome {
        optimizer,
        solution: problem.decode(x)?,
        true_avg_ser: problem.true_avg_ser(x),
        trace,
        nfe,
    })
}

fn from_state(optimizer: Optimizer, problem: &Problem, s: OptimizerState) -> Result<RunOutcome> {
    finish(optimizer, problem, &s.best_x, s.trace, s.nfe)
}

/// Runs `optimizer` with budgets taken from `de` (GA and canonical DE get the
/// same population, evaluation budget and seed).
pub fn run(optimizer: Optimizer, problem: &Problem, de: &DeConfig, exec: Execution) -> Result<RunOutcome> {
    match optimizer {
        Optimizer::ImprovedDe => from_state(optimizer, problem, ImprovedDe::new(de.clone(), exec)?.run(problem)?),
        Optimizer::CanonicalDe => canonical_de(problem, de, exec),
        Optimizer::Ga => ga(problem, &GaConfig::matched(de), exec),
        Optimizer::RandomRzf => random_rzf(problem, de.seed),
    }
}

pub fn canonical_de(problem: &Problem, de: &DeConfig, exec: Execution) -> Result<RunOutcome> {
    let state = ImprovedDe::new(de.canonical(), exec)?.run(problem)?;
    from_state(Optimizer::CanonicalDe, problem, state)
}

/// Uniform random phases with RZF beamformers: one evaluation, no search.
pub fn random_rzf(problem: &Problem, seed: u64) -> Result<RunOutcome> {
    let view = problem.passive_view(Precoder::Rzf);
    let phases = random_vector(&mut stream(seed, &[tag::PHASES]), problem.dims().elements);
    let fit = view.evaluate(&phases);
    let trace = vec![TraceRow::from_fitness(0, &[fit], 0, 1)];
    finish(Optimizer::RandomRzf, &view, &phases, trace, 1)
}

fn tournament<R: Rng + ?Sized>(rng: &mut R, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

/// Generic real-coded GA: tournament selection, BLX-α crossover, Gaussian
/// mutation, the same wrap/clamp repairs as DE, and elitism.
pub fn ga_minimize<O: Objective>(obj: &O, cfg: &GaConfig, exec: Execution) -> Result<OptimizerState> {
    cfg.validate()?;
    let layout = obj.layout();
    let dim = layout.len();
    let pm = cfg.mutation_prob.unwrap_or(1.0 / dim.max(1) as f64);
    let size = cfg.population;

    let mut population: Vec<Vec<f64>> = (0..size)
        .map(|i| random_vector(&mut stream(cfg.seed, &[tag::INIT, i as u64]), dim))
        .collect();
    let mut fitness = exec.map(size, |i| obj.evaluate(&population[i]));
    let mut nfe = size;
    let mut trace = vec![TraceRow::from_fitness(0, &fitness, 0, nfe)];
    let children = size - cfg.elitism;
    let mut generation = 1;

    while generation <= cfg.g_max && nfe + children <= cfg.nfe_max {
        let (pop, fit) = (&population, &fitness);
        let g = generation as u64;
        let offspring = exec.map(children, |i| {
            let mut rng = stream(cfg.seed, &[tag::GA, g, i as u64]);
            let a = &pop[tournament(&mut rng, fit, cfg.tournament)];
            let b = &pop[tournament(&mut rng, fit, cfg.tournament)];
            let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_prob {
                a.iter()
                    .zip(b)
                    .map(|(&p, &q)| {
                        let (lo, hi) = (p.min(q), p.max(q));
                        let ext = cfg.blx_alpha * (hi - lo);
                        if hi - lo > 0.0 {
                            rng.random_range(lo - ext..hi + ext)
                        } else {
                            lo
                        }
                    })
                    .collect()
            } else {
                a.clone()
            };
            for v in child.iter_mut() {
                if rng.random::<f64>() < pm {
                    *v += cfg.mutation_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            repair(&mut child, a, &layout);
            let f = obj.evaluate(&child);
            (child, f)
        });
        nfe += children;

        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&i, &j| fitness[i].total_cmp(&fitness[j]).then(i.cmp(&j)));
        let mut next_pop = Vec::with_capacity(size);
        let mut next_fit = Vec::with_capacity(size);
        for &i in &order[..cfg.elitism] {
            next_pop.push(population[i].clone());
            next_fit.push(fitness[i]);
        }
        for (c, f) in offspring {
            next_pop.push(c);
            next_fit.push(f);
        }
        population = next_pop;
        fitness = next_fit;
        trace.push(TraceRow::from_fitness(generation, &fitness, 0, nfe));
        generation += 1;
    }

    let best = (0..size).min_by(|&i, &j| fitness[i].total_cmp(&fitness[j])).unwrap_or(0);
    let de_view = DeConfig { population: size, seed: cfg.seed, nfe_max: cfg.nfe_max, ..DeConfig::default() };
    Ok(OptimizerState {
        memory: crate::optim::operators::ParamMemory::new(1, de_view.cr_init, de_view.f_init),
        config: de_view,
        best_x: population[best].clone(),
        best_fitness: fitness[best],
        population,
        fitness,
        successes: Vec::new(),
        generation,
        nfe,
        stall: 0,
        trace,
        termination: None,
    })
}

pub fn ga(problem: &Problem, cfg: &GaConfig, exec: Execution) -> Result<RunOutcome> {
    let state = ga_minimize(problem, cfg, exec)?;
    from_state(Optimizer::Ga, problem, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_rayleigh, LargeScale, SystemDims};
    use crate::linkmath::{FitnessMode, LinkBudget};
    use crate::optim::Mode;

    fn problem(seed: u64) -> Problem {
        let dims = SystemDims::new(4, 8, 2).unwrap();
        let ch = gen_rayleigh(dims, &LargeScale::unit(2), seed).unwrap();
        Problem::new(&ch, LinkBudget::from_snr_db(0.0), 16, Mode::Joint, FitnessMode::AvgSer).unwrap()
    }

    fn small() -> DeConfig {
        DeConfig { population: 12, g_max: 40, nfe_max: 800, seed: 3, ..DeConfig::default() }
    }

    #[test]
    fn random_rzf_is_one_deterministic_evaluation() {
        let p = problem(1);
        let a = random_rzf(&p, 9).unwrap();
        assert_eq!(a, random_rzf(&p, 9).unwrap());
        assert_ne!(a.solution.x, random_rzf(&p, 10).unwrap().solution.x);
        assert_eq!(a.nfe, 1);
        assert_eq!(a.solution.x.len(), 8);
        assert_eq!(a.solution.fitness, p.passive_view(Precoder::Rzf).evaluate(&a.solution.x));
    }

    #[test]
    fn every_trace_is_elitist() {
        let p = problem(2);
        for o in [Optimizer::ImprovedDe, Optimizer::CanonicalDe, Optimizer::Ga] {
            let r = run(o, &p, &small(), Execution::Sequential).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best), "{o:?}");
            assert!(r.nfe <= 800, "{o:?} used {}", r.nfe);
            assert_eq!(r.solution.fitness, r.trace.last().unwrap().best);
            assert_eq!(r.true_avg_ser, r.solution.fitness);
        }
    }

    #[test]
    fn canonical_de_spends_the_budget() {
        let r = canonical_de(&problem(3), &small(), Execution::Sequential).unwrap();
        assert!(r.nfe > 800 - 12);
        assert!(r.trace.iter().all(|t| t.lambda == 0));
    }

    #[test]
    fn ga_is_deterministic_and_parallel_safe() {
        let p = problem(4);
        let cfg = GaConfig::matched(&small());
        let a = ga(&p, &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, ga(&p, &cfg, Execution::Parallel).unwrap());
        assert!(a.solution.x.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn names_round_trip() {
        for o in Optimizer::ALL {
            assert_eq!(o.name().parse::<Optimizer>().unwrap(), o);
        }
    }
}
