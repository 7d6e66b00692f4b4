use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::operators::{crossover_binomial, local_search_count, mutate_best1, perturb, pick_pair, select, ParamMemory, Success};
use super::trace::TraceRow;
use super::Objective;
use crate::encode::random_vector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{stream, tag};

/// Best-fitness changes below this count as "unchanged" for stall detection.
pub const STALL_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    /// Population size `I`.
    pub population: usize,
    /// Success-history memory length `H`.
    pub memory: usize,
    pub f_init: f64,
    pub cr_init: f64,
    pub g_max: usize,
    pub nfe_max: usize,
    pub stall_generations: usize,
    /// Local-search standard deviation `σ̃`.
    pub sigma_tilde: f64,
    pub seed: u64,
    /// Success-history adaptation of CR and F; off means fixed init values.
    pub adaptive: bool,
    pub local_search: bool,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 100,
            memory: 10,
            f_init: 0.1,
            cr_init: 0.9,
            g_max: 350,
            nfe_max: 35_000,
            stall_generations: 50,
            sigma_tilde: 0.02,
            seed: 0,
            adaptive: true,
            local_search: true,
        }
    }
}

impl DeConfig {
    /// DE/best/1 with fixed `F`, `CR`, no adaptation and no local search,
    /// running until the evaluation budget is spent.
    pub fn canonical(&self) -> Self {
        Self {
            adaptive: false,
            local_search: false,
            g_max: self.nfe_max / self.population.max(1),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.population < 4 {
            return bad("population must hold at least 4 individuals");
        }
        if self.memory < 1 {
            return bad("memory length must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.f_init) || !(0.0..=1.0).contains(&self.cr_init) {
            return bad("F_init and CR_init must lie in [0, 1]");
        }
        if !(self.sigma_tilde > 0.0 && self.sigma_tilde.is_finite()) {
            return bad("sigma_tilde must be positive");
        }
        if self.nfe_max < self.population {
            return bad("NFE_max cannot cover the initial population");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxGenerations,
    MaxEvaluations,
    Stalled,
}

/// What happened in one generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationReport {
    pub generation: usize,
    /// Best fitness entering the generation.
    pub f_best_prev: f64,
    /// Best fitness after selection, before local search.
    pub f_c: f64,
    /// Local-search probes spent.
    pub lambda: usize,
    /// Evaluation budget left before local search.
    pub budget_left: usize,
}

/// Everything needed to continue a run; written between generations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: DeConfig,
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub memory: ParamMemory,
    /// Successes of the generation in progress (empty between generations).
    pub successes: Vec<Success>,
    pub best_x: Vec<f64>,
    pub best_fitness: f64,
    /// Index of the next generation to run.
    pub generation: usize,
    pub nfe: usize,
    pub stall: usize,
    pub trace: Vec<TraceRow>,
    pub termination: Option<Termination>,
}

impl OptimizerState {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    fn refresh_best(&mut self) {
        let i = argmin(&self.fitness);
        if self.fitness[i] < self.best_fitness || self.best_x.is_empty() {
            self.best_fitness = self.fitness[i];
            self.best_x.clone_from(&self.population[i]);
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in v.iter().enumerate() {
        if f < v[best] {
            best = i;
        }
    }
    best
}

/// Differential evolution with DE/best/1 mutation, binomial crossover,
/// success-history parameter adaptation and a shrinking Gaussian local search.
#[derive(Clone, Debug)]
pub struct ImprovedDe {
    pub config: DeConfig,
    pub exec: Execution,
}

impl ImprovedDe {
    pub fn new(config: DeConfig, exec: Execution) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, exec })
    }

    pub fn init<O: Objective>(&self, obj: &O) -> OptimizerState {
        let c = &self.config;
        let len = obj.layout().len();
        let population: Vec<Vec<f64>> = (0..c.population)
            .map(|i| random_vector(&mut stream(c.seed, &[tag::INIT, i as u64]), len))
            .collect();
        let fitness = self.exec.map(c.population, |i| obj.evaluate(&population[i]));
        let mut state = OptimizerState {
            config: c.clone(),
            trace: vec![TraceRow::from_fitness(0, &fitness, 0, c.population)],
            population,
            fitness,
            memory: ParamMemory::new(c.memory, c.cr_init, c.f_init),
            successes: Vec::new(),
            best_x: Vec::new(),
            best_fitness: f64::INFINITY,
            generation: 1,
            nfe: c.population,
            stall: 0,
            termination: None,
        };
        state.refresh_best();
        self.check_termination(&mut state);
        state
    }

    fn check_termination(&self, s: &mut OptimizerState) {
        let c = &self.config;
        s.termination = if s.stall >= c.stall_generations {
            Some(Termination::Stalled)
        } else if s.generation > c.g_max {
            Some(Termination::MaxGenerations)
        } else if s.nfe + c.population > c.nfe_max {
            Some(Termination::MaxEvaluations)
        } else {
            None
        };
    }

    /// Runs one generation. Mutation reads a frozen copy of the previous
    /// population; all randomness comes from `(seed, G, i)` sub-streams.
    pub fn step<O: Objective>(&self, obj: &O, s: &mut OptimizerState) -> Result<Option<GenerationReport>> {
        if s.is_finished() {
            return Ok(None);
        }
        let c = &self.config;
        let layout = obj.layout();
        let g = s.generation as u64;
        let size = c.population;
        let best = argmin(&s.fitness);
        let f_best_prev = s.fitness[best];

        let pop = &s.population;
        let memory = &s.memory;
        let offspring = self.exec.map(size, |i| -> Result<(Vec<f64>, f64, f64, f64)> {
            let mut rng = stream(c.seed, &[tag::TRIAL, g, i as u64]);
            let (cr, f) = if c.adaptive { memory.sample(&mut rng) } else { (c.cr_init, c.f_init) };
            let (r1, r2) = pick_pair(&mut rng, size, i);
            let mutant = mutate_best1(pop, best, i, r1, r2, f, &layout)?;
            let trial = crossover_binomial(&pop[i], &mutant, cr, &mut rng);
            let fit = obj.evaluate(&trial);
            Ok((trial, fit, cr, f))
        });
        s.nfe += size;

        for (i, o) in offspring.into_iter().enumerate() {
            let (trial, fit, cr, f) = o?;
            if select(s.fitness[i], fit) {
                if fit < s.fitness[i] {
                    s.successes.push(Success { cr, f, improvement: s.fitness[i] - fit });
                }
                s.population[i] = trial;
                s.fitness[i] = fit;
            }
        }
        if c.adaptive {
            let successes = std::mem::take(&mut s.successes);
            s.memory.update(&successes);
        }
        s.successes.clear();

        let f_c = s.fitness[argmin(&s.fitness)];
        let budget_left = c.nfe_max - s.nfe;
        let mut lambda = 0;
        if c.local_search {
            lambda = local_search_count(f_c, f_best_prev, s.generation, c.g_max, size).min(budget_left);
            let picked = sample(&mut stream(c.seed, &[tag::PICK, g]), size, lambda).into_vec();
            let pop = &s.population;
            let probes = self.exec.map(lambda, |j| {
                let mut rng = stream(c.seed, &[tag::LOCAL_SEARCH, g, j as u64]);
                let y = perturb(&pop[picked[j]], c.sigma_tilde, &mut rng, &layout);
                let fit = obj.evaluate(&y);
                (y, fit)
            });
            s.nfe += lambda;
            for (&i, (y, fit)) in picked.iter().zip(probes) {
                if fit < s.fitness[i] {
                    s.population[i] = y;
                    s.fitness[i] = fit;
                }
            }
        }

        let before = s.best_fitness;
        s.refresh_best();
        s.stall = if (before - s.best_fitness).abs() < STALL_EPS { s.stall + 1 } else { 0 };
        s.trace.push(TraceRow::from_fitness(s.generation, &s.fitness, lambda, s.nfe));
        let report = GenerationReport { generation: s.generation, f_best_prev, f_c, lambda, budget_left };
        s.generation += 1;
        self.check_termination(s);
        Ok(Some(report))
    }

    /// Continues `state` until a termination criterion fires.
    pub fn resume<O: Objective>(&self, obj: &O, mut state: OptimizerState) -> Result<OptimizerState> {
        if state.config != self.config {
            return Err(Error::Config("checkpoint was written with a different optimizer configuration".into()));
        }
        while !state.is_finished() {
            self.step(obj, &mut state)?;
        }
        Ok(state)
    }

    pub fn run<O: Objective>(&self, obj: &O) -> Result<OptimizerState> {
        let state = self.init(obj);
        self.resume(obj, state)
    }
}
