//! Experiment orchestration: sweeps, persistence, replay and plots.
//!
//! Every sweep point × channel realization is an independent job with its
//! own random streams, so jobs may run concurrently; their rows are written
//! in job order through one sink, making output files byte-reproducible.

pub mod config;
pub mod output;
pub mod plot;
pub mod recipes;

use std::path::{Path, PathBuf};

use crate::baselines::{self, RunOutcome};
use crate::channel::{gen_rayleigh, gen_rician, ChannelRealization, LargeScale, PhaseVector, RicianConfig, SystemDims};
use crate::encode::random_vector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linkmath::{precode, sinr_linear, LinkBudget, SerModel};
use crate::modem::Constellation;
use crate::optim::{write_trace_csv, Problem};
use crate::rng::{derive_seed, stream, tag};
use crate::simulate::{simulate, write_ser_csv, SerRow, Symbols};

use config::{ChannelModel, ExperimentConfig, ExperimentKind};
use output::{Manifest, Row};

/// One (system, channel, link) point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub dims: SystemDims,
    pub specular: usize,
    pub sigma_e2: f64,
    pub rho_db: f64,
    pub realization: usize,
}

impl Point {
    pub fn budget(&self, p_max: f64) -> LinkBudget {
        LinkBudget { rho: p_max, sigma2: p_max * 10f64.powf(-self.rho_db / 10.0), p_max }
    }
}

pub fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let specular = match cfg.channel.model {
        ChannelModel::Rayleigh => vec![0],
        ChannelModel::Rician => cfg.channel.specular.clone(),
    };
    let mut out = Vec::new();
    for &m in &cfg.antennas {
        for &n in &cfg.elements {
            for &k in &cfg.users {
                for &s in &specular {
                    for &e in &cfg.sigma_e2 {
                        for &rho in &cfg.rho_db {
                            for r in 0..cfg.realizations {
                                out.push(Point {
                                    dims: SystemDims { antennas: m, elements: n, users: k },
                                    specular: s,
                                    sigma_e2: e,
                                    rho_db: rho,
                                    realization: r,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn realization_seed(root: u64, realization: usize) -> u64 {
    derive_seed(root, &[tag::REALIZATION, realization as u64])
}

pub fn channel_for(cfg: &ExperimentConfig, p: &Point, seed: u64) -> Result<ChannelRealization> {
    let c = &cfg.channel;
    let ls = LargeScale::uniform(p.dims.users, c.beta_bs_ris, c.beta_ris_user, c.beta_bs_user);
    match c.model {
        ChannelModel::Rayleigh => gen_rayleigh(p.dims, &ls, seed),
        ChannelModel::Rician => {
            let rc = RicianConfig {
                specular_bs_user: p.specular,
                specular_ris_user: p.specular,
                specular_bs_ris: p.specular,
                ..c.rician.clone()
            };
            gen_rician(p.dims, &rc, &ls, seed)
        }
    }
}

/// Rows, per-user simulated SERs and side files produced by one job.
#[derive(Default)]
struct JobOutput {
    rows: Vec<Row>,
    users: Vec<SerRow>,
    traces: Vec<(String, Vec<u8>)>,
    channel: Option<Vec<u8>>,
    errors: Vec<String>,
}

struct Job<'a> {
    cfg: &'a ExperimentConfig,
    recipe: &'a str,
    point: Point,
    seed: u64,
    index: usize,
}

impl Job<'_> {
    fn row(&self, scheme: &str, metric: &str, value: f64) -> Row {
        let p = &self.point;
        Row {
            recipe: self.recipe.to_string(),
            seed: self.seed,
            scheme: scheme.to_string(),
            m_antennas: p.dims.antennas,
            n_elements: p.dims.elements,
            k_users: p.dims.users,
            order: self.cfg.order,
            rho_db: p.rho_db,
            sigma_e2: p.sigma_e2,
            specular: p.specular,
            metric: metric.to_string(),
            value,
        }
    }

    fn fail(&self, out: &mut JobOutput, scheme: &str, e: &Error) {
        out.rows.push(self.row(scheme, "error", f64::NAN));
        out.errors.push(format!("job {} ({scheme}, {:?}): {e}", self.index, self.point));
    }

    fn run(&self, inner: Execution) -> JobOutput {
        let mut out = JobOutput::default();
        let ch = match channel_for(self.cfg, &self.point, self.seed) {
            Ok(ch) => ch,
            Err(e) => {
                self.fail(&mut out, "channel", &e);
                return out;
            }
        };
        if self.cfg.channel_dumps {
            out.channel = serde_json::to_vec(&ch).ok();
        }
        match self.cfg.kind {
            ExperimentKind::Linear => self.linear(&ch, inner, &mut out),
            ExperimentKind::Optimize => self.optimize(&ch, inner, &mut out),
        }
        out
    }

    fn simulate_into(
        &self,
        out: &mut JobOutput,
        scheme: &str,
        agg: &crate::channel::AggregatedChannel,
        bf: &crate::linkmath::BeamformerSet,
        budget: &LinkBudget,
        inner: Execution,
    ) -> Result<()> {
        if self.cfg.n_symbols == 0 {
            return Ok(());
        }
        let c = Constellation::new(self.cfg.order)?;
        let mc_seed = derive_seed(self.seed, &[tag::SYMBOLS]);
        let report = simulate(agg, bf, budget, &c, self.cfg.n_symbols, Symbols::Uniform, mc_seed, inner)?;
        out.rows.push(self.row(scheme, "ser_mc", report.avg_ser));
        let mut users = report.rows(scheme, self.point.dims, self.cfg.order, self.point.rho_db);
        users.iter_mut().for_each(|u| u.seed = self.seed);
        out.users.extend(users);
        Ok(())
    }

    fn linear(&self, ch: &ChannelRealization, inner: Execution, out: &mut JobOutput) {
        let p = &self.point;
        let budget = p.budget(self.cfg.p_max);
        let theta: Vec<f64> = random_vector(&mut stream(self.seed, &[tag::PHASES]), p.dims.elements)
            .into_iter()
            .map(|v| v * std::f64::consts::PI)
            .collect();
        let agg = match PhaseVector::new(theta).and_then(|t| crate::channel::aggregate(ch, &t)) {
            Ok(a) => a,
            Err(e) => return self.fail(out, "phases", &e),
        };
        let model = SerModel::new(self.cfg.order).expect("validated order");
        for &scheme in &self.cfg.schemes {
            let name = scheme.name();
            let result = (|| -> Result<()> {
                let sers = (0..p.dims.users)
                    .map(|k| Ok(model.ser(sinr_linear(&agg, scheme, &budget, k)?)))
                    .collect::<Result<Vec<f64>>>()?;
                let bf = precode(&agg, scheme, &budget)?;
                out.rows.push(self.row(name, "ser_analytic", sers.iter().sum::<f64>() / sers.len() as f64));
                self.simulate_into(out, name, &agg, &bf, &budget, inner)
            })();
            if let Err(e) = result {
                self.fail(out, name, &e);
            }
        }
    }

    fn optimize(&self, ch: &ChannelRealization, inner: Execution, out: &mut JobOutput) {
        let p = &self.point;
        let budget = p.budget(self.cfg.p_max);
        for spec in &self.cfg.optimizers {
            let label = spec.label();
            let result = (|| -> Result<()> {
                let problem = Problem::new(ch, budget, self.cfg.order, spec.mode.0, spec.fitness)?
                    .with_csi_error(p.sigma_e2, derive_seed(self.seed, &[tag::CSI]))?;
                let de = crate::optim::DeConfig { seed: self.seed, ..self.cfg.de.clone() };
                let outcome: RunOutcome = baselines::run(spec.optimizer, &problem, &de, inner)?;
                out.rows.push(self.row(&label, "ser_analytic", outcome.true_avg_ser));
                out.rows.push(self.row(&label, "fitness", outcome.solution.fitness));
                out.rows.push(self.row(&label, "nfe", outcome.nfe as f64));
                if self.cfg.traces {
                    let mut buf = Vec::new();
                    write_trace_csv(&outcome.trace, &mut buf)?;
                    out.traces.push((label.clone(), buf));
                }
                let n = p.dims.elements;
                let truth = problem.true_channel(&outcome.solution.x[..n]);
                self.simulate_into(out, &label, &truth, &outcome.solution.beams, &budget, inner)
            })();
            if let Err(e) = result {
                self.fail(out, &label, &e);
            }
        }
    }
}

/// File-name-safe form of a scheme label.
pub fn label_slug(label: &str) -> String {
    label.replace('/', "+")
}

pub const SUBSTITUTIONS: &[&str] = &[
    "large-scale gains are uniform across users (channel.beta_*), chosen so E||z_k||^2 = 1 at the default size",
    "rho = P_max; the noise variance sets rho/sigma^2",
    "SER argument sqrt(3*SINR/(2(m-1))) (exact for circular Gaussian noise)",
    "improved DE: population 100, memory 10, sigma_tilde 0.02; canonical DE and GA spend the same NFE budget",
    "Rician BS/RIS geometry: half-wavelength ULA at the BS, square half-wavelength UPA at the RIS",
];

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: usize,
    pub errors: Vec<String>,
}

/// Runs `cfg` and writes results, side files and the manifest into `out`.
pub fn run_experiment(recipe: &str, cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let pts = points(cfg);
    let (outer, inner) = if cfg.parallel {
        (Execution::Parallel, Execution::Sequential)
    } else {
        (Execution::Sequential, Execution::Sequential)
    };
    let outputs = outer.map(pts.len(), |i| {
        Job { cfg, recipe, point: pts[i], seed: realization_seed(seed, pts[i].realization), index: i }.run(inner)
    });

    let mut rows = Vec::new();
    let mut users = Vec::new();
    let mut errors = Vec::new();
    for (i, o) in outputs.into_iter().enumerate() {
        rows.extend(o.rows);
        users.extend(o.users);
        errors.extend(o.errors);
        for (label, bytes) in o.traces {
            let dir = out.join(output::TRACE_DIR);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(format!("{}__{i:05}.csv", label_slug(&label))), bytes)?;
        }
        if let Some(bytes) = o.channel {
            let dir = out.join(output::CHANNEL_DIR);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(format!("{i:05}.json")), bytes)?;
        }
    }
    output::write_rows(&out.join(output::RESULTS_FILE), &rows)?;
    if !users.is_empty() {
        write_ser_csv(&users, std::fs::File::create(out.join(output::USER_SER_FILE))?)?;
    }
    std::fs::write(out.join(output::CONSTELLATION_FILE), Constellation::new(cfg.order)?.to_json()?)?;
    let config_text = cfg.to_toml()?;
    std::fs::write(out.join(output::CONFIG_FILE), &config_text)?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        git_describe: output::git_describe(),
        recipe: recipe.into(),
        seed,
        config_sha256: output::sha256_hex(config_text.as_bytes()),
        config: config_text,
        rows: rows.len(),
        errors: errors.clone(),
        substitutions: SUBSTITUTIONS.iter().map(|s| s.to_string()).collect(),
        files: output::hash_tree(out)?,
    };
    manifest.save(&out.join(output::MANIFEST_FILE))?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows: rows.len(), errors })
}

/// Re-runs a manifest into `out`; returns the files whose hashes differ.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Vec<String>> {
    let m = Manifest::load(manifest_path)?;
    if output::sha256_hex(m.config.as_bytes()) != m.config_sha256 {
        return Err(Error::Config("manifest config does not match its hash".into()));
    }
    let cfg = config::resolve(&ExperimentConfig::default(), Some(&m.config), &[])?;
    run_experiment(&m.recipe, &cfg, m.seed, out)?;
    let fresh = output::hash_tree(out)?;
    let mut diff: Vec<String> = m
        .files
        .iter()
        .filter(|f| !fresh.contains(f))
        .map(|f| f.path.clone())
        .collect();
    diff.extend(fresh.iter().filter(|f| !m.files.iter().any(|g| g.path == f.path)).map(|f| f.path.clone()));
    Ok(diff)
}
