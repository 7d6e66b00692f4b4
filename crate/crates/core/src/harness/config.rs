use serde::{Deserialize, Serialize};

use crate::baselines::Optimizer;
use crate::channel::RicianConfig;
use crate::error::{Error, Result};
use crate::linkmath::{FitnessMode, Precoder};
use crate::optim::{DeConfig, Mode};

/// What an experiment does at each sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Random RIS phases with the linear precoders: analytic vs simulated SER.
    Linear,
    /// Run optimizers and evaluate their solutions.
    Optimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    Rayleigh,
    Rician,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    /// Linear large-scale gains, identical for every user.
    pub beta_bs_ris: f64,
    pub beta_ris_user: f64,
    pub beta_bs_user: f64,
    /// Specular path counts to sweep (Rician only).
    pub specular: Vec<usize>,
    pub rician: RicianConfig,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        // With β_BS-RIS = 1 and β_RIS-user = β_BS-user = 1/528, M = 16 and
        // N = 32 give E‖z_k‖² = M(β + Nβ) = 1.
        let beta = 1.0 / 528.0;
        Self {
            model: ChannelModel::Rayleigh,
            beta_bs_ris: 1.0,
            beta_ris_user: beta,
            beta_bs_user: beta,
            specular: vec![0],
            rician: RicianConfig::default(),
        }
    }
}

/// One optimizer run per sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub optimizer: Optimizer,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default)]
    pub fitness: FitnessMode,
}

impl OptimizerSpec {
    pub fn label(&self) -> String {
        match self.optimizer {
            Optimizer::RandomRzf => self.optimizer.name().to_string(),
            o => format!("{}/{}/{}", o.name(), self.mode.0.name(), self.fitness.name()),
        }
    }
}

/// [`Mode`] written as a plain string (`joint`, `passive_rzf`, ...).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModeName(pub Mode);

impl TryFrom<String> for ModeName {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Ok(ModeName(s.parse()?))
    }
}

impl From<ModeName> for String {
    fn from(m: ModeName) -> String {
        m.0.name()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub antennas: Vec<usize>,
    pub elements: Vec<usize>,
    pub users: Vec<usize>,
    pub order: u32,
    /// ρ/σ² sweep in dB (ρ = P_max, σ² = P_max·10^(−dB/10)).
    pub rho_db: Vec<f64>,
    pub p_max: f64,
    pub sigma_e2: Vec<f64>,
    pub realizations: usize,
    /// Monte-Carlo symbols per user; 0 skips simulation.
    pub n_symbols: usize,
    pub schemes: Vec<Precoder>,
    pub optimizers: Vec<OptimizerSpec>,
    pub de: DeConfig,
    pub channel: ChannelConfig,
    /// Write one trace CSV per optimizer run.
    pub traces: bool,
    /// Write a JSON dump of every channel realization.
    pub channel_dumps: bool,
    /// Run sweep points concurrently.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Optimize,
            antennas: vec![16],
            elements: vec![32],
            users: vec![2],
            order: 16,
            rho_db: vec![0.0],
            p_max: 1.0,
            sigma_e2: vec![0.0],
            realizations: 10,
            n_symbols: 0,
            schemes: vec![Precoder::Mrt, Precoder::Zf, Precoder::Rzf],
            optimizers: vec![OptimizerSpec {
                optimizer: Optimizer::ImprovedDe,
                mode: ModeName(Mode::Joint),
                fitness: FitnessMode::AvgSer,
            }],
            de: DeConfig::default(),
            channel: ChannelConfig::default(),
            traces: false,
            channel_dumps: false,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("antennas", self.antennas.is_empty()),
            ("elements", self.elements.is_empty()),
            ("users", self.users.is_empty()),
            ("rho_db", self.rho_db.is_empty()),
            ("sigma_e2", self.sigma_e2.is_empty()),
            ("channel.specular", self.channel.specular.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("sweep '{name}' is empty")));
        }
        if self.realizations == 0 {
            return Err(Error::Config("need at least one channel realization".into()));
        }
        match self.kind {
            ExperimentKind::Linear if self.schemes.is_empty() => {
                return Err(Error::Config("linear experiment lists no precoders".into()))
            }
            ExperimentKind::Optimize if self.optimizers.is_empty() => {
                return Err(Error::Config("optimize experiment lists no optimizers".into()))
            }
            _ => {}
        }
        if self.antennas.contains(&0) || self.users.contains(&0) {
            return Err(Error::Config("antennas and users must be positive".into()));
        }
        if !(self.p_max > 0.0) || self.rho_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("p_max must be positive and rho_db finite".into()));
        }
        if self.sigma_e2.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("sigma_e2 values must be >= 0".into()));
        }
        crate::linkmath::SerModel::new(self.order)?;
        self.de.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Recipe defaults, then the config file, then `key=value` overrides.
pub fn resolve(defaults: &ExperimentConfig, file: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value = toml::Table::try_from(defaults).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(text) = file {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        merge(&mut value, user);
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(value)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `a.b.c=value`; the value is read as TOML, falling back to a bare string.
pub fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override '{spec}' is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut table = root;
    for k in parents {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{k}' in '{path}' is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
