use crate::baselines::Optimizer;
use crate::linkmath::{FitnessMode, Precoder};
use crate::optim::Mode;

use super::config::{ChannelModel, ExperimentConfig, ExperimentKind, ModeName, OptimizerSpec};

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Recipe {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

fn spec(optimizer: Optimizer, mode: Mode, fitness: FitnessMode) -> OptimizerSpec {
    OptimizerSpec { optimizer, mode: ModeName(mode), fitness }
}

fn joint(optimizer: Optimizer) -> OptimizerSpec {
    spec(optimizer, Mode::Joint, FitnessMode::AvgSer)
}

fn db_range(lo: i32, hi: i32, step: i32) -> Vec<f64> {
    (lo..=hi).step_by(step as usize).map(f64::from).collect()
}

fn fig3() -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Linear,
        users: vec![2, 4],
        rho_db: db_range(0, 20, 4),
        n_symbols: 100_000,
        ..ExperimentConfig::default()
    }
}

fn fig5() -> ExperimentConfig {
    ExperimentConfig {
        optimizers: vec![joint(Optimizer::ImprovedDe), joint(Optimizer::CanonicalDe), joint(Optimizer::Ga)],
        traces: true,
        ..ExperimentConfig::default()
    }
}

fn fig6() -> ExperimentConfig {
    ExperimentConfig {
        rho_db: db_range(0, 20, 5),
        optimizers: vec![
            joint(Optimizer::ImprovedDe),
            joint(Optimizer::CanonicalDe),
            joint(Optimizer::Ga),
            joint(Optimizer::RandomRzf),
        ],
        ..ExperimentConfig::default()
    }
}

fn fig7() -> ExperimentConfig {
    ExperimentConfig {
        elements: vec![0, 8, 16, 32, 64],
        rho_db: vec![5.0],
        ..ExperimentConfig::default()
    }
}

fn fig8() -> ExperimentConfig {
    ExperimentConfig {
        rho_db: db_range(0, 15, 5),
        optimizers: [FitnessMode::AvgSer, FitnessMode::SumRate, FitnessMode::MinSinr]
            .into_iter()
            .map(|f| spec(Optimizer::ImprovedDe, Mode::Joint, f))
            .collect(),
        ..ExperimentConfig::default()
    }
}

fn csi() -> ExperimentConfig {
    ExperimentConfig {
        rho_db: vec![10.0],
        sigma_e2: vec![0.0, 0.01, 0.05, 0.1],
        optimizers: vec![joint(Optimizer::ImprovedDe), joint(Optimizer::RandomRzf)],
        ..ExperimentConfig::default()
    }
}

fn fig9() -> ExperimentConfig {
    let mut cfg = ExperimentConfig { rho_db: vec![5.0], ..ExperimentConfig::default() };
    cfg.channel.model = ChannelModel::Rician;
    cfg.channel.specular = vec![0, 1, 2, 3];
    cfg
}

fn table1() -> ExperimentConfig {
    ExperimentConfig {
        rho_db: db_range(0, 20, 5),
        optimizers: vec![
            joint(Optimizer::ImprovedDe),
            spec(Optimizer::ImprovedDe, Mode::PassiveOnly(Precoder::Rzf), FitnessMode::AvgSer),
        ],
        ..ExperimentConfig::default()
    }
}

/// Large system (M=100, N up to 256); runs take hours.
fn full_scale(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.antennas = vec![100];
    cfg.elements = if cfg.elements.len() > 1 { vec![0, 64, 128, 256] } else { vec![256] };
    cfg.users = vec![2, 10, 50];
    cfg.channel.beta_ris_user = 1.0 / (100.0 * 257.0);
    cfg.channel.beta_bs_user = cfg.channel.beta_ris_user;
    cfg
}

pub const RECIPES: &[Recipe] = &[
    Recipe { name: "fig3", summary: "analytic vs Monte-Carlo SER of MRT/ZF/RZF with random phases", build: fig3 },
    Recipe { name: "fig5", summary: "convergence traces of improved DE, canonical DE and GA", build: fig5 },
    Recipe { name: "fig6", summary: "SER vs rho/sigma^2 for all optimizers and random phases + RZF", build: fig6 },
    Recipe { name: "fig7", summary: "SER vs number of RIS elements", build: fig7 },
    Recipe { name: "fig8", summary: "average-SER fitness vs sum-rate and min-SINR objectives", build: fig8 },
    Recipe { name: "csi", summary: "SER under imperfect CSI for several error variances", build: csi },
    Recipe { name: "fig9", summary: "Rician fading with 0..3 specular paths", build: fig9 },
    Recipe { name: "table1", summary: "joint design vs RIS phases with RZF precoding", build: table1 },
    Recipe { name: "full-fig6", summary: "fig6 at M=100, N=256, K in {2,10,50} (hours)", build: || full_scale(fig6()) },
    Recipe { name: "full-fig7", summary: "fig7 at M=100, K in {2,10,50} (hours)", build: || full_scale(fig7()) },
    Recipe { name: "full-table1", summary: "table1 at M=100, N=256, K in {2,10,50} (hours)", build: || full_scale(table1()) },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}
