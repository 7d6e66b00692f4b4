//! Beamforming design problem and the adaptive differential evolution that
//! solves it.

mod de;
pub mod operators;
mod trace;

pub use de::{DeConfig, GenerationReport, ImprovedDe, OptimizerState, Termination};
pub use trace::{write_trace_csv, TraceRow};

use serde::{Deserialize, Serialize};

use crate::channel::{AggregatedChannel, CascadedChannel, ChannelRealization, PhaseVector, SystemDims};
use crate::cvec::CVec;
use crate::encode::{self, Layout};
use crate::error::{Error, Result};
use crate::linkmath::{precode, sinrs, BeamformerSet, FitnessMode, LinkBudget, Precoder, SerModel};

/// Anything the population-based optimizers can minimize over a box-bounded
/// real vector.
pub trait Objective: Sync {
    fn layout(&self) -> Layout;

    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Which variables the optimizer controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// RIS phases and all beamformers.
    #[default]
    Joint,
    /// RIS phases only; beamformers follow from a linear precoder.
    PassiveOnly(Precoder),
}

impl Mode {
    pub fn name(self) -> String {
        match self {
            Mode::Joint => "joint".into(),
            Mode::PassiveOnly(p) => format!("passive_{}", p.name()),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "joint" {
            return Ok(Mode::Joint);
        }
        let p = s
            .strip_prefix("passive_only(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("passive_"))
            .ok_or_else(|| Error::Parse(format!("unknown optimization mode '{s}'")))?;
        Ok(Mode::PassiveOnly(p.parse()?))
    }
}

/// Decoded candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub phases: PhaseVector,
    pub beams: BeamformerSet,
    pub fitness: f64,
}

/// One quasi-static channel realization with its link budget, modulation and
/// objective. With a CSI error set, the optimizer only sees `z_k + e_k`.
#[derive(Clone, Debug)]
pub struct Problem {
    cascade: CascadedChannel,
    budget: LinkBudget,
    model: SerModel,
    mode: Mode,
    fitness: FitnessMode,
    csi_error: Option<Vec<CVec>>,
}

impl Problem {
    pub fn new(ch: &ChannelRealization, budget: LinkBudget, order: u32, mode: Mode, fitness: FitnessMode) -> Result<Self> {
        budget.validate()?;
        let d = ch.dims;
        if let Mode::PassiveOnly(Precoder::Zf) = mode {
            if d.antennas < d.users {
                return Err(Error::Config(format!("zero-forcing needs M >= K, got M = {}, K = {}", d.antennas, d.users)));
            }
        }
        Ok(Self {
            cascade: ch.cascade(),
            budget,
            model: SerModel::new(order)?,
            mode,
            fitness,
            csi_error: None,
        })
    }

    /// Fixed estimation error `e_k ~ CN(0, σ_e²)` drawn from `seed`.
    pub fn with_csi_error(mut self, sigma_e2: f64, seed: u64) -> Result<Self> {
        let d = self.dims();
        let e = crate::channel::csi_error(d.users, d.antennas, sigma_e2, seed)?;
        self.csi_error = (sigma_e2 > 0.0).then_some(e);
        Ok(self)
    }

    pub fn dims(&self) -> SystemDims {
        self.cascade.dims()
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn fitness_mode(&self) -> FitnessMode {
        self.fitness
    }

    pub fn ser_model(&self) -> &SerModel {
        &self.model
    }

    pub fn true_channel(&self, phases: &[f64]) -> AggregatedChannel {
        self.cascade.aggregate(&encode::phasors(phases))
    }

    /// The channel the optimizer designs against.
    pub fn estimated_channel(&self, phases: &[f64]) -> AggregatedChannel {
        let mut agg = self.true_channel(phases);
        if let Some(err) = &self.csi_error {
            for (z, e) in agg.z.iter_mut().zip(err) {
                z.iter_mut().zip(e).for_each(|(a, b)| *a += b);
            }
        }
        agg
    }

    /// Beamformers for `x`, designed on `estimate`.
    pub fn beams(&self, x: &[f64], estimate: &AggregatedChannel) -> Result<BeamformerSet> {
        let d = self.dims();
        match self.mode {
            Mode::Joint => encode::decode_beams(&x[d.elements..], d, &self.budget),
            Mode::PassiveOnly(p) => precode(estimate, p, &self.budget),
        }
    }

    fn objective_on(&self, x: &[f64], truth: bool) -> f64 {
        let n = self.dims().elements;
        let est = self.estimated_channel(&x[..n]);
        let Ok(bf) = self.beams(x, &est) else {
            return self.fitness.worst(&self.model);
        };
        let seen = if truth && self.csi_error.is_some() { self.true_channel(&x[..n]) } else { est };
        let v = self.fitness.objective(&sinrs(&seen, &bf, &self.budget), &self.model);
        if v.is_nan() {
            self.fitness.worst(&self.model)
        } else {
            v
        }
    }

    /// Objective of `x` as measured on the true channel (differs from
    /// [`Objective::evaluate`] only under imperfect CSI).
    pub fn true_objective(&self, x: &[f64]) -> f64 {
        self.objective_on(x, true)
    }

    /// Average analytical SER on the true channel, whatever the fitness mode.
    pub fn true_avg_ser(&self, x: &[f64]) -> f64 {
        let n = self.dims().elements;
        let est = self.estimated_channel(&x[..n]);
        match self.beams(x, &est) {
            Ok(bf) => FitnessMode::AvgSer.objective(&sinrs(&self.true_channel(&x[..n]), &bf, &self.budget), &self.model),
            Err(_) => self.model.ser_max(),
        }
    }

    /// The same channel and objective with the beamformers tied to `precoder`.
    pub fn passive_view(&self, precoder: Precoder) -> Problem {
        Problem { mode: Mode::PassiveOnly(precoder), ..self.clone() }
    }

    pub fn decode(&self, x: &[f64]) -> Result<Solution> {
        let layout = self.layout();
        if x.len() != layout.len() {
            return Err(Error::Dimension(format!("individual has {} entries, layout needs {}", x.len(), layout.len())));
        }
        let n = self.dims().elements;
        let phases = encode::decode_phases(x, n)?;
        let beams = self.beams(x, &self.estimated_channel(&x[..n]))?;
        Ok(Solution { x: x.to_vec(), phases, beams, fitness: self.evaluate(x) })
    }
}

impl Objective for Problem {
    fn layout(&self) -> Layout {
        match self.mode {
            Mode::Joint => Layout::joint(self.dims()),
            Mode::PassiveOnly(_) => Layout::passive(self.dims()),
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_on(x, false)
    }
}
