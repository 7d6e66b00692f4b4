//! SINR, analytical symbol error rate, linear precoders and the fitness
//! functions built on them.
//!
//! The SER of user k treats multi-user interference as Gaussian noise:
//!
//! ```text
//! SER = 2a·erfc(x) − a²·erfc²(x),   a = 1 − 1/√m,   x = √(3·SINR / (2(m − 1)))
//! ```
//!
//! `x` is `δ/√v` where `δ` is the half minimum distance of the unit-energy
//! constellation and `v` the total variance of the equalized
//! interference-plus-noise term, so the expression is the exact error
//! probability of a square QAM symbol in circular Gaussian noise of SINR
//! `SINR`. The low- and high-SINR series below expand `erfc` at the same `x`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::AggregatedChannel;
use crate::cvec::{inner_h, norm_sqr, CVec};
use crate::error::{Error, Result};
use crate::modem::qam_side;

/// Reciprocal condition below which a Gram matrix is treated as singular.
pub const RANK_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit power per data symbol (ρ).
    pub rho: f64,
    /// Noise variance (σ²).
    pub sigma2: f64,
    /// Per-user power cap (P_max).
    pub p_max: f64,
}

impl LinkBudget {
    pub fn new(rho: f64, sigma2: f64, p_max: f64) -> Result<Self> {
        let b = Self { rho, sigma2, p_max };
        b.validate()?;
        Ok(b)
    }

    /// `ρ = P_max = 1` and `σ² = 10^(−snr_db/10)`, i.e. `ρ/σ² = snr_db`.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            rho: 1.0,
            sigma2: 10f64.powf(-snr_db / 10.0),
            p_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= self.p_max && self.p_max.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < rho <= p_max, got rho = {}, p_max = {}",
                self.rho, self.p_max
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!("noise variance {} must be positive", self.sigma2)));
        }
        Ok(())
    }

    /// `√(P_max/ρ)`, the norm every beamformer is scaled to.
    pub fn beam_norm(&self) -> f64 {
        (self.p_max / self.rho).sqrt()
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.rho / self.sigma2).log10()
    }
}

/// Per-user beamforming vectors, already scaled to the power budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub vectors: Vec<CVec>,
}

impl BeamformerSet {
    /// Normalizes each direction and scales it to `√(P_max/ρ)`.
    pub fn from_directions(mut dirs: Vec<CVec>, budget: &LinkBudget) -> Result<Self> {
        let target = budget.beam_norm();
        for (k, w) in dirs.iter_mut().enumerate() {
            let n = norm_sqr(w).sqrt();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Domain(format!("beam direction of user {k} has zero norm")));
            }
            let s = target / n;
            w.iter_mut().for_each(|x| *x *= s);
        }
        Ok(Self { vectors: dirs })
    }

    pub fn users(&self) -> usize {
        self.vectors.len()
    }
}

/// `ρ|z_kᴴw_k|² / (Σ_{k'≠k} ρ|z_kᴴw_{k'}|² + σ²)`.
pub fn sinr(agg: &AggregatedChannel, bf: &BeamformerSet, budget: &LinkBudget, k: usize) -> f64 {
    let z = &agg.z[k];
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, w) in bf.vectors.iter().enumerate() {
        let p = budget.rho * inner_h(z, w).norm_sqr();
        if j == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + budget.sigma2)
}

pub fn sinrs(agg: &AggregatedChannel, bf: &BeamformerSet, budget: &LinkBudget) -> Vec<f64> {
    (0..agg.users()).map(|k| sinr(agg, bf, budget, k)).collect()
}

/// Complementary error function (musl-derived `libm`, ~1 ulp).
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Precomputed constants of the SER expression for one modulation order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SerModel {
    order: u32,
    a: f64,
    arg_scale: f64,
}

impl SerModel {
    pub fn new(order: u32) -> Result<Self> {
        let side = qam_side(order)?;
        Ok(Self {
            order,
            a: 1.0 - 1.0 / side as f64,
            arg_scale: 3.0 / (2.0 * (order as f64 - 1.0)),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `erfc` argument `x = √(3·SINR / (2(m − 1)))`.
    #[inline]
    pub fn erfc_argument(&self, sinr: f64) -> f64 {
        (self.arg_scale * sinr).sqrt()
    }

    /// SER at `sinr ≥ 0`; no domain check.
    #[inline]
    pub fn ser(&self, sinr: f64) -> f64 {
        let e = erfc(self.erfc_argument(sinr));
        2.0 * self.a * e - self.a * self.a * e * e
    }

    /// SER at zero SINR, `1 − 1/m`.
    pub fn ser_max(&self) -> f64 {
        2.0 * self.a - self.a * self.a
    }

    fn combine(&self, e: f64) -> f64 {
        2.0 * self.a * e - self.a * self.a * e * e
    }
}

fn check_sinr(sinr: f64) -> Result<()> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("SINR {sinr} must be >= 0")));
    }
    Ok(())
}

/// Analytical SER of one user at the given SINR.
pub fn ser_analytic(sinr: f64, order: u32) -> Result<f64> {
    check_sinr(sinr)?;
    Ok(SerModel::new(order)?.ser(sinr))
}

/// Low/moderate-SINR form: the erf Maclaurin series truncated after its
/// first two terms, `erfc(x) ≈ 1 − (2/√π)(x − x³/3)`.
pub fn ser_series_low(sinr: f64, order: u32) -> Result<f64> {
    check_sinr(sinr)?;
    let model = SerModel::new(order)?;
    let x = model.erfc_argument(sinr);
    let e = 1.0 - std::f64::consts::FRAC_2_SQRT_PI * (x - x * x * x / 3.0);
    Ok(model.combine(e))
}

/// High-SINR form from the asymptotic expansion
/// `erfc(x) ≈ e^{−x²}/(x√π) · Σ_{l<order} (−1)^l (2l−1)!! / (2x²)^l`.
/// `order = 1` keeps the leading term only.
pub fn ser_series_high(sinr: f64, order: u32, terms: usize) -> Result<f64> {
    if !(sinr > 0.0) {
        return Err(Error::Domain(format!("high-SINR series needs SINR > 0, got {sinr}")));
    }
    if terms == 0 {
        return Err(Error::Config("high-SINR series needs at least one term".into()));
    }
    let model = SerModel::new(order)?;
    let x = model.erfc_argument(sinr);
    let inv = 1.0 / (2.0 * x * x);
    let mut sum = 0.0;
    let mut term = 1.0; // (−1)^l (2l−1)!! / (2x²)^l, with (−1)!! = 1
    for l in 0..terms {
        if l > 0 {
            term *= -((2 * l - 1) as f64) * inv;
        }
        sum += term;
    }
    let lead = (-x * x).exp() / (x * std::f64::consts::PI.sqrt());
    Ok(model.combine(lead * sum))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    Mrt,
    Zf,
    Rzf,
}

impl Precoder {
    pub const ALL: [Precoder; 3] = [Precoder::Mrt, Precoder::Zf, Precoder::Rzf];

    pub fn name(self) -> &'static str {
        match self {
            Precoder::Mrt => "mrt",
            Precoder::Zf => "zf",
            Precoder::Rzf => "rzf",
        }
    }
}

impl std::str::FromStr for Precoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrt" | "mr" => Ok(Precoder::Mrt),
            "zf" => Ok(Precoder::Zf),
            "rzf" => Ok(Precoder::Rzf),
            other => Err(Error::Parse(format!("unknown precoder '{other}'"))),
        }
    }
}

fn channel_matrix(agg: &AggregatedChannel) -> DMatrix<Complex64> {
    let (m, k) = (agg.antennas(), agg.users());
    DMatrix::from_fn(m, k, |i, j| agg.z[j][i])
}

/// `(ZᴴZ + reg·I)⁻¹` with a reciprocal-condition guard.
fn gram_inverse(z: &DMatrix<Complex64>, reg: f64) -> Result<DMatrix<Complex64>> {
    let k = z.ncols();
    let gram = z.adjoint() * z + DMatrix::<Complex64>::identity(k, k) * Complex64::new(reg, 0.0);
    let chol = gram.cholesky().ok_or(Error::NumericalRank { rcond: 0.0 })?;
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d.norm()).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let rcond = if hi > 0.0 { (lo / hi).powi(2) } else { 0.0 };
    if !(rcond >= RANK_TOLERANCE) {
        return Err(Error::NumericalRank { rcond });
    }
    Ok(chol.inverse())
}

/// Unit-norm precoding directions before budget scaling.
pub fn precode_directions(agg: &AggregatedChannel, scheme: Precoder, sigma2: f64) -> Result<Vec<CVec>> {
    let (m, k) = (agg.antennas(), agg.users());
    let dirs = match scheme {
        Precoder::Mrt => agg.z.clone(),
        Precoder::Zf | Precoder::Rzf => {
            let reg = if scheme == Precoder::Zf {
                if m < k {
                    return Err(Error::Dimension(format!("zero-forcing needs M >= K, got M = {m}, K = {k}")));
                }
                0.0
            } else {
                sigma2
            };
            let z = channel_matrix(agg);
            let w = &z * gram_inverse(&z, reg)?;
            (0..k).map(|j| w.column(j).iter().copied().collect()).collect()
        }
    };
    dirs.into_iter()
        .map(|mut w: CVec| {
            let n = norm_sqr(&w).sqrt();
            if !(n > 0.0) {
                return Err(Error::NumericalRank { rcond: 0.0 });
            }
            w.iter_mut().for_each(|x| *x /= n);
            Ok(w)
        })
        .collect()
}

/// Linear precoder scaled onto the power sphere `‖w_k‖² = P_max/ρ`.
pub fn precode(agg: &AggregatedChannel, scheme: Precoder, budget: &LinkBudget) -> Result<BeamformerSet> {
    BeamformerSet::from_directions(precode_directions(agg, scheme, budget.sigma2)?, budget)
}

/// SINR of user `k` under a linear precoder, from the closed-form signal and
/// interference-plus-noise strengths of each scheme. Beamformers carry the
/// budget scaling, so the effective per-user transmit power is `P_max`.
pub fn sinr_linear(agg: &AggregatedChannel, scheme: Precoder, budget: &LinkBudget, k: usize) -> Result<f64> {
    let p = budget.p_max;
    match scheme {
        Precoder::Mrt => {
            let zk = &agg.z[k];
            let signal = p * norm_sqr(zk);
            let mut denom = budget.sigma2;
            for (j, zj) in agg.z.iter().enumerate() {
                if j != k {
                    let nj = norm_sqr(zj);
                    if !(nj > 0.0) {
                        return Err(Error::NumericalRank { rcond: 0.0 });
                    }
                    denom += p * inner_h(zk, zj).norm_sqr() / nj;
                }
            }
            Ok(signal / denom)
        }
        Precoder::Zf => {
            let (m, kk) = (agg.antennas(), agg.users());
            if m < kk {
                return Err(Error::Dimension(format!("zero-forcing needs M >= K, got M = {m}, K = {kk}")));
            }
            // ‖Z(ZᴴZ)⁻¹e_k‖² = [(ZᴴZ)⁻¹]_kk
            let inv = gram_inverse(&channel_matrix(agg), 0.0)?;
            Ok(p / inv[(k, k)].re / budget.sigma2)
        }
        Precoder::Rzf => {
            let bf = precode(agg, Precoder::Rzf, budget)?;
            Ok(sinr(agg, &bf, budget, k))
        }
    }
}

pub fn ser_linear(agg: &AggregatedChannel, scheme: Precoder, budget: &LinkBudget, order: u32, k: usize) -> Result<f64> {
    ser_analytic(sinr_linear(agg, scheme, budget, k)?, order)
}

/// Average analytical SER over users, the optimizer's primary fitness.
pub fn fitness_avg_ser(agg: &AggregatedChannel, bf: &BeamformerSet, budget: &LinkBudget, model: &SerModel) -> f64 {
    avg_ser(&sinrs(agg, bf, budget), model)
}

pub fn avg_ser(sinrs: &[f64], model: &SerModel) -> f64 {
    sinrs.iter().map(|&s| model.ser(s)).sum::<f64>() / sinrs.len() as f64
}

/// `Σ_k log2(1 + SINR_k)`.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s).log2()).sum()
}

pub fn min_sinr(sinrs: &[f64]) -> f64 {
    sinrs.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    #[default]
    AvgSer,
    SumRate,
    MinSinr,
}

impl FitnessMode {
    pub fn name(self) -> &'static str {
        match self {
            FitnessMode::AvgSer => "avg_ser",
            FitnessMode::SumRate => "sum_rate",
            FitnessMode::MinSinr => "min_sinr",
        }
    }

    /// Value to minimize; the two maximization metrics are negated.
    pub fn objective(self, sinrs: &[f64], model: &SerModel) -> f64 {
        match self {
            FitnessMode::AvgSer => avg_ser(sinrs, model),
            FitnessMode::SumRate => -sum_rate(sinrs),
            FitnessMode::MinSinr => -min_sinr(sinrs),
        }
    }

    /// Objective assigned to an undecodable candidate.
    pub fn worst(self, model: &SerModel) -> f64 {
        match self {
            FitnessMode::AvgSer => model.ser_max(),
            FitnessMode::SumRate | FitnessMode::MinSinr => 0.0,
        }
    }
}

/// Minimization objective for the sum-rate or min-SINR criteria (negated metric).
pub fn fitness_alt(agg: &AggregatedChannel, bf: &BeamformerSet, budget: &LinkBudget, mode: FitnessMode, model: &SerModel) -> f64 {
    mode.objective(&sinrs(agg, bf, budget), model)
}
