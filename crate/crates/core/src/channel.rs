//! Propagation channels for the BS → RIS → user downlink.
//!
//! A [`ChannelRealization`] holds the BS–RIS matrix (M×N), the RIS–user
//! vectors (N each) and the direct BS–user vectors (M each). For a phase
//! configuration the per-user effective channel is
//! `z_k = u_k + H·diag(e^{jθ})·g_k`, see [`aggregate`].
//!
//! Small-scale fading is either i.i.d. Rayleigh ([`gen_rayleigh`]) or Rician
//! with a configurable number of specular paths ([`gen_rician`]). The diffuse
//! part of the Rician generator consumes exactly the same random sub-streams
//! as the Rayleigh generator, so a link without specular paths is bit-for-bit
//! the Rayleigh link.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cvec::{complex_gaussian, complex_gaussian_vec, deinterleave, interleave, CVec};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// BS antennas (M).
    pub antennas: usize,
    /// RIS elements (N); zero means no RIS.
    pub elements: usize,
    /// Single-antenna users (K).
    pub users: usize,
}

impl SystemDims {
    pub fn new(antennas: usize, elements: usize, users: usize) -> Result<Self> {
        let dims = Self { antennas, elements, users };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Dimension("at least one BS antenna is required".into()));
        }
        if self.users == 0 {
            return Err(Error::Dimension("at least one user is required".into()));
        }
        Ok(())
    }

    /// Length of a joint active/passive individual: `N + 2MK`.
    pub fn individual_len(&self) -> usize {
        self.elements + 2 * self.antennas * self.users
    }
}

/// Large-scale fading coefficients (linear power gains).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeScale {
    pub bs_ris: f64,
    pub ris_user: Vec<f64>,
    pub bs_user: Vec<f64>,
}

impl LargeScale {
    pub fn unit(users: usize) -> Self {
        Self::uniform(users, 1.0, 1.0, 1.0)
    }

    pub fn uniform(users: usize, bs_ris: f64, ris_user: f64, bs_user: f64) -> Self {
        Self {
            bs_ris,
            ris_user: vec![ris_user; users],
            bs_user: vec![bs_user; users],
        }
    }

    /// Log-distance path loss `gain_db(d) = reference_db − 10·exponent·log10(d)`.
    pub fn log_distance(
        model: &LogDistance,
        bs_ris_m: f64,
        ris_user_m: &[f64],
        bs_user_m: &[f64],
    ) -> Result<Self> {
        if ris_user_m.len() != bs_user_m.len() {
            return Err(Error::Dimension("per-user distance lists differ in length".into()));
        }
        Ok(Self {
            bs_ris: model.gain(bs_ris_m)?,
            ris_user: ris_user_m.iter().map(|&d| model.gain(d)).collect::<Result<_>>()?,
            bs_user: bs_user_m.iter().map(|&d| model.gain(d)).collect::<Result<_>>()?,
        })
    }

    fn validate(&self, dims: &SystemDims) -> Result<()> {
        if self.ris_user.len() != dims.users || self.bs_user.len() != dims.users {
            return Err(Error::Dimension(format!(
                "large-scale coefficients given for {}/{} users, expected {}",
                self.ris_user.len(),
                self.bs_user.len(),
                dims.users
            )));
        }
        let all = std::iter::once(&self.bs_ris)
            .chain(&self.ris_user)
            .chain(&self.bs_user);
        for &b in all {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Domain(format!("large-scale coefficient {b} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDistance {
    pub reference_db: f64,
    pub exponent: f64,
}

impl LogDistance {
    pub fn gain(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::Domain(format!("distance {distance_m} must be positive")));
        }
        Ok(10f64.powf((self.reference_db - 10.0 * self.exponent * distance_m.log10()) / 10.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ChannelDump", try_from = "ChannelDump")]
pub struct ChannelRealization {
    pub dims: SystemDims,
    /// BS–RIS matrix, M×N row-major.
    pub bs_ris: CVec,
    /// RIS–user vectors, K × N.
    pub ris_user: Vec<CVec>,
    /// Direct BS–user vectors, K × M.
    pub bs_user: Vec<CVec>,
    pub large_scale: LargeScale,
}

impl ChannelRealization {
    #[inline]
    pub fn bs_ris_entry(&self, m: usize, n: usize) -> Complex64 {
        self.bs_ris[m * self.dims.elements + n]
    }

    fn check(&self) -> Result<()> {
        let d = &self.dims;
        d.validate()?;
        let ok = self.bs_ris.len() == d.antennas * d.elements
            && self.ris_user.len() == d.users
            && self.bs_user.len() == d.users
            && self.ris_user.iter().all(|g| g.len() == d.elements)
            && self.bs_user.iter().all(|u| u.len() == d.antennas);
        if !ok {
            return Err(Error::Dimension("channel arrays do not match the system dimensions".into()));
        }
        let finite = self
            .bs_ris
            .iter()
            .chain(self.ris_user.iter().flatten())
            .chain(self.bs_user.iter().flatten())
            .all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite {
            return Err(Error::Domain("channel contains non-finite entries".into()));
        }
        self.large_scale.validate(d)
    }

    /// Precomputes `H·diag(g_k)` per user for repeated aggregation.
    pub fn cascade(&self) -> CascadedChannel {
        let d = self.dims;
        let per_user = self
            .ris_user
            .iter()
            .map(|g| {
                let mut c = Vec::with_capacity(d.antennas * d.elements);
                for m in 0..d.antennas {
                    c.extend(g.iter().enumerate().map(|(n, gn)| self.bs_ris_entry(m, n) * gn));
                }
                c
            })
            .collect();
        CascadedChannel {
            dims: d,
            direct: self.bs_user.clone(),
            per_user,
        }
    }
}

/// Phase shifts in radians, each within `[−π, π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(t) = theta.iter().find(|t| !(t.abs() <= PI)) {
            return Err(Error::Domain(format!("phase {t} outside [-pi, pi]")));
        }
        Ok(Self(theta))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `e^{jθ_n}` for every element.
    pub fn phasors(&self) -> CVec {
        self.0.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }
}

/// Per-user effective channels `z_k` (K vectors of length M).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedChannel {
    pub z: Vec<CVec>,
}

impl AggregatedChannel {
    pub fn users(&self) -> usize {
        self.z.len()
    }

    pub fn antennas(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }
}

/// Channel with the RIS cascade folded per user, for fast repeated aggregation.
#[derive(Clone, Debug)]
pub struct CascadedChannel {
    dims: SystemDims,
    direct: Vec<CVec>,
    per_user: Vec<CVec>,
}

impl CascadedChannel {
    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    /// Writes `z_k = u_k + C_k·φ` for unit phasors `φ` into `out`.
    pub fn aggregate_into(&self, phasors: &[Complex64], out: &mut AggregatedChannel) {
        let (m_ant, n_el) = (self.dims.antennas, self.dims.elements);
        debug_assert_eq!(phasors.len(), n_el);
        out.z.resize_with(self.dims.users, Vec::new);
        for ((z, u), c) in out.z.iter_mut().zip(&self.direct).zip(&self.per_user) {
            z.clear();
            z.extend_from_slice(u);
            for (m, zm) in z.iter_mut().enumerate().take(m_ant) {
                let row = &c[m * n_el..(m + 1) * n_el];
                *zm += row.iter().zip(phasors).map(|(a, p)| a * p).sum::<Complex64>();
            }
        }
    }

    pub fn aggregate(&self, phasors: &[Complex64]) -> AggregatedChannel {
        let mut out = AggregatedChannel { z: Vec::new() };
        self.aggregate_into(phasors, &mut out);
        out
    }
}

/// `z_k = u_k + H·diag(e^{jθ_1},…,e^{jθ_N})·g_k` for every user.
pub fn aggregate(ch: &ChannelRealization, theta: &PhaseVector) -> Result<AggregatedChannel> {
    let d = ch.dims;
    if theta.len() != d.elements {
        return Err(Error::Dimension(format!(
            "phase vector has {} entries, RIS has {} elements",
            theta.len(),
            d.elements
        )));
    }
    let phi = theta.phasors();
    let z = ch
        .ris_user
        .iter()
        .zip(&ch.bs_user)
        .map(|(g, u)| {
            let reflected: CVec = g.iter().zip(&phi).map(|(gn, p)| gn * p).collect();
            (0..d.antennas)
                .map(|m| {
                    u[m] + (0..d.elements)
                        .map(|n| ch.bs_ris_entry(m, n) * reflected[n])
                        .sum::<Complex64>()
                })
                .collect()
        })
        .collect();
    Ok(AggregatedChannel { z })
}

fn rayleigh_parts(dims: SystemDims, seed: u64) -> (CVec, Vec<CVec>, Vec<CVec>) {
    let mut r = rng::stream(seed, &[tag::BS_RIS]);
    let bs_ris = complex_gaussian_vec(&mut r, dims.antennas * dims.elements, 1.0);
    let ris_user = (0..dims.users)
        .map(|k| complex_gaussian_vec(&mut rng::stream(seed, &[tag::RIS_USER, k as u64]), dims.elements, 1.0))
        .collect();
    let bs_user = (0..dims.users)
        .map(|k| complex_gaussian_vec(&mut rng::stream(seed, &[tag::BS_USER, k as u64]), dims.antennas, 1.0))
        .collect();
    (bs_ris, ris_user, bs_user)
}

fn scale(v: &mut [Complex64], gain: f64) {
    let s = gain.sqrt();
    v.iter_mut().for_each(|c| *c *= s);
}

/// I.i.d. Rayleigh fading: every entry `CN(0, 1)` scaled by `√β` of its link.
pub fn gen_rayleigh(dims: SystemDims, large_scale: &LargeScale, seed: u64) -> Result<ChannelRealization> {
    dims.validate()?;
    large_scale.validate(&dims)?;
    let (mut bs_ris, mut ris_user, mut bs_user) = rayleigh_parts(dims, seed);
    scale(&mut bs_ris, large_scale.bs_ris);
    for (g, &b) in ris_user.iter_mut().zip(&large_scale.ris_user) {
        scale(g, b);
    }
    for (u, &b) in bs_user.iter_mut().zip(&large_scale.bs_user) {
        scale(u, b);
    }
    Ok(ChannelRealization {
        dims,
        bs_ris,
        ris_user,
        bs_user,
        large_scale: large_scale.clone(),
    })
}

/// Distance-dependent Rician factor `13 − 0.03·Δ + offset` (dB), returned linear.
pub fn rician_k_factor(distance_m: f64, offset_db: f64) -> Result<f64> {
    if !(distance_m >= 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!("distance {distance_m} must be finite and >= 0")));
    }
    Ok(10f64.powf((13.0 - 0.03 * distance_m + offset_db) / 10.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RicianConfig {
    /// Specular paths on the direct BS–user links.
    pub specular_bs_user: usize,
    /// Specular paths on the RIS–user links.
    pub specular_ris_user: usize,
    /// Specular paths on the BS–RIS link.
    pub specular_bs_ris: usize,
    pub distance_bs_user_m: f64,
    pub distance_ris_user_m: f64,
    pub distance_bs_ris_m: f64,
    /// Added to the RIS–user Rician factor in dB (−9 for the reduced-K case).
    pub k_factor_offset_db: f64,
    /// Power share of the dominant (LoS) component when there is more than one specular path.
    pub los_power_ratio: f64,
    /// Maximum azimuth deviation of non-LoS specular paths from the LoS angle (degrees).
    pub azimuth_spread_deg: f64,
    /// Maximum elevation deviation of non-LoS specular paths from the LoS angle (degrees).
    pub elevation_spread_deg: f64,
}

impl Default for RicianConfig {
    fn default() -> Self {
        Self {
            specular_bs_user: 1,
            specular_ris_user: 1,
            specular_bs_ris: 1,
            distance_bs_user_m: 100.0,
            distance_ris_user_m: 100.0,
            distance_bs_ris_m: 100.0,
            k_factor_offset_db: 0.0,
            los_power_ratio: 0.5,
            azimuth_spread_deg: 60.0,
            elevation_spread_deg: 15.0,
        }
    }
}

impl RicianConfig {
    /// Same number of specular paths on every link.
    pub fn with_specular(s: usize) -> Self {
        Self {
            specular_bs_user: s,
            specular_ris_user: s,
            specular_bs_ris: s,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for d in [self.distance_bs_user_m, self.distance_ris_user_m, self.distance_bs_ris_m] {
            rician_k_factor(d, 0.0)?;
        }
        if !(self.los_power_ratio > 0.0 && self.los_power_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "LoS power ratio {} must be in (0, 1]",
                self.los_power_ratio
            )));
        }
        if !(self.azimuth_spread_deg >= 0.0 && self.elevation_spread_deg >= 0.0) {
            return Err(Error::Config("angular spreads must be non-negative".into()));
        }
        Ok(())
    }

    /// Amplitudes of the specular components; their squares sum to one.
    fn amplitudes(&self, s: usize) -> Vec<f64> {
        match s {
            0 => Vec::new(),
            1 => vec![1.0],
            _ => {
                let rest = ((1.0 - self.los_power_ratio) / (s - 1) as f64).sqrt();
                std::iter::once(self.los_power_ratio.sqrt())
                    .chain(std::iter::repeat_n(rest, s - 1))
                    .collect()
            }
        }
    }
}

/// Direction of a specular path: azimuth and elevation in radians.
#[derive(Clone, Copy, Debug)]
struct Direction {
    azimuth: f64,
    elevation: f64,
}

fn path_directions<R: Rng>(rng: &mut R, s: usize, cfg: &RicianConfig) -> Vec<Direction> {
    let los = Direction {
        azimuth: rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        elevation: rng.random_range(-FRAC_PI_2 / 2.0..FRAC_PI_2 / 2.0),
    };
    let az = cfg.azimuth_spread_deg.to_radians();
    let el = cfg.elevation_spread_deg.to_radians();
    let mut out = vec![los];
    for _ in 1..s {
        let da = if az > 0.0 { rng.random_range(-az..az) } else { 0.0 };
        let de = if el > 0.0 { rng.random_range(-el..el) } else { 0.0 };
        out.push(Direction {
            azimuth: los.azimuth + da,
            elevation: los.elevation + de,
        });
    }
    out.truncate(s);
    out
}

/// Half-wavelength uniform linear array response at the BS.
fn ula_response(antennas: usize, dir: Direction) -> CVec {
    let k = PI * dir.azimuth.sin() * dir.elevation.cos();
    (0..antennas)
        .map(|m| Complex64::from_polar(1.0, k * m as f64))
        .collect()
}

/// Half-wavelength uniform planar array response at the RIS; elements are laid
/// out row by row on a grid `ceil(√N)` wide.
fn upa_response(elements: usize, dir: Direction) -> CVec {
    let width = (elements as f64).sqrt().ceil().max(1.0) as usize;
    let kx = PI * dir.azimuth.sin() * dir.elevation.cos();
    let ky = PI * dir.elevation.sin();
    (0..elements)
        .map(|n| Complex64::from_polar(1.0, kx * (n % width) as f64 + ky * (n / width) as f64))
        .collect()
}

/// Mixes `Σ_s a_s e^{jφ_s} steering_s` into a diffuse draw with Rician factor `k`.
fn mix_specular(diffuse: &mut [Complex64], specular: &[Complex64], k: f64) {
    let (ws, wd) = ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt());
    for (d, s) in diffuse.iter_mut().zip(specular) {
        *d = ws * s + wd * *d;
    }
}

fn specular_sum<R: Rng>(
    rng: &mut R,
    len: usize,
    s: usize,
    cfg: &RicianConfig,
    response: impl Fn(Direction) -> CVec,
) -> CVec {
    let amps = cfg.amplitudes(s);
    let dirs = path_directions(rng, s, cfg);
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for (a, dir) in amps.iter().zip(dirs) {
        let phase = Complex64::from_polar(*a, rng.random_range(0.0..2.0 * PI));
        for (x, r) in acc.iter_mut().zip(response(dir)) {
            *x += phase * r;
        }
    }
    acc
}

/// Rician fading with `S` specular components per link; `S = 0` on a link
/// leaves that link exactly Rayleigh.
pub fn gen_rician(
    dims: SystemDims,
    cfg: &RicianConfig,
    large_scale: &LargeScale,
    seed: u64,
) -> Result<ChannelRealization> {
    dims.validate()?;
    cfg.validate()?;
    large_scale.validate(&dims)?;
    let (mut bs_ris, mut ris_user, mut bs_user) = rayleigh_parts(dims, seed);
    let (m_ant, n_el) = (dims.antennas, dims.elements);

    if cfg.specular_bs_ris > 0 && n_el > 0 {
        let k = rician_k_factor(cfg.distance_bs_ris_m, 0.0)?;
        let mut r = rng::stream(seed, &[tag::SPECULAR, tag::BS_RIS]);
        let amps = cfg.amplitudes(cfg.specular_bs_ris);
        let departures = path_directions(&mut r, cfg.specular_bs_ris, cfg);
        let arrivals = path_directions(&mut r, cfg.specular_bs_ris, cfg);
        let mut spec = vec![Complex64::new(0.0, 0.0); m_ant * n_el];
        for ((a, dep), arr) in amps.into_iter().zip(departures).zip(arrivals) {
            let phase = Complex64::from_polar(a, r.random_range(0.0..2.0 * PI));
            let (bs, ris) = (ula_response(m_ant, dep), upa_response(n_el, arr));
            for m in 0..m_ant {
                for n in 0..n_el {
                    spec[m * n_el + n] += phase * bs[m] * ris[n];
                }
            }
        }
        mix_specular(&mut bs_ris, &spec, k);
    }
    if cfg.specular_ris_user > 0 && n_el > 0 {
        let k = rician_k_factor(cfg.distance_ris_user_m, cfg.k_factor_offset_db)?;
        for (i, g) in ris_user.iter_mut().enumerate() {
            let mut r = rng::stream(seed, &[tag::SPECULAR, tag::RIS_USER, i as u64]);
            let spec = specular_sum(&mut r, n_el, cfg.specular_ris_user, cfg, |d| upa_response(n_el, d));
            mix_specular(g, &spec, k);
        }
    }
    if cfg.specular_bs_user > 0 {
        let k = rician_k_factor(cfg.distance_bs_user_m, 0.0)?;
        for (i, u) in bs_user.iter_mut().enumerate() {
            let mut r = rng::stream(seed, &[tag::SPECULAR, tag::BS_USER, i as u64]);
            let spec = specular_sum(&mut r, m_ant, cfg.specular_bs_user, cfg, |d| ula_response(m_ant, d));
            mix_specular(u, &spec, k);
        }
    }

    scale(&mut bs_ris, large_scale.bs_ris);
    for (g, &b) in ris_user.iter_mut().zip(&large_scale.ris_user) {
        scale(g, b);
    }
    for (u, &b) in bs_user.iter_mut().zip(&large_scale.bs_user) {
        scale(u, b);
    }
    Ok(ChannelRealization {
        dims,
        bs_ris,
        ris_user,
        bs_user,
        large_scale: large_scale.clone(),
    })
}

/// Estimation error `e_k` with i.i.d. `CN(0, σ_e²)` entries for every user.
pub fn csi_error(users: usize, antennas: usize, sigma_e2: f64, seed: u64) -> Result<Vec<CVec>> {
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(Error::Domain(format!("CSI error variance {sigma_e2} must be finite and >= 0")));
    }
    Ok((0..users)
        .map(|k| {
            let mut r = rng::stream(seed, &[tag::CSI, k as u64]);
            (0..antennas).map(|_| complex_gaussian(&mut r, sigma_e2)).collect()
        })
        .collect())
}

/// Imperfect CSI: `z̃_k = z_k + e_k`.
pub fn corrupt_csi(agg: &AggregatedChannel, sigma_e2: f64, seed: u64) -> Result<AggregatedChannel> {
    let err = csi_error(agg.users(), agg.antennas(), sigma_e2, seed)?;
    if sigma_e2 == 0.0 {
        return Ok(agg.clone());
    }
    let z = agg
        .z
        .iter()
        .zip(err)
        .map(|(z, e)| z.iter().zip(e).map(|(a, b)| a + b).collect())
        .collect();
    Ok(AggregatedChannel { z })
}

/// On-disk form of a [`ChannelRealization`]; complex entries are interleaved
/// `re, im` doubles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelDump {
    pub antennas: usize,
    pub elements: usize,
    pub users: usize,
    pub large_scale: LargeScale,
    pub bs_ris: Vec<f64>,
    pub ris_user: Vec<Vec<f64>>,
    pub bs_user: Vec<Vec<f64>>,
}

impl From<ChannelRealization> for ChannelDump {
    fn from(ch: ChannelRealization) -> Self {
        Self {
            antennas: ch.dims.antennas,
            elements: ch.dims.elements,
            users: ch.dims.users,
            bs_ris: interleave(&ch.bs_ris),
            ris_user: ch.ris_user.iter().map(|v| interleave(v)).collect(),
            bs_user: ch.bs_user.iter().map(|v| interleave(v)).collect(),
            large_scale: ch.large_scale,
        }
    }
}

impl TryFrom<ChannelDump> for ChannelRealization {
    type Error = Error;

    fn try_from(d: ChannelDump) -> Result<Self> {
        let bad = || Error::Parse("odd number of interleaved doubles".into());
        let ch = ChannelRealization {
            dims: SystemDims {
                antennas: d.antennas,
                elements: d.elements,
                users: d.users,
            },
            bs_ris: deinterleave(&d.bs_ris).ok_or_else(bad)?,
            ris_user: d.ris_user.iter().map(|v| deinterleave(v).ok_or_else(bad)).collect::<Result<_>>()?,
            bs_user: d.bs_user.iter().map(|v| deinterleave(v).ok_or_else(bad)).collect::<Result<_>>()?,
            large_scale: d.large_scale,
        };
        ch.check()?;
        Ok(ch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::norm_sqr;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rayleigh_unit_variance() {
        let dims = SystemDims::new(2, 0, 1).unwrap();
        let ls = LargeScale::unit(1);
        let mut acc = 0.0;
        let draws = 50_000;
        for seed in 0..draws {
            let ch = gen_rayleigh(dims, &ls, seed).unwrap();
            assert!(ch.bs_ris.is_empty());
            assert_eq!(ch.bs_user[0].len(), 2);
            acc += norm_sqr(&ch.bs_user[0]);
        }
        // 2 entries per draw, 10^5 samples in total.
        let var = acc / (2 * draws) as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn zero_gain_gives_zero_link_and_same_seed_is_identical() {
        let dims = SystemDims::new(4, 3, 2).unwrap();
        let mut ls = LargeScale::unit(2);
        ls.bs_user[1] = 0.0;
        let a = gen_rayleigh(dims, &ls, 11).unwrap();
        assert!(a.bs_user[1].iter().all(|x| *x == c(0.0, 0.0)));
        assert_eq!(a, gen_rayleigh(dims, &ls, 11).unwrap());
        assert_ne!(a, gen_rayleigh(dims, &ls, 12).unwrap());
    }

    #[test]
    fn adding_users_keeps_existing_links() {
        let a = gen_rayleigh(SystemDims::new(3, 4, 2).unwrap(), &LargeScale::unit(2), 5).unwrap();
        let b = gen_rayleigh(SystemDims::new(3, 4, 3).unwrap(), &LargeScale::unit(3), 5).unwrap();
        assert_eq!(a.bs_ris, b.bs_ris);
        assert_eq!(a.ris_user[..], b.ris_user[..2]);
        assert_eq!(a.bs_user[..], b.bs_user[..2]);
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(matches!(SystemDims::new(0, 4, 1), Err(Error::Dimension(_))));
        assert!(matches!(SystemDims::new(2, 4, 0), Err(Error::Dimension(_))));
        let dims = SystemDims { antennas: 0, elements: 1, users: 1 };
        assert!(gen_rayleigh(dims, &LargeScale::unit(1), 0).is_err());
        let dims = SystemDims::new(2, 2, 2).unwrap();
        assert!(gen_rayleigh(dims, &LargeScale::unit(3), 0).is_err());
    }

    #[test]
    fn rician_without_specular_is_rayleigh() {
        let dims = SystemDims::new(4, 9, 3).unwrap();
        let ls = LargeScale::uniform(3, 0.5, 0.2, 0.1);
        let cfg = RicianConfig::with_specular(0);
        assert_eq!(gen_rician(dims, &cfg, &ls, 42).unwrap(), gen_rayleigh(dims, &ls, 42).unwrap());
    }

    #[test]
    fn k_factor_formula() {
        let k = rician_k_factor(100.0, 0.0).unwrap();
        assert!((k - 10.0).abs() < 1e-12);
        let reduced = rician_k_factor(100.0, -9.0).unwrap();
        assert!((reduced - 10f64.powf(0.1)).abs() < 1e-12);
        assert!(matches!(rician_k_factor(-1.0, 0.0), Err(Error::Domain(_))));
        let cfg = RicianConfig {
            distance_bs_ris_m: -5.0,
            ..RicianConfig::default()
        };
        let dims = SystemDims::new(2, 2, 1).unwrap();
        assert!(matches!(gen_rician(dims, &cfg, &LargeScale::unit(1), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn large_k_limit_is_all_specular() {
        // With one specular path every entry has unit modulus, so at K → ∞ each
        // entry's power is K/(K+1) of the link power plus a vanishing diffuse part.
        let dims = SystemDims::new(8, 16, 2).unwrap();
        let cfg = RicianConfig {
            k_factor_offset_db: 60.0,
            ..RicianConfig::with_specular(1)
        };
        let ls = LargeScale::uniform(2, 1.0, 0.3, 1.0);
        let mut acc = 0.0;
        let mut n = 0;
        for seed in 0..200 {
            let ch = gen_rician(dims, &cfg, &ls, seed).unwrap();
            for g in &ch.ris_user {
                acc += norm_sqr(g);
                n += g.len();
            }
        }
        let power = acc / n as f64;
        assert!((power / 0.3 - 1.0).abs() < 0.01, "per-entry power {power}");

        // Several specular paths: the total power is preserved on average.
        let cfg3 = RicianConfig {
            k_factor_offset_db: 60.0,
            ..RicianConfig::with_specular(3)
        };
        let mut acc = 0.0;
        let mut n = 0;
        for seed in 0..2000 {
            let ch = gen_rician(dims, &cfg3, &ls, seed).unwrap();
            acc += norm_sqr(&ch.ris_user[0]);
            n += dims.elements;
        }
        let power = acc / n as f64;
        assert!((power / 0.3 - 1.0).abs() < 0.05, "per-entry power {power}");
    }

    #[test]
    fn specular_amplitudes_split_power() {
        let cfg = RicianConfig::default();
        for s in 1..6 {
            let p: f64 = cfg.amplitudes(s).iter().map(|a| a * a).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
        assert_eq!(cfg.amplitudes(3)[0], 0.5f64.sqrt());
        assert!(cfg.amplitudes(0).is_empty());
    }

    #[test]
    fn aggregate_hand_cases() {
        // u = [1], H = [j], g = [1], θ = π/2 → z = 1 + j·j = 0.
        let ch = ChannelRealization {
            dims: SystemDims::new(1, 1, 1).unwrap(),
            bs_ris: vec![c(0.0, 1.0)],
            ris_user: vec![vec![c(1.0, 0.0)]],
            bs_user: vec![vec![c(1.0, 0.0)]],
            large_scale: LargeScale::unit(1),
        };
        let z = aggregate(&ch, &PhaseVector::new(vec![FRAC_PI_2]).unwrap()).unwrap();
        assert!(z.z[0][0].norm() < 1e-15);

        let dims = SystemDims::new(3, 0, 2).unwrap();
        let ch = gen_rayleigh(dims, &LargeScale::unit(2), 3).unwrap();
        let z = aggregate(&ch, &PhaseVector::zeros(0)).unwrap();
        assert_eq!(z.z, ch.bs_user);

        let dims = SystemDims::new(3, 5, 2).unwrap();
        let ch = gen_rayleigh(dims, &LargeScale::unit(2), 3).unwrap();
        let z = aggregate(&ch, &PhaseVector::zeros(5)).unwrap();
        for k in 0..2 {
            for m in 0..3 {
                let hg: Complex64 = (0..5).map(|n| ch.bs_ris_entry(m, n) * ch.ris_user[k][n]).sum();
                assert!((z.z[k][m] - (ch.bs_user[k][m] + hg)).norm() < 1e-12);
            }
        }
        assert!(aggregate(&ch, &PhaseVector::zeros(4)).is_err());
    }

    #[test]
    fn phase_vector_bounds() {
        assert!(PhaseVector::new(vec![PI, -PI, 0.0]).is_ok());
        assert!(PhaseVector::new(vec![3.2]).is_err());
        assert!(PhaseVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn csi_error_statistics() {
        let dims = SystemDims::new(64, 8, 4).unwrap();
        let ch = gen_rayleigh(dims, &LargeScale::unit(4), 1).unwrap();
        let z = aggregate(&ch, &PhaseVector::zeros(8)).unwrap();
        assert_eq!(corrupt_csi(&z, 0.0, 9).unwrap(), z);
        let mut acc = 0.0;
        let mut n = 0usize;
        let draws = 40;
        for seed in 0..draws {
            let zt = corrupt_csi(&z, 0.1, seed).unwrap();
            for (a, b) in zt.z.iter().zip(&z.z) {
                for (x, y) in a.iter().zip(b) {
                    acc += (x - y).norm_sqr();
                    n += 1;
                }
            }
        }
        // 40 draws × 256 entries ≈ 10^4 samples.
        let mse = acc / n as f64;
        assert!((mse / 0.1 - 1.0).abs() < 0.05, "mse {mse}");
        assert!(corrupt_csi(&z, -0.1, 0).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let dims = SystemDims::new(2, 3, 2).unwrap();
        let ch = gen_rician(dims, &RicianConfig::with_specular(2), &LargeScale::unit(2), 4).unwrap();
        let json = serde_json::to_string(&ch).unwrap();
        let back: ChannelRealization = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ch);
        let mut dump = ChannelDump::from(ch);
        dump.bs_ris.pop();
        assert!(ChannelRealization::try_from(dump).is_err());
    }

    proptest! {
        #[test]
        fn cascade_matches_direct_aggregation(seed in 0u64..1000, thetas in prop::collection::vec(-PI..PI, 6)) {
            let dims = SystemDims::new(3, 6, 2).unwrap();
            let ch = gen_rayleigh(dims, &LargeScale::unit(2), seed).unwrap();
            let theta = PhaseVector::new(thetas).unwrap();
            let a = aggregate(&ch, &theta).unwrap();
            let b = ch.cascade().aggregate(&theta.phasors());
            for (x, y) in a.z.iter().flatten().zip(b.z.iter().flatten()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            for p in theta.phasors() {
                prop_assert!((p.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn aggregate_is_linear_in_direct_and_reflected_links(seed in 0u64..500, a in -2.0f64..2.0, t in -PI..PI) {
            let dims = SystemDims::new(2, 3, 1).unwrap();
            let ch = gen_rayleigh(dims, &LargeScale::unit(1), seed).unwrap();
            let theta = PhaseVector::new(vec![t; 3]).unwrap();
            let base = aggregate(&ch, &theta).unwrap();
            let mut scaled = ch.clone();
            scaled.bs_user[0].iter_mut().for_each(|x| *x *= a);
            scaled.ris_user[0].iter_mut().for_each(|x| *x *= a);
            let z = aggregate(&scaled, &theta).unwrap();
            for (x, y) in z.z[0].iter().zip(&base.z[0]) {
                prop_assert!((x - y * a).norm() < 1e-12);
            }
            let mut no_ris = ch.clone();
            no_ris.bs_ris.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            prop_assert_eq!(aggregate(&no_ris, &theta).unwrap().z, ch.bs_user.clone());
        }
    }
}
