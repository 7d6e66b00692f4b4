//! Square m-QAM constellations with unit average symbol energy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voronoi-region class of a constellation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetLabel {
    /// Quarter-plane region (the four outermost corners).
    Corner,
    /// Half-strip region on the outer ring, corners excluded.
    Boundary,
    /// Box region.
    Interior,
}

/// Square m-QAM. Point `t` sits at `(level(t % √m), level(t / √m))` with
/// `level(i) = (2i + 1 − √m)·δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    order: u32,
    side: usize,
    delta: f64,
    points: Vec<Complex64>,
    labels: Vec<SubsetLabel>,
}

/// `√m` when `m` is a perfect square ≥ 4 with a power-of-two side (so that
/// every symbol carries a whole number of bits).
pub fn qam_side(order: u32) -> Result<usize> {
    let side = (order as f64).sqrt().round() as u32;
    if order < 4 || side * side != order || !side.is_power_of_two() {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(side as usize)
}

/// Half the minimum distance at unit symbol energy: `√(3 / (2(m − 1)))`.
pub fn half_distance(order: u32) -> f64 {
    (3.0 / (2.0 * (order as f64 - 1.0))).sqrt()
}

impl Constellation {
    pub fn new(order: u32) -> Result<Self> {
        let side = qam_side(order)?;
        let delta = half_distance(order);
        let outer = side - 1;
        let mut points = Vec::with_capacity(order as usize);
        let mut labels = Vec::with_capacity(order as usize);
        for q in 0..side {
            for p in 0..side {
                points.push(Complex64::new(level(p, side, delta), level(q, side, delta)));
                let on_edge = |i: usize| i == 0 || i == outer;
                labels.push(match (on_edge(p), on_edge(q)) {
                    (true, true) => SubsetLabel::Corner,
                    (false, false) => SubsetLabel::Interior,
                    _ => SubsetLabel::Boundary,
                });
            }
        }
        Ok(Self {
            order,
            side,
            delta,
            points,
            labels,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `√m`, the number of levels per axis.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[SubsetLabel] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis()
    }

    fn bits_per_axis(&self) -> usize {
        self.side.trailing_zeros() as usize
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Counts of (corner, boundary, interior) points.
    pub fn subset_counts(&self) -> (usize, usize, usize) {
        self.labels.iter().fold((0, 0, 0), |(c, b, i), l| match l {
            SubsetLabel::Corner => (c + 1, b, i),
            SubsetLabel::Boundary => (c, b + 1, i),
            SubsetLabel::Interior => (c, b, i + 1),
        })
    }

    /// Index of the point equal to `point` (to within 1e-9·δ), if any.
    pub fn index_of(&self, point: Complex64) -> Option<usize> {
        let tol = 1e-9 * self.delta;
        self.points.iter().position(|s| (s - point).norm() <= tol)
    }

    pub fn classify(&self, point: Complex64) -> Result<SubsetLabel> {
        self.index_of(point)
            .map(|t| self.labels[t])
            .ok_or(Error::NotAMember {
                re: point.re,
                im: point.im,
            })
    }

    /// Level index on one axis; coordinates exactly on a decision boundary go
    /// to the lower level.
    #[inline]
    fn slice_axis(&self, x: f64) -> usize {
        let v = 0.5 * (x / self.delta + (self.side - 1) as f64);
        let i = (v - 0.5).ceil();
        i.clamp(0.0, (self.side - 1) as f64) as usize
    }

    /// Minimum-distance (Voronoi) detection. On the rectangular grid the
    /// nearest point is found per axis; ties resolve to the lowest index.
    #[inline]
    pub fn detect(&self, r: Complex64) -> usize {
        self.slice_axis(r.im) * self.side + self.slice_axis(r.re)
    }

    /// Gray-coded mapping: the first half of each symbol's bits selects the
    /// in-phase level, the second half the quadrature level.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let per = self.bits_per_symbol();
        if !bits.len().is_multiple_of(per) {
            return Err(Error::BitLength {
                len: bits.len(),
                bits_per_symbol: per,
            });
        }
        let half = self.bits_per_axis();
        Ok(bits
            .chunks_exact(per)
            .map(|chunk| {
                let p = gray_decode(pack(&chunk[..half]));
                let q = gray_decode(pack(&chunk[half..]));
                q * self.side + p
            })
            .collect())
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        Ok(self.map_bits(bits)?.into_iter().map(|t| self.points[t]).collect())
    }

    /// Inverse of [`Constellation::map_bits`].
    pub fn demap(&self, symbols: &[usize]) -> Vec<u8> {
        let half = self.bits_per_axis();
        let mut out = Vec::with_capacity(symbols.len() * 2 * half);
        for &t in symbols {
            unpack(gray_encode(t % self.side), half, &mut out);
            unpack(gray_encode(t / self.side), half, &mut out);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Standalone classification of a point of the m-QAM constellation.
pub fn classify_point(point: Complex64, order: u32) -> Result<SubsetLabel> {
    Constellation::new(order)?.classify(point)
}

fn level(i: usize, side: usize, delta: f64) -> f64 {
    (2.0 * i as f64 + 1.0 - side as f64) * delta
}

fn pack(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

fn unpack(v: usize, width: usize, out: &mut Vec<u8>) {
    out.extend((0..width).rev().map(|i| ((v >> i) & 1) as u8));
}

fn gray_encode(v: usize) -> usize {
    v ^ (v >> 1)
}

fn gray_decode(mut g: usize) -> usize {
    let mut v = g;
    while g > 1 {
        g >>= 1;
        v ^= g;
    }
    v
}
