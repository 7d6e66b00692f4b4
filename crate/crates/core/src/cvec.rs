//! Small complex-vector helpers shared by the link-level modules.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CVec = Vec<Complex64>;

/// `aᴴb = Σ conj(a_i)·b_i`.
#[inline]
pub fn inner_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// One draw of a circularly symmetric complex Gaussian with total variance `var`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> CVec {
    (0..len).map(|_| complex_gaussian(rng, var)).collect()
}

/// Interleaves `[re0, im0, re1, im1, ...]`.
pub fn interleave(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn deinterleave(v: &[f64]) -> Option<CVec> {
    if !v.len().is_multiple_of(2) {
        return None;
    }
    Some(
        v.chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect(),
    )
}
