//! Quasi-static Rayleigh fading gains, multipath tap sets, and complex AWGN.
//!
//! Gains are normalized so that E[|h|^2] = 1 per user (split evenly across
//! paths for multipath profiles). Within one quasi-static block every symbol
//! sees the identical gain; blocks are i.i.d.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Complex channel gain h = |h| e^{j theta}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain {
    pub re: f64,
    pub im: f64,
}

impl ChannelGain {
    pub fn new(re: f64, im: f64) -> Self {
        ChannelGain { re, im }
    }

    pub fn from_complex(z: Complex64) -> Self {
        ChannelGain { re: z.re, im: z.im }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn amplitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn phase(&self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn power(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Complex AWGN with spectral density `n0`, i.e. variance n0/2 per dimension.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if !n0.is_finite() || n0 <= 0.0 {
            return Err(Error::config(format!("noise density n0 must be positive and finite, got {n0}")));
        }
        Ok(NoiseModel { n0 })
    }

    /// Noise disabled; `add_awgn` becomes the identity. Not valid for detection.
    pub fn disabled() -> Self {
        NoiseModel { n0: 0.0 }
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Per-dimension variance sigma^2 = n0/2.
    pub fn sigma2(&self) -> f64 {
        self.n0 / 2.0
    }

    pub fn is_disabled(&self) -> bool {
        self.n0 == 0.0
    }

    /// Draw one complex noise sample.
    pub fn sample(&self, rng: &mut impl Rng) -> Complex64 {
        if self.is_disabled() {
            return Complex64::new(0.0, 0.0);
        }
        let s = self.sigma2().sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }
}

/// Multipath profile: `num_paths` taps, i.i.d. Rayleigh, powers summing to one.
#[derive(Debug, Clone)]
pub struct FadingProfile {
    pub num_paths: usize,
    pub path_powers: Vec<f64>,
    /// Symbols per quasi-static realization.
    pub block_length: usize,
}

impl FadingProfile {
    /// Equal average power per path, total unit power.
    pub fn equal_power(num_paths: usize, block_length: usize) -> Result<Self> {
        if num_paths == 0 {
            return Err(Error::config("fading profile needs at least one path"));
        }
        Ok(FadingProfile {
            num_paths,
            path_powers: vec![1.0 / num_paths as f64; num_paths],
            block_length,
        })
    }

    /// Draw one quasi-static tap set.
    pub fn draw_taps(&self, rng: &mut impl Rng) -> Result<Vec<ChannelGain>> {
        self.path_powers
            .iter()
            .map(|&p| draw_rayleigh_gain(rng, p))
            .collect()
    }
}

/// Draw h with |h| Rayleigh, E[|h|^2] = `mean_square`, phase uniform.
///
/// Real and imaginary parts are i.i.d. zero-mean Gaussian with variance
/// mean_square/2.
pub fn draw_rayleigh_gain(rng: &mut impl Rng, mean_square: f64) -> Result<ChannelGain> {
    if !mean_square.is_finite() || mean_square <= 0.0 {
        return Err(Error::config(format!("mean_square must be positive and finite, got {mean_square}")));
    }
    let s = (mean_square / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Ok(ChannelGain::new(s * re, s * im))
}

/// Add complex AWGN to a frame: output[n] = frame[n] + w(n).
pub fn add_awgn(frame: &[Complex64], noise: &NoiseModel, rng: &mut impl Rng) -> Vec<Complex64> {
    frame.iter().map(|&x| x + noise.sample(rng)).collect()
}

/// Discrete convolution of real chips with L complex taps.
///
/// Output length is `chips.len() + taps.len() - 1`; chips outside the given
/// slice are treated as zero (callers model adjacent-bit edge chips by
/// extending the slice themselves).
pub fn apply_multipath(chips: &[f64], taps: &[ChannelGain]) -> Result<Vec<Complex64>> {
    if taps.is_empty() {
        return Err(Error::config("multipath channel needs at least one tap"));
    }
    if chips.is_empty() {
        return Ok(Vec::new());
    }
    let out_len = chips.len() + taps.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for (l, tap) in taps.iter().enumerate() {
        let t = tap.as_complex();
        for (j, &c) in chips.iter().enumerate() {
            out[j + l] += t * c;
        }
    }
    Ok(out)
}
