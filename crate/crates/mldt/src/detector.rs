//! Multilevel detection for P in {1,2,3} collided BPSK users.
//!
//! The superposition of P users with known gains forms a 2^P-level
//! constellation; a received sample is converted into tuple posteriors,
//! per-bit LLRs and hard decisions. Tuple index convention:
//! i = 4 b_A + 2 b_B + b_C for P = 3, specialized to i = 2 b_A + b_B for
//! P = 2 (MSB is user A).

use num_complex::Complex64;

use crate::channel::{ChannelGain, NoiseModel};
use crate::error::{Error, Result};

/// Natural-log LLR clamp; prevents infinities from propagating into decoders.
pub const LLR_MAX: f64 = 40.0;

/// The 2^P noiseless superposition levels S(i) for known gains.
#[derive(Debug, Clone)]
pub struct SuperpositionTable {
    p_users: usize,
    levels: Vec<Complex64>,
    gains: Vec<ChannelGain>,
}

impl SuperpositionTable {
    pub fn p_users(&self) -> usize {
        self.p_users
    }

    pub fn levels(&self) -> &[Complex64] {
        &self.levels
    }

    pub fn gains(&self) -> &[ChannelGain] {
        &self.gains
    }

    /// Noiseless received value for bit tuple `i`.
    pub fn level(&self, i: usize) -> Complex64 {
        self.levels[i]
    }
}

/// Nonnegative length-2^P vector over tuple hypotheses, normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector {
    probs: Vec<f64>,
}

impl LikelihoodVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || !probs.len().is_power_of_two() {
            return Err(Error::dimension(format!(
                "likelihood vector length must be a power of two, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::config("likelihood vector entries must be finite and nonnegative"));
        }
        let mut lv = LikelihoodVector { probs };
        lv.normalize();
        Ok(lv)
    }

    /// Uniform vector over 2^P hypotheses.
    pub fn uniform(p_users: usize) -> Self {
        let q = 1usize << p_users;
        LikelihoodVector {
            probs: vec![1.0 / q as f64; q],
        }
    }

    /// Indicator at hypothesis `i`.
    pub fn delta(p_users: usize, i: usize) -> Self {
        let q = 1usize << p_users;
        let mut probs = vec![0.0; q];
        probs[i] = 1.0;
        LikelihoodVector { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Renormalize to sum 1. An all-zero vector becomes uniform.
    pub fn normalize(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            for p in &mut self.probs {
                *p /= sum;
            }
        } else {
            let q = self.probs.len();
            for p in &mut self.probs {
                *p = 1.0 / q as f64;
            }
        }
    }
}

/// Value of bit `p` (0 = user A, MSB first) in tuple index `i`.
#[inline]
pub fn tuple_bit(i: usize, p: usize, p_users: usize) -> usize {
    (i >> (p_users - 1 - p)) & 1
}

/// Build the 2^P-level table: levels[i] = sum_p (-1)^{bit_p(i)} gains[p].
pub fn build_table(gains: &[ChannelGain]) -> Result<SuperpositionTable> {
    let p_users = gains.len();
    if !(1..=3).contains(&p_users) {
        return Err(Error::unsupported(format!(
            "superposition table supports 1..=3 users, got {p_users}"
        )));
    }
    let q = 1usize << p_users;
    let mut levels = Vec::with_capacity(q);
    for i in 0..q {
        let mut s = Complex64::new(0.0, 0.0);
        for (p, g) in gains.iter().enumerate() {
            let sign = if tuple_bit(i, p, p_users) == 0 { 1.0 } else { -1.0 };
            s += g.as_complex() * sign;
        }
        levels.push(s);
    }
    Ok(SuperpositionTable {
        p_users,
        levels,
        gains: gains.to_vec(),
    })
}

/// Tuple a-posteriori probabilities for a received sample.
///
/// probs[i] is proportional to prior[i] * exp(-|r - S(i)|^2 / (2 sigma^2)),
/// computed in log domain with max-subtraction.
pub fn tuple_app(
    r: Complex64,
    table: &SuperpositionTable,
    noise: &NoiseModel,
    prior: &LikelihoodVector,
) -> Result<LikelihoodVector> {
    let sigma2 = noise.sigma2();
    if sigma2 <= 0.0 {
        return Err(Error::config("tuple_app requires sigma^2 > 0"));
    }
    if prior.len() != table.levels.len() {
        return Err(Error::dimension(format!(
            "prior length {} does not match table size {}",
            prior.len(),
            table.levels.len()
        )));
    }
    let mut logp: Vec<f64> = table
        .levels
        .iter()
        .zip(prior.probs())
        .map(|(&s, &pr)| {
            let d = r - s;
            let lp = if pr > 0.0 { pr.ln() } else { f64::NEG_INFINITY };
            lp - d.norm_sqr() / (2.0 * sigma2)
        })
        .collect();
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = if max.is_finite() {
        logp.iter_mut().map(|lp| (*lp - max).exp()).collect()
    } else {
        vec![1.0; logp.len()]
    };
    LikelihoodVector::new(probs)
}

/// Per-user bit LLRs from tuple posteriors.
///
/// LLR_p = ln(sum over i with bit_p(i)=0 / sum over i with bit_p(i)=1),
/// clamped to +/- LLR_MAX.
pub fn bit_llrs(probs: &LikelihoodVector) -> Vec<f64> {
    let q = probs.len();
    let p_users = q.trailing_zeros() as usize;
    let mut llrs = Vec::with_capacity(p_users);
    for p in 0..p_users {
        let mut zero = 0.0;
        let mut one = 0.0;
        for (i, &pr) in probs.probs().iter().enumerate() {
            if tuple_bit(i, p, p_users) == 0 {
                zero += pr;
            } else {
                one += pr;
            }
        }
        llrs.push(clamp_llr((zero / one).ln()));
    }
    llrs
}

/// Clamp an LLR to +/- LLR_MAX, mapping NaN (0/0) to 0.
#[inline]
pub fn clamp_llr(llr: f64) -> f64 {
    if llr.is_nan() {
        0.0
    } else {
        llr.clamp(-LLR_MAX, LLR_MAX)
    }
}

/// Hard decisions: bit = 0 iff LLR >= 0.
pub fn hard_decide(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
}
