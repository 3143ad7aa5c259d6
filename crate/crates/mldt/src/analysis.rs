//! Closed-form BER bounds for collided-user detection and Monte Carlo
//! capacity estimation of the two-user BPSK superchannel.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::draw_rayleigh_gain;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Average per-user SNR gamma_bar = E[|h|^2] / N0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    gamma_bar: f64,
}

impl SnrPoint {
    pub fn from_linear(gamma_bar: f64) -> Result<Self> {
        if !gamma_bar.is_finite() || gamma_bar <= 0.0 {
            return Err(Error::config(format!("gamma_bar must be positive, got {gamma_bar}")));
        }
        Ok(SnrPoint { gamma_bar })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::config("SNR in dB must be finite"));
        }
        SnrPoint::from_linear(10f64.powf(db / 10.0))
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn db(&self) -> f64 {
        10.0 * self.gamma_bar.log10()
    }
}

fn rayleigh_term(scale: f64, gamma_bar: f64) -> f64 {
    let g = scale * gamma_bar;
    0.5 * (1.0 - (g / (1.0 + g)).sqrt())
}

/// Exact average BER of single-user BPSK over the Rayleigh fading channel:
/// (1/2)(1 - sqrt(gb / (1 + gb))).
pub fn ber_exact_p1(snr: SnrPoint) -> f64 {
    rayleigh_term(1.0, snr.gamma_bar)
}

/// Upper bound on the two-user average BER:
/// (1/2)(1 - sqrt(gb/(1+gb))) + (1/2)(1 - sqrt(2gb/(1+2gb))).
pub fn ber_upper_p2(snr: SnrPoint) -> f64 {
    rayleigh_term(1.0, snr.gamma_bar) + rayleigh_term(2.0, snr.gamma_bar)
}

/// Upper bound on the three-user average BER:
/// (1/2)(1 - sqrt(gb/(1+gb))) + (1 - sqrt(2gb/(1+2gb))) + (1/2)(1 - sqrt(3gb/(1+3gb))).
pub fn ber_upper_p3(snr: SnrPoint) -> f64 {
    rayleigh_term(1.0, snr.gamma_bar)
        + 2.0 * rayleigh_term(2.0, snr.gamma_bar)
        + rayleigh_term(3.0, snr.gamma_bar)
}

/// High-SNR approximations: 1/(4 gb), 3/(8 gb), 7/(12 gb) for P = 1, 2, 3.
pub fn ber_highsnr_approx(p_users: usize, snr: SnrPoint) -> Result<f64> {
    let g = snr.gamma_bar;
    match p_users {
        1 => Ok(1.0 / (4.0 * g)),
        2 => Ok(3.0 / (8.0 * g)),
        3 => Ok(7.0 / (12.0 * g)),
        _ => Err(Error::unsupported(format!("high-SNR approximation defined for P in 1..=3, got {p_users}"))),
    }
}

/// Gaussian tail function Q(x) = erfc(x / sqrt(2)) / 2.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function, accurate to better than 1e-14.
///
/// Taylor series of erf for small arguments, Lentz continued fraction for the
/// tail.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        // erf(x) = (2/sqrt(pi)) sum_{n>=0} (-1)^n x^(2n+1) / (n! (2n+1))
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2.0 * n as f64 + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Asymptotic continued fraction (modified Lentz):
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let x2 = x * x;
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0f64;
        for n in 1..300 {
            let a = n as f64 / 2.0;
            d = x + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (-x2).exp() / std::f64::consts::PI.sqrt() / f
    }
}

/// Capacity estimator mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityMode {
    /// Two collided BPSK users over independent Rayleigh fades.
    TwoUserBpskRayleigh,
    /// Degenerate substitution |h_A| = |h_B|, theta = pi/2 over one Rayleigh fade.
    QpskRayleigh,
    /// Same degenerate constellation with unit gains (no fading).
    QpskAwgn,
    /// Single-user BPSK with unit gain.
    BpskAwgn,
}

impl CapacityMode {
    /// Mean symbol energy E[|s|^2] of the superimposed constellation.
    pub fn mean_symbol_energy(&self) -> f64 {
        match self {
            CapacityMode::BpskAwgn => 1.0,
            _ => 2.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two_user_bpsk_rayleigh" => Ok(CapacityMode::TwoUserBpskRayleigh),
            "qpsk_rayleigh" => Ok(CapacityMode::QpskRayleigh),
            "qpsk_awgn" => Ok(CapacityMode::QpskAwgn),
            "bpsk_awgn" => Ok(CapacityMode::BpskAwgn),
            _ => Err(Error::config(format!("unknown capacity mode '{s}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CapacityMode::TwoUserBpskRayleigh => "two_user_bpsk_rayleigh",
            CapacityMode::QpskRayleigh => "qpsk_rayleigh",
            CapacityMode::QpskAwgn => "qpsk_awgn",
            CapacityMode::BpskAwgn => "bpsk_awgn",
        }
    }
}

/// Monte Carlo mutual-information estimate in bits per channel use.
#[derive(Debug, Clone, Copy)]
pub struct CapacityEstimate {
    pub bits_per_channel_use: f64,
    pub std_error: f64,
    pub num_samples: usize,
}

const CHUNK: usize = 10_000;

/// Estimate the mutual information of the superimposed channel by sampling
/// gains, inputs and noise, and averaging log2 of the likelihood ratio
/// f(r|s) / ((1/4) sum_s' f(r|s')).
pub fn estimate_capacity(
    mode: CapacityMode,
    es_n0_db: f64,
    samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    if !es_n0_db.is_finite() {
        return Err(Error::config("Es/N0 must be finite"));
    }
    if samples < 10_000 {
        return Err(Error::config(format!("capacity estimation needs >= 10^4 samples, got {samples}")));
    }
    let es = mode.mean_symbol_energy();
    let n0 = es / 10f64.powf(es_n0_db / 10.0);
    // Complex-baseband modes split N0 across the two noise dimensions; the
    // single-user real BPSK channel follows the one-dimensional y = x + n
    // convention with full noise variance N0 in the signaling dimension.
    let sigma2 = match mode {
        CapacityMode::BpskAwgn => n0,
        _ => n0 / 2.0,
    };
    let num_chunks = samples.div_ceil(CHUNK);
    // Per-chunk substreams keep the estimate independent of thread count;
    // partial sums reduce in chunk order.
    let partials: Vec<(f64, f64, usize)> = (0..num_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = substream(seed, 0x4341_5000 + chunk as u64);
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let (ha, hb) = draw_mode_gains(mode, &mut rng);
                let xa = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let xb = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let s = ha * xa + hb * xb;
                let w = Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma2.sqrt(),
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma2.sqrt(),
                );
                let r = s + w;
                // log-domain likelihood ratio against the 4-point mixture
                let mut t = [0.0f64; 4];
                let mut sel = 0.0;
                for (i, (ca, cb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                    .iter()
                    .enumerate()
                {
                    let cand = ha * *ca + hb * *cb;
                    t[i] = -(r - cand).norm_sqr() / (2.0 * sigma2);
                    if (*ca - xa).abs() < 0.5 && (*cb - xb).abs() < 0.5 {
                        sel = t[i];
                    }
                }
                let max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + t.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                let info = (sel - lse + (4.0f64).ln()) / std::f64::consts::LN_2;
                sum += info;
                sum_sq += info * info;
            }
            (sum, sum_sq, count)
        })
        .collect();
    let (sum, sum_sq, n) = partials
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok(CapacityEstimate {
        bits_per_channel_use: mean,
        std_error: (var / n as f64).sqrt(),
        num_samples: n,
    })
}

fn draw_mode_gains(mode: CapacityMode, rng: &mut impl Rng) -> (Complex64, Complex64) {
    match mode {
        CapacityMode::TwoUserBpskRayleigh => {
            let ha = draw_rayleigh_gain(rng, 1.0).unwrap().as_complex();
            let hb = draw_rayleigh_gain(rng, 1.0).unwrap().as_complex();
            (ha, hb)
        }
        CapacityMode::QpskRayleigh => {
            let a = draw_rayleigh_gain(rng, 1.0).unwrap().amplitude();
            (Complex64::new(a, 0.0), Complex64::new(0.0, a))
        }
        CapacityMode::QpskAwgn => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)),
        CapacityMode::BpskAwgn => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
    }
}
