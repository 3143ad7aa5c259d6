//! MC-DS-CDMA transceiver: per-subcarrier spreading, unitary IDFT/DFT pair
//! with cyclic prefix, multipath channel, per-subcarrier despreading and
//! multilevel detection, plus the inter-SPA LLR exchange between the two
//! users sharing a signature.

use crate::channel::{ChannelGain, NoiseModel};
use crate::detector::{bit_llrs, build_table, tuple_app, LikelihoodVector, LLR_MAX};
use crate::error::{Error, Result};
use crate::ldpc::{spa_decode_with, ParityMatrix, SpaOutput};
use crate::spread::SignatureSet;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct OfdmConfig {
    pub n_sub: usize,
    pub cp_len: usize,
}

impl OfdmConfig {
    pub fn new(n_sub: usize, cp_len: usize) -> Result<Self> {
        if n_sub == 0 {
            return Err(Error::config("subcarrier count must be positive"));
        }
        Ok(OfdmConfig { n_sub, cp_len })
    }

    pub fn symbol_len(&self) -> usize {
        self.n_sub + self.cp_len
    }
}

/// Serialized time-domain stream of one user: J OFDM symbols of
/// `n_sub + cp_len` samples each.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub config: OfdmConfig,
    pub j_chips: usize,
    pub samples: Vec<Complex64>,
}

/// Unitary N-point DFT (1/sqrt(N) both directions).
pub fn dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = sign * 2.0 * PI * (k * t) as f64 / n as f64;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            acc * scale
        })
        .collect()
}

/// Frequency response H^n: plain N-point DFT of the zero-padded tap vector.
pub fn freq_response(taps: &[ChannelGain], n_sub: usize) -> Result<Vec<Complex64>> {
    if taps.is_empty() || taps.len() > n_sub {
        return Err(Error::dimension(format!(
            "need 1..={n_sub} channel taps, got {}",
            taps.len()
        )));
    }
    Ok((0..n_sub)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, tap) in taps.iter().enumerate() {
                let ang = -2.0 * PI * (n * l) as f64 / n_sub as f64;
                acc += tap.as_complex() * Complex64::new(ang.cos(), ang.sin());
            }
            acc
        })
        .collect())
}

fn bit_to_level(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Spread `bits` (one per subcarrier) with signature `k` and modulate: for
/// each chip index j the N_sub spectrum X^n(j) = b^n s_k(j) is inverse-DFT'd
/// and a cyclic prefix is prepended.
pub fn mcds_modulate(bits: &[u8], signatures: &SignatureSet, k: usize, config: OfdmConfig) -> Result<OfdmFrame> {
    if bits.len() != config.n_sub {
        return Err(Error::dimension(format!(
            "need one bit per subcarrier ({}), got {}",
            config.n_sub,
            bits.len()
        )));
    }
    if k >= signatures.num_sequences() {
        return Err(Error::dimension(format!("signature index {k} out of range")));
    }
    let sig = signatures.row(k);
    let j_chips = signatures.chip_length();
    let mut samples = Vec::with_capacity(j_chips * config.symbol_len());
    for &chip in sig.iter() {
        let spectrum: Vec<Complex64> = bits
            .iter()
            .map(|&b| Complex64::new(bit_to_level(b) * f64::from(chip), 0.0))
            .collect();
        let time = dft(&spectrum, true);
        samples.extend(time[config.n_sub - config.cp_len.min(config.n_sub)..].iter().copied());
        samples.extend(time.iter().copied());
    }
    Ok(OfdmFrame {
        config,
        j_chips,
        samples,
    })
}

/// Superpose every user's frame through its own multipath channel and add
/// AWGN. Returns the received stream plus an intersymbol-interference flag
/// raised when the cyclic prefix is shorter than the channel memory.
pub fn mcds_channel(
    frames: &[OfdmFrame],
    taps: &[Vec<ChannelGain>],
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<(Vec<Complex64>, bool)> {
    if frames.is_empty() || frames.len() != taps.len() {
        return Err(Error::dimension("one tap vector per frame is required"));
    }
    let len = frames[0].samples.len();
    let config = frames[0].config;
    if frames.iter().any(|f| f.samples.len() != len) {
        return Err(Error::dimension("frames must have equal length"));
    }
    let mut isi = false;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (frame, user_taps) in frames.iter().zip(taps.iter()) {
        if user_taps.is_empty() {
            return Err(Error::dimension("each user needs at least one path"));
        }
        if config.cp_len + 1 < user_taps.len() {
            isi = true;
        }
        for (l, tap) in user_taps.iter().enumerate() {
            let h = tap.as_complex();
            for t in l..len {
                out[t] += h * frame.samples[t - l];
            }
        }
    }
    for o in &mut out {
        *o += noise.sample(rng);
    }
    Ok((out, isi))
}

/// CP removal, per-symbol unitary DFT, despreading of signature `k`, and one
/// despread scalar per subcarrier: R^n_k = (1/J) sum_j R^n(j) s_k(j).
pub fn mcds_despread(
    received: &[Complex64],
    signatures: &SignatureSet,
    k: usize,
    config: OfdmConfig,
) -> Result<Vec<Complex64>> {
    let j_chips = signatures.chip_length();
    let sym = config.symbol_len();
    if received.len() != j_chips * sym {
        return Err(Error::dimension(format!(
            "received stream must hold {j_chips} OFDM symbols of {sym} samples, got {}",
            received.len()
        )));
    }
    if k >= signatures.num_sequences() {
        return Err(Error::dimension(format!("signature index {k} out of range")));
    }
    let sig = signatures.row(k);
    let mut acc = vec![Complex64::new(0.0, 0.0); config.n_sub];
    for (jj, &chip) in sig.iter().enumerate() {
        let start = jj * sym + config.cp_len;
        let spectrum = dft(&received[start..start + config.n_sub], false);
        for (a, &s) in acc.iter_mut().zip(spectrum.iter()) {
            *a += s * f64::from(chip);
        }
    }
    for a in &mut acc {
        *a /= j_chips as f64;
    }
    Ok(acc)
}

/// Full receiver front end: despread and run the multilevel detector per
/// subcarrier with gains (H^n of each collided user) and noise variance
/// scaled by 1/J. Returns `n_sub` LLR frames of P entries each.
pub fn mcds_despread_detect(
    received: &[Complex64],
    signatures: &SignatureSet,
    k: usize,
    h_users: &[Vec<Complex64>],
    noise: &NoiseModel,
    config: OfdmConfig,
) -> Result<Vec<Vec<f64>>> {
    let p_users = h_users.len();
    if !(1..=3).contains(&p_users) {
        return Err(Error::unsupported(format!("detector supports 1..=3 collided users, got {p_users}")));
    }
    if h_users.iter().any(|h| h.len() != config.n_sub) {
        return Err(Error::dimension("need one frequency gain per subcarrier per user"));
    }
    let despread = mcds_despread(received, signatures, k, config)?;
    let scaled = NoiseModel::new(noise.n0() / signatures.chip_length() as f64)?;
    let mut out = Vec::with_capacity(config.n_sub);
    for (n, &r) in despread.iter().enumerate() {
        let gains: Vec<ChannelGain> = h_users.iter().map(|h| ChannelGain::from_complex(h[n])).collect();
        let table = build_table(&gains)?;
        let app = tuple_app(r, &table, &scaled, &LikelihoodVector::uniform(p_users))?;
        out.push(bit_llrs(&app));
    }
    Ok(out)
}

/// Everything the inter-SPA exchange needs to revisit one detected symbol.
#[derive(Debug, Clone, Copy)]
pub struct DetectionContext {
    pub r: Complex64,
    pub h_a: Complex64,
    pub h_b: Complex64,
    /// Per-dimension noise variance of `r`.
    pub sigma2: f64,
}

impl DetectionContext {
    fn levels(&self) -> [Complex64; 4] {
        [
            self.h_a + self.h_b,
            self.h_a - self.h_b,
            -self.h_a + self.h_b,
            -self.h_a - self.h_b,
        ]
    }

    fn kernels(&self) -> [f64; 4] {
        let lv = self.levels();
        let mut logs = [0.0f64; 4];
        for (i, l) in lv.iter().enumerate() {
            logs[i] = -(self.r - l).norm_sqr() / (2.0 * self.sigma2);
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = [0.0f64; 4];
        for i in 0..4 {
            out[i] = (logs[i] - max).exp();
        }
        out
    }

    /// Plain two-user LLR for one user with a uniform prior on the other.
    pub fn initial_llr(&self, user_b: bool) -> f64 {
        self.recalculate_llr(0.0, user_b)
    }

    /// Updated LLR of one user given the other user's posterior LLR: the
    /// Gaussian kernels are reweighted by the sigmoid prior factors and the
    /// partition sums re-formed.
    pub fn recalculate_llr(&self, other_llr: f64, user_b: bool) -> f64 {
        let kern = self.kernels();
        // Pr{other bit = 0} from its posterior LLR = ln(P0/P1).
        let p0 = 1.0 / (1.0 + (-other_llr.clamp(-LLR_MAX, LLR_MAX)).exp());
        let mut p = [0.0f64; 4];
        for (i, &kv) in kern.iter().enumerate() {
            // Tuple index i = 2a + b.
            let other_bit = if user_b { (i >> 1) & 1 } else { i & 1 };
            p[i] = kv * if other_bit == 0 { p0 } else { 1.0 - p0 };
        }
        let (zero, one) = if user_b {
            (p[0] + p[2], p[1] + p[3])
        } else {
            (p[0] + p[1], p[2] + p[3])
        };
        ((zero.max(1e-300)) / (one.max(1e-300))).ln().clamp(-LLR_MAX, LLR_MAX)
    }
}

#[derive(Debug, Clone)]
pub struct InterSpaOutput {
    pub output_a: SpaOutput,
    pub output_b: SpaOutput,
    pub rounds: usize,
}

/// Alternating per-user decoding with LLR exchange: decode A, rebuild B's
/// channel LLRs from A's posterior, decode B, feed back symmetrically, and
/// repeat for `rounds` passes.
pub fn inter_spa_decode(
    contexts: &[DetectionContext],
    matrix: &ParityMatrix,
    rounds: usize,
    max_iter: usize,
    early_exit: bool,
) -> Result<InterSpaOutput> {
    if rounds == 0 {
        return Err(Error::config("inter-SPA needs at least one round"));
    }
    if contexts.len() != matrix.n() {
        return Err(Error::dimension(format!(
            "need one detection context per code bit ({}), got {}",
            matrix.n(),
            contexts.len()
        )));
    }
    let llrs_a: Vec<f64> = contexts.iter().map(|c| c.initial_llr(false)).collect();
    let mut out_a = spa_decode_with(&llrs_a, matrix, max_iter, early_exit)?;
    let mut out_b = {
        let llrs_b: Vec<f64> = contexts
            .iter()
            .zip(out_a.posterior.iter())
            .map(|(c, &la)| c.recalculate_llr(la, true))
            .collect();
        spa_decode_with(&llrs_b, matrix, max_iter, early_exit)?
    };
    for _ in 1..rounds {
        let llrs_a: Vec<f64> = contexts
            .iter()
            .zip(out_b.posterior.iter())
            .map(|(c, &lb)| c.recalculate_llr(lb, false))
            .collect();
        out_a = spa_decode_with(&llrs_a, matrix, max_iter, early_exit)?;
        let llrs_b: Vec<f64> = contexts
            .iter()
            .zip(out_a.posterior.iter())
            .map(|(c, &la)| c.recalculate_llr(la, true))
            .collect();
        out_b = spa_decode_with(&llrs_b, matrix, max_iter, early_exit)?;
    }
    Ok(InterSpaOutput {
        output_a: out_a,
        output_b: out_b,
        rounds,
    })
}
