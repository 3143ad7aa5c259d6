//! Monte Carlo engine and scenario runners behind the CLI: BER sweeps for
//! every receiver chain, capacity grids, rateless throughput sessions,
//! closed-form bound curves, and CSV emission.

pub mod config;
pub mod stats;

pub use config::{load_config, ConfigFile, DecoderKind, Scenario, ScenarioKind};
pub use stats::{wilson_99, Z_99};

use crate::analysis::{
    ber_exact_p1, ber_upper_p2, ber_upper_p3, estimate_capacity, CapacityMode, SnrPoint,
};
use crate::channel::{draw_rayleigh_gain, ChannelGain, NoiseModel};
use crate::detector::{bit_llrs, build_table, hard_decide, tuple_app, LikelihoodVector};
use crate::error::{Error, Result};
use crate::gspa::gspa_decode_with;
use crate::ldpc::{construct_with_encoder, spa_decode_with, Encoder, ParityMatrix};
use crate::mcds::{freq_response, inter_spa_decode, DetectionContext};
use crate::raptor::{run_session, DecoderPath, RaptorConfig};
use crate::rng::substream;
use crate::spread::{cdma_detect, cdma_transmit, gen_hadamard, gen_msequence, SignatureSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::time::Instant;

/// Chunks launched per parallel wave; fixed so the stopping rule sees the
/// same accumulation boundaries regardless of thread count.
const WAVE: u64 = 32;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Disable decoder early exit for strict fixed-budget iteration counts.
    pub strict_iterations: bool,
    /// Measure wall time per point; off by default so CSV stays
    /// byte-identical across runs.
    pub timing: bool,
    pub seed_override: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SimRow {
    pub scenario: String,
    pub p_users: usize,
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub throughput: f64,
    pub seconds: f64,
}

fn noise_for(snr_db: f64) -> Result<NoiseModel> {
    // gamma_bar = E[|h|^2] / N0 with unit-power gains and unit symbol energy.
    let gamma = 10f64.powf(snr_db / 10.0);
    NoiseModel::new(1.0 / gamma)
}

fn point_stream(seed: u64, point: usize, chunk: u64) -> ChaCha8Rng {
    substream(seed, ((point as u64 + 1) << 40) ^ chunk)
}

/// Generic stopped Monte Carlo accumulation: `chunk_fn(chunk_rng)` returns
/// (bits, errors) for one chunk; waves of chunks run in parallel and reduce
/// in index order.
fn accumulate<F>(seed: u64, point: usize, min_errors: u64, max_bits: u64, chunk_fn: F) -> (u64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> (u64, u64) + Sync,
{
    let mut bits = 0u64;
    let mut errors = 0u64;
    let mut next_chunk = 0u64;
    while errors < min_errors && bits < max_bits {
        let wave: Vec<(u64, u64)> = (next_chunk..next_chunk + WAVE)
            .into_par_iter()
            .map(|c| {
                let mut rng = point_stream(seed, point, c);
                chunk_fn(&mut rng)
            })
            .collect();
        for (b, e) in wave {
            bits += b;
            errors += e;
        }
        next_chunk += WAVE;
    }
    (bits, errors)
}

fn ber_row(sc: &Scenario, snr_db: f64, bits: u64, errors: u64, seconds: f64) -> SimRow {
    let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
    let (ci_lo, ci_hi) = wilson_99(errors, bits);
    SimRow {
        scenario: sc.name.clone(),
        p_users: sc.p_users,
        snr_db,
        bits,
        errors,
        ber,
        ci_lo,
        ci_hi,
        throughput: 0.0,
        seconds,
    }
}

pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    let mut sc = sc.clone();
    if let Some(seed) = opts.seed_override {
        sc.seed = seed;
    }
    sc.validate()?;
    match sc.kind {
        ScenarioKind::Bounds => run_bounds(&sc),
        ScenarioKind::UncodedMldt => run_uncoded(&sc, opts),
        ScenarioKind::CdmaHw | ScenarioKind::CdmaMseq => run_cdma(&sc, opts),
        ScenarioKind::LdpcMldt => run_ldpc(&sc, opts),
        ScenarioKind::McdsCdma => run_mcds(&sc, opts),
        ScenarioKind::Capacity => run_capacity(&sc, opts),
        ScenarioKind::RaptorMldt => run_raptor(&sc, opts),
    }
}

fn run_bounds(sc: &Scenario) -> Result<Vec<SimRow>> {
    let mut rows = Vec::new();
    for &db in &sc.snr_db {
        let snr = SnrPoint::from_db(db)?;
        let ber = match sc.p_users {
            1 => ber_exact_p1(snr),
            2 => ber_upper_p2(snr),
            3 => ber_upper_p3(snr),
            p => return Err(Error::unsupported(format!("no closed-form bound for P = {p}"))),
        };
        rows.push(SimRow {
            scenario: sc.name.clone(),
            p_users: sc.p_users,
            snr_db: db,
            bits: 0,
            errors: 0,
            ber,
            ci_lo: ber,
            ci_hi: ber,
            throughput: 0.0,
            seconds: 0.0,
        });
    }
    Ok(rows)
}

fn run_uncoded(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    const TRIALS_PER_CHUNK: usize = 2_000;
    let p = sc.p_users;
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        let noise = noise_for(db)?;
        let (bits, errors) = accumulate(sc.seed, pt, sc.min_errors, sc.max_bits, |rng| {
            let mut b = 0u64;
            let mut e = 0u64;
            let prior = LikelihoodVector::uniform(p);
            for _ in 0..TRIALS_PER_CHUNK {
                let gains: Vec<ChannelGain> =
                    (0..p).map(|_| draw_rayleigh_gain(rng, 1.0).unwrap()).collect();
                let tx: Vec<u8> = (0..p).map(|_| rng.gen_range(0..2)).collect();
                let table = build_table(&gains).unwrap();
                let idx = tx.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
                let r = table.level(idx) + noise.sample(rng);
                let app = tuple_app(r, &table, &noise, &prior).unwrap();
                let hard = hard_decide(&bit_llrs(&app));
                b += p as u64;
                e += hard.iter().zip(tx.iter()).filter(|(a, t)| a != t).count() as u64;
            }
            (b, e)
        });
        rows.push(ber_row(sc, db, bits, errors, elapsed(opts, started)));
    }
    Ok(rows)
}

fn build_signatures(sc: &Scenario) -> Result<SignatureSet> {
    match sc.kind {
        ScenarioKind::CdmaHw => gen_hadamard(sc.chips),
        ScenarioKind::CdmaMseq => {
            let m = match sc.chips {
                7 => 3,
                15 => 4,
                31 => 5,
                63 => 6,
                other => {
                    return Err(Error::config(format!(
                        "m-sequence chip length must be one of 7, 15, 31, 63; got {other}"
                    )))
                }
            };
            gen_msequence(m)
        }
        _ => Err(Error::config("not a spread scenario")),
    }
}

fn run_cdma(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    const TRIALS_PER_CHUNK: usize = 32;
    let signatures = build_signatures(sc)?;
    let k_users = signatures.num_sequences();
    let j = signatures.chip_length();
    let p = sc.p_users;
    let l = sc.paths;
    if l == 0 {
        return Err(Error::config("paths must be at least 1"));
    }
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        // Chip noise scaled so the despread observation sees N0 = 1/gamma.
        let gamma = 10f64.powf(db / 10.0);
        let noise = NoiseModel::new(j as f64 / gamma)?;
        let (bits, errors) = accumulate(sc.seed, pt, sc.min_errors, sc.max_bits, |rng| {
            let mut b = 0u64;
            let mut e = 0u64;
            for _ in 0..TRIALS_PER_CHUNK {
                let mut tx: Vec<Vec<u8>> = Vec::with_capacity(k_users);
                let mut gains: Vec<Vec<Vec<ChannelGain>>> = Vec::with_capacity(k_users);
                for _ in 0..k_users {
                    tx.push((0..p).map(|_| rng.gen_range(0..2)).collect());
                    gains.push(
                        (0..p)
                            .map(|_| {
                                (0..l)
                                    .map(|_| draw_rayleigh_gain(rng, 1.0 / l as f64).unwrap())
                                    .collect()
                            })
                            .collect(),
                    );
                }
                let rx = cdma_transmit(&tx, &signatures, &gains, &noise, rng).unwrap();
                for k in 0..k_users {
                    let llrs = cdma_detect(&rx, &signatures, k, &gains[k], &noise).unwrap();
                    let hard = hard_decide(&llrs);
                    b += p as u64;
                    e += hard.iter().zip(tx[k].iter()).filter(|(a, t)| a != t).count() as u64;
                }
            }
            (b, e)
        });
        rows.push(ber_row(sc, db, bits, errors, elapsed(opts, started)));
    }
    Ok(rows)
}

struct CodedSetup {
    matrix: ParityMatrix,
    encoder: Encoder,
}

fn coded_setup(sc: &Scenario) -> Result<CodedSetup> {
    let (matrix, encoder) = construct_with_encoder(sc.ldpc_n, sc.ldpc_m, 3, 6, sc.seed ^ 0x5eed)?;
    Ok(CodedSetup { matrix, encoder })
}

fn count_message_errors(hard: &[u8], truth: &[u8], systematic: &[usize]) -> u64 {
    systematic.iter().filter(|&&c| hard[c] != truth[c]).count() as u64
}

fn run_ldpc(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    const BLOCKS_PER_CHUNK: usize = 2;
    let setup = coded_setup(sc)?;
    let p = sc.p_users;
    let decoder = sc.decoder();
    if decoder == DecoderKind::InterSpa {
        return Err(Error::config("inter_spa belongs to the mcds_cdma scenario"));
    }
    if decoder == DecoderKind::Spa && p > 1 {
        return Err(Error::config("plain spa decoding needs p_users = 1; use gspa or no_mldt"));
    }
    let early = !opts.strict_iterations;
    let msg_len = setup.encoder.message_len();
    let sys = setup.encoder.systematic_cols().to_vec();
    let n = setup.matrix.n();
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        let noise = noise_for(db)?;
        let (bits, errors) = accumulate(sc.seed, pt, sc.min_errors, sc.max_bits, |rng| {
            let mut b = 0u64;
            let mut e = 0u64;
            for _ in 0..BLOCKS_PER_CHUNK {
                let words: Vec<Vec<u8>> = (0..p)
                    .map(|_| {
                        let msg: Vec<u8> = (0..msg_len).map(|_| rng.gen_range(0..2)).collect();
                        setup.encoder.encode(&msg).unwrap()
                    })
                    .collect();
                // Fully interleaved fading: independent gains per symbol.
                let mut vectors = Vec::with_capacity(n);
                let mut naive_llrs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
                let prior = LikelihoodVector::uniform(p);
                for v in 0..n {
                    let gains: Vec<ChannelGain> =
                        (0..p).map(|_| draw_rayleigh_gain(rng, 1.0).unwrap()).collect();
                    let table = build_table(&gains).unwrap();
                    let idx = words.iter().fold(0usize, |acc, w| (acc << 1) | w[v] as usize);
                    let r = table.level(idx) + noise.sample(rng);
                    match decoder {
                        DecoderKind::NoMldt => {
                            // Single-user matched filter that ignores the
                            // other collided users entirely.
                            for (u, frame) in naive_llrs.iter_mut().enumerate() {
                                let h = gains[u].as_complex();
                                frame.push((2.0 * (h.conj() * r).re / noise.sigma2())
                                    .clamp(-crate::detector::LLR_MAX, crate::detector::LLR_MAX));
                            }
                        }
                        _ => {
                            vectors.push(tuple_app(r, &table, &noise, &prior).unwrap());
                        }
                    }
                }
                match decoder {
                    DecoderKind::Gspa => {
                        let out = gspa_decode_with(&vectors, &setup.matrix, sc.iterations, early).unwrap();
                        for (u, word) in words.iter().enumerate() {
                            b += msg_len as u64;
                            e += count_message_errors(&out.hard[u], word, &sys);
                        }
                    }
                    DecoderKind::Spa => {
                        let llrs: Vec<f64> = vectors.iter().map(|v| bit_llrs(v)[0]).collect();
                        let out = spa_decode_with(&llrs, &setup.matrix, sc.iterations, early).unwrap();
                        b += msg_len as u64;
                        e += count_message_errors(&out.hard, &words[0], &sys);
                    }
                    DecoderKind::NoMldt => {
                        for (u, word) in words.iter().enumerate() {
                            let out =
                                spa_decode_with(&naive_llrs[u], &setup.matrix, sc.iterations, early).unwrap();
                            b += msg_len as u64;
                            e += count_message_errors(&out.hard, word, &sys);
                        }
                    }
                    DecoderKind::InterSpa => unreachable!(),
                }
            }
            (b, e)
        });
        rows.push(ber_row(sc, db, bits, errors, elapsed(opts, started)));
    }
    Ok(rows)
}

fn run_mcds(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    const BLOCKS_PER_CHUNK: usize = 2;
    let setup = coded_setup(sc)?;
    let p = sc.p_users;
    let decoder = sc.decoder();
    if decoder == DecoderKind::NoMldt {
        return Err(Error::config("no_mldt belongs to the ldpc_mldt scenario"));
    }
    if decoder == DecoderKind::Spa && p > 1 {
        return Err(Error::config("plain spa decoding needs p_users = 1"));
    }
    let early = !opts.strict_iterations;
    let l = sc.paths.max(1);
    let n_sub = sc.subcarriers;
    if sc.cp_len + 1 < l {
        return Err(Error::config(format!(
            "cp_len {} too short for {} paths; orthogonality would break",
            sc.cp_len, l
        )));
    }
    let msg_len = setup.encoder.message_len();
    let sys = setup.encoder.systematic_cols().to_vec();
    let n = setup.matrix.n();
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        // Despread observation noise: N0_eff = 1/gamma, split over two dims.
        let gamma = 10f64.powf(db / 10.0);
        let sigma2 = 1.0 / (2.0 * gamma);
        let (bits, errors) = accumulate(sc.seed, pt, sc.min_errors, sc.max_bits, |rng| {
            let mut b = 0u64;
            let mut e = 0u64;
            for _ in 0..BLOCKS_PER_CHUNK {
                let words: Vec<Vec<u8>> = (0..p)
                    .map(|_| {
                        let msg: Vec<u8> = (0..msg_len).map(|_| rng.gen_range(0..2)).collect();
                        setup.encoder.encode(&msg).unwrap()
                    })
                    .collect();
                // Frequency-domain equivalent of the per-subcarrier chain:
                // tap DFT gains per OFDM frame, despread noise 1/gamma.
                let mut contexts = Vec::with_capacity(n);
                let mut vectors = Vec::with_capacity(n);
                let prior = LikelihoodVector::uniform(p);
                let mut v = 0usize;
                while v < n {
                    let h_rows: Vec<Vec<num_complex::Complex64>> = (0..p)
                        .map(|_| {
                            let taps: Vec<ChannelGain> = (0..l)
                                .map(|_| draw_rayleigh_gain(rng, 1.0 / l as f64).unwrap())
                                .collect();
                            freq_response(&taps, n_sub).unwrap()
                        })
                        .collect();
                    for nn in 0..n_sub {
                        if v >= n {
                            break;
                        }
                        let gains: Vec<ChannelGain> =
                            (0..p).map(|u| ChannelGain::from_complex(h_rows[u][nn])).collect();
                        let table = build_table(&gains).unwrap();
                        let idx = words.iter().fold(0usize, |acc, w| (acc << 1) | w[v] as usize);
                        let w_noise = num_complex::Complex64::new(
                            rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma2.sqrt(),
                            rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma2.sqrt(),
                        );
                        let r = table.level(idx) + w_noise;
                        match decoder {
                            DecoderKind::InterSpa => contexts.push(DetectionContext {
                                r,
                                h_a: h_rows[0][nn],
                                h_b: h_rows[1][nn],
                                sigma2,
                            }),
                            _ => {
                                let model = NoiseModel::new(2.0 * sigma2).unwrap();
                                vectors.push(tuple_app(r, &table, &model, &prior).unwrap());
                            }
                        }
                        v += 1;
                    }
                }
                match decoder {
                    DecoderKind::Gspa => {
                        let out = gspa_decode_with(&vectors, &setup.matrix, sc.iterations, early).unwrap();
                        for (u, word) in words.iter().enumerate() {
                            b += msg_len as u64;
                            e += count_message_errors(&out.hard[u], word, &sys);
                        }
                    }
                    DecoderKind::Spa => {
                        let llrs: Vec<f64> = vectors.iter().map(|v| bit_llrs(v)[0]).collect();
                        let out = spa_decode_with(&llrs, &setup.matrix, sc.iterations, early).unwrap();
                        b += msg_len as u64;
                        e += count_message_errors(&out.hard, &words[0], &sys);
                    }
                    DecoderKind::InterSpa => {
                        let out =
                            inter_spa_decode(&contexts, &setup.matrix, sc.rounds, sc.iterations, early).unwrap();
                        b += 2 * msg_len as u64;
                        e += count_message_errors(&out.output_a.hard, &words[0], &sys);
                        e += count_message_errors(&out.output_b.hard, &words[1], &sys);
                    }
                    DecoderKind::NoMldt => unreachable!(),
                }
            }
            (b, e)
        });
        rows.push(ber_row(sc, db, bits, errors, elapsed(opts, started)));
    }
    Ok(rows)
}

fn run_capacity(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    let mode_name = sc.capacity_mode.as_deref().unwrap_or("");
    let mode = CapacityMode::parse(mode_name)?;
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        let est = estimate_capacity(mode, db, sc.samples, sc.seed ^ ((pt as u64 + 1) << 32))?;
        rows.push(SimRow {
            scenario: sc.name.clone(),
            p_users: sc.p_users,
            snr_db: db,
            bits: est.num_samples as u64,
            errors: 0,
            ber: 0.0,
            ci_lo: est.bits_per_channel_use - Z_99 * est.std_error,
            ci_hi: est.bits_per_channel_use + Z_99 * est.std_error,
            throughput: est.bits_per_channel_use,
            seconds: elapsed(opts, started),
        });
    }
    Ok(rows)
}

fn run_raptor(sc: &Scenario, opts: &RunOptions) -> Result<Vec<SimRow>> {
    if sc.p_users != 2 {
        return Err(Error::config("raptor_mldt models exactly two collided users"));
    }
    let message_len = sc.raptor_message_len.unwrap_or(950);
    let precode_n = sc.raptor_precode_n.unwrap_or(1000);
    if precode_n <= message_len {
        return Err(Error::config("raptor_precode_n must exceed raptor_message_len"));
    }
    let m = precode_n - message_len;
    let row_w = (3 * precode_n).div_ceil(m);
    let (matrix, encoder) = construct_with_encoder(precode_n, m, 3, row_w, sc.seed ^ 0x9a97)?;
    let config = RaptorConfig {
        message_len: matrix.k(),
        ir_chunk: sc.ir_chunk.unwrap_or(400),
        min_rate: sc.min_rate.unwrap_or(0.25),
        ..RaptorConfig::default()
    };
    let path = match sc.decoder() {
        DecoderKind::Gspa => DecoderPath::Gspa,
        _ => DecoderPath::Spa,
    };
    let mut rows = Vec::with_capacity(sc.snr_db.len());
    for (pt, &db) in sc.snr_db.iter().enumerate() {
        let started = Instant::now();
        let noise = noise_for(db)?;
        let sessions: Vec<(bool, usize)> = (0..sc.blocks as u64)
            .into_par_iter()
            .map(|block| {
                let mut rng = point_stream(sc.seed, pt, block);
                let gains = [
                    draw_rayleigh_gain(&mut rng, 1.0).unwrap(),
                    draw_rayleigh_gain(&mut rng, 1.0).unwrap(),
                ];
                let res = run_session(&config, &matrix, &encoder, path, gains, &noise, &mut rng).unwrap();
                (res.success[0] && res.success[1], res.emitted)
            })
            .collect();
        let successes = sessions.iter().filter(|(ok, _)| *ok).count();
        let emitted: usize = sessions.iter().map(|(_, n)| n).sum();
        let failures = (sc.blocks - successes) as u64;
        let (ci_lo, ci_hi) = wilson_99(failures, sc.blocks as u64);
        rows.push(SimRow {
            scenario: sc.name.clone(),
            p_users: 2,
            snr_db: db,
            bits: emitted as u64,
            errors: failures,
            ber: failures as f64 / sc.blocks as f64,
            ci_lo,
            ci_hi,
            throughput: crate::raptor::throughput(successes, config.message_len, emitted),
            seconds: elapsed(opts, started),
        });
    }
    Ok(rows)
}

fn elapsed(opts: &RunOptions, started: Instant) -> f64 {
    if opts.timing {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Bracketing report for an uncoded sweep: lower bound is the single-user
/// closed form, the upper bound the P-specific union bound; the single-user
/// case instead checks that the closed form lies inside the CI.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub lines: Vec<String>,
    pub failed_points: Vec<f64>,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.failed_points.is_empty()
    }
}

pub fn compare_to_bounds(rows: &[SimRow], p_users: usize) -> Result<BoundsReport> {
    if rows.is_empty() {
        return Err(Error::config("bound comparison needs at least one result row"));
    }
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for row in rows {
        let snr = SnrPoint::from_db(row.snr_db)?;
        let lower = ber_exact_p1(snr);
        let (ok, detail) = match p_users {
            1 => (
                row.ci_lo <= lower && lower <= row.ci_hi,
                format!("exact {lower:.6e} vs CI [{:.6e}, {:.6e}]", row.ci_lo, row.ci_hi),
            ),
            2 | 3 => {
                let upper = if p_users == 2 { ber_upper_p2(snr) } else { ber_upper_p3(snr) };
                (
                    row.ci_hi >= lower && row.ci_lo <= upper,
                    format!(
                        "bounds [{lower:.6e}, {upper:.6e}] vs CI [{:.6e}, {:.6e}]",
                        row.ci_lo, row.ci_hi
                    ),
                )
            }
            p => return Err(Error::unsupported(format!("no bound pair for P = {p}"))),
        };
        if !ok {
            failed.push(row.snr_db);
        }
        lines.push(format!(
            "{} dB: {} ({detail})",
            row.snr_db,
            if ok { "pass" } else { "FAIL" }
        ));
    }
    Ok(BoundsReport {
        lines,
        failed_points: failed,
    })
}

fn fmt_row(row: &SimRow, sep: char) -> String {
    let cells = [
        row.scenario.clone(),
        row.p_users.to_string(),
        format!("{}", row.snr_db),
        row.bits.to_string(),
        row.errors.to_string(),
        format!("{:.6e}", row.ber),
        format!("{:.6e}", row.ci_lo),
        format!("{:.6e}", row.ci_hi),
        format!("{:.6e}", row.throughput),
        format!("{:.3}", row.seconds),
    ];
    cells.join(&sep.to_string())
}

pub const CSV_HEADER: &str = "scenario,p_users,snr_db,bits,errors,ber,ci_lo,ci_hi,throughput,seconds";

/// CSV with the full scenario configuration echoed as `#` comments.
pub fn write_csv<W: Write>(out: &mut W, scenarios: &[&Scenario], rows: &[SimRow]) -> Result<()> {
    for sc in scenarios {
        for (key, value) in sc.echo() {
            writeln!(out, "# {key} = {value}")?;
        }
    }
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", fmt_row(row, ','))?;
    }
    Ok(())
}

/// Gnuplot-friendly twin: whitespace-separated columns, `#` header.
pub fn write_dat<W: Write>(out: &mut W, rows: &[SimRow]) -> Result<()> {
    writeln!(out, "# {}", CSV_HEADER.replace(',', " "))?;
    for row in rows {
        writeln!(out, "{}", fmt_row(row, ' '))?;
    }
    Ok(())
}
