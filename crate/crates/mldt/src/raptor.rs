//! Rateless LT + high-rate precode pipeline with ACK feedback and
//! incremental redundancy, measuring per-user throughput for two collided
//! users under multilevel detection.

use crate::channel::{ChannelGain, NoiseModel};
use crate::detector::{bit_llrs, build_table, tuple_app, LikelihoodVector};
use crate::error::{Error, Result};
use crate::gspa::gspa_decode;
pub use crate::gspa::{llr_frames_to_joint_vectors, llrs_to_joint_vector};
use crate::ldpc::{spa_decode_with, Encoder, ParityMatrix, MSG_CLAMP};
use num_complex::Complex64;
use rand::Rng;

/// Output-symbol degree distribution of the LT code.
#[derive(Debug, Clone)]
pub struct LtDegreeDistribution {
    degrees: Vec<usize>,
    cumulative: Vec<f64>,
}

impl LtDegreeDistribution {
    pub fn new(degrees: Vec<usize>, probabilities: Vec<f64>) -> Result<Self> {
        if degrees.is_empty() || degrees.len() != probabilities.len() {
            return Err(Error::config("degree and probability lists must match and be nonempty"));
        }
        if degrees.iter().any(|&d| d == 0) {
            return Err(Error::config("LT degrees must be at least 1"));
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::config("degree probabilities must lie in [0, 1]"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("degree probabilities must sum to 1, got {total}")));
        }
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for p in probabilities {
            acc += p;
            cumulative.push(acc / total);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(LtDegreeDistribution { degrees, cumulative })
    }

    /// Robust soliton distribution over 1..=k with spike parameter
    /// R = c ln(k/delta) sqrt(k).
    pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::config("robust soliton needs a block of at least 2"));
        }
        if !(c > 0.0) || !(0.0..1.0).contains(&delta) || delta == 0.0 {
            return Err(Error::config("robust soliton needs c > 0 and delta in (0, 1)"));
        }
        let kf = k as f64;
        let r = c * (kf / delta).ln() * kf.sqrt();
        let spike = ((kf / r).round() as usize).clamp(1, k);
        let mut weights = vec![0.0f64; k + 1];
        weights[1] = 1.0 / kf;
        for (i, w) in weights.iter_mut().enumerate().take(k + 1).skip(2) {
            *w = 1.0 / (i as f64 * (i as f64 - 1.0));
        }
        for (i, w) in weights.iter_mut().enumerate().take(spike).skip(1) {
            *w += r / (i as f64 * kf);
        }
        weights[spike] += r * (r / delta).ln() / kf;
        let degrees: Vec<usize> = (1..=k).collect();
        let total: f64 = weights[1..].iter().sum();
        let probabilities: Vec<f64> = weights[1..].iter().map(|w| w / total).collect();
        Self::new(degrees, probabilities)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.degrees[idx.min(self.degrees.len() - 1)]
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(1)
    }
}

/// LT-encoded stream: output bits with their neighbor lists, plus a flag
/// noting that some drawn degree exceeded the block and was clamped.
#[derive(Debug, Clone)]
pub struct LtStream {
    pub bits: Vec<u8>,
    pub neighbors: Vec<Vec<usize>>,
    pub clamped: bool,
}

/// Emit `count` LT output bits: each is the XOR of d distinct uniformly
/// chosen precoded bits with d from the degree distribution. The stream is a
/// pure function of the rng state, so transmitter and receiver derive the
/// same graph from a shared seed.
pub fn lt_encode(
    precoded: &[u8],
    count: usize,
    dist: &LtDegreeDistribution,
    rng: &mut impl Rng,
) -> Result<LtStream> {
    let k = precoded.len();
    if k == 0 {
        return Err(Error::config("LT encoding needs a nonempty precoded block"));
    }
    if count == 0 {
        return Err(Error::config("LT encoding needs count >= 1"));
    }
    let mut bits = Vec::with_capacity(count);
    let mut neighbors = Vec::with_capacity(count);
    let mut clamped = false;
    for _ in 0..count {
        let mut d = dist.sample(rng);
        if d > k {
            d = k;
            clamped = true;
        }
        // Floyd's algorithm for d distinct indices in 0..k.
        let mut chosen: Vec<usize> = Vec::with_capacity(d);
        for j in (k - d)..k {
            let t = rng.gen_range(0..=j);
            if chosen.contains(&t) {
                chosen.push(j);
            } else {
                chosen.push(t);
            }
        }
        chosen.sort_unstable();
        let bit = chosen.iter().fold(0u8, |acc, &v| acc ^ precoded[v]);
        bits.push(bit);
        neighbors.push(chosen);
    }
    Ok(LtStream {
        bits,
        neighbors,
        clamped,
    })
}

/// Soft LT decoding: sum-product on the bipartite graph where each output
/// node is an XOR check tied to its channel LLR. Returns posterior LLRs for
/// the precoded bits.
pub fn lt_decode_soft(
    llrs: &[f64],
    neighbors: &[Vec<usize>],
    precode_len: usize,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if llrs.is_empty() || llrs.len() != neighbors.len() {
        return Err(Error::dimension("need one channel LLR per received LT symbol"));
    }
    if precode_len == 0 {
        return Err(Error::config("precode length must be positive"));
    }
    let clamp = |x: f64| x.clamp(-MSG_CLAMP, MSG_CLAMP);
    // Flat edge arrays over the output-node adjacency.
    let mut edge_var = Vec::new();
    let mut check_edges: Vec<(usize, usize)> = Vec::with_capacity(neighbors.len());
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); precode_len];
    for (c, nb) in neighbors.iter().enumerate() {
        let start = edge_var.len();
        for &v in nb {
            if v >= precode_len {
                return Err(Error::dimension(format!("neighbor index {v} outside the precoded block")));
            }
            var_edges[v].push(edge_var.len());
            edge_var.push(v);
        }
        check_edges.push((start, edge_var.len()));
        let _ = c;
    }
    let num_edges = edge_var.len();
    let mut v2c = vec![0.0f64; num_edges];
    let mut c2v = vec![0.0f64; num_edges];
    let mut posterior = vec![0.0f64; precode_len];
    for _ in 0..max_iter.max(1) {
        // Check update: observation LLR enters as one extra tanh factor.
        for (c, &(start, end)) in check_edges.iter().enumerate() {
            let obs = (clamp(llrs[c]) / 2.0).tanh();
            let d = end - start;
            let mut fwd = vec![1.0f64; d + 1];
            for i in 0..d {
                fwd[i + 1] = fwd[i] * (v2c[start + i] / 2.0).tanh();
            }
            let mut bwd = 1.0f64;
            for i in (0..d).rev() {
                let prod = obs * fwd[i] * bwd;
                c2v[start + i] = 2.0 * prod.clamp(-0.999_999_999_999_999, 0.999_999_999_999_999).atanh();
                bwd *= (v2c[start + i] / 2.0).tanh();
            }
        }
        // Variable update and posterior.
        for (v, edges) in var_edges.iter().enumerate() {
            let total: f64 = edges.iter().map(|&e| c2v[e]).sum();
            posterior[v] = total;
            for &e in edges {
                v2c[e] = clamp(total - c2v[e]);
            }
        }
    }
    Ok(posterior)
}

/// Erasure-style peeling decode of the same graph; returns `Some(bit)` where
/// peeling resolves a precoded bit. Used as an oracle for the soft decoder.
pub fn lt_peel(bits: &[u8], neighbors: &[Vec<usize>], precode_len: usize) -> Vec<Option<u8>> {
    let mut known: Vec<Option<u8>> = vec![None; precode_len];
    let mut work: Vec<(u8, Vec<usize>)> = bits
        .iter()
        .zip(neighbors.iter())
        .map(|(&b, nb)| (b, nb.clone()))
        .collect();
    loop {
        let mut progressed = false;
        for (val, nb) in &mut work {
            nb.retain(|&v| {
                if let Some(k) = known[v] {
                    *val ^= k;
                    false
                } else {
                    true
                }
            });
            if nb.len() == 1 && known[nb[0]].is_none() {
                known[nb[0]] = Some(*val);
                nb.clear();
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    known
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderPath {
    Spa,
    Gspa,
}

/// Session configuration; defaults follow the simulation settings described
/// in the library documentation.
#[derive(Debug, Clone)]
pub struct RaptorConfig {
    /// Message bits per block (precode input).
    pub message_len: usize,
    /// Incremental-redundancy step in LT output symbols.
    pub ir_chunk: usize,
    /// Abort threshold on the instantaneous rate k'/N.
    pub min_rate: f64,
    pub lt_iterations: usize,
    pub code_iterations: usize,
    pub soliton_c: f64,
    pub soliton_delta: f64,
}

impl Default for RaptorConfig {
    fn default() -> Self {
        RaptorConfig {
            message_len: 950,
            ir_chunk: 400,
            min_rate: 0.25,
            lt_iterations: 200,
            code_iterations: 100,
            soliton_c: 0.05,
            soliton_delta: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub success: [bool; 2],
    pub emitted: usize,
}

/// One feedback session: both users' blocks, the quasi-static gains, and the
/// accumulated channel observations. Exposes fixed-budget decoding so the
/// rate-versus-length behavior can be probed directly.
pub struct SessionRun<'a> {
    config: &'a RaptorConfig,
    matrix: &'a ParityMatrix,
    noise: NoiseModel,
    dist: LtDegreeDistribution,
    codewords: [Vec<u8>; 2],
    streams: [LtStream; 2],
    table: crate::detector::SuperpositionTable,
    observations: Vec<Complex64>,
}

impl<'a> SessionRun<'a> {
    pub fn new(
        config: &'a RaptorConfig,
        matrix: &'a ParityMatrix,
        encoder: &Encoder,
        gains: [ChannelGain; 2],
        noise: &NoiseModel,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if matrix.k() != config.message_len {
            return Err(Error::config(format!(
                "precode carries {} message bits, config expects {}",
                matrix.k(),
                config.message_len
            )));
        }
        if config.ir_chunk == 0 || !(0.0..1.0).contains(&config.min_rate) {
            return Err(Error::config("session needs ir_chunk >= 1 and min_rate in [0, 1)"));
        }
        let dist = LtDegreeDistribution::robust_soliton(matrix.n(), config.soliton_c, config.soliton_delta)?;
        let mut codewords = Vec::with_capacity(2);
        for _ in 0..2 {
            let msg: Vec<u8> = (0..config.message_len).map(|_| rng.gen_range(0..2)).collect();
            codewords.push(encoder.encode(&msg)?);
        }
        let table = build_table(&gains)?;
        Ok(SessionRun {
            config,
            matrix,
            noise: *noise,
            dist,
            codewords: [codewords.remove(0), codewords.remove(0)],
            streams: [
                LtStream {
                    bits: Vec::new(),
                    neighbors: Vec::new(),
                    clamped: false,
                },
                LtStream {
                    bits: Vec::new(),
                    neighbors: Vec::new(),
                    clamped: false,
                },
            ],
            table,
            observations: Vec::new(),
        })
    }

    pub fn emitted(&self) -> usize {
        self.observations.len()
    }

    /// Emit `count` more superimposed LT symbols through the channel.
    pub fn extend(&mut self, count: usize, rng: &mut impl Rng) -> Result<()> {
        for u in 0..2 {
            let chunk = lt_encode(&self.codewords[u], count, &self.dist, rng)?;
            self.streams[u].bits.extend(chunk.bits);
            self.streams[u].neighbors.extend(chunk.neighbors);
            self.streams[u].clamped |= chunk.clamped;
        }
        let n0 = self.observations.len();
        for i in n0..n0 + count {
            let idx = (2 * self.streams[0].bits[i] + self.streams[1].bits[i]) as usize;
            let r = self.table.level(idx) + self.noise.sample(rng);
            self.observations.push(r);
        }
        Ok(())
    }

    /// Attempt a full decode with every symbol received so far; per-user
    /// success means the recovered precode word equals the transmitted one.
    pub fn try_decode(&self, path: DecoderPath) -> Result<[bool; 2]> {
        let prior = LikelihoodVector::uniform(2);
        let mut channel_llrs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for &r in &self.observations {
            let app = tuple_app(r, &self.table, &self.noise, &prior)?;
            let llrs = bit_llrs(&app);
            channel_llrs[0].push(llrs[0]);
            channel_llrs[1].push(llrs[1]);
        }
        let mut precoded_llrs = Vec::with_capacity(2);
        for u in 0..2 {
            precoded_llrs.push(lt_decode_soft(
                &channel_llrs[u],
                &self.streams[u].neighbors,
                self.matrix.n(),
                self.config.lt_iterations,
            )?);
        }
        match path {
            DecoderPath::Spa => {
                let mut ok = [false; 2];
                for u in 0..2 {
                    let out = spa_decode_with(&precoded_llrs[u], self.matrix, self.config.code_iterations, true)?;
                    ok[u] = out.hard == self.codewords[u];
                }
                Ok(ok)
            }
            DecoderPath::Gspa => {
                let vectors = llr_frames_to_joint_vectors(&precoded_llrs[0], &precoded_llrs[1])?;
                let out = gspa_decode(&vectors, self.matrix, self.config.code_iterations)?;
                Ok([out.hard[0] == self.codewords[0], out.hard[1] == self.codewords[1]])
            }
        }
    }
}

/// ACK feedback loop: grow the stream by `ir_chunk`, decode, stop when both
/// users verify or when the next chunk would push the rate k'/N below
/// `min_rate`. An aborted session contributes its emitted symbols and zero
/// message bits to the throughput.
pub fn run_session(
    config: &RaptorConfig,
    matrix: &ParityMatrix,
    encoder: &Encoder,
    path: DecoderPath,
    gains: [ChannelGain; 2],
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<SessionResult> {
    let mut session = SessionRun::new(config, matrix, encoder, gains, noise, rng)?;
    let k_prime = matrix.n() as f64;
    loop {
        session.extend(config.ir_chunk, rng)?;
        let success = session.try_decode(path)?;
        if success[0] && success[1] {
            return Ok(SessionResult {
                success,
                emitted: session.emitted(),
            });
        }
        let next = (session.emitted() + config.ir_chunk) as f64;
        if k_prime / next < config.min_rate {
            return Ok(SessionResult {
                success: [false, false],
                emitted: session.emitted(),
            });
        }
    }
}

/// Accumulated throughput k * successes / total emitted symbols.
pub fn throughput(successful_blocks: usize, message_len: usize, total_emitted: usize) -> f64 {
    if total_emitted == 0 {
        return 0.0;
    }
    (successful_blocks * message_len) as f64 / total_emitted as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::LLR_MAX;
    use crate::ldpc::construct_with_encoder;
    use crate::rng::substream;

    #[test]
    fn soliton_is_normalized_and_bounded() {
        for k in [50usize, 100, 1000] {
            let dist = LtDegreeDistribution::robust_soliton(k, 0.05, 0.5).unwrap();
            let mut rng = substream(51, k as u64);
            for _ in 0..2000 {
                let d = dist.sample(&mut rng);
                assert!((1..=k).contains(&d));
            }
            assert!(dist.max_degree() <= k);
        }
        assert!(LtDegreeDistribution::robust_soliton(1, 0.05, 0.5).is_err());
        assert!(LtDegreeDistribution::robust_soliton(100, 0.0, 0.5).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(LtDegreeDistribution::new(vec![1, 2], vec![0.6, 0.4]).is_ok());
        assert!(LtDegreeDistribution::new(vec![0], vec![1.0]).is_err());
        assert!(LtDegreeDistribution::new(vec![1, 2], vec![0.6, 0.6]).is_err());
        assert!(LtDegreeDistribution::new(vec![], vec![]).is_err());
    }

    #[test]
    fn encode_is_deterministic() {
        let precoded: Vec<u8> = (0..100).map(|i| (i % 3 == 0) as u8).collect();
        let dist = LtDegreeDistribution::robust_soliton(100, 0.05, 0.5).unwrap();
        let a = lt_encode(&precoded, 50, &dist, &mut substream(52, 7)).unwrap();
        let b = lt_encode(&precoded, 50, &dist, &mut substream(52, 7)).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.neighbors, b.neighbors);
    }

    #[test]
    fn encode_degree_one_and_linearity() {
        let dist = LtDegreeDistribution::new(vec![1], vec![1.0]).unwrap();
        let precoded = vec![1u8, 0, 1, 1, 0];
        let stream = lt_encode(&precoded, 40, &dist, &mut substream(52, 8)).unwrap();
        for (bit, nb) in stream.bits.iter().zip(stream.neighbors.iter()) {
            assert_eq!(nb.len(), 1);
            assert_eq!(*bit, precoded[nb[0]]);
        }
        let zeros = vec![0u8; 64];
        let dist = LtDegreeDistribution::robust_soliton(64, 0.05, 0.5).unwrap();
        let stream = lt_encode(&zeros, 100, &dist, &mut substream(52, 9)).unwrap();
        assert!(stream.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn oversized_degree_is_clamped_and_flagged() {
        let dist = LtDegreeDistribution::new(vec![9], vec![1.0]).unwrap();
        let precoded = vec![1u8, 0, 1, 0];
        let stream = lt_encode(&precoded, 5, &dist, &mut substream(52, 10)).unwrap();
        assert!(stream.clamped);
        for nb in &stream.neighbors {
            assert_eq!(nb.len(), 4);
        }
        assert!(lt_encode(&precoded, 0, &dist, &mut substream(52, 11)).is_err());
        assert!(lt_encode(&[], 3, &dist, &mut substream(52, 12)).is_err());
    }

    #[test]
    fn degree_one_cover_recovers_exactly() {
        let precoded = vec![1u8, 0, 1, 1, 0, 0, 1, 0];
        let neighbors: Vec<Vec<usize>> = (0..8).map(|i| vec![i]).collect();
        let llrs: Vec<f64> = precoded.iter().map(|&b| if b == 0 { LLR_MAX } else { -LLR_MAX }).collect();
        let post = lt_decode_soft(&llrs, &neighbors, 8, 5).unwrap();
        for (p, &b) in post.iter().zip(precoded.iter()) {
            assert_eq!(u8::from(*p < 0.0), b);
        }
    }

    #[test]
    fn soft_decoder_matches_peeling_oracle() {
        let mut rng = substream(53, 0);
        let mut checked = 0usize;
        for trial in 0..20 {
            let precoded: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2)).collect();
            let dist = LtDegreeDistribution::new(vec![1, 2, 3], vec![0.3, 0.5, 0.2]).unwrap();
            let stream = lt_encode(&precoded, 12, &dist, &mut substream(53, 100 + trial)).unwrap();
            let llrs: Vec<f64> = stream.bits.iter().map(|&b| if b == 0 { LLR_MAX } else { -LLR_MAX }).collect();
            let soft = lt_decode_soft(&llrs, &stream.neighbors, 8, 50).unwrap();
            let peeled = lt_peel(&stream.bits, &stream.neighbors, 8);
            for (v, (p, s)) in peeled.iter().zip(soft.iter()).enumerate() {
                if let Some(bit) = p {
                    checked += 1;
                    assert_eq!(u8::from(*s < 0.0), *bit, "trial {trial} bit {v}");
                    assert_eq!(*bit, precoded[v]);
                }
            }
        }
        assert!(checked > 40, "peeling oracle resolved too few bits ({checked})");
    }

    fn small_setup() -> (RaptorConfig, ParityMatrix, Encoder) {
        let config = RaptorConfig {
            message_len: 95,
            ir_chunk: 40,
            min_rate: 0.25,
            lt_iterations: 60,
            code_iterations: 30,
            ..RaptorConfig::default()
        };
        let (matrix, enc) = construct_with_encoder(100, 5, 3, 60, 7).unwrap();
        (config, matrix, enc)
    }

    #[test]
    fn clean_channel_session_succeeds_quickly() {
        let (config, matrix, enc) = small_setup();
        let gains = [ChannelGain::new(1.0, 0.0), ChannelGain::new(0.0, 1.0)];
        let noise = NoiseModel::new(0.01).unwrap();
        let mut rng = substream(54, 0);
        let res = run_session(&config, &matrix, &enc, DecoderPath::Spa, gains, &noise, &mut rng).unwrap();
        assert!(res.success[0] && res.success[1]);
        assert!(res.emitted <= 240, "needed {} symbols for 100 precoded bits", res.emitted);
    }

    #[test]
    fn hostile_channel_aborts_at_rate_threshold() {
        let (config, matrix, enc) = small_setup();
        let gains = [ChannelGain::new(1e-3, 0.0), ChannelGain::new(0.0, 1e-3)];
        let noise = NoiseModel::new(100.0).unwrap();
        let mut rng = substream(54, 1);
        let res = run_session(&config, &matrix, &enc, DecoderPath::Spa, gains, &noise, &mut rng).unwrap();
        assert!(!res.success[0] && !res.success[1]);
        // ceil(4 k' / ir) * ir with k' = 100, ir = 40.
        assert_eq!(res.emitted, 400);
    }

    #[test]
    fn session_is_deterministic() {
        let (config, matrix, enc) = small_setup();
        let gains = [ChannelGain::new(0.9, 0.2), ChannelGain::new(-0.1, 0.8)];
        let noise = NoiseModel::new(0.2).unwrap();
        let a = run_session(&config, &matrix, &enc, DecoderPath::Gspa, gains, &noise, &mut substream(54, 2)).unwrap();
        let b = run_session(&config, &matrix, &enc, DecoderPath::Gspa, gains, &noise, &mut substream(54, 2)).unwrap();
        assert_eq!(a.emitted, b.emitted);
        assert_eq!(a.success, b.success);
    }

    #[test]
    fn fixed_budget_success_is_monotone_in_length() {
        let (config, matrix, enc) = small_setup();
        let noise = NoiseModel::new(0.05).unwrap();
        let gains = [ChannelGain::new(1.0, 0.0), ChannelGain::new(0.0, 1.0)];
        let mut successes = [0usize; 3];
        for block in 0..12u64 {
            // Decode the same growing stream at increasing budgets.
            let mut rng = substream(54, 200 + block);
            let mut session = SessionRun::new(&config, &matrix, &enc, gains, &noise, &mut rng).unwrap();
            let mut prev = false;
            for step in 0..3 {
                session.extend(60, &mut rng).unwrap();
                let ok = session.try_decode(DecoderPath::Spa).unwrap();
                let both = ok[0] && ok[1];
                assert!(!prev || both, "success lost when adding symbols (block {block}, step {step})");
                prev = both;
                if both {
                    successes[step] += 1;
                }
            }
        }
        assert!(successes[2] >= successes[0]);
    }

    #[test]
    fn throughput_formula() {
        assert_eq!(throughput(0, 950, 4000), 0.0);
        assert!((throughput(3, 950, 6000) - 0.475).abs() < 1e-12);
        assert_eq!(throughput(1, 10, 0), 0.0);
    }
}
