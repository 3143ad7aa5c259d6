//! Signature sequences and the DS-CDMA chip-level chain: Hadamard-Walsh and
//! m-sequence generation, multipath transmission, correlator bank, per-path
//! detection and maximal-ratio-style combining.

use crate::channel::{apply_multipath, ChannelGain, NoiseModel};
use crate::detector::{bit_llrs, build_table, tuple_app, LikelihoodVector};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureKind {
    Hadamard,
    Msequence,
}

/// K x J matrix of +/-1 chips.
#[derive(Debug, Clone)]
pub struct SignatureSet {
    kind: SignatureKind,
    sequences: Vec<Vec<i8>>,
}

impl SignatureSet {
    pub fn kind(&self) -> SignatureKind {
        self.kind
    }

    pub fn num_sequences(&self) -> usize {
        self.sequences.len()
    }

    pub fn chip_length(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.sequences[k]
    }

    /// Unnormalized dot product of two rows.
    pub fn dot(&self, a: usize, b: usize) -> i64 {
        self.sequences[a]
            .iter()
            .zip(self.sequences[b].iter())
            .map(|(&x, &y)| i64::from(x) * i64::from(y))
            .sum()
    }

    /// +/-1 CSV dump, one sequence per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.sequences {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sylvester-construction Hadamard-Walsh set with K = J.
pub fn gen_hadamard(j: usize) -> Result<SignatureSet> {
    if !(2..=64).contains(&j) || !j.is_power_of_two() {
        return Err(Error::config(format!("Hadamard length must be a power of two in 2..=64, got {j}")));
    }
    let mut rows: Vec<Vec<i8>> = vec![vec![1]];
    while rows[0].len() < j {
        let mut next = Vec::with_capacity(rows.len() * 2);
        for r in &rows {
            let mut top: Vec<i8> = r.clone();
            top.extend(r.iter().copied());
            next.push(top);
        }
        for r in &rows {
            let mut bottom: Vec<i8> = r.clone();
            bottom.extend(r.iter().map(|&c| -c));
            next.push(bottom);
        }
        rows = next;
    }
    Ok(SignatureSet {
        kind: SignatureKind::Hadamard,
        sequences: rows,
    })
}

/// Primitive feedback polynomials x^m + ... + 1, listed by the exponents of
/// the feedback taps below m.
fn primitive_taps(m: usize) -> Result<&'static [usize]> {
    match m {
        3 => Ok(&[1]),
        4 => Ok(&[1]),
        5 => Ok(&[2]),
        6 => Ok(&[1]),
        _ => Err(Error::unsupported(format!("m-sequence register length must be in 3..=6, got {m}"))),
    }
}

/// K = J = 2^m - 1 cyclic shifts of one maximum-length sequence in +/-1.
pub fn gen_msequence(m: usize) -> Result<SignatureSet> {
    let taps = primitive_taps(m)?;
    let j = (1usize << m) - 1;
    let mut state = vec![1u8; m];
    let mut base = Vec::with_capacity(j);
    for _ in 0..j {
        let out = state[m - 1];
        base.push(if out == 0 { 1i8 } else { -1i8 });
        let mut fb = state[m - 1];
        for &t in taps {
            fb ^= state[t - 1];
        }
        state.rotate_right(1);
        state[0] = fb;
    }
    let sequences = (0..j)
        .map(|shift| (0..j).map(|i| base[(i + shift) % j]).collect())
        .collect();
    Ok(SignatureSet {
        kind: SignatureKind::Msequence,
        sequences,
    })
}

/// BPSK mapping: bit 0 to level +1, bit 1 to level -1.
pub fn bit_to_level(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One-bit DS-CDMA superposition: every user (k, p) spreads its bit with
/// signature k, passes through its own L-path channel, and the faded chips
/// add up with AWGN. `prev_bits` supplies the adjacent bit whose trailing
/// chips leak into the observation window through the channel memory.
pub fn cdma_transmit_with_edges(
    bits: &[Vec<u8>],
    prev_bits: &[Vec<u8>],
    signatures: &SignatureSet,
    gains: &[Vec<Vec<ChannelGain>>],
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let k_users = bits.len();
    if k_users == 0 || k_users > signatures.num_sequences() {
        return Err(Error::dimension(format!(
            "need 1..={} signature users, got {k_users}",
            signatures.num_sequences()
        )));
    }
    if prev_bits.len() != k_users || gains.len() != k_users {
        return Err(Error::dimension("bits, prev_bits and gains must agree on K"));
    }
    let j = signatures.chip_length();
    let p_users = bits[0].len();
    let mut l_paths = 0usize;
    for k in 0..k_users {
        if bits[k].len() != p_users || prev_bits[k].len() != p_users || gains[k].len() != p_users {
            return Err(Error::dimension("per-signature user counts must agree"));
        }
        for taps in &gains[k] {
            if taps.is_empty() {
                return Err(Error::dimension("each user needs at least one path"));
            }
            if l_paths == 0 {
                l_paths = taps.len();
            } else if taps.len() != l_paths {
                return Err(Error::dimension("all users must share one path count"));
            }
        }
    }
    let window = j + l_paths - 1;
    let mut received = vec![Complex64::new(0.0, 0.0); window];
    for k in 0..k_users {
        let sig = signatures.row(k);
        for p in 0..p_users {
            // Previous bit followed by the current one; the convolution tail
            // of the former occupies the first L-1 chips of the window.
            let mut chips = Vec::with_capacity(2 * j);
            let prev = bit_to_level(prev_bits[k][p]);
            let cur = bit_to_level(bits[k][p]);
            chips.extend(sig.iter().map(|&c| prev * f64::from(c)));
            chips.extend(sig.iter().map(|&c| cur * f64::from(c)));
            let faded = apply_multipath(&chips, &gains[k][p])?;
            for (r, f) in received.iter_mut().zip(faded[j..j + window].iter()) {
                *r += f;
            }
        }
    }
    for r in &mut received {
        *r += noise.sample(rng);
    }
    Ok(received)
}

/// As [`cdma_transmit_with_edges`] with the adjacent bits drawn independently
/// at random.
pub fn cdma_transmit(
    bits: &[Vec<u8>],
    signatures: &SignatureSet,
    gains: &[Vec<Vec<ChannelGain>>],
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let prev: Vec<Vec<u8>> = bits
        .iter()
        .map(|row| row.iter().map(|_| rng.gen_range(0..2u8)).collect())
        .collect();
    cdma_transmit_with_edges(bits, &prev, signatures, gains, noise, rng)
}

/// Normalized correlator output r^l = (1/J) sum_j r(j+l) s_k(j).
pub fn correlate(received: &[Complex64], signatures: &SignatureSet, k: usize, shift: usize) -> Result<Complex64> {
    let j = signatures.chip_length();
    if k >= signatures.num_sequences() {
        return Err(Error::dimension(format!("signature index {k} out of range")));
    }
    if received.len() < j + shift {
        return Err(Error::dimension(format!(
            "shift {shift} exceeds the received window of {} chips",
            received.len()
        )));
    }
    let sig = signatures.row(k);
    let mut acc = Complex64::new(0.0, 0.0);
    for (jj, &c) in sig.iter().enumerate() {
        acc += received[jj + shift] * f64::from(c);
    }
    Ok(acc / j as f64)
}

/// Combining weights alpha_l = |h_l|^2 / sum |h|^2.
pub fn path_weights(gains: &[ChannelGain]) -> Result<Vec<f64>> {
    let total: f64 = gains.iter().map(ChannelGain::power).sum();
    if gains.is_empty() || total <= 0.0 {
        return Err(Error::config("path weights need at least one nonzero gain"));
    }
    Ok(gains.iter().map(|g| g.power() / total).collect())
}

/// Default weights for the signature-sharing user pair: alpha from the
/// average of the two users' per-path powers.
pub fn paired_path_weights(gains_a: &[ChannelGain], gains_b: &[ChannelGain]) -> Result<Vec<f64>> {
    if gains_a.len() != gains_b.len() {
        return Err(Error::dimension("paired users must share one path count"));
    }
    let avg: Vec<ChannelGain> = gains_a
        .iter()
        .zip(gains_b.iter())
        .map(|(a, b)| ChannelGain::new(((a.power() + b.power()) / 2.0).sqrt(), 0.0))
        .collect();
    path_weights(&avg)
}

/// Weighted per-path LLR combination, e = sum_l alpha_l e^l.
pub fn combine_llrs(per_path: &[Vec<f64>], gains: &[ChannelGain]) -> Result<Vec<f64>> {
    let weights = path_weights(gains)?;
    combine_llrs_weighted(per_path, &weights)
}

pub fn combine_llrs_weighted(per_path: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if per_path.len() != weights.len() || per_path.is_empty() {
        return Err(Error::dimension("one LLR frame per path is required"));
    }
    let width = per_path[0].len();
    if per_path.iter().any(|f| f.len() != width) {
        return Err(Error::dimension("per-path LLR frames must have equal length"));
    }
    let mut out = vec![0.0f64; width];
    for (frame, &w) in per_path.iter().zip(weights.iter()) {
        for (o, &e) in out.iter_mut().zip(frame.iter()) {
            *o += w * e;
        }
    }
    Ok(out)
}

/// Per-signature receiver: correlate each path, run the multilevel detector
/// with noise variance sigma^2/J, and combine across paths with averaged
/// weights. Returns one LLR per collided user of signature `k`.
pub fn cdma_detect(
    received: &[Complex64],
    signatures: &SignatureSet,
    k: usize,
    gains: &[Vec<ChannelGain>],
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    let p_users = gains.len();
    if !(1..=3).contains(&p_users) {
        return Err(Error::unsupported(format!("detector supports 1..=3 collided users, got {p_users}")));
    }
    let l_paths = gains[0].len();
    if gains.iter().any(|g| g.len() != l_paths) || l_paths == 0 {
        return Err(Error::dimension("all users must share one nonzero path count"));
    }
    let j = signatures.chip_length();
    let path_noise = NoiseModel::new(noise.n0() / j as f64)?;
    let mut per_path: Vec<Vec<f64>> = Vec::with_capacity(l_paths);
    for l in 0..l_paths {
        let r = correlate(received, signatures, k, l)?;
        let level_gains: Vec<ChannelGain> = gains.iter().map(|g| g[l]).collect();
        let table = build_table(&level_gains)?;
        let app = tuple_app(r, &table, &path_noise, &LikelihoodVector::uniform(p_users))?;
        per_path.push(bit_llrs(&app));
    }
    let weights = match p_users {
        1 => path_weights(&gains[0])?,
        _ => paired_path_weights(&gains[0], &gains[1])?,
    };
    combine_llrs_weighted(&per_path, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn hadamard_base_case() {
        let set = gen_hadamard(2).unwrap();
        assert_eq!(set.row(0), &[1, 1]);
        assert_eq!(set.row(1), &[1, -1]);
        assert_eq!(set.dot(0, 1), 0);
    }

    #[test]
    fn hadamard_orthogonality_all_sizes() {
        for j in [2usize, 4, 8, 16, 32, 64] {
            let set = gen_hadamard(j).unwrap();
            assert_eq!(set.num_sequences(), j);
            for a in 0..j {
                assert_eq!(set.dot(a, a), j as i64);
                for b in (a + 1)..j {
                    assert_eq!(set.dot(a, b), 0, "J={j} rows {a},{b}");
                }
            }
        }
    }

    #[test]
    fn hadamard_rejects_bad_lengths() {
        assert!(gen_hadamard(3).is_err());
        assert!(gen_hadamard(12).is_err());
        assert!(gen_hadamard(128).is_err());
        assert!(gen_hadamard(1).is_err());
    }

    #[test]
    fn msequence_lengths_and_autocorrelation() {
        for m in 3..=6usize {
            let set = gen_msequence(m).unwrap();
            let j = (1usize << m) - 1;
            assert_eq!(set.chip_length(), j);
            assert_eq!(set.num_sequences(), j);
            assert_eq!(set.dot(0, 0), j as i64);
            for shift in 1..j {
                assert_eq!(set.dot(0, shift), -1, "m={m} shift {shift}");
            }
        }
        assert!(gen_msequence(2).is_err());
        assert!(gen_msequence(7).is_err());
    }

    #[test]
    fn msequence_default_length_fifteen() {
        let set = gen_msequence(4).unwrap();
        assert_eq!(set.chip_length(), 15);
        // Balanced: 8 ones and 7 zeros -> chip sum -1 in +/-1 notation.
        let sum: i64 = set.row(0).iter().map(|&c| i64::from(c)).sum();
        assert_eq!(sum, -1);
    }

    #[test]
    fn signature_csv_round_trip_shape() {
        let set = gen_hadamard(4).unwrap();
        let csv = set.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), "1,1,1,1");
    }

    #[test]
    fn single_user_flat_identity() {
        let set = gen_hadamard(4).unwrap();
        let gains = vec![vec![vec![ChannelGain::new(1.0, 0.0)]]];
        let mut rng = substream(31, 0);
        let rx = cdma_transmit(&[vec![1]], &set, &gains, &NoiseModel::disabled(), &mut rng).unwrap();
        assert_eq!(rx.len(), 4);
        for (r, &c) in rx.iter().zip(set.row(0).iter()) {
            assert_abs_diff_eq!(r.re, -f64::from(c), epsilon = 1e-14);
            assert_abs_diff_eq!(r.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn hadamard_full_load_flat_channel_is_interference_free() {
        let set = gen_hadamard(8).unwrap();
        let mut rng = substream(31, 1);
        let mut bits = Vec::new();
        let mut gains = Vec::new();
        for k in 0..8 {
            bits.push(vec![(k % 2) as u8, ((k / 2) % 2) as u8]);
            gains.push(vec![
                vec![ChannelGain::new(0.9, 0.3 * k as f64)],
                vec![ChannelGain::new(1.2, 1.0 + 0.2 * k as f64)],
            ]);
        }
        let rx = cdma_transmit(&bits, &set, &gains, &NoiseModel::disabled(), &mut rng).unwrap();
        for k in 0..8 {
            let r = correlate(&rx, &set, k, 0).unwrap();
            let expect = gains[k][0][0].as_complex() * bit_to_level(bits[k][0])
                + gains[k][1][0].as_complex() * bit_to_level(bits[k][1]);
            assert_abs_diff_eq!((r - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_path_chips_match_hand_convolution() {
        let set = gen_hadamard(4).unwrap();
        let bits = vec![vec![0u8], vec![1u8]];
        let prev = vec![vec![1u8], vec![0u8]];
        let gains = vec![
            vec![vec![ChannelGain::new(1.0, 0.0), ChannelGain::new(0.5, std::f64::consts::FRAC_PI_2)]],
            vec![vec![ChannelGain::new(0.8, std::f64::consts::PI), ChannelGain::new(0.25, 0.0)]],
        ];
        let mut rng = substream(31, 2);
        let rx = cdma_transmit_with_edges(&bits, &prev, &set, &gains, &NoiseModel::disabled(), &mut rng).unwrap();
        assert_eq!(rx.len(), 5);
        // Hand model: y(t) = sum_k sum_l h_{k,l} x_k(t - l) with the previous
        // bit occupying t < 0.
        let chip = |k: usize, t: i64| -> f64 {
            let b = if t < 0 { prev[k][0] } else { bits[k][0] };
            let idx = t.rem_euclid(4) as usize;
            bit_to_level(b) * f64::from(set.row(k)[idx])
        };
        for (t, &r) in rx.iter().enumerate() {
            let mut expect = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                for (l, tap) in gains[k][0].iter().enumerate() {
                    let tt = t as i64 - l as i64;
                    if tt < 4 {
                        expect += tap.as_complex() * chip(k, tt);
                    }
                }
            }
            assert_abs_diff_eq!((r - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn correlator_noise_variance_is_scaled() {
        let set = gen_hadamard(16).unwrap();
        let noise = NoiseModel::new(0.8).unwrap();
        let mut rng = substream(31, 3);
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let rx: Vec<Complex64> = (0..16).map(|_| noise.sample(&mut rng)).collect();
            let r = correlate(&rx, &set, 3, 0).unwrap();
            acc += r.norm_sqr();
        }
        let measured = acc / trials as f64;
        // Total complex variance sigma^2 = N0; correlator divides it by J.
        assert_abs_diff_eq!(measured, 0.8 / 16.0, epsilon = 3e-3);
    }

    #[test]
    fn correlate_rejects_bad_shift() {
        let set = gen_hadamard(4).unwrap();
        let rx = vec![Complex64::new(0.0, 0.0); 5];
        assert!(correlate(&rx, &set, 0, 1).is_ok());
        assert!(correlate(&rx, &set, 0, 2).is_err());
        assert!(correlate(&rx, &set, 7, 0).is_err());
    }

    #[test]
    fn weights_hand_values() {
        let l1 = path_weights(&[ChannelGain::new(0.7, 1.0)]).unwrap();
        assert_eq!(l1, vec![1.0]);
        let w = path_weights(&[ChannelGain::new(3f64.sqrt(), 0.0), ChannelGain::new(0.6, 0.8)]).unwrap();
        assert_abs_diff_eq!(w[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-12);
        assert!(path_weights(&[ChannelGain::new(0.0, 0.0)]).is_err());
        assert!(path_weights(&[]).is_err());
    }

    #[test]
    fn combine_hand_values() {
        let per_path = vec![vec![2.0, -4.0], vec![-1.0, 8.0]];
        let gains = [ChannelGain::new(3f64.sqrt(), 0.0), ChannelGain::new(1.0, 0.0)];
        let out = combine_llrs(&per_path, &gains).unwrap();
        assert_abs_diff_eq!(out[0], 0.75 * 2.0 - 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.75 * -4.0 + 0.25 * 8.0, epsilon = 1e-12);
        assert!(combine_llrs(&per_path, &gains[..1]).is_err());
    }

    #[test]
    fn single_path_hw_chain_equals_scalar_detector() {
        // L = 1 with orthogonal signatures: the chain's LLR must equal the
        // plain detector on the despread scalar with noise variance scaled
        // by 1/J.
        let set = gen_hadamard(16).unwrap();
        let noise = NoiseModel::new(0.5).unwrap();
        let mut rng = substream(31, 4);
        for trial in 0..500 {
            let k = trial % 16;
            let mut bits = Vec::new();
            let mut gains = Vec::new();
            for _ in 0..16 {
                bits.push(vec![rng.gen_range(0..2u8), rng.gen_range(0..2u8)]);
                gains.push(vec![
                    vec![crate::channel::draw_rayleigh_gain(&mut rng, 1.0).unwrap()],
                    vec![crate::channel::draw_rayleigh_gain(&mut rng, 1.0).unwrap()],
                ]);
            }
            let rx = cdma_transmit(&bits, &set, &gains, &noise, &mut rng).unwrap();
            let chain = cdma_detect(&rx, &set, k, &[gains[k][0].clone(), gains[k][1].clone()], &noise).unwrap();
            let r = correlate(&rx, &set, k, 0).unwrap();
            let table = build_table(&[gains[k][0][0], gains[k][1][0]]).unwrap();
            let scaled = NoiseModel::new(0.5 / 16.0).unwrap();
            let app = tuple_app(r, &table, &scaled, &LikelihoodVector::uniform(2)).unwrap();
            let direct = bit_llrs(&app);
            for (c, d) in chain.iter().zip(direct.iter()) {
                assert_abs_diff_eq!(c, d, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn msequence_multipath_residue_exceeds_noise_floor() {
        // With L = 2 the m-sequence correlator sees genuine multipath and
        // cross-user interference well above the pure-noise floor.
        let set = gen_msequence(4).unwrap();
        let mut rng = substream(31, 5);
        let trials = 2_000;
        let mut residue = 0.0;
        for _ in 0..trials {
            let mut bits = Vec::new();
            let mut gains = Vec::new();
            for _ in 0..15 {
                bits.push(vec![rng.gen_range(0..2u8)]);
                gains.push(vec![vec![
                    crate::channel::draw_rayleigh_gain(&mut rng, 0.5).unwrap(),
                    crate::channel::draw_rayleigh_gain(&mut rng, 0.5).unwrap(),
                ]]);
            }
            let rx = cdma_transmit(&bits, &set, &gains, &NoiseModel::disabled(), &mut rng).unwrap();
            let r = correlate(&rx, &set, 0, 0).unwrap();
            let ideal = gains[0][0][0].as_complex() * bit_to_level(bits[0][0]);
            residue += (r - ideal).norm_sqr();
        }
        let mean_residue = residue / trials as f64;
        // Pure noise at sigma^2 = 0.1 would leave 0.1/15 per correlator.
        assert!(mean_residue > 10.0 * (0.1 / 15.0), "residue {mean_residue}");
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_permute(
            powers in proptest::collection::vec(0.01f64..4.0, 1..6),
        ) {
            let gains: Vec<ChannelGain> =
                powers.iter().map(|&p| ChannelGain::new(p.sqrt(), 0.3)).collect();
            let w = path_weights(&gains).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut rev = gains.clone();
            rev.reverse();
            let wr = path_weights(&rev).unwrap();
            for (a, b) in w.iter().zip(wr.iter().rev()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
