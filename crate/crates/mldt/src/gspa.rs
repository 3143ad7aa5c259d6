//! Generalized sum-product decoding over 2^P-ary bit tuples sharing one
//! binary factor graph.
//!
//! Each variable node carries the tuple of the P collided users' code bits;
//! variable updates are elementwise products, check updates are group
//! convolutions under bitwise XOR of tuple indices. P = 1 degenerates to the
//! binary sum-product algorithm.

use crate::detector::{tuple_bit, LikelihoodVector};
use crate::error::{Error, Result};
use crate::ldpc::{ParityMatrix, MSG_CLAMP};

/// Probability floor applied to normalized messages; equals the binary-LLR
/// clamp point 1/(1 + e^MSG_CLAMP) so the P = 1 case saturates exactly like
/// the LLR-domain decoder.
fn prob_floor() -> f64 {
    1.0 / (1.0 + MSG_CLAMP.exp())
}

/// Variable-node combination: elementwise product across messages,
/// renormalized. Returns the message and an erasure flag set when the
/// product underflowed to all zeros.
pub fn var_update(msgs: &[LikelihoodVector]) -> Result<(LikelihoodVector, bool)> {
    let q = check_lengths(msgs)?;
    let mut out = vec![1.0f64; q];
    for m in msgs {
        for (o, &p) in out.iter_mut().zip(m.probs()) {
            *o *= p;
        }
    }
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Ok((LikelihoodVector::uniform(q.trailing_zeros() as usize), true));
    }
    Ok((LikelihoodVector::new(out)?, false))
}

/// Check-node combination: XOR group convolution folded across the messages,
/// renormalized. out[i] = sum_j p[j] q[i^j].
pub fn chk_update(msgs: &[LikelihoodVector]) -> Result<LikelihoodVector> {
    let q = check_lengths(msgs)?;
    let mut acc = vec![0.0f64; q];
    acc[0] = 1.0;
    let mut scratch = vec![0.0f64; q];
    for m in msgs {
        xor_convolve(&acc, m.probs(), &mut scratch);
        acc.copy_from_slice(&scratch);
        let sum: f64 = acc.iter().sum();
        if sum > 0.0 {
            for a in &mut acc {
                *a /= sum;
            }
        }
    }
    LikelihoodVector::new(acc)
}

fn check_lengths(msgs: &[LikelihoodVector]) -> Result<usize> {
    let Some(first) = msgs.first() else {
        return Err(Error::config("node update needs at least one message"));
    };
    let q = first.len();
    if msgs.iter().any(|m| m.len() != q) {
        return Err(Error::dimension("messages must share one tuple length"));
    }
    Ok(q)
}

fn xor_convolve(p: &[f64], q: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (j, &pj) in p.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        for (k, &qk) in q.iter().enumerate() {
            out[j ^ k] += pj * qk;
        }
    }
}

/// Result of a tuple decode: one frame and posterior LLR set per user.
#[derive(Debug, Clone)]
pub struct GspaOutput {
    pub hard: Vec<Vec<u8>>,
    pub posteriors: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding tuple-domain sum-product decode of `channel_vectors` on the
/// binary graph of `matrix`. Early exit when every user's hard-decision word
/// has zero syndrome.
pub fn gspa_decode(
    channel_vectors: &[LikelihoodVector],
    matrix: &ParityMatrix,
    max_iter: usize,
) -> Result<GspaOutput> {
    gspa_decode_with(channel_vectors, matrix, max_iter, true)
}

pub fn gspa_decode_with(
    channel_vectors: &[LikelihoodVector],
    matrix: &ParityMatrix,
    max_iter: usize,
    early_exit: bool,
) -> Result<GspaOutput> {
    if channel_vectors.len() != matrix.n() {
        return Err(Error::dimension(format!(
            "channel vector count {} != n = {}",
            channel_vectors.len(),
            matrix.n()
        )));
    }
    let q = check_lengths(channel_vectors)?;
    let p_users = q.trailing_zeros() as usize;
    if !(1..=3).contains(&p_users) {
        return Err(Error::unsupported(format!("tuple decode supports P in 1..=3, got {p_users}")));
    }
    let n = matrix.n();
    let floor = prob_floor();

    // Floored copies of the channel vectors (mirrors the LLR input clamp of
    // the binary decoder).
    let mut channel = vec![0.0f64; n * q];
    for (v, lv) in channel_vectors.iter().enumerate() {
        let dst = &mut channel[v * q..(v + 1) * q];
        dst.copy_from_slice(lv.probs());
        floor_and_normalize(dst, floor);
    }

    // Flat edge arrays.
    let mut edge_var: Vec<usize> = Vec::with_capacity(matrix.num_edges());
    let mut check_edges: Vec<Vec<usize>> = Vec::with_capacity(matrix.m());
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for row in matrix.rows() {
        let mut edges = Vec::with_capacity(row.len());
        for &v in row {
            let e = edge_var.len();
            edge_var.push(v);
            var_edges[v].push(e);
            edges.push(e);
        }
        check_edges.push(edges);
    }
    let num_edges = edge_var.len();
    let uniform = 1.0 / q as f64;
    let mut c2v = vec![uniform; num_edges * q];
    let mut v2c = vec![uniform; num_edges * q];
    let mut marginals = channel.clone();
    let mut hard: Vec<Vec<u8>> = vec![vec![0u8; n]; p_users];

    let mut iterations = 0;
    let mut converged = false;
    let max_degree = check_edges.iter().map(Vec::len).max().unwrap_or(0);
    let mut fwd = vec![0.0f64; (max_degree + 1) * q];
    let mut bwd = vec![0.0f64; q];
    let mut conv = vec![0.0f64; q];

    for iter in 1..=max_iter.max(1) {
        iterations = iter;
        // Variable nodes: product of channel and all other check messages.
        for (v, edges) in var_edges.iter().enumerate() {
            let ch = &channel[v * q..(v + 1) * q];
            let d = edges.len();
            // forward[i] = ch * m_0 * ... * m_{i-1}; backward accumulated in place
            fwd[..q].copy_from_slice(ch);
            for i in 0..d {
                let (head, tail) = fwd.split_at_mut((i + 1) * q);
                let prev = &head[i * q..];
                let msg = &c2v[edges[i] * q..edges[i] * q + q];
                for t in 0..q {
                    tail[t] = prev[t] * msg[t];
                }
            }
            bwd.iter_mut().for_each(|b| *b = 1.0);
            for i in (0..d).rev() {
                let out = &mut v2c[edges[i] * q..edges[i] * q + q];
                let prev = &fwd[i * q..i * q + q];
                for t in 0..q {
                    out[t] = prev[t] * bwd[t];
                }
                floor_and_normalize(out, floor);
                let msg = &c2v[edges[i] * q..edges[i] * q + q];
                for t in 0..q {
                    bwd[t] *= msg[t];
                }
            }
        }
        // Check nodes: XOR convolution of all other variable messages.
        for edges in &check_edges {
            let d = edges.len();
            fwd[..q].fill(0.0);
            fwd[0] = 1.0;
            for i in 0..d {
                let (head, tail) = fwd.split_at_mut((i + 1) * q);
                let prev = &head[i * q..];
                let msg = &v2c[edges[i] * q..edges[i] * q + q];
                xor_convolve_into(prev, msg, &mut tail[..q]);
                normalize(&mut tail[..q]);
            }
            bwd[..q].fill(0.0);
            bwd[0] = 1.0;
            for i in (0..d).rev() {
                let prev = &fwd[i * q..i * q + q];
                xor_convolve_into(prev, &bwd, &mut conv);
                normalize(&mut conv);
                c2v[edges[i] * q..edges[i] * q + q].copy_from_slice(&conv);
                let msg = &v2c[edges[i] * q..edges[i] * q + q];
                xor_convolve_into(&bwd.clone(), msg, &mut conv);
                normalize(&mut conv);
                bwd.copy_from_slice(&conv);
            }
        }
        // Marginals and per-user hard decisions.
        for (v, edges) in var_edges.iter().enumerate() {
            let out = &mut marginals[v * q..(v + 1) * q];
            out.copy_from_slice(&channel[v * q..(v + 1) * q]);
            for &e in edges {
                let msg = &c2v[e * q..e * q + q];
                for t in 0..q {
                    out[t] *= msg[t];
                }
            }
            normalize(out);
            for p in 0..p_users {
                let mut zero = 0.0;
                let mut one = 0.0;
                for (i, &pr) in out.iter().enumerate() {
                    if tuple_bit(i, p, p_users) == 0 {
                        zero += pr;
                    } else {
                        one += pr;
                    }
                }
                hard[p][v] = u8::from(one > zero);
            }
        }
        converged = hard.iter().all(|word| matrix.syndrome_ok(word));
        if converged && early_exit {
            break;
        }
    }

    // Posterior bit LLRs from the final marginals.
    let mut posteriors = vec![vec![0.0f64; n]; p_users];
    for v in 0..n {
        let marg = &marginals[v * q..(v + 1) * q];
        for (p, post) in posteriors.iter_mut().enumerate() {
            let mut zero = 0.0;
            let mut one = 0.0;
            for (i, &pr) in marg.iter().enumerate() {
                if tuple_bit(i, p, p_users) == 0 {
                    zero += pr;
                } else {
                    one += pr;
                }
            }
            post[v] = (zero / one).ln();
        }
    }
    Ok(GspaOutput {
        hard,
        posteriors,
        converged,
        iterations,
    })
}

fn xor_convolve_into(p: &[f64], q: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (j, &pj) in p.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        for (k, &qk) in q.iter().enumerate() {
            out[j ^ k] += pj * qk;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for x in v.iter_mut() {
            *x /= sum;
        }
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

fn floor_and_normalize(v: &mut [f64], floor: f64) {
    normalize(v);
    let mut changed = false;
    for x in v.iter_mut() {
        if *x < floor {
            *x = floor;
            changed = true;
        }
    }
    if changed {
        normalize(v);
    }
}

/// Per-symbol bridge from two bit LLRs to a length-4 tuple vector:
/// p_{2a+b} proportional to P(bit_A = a) P(bit_B = b).
pub fn llrs_to_joint_vector(llr_a: f64, llr_b: f64) -> Result<LikelihoodVector> {
    if !llr_a.is_finite() || !llr_b.is_finite() {
        return Err(Error::config("joint vector bridge needs finite LLRs"));
    }
    let pa1 = 1.0 / (1.0 + llr_a.exp());
    let pb1 = 1.0 / (1.0 + llr_b.exp());
    LikelihoodVector::new(vec![
        (1.0 - pa1) * (1.0 - pb1),
        (1.0 - pa1) * pb1,
        pa1 * (1.0 - pb1),
        pa1 * pb1,
    ])
}

/// Helper mirroring the bridge for per-frame LLR slices.
pub fn llr_frames_to_joint_vectors(llr_a: &[f64], llr_b: &[f64]) -> Result<Vec<LikelihoodVector>> {
    if llr_a.len() != llr_b.len() {
        return Err(Error::dimension("user LLR frames must have equal length"));
    }
    llr_a
        .iter()
        .zip(llr_b.iter())
        .map(|(&a, &b)| llrs_to_joint_vector(a, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::LLR_MAX;
    use crate::ldpc::{construct_with_encoder, spa_decode};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn lv(v: Vec<f64>) -> LikelihoodVector {
        LikelihoodVector::new(v).unwrap()
    }

    #[test]
    fn var_uniform_is_identity() {
        let p = lv(vec![0.1, 0.2, 0.3, 0.4]);
        let (out, erased) = var_update(&[LikelihoodVector::uniform(2), p.clone()]).unwrap();
        assert!(!erased);
        for (a, b) in out.probs().iter().zip(p.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn var_hand_product() {
        let (out, _) = var_update(&[lv(vec![0.5, 0.5, 0.0, 0.0]), lv(vec![0.5, 0.0, 0.5, 0.0])]).unwrap();
        assert_eq!(out.probs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn var_all_zero_product_flags_erasure() {
        let (out, erased) = var_update(&[lv(vec![1.0, 0.0]), lv(vec![0.0, 1.0])]).unwrap();
        assert!(erased);
        assert_eq!(out.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn chk_uniform_absorbs() {
        let q = lv(vec![0.7, 0.1, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0]);
        let out = chk_update(&[LikelihoodVector::uniform(3), q]).unwrap();
        for &p in out.probs() {
            assert_abs_diff_eq!(p, 0.125, epsilon = 1e-14);
        }
    }

    #[test]
    fn chk_deltas_xor() {
        let out = chk_update(&[LikelihoodVector::delta(3, 2), LikelihoodVector::delta(3, 5)]).unwrap();
        assert_eq!(out.probs()[7], 1.0);
    }

    #[test]
    fn chk_delta_zero_is_identity() {
        let p = lv(vec![0.3, 0.2, 0.1, 0.4]);
        let out = chk_update(&[p.clone(), LikelihoodVector::delta(2, 0)]).unwrap();
        for (a, b) in out.probs().iter().zip(p.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn chk_matches_brute_force_convolution() {
        let mut rng = crate::rng::substream(21, 0);
        for _ in 0..200 {
            let p: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let q: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let (p, q) = (lv(p), lv(q));
            let out = chk_update(&[p.clone(), q.clone()]).unwrap();
            let mut brute = [0.0f64; 8];
            for i in 0..8 {
                for j in 0..8 {
                    brute[i] += p.probs()[j] * q.probs()[i ^ j];
                }
            }
            let sum: f64 = brute.iter().sum();
            for i in 0..8 {
                assert_abs_diff_eq!(out.probs()[i], brute[i] / sum, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_p2_from_pinned_p3() {
        let mut rng = crate::rng::substream(21, 1);
        for _ in 0..50 {
            let a4: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.01).collect();
            let b4: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.01).collect();
            // Embed as P=3 messages with user C pinned to bit 0 (even indices).
            let embed = |m: &[f64]| {
                let mut v = vec![0.0; 8];
                for i in 0..4 {
                    v[i * 2] = m[i];
                }
                lv(v)
            };
            let out3 = chk_update(&[embed(&a4), embed(&b4)]).unwrap();
            let out2 = chk_update(&[lv(a4.clone()), lv(b4.clone())]).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(out3.probs()[i * 2], out2.probs()[i], epsilon = 1e-12);
                assert_abs_diff_eq!(out3.probs()[i * 2 + 1], 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn joint_vector_bridge_values() {
        let u = llrs_to_joint_vector(0.0, 0.0).unwrap();
        assert_eq!(u.probs(), &[0.25, 0.25, 0.25, 0.25]);
        let c = llrs_to_joint_vector(LLR_MAX, LLR_MAX).unwrap();
        assert!(c.probs()[0] > 1.0 - 1e-15);
        // (ln 3, -ln 3): P(a=1) = 1/4, P(b=1) = 3/4.
        let v = llrs_to_joint_vector(3f64.ln(), -(3f64.ln())).unwrap();
        let expect = [0.1875, 0.5625, 0.0625, 0.1875];
        for (a, b) in v.probs().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(llrs_to_joint_vector(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn p1_decode_matches_binary_spa() {
        let (matrix, _) = construct_with_encoder(96, 48, 3, 6, 3).unwrap();
        let mut rng = crate::rng::substream(22, 0);
        let mut max_diff = 0.0f64;
        for _ in 0..100 {
            let llrs: Vec<f64> = (0..96).map(|_| (rng.gen::<f64>() - 0.5) * 8.0).collect();
            let vectors: Vec<LikelihoodVector> = llrs
                .iter()
                .map(|&l| {
                    let p1 = 1.0 / (1.0 + l.exp());
                    lv(vec![1.0 - p1, p1])
                })
                .collect();
            let spa = spa_decode(&llrs, &matrix, 10).unwrap();
            let gspa = gspa_decode(&vectors, &matrix, 10).unwrap();
            assert_eq!(spa.hard, gspa.hard[0]);
            for (a, b) in spa.posterior.iter().zip(gspa.posteriors[0].iter()) {
                max_diff = max_diff.max((a - b).abs());
            }
        }
        assert!(max_diff < 1e-9, "max posterior LLR difference {max_diff}");
    }

    #[test]
    fn noiseless_two_user_fixed_point() {
        let (matrix, enc) = construct_with_encoder(12, 6, 3, 6, 42).unwrap();
        let cw_a = enc.encode(&[1, 0, 0, 1, 1, 0]).unwrap();
        let cw_b = enc.encode(&[0, 1, 1, 0, 1, 1]).unwrap();
        let vectors: Vec<LikelihoodVector> = cw_a
            .iter()
            .zip(cw_b.iter())
            .map(|(&a, &b)| LikelihoodVector::delta(2, (2 * a + b) as usize))
            .collect();
        let out = gspa_decode(&vectors, &matrix, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.hard[0], cw_a);
        assert_eq!(out.hard[1], cw_b);
    }

    #[test]
    fn pinned_user_reduces_to_conditional_spa() {
        let (matrix, enc) = construct_with_encoder(96, 48, 3, 6, 3).unwrap();
        let mut rng = crate::rng::substream(22, 1);
        let cw_b = enc.encode(&vec![0u8; 48]).unwrap();
        let llrs_a: Vec<f64> = (0..96).map(|_| (rng.gen::<f64>() - 0.5) * 6.0).collect();
        let vectors: Vec<LikelihoodVector> = llrs_a
            .iter()
            .zip(cw_b.iter())
            .map(|(&la, &b)| {
                let pa1 = 1.0 / (1.0 + la.exp());
                let mut v = vec![0.0; 4];
                v[b as usize] = 1.0 - pa1; // a = 0
                v[2 + b as usize] = pa1; // a = 1
                lv(v)
            })
            .collect();
        let gspa = gspa_decode(&vectors, &matrix, 10).unwrap();
        let spa = spa_decode(&llrs_a, &matrix, 10).unwrap();
        for (a, b) in spa.posterior.iter().zip(gspa.posteriors[0].iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn toy_p2_matches_joint_map_oracle() {
        use crate::channel::{ChannelGain, NoiseModel};
        use crate::detector::{build_table, tuple_app};

        let (matrix, enc) = construct_with_encoder(12, 6, 3, 6, 42).unwrap();
        let codebook: Vec<Vec<u8>> = (0..64u32)
            .map(|bits| {
                let msg: Vec<u8> = (0..6).map(|i| ((bits >> i) & 1) as u8).collect();
                enc.encode(&msg).unwrap()
            })
            .collect();
        let gains = [ChannelGain::new(1.0, 0.0), ChannelGain::new(0.0, 1.0)];
        let table = build_table(&gains).unwrap();
        let noise = NoiseModel::new(0.5).unwrap();
        let mut rng = crate::rng::substream(23, 0);
        let trials = 60;
        let mut frame_matches = 0;
        for t in 0..trials {
            let cw_a = &codebook[(t * 7) % 64];
            let cw_b = &codebook[(t * 13 + 5) % 64];
            let vectors: Vec<LikelihoodVector> = cw_a
                .iter()
                .zip(cw_b.iter())
                .map(|(&a, &b)| {
                    let i = (2 * a + b) as usize;
                    let r = table.level(i) + noise.sample(&mut rng);
                    tuple_app(r, &table, &noise, &LikelihoodVector::uniform(2)).unwrap()
                })
                .collect();
            let out = gspa_decode(&vectors, &matrix, 30).unwrap();
            // Exhaustive joint MAP over all codeword pairs.
            let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
            for (ia, ca) in codebook.iter().enumerate() {
                for (ib, cb) in codebook.iter().enumerate() {
                    let score: f64 = ca
                        .iter()
                        .zip(cb.iter())
                        .zip(vectors.iter())
                        .map(|((&a, &b), v)| v.probs()[(2 * a + b) as usize].max(1e-300).ln())
                        .sum();
                    if score > best.0 {
                        best = (score, ia, ib);
                    }
                }
            }
            if out.hard[0] == codebook[best.1] && out.hard[1] == codebook[best.2] {
                frame_matches += 1;
            }
        }
        let frac = frame_matches as f64 / trials as f64;
        assert!(frac >= 0.9, "GSPA/joint-MAP frame agreement {frac}");
    }

    proptest! {
        #[test]
        fn chk_commutative_and_associative(
            a in proptest::collection::vec(0.01f64..1.0, 8),
            b in proptest::collection::vec(0.01f64..1.0, 8),
            c in proptest::collection::vec(0.01f64..1.0, 8),
        ) {
            let (a, b, c) = (lv(a), lv(b), lv(c));
            let ab = chk_update(&[a.clone(), b.clone()]).unwrap();
            let ba = chk_update(&[b.clone(), a.clone()]).unwrap();
            for (x, y) in ab.probs().iter().zip(ba.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let ab_c = chk_update(&[ab, c.clone()]).unwrap();
            let bc = chk_update(&[b, c]).unwrap();
            let a_bc = chk_update(&[a, bc]).unwrap();
            for (x, y) in ab_c.probs().iter().zip(a_bc.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn var_commutative(
            a in proptest::collection::vec(0.01f64..1.0, 4),
            b in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let (a, b) = (lv(a), lv(b));
            let (ab, _) = var_update(&[a.clone(), b.clone()]).unwrap();
            let (ba, _) = var_update(&[b, a]).unwrap();
            for (x, y) in ab.probs().iter().zip(ba.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn updates_stay_normalized(
            a in proptest::collection::vec(0.0f64..1.0, 8),
            b in proptest::collection::vec(0.01f64..1.0, 8),
        ) {
            let (a, b) = (lv(a), lv(b));
            let (v, _) = var_update(&[a.clone(), b.clone()]).unwrap();
            let c = chk_update(&[a, b]).unwrap();
            prop_assert!((v.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
