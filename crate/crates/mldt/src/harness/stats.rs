//! Binomial statistics for BER points.

/// z for a two-sided 99% interval.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Wilson score interval for `errors` successes in `bits` trials.
pub fn wilson_interval(errors: u64, bits: u64, z: f64) -> (f64, f64) {
    if bits == 0 {
        return (0.0, 1.0);
    }
    let n = bits as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (((center - half) / denom).max(0.0), ((center + half) / denom).min(1.0))
}

pub fn wilson_99(errors: u64, bits: u64) -> (f64, f64) {
    wilson_interval(errors, bits, Z_99)
}
