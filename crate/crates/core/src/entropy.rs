//! Empirical entropy measures used as compression baselines in tests and
//! reports.
//!
//! All results are in bits per symbol of the *original* sequence. The order-k
//! entropy groups symbols by their k-symbol left context and averages the
//! zeroth-order entropies of the groups; the first k symbols of the sequence
//! carry no context and contribute zero, matching the usual empirical
//! definition.

use std::collections::HashMap;

/// Zeroth-order empirical entropy of a frequency vector, in bits per symbol.
/// Zero counts are ignored; an all-zero vector has entropy 0.
pub fn h0_counts(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Zeroth-order empirical entropy of a symbol sequence.
pub fn h0(s: &[u32]) -> f64 {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &x in s {
        *counts.entry(x).or_insert(0) += 1;
    }
    let v: Vec<u64> = counts.into_values().collect();
    h0_counts(&v)
}

/// Zeroth-order empirical entropy of a sequence of wide values (for example
/// packed meta-symbols).
pub fn h0_u64(s: &[u64]) -> f64 {
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &x in s {
        *counts.entry(x).or_insert(0) += 1;
    }
    let v: Vec<u64> = counts.into_values().collect();
    h0_counts(&v)
}

/// Order-k empirical entropy of a symbol sequence, in bits per symbol.
///
/// `hk(s, 0)` equals [`h0`]. For `k >= s.len()` the result is 0 (every
/// context is unique).
pub fn hk(s: &[u32], k: usize) -> f64 {
    if k == 0 {
        return h0(s);
    }
    if s.len() <= k {
        return 0.0;
    }
    let mut ctx: HashMap<&[u32], HashMap<u32, u64>> = HashMap::new();
    for i in k..s.len() {
        *ctx
            .entry(&s[i - k..i])
            .or_default()
            .entry(s[i])
            .or_insert(0) += 1;
    }
    let n = s.len() as f64;
    let mut bits = 0.0;
    for dist in ctx.values() {
        let counts: Vec<u64> = dist.values().copied().collect();
        let m: u64 = counts.iter().sum();
        bits += m as f64 * h0_counts(&counts);
    }
    bits / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h0_uniform_is_log_sigma() {
        let s: Vec<u32> = (0..4096u32).map(|i| i % 16).collect();
        assert!((h0(&s) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn h0_single_symbol_is_zero() {
        let s = vec![7u32; 1000];
        assert_eq!(h0(&s), 0.0);
        assert_eq!(hk(&s, 2), 0.0);
    }

    #[test]
    fn hk_of_periodic_sequence_vanishes() {
        // After one symbol of context, the next symbol of "010101..." is
        // determined, so H_1 = 0 while H_0 = 1.
        let s: Vec<u32> = (0..10_000u32).map(|i| i % 2).collect();
        assert!((h0(&s) - 1.0).abs() < 1e-6);
        assert!(hk(&s, 1) < 1e-9);
    }

    #[test]
    fn hk_never_exceeds_h0() {
        // Deterministic pseudo-random mix with some structure.
        let mut x = 0x9e3779b97f4a7c15u64;
        let mut s = Vec::new();
        for _ in 0..20_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let sym = if x >> 62 == 0 {
                (x >> 33) as u32 % 8
            } else {
                *s.last().unwrap_or(&0)
            };
            s.push(sym);
        }
        let h0v = h0(&s);
        let h1 = hk(&s, 1);
        let h2 = hk(&s, 2);
        assert!(h1 <= h0v + 1e-9);
        assert!(h2 <= h1 + 1e-9);
    }

    #[test]
    fn empty_and_tiny_inputs() {
        assert_eq!(h0(&[]), 0.0);
        assert_eq!(hk(&[], 2), 0.0);
        assert_eq!(hk(&[1], 1), 0.0);
        assert_eq!(h0_counts(&[]), 0.0);
        assert_eq!(h0_counts(&[0, 0]), 0.0);
    }
}
