//! Deterministic synthetic inputs for tests and benchmarks.
//!
//! Generators are seeded and allocation-light so benchmark runs are exactly
//! reproducible without pulling a random-number crate into the library
//! proper. Three families cover the interesting compression regimes:
//! uniform (incompressible), word-based text (low zeroth-order entropy), and
//! an order-2 Markov chain (low second-order entropy, higher zeroth-order).

/// SplitMix64 pseudo-random generator; tiny, seedable, and good enough for
/// generating test inputs.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform value in `[0, n)`; `n` must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform value in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Uniformly random symbols over `[0, sigma)`.
pub fn uniform(n: usize, sigma: usize, seed: u64) -> Vec<u32> {
    assert!(sigma >= 1);
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.next_below(sigma as u64) as u32).collect()
}

const WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "that", "it", "was", "for", "on", "with",
    "he", "as", "his", "they", "at", "be", "this", "have", "from", "or",
    "one", "had", "by", "word", "but", "not", "what", "all", "were", "we",
    "when", "your", "can", "said", "there", "use", "an", "each", "which",
    "she", "do", "how", "their", "if", "will", "up", "other", "about", "out",
    "many", "then", "them", "these", "so", "some", "her", "would", "make",
    "like", "him", "into", "time", "has", "look", "two", "more", "write",
    "go", "see", "number", "no", "way", "could", "people", "my", "than",
    "first", "water", "been", "call", "who", "oil", "its", "now", "find",
    "long", "down", "day", "did", "get", "come", "made", "may", "part",
];

/// Word-based text with a Zipf-like word distribution, rendered to a dense
/// alphabet. Returns the symbol sequence and its alphabet size; the alphabet
/// covers the letters, the space, and sentence punctuation that actually
/// occur.
pub fn english_like(n: usize, seed: u64) -> (Vec<u32>, usize) {
    let mut rng = SplitMix64::new(seed);
    // Zipf weights over the word list: weight of rank r is 1/(r+1).
    let weights: Vec<f64> = (0..WORDS.len()).map(|r| 1.0 / (r + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut bytes: Vec<u8> = Vec::with_capacity(n + 16);
    let mut since_sentence = 0usize;
    while bytes.len() < n {
        let mut x = rng.next_f64() * total;
        let mut idx = 0usize;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                idx = i;
                break;
            }
            x -= *w;
            idx = i;
        }
        bytes.extend_from_slice(WORDS[idx].as_bytes());
        since_sentence += 1;
        if since_sentence >= 8 && rng.next_below(4) == 0 {
            bytes.push(b'.');
            since_sentence = 0;
        } else if rng.next_below(12) == 0 {
            bytes.push(b',');
        }
        bytes.push(b' ');
    }
    bytes.truncate(n);
    // Remap occurring byte values onto a dense alphabet.
    let mut present = [false; 256];
    for &b in &bytes {
        present[b as usize] = true;
    }
    let mut dense = [0u32; 256];
    let mut sigma = 0usize;
    for (b, seen) in present.iter().enumerate() {
        if *seen {
            dense[b] = sigma as u32;
            sigma += 1;
        }
    }
    (bytes.iter().map(|&b| dense[b as usize]).collect(), sigma.max(1))
}

/// Order-2 Markov chain over `[0, sigma)`: each two-symbol context has its
/// own truncated-geometric distribution over a context-specific symbol
/// ordering, so conditional entropy is far below `log2(sigma)`.
pub fn markov2(n: usize, sigma: usize, seed: u64) -> Vec<u32> {
    assert!(sigma >= 1);
    if sigma == 1 {
        return vec![0; n];
    }
    let s = sigma as u64;
    // Per-context symbol orderings, generated deterministically from the seed.
    let mut orders: Vec<u32> = Vec::with_capacity(sigma * sigma * sigma);
    for ctx in 0..(s * s) {
        let mut perm: Vec<u32> = (0..sigma as u32).collect();
        let mut prng = SplitMix64::new(seed ^ (ctx.wrapping_mul(0xD134_2543_DE82_EF95)));
        for i in (1..sigma).rev() {
            let j = prng.next_below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        orders.extend_from_slice(&perm);
    }
    let q = 0.55f64;
    let log1mq = (1.0 - q).ln();
    let mut rng = SplitMix64::new(seed.wrapping_add(0x1234_5678));
    let mut out = Vec::with_capacity(n);
    let (mut p2, mut p1) = (0u64, 0u64);
    for _ in 0..n {
        let u = rng.next_f64();
        let k = (((1.0 - u).ln() / log1mq) as u64).min(s - 1) as usize;
        let ctx = (p2 * s + p1) as usize;
        let sym = orders[ctx * sigma + k];
        out.push(sym);
        p2 = p1;
        p1 = sym as u64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(uniform(500, 7, 42), uniform(500, 7, 42));
        assert_ne!(uniform(500, 7, 42), uniform(500, 7, 43));
        assert_eq!(english_like(500, 1).0, english_like(500, 1).0);
        assert_eq!(markov2(500, 16, 9), markov2(500, 16, 9));
    }

    #[test]
    fn symbols_stay_in_range() {
        let (text, sigma) = english_like(5000, 3);
        assert!(sigma <= 29);
        assert!(text.iter().all(|&c| (c as usize) < sigma));
        let m = markov2(5000, 16, 3);
        assert!(m.iter().all(|&c| c < 16));
    }

    #[test]
    fn markov2_has_low_conditional_entropy() {
        let m = markov2(200_000, 16, 7);
        let h0 = entropy::h0(&m);
        let h2 = entropy::hk(&m, 2);
        // The chain mixes over most symbols (high H_0) but each context is
        // strongly peaked (low H_2).
        assert!(h0 > 2.0, "h0={h0}");
        assert!(h2 < h0 - 0.5, "h0={h0} h2={h2}");
        assert!(h2 < 2.5, "h2={h2}");
    }

    #[test]
    fn english_like_is_compressible() {
        let (text, _sigma) = english_like(100_000, 5);
        let h0 = entropy::h0(&text);
        assert!(h0 > 2.0 && h0 < 5.0, "h0={h0}");
    }
}
