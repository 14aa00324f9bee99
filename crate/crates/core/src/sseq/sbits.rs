//! Immutable bit sequence with select over both bit values, backed by
//! sampled positions plus word scans.
//!
//! Every 64th set (and clear) bit position is stored explicitly; a query
//! jumps to the nearest sample and scans forward with popcounts. Lengths are
//! capped below `2^32` bits so samples fit in a `u32`.

use crate::bits::{select_in_word, BitBuf};

const SAMPLE: usize = 64;

#[derive(Debug, Clone, Default)]
pub(crate) struct StaticBits {
    words: Vec<u64>,
    len: usize,
    ones: usize,
    sel1: Vec<u32>,
    sel0: Vec<u32>,
}

impl StaticBits {
    pub fn from_bitbuf(buf: &BitBuf) -> Self {
        Self::new(buf.words().to_vec(), buf.len())
    }

    pub fn new(mut words: Vec<u64>, len: usize) -> Self {
        let need = (len + 63) / 64;
        assert!(words.len() >= need, "word slice shorter than bit length");
        assert!((len as u64) < u32::MAX as u64, "bit sequence too long for sampled select");
        words.truncate(need);
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        let mut sel1 = Vec::new();
        let mut sel0 = Vec::new();
        let mut ones = 0usize;
        for (wi, &w) in words.iter().enumerate() {
            let base = wi * 64;
            let in_word = (len - base).min(64);
            let o = w.count_ones() as usize;
            let z = in_word - o;
            let mut t = (ones + SAMPLE - 1) / SAMPLE * SAMPLE;
            while t < ones + o {
                sel1.push(base as u32 + select_in_word(w, (t - ones) as u32 + 1));
                t += SAMPLE;
            }
            let zb = base - ones;
            let wz = !w & if in_word == 64 { !0u64 } else { (1u64 << in_word) - 1 };
            let mut t0 = (zb + SAMPLE - 1) / SAMPLE * SAMPLE;
            while t0 < zb + z {
                sel0.push(base as u32 + select_in_word(wz, (t0 - zb) as u32 + 1));
                t0 += SAMPLE;
            }
            ones += o;
        }
        StaticBits {
            words,
            len,
            ones,
            sel1,
            sel0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.ones
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, pos: usize) -> bool {
        debug_assert!(pos < self.len);
        self.words[pos / 64] >> (pos % 64) & 1 == 1
    }

    /// Position of set bit number `k` (0-based). Requires `k < count_ones()`.
    pub fn select1(&self, k: usize) -> usize {
        debug_assert!(k < self.ones);
        let pos = self.sel1[k / SAMPLE] as usize;
        let mut rem = k % SAMPLE;
        if rem == 0 {
            return pos;
        }
        let mut wi = pos / 64;
        let off = pos % 64;
        let mut w = if off == 63 {
            0
        } else {
            self.words[wi] & !((1u64 << (off + 1)) - 1)
        };
        loop {
            let c = w.count_ones() as usize;
            if rem <= c {
                return wi * 64 + select_in_word(w, rem as u32) as usize;
            }
            rem -= c;
            wi += 1;
            w = self.words[wi];
        }
    }

    /// Position of clear bit number `k` (0-based). Requires `k < count_zeros()`.
    pub fn select0(&self, k: usize) -> usize {
        debug_assert!(k < self.len - self.ones);
        let pos = self.sel0[k / SAMPLE] as usize;
        let mut rem = k % SAMPLE;
        if rem == 0 {
            return pos;
        }
        let mut wi = pos / 64;
        let off = pos % 64;
        let mut w = if off == 63 {
            0
        } else {
            !self.words[wi] & !((1u64 << (off + 1)) - 1)
        };
        loop {
            let c = w.count_ones() as usize;
            if rem <= c {
                return wi * 64 + select_in_word(w, rem as u32) as usize;
            }
            rem -= c;
            wi += 1;
            w = !self.words[wi];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textgen::SplitMix64;

    fn oracle_positions(bits: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for (i, &b) in bits.iter().enumerate() {
            if b {
                ones.push(i);
            } else {
                zeros.push(i);
            }
        }
        (ones, zeros)
    }

    fn check(bits: &[bool]) {
        let mut buf = BitBuf::new();
        for &b in bits {
            buf.push_bit(b);
        }
        let sb = StaticBits::from_bitbuf(&buf);
        let (ones, zeros) = oracle_positions(bits);
        assert_eq!(sb.count_ones(), ones.len());
        assert_eq!(sb.count_zeros(), zeros.len());
        for (k, &p) in ones.iter().enumerate() {
            assert_eq!(sb.select1(k), p, "select1({k})");
        }
        for (k, &p) in zeros.iter().enumerate() {
            assert_eq!(sb.select0(k), p, "select0({k})");
        }
    }

    #[test]
    fn random_patterns() {
        let mut rng = SplitMix64::new(0xfeed);
        for &density in &[2u64, 5, 17, 64] {
            let bits: Vec<bool> = (0..5000).map(|_| rng.next_below(density) == 0).collect();
            check(&bits);
        }
    }

    #[test]
    fn run_patterns_like_count_vectors() {
        // Shapes that mirror the per-block count vectors: runs of ones
        // separated by single zeros, including long runs crossing samples.
        let mut bits = Vec::new();
        let mut rng = SplitMix64::new(7);
        for _ in 0..200 {
            let run = rng.next_below(200) as usize;
            bits.extend(std::iter::repeat(true).take(run));
            bits.push(false);
        }
        check(&bits);
    }

    #[test]
    fn degenerate_lengths() {
        check(&[]);
        check(&[true]);
        check(&[false]);
        let bits: Vec<bool> = (0..64).map(|_| true).collect();
        check(&bits);
        let bits: Vec<bool> = (0..65).map(|i| i % 2 == 0).collect();
        check(&bits);
        let bits: Vec<bool> = (0..128).map(|_| false).collect();
        check(&bits);
    }
}
