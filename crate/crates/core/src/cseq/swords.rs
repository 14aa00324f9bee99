//! Extraction-side caches: a word-packed mirror of the staging symbols and,
//! per static section, a deletion book that tracks how battered each
//! meta-symbol is and keeps the surviving symbols of badly hit ones in
//! packed overflow words. Bulk extraction reads whole words from these
//! instead of decoding coded blocks symbol by symbol.

use std::collections::HashMap;

use crate::bitvec::DynBitVec;
use crate::error::{Error, Result};
use crate::ops_count;

/// Symbols packed several to a machine word, with per-word fill counts.
/// Words hold between `cap/2` and `cap` symbols (the only word of a short
/// sequence may underflow).
#[derive(Debug, Clone, Default)]
pub struct PackedWords {
    bits: u32,
    cap: u32,
    words: Vec<u64>,
    fills: Vec<u8>,
    len: usize,
}

impl PackedWords {
    pub fn new(bits: u32, cap: u32) -> Self {
        assert!(bits >= 1 && bits <= 32);
        assert!(cap >= 1 && (cap * bits) <= 64);
        PackedWords {
            bits,
            cap,
            words: Vec::new(),
            fills: Vec::new(),
            len: 0,
        }
    }

    pub fn from_symbols(syms: &[u32], bits: u32, cap: u32) -> Self {
        let mut pw = PackedWords::new(bits, cap);
        let mut i = 0usize;
        while i < syms.len() {
            let take = (syms.len() - i).min(cap as usize);
            let mut w = 0u64;
            for (j, &s) in syms[i..i + take].iter().enumerate() {
                w |= (s as u64) << (j as u32 * bits);
            }
            pw.words.push(w);
            pw.fills.push(take as u8);
            i += take;
        }
        pw.len = syms.len();
        pw
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    fn mask(&self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    /// Word and in-word index of symbol `i`; `i == len` maps to the append
    /// slot of the last word.
    fn locate(&self, i: usize) -> (usize, u32) {
        debug_assert!(i <= self.len);
        let mut rem = i;
        for (w, &f) in self.fills.iter().enumerate() {
            ops_count::bump(1);
            let f = f as usize;
            if rem < f || (rem == f && w + 1 == self.fills.len()) {
                return (w, rem as u32);
            }
            rem -= f;
        }
        (0, 0)
    }

    pub fn get(&self, i: usize) -> u32 {
        let (w, off) = self.locate(i);
        ((self.words[w] >> (off * self.bits)) & self.mask()) as u32
    }

    fn word_insert(&mut self, w: usize, off: u32, sym: u32) {
        let b = self.bits;
        let lo_bits = off * b;
        let word = self.words[w];
        let lo = if lo_bits == 0 {
            0
        } else {
            word & ((1u64 << lo_bits) - 1)
        };
        let hi = if lo_bits == 0 { word } else { word >> lo_bits };
        let shifted_hi = if lo_bits + b >= 64 {
            debug_assert_eq!(hi, 0);
            0
        } else {
            hi << (lo_bits + b)
        };
        self.words[w] = lo | ((sym as u64) << lo_bits) | shifted_hi;
        self.fills[w] += 1;
    }

    fn word_remove(&mut self, w: usize, off: u32) {
        let b = self.bits;
        let lo_bits = off * b;
        let word = self.words[w];
        let lo = if lo_bits == 0 {
            0
        } else {
            word & ((1u64 << lo_bits) - 1)
        };
        let hi = if lo_bits + b >= 64 {
            0
        } else {
            word >> (lo_bits + b)
        };
        self.words[w] = lo | (hi << lo_bits);
        self.fills[w] -= 1;
    }

    pub fn insert(&mut self, i: usize, sym: u32) {
        ops_count::bump(1);
        debug_assert!((sym as u64) <= self.mask());
        if self.words.is_empty() {
            self.words.push(sym as u64);
            self.fills.push(1);
            self.len = 1;
            return;
        }
        let (mut w, mut off) = self.locate(i);
        if self.fills[w] as u32 == self.cap {
            // Full: split into two halves and retarget.
            let keep = (self.cap / 2).max(1);
            let moved = self.cap - keep;
            let hi = self.words[w] >> (keep * self.bits);
            self.words[w] &= (1u64 << (keep * self.bits)) - 1;
            self.fills[w] = keep as u8;
            self.words.insert(w + 1, hi);
            self.fills.insert(w + 1, moved as u8);
            ops_count::bump(1 + self.words.len() as u64 / 8);
            if off > keep {
                w += 1;
                off -= keep;
            }
        }
        self.word_insert(w, off, sym);
        self.len += 1;
    }

    pub fn remove(&mut self, i: usize) {
        ops_count::bump(1);
        let (w, off) = self.locate(i);
        self.word_remove(w, off);
        self.len -= 1;
        if self.len == 0 {
            self.words.clear();
            self.fills.clear();
            return;
        }
        let min = (self.cap / 2).max(1);
        if (self.fills[w] as u32) < min && self.words.len() > 1 {
            // Merge with a neighbour, or borrow one symbol from it.
            let (l, r) = if w + 1 < self.words.len() {
                (w, w + 1)
            } else {
                (w - 1, w)
            };
            let lf = self.fills[l] as u32;
            let rf = self.fills[r] as u32;
            if lf + rf <= self.cap {
                self.words[l] |= self.words[r] << (lf * self.bits);
                self.fills[l] = (lf + rf) as u8;
                self.words.remove(r);
                self.fills.remove(r);
                ops_count::bump(1 + self.words.len() as u64 / 8);
            } else if w == l {
                // Borrow the right neighbour's first symbol.
                let s = (self.words[r] & self.mask()) as u32;
                self.word_remove(r, 0);
                self.word_insert(l, lf, s);
            } else {
                // Borrow the left neighbour's last symbol.
                let s = ((self.words[l] >> ((lf - 1) * self.bits)) & self.mask()) as u32;
                self.word_remove(l, lf - 1);
                self.word_insert(r, 0, s);
            }
        }
    }

    /// Appends symbols `[i, i + count)` to `out`.
    pub fn extract_into(&self, i: usize, count: usize, out: &mut Vec<u32>) {
        if count == 0 {
            return;
        }
        assert!(i + count <= self.len);
        let (mut w, mut off) = self.locate(i);
        let mut rem = count;
        let mask = self.mask();
        while rem > 0 {
            ops_count::bump(1);
            let f = self.fills[w] as u32;
            let take = ((f - off) as usize).min(rem);
            let mut word = self.words[w] >> (off * self.bits);
            for _ in 0..take {
                out.push((word & mask) as u32);
                word >>= self.bits;
            }
            rem -= take;
            off = 0;
            w += 1;
        }
    }

    pub fn bits_used(&self) -> u64 {
        (self.words.len() as u64) * 72 // 64-bit word + 8-bit fill
    }

    pub fn validate(&self) -> Result<()> {
        if self.words.len() != self.fills.len() {
            return Err(Error::AuditFailed("packed words/fills length".into()));
        }
        let min = (self.cap / 2).max(1);
        let mut total = 0usize;
        for (w, &f) in self.fills.iter().enumerate() {
            let f = f as u32;
            if f > self.cap || f == 0 {
                return Err(Error::AuditFailed(format!("word {w} fill {f}")));
            }
            if f < min && self.words.len() > 1 {
                return Err(Error::AuditFailed(format!("word {w} underfull {f}")));
            }
            if (self.cap as u64 * self.bits as u64) < 64 {
                let used = f * self.bits;
                if used < 64 && (self.words[w] >> used) != 0 {
                    return Err(Error::AuditFailed(format!("word {w} stray bits")));
                }
            }
            total += f as usize;
        }
        if total != self.len {
            return Err(Error::AuditFailed("packed length mismatch".into()));
        }
        Ok(())
    }
}

const CHAIN_END: u32 = u32::MAX;

/// Per-section deletion ledger. Each meta-symbol of the section has a
/// deletion count; once deletions reach half the meta length the meta is
/// marked spoiled and its surviving symbols are copied into packed overflow
/// words, chained per meta. Chains are append-only between section rebuilds:
/// a further deletion appends a fresh chain version and repoints the head.
#[derive(Debug, Clone)]
pub struct SpoilBook {
    ell: usize,
    threshold: u16,
    bits: u32,
    cap: u32,
    del: Vec<u16>,
    /// One bit per meta-symbol; 1 = healthy (not spoiled).
    spos: DynBitVec,
    /// Word-shape mirror of the overflow words: `0^k 1` per word of `k`
    /// symbols, in push order.
    vpos: DynBitVec,
    v_words: Vec<u64>,
    v_fill: Vec<u8>,
    v_next: Vec<u32>,
    v_head: HashMap<u32, u32>,
}

impl SpoilBook {
    pub fn new(n_metas: usize, ell: usize, bits: u32, cap: u32) -> Self {
        assert!(bits >= 1 && bits <= 32 && cap >= 1 && cap * bits <= 64);
        let mut spos = DynBitVec::new();
        if n_metas > 0 {
            spos.push_run(true, n_metas);
        }
        SpoilBook {
            ell: ell.max(1),
            threshold: (((ell.max(1) + 1) / 2).max(1)) as u16,
            bits,
            cap,
            del: vec![0u16; n_metas],
            spos,
            vpos: DynBitVec::new(),
            v_words: Vec::new(),
            v_fill: Vec::new(),
            v_next: Vec::new(),
            v_head: HashMap::new(),
        }
    }

    pub fn metas(&self) -> usize {
        self.del.len()
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn is_spoiled(&self, meta: usize) -> bool {
        !self.spos.get(meta)
    }

    pub fn spos(&self) -> &DynBitVec {
        &self.spos
    }

    pub fn deletions(&self, meta: usize) -> usize {
        self.del[meta] as usize
    }

    /// Records one more deletion in `meta`. Returns true when the meta is
    /// (now or already) spoiled, i.e. the caller must follow up with
    /// `set_chain` carrying the surviving symbols.
    pub fn note_delete(&mut self, meta: usize) -> bool {
        ops_count::bump(1);
        self.del[meta] = self.del[meta].saturating_add(1);
        let spoiled = self.del[meta] >= self.threshold;
        if spoiled && self.spos.get(meta) {
            self.spos.set(meta, false);
        }
        spoiled
    }

    /// Installs the current survivor set of a spoiled meta as a fresh chain.
    pub fn set_chain(&mut self, meta: usize, live: &[u32]) {
        debug_assert!(self.is_spoiled(meta));
        if live.is_empty() {
            self.v_head.insert(meta as u32, CHAIN_END);
            return;
        }
        let mut head = CHAIN_END;
        let mut tail = CHAIN_END;
        let mut i = 0usize;
        while i < live.len() {
            ops_count::bump(1);
            let take = (live.len() - i).min(self.cap as usize);
            let mut w = 0u64;
            for (j, &s) in live[i..i + take].iter().enumerate() {
                w |= (s as u64) << (j as u32 * self.bits);
            }
            let idx = self.v_words.len() as u32;
            self.v_words.push(w);
            self.v_fill.push(take as u8);
            self.v_next.push(CHAIN_END);
            self.vpos.push_run(false, take);
            self.vpos.push(true);
            if head == CHAIN_END {
                head = idx;
            } else {
                self.v_next[tail as usize] = idx;
            }
            tail = idx;
            i += take;
        }
        self.v_head.insert(meta as u32, head);
    }

    /// Surviving symbols of a spoiled meta, if a chain was installed.
    pub fn chain(&self, meta: usize) -> Option<Vec<u32>> {
        let &head = self.v_head.get(&(meta as u32))?;
        let mut out = Vec::new();
        let mask = if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        };
        let mut cur = head;
        while cur != CHAIN_END {
            ops_count::bump(1);
            let mut w = self.v_words[cur as usize];
            for _ in 0..self.v_fill[cur as usize] {
                out.push((w & mask) as u32);
                w >>= self.bits;
            }
            cur = self.v_next[cur as usize];
        }
        Some(out)
    }

    /// Whether a chain is installed for `meta`.
    pub fn has_chain(&self, meta: usize) -> bool {
        self.v_head.contains_key(&(meta as u32))
    }

    pub fn bits_used(&self) -> u64 {
        (self.del.len() as u64) * 16
            + self.spos.len() as u64
            + self.vpos.len() as u64
            + (self.v_words.len() as u64) * (64 + 8 + 32)
            + (self.v_head.len() as u64) * 64
    }

    pub fn validate(&self) -> Result<()> {
        if self.spos.len() != self.del.len() {
            return Err(Error::AuditFailed("spoil book meta count".into()));
        }
        if self.v_words.len() != self.v_fill.len() || self.v_words.len() != self.v_next.len() {
            return Err(Error::AuditFailed("overflow word tables".into()));
        }
        // The word-shape mirror must describe exactly the overflow words.
        if self.vpos.count_ones() != self.v_words.len() {
            return Err(Error::AuditFailed("word-shape mirror count".into()));
        }
        let mut pos = 0usize;
        for (w, &f) in self.v_fill.iter().enumerate() {
            let end = self
                .vpos
                .select1(w + 1)
                .ok_or_else(|| Error::AuditFailed("word-shape mirror short".into()))?;
            if end - pos != f as usize {
                return Err(Error::AuditFailed(format!("word {w} shape mismatch")));
            }
            pos = end + 1;
        }
        for (m, &d) in self.del.iter().enumerate() {
            let spoiled = d >= self.threshold;
            if spoiled == self.spos.get(m) {
                return Err(Error::AuditFailed(format!(
                    "meta {m} spoil mark disagrees with count {d}"
                )));
            }
            if spoiled && !self.has_chain(m) {
                return Err(Error::AuditFailed(format!("meta {m} spoiled, no chain")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn packed_words_matches_vec() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(bits, cap) in &[(1u32, 10u32), (6, 2), (8, 8), (3, 21)] {
            let mut pw = PackedWords::new(bits, cap);
            let mut shadow: Vec<u32> = Vec::new();
            let top = 1u32 << bits.min(16);
            for step in 0..3000 {
                if shadow.is_empty() || rng.gen_bool(0.6) {
                    let i = rng.gen_range(0..=shadow.len());
                    let s = rng.gen_range(0..top);
                    pw.insert(i, s);
                    shadow.insert(i, s);
                } else {
                    let i = rng.gen_range(0..shadow.len());
                    pw.remove(i);
                    shadow.remove(i);
                }
                if step % 97 == 0 {
                    pw.validate().unwrap();
                    let mut got = Vec::new();
                    pw.extract_into(0, shadow.len(), &mut got);
                    assert_eq!(got, shadow);
                    if !shadow.is_empty() {
                        let i = rng.gen_range(0..shadow.len());
                        assert_eq!(pw.get(i), shadow[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn packed_words_partial_extract() {
        let syms: Vec<u32> = (0..100).map(|i| i % 50).collect();
        let pw = PackedWords::from_symbols(&syms, 6, 10);
        pw.validate().unwrap();
        for &(i, c) in &[(0usize, 100usize), (3, 0), (7, 13), (95, 5), (99, 1)] {
            let mut out = Vec::new();
            pw.extract_into(i, c, &mut out);
            assert_eq!(out, &syms[i..i + c]);
        }
    }

    #[test]
    fn spoil_book_chains() {
        let mut b = SpoilBook::new(8, 4, 8, 8);
        assert!(!b.is_spoiled(3));
        assert!(!b.note_delete(3));
        assert!(b.note_delete(3)); // threshold (4+1)/2 = 2
        assert!(b.is_spoiled(3));
        b.set_chain(3, &[9, 7]);
        assert_eq!(b.chain(3).unwrap(), vec![9, 7]);
        assert!(b.note_delete(3));
        b.set_chain(3, &[9]);
        assert_eq!(b.chain(3).unwrap(), vec![9]);
        assert!(!b.is_spoiled(2));
        b.validate().unwrap();
        // Long chain spans several words.
        let mut c = SpoilBook::new(2, 40, 8, 8);
        c.note_delete(1);
        for _ in 0..19 {
            c.note_delete(1);
        }
        assert!(c.is_spoiled(1));
        let live: Vec<u32> = (0..20).collect();
        c.set_chain(1, &live);
        assert_eq!(c.chain(1).unwrap(), live);
        c.validate().unwrap();
    }
}
