//! Dynamic bit sequence.
//!
//! Bits live in a vector of leaves; a leaf is either a packed word block or a
//! run (a fill of one repeated bit with no materialized storage). Runs are
//! what make `zeros(m)` constant-work and keep all-same regions at O(1)
//! space: only leaves with mixed content occupy memory proportional to their
//! length. A Fenwick pair over (bit count, one count) per leaf locates
//! positions and occurrences in O(log #leaves).
//!
//! Packed leaves hold at most `2 * leaf_bits` bits and, away from runs and
//! the sequence ends, at least `leaf_bits / 2`. Updates inside a leaf cost
//! one word-block shift; leaf splits and merges rebuild the Fenwick pair,
//! which is amortized against the updates that caused them.
//!
//! Positions are 0-based; `rank*(i)` counts within `[0, i)`; `select*(j)`
//! takes 1-based `j` and returns a 0-based position.

use crate::bits::{self, select_in_word, select_zero_in_word};
use crate::error::{Error, Result};
use crate::ops_count;

const DEFAULT_LEAF_BITS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Leaf {
    Packed { words: Vec<u64>, len: usize },
    Run { bit: bool, len: usize },
}

impl Leaf {
    fn len(&self) -> usize {
        match self {
            Leaf::Packed { len, .. } => *len,
            Leaf::Run { len, .. } => *len,
        }
    }

    fn ones(&self) -> usize {
        match self {
            Leaf::Packed { words, len } => {
                let mut total = 0u32;
                let full = len / 64;
                for w in &words[..full] {
                    total += w.count_ones();
                }
                if len % 64 != 0 {
                    total += (words[full] & ((1u64 << (len % 64)) - 1)).count_ones();
                }
                total as usize
            }
            Leaf::Run { bit, len } => {
                if *bit {
                    *len
                } else {
                    0
                }
            }
        }
    }
}

/// Combined Fenwick over per-leaf (bits, ones).
#[derive(Debug, Clone, Default)]
struct LeafIndex {
    bits: Vec<u64>,
    ones: Vec<u64>,
    n: usize,
}

#[derive(Clone, Copy)]
enum Key {
    Bits,
    Ones,
    Zeros,
}

impl LeafIndex {
    fn rebuild(&mut self, leaves: &[Leaf]) {
        self.n = leaves.len();
        self.bits = vec![0; self.n + 1];
        self.ones = vec![0; self.n + 1];
        for (i, leaf) in leaves.iter().enumerate() {
            let idx = i + 1;
            self.bits[idx] += leaf.len() as u64;
            self.ones[idx] += leaf.ones() as u64;
            let parent = idx + (idx & idx.wrapping_neg());
            if parent <= self.n {
                self.bits[parent] += self.bits[idx];
                self.ones[parent] += self.ones[idx];
            }
        }
        ops_count::bump(self.n as u64 / 8 + 1);
    }

    /// Appends one leaf summary in O(log n) without touching the rest.
    fn append(&mut self, b: u64, o: u64) {
        if self.bits.is_empty() {
            self.bits.push(0);
            self.ones.push(0);
        }
        let idx = self.n + 1;
        self.n = idx;
        let lowbit = idx & idx.wrapping_neg();
        let mut bb = b;
        let mut oo = o;
        let mut step = 1usize;
        while step < lowbit {
            bb += self.bits[idx - step];
            oo += self.ones[idx - step];
            step <<= 1;
            ops_count::bump(1);
        }
        self.bits.push(bb);
        self.ones.push(oo);
        ops_count::bump(1);
    }

    fn add(&mut self, leaf: usize, dbits: i64, dones: i64) {
        let mut i = leaf + 1;
        while i <= self.n {
            self.bits[i] = (self.bits[i] as i64 + dbits) as u64;
            self.ones[i] = (self.ones[i] as i64 + dones) as u64;
            i += i & i.wrapping_neg();
            ops_count::bump(1);
        }
    }

    fn key_at(&self, i: usize, key: Key) -> u64 {
        match key {
            Key::Bits => self.bits[i],
            Key::Ones => self.ones[i],
            Key::Zeros => self.bits[i] - self.ones[i],
        }
    }

    /// Finds the leaf containing the item with `rem` predecessors under `key`
    /// (strictly-less search: returns the first leaf where the cumulative key
    /// exceeds `rem`). Returns (leaf index, bits before, ones before, key
    /// remainder inside the leaf).
    fn find(&self, rem: u64, key: Key) -> (usize, u64, u64, u64) {
        let mut pos = 0usize;
        let mut rem = rem;
        let mut bits_before = 0u64;
        let mut ones_before = 0u64;
        let mut step = self.n.next_power_of_two().max(1);
        while step > 0 {
            let next = pos + step;
            if next <= self.n && self.key_at(next, key) <= rem {
                rem -= self.key_at(next, key);
                bits_before += self.bits[next];
                ones_before += self.ones[next];
                pos = next;
            }
            step >>= 1;
            ops_count::bump(1);
        }
        (pos, bits_before, ones_before, rem)
    }

    /// Cumulative (bits, ones) of leaves `[0, leaf)`.
    fn prefix(&self, leaf: usize) -> (u64, u64) {
        let mut i = leaf;
        let mut b = 0;
        let mut o = 0;
        while i > 0 {
            b += self.bits[i];
            o += self.ones[i];
            i &= i - 1;
            ops_count::bump(1);
        }
        (b, o)
    }
}

/// Dynamic bit sequence with rank and select.
#[derive(Debug, Clone)]
pub struct DynBitVec {
    leaves: Vec<Leaf>,
    index: LeafIndex,
    len: usize,
    ones: usize,
    leaf_bits: usize,
}

impl Default for DynBitVec {
    fn default() -> Self {
        DynBitVec::new()
    }
}

impl DynBitVec {
    pub fn new() -> Self {
        DynBitVec::with_leaf_bits(DEFAULT_LEAF_BITS)
    }

    /// Uses a custom target leaf size; tests shrink it to force splits.
    pub fn with_leaf_bits(leaf_bits: usize) -> Self {
        assert!(leaf_bits >= 64 && leaf_bits % 64 == 0);
        DynBitVec {
            leaves: Vec::new(),
            index: LeafIndex::default(),
            len: 0,
            ones: 0,
            leaf_bits,
        }
    }

    /// Constant-work logical sequence of `m` zero bits: a single run leaf,
    /// no per-bit storage.
    pub fn zeros(m: usize) -> Self {
        let mut v = DynBitVec::new();
        if m > 0 {
            v.leaves.push(Leaf::Run { bit: false, len: m });
            v.len = m;
            v.index.rebuild(&v.leaves);
        }
        v
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut v = DynBitVec::new();
        let mut word = 0u64;
        let mut fill = 0usize;
        let mut words = Vec::new();
        let mut total = 0usize;
        for b in bits {
            if b {
                word |= 1 << fill;
            }
            fill += 1;
            total += 1;
            if fill == 64 {
                words.push(word);
                word = 0;
                fill = 0;
            }
        }
        if fill > 0 {
            words.push(word);
        }
        v.append_words(&words, total);
        v
    }

    /// Appends `len` bits stored packed in `words`.
    pub fn append_words(&mut self, words: &[u64], len: usize) {
        let mut pos = 0usize;
        // Top up a partial trailing leaf first so repeated appends cannot
        // leave neighboring undersized leaves behind.
        if let Some(Leaf::Packed {
            words: lw,
            len: llen,
        }) = self.leaves.last_mut()
        {
            if *llen < self.leaf_bits {
                let take = (self.leaf_bits - *llen).min(len);
                lw.resize((*llen + take + 63) / 64, 0);
                let mut copied = 0usize;
                let mut added_ones = 0u64;
                while copied < take {
                    let w = (take - copied).min(64);
                    let chunk = bits::get_bits(words, copied, w);
                    added_ones += chunk.count_ones() as u64;
                    bits::set_bits(lw, *llen + copied, chunk, w);
                    copied += w;
                }
                *llen += take;
                let last = self.leaves.len() - 1;
                self.len += take;
                self.ones += added_ones as usize;
                self.index.add(last, take as i64, added_ones as i64);
                pos = take;
            }
        }
        while pos < len {
            let take = (len - pos).min(self.leaf_bits);
            let mut leaf_words = vec![0u64; (take + 63) / 64];
            for (i, w) in leaf_words.iter_mut().enumerate() {
                let width = (take - i * 64).min(64);
                *w = bits::get_bits(words, pos + i * 64, width);
            }
            let leaf = Leaf::Packed {
                words: leaf_words,
                len: take,
            };
            let ones = leaf.ones();
            self.len += take;
            self.ones += ones;
            self.leaves.push(leaf);
            self.index.append(take as u64, ones as u64);
            pos += take;
        }
        ops_count::bump((len / 64 + 1) as u64);
    }

    /// Appends a run of `len` copies of `bit` in O(log #leaves) amortized.
    ///
    /// Long runs become dedicated run leaves; short ones are packed into
    /// the trailing word leaf so that many short runs cannot blow up the
    /// leaf count.
    pub fn push_run(&mut self, bit: bool, len: usize) {
        if len == 0 {
            return;
        }
        if let Some(Leaf::Run { bit: b, len: l }) = self.leaves.last_mut() {
            if *b == bit {
                *l += len;
                let last = self.leaves.len() - 1;
                self.len += len;
                if bit {
                    self.ones += len;
                }
                self.index.add(last, len as i64, if bit { len as i64 } else { 0 });
                return;
            }
        }
        if len >= self.leaf_bits / 4 {
            self.len += len;
            if bit {
                self.ones += len;
            }
            self.leaves.push(Leaf::Run { bit, len });
            self.index.append(len as u64, if bit { len as u64 } else { 0 });
            return;
        }
        let mut remaining = len;
        if let Some(Leaf::Packed { words, len: llen }) = self.leaves.last_mut() {
            if *llen < self.leaf_bits {
                let take = (self.leaf_bits - *llen).min(remaining);
                words.resize((*llen + take + 63) / 64, 0);
                let mut done = 0usize;
                while done < take {
                    let w = (take - done).min(64);
                    let val = if bit {
                        if w == 64 {
                            u64::MAX
                        } else {
                            (1u64 << w) - 1
                        }
                    } else {
                        0
                    };
                    bits::set_bits(words, *llen + done, val, w);
                    done += w;
                }
                *llen += take;
                let last = self.leaves.len() - 1;
                self.len += take;
                if bit {
                    self.ones += take;
                }
                self.index
                    .add(last, take as i64, if bit { take as i64 } else { 0 });
                remaining -= take;
            }
        }
        while remaining > 0 {
            let take = remaining.min(self.leaf_bits);
            let mut words = vec![if bit { u64::MAX } else { 0u64 }; (take + 63) / 64];
            if bit && take % 64 != 0 {
                let last = words.len() - 1;
                words[last] = (1u64 << (take % 64)) - 1;
            }
            self.leaves.push(Leaf::Packed { words, len: take });
            self.len += take;
            if bit {
                self.ones += take;
            }
            self.index
                .append(take as u64, if bit { take as u64 } else { 0 });
            remaining -= take;
        }
        ops_count::bump((len / 64 + 1) as u64);
    }

    pub fn push(&mut self, bit: bool) {
        self.push_run(bit, 1);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.ones
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    fn locate(&self, pos: usize) -> (usize, usize, u64, u64) {
        let (leaf, bits_before, ones_before, rem) = self.index.find(pos as u64, Key::Bits);
        (leaf, rem as usize, bits_before, ones_before)
    }

    /// # Panics
    /// If `pos >= len`.
    pub fn get(&self, pos: usize) -> bool {
        assert!(pos < self.len, "get: position {pos} out of range {}", self.len);
        let (leaf, off, ..) = self.locate(pos);
        match &self.leaves[leaf] {
            Leaf::Packed { words, .. } => words[off / 64] >> (off % 64) & 1 == 1,
            Leaf::Run { bit, .. } => *bit,
        }
    }

    /// Number of ones in `[0, i)`.
    ///
    /// # Panics
    /// If `i > len`.
    pub fn rank1(&self, i: usize) -> usize {
        assert!(i <= self.len, "rank1: prefix {i} out of range {}", self.len);
        if i == self.len {
            return self.ones;
        }
        let (leaf, off, _, ones_before) = self.locate(i);
        let local = match &self.leaves[leaf] {
            Leaf::Packed { words, .. } => {
                let mut total = 0u32;
                for w in &words[..off / 64] {
                    total += w.count_ones();
                }
                if off % 64 != 0 {
                    total += (words[off / 64] & ((1u64 << (off % 64)) - 1)).count_ones();
                }
                ops_count::bump((off / 256 + 1) as u64);
                total as usize
            }
            Leaf::Run { bit, .. } => {
                if *bit {
                    off
                } else {
                    0
                }
            }
        };
        ones_before as usize + local
    }

    /// Number of zeros in `[0, i)`.
    pub fn rank0(&self, i: usize) -> usize {
        i - self.rank1(i)
    }

    pub fn rank(&self, bit: bool, i: usize) -> usize {
        if bit {
            self.rank1(i)
        } else {
            self.rank0(i)
        }
    }

    /// Position of the `j`-th one (1-based `j`); `None` if `j` is 0 or
    /// exceeds the number of ones.
    pub fn select1(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.ones {
            return None;
        }
        let (leaf, bits_before, _, rem) = self.index.find(j as u64 - 1, Key::Ones);
        let local = match &self.leaves[leaf] {
            Leaf::Packed { words, .. } => {
                let mut k = rem as u32 + 1;
                let mut base = 0usize;
                for w in words {
                    let ones = w.count_ones();
                    if ones >= k {
                        ops_count::bump(1);
                        return Some(bits_before as usize + base + select_in_word(*w, k) as usize);
                    }
                    k -= ones;
                    base += 64;
                    ops_count::bump(1);
                }
                unreachable!("select1: leaf summary out of sync")
            }
            Leaf::Run { .. } => rem as usize,
        };
        Some(bits_before as usize + local)
    }

    /// Position of the `j`-th zero (1-based `j`).
    pub fn select0(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.count_zeros() {
            return None;
        }
        let (leaf, bits_before, _, rem) = self.index.find(j as u64 - 1, Key::Zeros);
        let local = match &self.leaves[leaf] {
            Leaf::Packed { words, len } => {
                let mut k = rem as u32 + 1;
                let mut base = 0usize;
                let mut out = None;
                for (wi, w) in words.iter().enumerate() {
                    let width = (*len - wi * 64).min(64) as u32;
                    let zeros = width - (w & low_mask(width)).count_ones();
                    if zeros >= k {
                        out = Some(base + select_zero_in_word(*w, width, k) as usize);
                        break;
                    }
                    k -= zeros;
                    base += 64;
                    ops_count::bump(1);
                }
                out.expect("select0: leaf summary out of sync")
            }
            Leaf::Run { .. } => rem as usize,
        };
        Some(bits_before as usize + local)
    }

    pub fn select(&self, bit: bool, j: usize) -> Option<usize> {
        if bit {
            self.select1(j)
        } else {
            self.select0(j)
        }
    }

    /// Inserts `bit` before position `pos` (`pos == len` appends).
    ///
    /// # Panics
    /// If `pos > len`.
    pub fn insert(&mut self, pos: usize, bit: bool) {
        assert!(pos <= self.len, "insert: position {pos} out of range {}", self.len);
        if self.leaves.is_empty() {
            self.leaves.push(Leaf::Packed {
                words: vec![bit as u64],
                len: 1,
            });
            self.len = 1;
            self.ones = bit as usize;
            self.index.rebuild(&self.leaves);
            return;
        }
        let (mut leaf, mut off) = if pos == self.len {
            let last = self.leaves.len() - 1;
            (last, self.leaves[last].len())
        } else {
            let (l, o, ..) = self.locate(pos);
            (l, o)
        };
        if let Leaf::Packed { len, .. } = &self.leaves[leaf] {
            if *len >= 2 * self.leaf_bits {
                self.split_leaf(leaf);
                if off > self.leaves[leaf].len() {
                    off -= self.leaves[leaf].len();
                    leaf += 1;
                }
            }
        }
        match &mut self.leaves[leaf] {
            Leaf::Packed { words, len } => {
                insert_bit_in_words(words, *len, off, bit);
                *len += 1;
                ops_count::bump((*len / 256 + 1) as u64);
                self.index.add(leaf, 1, bit as i64);
            }
            Leaf::Run { bit: rbit, len } => {
                if *rbit == bit {
                    *len += 1;
                    self.index.add(leaf, 1, bit as i64);
                } else {
                    self.materialize_and_insert(leaf, off, bit);
                }
            }
        }
        self.len += 1;
        if bit {
            self.ones += 1;
        }
    }

    /// Removes and returns the bit at `pos`.
    ///
    /// # Panics
    /// If `pos >= len`.
    pub fn remove(&mut self, pos: usize) -> bool {
        assert!(pos < self.len, "remove: position {pos} out of range {}", self.len);
        let (leaf, off, ..) = self.locate(pos);
        let removed;
        match &mut self.leaves[leaf] {
            Leaf::Packed { words, len } => {
                removed = remove_bit_in_words(words, *len, off);
                *len -= 1;
                words.truncate((*len + 63) / 64);
                ops_count::bump((*len / 256 + 1) as u64);
                self.index.add(leaf, -1, -(removed as i64));
            }
            Leaf::Run { bit, len } => {
                removed = *bit;
                *len -= 1;
                self.index.add(leaf, -1, -(removed as i64));
            }
        }
        self.len -= 1;
        if removed {
            self.ones -= 1;
        }
        if self.leaves[leaf].len() == 0 {
            self.leaves.remove(leaf);
            self.coalesce_around(leaf);
            self.index.rebuild(&self.leaves);
        } else if let Leaf::Packed { len, .. } = &self.leaves[leaf] {
            if *len < self.leaf_bits / 2 {
                self.try_merge(leaf);
            }
        }
        removed
    }

    /// Overwrites the bit at `pos`.
    pub fn set(&mut self, pos: usize, bit: bool) {
        assert!(pos < self.len, "set: position {pos} out of range {}", self.len);
        let (leaf, off, ..) = self.locate(pos);
        match &mut self.leaves[leaf] {
            Leaf::Packed { words, .. } => {
                let mask = 1u64 << (off % 64);
                let old = words[off / 64] & mask != 0;
                if old != bit {
                    words[off / 64] ^= mask;
                    self.index.add(leaf, 0, if bit { 1 } else { -1 });
                    if bit {
                        self.ones += 1;
                    } else {
                        self.ones -= 1;
                    }
                }
            }
            Leaf::Run { bit: rbit, .. } => {
                if *rbit != bit {
                    self.remove(pos);
                    self.insert(pos, bit);
                }
            }
        }
    }

    /// Reads `width <= 64` bits starting at `pos` as a packed word.
    pub fn get_bits_at(&self, pos: usize, width: usize) -> u64 {
        assert!(width <= 64 && pos + width <= self.len);
        let mut out = 0u64;
        let mut done = 0usize;
        let (mut leaf, mut off, ..) = self.locate(pos);
        while done < width {
            let l = &self.leaves[leaf];
            let take = (l.len() - off).min(width - done);
            let chunk = match l {
                Leaf::Packed { words, .. } => bits::get_bits(words, off, take),
                Leaf::Run { bit, .. } => {
                    if *bit {
                        low_mask(take as u32)
                    } else {
                        0
                    }
                }
            };
            out |= chunk << done;
            done += take;
            off = 0;
            leaf += 1;
            ops_count::bump(1);
        }
        out
    }

    /// Copies `count` bits starting at `pos` into a packed word vector.
    pub fn extract_words(&self, pos: usize, count: usize) -> Vec<u64> {
        assert!(pos + count <= self.len);
        let mut out = vec![0u64; (count + 63) / 64];
        if count == 0 {
            return out;
        }
        let mut done = 0usize;
        let (mut leaf, mut off, ..) = self.locate(pos);
        while done < count {
            let l = &self.leaves[leaf];
            let avail = l.len() - off;
            let take = avail.min(count - done);
            match l {
                Leaf::Packed { words, .. } => {
                    let mut copied = 0usize;
                    while copied < take {
                        let w = (take - copied).min(64);
                        let chunk = bits::get_bits(words, off + copied, w);
                        bits::set_bits(&mut out, done + copied, chunk, w);
                        copied += w;
                    }
                    ops_count::bump((take / 64 + 1) as u64);
                }
                Leaf::Run { bit, .. } => {
                    if *bit {
                        let mut copied = 0usize;
                        while copied < take {
                            let w = (take - copied).min(64);
                            bits::set_bits(&mut out, done + copied, low_mask(w as u32), w);
                            copied += w;
                        }
                    }
                    ops_count::bump(1);
                }
            }
            done += take;
            off = 0;
            leaf += 1;
        }
        out
    }

    /// Inserts the low `width` bits of `val` before `pos`, lowest bit first.
    pub fn insert_bits(&mut self, pos: usize, val: u64, width: usize) {
        assert!(width <= 64 && pos <= self.len);
        if width == 0 {
            return;
        }
        // Fast path: the whole group lands in one packed leaf with room.
        if pos < self.len {
            let (leaf, off, ..) = self.locate(pos);
            match &mut self.leaves[leaf] {
                Leaf::Packed { words, len } if *len + width <= 2 * self.leaf_bits => {
                    insert_bits_in_words(words, *len, off, val, width);
                    *len += width;
                    let dones = (val & low_mask(width as u32)).count_ones() as i64;
                    self.index.add(leaf, width as i64, dones);
                    self.len += width;
                    self.ones += dones as usize;
                    ops_count::bump((*len / 256 + 1) as u64);
                    return;
                }
                Leaf::Run { bit, len } => {
                    let fill = if *bit { low_mask(width as u32) } else { 0 };
                    if val & low_mask(width as u32) == fill {
                        *len += width;
                        let dones = if *bit { width as i64 } else { 0 };
                        self.index.add(leaf, width as i64, dones);
                        self.len += width;
                        self.ones += dones as usize;
                        return;
                    }
                }
                _ => {}
            }
        }
        for i in (0..width).rev() {
            self.insert(pos, val >> i & 1 == 1);
        }
    }

    /// Removes `width` bits starting at `pos` and returns them packed,
    /// lowest position in the lowest bit.
    pub fn remove_bits(&mut self, pos: usize, width: usize) -> u64 {
        assert!(width <= 64 && pos + width <= self.len);
        if width == 0 {
            return 0;
        }
        let (leaf, off, ..) = self.locate(pos);
        if let Leaf::Packed { words, len } = &mut self.leaves[leaf] {
            if off + width <= *len {
                let val = bits::get_bits(words, off, width);
                remove_bits_in_words(words, *len, off, width);
                *len -= width;
                words.truncate((*len + 63) / 64);
                let dones = (val & low_mask(width as u32)).count_ones() as i64;
                self.index.add(leaf, -(width as i64), -dones);
                self.len -= width;
                self.ones -= dones as usize;
                ops_count::bump((*len / 256 + 1) as u64);
                if self.leaves[leaf].len() == 0 {
                    self.leaves.remove(leaf);
                    self.coalesce_around(leaf);
                    self.index.rebuild(&self.leaves);
                } else if self.leaves[leaf].len() < self.leaf_bits / 2 {
                    self.try_merge(leaf);
                }
                return val;
            }
        }
        let mut val = 0u64;
        for i in 0..width {
            val |= (self.remove(pos) as u64) << i;
        }
        val
    }

    fn split_leaf(&mut self, leaf: usize) {
        let (new_left, new_right) = match &self.leaves[leaf] {
            Leaf::Packed { words, len } => {
                let half = (*len / 2 + 63) / 64 * 64;
                let half = half.min(*len - 1);
                let left_words = words[..(half + 63) / 64].to_vec();
                let right_len = *len - half;
                let mut right_words = vec![0u64; (right_len + 63) / 64];
                for i in 0..right_words.len() {
                    let width = (right_len - i * 64).min(64);
                    right_words[i] = bits::get_bits(words, half + i * 64, width);
                }
                (
                    Leaf::Packed {
                        words: left_words,
                        len: half,
                    },
                    Leaf::Packed {
                        words: right_words,
                        len: right_len,
                    },
                )
            }
            Leaf::Run { .. } => unreachable!("split_leaf on run leaf"),
        };
        ops_count::bump((new_left.len() / 64 + new_right.len() / 64 + 2) as u64);
        self.leaves[leaf] = new_left;
        self.leaves.insert(leaf + 1, new_right);
        self.index.rebuild(&self.leaves);
    }

    fn materialize_and_insert(&mut self, leaf: usize, off: usize, bit: bool) {
        let (rbit, rlen) = match self.leaves[leaf] {
            Leaf::Run { bit, len } => (bit, len),
            _ => unreachable!(),
        };
        let w = self.leaf_bits;
        if rlen < 2 * w {
            let mut words = vec![if rbit { !0u64 } else { 0 }; (rlen + 63) / 64];
            trim_tail(&mut words, rlen);
            insert_bit_in_words(&mut words, rlen, off, bit);
            self.leaves[leaf] = Leaf::Packed {
                words,
                len: rlen + 1,
            };
            self.index.rebuild(&self.leaves);
            ops_count::bump((rlen / 64 + 1) as u64);
            return;
        }
        let win_start = if off >= w / 2 { off - w / 2 } else { 0 };
        let win_len = w.min(rlen - win_start);
        let tail = rlen - win_start - win_len;
        let mut words = vec![if rbit { !0u64 } else { 0 }; (win_len + 63) / 64];
        trim_tail(&mut words, win_len);
        insert_bit_in_words(&mut words, win_len, off - win_start, bit);
        let packed = Leaf::Packed {
            words,
            len: win_len + 1,
        };
        let mut replacement = Vec::with_capacity(3);
        if win_start > 0 {
            replacement.push(Leaf::Run {
                bit: rbit,
                len: win_start,
            });
        }
        replacement.push(packed);
        if tail > 0 {
            replacement.push(Leaf::Run {
                bit: rbit,
                len: tail,
            });
        }
        self.leaves.splice(leaf..leaf + 1, replacement);
        self.index.rebuild(&self.leaves);
        ops_count::bump((win_len / 64 + 2) as u64);
    }

    fn coalesce_around(&mut self, gap: usize) {
        if gap > 0 && gap < self.leaves.len() {
            if let (Leaf::Run { bit: b1, len: l1 }, Leaf::Run { bit: b2, len: l2 }) =
                (&self.leaves[gap - 1], &self.leaves[gap])
            {
                if b1 == b2 {
                    let merged = Leaf::Run {
                        bit: *b1,
                        len: l1 + l2,
                    };
                    self.leaves[gap - 1] = merged;
                    self.leaves.remove(gap);
                }
            }
        }
    }

    fn try_merge(&mut self, leaf: usize) {
        let my_len = self.leaves[leaf].len();
        let cap = 3 * self.leaf_bits / 2;
        let partner = if leaf + 1 < self.leaves.len()
            && matches!(self.leaves[leaf + 1], Leaf::Packed { .. })
            && self.leaves[leaf + 1].len() + my_len <= cap
        {
            Some(leaf + 1)
        } else if leaf > 0
            && matches!(self.leaves[leaf - 1], Leaf::Packed { .. })
            && self.leaves[leaf - 1].len() + my_len <= cap
        {
            Some(leaf - 1)
        } else {
            None
        };
        let Some(partner) = partner else { return };
        let (a, b) = (leaf.min(partner), leaf.max(partner));
        let (b_words, b_len) = match &self.leaves[b] {
            Leaf::Packed { words, len } => (words.clone(), *len),
            _ => unreachable!(),
        };
        if let Leaf::Packed { words, len } = &mut self.leaves[a] {
            let base = *len;
            words.resize((base + b_len + 63) / 64, 0);
            let mut copied = 0usize;
            while copied < b_len {
                let w = (b_len - copied).min(64);
                let chunk = bits::get_bits(&b_words, copied, w);
                bits::set_bits(words, base + copied, chunk, w);
                copied += w;
            }
            *len = base + b_len;
            ops_count::bump((*len / 64 + 1) as u64);
        }
        self.leaves.remove(b);
        self.index.rebuild(&self.leaves);
    }

    /// Structural audit: verifies summaries, counts and leaf size policy.
    pub fn validate(&self) -> Result<()> {
        let mut len = 0usize;
        let mut ones = 0usize;
        for (i, leaf) in self.leaves.iter().enumerate() {
            if leaf.len() == 0 {
                return Err(Error::AuditFailed(format!("empty leaf {i}")));
            }
            if let Leaf::Packed { words, len } = leaf {
                if *len > 2 * self.leaf_bits {
                    return Err(Error::AuditFailed(format!("oversized leaf {i}: {len}")));
                }
                if words.len() != (*len + 63) / 64 {
                    return Err(Error::AuditFailed(format!("leaf {i} word count mismatch")));
                }
                if *len % 64 != 0 && words[*len / 64] >> (*len % 64) != 0 {
                    return Err(Error::AuditFailed(format!("leaf {i} has stray tail bits")));
                }
            }
            len += leaf.len();
            ones += leaf.ones();
        }
        if len != self.len || ones != self.ones {
            return Err(Error::AuditFailed(format!(
                "totals mismatch: stored ({}, {}), actual ({len}, {ones})",
                self.len, self.ones
            )));
        }
        for pair in self.leaves.windows(2) {
            if let (Leaf::Run { bit: a, .. }, Leaf::Run { bit: b, .. }) = (&pair[0], &pair[1]) {
                if a == b {
                    return Err(Error::AuditFailed("adjacent equal runs not coalesced".into()));
                }
            }
            if let (Leaf::Packed { len: a, .. }, Leaf::Packed { len: b, .. }) = (&pair[0], &pair[1]) {
                if a + b < self.leaf_bits {
                    return Err(Error::AuditFailed(
                        "adjacent packed leaves below merge threshold".into(),
                    ));
                }
            }
        }
        let (b, o) = self.index.prefix(self.leaves.len());
        if b != self.len as u64 || o != self.ones as u64 {
            return Err(Error::AuditFailed("leaf index out of sync".into()));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.leaves.iter().flat_map(|leaf| {
            let len = leaf.len();
            (0..len).map(move |i| match leaf {
                Leaf::Packed { words, .. } => words[i / 64] >> (i % 64) & 1 == 1,
                Leaf::Run { bit, .. } => *bit,
            })
        })
    }

    /// Serializes to the `SDSB` wire format: magic, version byte, bit length,
    /// one count, then leaf payloads in order. Each leaf is a tag byte
    /// (0 packed, 1 zero run, 2 one run), an LEB128 bit length and, for
    /// packed leaves, little-endian content words.
    pub fn serialize(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"SDSB");
        out.push(1);
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend_from_slice(&(self.ones as u64).to_le_bytes());
        for leaf in &self.leaves {
            match leaf {
                Leaf::Packed { words, len } => {
                    out.push(0);
                    write_varint(out, *len as u64);
                    for w in &words[..(*len + 63) / 64] {
                        out.extend_from_slice(&w.to_le_bytes());
                    }
                }
                Leaf::Run { bit, len } => {
                    out.push(if *bit { 2 } else { 1 });
                    write_varint(out, *len as u64);
                }
            }
        }
    }

    /// Reads back an `SDSB` payload, re-chunking to the local leaf size.
    pub fn deserialize(data: &[u8]) -> Result<(Self, usize)> {
        let corrupt = |msg: &str| Error::Corrupt(format!("SDSB: {msg}"));
        if data.len() < 21 || &data[..4] != b"SDSB" {
            return Err(corrupt("bad magic"));
        }
        if data[4] != 1 {
            return Err(corrupt("unsupported version"));
        }
        let len = u64::from_le_bytes(data[5..13].try_into().unwrap()) as usize;
        let ones = u64::from_le_bytes(data[13..21].try_into().unwrap()) as usize;
        let mut v = DynBitVec::new();
        let mut pos = 21usize;
        let mut seen = 0usize;
        while seen < len {
            if pos >= data.len() {
                return Err(corrupt("truncated leaf stream"));
            }
            let tag = data[pos];
            pos += 1;
            let (llen, used) = read_varint(&data[pos..]).ok_or_else(|| corrupt("bad varint"))?;
            pos += used;
            let llen = llen as usize;
            if llen == 0 || seen + llen > len {
                return Err(corrupt("leaf length out of bounds"));
            }
            match tag {
                0 => {
                    let nwords = (llen + 63) / 64;
                    if pos + nwords * 8 > data.len() {
                        return Err(corrupt("truncated packed leaf"));
                    }
                    let mut words = Vec::with_capacity(nwords);
                    for i in 0..nwords {
                        words.push(u64::from_le_bytes(
                            data[pos + i * 8..pos + i * 8 + 8].try_into().unwrap(),
                        ));
                    }
                    pos += nwords * 8;
                    trim_tail(&mut words, llen);
                    v.append_words(&words, llen);
                }
                1 => v.push_run(false, llen),
                2 => v.push_run(true, llen),
                _ => return Err(corrupt("unknown leaf tag")),
            }
            seen += llen;
        }
        if v.len != len || v.ones != ones {
            return Err(corrupt("content does not match header counts"));
        }
        Ok((v, pos))
    }

    /// Size of the serialized form in bits.
    pub fn serialized_bits(&self) -> usize {
        let mut bytes = 21usize;
        for leaf in &self.leaves {
            bytes += 1 + varint_len(leaf.len() as u64);
            if let Leaf::Packed { len, .. } = leaf {
                bytes += (len + 63) / 64 * 8;
            }
        }
        bytes * 8
    }
}

fn low_mask(width: u32) -> u64 {
    if width >= 64 {
        !0
    } else {
        (1u64 << width) - 1
    }
}

fn trim_tail(words: &mut [u64], len: usize) {
    if len % 64 != 0 {
        let last = len / 64;
        words[last] &= (1u64 << (len % 64)) - 1;
    }
}

fn insert_bit_in_words(words: &mut Vec<u64>, len: usize, off: usize, bit: bool) {
    insert_bits_in_words(words, len, off, bit as u64, 1);
}

fn insert_bits_in_words(words: &mut Vec<u64>, len: usize, off: usize, val: u64, width: usize) {
    debug_assert!(off <= len && width <= 64);
    let new_len = len + width;
    words.resize((new_len + 63) / 64, 0);
    // Shift everything at and after `off` up by `width`, moving whole words
    // from the top down.
    let mut src = len;
    while src > off {
        let chunk = (src - off).min(64);
        src -= chunk;
        let w = bits::get_bits(words, src, chunk);
        bits::set_bits(words, src + width, w, chunk);
    }
    bits::set_bits(words, off, val, width);
    trim_tail(words, new_len);
}

fn remove_bit_in_words(words: &mut [u64], len: usize, off: usize) -> bool {
    let bit = words[off / 64] >> (off % 64) & 1 == 1;
    remove_bits_in_words(words, len, off, 1);
    bit
}

fn remove_bits_in_words(words: &mut [u64], len: usize, off: usize, width: usize) {
    debug_assert!(off + width <= len);
    let mut dst = off;
    while dst + width < len {
        let chunk = (len - width - dst).min(64);
        let w = bits::get_bits(words, dst + width, chunk);
        bits::set_bits(words, dst, w, chunk);
        dst += chunk;
    }
    trim_tail(words, len - width);
}

pub(crate) fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub(crate) fn varint_len(v: u64) -> usize {
    (64 - v.max(1).leading_zeros() as usize).div_ceil(7).max(1)
}

fn read_varint(data: &[u8]) -> Option<(u64, usize)> {
    let mut v = 0u64;
    let mut shift = 0u32;
    for (i, &byte) in data.iter().enumerate() {
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Some((v, i + 1));
        }
        shift += 7;
        if shift >= 64 {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_eq(v: &DynBitVec, bits: &[bool]) {
        assert_eq!(v.len(), bits.len());
        let mut ones = 0usize;
        for (i, &b) in bits.iter().enumerate() {
            assert_eq!(v.get(i), b, "bit {i}");
            assert_eq!(v.rank1(i), ones, "rank1 {i}");
            if b {
                ones += 1;
                assert_eq!(v.select1(ones), Some(i), "select1 {ones}");
            }
        }
        assert_eq!(v.rank1(bits.len()), ones);
        assert_eq!(v.count_ones(), ones);
        v.validate().unwrap();
    }

    #[test]
    fn empty_sequence() {
        let v = DynBitVec::new();
        assert_eq!(v.len(), 0);
        assert_eq!(v.rank1(0), 0);
        assert_eq!(v.rank0(0), 0);
        assert_eq!(v.select1(1), None);
        assert_eq!(v.select0(1), None);
        v.validate().unwrap();
    }

    #[test]
    fn all_ones_select_is_identity() {
        let n = 10_000;
        let mut v = DynBitVec::with_leaf_bits(256);
        for i in 0..n {
            v.insert(i, true);
        }
        for j in 1..=n {
            assert_eq!(v.select1(j), Some(j - 1));
        }
        assert_eq!(v.rank1(n), n);
        v.validate().unwrap();
    }

    #[test]
    fn alternating_ranks_agree() {
        let n = 1 << 16;
        let v = DynBitVec::from_bools((0..n).map(|i| i % 2 == 1));
        for i in (0..=n).step_by(997) {
            let i = i / 2 * 2;
            assert_eq!(v.rank0(i), v.rank1(i), "even prefix {i}");
        }
    }

    #[test]
    fn rank_select_identities() {
        let v = DynBitVec::from_bools((0..5000).map(|i| i % 7 == 0 || i % 5 == 2));
        for j in 1..=v.count_ones() {
            let p = v.select1(j).unwrap();
            assert!(v.get(p));
            assert_eq!(v.rank1(p), j - 1);
            assert_eq!(v.rank1(p + 1), j);
        }
        for j in 1..=v.count_zeros() {
            let p = v.select0(j).unwrap();
            assert!(!v.get(p));
            assert_eq!(v.rank0(p + 1), j);
        }
    }

    #[test]
    fn zeros_is_constant_size_until_touched() {
        let v = DynBitVec::zeros(1_000_000);
        assert_eq!(v.len(), 1_000_000);
        assert_eq!(v.leaf_count(), 1);
        assert_eq!(v.rank0(1_000_000), 1_000_000);
        assert_eq!(v.select0(123_456), Some(123_455));
        assert_eq!(v.select1(1), None);

        let mut v = v;
        v.insert(500_000, true);
        v.insert(0, true);
        v.set(999, true);
        assert!(v.leaf_count() <= 7);
        assert_eq!(v.count_ones(), 3);
        assert_eq!(v.select1(2), Some(999));
        v.validate().unwrap();
    }

    #[test]
    fn churn_against_reference() {
        let mut v = DynBitVec::with_leaf_bits(128);
        let mut reference: Vec<bool> = Vec::new();
        let mut state = 0x2545f4914f6cdd1du64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for step in 0..20_000 {
            let r = rng();
            let len = reference.len();
            if len == 0 || r % 3 != 0 {
                let pos = (r >> 8) as usize % (len + 1);
                let bit = r >> 40 & 1 == 1;
                v.insert(pos, bit);
                reference.insert(pos, bit);
            } else if r % 6 == 3 && len > 0 {
                let pos = (r >> 8) as usize % len;
                let bit = r >> 40 & 1 == 1;
                v.set(pos, bit);
                reference[pos] = bit;
            } else {
                let pos = (r >> 8) as usize % len;
                assert_eq!(v.remove(pos), reference.remove(pos));
            }
            if step % 4000 == 0 {
                naive_eq(&v, &reference);
            }
        }
        naive_eq(&v, &reference);
    }

    #[test]
    fn bit_group_ops() {
        let mut v = DynBitVec::with_leaf_bits(128);
        let mut reference: Vec<bool> = Vec::new();
        let mut state = 99u64;
        for _ in 0..3000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let pos = (state >> 33) as usize % (reference.len() + 1);
            let width = (state >> 20) as usize % 11 + 1;
            let val = state & ((1 << width) - 1);
            v.insert_bits(pos, val, width);
            for i in 0..width {
                reference.insert(pos + i, val >> i & 1 == 1);
            }
            assert_eq!(v.get_bits_at(pos, width), val);
        }
        assert_eq!(v.len(), reference.len());
        for (i, &b) in reference.iter().enumerate() {
            assert_eq!(v.get(i), b);
        }
        let mut state = 7u64;
        while !reference.is_empty() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let width = ((state >> 20) as usize % 9 + 1).min(reference.len());
            let pos = (state >> 33) as usize % (reference.len() - width + 1);
            let mut expect = 0u64;
            for j in 0..width {
                expect |= (reference.remove(pos) as u64) << j;
            }
            let got = v.remove_bits(pos, width);
            assert_eq!(got, expect);
        }
        assert_eq!(v.len(), 0);
    }

    #[test]
    fn extract_words_matches_iter() {
        let v = DynBitVec::from_bools((0..3000).map(|i| i % 3 == 0));
        let words = v.extract_words(100, 1000);
        for i in 0..1000 {
            let expect = (100 + i) % 3 == 0;
            assert_eq!(words[i / 64] >> (i % 64) & 1 == 1, expect);
        }
    }

    #[test]
    fn serialize_roundtrip() {
        let mut v = DynBitVec::with_leaf_bits(128);
        for i in 0..5000 {
            v.insert(i / 2, i % 3 == 0);
        }
        let mut bytes = Vec::new();
        v.serialize(&mut bytes);
        let (back, used) = DynBitVec::deserialize(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back.len(), v.len());
        assert!(v.iter().eq(back.iter()));
        back.validate().unwrap();

        let sparse = DynBitVec::zeros(1 << 20);
        let mut bytes = Vec::new();
        sparse.serialize(&mut bytes);
        assert!(bytes.len() < 64, "sparse payload should stay tiny: {}", bytes.len());
        let (back, _) = DynBitVec::deserialize(&bytes).unwrap();
        assert_eq!(back.len(), 1 << 20);
        assert_eq!(back.count_ones(), 0);
    }

    #[test]
    fn deserialize_rejects_garbage() {
        assert!(DynBitVec::deserialize(b"XXXX").is_err());
        let mut bytes = Vec::new();
        DynBitVec::from_bools([true, false, true]).serialize(&mut bytes);
        let n = bytes.len();
        bytes.truncate(n - 1);
        assert!(DynBitVec::deserialize(&bytes).is_err());
    }
}
