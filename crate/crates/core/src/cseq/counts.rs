//! Per-section tallies: how many symbols, and how many of each symbol, each
//! subsequence of the compressed sequence holds.
//!
//! Two interchangeable representations exist for the per-symbol table. The
//! plain one keeps a prefix-sum tree per symbol, which is compact while the
//! alphabet is small. For very large alphabets (`sigma > n / log2(n)^3`) the
//! sigma trees would dominate space, so each symbol's row collapses to a
//! unary-coded bit sequence `1^c_1 0 1^c_2 0 ... 1^c_r 0` whose total size is
//! bounded by the occurrence count instead of `sigma * r` words. Both modes
//! are always compiled and cross-checked by tests.

use crate::bitvec::DynBitVec;
use crate::ops_count;

/// Binary-indexed prefix-sum tree over a fixed number of slots.
#[derive(Debug, Clone)]
pub struct Fenwick {
    n: usize,
    t: Vec<u64>,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Fenwick {
            n,
            t: vec![0u64; n + 1],
        }
    }

    pub fn from_values(vals: &[u64]) -> Self {
        let mut f = Fenwick::new(vals.len());
        for (i, &v) in vals.iter().enumerate() {
            f.add(i, v as i64);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds `delta` to slot `i` (0-based).
    pub fn add(&mut self, i: usize, delta: i64) {
        let mut i = i + 1;
        while i <= self.n {
            ops_count::bump(1);
            self.t[i] = (self.t[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of slots `[0, i)`.
    pub fn prefix(&self, i: usize) -> u64 {
        let mut i = i.min(self.n);
        let mut acc = 0u64;
        while i > 0 {
            ops_count::bump(1);
            acc += self.t[i];
            i &= i - 1;
        }
        acc
    }

    pub fn get(&self, i: usize) -> u64 {
        self.prefix(i + 1) - self.prefix(i)
    }

    pub fn set(&mut self, i: usize, v: u64) {
        let cur = self.get(i) as i64;
        self.add(i, v as i64 - cur);
    }

    pub fn total(&self) -> u64 {
        self.prefix(self.n)
    }

    /// Slot holding the `j`-th item (1-based `j`): the largest `t` with
    /// `prefix(t) < j`. Returns `(slot, prefix_before_slot)`; if `j` exceeds
    /// the total, returns `(n, total)`.
    pub fn find_by_cum(&self, j: u64) -> (usize, u64) {
        debug_assert!(j >= 1);
        let mut pos = 0usize;
        let mut acc = 0u64;
        let mut step = self.n.next_power_of_two();
        while step > 0 {
            ops_count::bump(1);
            let next = pos + step;
            if next <= self.n && acc + self.t[next] <= j - 1 {
                pos = next;
                acc += self.t[next];
            }
            step >>= 1;
        }
        (pos, acc)
    }
}

/// Per-symbol per-section occurrence table in one of the two modes.
#[derive(Debug, Clone)]
pub enum SectionCounts {
    Plain { rows: Vec<Fenwick> },
    Unary { r: usize, rows: Vec<DynBitVec> },
}

impl SectionCounts {
    pub fn new(sigma: usize, r: usize, unary: bool) -> Self {
        if unary {
            SectionCounts::Unary {
                r,
                rows: (0..sigma).map(|_| DynBitVec::zeros(r)).collect(),
            }
        } else {
            SectionCounts::Plain {
                rows: (0..sigma).map(|_| Fenwick::new(r)).collect(),
            }
        }
    }

    pub fn is_unary(&self) -> bool {
        matches!(self, SectionCounts::Unary { .. })
    }

    pub fn sections(&self) -> usize {
        match self {
            SectionCounts::Plain { rows } => rows.first().map_or(0, |f| f.len()),
            SectionCounts::Unary { r, .. } => *r,
        }
    }

    /// Occurrences of `a` in sections `[0, t)`.
    pub fn prefix(&self, a: u32, t: usize) -> u64 {
        match self {
            SectionCounts::Plain { rows } => rows[a as usize].prefix(t),
            SectionCounts::Unary { rows, .. } => {
                if t == 0 {
                    return 0;
                }
                let row = &rows[a as usize];
                let pos = row.select0(t).expect("separator missing");
                (pos - (t - 1)) as u64
            }
        }
    }

    pub fn get(&self, a: u32, t: usize) -> u64 {
        self.prefix(a, t + 1) - self.prefix(a, t)
    }

    pub fn total(&self, a: u32) -> u64 {
        match self {
            SectionCounts::Plain { rows } => rows[a as usize].total(),
            SectionCounts::Unary { rows, .. } => rows[a as usize].count_ones() as u64,
        }
    }

    /// Sets section `t`'s count of `a` to `v`.
    pub fn set(&mut self, a: u32, t: usize, v: u64) {
        match self {
            SectionCounts::Plain { rows } => rows[a as usize].set(t, v),
            SectionCounts::Unary { rows, .. } => {
                let row = &mut rows[a as usize];
                let start = if t == 0 {
                    0
                } else {
                    row.select0(t).expect("separator missing") + 1
                };
                let end = row.select0(t + 1).expect("separator missing");
                let old = (end - start) as u64;
                if v > old {
                    let mut todo = (v - old) as usize;
                    while todo > 0 {
                        let w = todo.min(64);
                        row.insert_bits(start, u64::MAX >> (64 - w), w);
                        todo -= w;
                    }
                } else if v < old {
                    let mut todo = (old - v) as usize;
                    while todo > 0 {
                        let w = todo.min(64);
                        row.remove_bits(start, w);
                        todo -= w;
                    }
                }
            }
        }
    }

    pub fn add(&mut self, a: u32, t: usize, delta: i64) {
        match self {
            SectionCounts::Plain { rows } => rows[a as usize].add(t, delta),
            _ => {
                let cur = self.get(a, t) as i64;
                self.set(a, t, (cur + delta) as u64);
            }
        }
    }

    /// Section holding the `j`-th occurrence of `a` (1-based `j`):
    /// `(section, occurrences_before_section)`.
    pub fn find_by_cum(&self, a: u32, j: u64) -> (usize, u64) {
        match self {
            SectionCounts::Plain { rows } => rows[a as usize].find_by_cum(j),
            SectionCounts::Unary { rows, .. } => {
                let row = &rows[a as usize];
                let pos = row.select1(j as usize).expect("occurrence missing");
                let t = row.rank0(pos);
                let before = if t == 0 {
                    0
                } else {
                    let sep = row.select0(t).expect("separator missing");
                    (sep - (t - 1)) as u64
                };
                (t, before)
            }
        }
    }

    /// Bits of storage used, for space reports.
    pub fn bits_used(&self) -> u64 {
        match self {
            SectionCounts::Plain { rows } => rows
                .iter()
                .map(|f| (f.t.len() as u64) * 64)
                .sum(),
            SectionCounts::Unary { rows, .. } => {
                rows.iter().map(|r| r.len() as u64).sum()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenwick_basics() {
        let mut f = Fenwick::new(10);
        for i in 0..10 {
            f.add(i, (i as i64) + 1);
        }
        assert_eq!(f.total(), 55);
        assert_eq!(f.prefix(0), 0);
        assert_eq!(f.prefix(3), 6);
        assert_eq!(f.get(4), 5);
        f.set(4, 0);
        assert_eq!(f.get(4), 0);
        assert_eq!(f.total(), 50);
        f.add(4, 2);
        assert_eq!(f.get(4), 2);
    }

    #[test]
    fn fenwick_find_by_cum() {
        let f = Fenwick::from_values(&[3, 0, 2, 5]);
        assert_eq!(f.find_by_cum(1), (0, 0));
        assert_eq!(f.find_by_cum(3), (0, 0));
        assert_eq!(f.find_by_cum(4), (2, 3));
        assert_eq!(f.find_by_cum(5), (2, 3));
        assert_eq!(f.find_by_cum(6), (3, 5));
        assert_eq!(f.find_by_cum(10), (3, 5));
        assert_eq!(f.find_by_cum(11), (4, 10));
    }

    #[test]
    fn modes_agree_under_random_updates() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sigma = 5usize;
        let r = 6usize;
        let mut plain = SectionCounts::new(sigma, r, false);
        let mut unary = SectionCounts::new(sigma, r, true);
        let mut shadow = vec![vec![0u64; r]; sigma];
        for _ in 0..2000 {
            let a = rng.gen_range(0..sigma) as u32;
            let t = rng.gen_range(0..r);
            match rng.gen_range(0..3) {
                0 => {
                    let v = rng.gen_range(0..50u64);
                    plain.set(a, t, v);
                    unary.set(a, t, v);
                    shadow[a as usize][t] = v;
                }
                1 => {
                    let cur = shadow[a as usize][t];
                    let d = rng.gen_range(-(cur.min(5) as i64)..=5);
                    plain.add(a, t, d);
                    unary.add(a, t, d);
                    shadow[a as usize][t] = (cur as i64 + d) as u64;
                }
                _ => {
                    for tt in 0..=r {
                        assert_eq!(plain.prefix(a, tt), unary.prefix(a, tt));
                    }
                    let tot = plain.total(a);
                    assert_eq!(tot, unary.total(a));
                    assert_eq!(
                        tot,
                        shadow[a as usize].iter().sum::<u64>()
                    );
                    for j in 1..=tot {
                        assert_eq!(
                            plain.find_by_cum(a, j),
                            unary.find_by_cum(a, j)
                        );
                    }
                }
            }
        }
    }
}
