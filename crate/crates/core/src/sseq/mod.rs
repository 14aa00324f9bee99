//! Immutable entropy-compressed sequence with rank, select, access, partial
//! rank, and fast substring extraction.
//!
//! The sequence is stored in two complementary forms:
//!
//! * **Coded stream** — symbols are grouped into meta-symbols of `ell`
//!   symbols each and compressed with a canonical prefix code built from the
//!   observed meta-symbol frequencies (a reserved escape codeword covers
//!   values outside the table). Decode entry points are sampled every
//!   `decode_stride` meta-symbols. Access and extraction run here;
//!   extraction decodes sequentially and is far cheaper per symbol than
//!   repeated single accesses.
//! * **Block indexes** — the sequence is cut into blocks of `sigma`
//!   positions. Each block stores its stable-sort machinery: occurrence
//!   positions sampled at rate `t` per symbol, rank remainders modulo `t`,
//!   and marked permutation cycles carrying `pi^{-t}` values so the inverse
//!   permutation can be recovered with at most about `2t` forward steps.
//!   A per-block count vector and per-symbol block-count bit sequences link
//!   blocks together. At the default sampling rate `t = 1` the machinery
//!   degenerates to the full stable-sort position table, and rank/select
//!   never touch the coded stream.
//!
//! Construction is a resumable pipeline ([`StaticSeqBuilder`]) so background
//! maintenance can build sections incrementally; [`StaticSeq::build`] drives
//! the same pipeline to completion in one call and runs in time linear in
//! the input length.

mod huff;
mod sbits;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::mem;

use crate::bits::BitBuf;
use crate::config::{log2_ceil, CoreConfig};
use crate::error::{Error, Result};
use crate::ops_count;
use huff::HuffCode;
use sbits::StaticBits;

/// Meta-symbol width: smallest `l` with `sigma^(2l) >= n`, clamped so a
/// packed meta-symbol fits in a 64-bit word.
fn meta_len(n: usize, sigma: usize, w_sym: usize) -> usize {
    if sigma <= 1 {
        return 1;
    }
    let s2 = (sigma as u128) * (sigma as u128);
    let mut p: u128 = 1;
    let mut l = 0usize;
    while p < n as u128 && l < 64 {
        p = p.saturating_mul(s2);
        l += 1;
    }
    l.clamp(1, (64 / w_sym.max(1)).max(1))
}

/// In-block sampling rate: `log2(sigma) / (log2 log2 sigma)^3` floored and
/// clamped to `[1, 64]`. Alphabets below `sqrt(log2 n)` use rate 1 directly:
/// the asymptotic formula is meaningless there and the full position table
/// is tiny anyway.
fn t_value(n: usize, sigma: usize, cfg: &CoreConfig) -> usize {
    if let Some(t) = cfg.static_t_override {
        return t.clamp(1, 64);
    }
    let lgn = (n.max(2) as f64).log2();
    if (sigma as f64) < lgn.sqrt() || sigma <= 2 {
        return 1;
    }
    let lg = (sigma as f64).log2();
    let lglg = lg.log2();
    if lglg <= 0.0 {
        return 1;
    }
    ((lg / (lglg * lglg * lglg)).floor() as usize).clamp(1, 64)
}

fn push_run(buf: &mut BitBuf, bit: bool, len: usize) {
    let word = if bit { u64::MAX } else { 0 };
    let mut rem = len;
    while rem >= 64 {
        buf.push_bits(word, 64);
        rem -= 64;
    }
    if rem > 0 {
        buf.push_bits(word, rem);
    }
}

/// Alphabet remap: a bit per universe symbol, with dense codes assigned to
/// the set symbols in increasing order.
#[derive(Debug, Clone)]
struct SymMap {
    bits: Vec<u64>,
    universe: usize,
    dense_to_univ: Vec<u32>,
    univ_to_dense: Vec<u32>,
}

impl SymMap {
    fn from_words(bits: Vec<u64>, universe: usize) -> Result<SymMap> {
        if bits.len() != (universe + 63) / 64 {
            return Err(Error::Corrupt("alphabet map length mismatch".into()));
        }
        let mut dense_to_univ = Vec::new();
        let mut univ_to_dense = vec![u32::MAX; universe];
        for u in 0..universe {
            if bits[u / 64] >> (u % 64) & 1 == 1 {
                univ_to_dense[u] = dense_to_univ.len() as u32;
                dense_to_univ.push(u as u32);
            }
        }
        Ok(SymMap {
            bits,
            universe,
            dense_to_univ,
            univ_to_dense,
        })
    }

    fn from_bools(map: &[bool]) -> SymMap {
        let mut bits = vec![0u64; (map.len() + 63) / 64];
        for (u, &m) in map.iter().enumerate() {
            if m {
                bits[u / 64] |= 1u64 << (u % 64);
            }
        }
        SymMap::from_words(bits, map.len()).unwrap()
    }
}

/// Extra in-block machinery used when the sampling rate `t` is at least 2.
#[derive(Debug, Clone, Default)]
struct TAux {
    /// Every t-th occurrence position, grouped by (block, symbol).
    f_pos: BitBuf,
    /// Cumulative `f_pos` entries at each block boundary (`nb + 1` entries).
    f_block_off: Vec<u64>,
    /// Within-block prefix entry counts, `nb * (sigma + 1)` entries.
    f_sym_off: Vec<u32>,
    /// Per-position rank remainder modulo `t`, `rw` bits each.
    r: BitBuf,
    /// Marked cycle positions per block, sorted, `w_pos` bits each.
    mark_pos: BitBuf,
    /// `pi^{-t}` of each marked position, parallel to `mark_pos`.
    mark_inv: BitBuf,
    /// Cumulative mark counts at each block boundary (`nb + 1` entries).
    mark_block_off: Vec<u64>,
}

/// Immutable entropy-compressed sequence.
#[derive(Debug, Clone)]
pub struct StaticSeq {
    n: usize,
    /// Alphabet size seen by callers (the remap universe when present).
    universe: usize,
    /// Dense alphabet size used internally.
    sigma: usize,
    map: Option<SymMap>,
    ell: usize,
    t: usize,
    w_sym: usize,
    w_pos: usize,
    rw: usize,
    stride: usize,
    // Coded stream.
    m_full: usize,
    code: Option<HuffCode>,
    stream: BitBuf,
    offsets: Vec<u64>,
    tail: Vec<u32>,
    // Block indexes.
    nb: usize,
    vcat: StaticBits,
    bseq: Vec<StaticBits>,
    counts: Vec<u64>,
    /// Sampling rate 1: all occurrence positions by (block, symbol), which
    /// is exactly the inverse stable-sort permutation of each block.
    f_flat: BitBuf,
    taux: Option<TAux>,
}

/// Size breakdown of a [`StaticSeq`], in bits of serialized payload.
#[derive(Debug, Clone)]
pub struct StaticStats {
    pub n: usize,
    pub sigma: usize,
    pub universe: usize,
    pub ell: usize,
    pub t: usize,
    pub meta_count: usize,
    pub distinct_metas: usize,
    /// Bits of the entropy-coded meta-symbol stream alone.
    pub coded_meta_bits: usize,
    pub table_bits: usize,
    pub offsets_bits: usize,
    /// Count vectors: concatenated per-block counts plus per-symbol
    /// block-count sequences.
    pub block_bits: usize,
    /// Permutation machinery: position samples, rank remainders, cycle marks.
    pub perm_bits: usize,
    /// Total serialized size in bits.
    pub total_bits: usize,
}

struct BitReader<'a> {
    buf: &'a BitBuf,
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn next(&mut self) -> bool {
        if self.pos < self.buf.len() {
            let b = self.buf.get(self.pos);
            self.pos += 1;
            b
        } else {
            // Ran off the end of a corrupt stream; produce zeros and let the
            // caller's comparisons fail.
            self.pos += 1;
            false
        }
    }

    fn read(&mut self, width: usize) -> u64 {
        if self.pos + width <= self.buf.len() {
            let v = self.buf.get_bits(self.pos, width);
            self.pos += width;
            v
        } else {
            self.pos += width;
            0
        }
    }
}

enum Stage {
    Blocks { next: usize },
    MetaCount { next: usize },
    CodeBuild,
    Encode { next: usize },
    Finish,
    Done,
}

/// Resumable construction pipeline for [`StaticSeq`].
///
/// `step(budget)` performs roughly `budget` units of work (one unit per
/// input symbol touched) and returns true once the sequence is complete;
/// `finish` drives the pipeline to completion and returns the sequence.
pub struct StaticSeqBuilder {
    syms: Vec<u32>,
    n: usize,
    universe: usize,
    sigma: usize,
    map: Option<SymMap>,
    ell: usize,
    t: usize,
    w_sym: usize,
    w_pos: usize,
    rw: usize,
    stride: usize,
    nb: usize,
    m_full: usize,
    stage: Stage,
    // Block accumulation.
    vcat_buf: BitBuf,
    b_bufs: Vec<BitBuf>,
    counts: Vec<u64>,
    f_flat: BitBuf,
    taux: TAux,
    // Per-block scratch.
    blk_cnt: Vec<u32>,
    blk_off: Vec<u32>,
    cur: Vec<u32>,
    sorted_pos: Vec<u32>,
    pi_fwd: Vec<u32>,
    visited: Vec<bool>,
    cycle: Vec<u32>,
    marks: Vec<(u32, u32)>,
    // Meta coding.
    freq: HashMap<u64, u64>,
    code: Option<HuffCode>,
    stream: BitBuf,
    offsets: Vec<u64>,
    built: Option<StaticSeq>,
}

impl StaticSeqBuilder {
    /// Starts a build over the plain alphabet `[0, sigma)`.
    pub fn new(symbols: &[u32], sigma: usize, cfg: &CoreConfig) -> Result<StaticSeqBuilder> {
        assert!(sigma >= 1, "alphabet size must be at least 1");
        for &s in symbols {
            if s as usize >= sigma {
                return Err(Error::SymbolOutOfRange {
                    sym: s as u64,
                    sigma: sigma as u64,
                });
            }
        }
        Ok(Self::init(symbols.to_vec(), sigma, sigma, None, cfg))
    }

    /// Starts a build over a mapped alphabet: `map[s]` says whether universe
    /// symbol `s` may occur. Queries speak universe symbols; storage uses
    /// the dense effective alphabet.
    pub fn new_with_map(
        symbols: &[u32],
        map: &[bool],
        cfg: &CoreConfig,
    ) -> Result<StaticSeqBuilder> {
        let universe = map.len();
        let sym_map = SymMap::from_bools(map);
        let mut dense = Vec::with_capacity(symbols.len());
        for &s in symbols {
            let d = if (s as usize) < universe {
                sym_map.univ_to_dense[s as usize]
            } else {
                u32::MAX
            };
            if d == u32::MAX {
                return Err(Error::SymbolOutOfRange {
                    sym: s as u64,
                    sigma: universe as u64,
                });
            }
            dense.push(d);
        }
        let sigma = sym_map.dense_to_univ.len().max(1);
        Ok(Self::init(dense, universe, sigma, Some(sym_map), cfg))
    }

    fn init(
        syms: Vec<u32>,
        universe: usize,
        sigma: usize,
        map: Option<SymMap>,
        cfg: &CoreConfig,
    ) -> StaticSeqBuilder {
        let n = syms.len();
        let w_sym = if sigma <= 1 { 0 } else { log2_ceil(sigma) };
        let w_pos = w_sym;
        let ell = meta_len(n, sigma, w_sym);
        let t = t_value(n, sigma, cfg);
        let rw = if t >= 2 { log2_ceil(t) } else { 0 };
        let stride = cfg.decode_stride.max(1);
        let nb = if sigma <= 1 || n == 0 {
            0
        } else {
            (n + sigma - 1) / sigma
        };
        let m_full = if sigma <= 1 { 0 } else { n / ell };
        let stage = if sigma <= 1 {
            Stage::Finish
        } else {
            Stage::Blocks { next: 0 }
        };
        StaticSeqBuilder {
            syms,
            n,
            universe,
            sigma,
            map,
            ell,
            t,
            w_sym,
            w_pos,
            rw,
            stride,
            nb,
            m_full,
            stage,
            vcat_buf: BitBuf::new(),
            b_bufs: vec![BitBuf::new(); if sigma <= 1 { 0 } else { sigma }],
            counts: vec![0; if sigma <= 1 { 0 } else { sigma }],
            f_flat: BitBuf::new(),
            taux: TAux {
                f_block_off: vec![0],
                mark_block_off: vec![0],
                ..TAux::default()
            },
            blk_cnt: vec![0; sigma],
            blk_off: vec![0; sigma + 1],
            cur: vec![0; sigma],
            sorted_pos: vec![0; sigma],
            pi_fwd: vec![0; sigma],
            visited: vec![false; sigma],
            cycle: Vec::new(),
            marks: Vec::new(),
            freq: HashMap::new(),
            code: None,
            stream: BitBuf::new(),
            offsets: Vec::new(),
            built: None,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self.stage, Stage::Done)
    }

    /// Advances the pipeline by about `budget` work units (at least one
    /// item). Returns true once construction is complete.
    pub fn step(&mut self, budget: u64) -> bool {
        let mut left = budget.max(1);
        loop {
            match self.stage {
                Stage::Blocks { next } => {
                    if next >= self.nb {
                        self.stage = Stage::MetaCount { next: 0 };
                        continue;
                    }
                    let sz = self.process_block(next) as u64;
                    ops_count::bump(sz);
                    self.stage = Stage::Blocks { next: next + 1 };
                    left = left.saturating_sub(sz);
                    if left == 0 {
                        return false;
                    }
                }
                Stage::MetaCount { next } => {
                    if next >= self.m_full {
                        self.stage = Stage::CodeBuild;
                        continue;
                    }
                    let per = (left as usize / self.ell).max(1);
                    let end = (next + per).min(self.m_full);
                    for m in next..end {
                        let v = self.pack_meta(m);
                        *self.freq.entry(v).or_insert(0) += 1;
                    }
                    let cost = ((end - next) * self.ell) as u64;
                    ops_count::bump(cost);
                    self.stage = Stage::MetaCount { next: end };
                    left = left.saturating_sub(cost);
                    if left == 0 {
                        return false;
                    }
                }
                Stage::CodeBuild => {
                    if self.m_full > 0 {
                        let freqs: Vec<(u64, u64)> = self.freq.drain().collect();
                        let cost = freqs.len().max(1) as u64;
                        self.code = Some(HuffCode::build(&freqs));
                        ops_count::bump(cost);
                        left = left.saturating_sub(cost);
                    }
                    self.stage = Stage::Encode { next: 0 };
                    if left == 0 {
                        return false;
                    }
                }
                Stage::Encode { next } => {
                    if next >= self.m_full {
                        self.stage = Stage::Finish;
                        continue;
                    }
                    let per = (left as usize / self.ell).max(1);
                    let end = (next + per).min(self.m_full);
                    let code = self.code.take().unwrap();
                    for m in next..end {
                        if m % self.stride == 0 {
                            self.offsets.push(self.stream.len() as u64);
                        }
                        let v = pack_meta_from(&self.syms, m, self.ell, self.w_sym);
                        if !code.encode_into(&mut self.stream, v) {
                            self.stream.push_bits(v, self.ell * self.w_sym);
                        }
                    }
                    self.code = Some(code);
                    let cost = ((end - next) * self.ell) as u64;
                    ops_count::bump(cost);
                    self.stage = Stage::Encode { next: end };
                    left = left.saturating_sub(cost);
                    if left == 0 {
                        return false;
                    }
                }
                Stage::Finish => {
                    self.assemble();
                    self.stage = Stage::Done;
                    return true;
                }
                Stage::Done => return true,
            }
        }
    }

    /// Drives the remaining pipeline to completion and returns the sequence.
    pub fn finish(mut self) -> Result<StaticSeq> {
        while !self.step(u64::MAX) {}
        Ok(self.built.take().expect("pipeline complete"))
    }

    fn pack_meta(&self, m: usize) -> u64 {
        pack_meta_from(&self.syms, m, self.ell, self.w_sym)
    }

    /// Builds every per-block structure for block `b`; returns block size.
    fn process_block(&mut self, b: usize) -> usize {
        let s = b * self.sigma;
        let e = (s + self.sigma).min(self.n);
        let sz = e - s;
        let sigma = self.sigma;
        {
            let blk = &self.syms[s..e];
            self.blk_cnt[..sigma].fill(0);
            for &x in blk {
                self.blk_cnt[x as usize] += 1;
            }
            for a in 0..sigma {
                let c = self.blk_cnt[a] as usize;
                push_run(&mut self.vcat_buf, true, c);
                self.vcat_buf.push_bit(false);
                push_run(&mut self.b_bufs[a], true, c);
                self.b_bufs[a].push_bit(false);
                self.counts[a] += c as u64;
            }
            self.blk_off[0] = 0;
            for a in 0..sigma {
                self.blk_off[a + 1] = self.blk_off[a] + self.blk_cnt[a];
                self.cur[a] = self.blk_off[a];
            }
            for (i, &x) in blk.iter().enumerate() {
                let p = self.cur[x as usize];
                self.cur[x as usize] += 1;
                self.sorted_pos[p as usize] = i as u32;
                self.pi_fwd[i] = p;
            }
        }
        if self.t == 1 {
            for p in 0..sz {
                self.f_flat.push_bits(self.sorted_pos[p] as u64, self.w_pos);
            }
            return sz;
        }
        // Rank remainders modulo t, one per position.
        for i in 0..sz {
            let a = self.syms[s + i] as usize;
            let occ = (self.pi_fwd[i] - self.blk_off[a]) as usize;
            self.taux.r.push_bits(((occ + 1) % self.t) as u64, self.rw);
        }
        // Every t-th occurrence per symbol.
        let mut within = 0u64;
        for a in 0..sigma {
            self.taux.f_sym_off.push(within as u32);
            let na = self.blk_cnt[a] as usize;
            let base = self.blk_off[a] as usize;
            let mut occ = self.t - 1;
            while occ < na {
                self.taux
                    .f_pos
                    .push_bits(self.sorted_pos[base + occ] as u64, self.w_pos);
                within += 1;
                occ += self.t;
            }
        }
        self.taux.f_sym_off.push(within as u32);
        let prev = *self.taux.f_block_off.last().unwrap();
        self.taux.f_block_off.push(prev + within);
        // Cycle decomposition: mark every t-th element of cycles of length
        // at least t and record pi^{-t} for each mark.
        self.visited[..sz].fill(false);
        self.marks.clear();
        for start in 0..sz {
            if self.visited[start] {
                continue;
            }
            self.cycle.clear();
            let mut x = start as u32;
            loop {
                self.visited[x as usize] = true;
                self.cycle.push(x);
                x = self.pi_fwd[x as usize];
                if x as usize == start {
                    break;
                }
            }
            let l = self.cycle.len();
            if l >= self.t {
                let nmk = (l + self.t - 1) / self.t;
                for k in 0..nmk {
                    let pos = self.cycle[k * self.t];
                    let inv = self.cycle[(k * self.t + l - self.t) % l];
                    self.marks.push((pos, inv));
                }
            }
        }
        self.marks.sort_unstable();
        for &(p, inv) in &self.marks {
            self.taux.mark_pos.push_bits(p as u64, self.w_pos);
            self.taux.mark_inv.push_bits(inv as u64, self.w_pos);
        }
        let prev = *self.taux.mark_block_off.last().unwrap();
        self.taux
            .mark_block_off
            .push(prev + self.marks.len() as u64);
        sz
    }

    fn assemble(&mut self) {
        let map = self.map.take();
        let seq = if self.sigma <= 1 {
            StaticSeq {
                n: self.n,
                universe: self.universe,
                sigma: 1,
                map,
                ell: self.ell,
                t: self.t,
                w_sym: 0,
                w_pos: 0,
                rw: 0,
                stride: self.stride,
                m_full: 0,
                code: None,
                stream: BitBuf::new(),
                offsets: Vec::new(),
                tail: Vec::new(),
                nb: 0,
                vcat: StaticBits::default(),
                bseq: Vec::new(),
                counts: vec![self.n as u64],
                f_flat: BitBuf::new(),
                taux: None,
            }
        } else {
            StaticSeq {
                n: self.n,
                universe: self.universe,
                sigma: self.sigma,
                map,
                ell: self.ell,
                t: self.t,
                w_sym: self.w_sym,
                w_pos: self.w_pos,
                rw: self.rw,
                stride: self.stride,
                m_full: self.m_full,
                code: self.code.take(),
                stream: mem::take(&mut self.stream),
                offsets: mem::take(&mut self.offsets),
                tail: self.syms[self.m_full * self.ell..].to_vec(),
                nb: self.nb,
                vcat: StaticBits::from_bitbuf(&self.vcat_buf),
                bseq: self.b_bufs.iter().map(StaticBits::from_bitbuf).collect(),
                counts: mem::take(&mut self.counts),
                f_flat: mem::take(&mut self.f_flat),
                taux: if self.t >= 2 {
                    Some(mem::take(&mut self.taux))
                } else {
                    None
                },
            }
        };
        self.syms = Vec::new();
        self.vcat_buf = BitBuf::new();
        self.b_bufs = Vec::new();
        self.built = Some(seq);
    }
}

fn pack_meta_from(syms: &[u32], m: usize, ell: usize, w_sym: usize) -> u64 {
    let s = m * ell;
    let mut v = 0u64;
    for k in 0..ell {
        v |= (syms[s + k] as u64) << (k * w_sym);
    }
    v
}

impl StaticSeq {
    /// Builds the sequence over the plain alphabet `[0, sigma)` in one call.
    pub fn build(symbols: &[u32], sigma: usize, cfg: &CoreConfig) -> Result<StaticSeq> {
        StaticSeqBuilder::new(symbols, sigma, cfg)?.finish()
    }

    /// Builds with an alphabet remap; see [`StaticSeqBuilder::new_with_map`].
    pub fn build_with_map(symbols: &[u32], map: &[bool], cfg: &CoreConfig) -> Result<StaticSeq> {
        StaticSeqBuilder::new_with_map(symbols, map, cfg)?.finish()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Alphabet size as seen by callers (the remap universe when present).
    pub fn sigma(&self) -> usize {
        self.universe
    }

    /// Dense alphabet size actually stored.
    pub fn effective_sigma(&self) -> usize {
        self.sigma
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn t(&self) -> usize {
        self.t
    }

    fn to_dense(&self, a: u32) -> Result<Option<usize>> {
        match &self.map {
            None => {
                if (a as usize) < self.universe {
                    Ok(Some(a as usize))
                } else {
                    Err(Error::SymbolOutOfRange {
                        sym: a as u64,
                        sigma: self.universe as u64,
                    })
                }
            }
            Some(m) => {
                if (a as usize) >= m.universe {
                    return Err(Error::SymbolOutOfRange {
                        sym: a as u64,
                        sigma: m.universe as u64,
                    });
                }
                let d = m.univ_to_dense[a as usize];
                Ok(if d == u32::MAX { None } else { Some(d as usize) })
            }
        }
    }

    fn to_univ(&self, d: u32) -> u32 {
        match &self.map {
            None => d,
            Some(m) => m.dense_to_univ[d as usize],
        }
    }

    /// Total occurrences of `a`; 0 for unmapped symbols, error for symbols
    /// outside the universe.
    pub fn count(&self, a: u32) -> Result<usize> {
        Ok(match self.to_dense(a)? {
            None => 0,
            Some(d) => self.counts[d] as usize,
        })
    }

    // ----- coded-stream access -------------------------------------------

    fn read_one(&self, code: &HuffCode, rd: &mut BitReader) -> Result<u64> {
        let slot = code.decode_slot(|| rd.next())?;
        Ok(if code.is_escape(slot) {
            rd.read(self.ell * self.w_sym)
        } else {
            code.value(slot)
        })
    }

    fn unpack(&self, v: u64, k: usize) -> u32 {
        (v >> (k * self.w_sym) & ((1u64 << self.w_sym) - 1)) as u32
    }

    fn decode_meta(&self, m: usize) -> Result<u64> {
        debug_assert!(m < self.m_full);
        let code = self.code.as_ref().ok_or_else(|| {
            Error::Corrupt("coded stream missing".into())
        })?;
        let k = m / self.stride;
        let mut rd = BitReader {
            buf: &self.stream,
            pos: self.offsets[k] as usize,
        };
        for _ in 0..(m - k * self.stride) {
            self.read_one(code, &mut rd)?;
        }
        self.read_one(code, &mut rd)
    }

    fn access_dense(&self, i: usize) -> Result<u32> {
        debug_assert!(i < self.n);
        if self.sigma == 1 {
            return Ok(0);
        }
        let m = i / self.ell;
        if m >= self.m_full {
            return Ok(self.tail[i - self.m_full * self.ell]);
        }
        let v = self.decode_meta(m)?;
        Ok(self.unpack(v, i % self.ell))
    }

    /// Symbol at position `i`.
    pub fn access(&self, i: usize) -> Result<u32> {
        if i >= self.n {
            return Err(Error::OutOfRange { pos: i, len: self.n });
        }
        let d = self.access_dense(i)?;
        Ok(self.to_univ(d))
    }

    fn extract_dense(&self, i: usize, len: usize) -> Result<Vec<u32>> {
        if i.checked_add(len).map_or(true, |e| e > self.n) {
            return Err(Error::OutOfRange {
                pos: i.saturating_add(len),
                len: self.n,
            });
        }
        if len == 0 {
            return Ok(Vec::new());
        }
        if self.sigma == 1 {
            return Ok(vec![0; len]);
        }
        let mut out = Vec::with_capacity(len);
        let m0 = i / self.ell;
        let mend = (i + len - 1) / self.ell;
        if m0 < self.m_full {
            let code = self.code.as_ref().ok_or_else(|| {
                Error::Corrupt("coded stream missing".into())
            })?;
            let k = m0 / self.stride;
            let mut rd = BitReader {
                buf: &self.stream,
                pos: self.offsets[k] as usize,
            };
            for _ in 0..(m0 - k * self.stride) {
                self.read_one(code, &mut rd)?;
            }
            for m in m0..=mend.min(self.m_full - 1) {
                let v = self.read_one(code, &mut rd)?;
                let lo = if m == m0 { i - m0 * self.ell } else { 0 };
                let hi = self.ell.min(i + len - m * self.ell);
                for k2 in lo..hi {
                    out.push(self.unpack(v, k2));
                }
            }
        }
        if mend >= self.m_full {
            let start = self.m_full * self.ell;
            for p in start.max(i)..(i + len) {
                out.push(self.tail[p - start]);
            }
        }
        debug_assert_eq!(out.len(), len);
        Ok(out)
    }

    /// Substring `[i, i + len)`, decoded sequentially. Much cheaper per
    /// symbol than repeated [`access`](Self::access) calls.
    pub fn extract(&self, i: usize, len: usize) -> Result<Vec<u32>> {
        let dense = self.extract_dense(i, len)?;
        Ok(dense.into_iter().map(|d| self.to_univ(d)).collect())
    }

    // ----- block helpers --------------------------------------------------

    pub fn block_count(&self) -> usize {
        self.nb
    }

    pub fn block_size(&self, b: usize) -> usize {
        debug_assert!(b < self.nb);
        if b + 1 < self.nb {
            self.sigma
        } else {
            self.n - self.sigma * (self.nb - 1)
        }
    }

    /// Occurrences of dense symbols `< a` inside block `b`.
    fn block_prefix(&self, b: usize, a: usize) -> usize {
        if a == 0 {
            return 0;
        }
        let k = b * self.sigma + a - 1;
        let z = self.vcat.select0(k);
        (z - k) - self.sigma * b
    }

    fn block_sym_count(&self, b: usize, a: usize) -> usize {
        self.block_prefix(b, a + 1) - self.block_prefix(b, a)
    }

    /// Occurrences of dense symbol `a` before block `b`.
    fn cross(&self, a: usize, b: usize) -> usize {
        if b == 0 {
            return 0;
        }
        let k = b - 1;
        self.bseq[a].select0(k) - k
    }

    fn f_entry(&self, idx: usize) -> usize {
        self.f_flat.get_bits(idx * self.w_pos, self.w_pos) as usize
    }

    fn taux_f_seg(&self, aux: &TAux, b: usize, a: usize) -> (usize, usize) {
        let base = aux.f_block_off[b] as usize;
        let so = &aux.f_sym_off[b * (self.sigma + 1)..];
        (base + so[a] as usize, base + so[a + 1] as usize)
    }

    fn taux_f_entry(&self, aux: &TAux, idx: usize) -> usize {
        aux.f_pos.get_bits(idx * self.w_pos, self.w_pos) as usize
    }

    /// Count of entries `< limit` in a sorted packed segment `[s, e)`.
    fn count_below(
        &self,
        get: impl Fn(usize) -> usize,
        s: usize,
        e: usize,
        limit: usize,
    ) -> usize {
        let mut lo = s;
        let mut hi = e;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if get(mid) < limit {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo - s
    }

    /// Occurrences of dense symbol `a` at in-block positions `< r` of block
    /// `b`; `r >= 1`.
    fn rank_in_block(&self, b: usize, a: usize, r: usize) -> Result<usize> {
        let pa = self.block_prefix(b, a);
        let na = self.block_prefix(b, a + 1) - pa;
        if na == 0 {
            return Ok(0);
        }
        match &self.taux {
            None => {
                let seg = b * self.sigma + pa;
                Ok(self.count_below(|i| self.f_entry(i), seg, seg + na, r))
            }
            Some(aux) => {
                let (fs, fe) = self.taux_f_seg(aux, b, a);
                let c = self.count_below(|i| self.taux_f_entry(aux, i), fs, fe, r);
                let mut lo = self.t * c;
                let mut hi = (lo + self.t - 1).min(na);
                while lo < hi {
                    let mid = (lo + hi + 1) / 2;
                    if self.sel_in_block(b, a, mid)? < r {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                Ok(lo)
            }
        }
    }

    /// In-block position of the `j`-th (1-based) occurrence of dense symbol
    /// `a` in block `b`.
    fn sel_in_block(&self, b: usize, a: usize, j: usize) -> Result<usize> {
        let pa = self.block_prefix(b, a);
        let p = pa + j - 1;
        self.pi_inv_block(b, p)
    }

    /// Stable-sort slot of in-block position `i2` of block `b`.
    fn pi_fwd_block(&self, b: usize, i2: usize) -> Result<usize> {
        let gi = b * self.sigma + i2;
        let a = self.access_dense(gi)? as usize;
        let pa = self.block_prefix(b, a);
        let pr = self.partial_rank_in_block(b, i2, a)?;
        Ok(pa + pr - 1)
    }

    /// 1-based occurrence number of `block[i2]` among its symbol within the
    /// block. `a` is the dense symbol at that position.
    fn partial_rank_in_block(&self, b: usize, i2: usize, a: usize) -> Result<usize> {
        match &self.taux {
            None => {
                let pa = self.block_prefix(b, a);
                let na = self.block_prefix(b, a + 1) - pa;
                let seg = b * self.sigma + pa;
                let c = self.count_below(|i| self.f_entry(i), seg, seg + na, i2);
                if seg + c >= seg + na || self.f_entry(seg + c) != i2 {
                    return Err(Error::Corrupt(
                        "position table disagrees with coded stream".into(),
                    ));
                }
                Ok(c + 1)
            }
            Some(aux) => {
                let r1 = aux.r.get_bits((b * self.sigma + i2) * self.rw, self.rw) as usize;
                let (fs, fe) = self.taux_f_seg(aux, b, a);
                let c = self.count_below(|i| self.taux_f_entry(aux, i), fs, fe, i2 + 1);
                Ok(r1 + self.t * c)
            }
        }
    }

    fn mark_lookup(&self, aux: &TAux, b: usize, pos: usize) -> Option<usize> {
        let ms = aux.mark_block_off[b] as usize;
        let me = aux.mark_block_off[b + 1] as usize;
        let mut lo = ms;
        let mut hi = me;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let v = aux.mark_pos.get_bits(mid * self.w_pos, self.w_pos) as usize;
            if v < pos {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo < me && aux.mark_pos.get_bits(lo * self.w_pos, self.w_pos) as usize == pos {
            Some(aux.mark_inv.get_bits(lo * self.w_pos, self.w_pos) as usize)
        } else {
            None
        }
    }

    /// In-block position whose stable-sort slot is `p`: the inverse
    /// permutation, recovered by walking forward until the cycle closes or a
    /// marked position supplies a stored `pi^{-t}` shortcut.
    fn pi_inv_block(&self, b: usize, p: usize) -> Result<usize> {
        match &self.taux {
            None => Ok(self.f_entry(b * self.sigma + p)),
            Some(aux) => {
                let bound = 2 * self.block_size(b) + 2 * self.t + 4;
                let mut cur;
                if let Some(inv) = self.mark_lookup(aux, b, p) {
                    cur = inv;
                } else {
                    cur = p;
                    let mut steps = 0usize;
                    loop {
                        let nxt = self.pi_fwd_block(b, cur)?;
                        if nxt == p {
                            return Ok(cur);
                        }
                        if let Some(inv) = self.mark_lookup(aux, b, nxt) {
                            cur = inv;
                            break;
                        }
                        cur = nxt;
                        steps += 1;
                        if steps > bound {
                            return Err(Error::Corrupt("unterminated permutation cycle".into()));
                        }
                    }
                }
                let mut steps = 0usize;
                loop {
                    let nxt = self.pi_fwd_block(b, cur)?;
                    if nxt == p {
                        return Ok(cur);
                    }
                    cur = nxt;
                    steps += 1;
                    if steps > bound {
                        return Err(Error::Corrupt("unterminated permutation cycle".into()));
                    }
                }
            }
        }
    }

    /// Stable-sort slot of in-block position `i` of block `b` (exposed for
    /// structural tests).
    pub fn block_pi(&self, b: usize, i: usize) -> Result<usize> {
        if b >= self.nb || i >= self.block_size(b) {
            return Err(Error::OutOfRange {
                pos: i,
                len: if b < self.nb { self.block_size(b) } else { 0 },
            });
        }
        self.pi_fwd_block(b, i)
    }

    /// Inverse of [`block_pi`](Self::block_pi).
    pub fn block_pi_inv(&self, b: usize, p: usize) -> Result<usize> {
        if b >= self.nb || p >= self.block_size(b) {
            return Err(Error::OutOfRange {
                pos: p,
                len: if b < self.nb { self.block_size(b) } else { 0 },
            });
        }
        self.pi_inv_block(b, p)
    }

    // ----- public queries -------------------------------------------------

    /// Occurrences of `a` in positions `[0, i)`.
    pub fn rank(&self, a: u32, i: usize) -> Result<usize> {
        if i > self.n {
            return Err(Error::OutOfRange { pos: i, len: self.n });
        }
        let ad = match self.to_dense(a)? {
            None => return Ok(0),
            Some(d) => d,
        };
        if self.sigma == 1 {
            return Ok(i);
        }
        if i == 0 {
            return Ok(0);
        }
        let b = i / self.sigma;
        let r = i % self.sigma;
        let mut res = self.cross(ad, b);
        if r > 0 {
            res += self.rank_in_block(b, ad, r)?;
        }
        Ok(res)
    }

    /// Occurrences of the symbol at position `i` in positions `[0, i]`
    /// (always at least 1).
    pub fn partial_rank(&self, i: usize) -> Result<usize> {
        if i >= self.n {
            return Err(Error::OutOfRange { pos: i, len: self.n });
        }
        if self.sigma == 1 {
            return Ok(i + 1);
        }
        let a = self.access_dense(i)? as usize;
        let b = i / self.sigma;
        let i2 = i % self.sigma;
        Ok(self.cross(a, b) + self.partial_rank_in_block(b, i2, a)?)
    }

    /// 0-based position of the `j`-th (1-based) occurrence of `a`.
    pub fn select(&self, a: u32, j: usize) -> Result<usize> {
        let ad = self.to_dense(a)?;
        let cnt = ad.map_or(0, |d| self.counts[d] as usize);
        if j == 0 || j > cnt {
            return Err(Error::OccurrenceOutOfRange { occ: j, count: cnt });
        }
        let ad = ad.unwrap();
        if self.sigma == 1 {
            return Ok(j - 1);
        }
        let p1 = self.bseq[ad].select1(j - 1);
        let b = p1 - (j - 1);
        let j2 = j - self.cross(ad, b);
        Ok(b * self.sigma + self.sel_in_block(b, ad, j2)?)
    }

    // ----- maintenance ----------------------------------------------------

    /// Size breakdown in bits of serialized payload.
    pub fn stats(&self) -> Result<StaticStats> {
        let mut bytes = Vec::new();
        self.write_into(&mut bytes)?;
        let (distinct, table_bits) = match &self.code {
            None => (0, 0),
            Some(c) => (c.entries() - 1, c.entries() * (64 + 8) + 96),
        };
        let perm_bits = match &self.taux {
            None => self.f_flat.len(),
            Some(aux) => {
                aux.f_pos.len()
                    + aux.r.len()
                    + aux.mark_pos.len()
                    + aux.mark_inv.len()
                    + 64 * (aux.f_block_off.len() + aux.mark_block_off.len())
                    + 32 * aux.f_sym_off.len()
            }
        };
        Ok(StaticStats {
            n: self.n,
            sigma: self.sigma,
            universe: self.universe,
            ell: self.ell,
            t: self.t,
            meta_count: self.m_full,
            distinct_metas: distinct,
            coded_meta_bits: self.stream.len(),
            table_bits,
            offsets_bits: 64 * self.offsets.len(),
            block_bits: self.vcat.len() + self.bseq.iter().map(|b| b.len()).sum::<usize>(),
            perm_bits,
            total_bits: bytes.len() * 8,
        })
    }

    /// Deep structural audit: decodes the whole sequence, rebuilds from
    /// scratch with the same parameters, and requires the serialized forms
    /// to match bit for bit; also rechecks the coding-size contract.
    pub fn validate(&self) -> Result<()> {
        let univ_syms = self.extract(0, self.n)?;
        let cfg = CoreConfig {
            static_t_override: Some(self.t),
            decode_stride: self.stride,
            ..CoreConfig::default()
        };
        let rebuilt = match &self.map {
            None => StaticSeq::build(&univ_syms, self.universe, &cfg)?,
            Some(m) => {
                let bools: Vec<bool> = (0..m.universe)
                    .map(|u| m.bits[u / 64] >> (u % 64) & 1 == 1)
                    .collect();
                StaticSeq::build_with_map(&univ_syms, &bools, &cfg)?
            }
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        self.write_into(&mut a)?;
        rebuilt.write_into(&mut b)?;
        if a != b {
            return Err(Error::AuditFailed(
                "rebuild from decoded content differs".into(),
            ));
        }
        if self.m_full > 0 {
            let dense = self.extract_dense(0, self.n)?;
            let metas: Vec<u64> = (0..self.m_full)
                .map(|m| pack_meta_from(&dense, m, self.ell, self.w_sym))
                .collect();
            let h0 = crate::entropy::h0_u64(&metas);
            let bound = self.m_full as f64 * (h0 + 2.0);
            if self.stream.len() as f64 > bound + 1.0 {
                return Err(Error::AuditFailed(format!(
                    "coded stream {} bits exceeds entropy bound {:.1}",
                    self.stream.len(),
                    bound
                )));
            }
        }
        Ok(())
    }

    // ----- serialization --------------------------------------------------

    pub fn write_into<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"SDSS")?;
        w.write_all(&[1u8])?;
        for v in [
            self.n as u64,
            self.universe as u64,
            self.sigma as u64,
            self.ell as u64,
            self.t as u64,
            self.stride as u64,
            self.m_full as u64,
        ] {
            w_u64(w, v)?;
        }
        w.write_all(&[self.map.is_some() as u8])?;
        if let Some(m) = &self.map {
            w_words(w, &m.bits)?;
        }
        w_u64(w, self.tail.len() as u64)?;
        for &s in &self.tail {
            w.write_all(&s.to_le_bytes())?;
        }
        match &self.code {
            None => w.write_all(&[0u8])?,
            Some(c) => {
                w.write_all(&[1u8])?;
                w_u64(w, c.entries() as u64)?;
                w_u64(w, c.esc_slot() as u64)?;
                w.write_all(c.lens())?;
                for &v in c.vals() {
                    w_u64(w, v)?;
                }
            }
        }
        w_bitbuf(w, &self.stream)?;
        w_u64(w, self.offsets.len() as u64)?;
        for &o in &self.offsets {
            w_u64(w, o)?;
        }
        w_u64(w, self.vcat.len() as u64)?;
        w_words(w, self.vcat.words())?;
        w_u64(w, self.bseq.len() as u64)?;
        for sb in &self.bseq {
            w_u64(w, sb.len() as u64)?;
            w_words(w, sb.words())?;
        }
        match &self.taux {
            None => {
                w.write_all(&[0u8])?;
                w_bitbuf(w, &self.f_flat)?;
            }
            Some(aux) => {
                w.write_all(&[1u8])?;
                w_bitbuf(w, &aux.f_pos)?;
                w_u64(w, aux.f_block_off.len() as u64)?;
                for &v in &aux.f_block_off {
                    w_u64(w, v)?;
                }
                w_u64(w, aux.f_sym_off.len() as u64)?;
                for &v in &aux.f_sym_off {
                    w.write_all(&v.to_le_bytes())?;
                }
                w_bitbuf(w, &aux.r)?;
                w_bitbuf(w, &aux.mark_pos)?;
                w_bitbuf(w, &aux.mark_inv)?;
                w_u64(w, aux.mark_block_off.len() as u64)?;
                for &v in &aux.mark_block_off {
                    w_u64(w, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<StaticSeq> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic[..4] != b"SDSS" {
            return Err(Error::Corrupt("bad magic".into()));
        }
        if magic[4] != 1 {
            return Err(Error::Corrupt(format!("unsupported version {}", magic[4])));
        }
        let n = r_u64(r)? as usize;
        let universe = r_u64(r)? as usize;
        let sigma = r_u64(r)? as usize;
        let ell = r_u64(r)? as usize;
        let t = r_u64(r)? as usize;
        let stride = r_u64(r)? as usize;
        let m_full = r_u64(r)? as usize;
        if sigma == 0 || !(1..=64).contains(&t) || stride == 0 {
            return Err(Error::Corrupt("parameter out of range".into()));
        }
        if n >= 1 << 31 || universe >= 1 << 31 || sigma > universe.max(1) {
            return Err(Error::Corrupt("parameter out of range".into()));
        }
        let w_sym = if sigma <= 1 { 0 } else { log2_ceil(sigma) };
        if ell != meta_len(n, sigma, w_sym) {
            return Err(Error::Corrupt("meta-symbol width mismatch".into()));
        }
        let has_map = r_u8(r)? != 0;
        let map = if has_map {
            let words = r_words(r, (universe + 63) / 64)?;
            let m = SymMap::from_words(words, universe)?;
            if m.dense_to_univ.len().max(1) != sigma {
                return Err(Error::Corrupt("alphabet map cardinality mismatch".into()));
            }
            Some(m)
        } else {
            if universe != sigma {
                return Err(Error::Corrupt("universe mismatch without map".into()));
            }
            None
        };
        let expected_m_full = if sigma <= 1 { 0 } else { n / ell };
        if m_full != expected_m_full {
            return Err(Error::Corrupt("meta-symbol count mismatch".into()));
        }
        let tail_len = r_u64(r)? as usize;
        let expected_tail = if sigma <= 1 { 0 } else { n - m_full * ell };
        if tail_len != expected_tail {
            return Err(Error::Corrupt("tail length mismatch".into()));
        }
        let mut tail = Vec::with_capacity(tail_len);
        for _ in 0..tail_len {
            let mut b4 = [0u8; 4];
            r.read_exact(&mut b4)?;
            let s = u32::from_le_bytes(b4);
            if s as usize >= sigma {
                return Err(Error::Corrupt("tail symbol out of range".into()));
            }
            tail.push(s);
        }
        let has_code = r_u8(r)? != 0;
        if has_code != (m_full > 0) {
            return Err(Error::Corrupt("code table presence mismatch".into()));
        }
        let code = if has_code {
            let entries = r_u64(r)? as usize;
            let esc = r_u64(r)? as u32;
            if entries == 0 || entries > m_full + 1 {
                return Err(Error::Corrupt("code table size out of range".into()));
            }
            let mut lens = vec![0u8; entries];
            r.read_exact(&mut lens)?;
            let mut vals = Vec::with_capacity(entries);
            for _ in 0..entries {
                vals.push(r_u64(r)?);
            }
            Some(HuffCode::from_parts(vals, lens, esc)?)
        } else {
            None
        };
        let stream = r_bitbuf(r)?;
        let off_count = r_u64(r)? as usize;
        let expected_off = if m_full == 0 {
            0
        } else {
            (m_full + stride - 1) / stride
        };
        if off_count != expected_off {
            return Err(Error::Corrupt("offset table size mismatch".into()));
        }
        let mut offsets = Vec::with_capacity(off_count);
        let mut prev = 0u64;
        for i in 0..off_count {
            let o = r_u64(r)?;
            if o as usize > stream.len() || (i == 0 && o != 0) || o < prev {
                return Err(Error::Corrupt("offset table not monotone".into()));
            }
            prev = o;
            offsets.push(o);
        }
        let nb = if sigma <= 1 || n == 0 {
            0
        } else {
            (n + sigma - 1) / sigma
        };
        let vcat_len = r_u64(r)? as usize;
        let expected_vcat = if nb == 0 { 0 } else { n + sigma * nb };
        if vcat_len != expected_vcat || vcat_len >= u32::MAX as usize {
            return Err(Error::Corrupt("count vector length mismatch".into()));
        }
        let vcat = StaticBits::new(r_words(r, (vcat_len + 63) / 64)?, vcat_len);
        if nb > 0 && (vcat.count_ones() != n || vcat.count_zeros() != sigma * nb) {
            return Err(Error::Corrupt("count vector population mismatch".into()));
        }
        let bcount = r_u64(r)? as usize;
        if bcount != if sigma <= 1 { 0 } else { sigma } {
            return Err(Error::Corrupt("per-symbol sequence count mismatch".into()));
        }
        let mut bseq = Vec::with_capacity(bcount);
        let mut counts = Vec::with_capacity(bcount.max(1));
        let mut total = 0usize;
        for _ in 0..bcount {
            let blen = r_u64(r)? as usize;
            if blen >= u32::MAX as usize {
                return Err(Error::Corrupt("block-count sequence too large".into()));
            }
            let sb = StaticBits::new(r_words(r, (blen + 63) / 64)?, blen);
            if sb.count_zeros() != nb {
                return Err(Error::Corrupt("block-count sequence shape mismatch".into()));
            }
            total += sb.count_ones();
            counts.push(sb.count_ones() as u64);
            bseq.push(sb);
        }
        if sigma <= 1 {
            counts = vec![n as u64];
        } else if total != n {
            return Err(Error::Corrupt("symbol totals do not sum to length".into()));
        }
        let w_pos = w_sym;
        let rw = if t >= 2 { log2_ceil(t) } else { 0 };
        let has_aux = r_u8(r)? != 0;
        if has_aux != (t >= 2) {
            return Err(Error::Corrupt("sampling machinery presence mismatch".into()));
        }
        let (f_flat, taux) = if !has_aux {
            let f = r_bitbuf(r)?;
            let expected = if nb == 0 { 0 } else { n * w_pos };
            if f.len() != expected {
                return Err(Error::Corrupt("position table length mismatch".into()));
            }
            (f, None)
        } else {
            let f_pos = r_bitbuf(r)?;
            let fb_count = r_u64(r)? as usize;
            if fb_count != nb + 1 {
                return Err(Error::Corrupt("sample offsets length mismatch".into()));
            }
            let mut f_block_off = Vec::with_capacity(fb_count);
            for _ in 0..fb_count {
                f_block_off.push(r_u64(r)?);
            }
            let fs_count = r_u64(r)? as usize;
            if fs_count != nb * (sigma + 1) {
                return Err(Error::Corrupt("per-symbol offsets length mismatch".into()));
            }
            let mut f_sym_off = Vec::with_capacity(fs_count);
            for _ in 0..fs_count {
                let mut b4 = [0u8; 4];
                r.read_exact(&mut b4)?;
                f_sym_off.push(u32::from_le_bytes(b4));
            }
            if f_block_off[0] != 0 || f_block_off.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Corrupt("sample offsets not monotone".into()));
            }
            for b in 0..nb {
                let base = b * (sigma + 1);
                let so = &f_sym_off[base..base + sigma + 1];
                if so[0] != 0
                    || so.windows(2).any(|w| w[1] < w[0])
                    || so[sigma] as u64 != f_block_off[b + 1] - f_block_off[b]
                {
                    return Err(Error::Corrupt("per-symbol offsets inconsistent".into()));
                }
            }
            let rbits = r_bitbuf(r)?;
            if rbits.len() != n * rw {
                return Err(Error::Corrupt("rank remainder length mismatch".into()));
            }
            let mark_pos = r_bitbuf(r)?;
            let mark_inv = r_bitbuf(r)?;
            let mb_count = r_u64(r)? as usize;
            if mb_count != nb + 1 {
                return Err(Error::Corrupt("mark offsets length mismatch".into()));
            }
            let mut mark_block_off = Vec::with_capacity(mb_count);
            for _ in 0..mb_count {
                mark_block_off.push(r_u64(r)?);
            }
            if mark_block_off[0] != 0 || mark_block_off.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Corrupt("mark offsets not monotone".into()));
            }
            let fe = *f_block_off.last().unwrap_or(&0) as usize;
            let me = *mark_block_off.last().unwrap_or(&0) as usize;
            if f_pos.len() != fe * w_pos
                || mark_pos.len() != me * w_pos
                || mark_inv.len() != me * w_pos
            {
                return Err(Error::Corrupt("sample payload length mismatch".into()));
            }
            (
                BitBuf::new(),
                Some(TAux {
                    f_pos,
                    f_block_off,
                    f_sym_off,
                    r: rbits,
                    mark_pos,
                    mark_inv,
                    mark_block_off,
                }),
            )
        };
        Ok(StaticSeq {
            n,
            universe,
            sigma,
            map,
            ell,
            t,
            w_sym,
            w_pos,
            rw,
            stride,
            m_full,
            code,
            stream,
            offsets,
            tail,
            nb,
            vcat,
            bseq,
            counts,
            f_flat,
            taux,
        })
    }
}

// ----- little-endian io helpers ------------------------------------------

fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn w_words<W: Write>(w: &mut W, words: &[u64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(words.len() * 8);
    for &x in words {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Caps a single deserialized vector at 1 GiB to keep corrupt headers from
/// forcing huge allocations.
const MAX_WORDS: usize = 1 << 27;

fn r_words<R: Read>(r: &mut R, count: usize) -> Result<Vec<u64>> {
    if count > MAX_WORDS {
        return Err(Error::Corrupt("serialized section too large".into()));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn w_bitbuf<W: Write>(w: &mut W, buf: &BitBuf) -> Result<()> {
    w_u64(w, buf.len() as u64)?;
    w_words(w, &buf.words()[..(buf.len() + 63) / 64])
}

fn r_bitbuf<R: Read>(r: &mut R) -> Result<BitBuf> {
    let bits = r_u64(r)? as usize;
    let words = r_words(r, (bits + 63) / 64)?;
    Ok(BitBuf::from_raw(words, bits))
}

#[cfg(test)]
mod tests;
