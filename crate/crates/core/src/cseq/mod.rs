//! Fully dynamic compressed sequence.
//!
//! Symbols live in one of two homes: a small staging store of recent
//! insertions (one chunked string per part) and a row of immutable
//! entropy-coded sections. Deletions only mark elements dead; background
//! maintenance migrates staged symbols into rebuilt sections and purges dead
//! marks, a few operations at a time, so no single update stalls.
//!
//! The glue is a family of aligned bit sequences, all sectored by part:
//!
//! - `m_live`: one bit per physical position, 1 = live (not deleted).
//! - `r_loc`: one bit per physical position, 0 = staged, 1 = in a section.
//! - `samp_pos`: one bit per physical position, 1 = the element is mirrored
//!   in the sample store.
//! - `samples`: per part, a chunked string holding every staged element plus
//!   roughly every `r`-th occurrence of each symbol; `samp_src` (0 = staged)
//!   and `pend_drop` (1 = scheduled for unsampling) run parallel to it.
//! - `d_live[a]`: per symbol, one bit per physical occurrence of `a`,
//!   1 = live. Rank and select reduce to prefix sums over these.
//! - `w_enc[a]`: per symbol, occurrences coded in order as `10` (sampled)
//!   or `0` (unsampled); links occurrence indexes to sample indexes.
//!
//! All derived index spaces decompose at part boundaries, which is what lets
//! maintenance rebuild one part at a time behind a copy frontier and swap it
//! in atomically.

mod counts;
mod extract;
mod maint;
mod serial;
mod swords;
#[cfg(test)]
mod tests;

use crate::bitvec::{DynBitVec, SectoredBitVec};
use crate::config::{log2_ceil, CoreConfig};
use crate::dstr::ChunkedString;
use crate::entropy;
use crate::error::{Error, Result};
use crate::ops_count;
use crate::sseq::StaticSeq;

use counts::{Fenwick, SectionCounts};
pub use maint::PhaseKind;
use maint::MaintState;
use swords::{PackedWords, SpoilBook};

/// Space accounting snapshot.
#[derive(Debug, Clone)]
pub struct SpaceReport {
    /// Live symbols.
    pub n: usize,
    /// Total bits across all persisted components plus derived indexes.
    pub bits_total: u64,
    /// Serialized bits of each coded section.
    pub bits_per_section: Vec<u64>,
    /// Order-0 empirical entropy of the live content, bits per symbol.
    pub h0: f64,
    /// Order-`k` empirical entropy of the live content, bits per symbol.
    pub hk: f64,
    /// Context order used for `hk`.
    pub k: usize,
    /// Named component sizes, in bits.
    pub breakdown: Vec<(&'static str, u64)>,
}

/// Dynamic sequence over `[0, sigma)` with entropy-bounded storage.
pub struct CompressedSeq {
    pub(crate) cfg: CoreConfig,
    pub(crate) sigma: usize,
    pub(crate) r: usize,
    /// Live size at the last full rebuild; geometry is calibrated to it.
    pub(crate) n0: usize,
    pub(crate) live: usize,
    pub(crate) m_live: SectoredBitVec,
    pub(crate) r_loc: SectoredBitVec,
    pub(crate) samp_pos: SectoredBitVec,
    pub(crate) samp_src: SectoredBitVec,
    pub(crate) pend_drop: SectoredBitVec,
    pub(crate) staging: Vec<ChunkedString>,
    pub(crate) samples: Vec<ChunkedString>,
    pub(crate) sections: Vec<StaticSeq>,
    pub(crate) d_live: Vec<SectoredBitVec>,
    pub(crate) w_enc: Vec<SectoredBitVec>,
    pub(crate) size_idx: Fenwick,
    pub(crate) count_idx: SectionCounts,
    pub(crate) s_w: Vec<PackedWords>,
    pub(crate) spoil: Vec<SpoilBook>,
    pub(crate) maint: MaintState,
}

impl CompressedSeq {
    /// Empty sequence.
    pub fn new(sigma: usize, cfg: &CoreConfig) -> Self {
        Self::from_symbols(&[], sigma, cfg).expect("empty build cannot fail")
    }

    /// Builds from an initial symbol array.
    pub fn from_symbols(syms: &[u32], sigma: usize, cfg: &CoreConfig) -> Result<Self> {
        let sigma = sigma.max(1);
        for &s in syms {
            if s as usize >= sigma {
                return Err(Error::SymbolOutOfRange {
                    sym: s as u64,
                    sigma: sigma as u64,
                });
            }
        }
        let n = syms.len();
        let n0 = n.max(64);
        let r = cfg
            .section_count
            .unwrap_or_else(|| CoreConfig::default_sections(n0))
            .max(2);
        let unary = cfg.count_unary_override.unwrap_or_else(|| {
            let lg = log2_ceil(n0.max(4)) as u64;
            (sigma as u64) * lg * lg * lg > n0 as u64
        });
        let (wbits, wcap) = packing_params(sigma, n0);

        let mut m_secs = Vec::with_capacity(r);
        let mut r_secs = Vec::with_capacity(r);
        let mut e_secs = Vec::with_capacity(r);
        let mut b_secs = Vec::with_capacity(r);
        let mut p_secs = Vec::with_capacity(r);
        let mut d_secs: Vec<Vec<DynBitVec>> = (0..sigma).map(|_| Vec::with_capacity(r)).collect();
        let mut w_secs: Vec<Vec<DynBitVec>> = (0..sigma).map(|_| Vec::with_capacity(r)).collect();
        let mut staging = Vec::with_capacity(r);
        let mut samples = Vec::with_capacity(r);
        let mut sections = Vec::with_capacity(r);
        let mut s_w = Vec::with_capacity(r);
        let mut spoil = Vec::with_capacity(r);
        let mut sizes = Vec::with_capacity(r);
        let mut count_idx = SectionCounts::new(sigma, r, unary);

        // Global per-symbol occurrence counters drive the sampling phase.
        let mut occ = vec![0u64; sigma];
        let mut start = 0usize;
        for t in 0..r {
            let end = n * (t + 1) / r;
            let sec_syms = &syms[start..end];
            let len = sec_syms.len();

            let mut m = DynBitVec::new();
            let mut rl = DynBitVec::new();
            if len > 0 {
                m.push_run(true, len);
                rl.push_run(true, len);
            }
            m_secs.push(m);
            r_secs.push(rl);

            let mut e = BitPush::new();
            let mut w_loc: Vec<BitPush> = Vec::new();
            let mut d_cnt = vec![0usize; sigma];
            let mut sampled_syms: Vec<u32> = Vec::new();
            for &a in sec_syms {
                let ai = a as usize;
                let flag = occ[ai] % (r as u64) == 0;
                occ[ai] += 1;
                d_cnt[ai] += 1;
                e.push(flag);
                if w_loc.len() < sigma {
                    w_loc.resize_with(sigma, BitPush::new);
                }
                if flag {
                    w_loc[ai].push(true);
                    sampled_syms.push(a);
                }
                w_loc[ai].push(false);
            }
            e_secs.push(e.into_bitvec());
            for a in 0..sigma {
                let mut d = DynBitVec::new();
                if d_cnt[a] > 0 {
                    d.push_run(true, d_cnt[a]);
                }
                d_secs[a].push(d);
                let w = if w_loc.is_empty() {
                    DynBitVec::new()
                } else {
                    std::mem::take(&mut w_loc[a]).into_bitvec()
                };
                w_secs[a].push(w);
                if d_cnt[a] > 0 {
                    count_idx.set(a as u32, t, d_cnt[a] as u64);
                }
            }
            let mut b = DynBitVec::new();
            if !sampled_syms.is_empty() {
                b.push_run(true, sampled_syms.len());
            }
            b_secs.push(b);
            p_secs.push(DynBitVec::zeros(sampled_syms.len()));
            samples.push(ChunkedString::from_symbols(&sampled_syms, sigma, cfg)?);
            staging.push(ChunkedString::new(sigma, cfg));
            s_w.push(PackedWords::new(wbits, wcap));
            let stat = StaticSeq::build(sec_syms, sigma, cfg)?;
            let ell = stat.ell();
            spoil.push(SpoilBook::new((len + ell - 1) / ell.max(1), ell, wbits, wcap));
            sections.push(stat);
            sizes.push(len as u64);
            start = end;
        }

        Ok(CompressedSeq {
            cfg: cfg.clone(),
            sigma,
            r,
            n0,
            live: n,
            m_live: SectoredBitVec::from_parts(m_secs),
            r_loc: SectoredBitVec::from_parts(r_secs),
            samp_pos: SectoredBitVec::from_parts(e_secs),
            samp_src: SectoredBitVec::from_parts(b_secs),
            pend_drop: SectoredBitVec::from_parts(p_secs),
            staging,
            samples,
            sections,
            d_live: d_secs.into_iter().map(SectoredBitVec::from_parts).collect(),
            w_enc: w_secs.into_iter().map(SectoredBitVec::from_parts).collect(),
            size_idx: Fenwick::from_values(&sizes),
            count_idx,
            s_w,
            spoil,
            maint: MaintState::idle(),
        })
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// Section count.
    pub fn parts(&self) -> usize {
        self.r
    }

    /// Physical positions, live plus dead.
    pub(crate) fn physical_len(&self) -> usize {
        self.m_live.len()
    }

    pub(crate) fn ghost_count(&self) -> usize {
        self.m_live.count_zeros()
    }

    pub(crate) fn staged_count(&self) -> usize {
        self.staging.iter().map(|s| s.len()).sum()
    }

    /// Part containing physical position `p`, plus the in-part offset.
    pub(crate) fn part_of(&self, p: usize) -> (usize, usize) {
        let mut cum = 0usize;
        for s in 0..self.r {
            ops_count::bump(1);
            let l = self.m_live.sector_len(s);
            if p < cum + l {
                return (s, p - cum);
            }
            cum += l;
        }
        panic!("physical position {p} out of range {cum}");
    }

    /// Physical position of live element `i`.
    pub(crate) fn pos_of_live(&self, i: usize) -> Result<usize> {
        self.m_live.select1(i + 1).ok_or(Error::OutOfRange {
            pos: i,
            len: self.live,
        })
    }

    /// Physical `a`-occurrences strictly before physical position `p`.
    pub(crate) fn occ_before(&self, a: u32, p: usize) -> usize {
        let s0_idx = self.r_loc.rank0(p);
        let mut s0 = 0usize;
        let mut rem = s0_idx;
        for part in &self.staging {
            ops_count::bump(1);
            if rem <= part.len() {
                s0 += part.rank(a, rem).expect("staging rank");
                break;
            }
            s0 += part.count(a);
            rem -= part.len();
        }
        let i1 = self.r_loc.rank1(p);
        let stat = if i1 == 0 {
            0
        } else {
            let (t, before) = self.size_idx.find_by_cum(i1 as u64);
            let local = i1 as u64 - before;
            self.count_idx.prefix(a, t) as usize
                + self.sections[t].rank(a, local as usize).expect("section rank")
        };
        s0 + stat
    }

    /// Staged `a`-occurrences strictly before physical position `p`.
    pub(crate) fn staged_before(&self, a: u32, p: usize) -> usize {
        let s0_idx = self.r_loc.rank0(p);
        let mut s0 = 0usize;
        let mut rem = s0_idx;
        for part in &self.staging {
            ops_count::bump(1);
            if rem <= part.len() {
                s0 += part.rank(a, rem).expect("staging rank");
                break;
            }
            s0 += part.count(a);
            rem -= part.len();
        }
        s0
    }

    /// Coded section holding global static index `i1`, with its local offset.
    pub(crate) fn static_locate(&self, i1: usize) -> (usize, usize) {
        let (t, before) = self.size_idx.find_by_cum(i1 as u64 + 1);
        (t, i1 - before as usize)
    }

    /// Symbol at physical position `p`.
    pub(crate) fn symbol_at(&self, p: usize) -> u32 {
        if self.r_loc.get(p) {
            let (t, local) = self.static_locate(self.r_loc.rank1(p));
            self.sections[t].access(local).expect("section access")
        } else {
            let (part, off) = self.part_of(p);
            let s0_local = self.r_loc.sector_ref(part).rank0(off);
            self.staging[part].access(s0_local).expect("staging access")
        }
    }

    /// Symbol of live element `i`.
    pub fn access(&self, i: usize) -> Result<u32> {
        if i >= self.live {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.live,
            });
        }
        let p = self.pos_of_live(i)?;
        Ok(self.symbol_at(p))
    }

    /// Occurrences of `a` among the first `i` live elements.
    pub fn rank(&self, a: u32, i: usize) -> Result<usize> {
        if i > self.live {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.live,
            });
        }
        if (a as usize) >= self.sigma || i == 0 {
            return Ok(0);
        }
        let p_end = self.pos_of_live(i - 1)? + 1;
        let occ = self.occ_before(a, p_end);
        Ok(self.d_live[a as usize].rank1(occ))
    }

    /// Live index of the `j`-th occurrence of `a` (1-based `j`).
    pub fn select(&self, a: u32, j: usize) -> Result<usize> {
        if (a as usize) >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        let d = &self.d_live[a as usize];
        let total = d.count_ones();
        if j == 0 || j > total {
            return Err(Error::OccurrenceOutOfRange { occ: j, count: total });
        }
        let occ = d.select1(j).expect("occurrence present");
        let w = &self.w_enc[a as usize];
        let v1 = w.select0(occ + 1).expect("occurrence encoding present");
        let v2 = w.rank1(v1);
        if v2 > 0 {
            let pos1 = w.select1(v2).expect("sample flag present");
            let o_f = w.rank0(pos1);
            let p_f = self.sample_position(a, v2);
            if o_f == occ {
                // The answer itself is sampled.
                return Ok(self.m_live.rank1(p_f));
            }
            // The answer is in a coded section; no staged `a` sits after the
            // last sample before it, so staged occurrences up to the sample
            // account for all staged ones before the answer.
            let i0 = self.staged_before(a, p_f + 1);
            let i1 = occ - i0;
            let (t, before) = self.count_idx.find_by_cum(a, i1 as u64 + 1);
            let local_j = i1 - before as usize;
            let v1s = self.sections[t]
                .select(a, local_j + 1)
                .expect("section select");
            let gstat = self.size_idx.prefix(t) as usize + v1s;
            let p = self.r_loc.select1(gstat + 1).expect("static position");
            return Ok(self.m_live.rank1(p));
        }
        // No sample before the answer: nothing staged precedes it either.
        let i1 = occ;
        let (t, before) = self.count_idx.find_by_cum(a, i1 as u64 + 1);
        let local_j = i1 - before as usize;
        let v1s = self.sections[t]
            .select(a, local_j + 1)
            .expect("section select");
        let gstat = self.size_idx.prefix(t) as usize + v1s;
        let p = self.r_loc.select1(gstat + 1).expect("static position");
        Ok(self.m_live.rank1(p))
    }

    /// Physical position of the `v2`-th sampled `a` (1-based `v2`).
    fn sample_position(&self, a: u32, v2: usize) -> usize {
        let mut rem = v2;
        let mut samp_prefix = 0usize;
        for chunk in &self.samples {
            ops_count::bump(1);
            let c = chunk.count(a);
            if rem <= c {
                let k_local = chunk.select(a, rem).expect("sample entry");
                let samp_global = samp_prefix + k_local;
                return self
                    .samp_pos
                    .select1(samp_global + 1)
                    .expect("sample position");
            }
            rem -= c;
            samp_prefix += chunk.len();
        }
        panic!("sample {v2} of symbol {a} missing");
    }

    /// Sample count among the first `i_prime` occurrences of `a` (1-based):
    /// how far into the sample store the occurrence reaches.
    pub fn sel_prime(&self, a: u32, i_prime: usize) -> Result<usize> {
        if (a as usize) >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        let w = &self.w_enc[a as usize];
        let total = w.count_zeros();
        if i_prime == 0 || i_prime > total {
            return Err(Error::OccurrenceOutOfRange {
                occ: i_prime,
                count: total,
            });
        }
        let v1 = w.select0(i_prime).expect("occurrence encoding present");
        Ok(w.rank1(v1))
    }

    /// Inserts `a` before live element `i` (append when `i == len`).
    pub fn insert(&mut self, i: usize, a: u32) -> Result<()> {
        if (a as usize) >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        if i > self.live {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.live,
            });
        }
        let p = if i == self.live {
            self.physical_len()
        } else {
            self.pos_of_live(i)?
        };
        let g = self.occ_before(a, p);
        let (part, off) = self.r_loc.sector_for_insert(p);
        let ai = a as usize;

        self.m_live.insert_in_sector(part, off, true);
        self.r_loc.insert_in_sector(part, off, false);
        self.samp_pos.insert_in_sector(part, off, true);

        let s0_local = self.r_loc.sector_ref(part).rank0(off);
        self.staging[part]
            .insert(s0_local, a)
            .expect("staging insert");
        self.s_w[part].insert(s0_local, a);

        let d_local = g - self.d_live[ai].sector_start(part);
        self.d_live[ai].insert_in_sector(part, d_local, true);

        let wpos = {
            let sec = self.w_enc[ai].sector_ref(part);
            if d_local == 0 {
                0
            } else {
                sec.select0(d_local).expect("occurrence boundary") + 1
            }
        };
        self.w_enc[ai].insert_in_sector(part, wpos, true);
        self.w_enc[ai].insert_in_sector(part, wpos + 1, false);

        let k_local = self.samp_pos.sector_ref(part).rank1(off);
        self.samples[part]
            .insert(k_local, a)
            .expect("sample insert");
        self.samp_src.insert_in_sector(part, k_local, false);
        self.pend_drop.insert_in_sector(part, k_local, false);

        self.live += 1;
        maint::note_insert(self, part, off, s0_local, k_local, a, g);
        self.after_update();
        Ok(())
    }

    /// Deletes live element `i`.
    pub fn delete(&mut self, i: usize) -> Result<u32> {
        if i >= self.live {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.live,
            });
        }
        let p = self.pos_of_live(i)?;
        let a = self.symbol_at(p);
        let ai = a as usize;
        let g = self.occ_before(a, p);
        let (part, off) = self.part_of(p);

        if !self.r_loc.get(p) {
            // Staged element.
            if maint::consumed_old_staged(self, part, off) {
                // Mid-migration and already copied: keep it physically and
                // mark it dead; the swap turns it into a section ghost.
                self.m_live.set(p, false);
                self.d_live[ai].set(g, false);
            } else {
                let s0_local = self.r_loc.sector_ref(part).rank0(off);
                let d_local = g - self.d_live[ai].sector_start(part);
                let wpos = {
                    let sec = self.w_enc[ai].sector_ref(part);
                    if d_local == 0 {
                        0
                    } else {
                        sec.select0(d_local).expect("occurrence boundary") + 1
                    }
                };
                debug_assert!(self.w_enc[ai].sector_ref(part).get(wpos));
                let k_local = self.samp_pos.sector_ref(part).rank1(off);
                debug_assert!(self.samp_pos.get(p));

                maint::note_staged_delete(self, part, off, s0_local, k_local, a, g);

                self.samples[part].delete(k_local).expect("sample delete");
                self.samp_src.remove_in_sector(part, k_local);
                self.pend_drop.remove_in_sector(part, k_local);
                self.w_enc[ai].remove_in_sector(part, wpos);
                self.w_enc[ai].remove_in_sector(part, wpos);
                self.d_live[ai].remove_in_sector(part, d_local);
                self.staging[part].delete(s0_local).expect("staging delete");
                self.s_w[part].remove(s0_local);
                self.samp_pos.remove_in_sector(part, off);
                self.r_loc.remove_in_sector(part, off);
                self.m_live.remove_in_sector(part, off);
            }
        } else {
            // Section element: mark dead, never unbuild.
            self.m_live.set(p, false);
            self.d_live[ai].set(g, false);
            let i1 = self.r_loc.rank1(p);
            let (t, local) = self.static_locate(i1);
            let ell = self.spoil[t].ell();
            let meta = local / ell.max(1);
            if self.spoil[t].note_delete(meta) {
                let liv = self.meta_survivors(t, meta);
                self.spoil[t].set_chain(meta, &liv);
            }
            maint::note_static_ghost(self, part, a, g);
        }
        self.live -= 1;
        self.after_update();
        Ok(a)
    }

    /// Surviving symbols of meta `meta` in section `t`.
    pub(crate) fn meta_survivors(&self, t: usize, meta: usize) -> Vec<u32> {
        let ell = self.spoil[t].ell().max(1);
        let size = self.sections[t].len();
        let lo = meta * ell;
        let hi = (lo + ell).min(size);
        if lo >= hi {
            return Vec::new();
        }
        let syms = self.sections[t].extract(lo, hi - lo).expect("meta decode");
        let base = self.size_idx.prefix(t) as usize;
        let mut out = Vec::new();
        for (j, &s) in syms.iter().enumerate() {
            let p = self
                .r_loc
                .select1(base + lo + j + 1)
                .expect("static position");
            if self.m_live.get(p) {
                out.push(s);
            }
        }
        out
    }

    /// Runs one maintenance quantum of roughly `budget` basic operations.
    pub fn maintenance_step(&mut self, budget: u64) -> Result<PhaseKind> {
        maint::step(self, budget)
    }

    /// Current maintenance phase.
    pub fn phase(&self) -> PhaseKind {
        self.maint.kind()
    }

    /// Drives maintenance and deferred unsampling to a fixpoint: everything
    /// staged is absorbed into sections and every dead mark is purged.
    pub fn quiesce(&mut self) -> Result<()> {
        maint::quiesce(self)
    }

    fn after_update(&mut self) {
        let hi = (self.n0 * 2).max(64);
        if self.live > hi || (self.n0 > 128 && self.live * 2 < self.n0) {
            self.full_rebuild().expect("rebuild");
            return;
        }
        maint::after_update(self);
    }

    /// Synchronous rebuild from scratch around the current live content.
    pub(crate) fn full_rebuild(&mut self) -> Result<()> {
        let syms = self.extract(0, self.live)?;
        let fresh = CompressedSeq::from_symbols(&syms, self.sigma, &self.cfg)?;
        *self = fresh;
        Ok(())
    }

    /// Live symbols `[i, i + len)`.
    pub fn extract(&self, i: usize, len: usize) -> Result<Vec<u32>> {
        extract::extract(self, i, len)
    }

    /// Space and compressibility snapshot. `k` defaults to the configured
    /// context order.
    pub fn space_report(&self) -> Result<SpaceReport> {
        let k = self.cfg.context_order;
        let syms = self.extract(0, self.live)?;
        let h0 = entropy::h0(&syms);
        let hk = entropy::hk(&syms, k);
        let mut breakdown: Vec<(&'static str, u64)> = Vec::new();
        let sect_bits = |v: &SectoredBitVec| -> u64 {
            (0..v.sector_count())
                .map(|s| v.sector_ref(s).serialized_bits() as u64)
                .sum()
        };
        breakdown.push(("live-marks", sect_bits(&self.m_live)));
        breakdown.push(("location-marks", sect_bits(&self.r_loc)));
        breakdown.push(("sample-marks", sect_bits(&self.samp_pos)));
        breakdown.push(("sample-source", sect_bits(&self.samp_src)));
        breakdown.push(("sample-drops", sect_bits(&self.pend_drop)));
        breakdown.push((
            "occurrence-marks",
            self.d_live.iter().map(sect_bits).sum(),
        ));
        breakdown.push(("sample-links", self.w_enc.iter().map(sect_bits).sum()));
        breakdown.push((
            "staging",
            self.staging.iter().map(|c| c.serialized_bits()).sum(),
        ));
        breakdown.push((
            "samples",
            self.samples.iter().map(|c| c.serialized_bits()).sum(),
        ));
        let mut bits_per_section = Vec::with_capacity(self.r);
        for s in &self.sections {
            bits_per_section.push(serial::static_bits(s)?);
        }
        breakdown.push(("sections", bits_per_section.iter().sum()));
        breakdown.push(("section-tallies", self.count_idx.bits_used() + (self.size_idx.len() as u64 + 1) * 64));
        breakdown.push(("staging-words", self.s_w.iter().map(|w| w.bits_used()).sum()));
        breakdown.push(("deletion-books", self.spoil.iter().map(|b| b.bits_used()).sum()));
        let bits_total = breakdown.iter().map(|(_, b)| *b).sum();
        Ok(SpaceReport {
            n: self.live,
            bits_total,
            bits_per_section,
            h0,
            hk,
            k,
            breakdown,
        })
    }

    /// Size and shape statistics of every static section, in section order.
    pub fn section_stats(&self) -> Result<Vec<crate::sseq::StaticStats>> {
        self.sections.iter().map(|s| s.stats()).collect()
    }

    /// Serializes into `w`. Maintenance is driven to a fixpoint first so no
    /// in-flight copy state needs an on-disk representation.
    pub fn save<W: std::io::Write>(&mut self, w: &mut W) -> Result<()> {
        self.quiesce()?;
        serial::save(self, w)
    }

    /// Reads a sequence serialized by [`CompressedSeq::save`].
    pub fn load<R: std::io::Read>(r: &mut R, cfg: &CoreConfig) -> Result<Self> {
        serial::load(r, cfg)
    }

    /// Full structural audit; `Err` means an internal inconsistency.
    pub fn validate(&self) -> Result<()> {
        self.validate_impl()
    }

    fn validate_impl(&self) -> Result<()> {
        let r = self.r;
        let fail = |m: String| Err(Error::AuditFailed(m));
        if self.m_live.sector_count() != r
            || self.r_loc.sector_count() != r
            || self.samp_pos.sector_count() != r
            || self.samp_src.sector_count() != r
            || self.pend_drop.sector_count() != r
            || self.staging.len() != r
            || self.samples.len() != r
            || self.sections.len() != r
            || self.s_w.len() != r
            || self.spoil.len() != r
        {
            return fail("component part counts differ".into());
        }
        if self.d_live.len() != self.sigma || self.w_enc.len() != self.sigma {
            return fail("per-symbol family sizes differ".into());
        }
        if self.m_live.count_ones() != self.live {
            return fail(format!(
                "live count {} vs live marks {}",
                self.live,
                self.m_live.count_ones()
            ));
        }
        let mut d_live_total = 0usize;
        for a in 0..self.sigma {
            d_live_total += self.d_live[a].count_ones();
        }
        if d_live_total != self.live {
            return fail(format!(
                "occurrence live marks {d_live_total} vs live {}",
                self.live
            ));
        }
        for s in 0..r {
            let plen = self.m_live.sector_len(s);
            if self.r_loc.sector_len(s) != plen || self.samp_pos.sector_len(s) != plen {
                return fail(format!("part {s}: position-space lengths differ"));
            }
            let rl = self.r_loc.sector_ref(s);
            if rl.count_zeros() != self.staging[s].len() {
                return fail(format!("part {s}: staging length mismatch"));
            }
            if rl.count_ones() != self.sections[s].len() {
                return fail(format!("part {s}: section length mismatch"));
            }
            if self.size_idx.get(s) != self.sections[s].len() as u64 {
                return fail(format!("part {s}: size tally mismatch"));
            }
            let k = self.samp_pos.sector_ones(s);
            if self.samples[s].len() != k
                || self.samp_src.sector_len(s) != k
                || self.pend_drop.sector_len(s) != k
            {
                return fail(format!("part {s}: sample-space lengths differ"));
            }
            if self.s_w[s].len() != self.staging[s].len() {
                return fail(format!("part {s}: staging word mirror length"));
            }
            self.s_w[s].validate()?;
            self.staging[s].validate()?;
            self.samples[s].validate()?;
            self.sections[s].validate()?;
            self.spoil[s].validate()?;
            // Per-symbol spaces decompose identically.
            let mut d_len = 0usize;
            let mut w_zero = 0usize;
            for a in 0..self.sigma {
                d_len += self.d_live[a].sector_len(s);
                w_zero += self.w_enc[a].sector_ref(s).count_zeros();
            }
            if d_len != plen || w_zero != plen {
                return fail(format!(
                    "part {s}: occurrence spaces cover {d_len}/{w_zero} of {plen}"
                ));
            }
            for a in (0..self.sigma).step_by((self.sigma / 8).max(1)) {
                let want =
                    self.staging[s].count(a as u32) + self.sections[s].count(a as u32).unwrap_or(0);
                if self.d_live[a].sector_len(s) != want {
                    return fail(format!("part {s} symbol {a}: occurrence count"));
                }
                if self.count_idx.get(a as u32, s) != self.sections[s].count(a as u32)? as u64 {
                    return fail(format!("part {s} symbol {a}: section tally"));
                }
            }
        }
        // Content cross-check, physical position by position: every aligned
        // space must tell the same story about each element.
        let plen = self.physical_len();
        let mut occ_seen = vec![0usize; self.sigma];
        let mut samp_seen = 0usize;
        let mut s0_seen_part = 0usize;
        let mut stat_seen = 0usize;
        let mut part = 0usize;
        let mut part_end = self.m_live.sector_len(0);
        for p in 0..plen {
            while p >= part_end {
                part += 1;
                s0_seen_part = 0;
                part_end += self.m_live.sector_len(part);
            }
            let a = if self.r_loc.get(p) {
                let (t, local) = self.static_locate(stat_seen);
                stat_seen += 1;
                self.sections[t].access(local)?
            } else {
                let sym = self.staging[part].access(s0_seen_part)?;
                if self.s_w[part].get(s0_seen_part) != sym {
                    return fail(format!("position {p}: staging word mirror symbol"));
                }
                if !self.samp_pos.get(p) {
                    return fail(format!("position {p}: staged element unsampled"));
                }
                s0_seen_part += 1;
                sym
            };
            let ai = a as usize;
            let g = occ_seen[ai];
            occ_seen[ai] += 1;
            if self.d_live[ai].get(g) != self.m_live.get(p) {
                return fail(format!("occurrence {g} of {a}: live mark"));
            }
            let w = &self.w_enc[ai];
            let z = w
                .select0(g + 1)
                .ok_or_else(|| Error::AuditFailed(format!("occurrence {g} of {a}: encoding")))?;
            let start = if g == 0 {
                0
            } else {
                w.select0(g).expect("previous encoding") + 1
            };
            if z - start > 1 {
                return fail(format!("occurrence {g} of {a}: malformed encoding"));
            }
            if (z > start) != self.samp_pos.get(p) {
                return fail(format!("occurrence {g} of {a}: sample link flag"));
            }
            if self.samp_pos.get(p) {
                let got = self.samples_global_access(samp_seen)?;
                if got != a {
                    return fail(format!("position {p}: sample content {got} vs {a}"));
                }
                if self.samp_src.get(samp_seen) != self.r_loc.get(p) {
                    return fail(format!("position {p}: sample source flag"));
                }
                if self.pend_drop.get(samp_seen) && !self.r_loc.get(p) {
                    return fail(format!("position {p}: staged sample marked for drop"));
                }
                samp_seen += 1;
            }
        }
        if samp_seen != self.samp_pos.count_ones() {
            return fail("sample mark total".into());
        }
        Ok(())
    }

    /// Sample-store symbol at global sample index `k`.
    pub(crate) fn samples_global_access(&self, k: usize) -> Result<u32> {
        let mut rem = k;
        for chunk in &self.samples {
            if rem < chunk.len() {
                return chunk.access(rem);
            }
            rem -= chunk.len();
        }
        Err(Error::OutOfRange {
            pos: k,
            len: self.samples.iter().map(|c| c.len()).sum(),
        })
    }
}

/// Packed-word geometry: bits per symbol and symbols per word.
pub(crate) fn packing_params(sigma: usize, n0: usize) -> (u32, u32) {
    let bits = log2_ceil(sigma.max(2)) as u32;
    let hard = (64 / bits).max(1);
    let cap = ((log2_ceil(n0.max(4)) as u32) / (2 * bits)).clamp(2, hard.max(2));
    let cap = cap.min(hard);
    (bits, cap)
}

/// Append-only bit buffer flushed into a dynamic bitvector word-wise.
struct BitPush {
    words: Vec<u64>,
    len: usize,
}

impl BitPush {
    fn new() -> Self {
        BitPush {
            words: Vec::new(),
            len: 0,
        }
    }

    fn push(&mut self, bit: bool) {
        let w = self.len / 64;
        if w == self.words.len() {
            self.words.push(0);
        }
        if bit {
            self.words[w] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    fn into_bitvec(self) -> DynBitVec {
        let mut v = DynBitVec::new();
        if self.len > 0 {
            v.append_words(&self.words, self.len);
        }
        v
    }
}

impl Default for BitPush {
    fn default() -> Self {
        Self::new()
    }
}
