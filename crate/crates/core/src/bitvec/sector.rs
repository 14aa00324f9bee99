//! Sectored bit sequence with background copy, split and merge.
//!
//! A sequence split into contiguous sectors, each a [`DynBitVec`]. Global
//! rank/select scan per-sector summaries (sector counts stay small, a few
//! dozen), then query inside one sector.
//!
//! One sector at a time may have a pending copy. The copy is produced over
//! many small steps while updates keep flowing: during the first stage the
//! copy consumes the live sector front to back, and updates landing in the
//! consumed region are logged instead of applied to the copy; during the
//! second stage the logged updates are replayed in position order; when the
//! log drains the copy is synchronized and later updates apply to both sides
//! directly, so the copy stays identical to the live sector until it is
//! swapped in.
//!
//! The log is four aligned bit sequences plus a keep mask:
//! - `u_d`: one slot per consumed live element (0) or tombstone (1); the
//!   i-th live element of the consumed region is the i-th 0-bit.
//! - `u`: 1 marks slots with a pending logged update, in position order.
//! - `t`: one bit per pending update, 1 = insertion, 0 = deletion.
//! - `b_n`: the inserted bit values, aligned with the 1-bits of `t`.
//! - `keep`: 1 if the slot's element is present in the copy. Feeding may
//!   drop or substitute content, which is how callers build modified copies
//!   (the swap-in then applies the modification atomically); dropped slots
//!   get 0 here, and the copy position of slot j is always
//!   `keep.rank1(j) - (pending insertions before j)`.
//!
//! Tombstones need no stored values because the copy trails the live
//! sequence: a pending deletion only names a slot, and a pending insertion
//! carries its bit in `b_n`.

use super::DynBitVec;
use crate::bits;
use crate::error::{Error, Result};

/// Progress of a sector copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyStage {
    /// Consuming the live sector front to back.
    Copying,
    /// Replaying logged updates in position order.
    Synchronizing,
    /// Log drained; updates now apply to both sides.
    Done,
}

/// In-flight copy of one sector.
#[derive(Debug, Clone)]
pub struct SectorCopy {
    target: usize,
    stage: CopyStage,
    copy: DynBitVec,
    u_d: DynBitVec,
    u: DynBitVec,
    t: DynBitVec,
    b_n: DynBitVec,
    keep: DynBitVec,
    /// Set when feeding dropped or substituted content; such a copy is a
    /// deliberate modification and is not expected to equal the live sector.
    modified: bool,
}

impl SectorCopy {
    fn new(target: usize) -> Self {
        SectorCopy {
            target,
            stage: CopyStage::Copying,
            copy: DynBitVec::new(),
            u_d: DynBitVec::new(),
            u: DynBitVec::new(),
            t: DynBitVec::new(),
            b_n: DynBitVec::new(),
            keep: DynBitVec::new(),
            modified: false,
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn stage(&self) -> CopyStage {
        self.stage
    }

    /// Live positions consumed so far; the consumed region is `[0, this)` in
    /// current live coordinates at every moment.
    fn consumed(&self) -> usize {
        self.u_d.count_zeros()
    }

    fn pending(&self) -> usize {
        self.u.count_ones()
    }

    /// Copy position of slot `j`: slots present in the copy before `j`.
    fn copy_pos(&self, j: usize) -> usize {
        let kept = self.keep.rank1(j);
        let upd = self.u.rank1(j);
        kept - self.t.rank1(upd)
    }

    /// Records a live insertion of `bit` before live position `i` of the
    /// target sector. Must run before the live edit.
    fn log_insert(&mut self, i: usize, bit: bool) {
        if self.stage == CopyStage::Copying && i >= self.consumed() {
            return; // ahead of the frontier; a later feed reads it
        }
        let j = if i < self.consumed() {
            self.u_d.select0(i + 1).expect("consumed region mapping")
        } else {
            self.u_d.len()
        };
        if self.stage != CopyStage::Copying {
            // Frontier complete: the copy position is known, apply directly
            // so the replay backlog can only shrink.
            let p = self.copy_pos(j);
            self.copy.insert(p, bit);
            self.u_d.insert(j, false);
            self.u.insert(j, false);
            self.keep.insert(j, true);
            return;
        }
        self.u_d.insert(j, false);
        self.u.insert(j, true);
        self.keep.insert(j, true);
        let t_idx = self.u.rank1(j);
        self.t.insert(t_idx, true);
        let b_idx = self.t.rank1(t_idx);
        self.b_n.insert(b_idx, bit);
    }

    /// Records a live deletion at live position `i`. Must run before the
    /// live edit.
    fn log_delete(&mut self, i: usize) {
        if self.stage == CopyStage::Copying && i >= self.consumed() {
            return;
        }
        let j = self.u_d.select0(i + 1).expect("consumed region mapping");
        if self.u.get(j) {
            // The slot holds a pending insertion (a pending deletion would
            // have tombstoned it out of the 0-bits): the element was born
            // after its region was consumed and dies before replay, so the
            // whole record cancels.
            let t_idx = self.u.rank1(j);
            let b_idx = self.t.rank1(t_idx);
            self.u.remove(j);
            self.u_d.remove(j);
            self.keep.remove(j);
            self.t.remove(t_idx);
            self.b_n.remove(b_idx);
            return;
        }
        if self.stage != CopyStage::Copying {
            let p = self.copy_pos(j);
            if self.keep.get(j) {
                self.copy.remove(p);
            }
            self.u.remove(j);
            self.u_d.remove(j);
            self.keep.remove(j);
            return;
        }
        self.u.set(j, true);
        self.u_d.set(j, true);
        let t_idx = self.u.rank1(j);
        self.t.insert(t_idx, false);
    }

    /// Records a value change at live position `i`. Unlike a delete/insert
    /// pair this never moves the consumed frontier: the position stays live,
    /// so sibling copies walked in lockstep keep their shared frontier.
    fn log_set(&mut self, i: usize, bit: bool) {
        if self.stage == CopyStage::Copying && i >= self.consumed() {
            return; // ahead of the frontier; a later feed reads it
        }
        let j = self.u_d.select0(i + 1).expect("consumed region mapping");
        if self.u.get(j) {
            // Pending insertion: rewrite its payload.
            let t_idx = self.u.rank1(j);
            let b_idx = self.t.rank1(t_idx);
            self.b_n.set(b_idx, bit);
            return;
        }
        if self.stage != CopyStage::Copying {
            if self.keep.get(j) {
                let p = self.copy_pos(j);
                self.copy.set(p, bit);
            }
            return;
        }
        // Consumed slot: retire the copied bit and queue the new value as an
        // adjacent insertion, leaving the live-slot count unchanged.
        self.u.set(j, true);
        self.u_d.set(j, true);
        let t_idx = self.u.rank1(j);
        self.t.insert(t_idx, false);
        self.u_d.insert(j + 1, false);
        self.u.insert(j + 1, true);
        self.keep.insert(j + 1, true);
        let t2 = self.u.rank1(j + 1);
        self.t.insert(t2, true);
        let b2 = self.t.rank1(t2);
        self.b_n.insert(b2, bit);
    }

    /// Replays the front-most logged update onto the copy.
    fn replay_one(&mut self) {
        let Some(j) = self.u.select1(1) else { return };
        let p = self.copy_pos(j);
        if self.t.get(0) {
            let bit = self.b_n.get(0);
            self.copy.insert(p, bit);
            self.u.set(j, false);
            self.t.remove(0);
            self.b_n.remove(0);
        } else {
            if self.keep.get(j) {
                self.copy.remove(p);
            }
            self.u.remove(j);
            self.u_d.remove(j);
            self.keep.remove(j);
            self.t.remove(0);
        }
    }

    fn refresh_stage(&mut self, live_len: usize) {
        if self.stage == CopyStage::Copying && self.consumed() == live_len {
            self.stage = CopyStage::Synchronizing;
        }
        if self.stage == CopyStage::Synchronizing && self.pending() == 0 {
            self.stage = CopyStage::Done;
        }
    }

    pub fn copy_ref(&self) -> &DynBitVec {
        &self.copy
    }
}

/// Bit sequence maintained as contiguous sectors with at most one pending
/// sector copy. Per-sector lengths and one counts are read off the sectors
/// themselves, giving O(1) swap and O(sectors) prefix scans.
#[derive(Debug, Clone, Default)]
pub struct SectoredBitVec {
    sectors: Vec<DynBitVec>,
    pending: Option<SectorCopy>,
}

impl SectoredBitVec {
    /// `r` empty sectors.
    pub fn with_empty_sectors(r: usize) -> Self {
        assert!(r >= 1);
        SectoredBitVec {
            sectors: (0..r).map(|_| DynBitVec::new()).collect(),
            pending: None,
        }
    }

    /// Splits `v` into `r` sectors of near-equal length.
    pub fn from_bitvec(v: &DynBitVec, r: usize) -> Self {
        assert!(r >= 1);
        let n = v.len();
        let mut sectors = Vec::with_capacity(r);
        let mut start = 0usize;
        for s in 0..r {
            let end = n * (s + 1) / r;
            let mut sec = DynBitVec::new();
            if end > start {
                let words = v.extract_words(start, end - start);
                sec.append_words(&words, end - start);
            }
            sectors.push(sec);
            start = end;
        }
        SectoredBitVec { sectors, pending: None }
    }

    pub fn from_parts(parts: Vec<DynBitVec>) -> Self {
        assert!(!parts.is_empty());
        SectoredBitVec {
            sectors: parts,
            pending: None,
        }
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    pub fn len(&self) -> usize {
        self.sectors.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count_ones(&self) -> usize {
        self.sectors.iter().map(|s| s.count_ones()).sum()
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    pub fn sector_len(&self, s: usize) -> usize {
        self.sectors[s].len()
    }

    pub fn sector_ones(&self, s: usize) -> usize {
        self.sectors[s].count_ones()
    }

    /// Global position where sector `s` starts.
    pub fn sector_start(&self, s: usize) -> usize {
        self.sectors[..s].iter().map(|x| x.len()).sum()
    }

    pub fn sector_ref(&self, s: usize) -> &DynBitVec {
        &self.sectors[s]
    }

    /// Sector holding position `pos` for read-style access (strict bound).
    fn locate(&self, pos: usize) -> (usize, usize) {
        let mut cum = 0usize;
        for (s, sec) in self.sectors.iter().enumerate() {
            if pos < cum + sec.len() {
                return (s, pos - cum);
            }
            cum += sec.len();
        }
        panic!("position {pos} out of range {cum}");
    }

    /// Sector receiving an insertion before `pos`: boundary positions land at
    /// the end of the earlier sector.
    fn locate_insert(&self, pos: usize) -> (usize, usize) {
        let mut cum = 0usize;
        for (s, sec) in self.sectors.iter().enumerate() {
            if pos <= cum + sec.len() {
                return (s, pos - cum);
            }
            cum += sec.len();
        }
        panic!("insert position {pos} out of range {cum}");
    }

    pub fn get(&self, pos: usize) -> bool {
        let (s, off) = self.locate(pos);
        self.sectors[s].get(off)
    }

    pub fn rank1(&self, i: usize) -> usize {
        let mut cum = 0usize;
        let mut ones = 0usize;
        for sec in &self.sectors {
            if i <= cum + sec.len() {
                return ones + sec.rank1(i - cum);
            }
            cum += sec.len();
            ones += sec.count_ones();
        }
        assert!(i == cum, "rank prefix {i} out of range {cum}");
        ones
    }

    pub fn rank0(&self, i: usize) -> usize {
        i - self.rank1(i)
    }

    pub fn select1(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return None;
        }
        let mut rem = j;
        let mut cum = 0usize;
        for sec in &self.sectors {
            if rem <= sec.count_ones() {
                return sec.select1(rem).map(|p| cum + p);
            }
            rem -= sec.count_ones();
            cum += sec.len();
        }
        None
    }

    pub fn select0(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return None;
        }
        let mut rem = j;
        let mut cum = 0usize;
        for sec in &self.sectors {
            if rem <= sec.count_zeros() {
                return sec.select0(rem).map(|p| cum + p);
            }
            rem -= sec.count_zeros();
            cum += sec.len();
        }
        None
    }

    pub fn insert(&mut self, pos: usize, bit: bool) {
        let (s, off) = self.locate_insert(pos);
        if let Some(p) = self.pending.as_mut() {
            if p.target == s {
                p.log_insert(off, bit);
            }
        }
        self.sectors[s].insert(off, bit);
    }

    pub fn remove(&mut self, pos: usize) -> bool {
        let (s, off) = self.locate(pos);
        if let Some(p) = self.pending.as_mut() {
            if p.target == s {
                p.log_delete(off);
            }
        }
        self.sectors[s].remove(off)
    }

    pub fn set(&mut self, pos: usize, bit: bool) {
        let (s, off) = self.locate(pos);
        if self.sectors[s].get(off) == bit {
            return;
        }
        if let Some(p) = self.pending.as_mut() {
            if p.target == s {
                p.log_set(off, bit);
            }
        }
        self.sectors[s].set(off, bit);
    }

    /// Sector an insertion before `pos` routes to, plus the in-sector offset.
    /// Boundary positions land at the end of the earlier sector.
    pub fn sector_for_insert(&self, pos: usize) -> (usize, usize) {
        self.locate_insert(pos)
    }

    /// Inserts directly into sector `s` at offset `off`, bypassing the
    /// boundary tie rule. Aligned sibling structures use this so an insertion
    /// routes to the same sector everywhere even when empty neighbouring
    /// sectors make the boundary ambiguous.
    pub fn insert_in_sector(&mut self, s: usize, off: usize, bit: bool) {
        if let Some(p) = self.pending.as_mut() {
            if p.target == s {
                p.log_insert(off, bit);
            }
        }
        self.sectors[s].insert(off, bit);
    }

    /// Removes the bit at offset `off` of sector `s` directly.
    pub fn remove_in_sector(&mut self, s: usize, off: usize) -> bool {
        if let Some(p) = self.pending.as_mut() {
            if p.target == s {
                p.log_delete(off);
            }
        }
        self.sectors[s].remove(off)
    }

    /// Replaces sector `s` wholesale with externally built contents. Must not
    /// race a pending protocol copy of the same sector.
    pub fn replace_sector_with(&mut self, s: usize, v: DynBitVec) {
        if let Some(p) = self.pending.as_ref() {
            assert!(p.target != s, "sector {s} has a pending protocol copy");
        }
        self.sectors[s] = v;
    }

    /// Copies `count` bits starting at `pos`, spanning sectors.
    pub fn extract_words(&self, pos: usize, count: usize) -> Vec<u64> {
        let mut out = vec![0u64; (count + 63) / 64];
        if count == 0 {
            return out;
        }
        let (mut s, mut off) = self.locate(pos);
        let mut done = 0usize;
        while done < count {
            let sec = &self.sectors[s];
            let take = (sec.len() - off).min(count - done);
            let words = sec.extract_words(off, take);
            let mut copied = 0usize;
            while copied < take {
                let w = (take - copied).min(64);
                let chunk = bits::get_bits(&words, copied, w);
                bits::set_bits(&mut out, done + copied, chunk, w);
                copied += w;
            }
            done += take;
            off = 0;
            s += 1;
        }
        out
    }

    // === copy protocol ===

    /// Starts a background copy of sector `s`.
    pub fn copy_begin(&mut self, s: usize) -> Result<()> {
        if let Some(p) = &self.pending {
            return Err(Error::CopyPending(p.target));
        }
        assert!(s < self.sectors.len());
        let mut c = SectorCopy::new(s);
        c.refresh_stage(self.sectors[s].len());
        self.pending = Some(c);
        Ok(())
    }

    pub fn copy_stage(&self) -> Option<CopyStage> {
        self.pending.as_ref().map(|p| p.stage)
    }

    pub fn copy_target(&self) -> Option<usize> {
        self.pending.as_ref().map(|p| p.target)
    }

    pub fn pending_copy(&self) -> Option<&SectorCopy> {
        self.pending.as_ref()
    }

    /// Live positions of the target sector already consumed by the copy.
    pub fn copy_consumed(&self) -> Option<usize> {
        self.pending.as_ref().map(|p| p.consumed())
    }

    /// One increment of background work: consume up to `budget` words of the
    /// live sector, or replay up to `budget` logged updates.
    pub fn copy_step(&mut self, budget: usize) -> Result<CopyStage> {
        let Some(p) = self.pending.as_mut() else {
            return Err(Error::NoCopyReady);
        };
        match p.stage {
            CopyStage::Copying => {
                let live_len = self.sectors[p.target].len();
                let count = (budget * 64).min(live_len - p.consumed());
                if count > 0 {
                    let keep = vec![!0u64; (count + 63) / 64];
                    Self::feed_into(&self.sectors, p, count, &keep, None);
                }
            }
            CopyStage::Synchronizing => {
                for _ in 0..budget {
                    if p.pending() == 0 {
                        break;
                    }
                    p.replay_one();
                }
            }
            CopyStage::Done => {}
        }
        p.refresh_stage(self.sectors[p.target].len());
        Ok(p.stage)
    }

    /// Consumes `count` live bits into the copy under caller control: bit i
    /// of `keep_mask` decides whether the element is retained, and `subst`
    /// (packed, one bit per kept element) overrides retained values. This is
    /// how modified copies are staged for an atomic swap.
    pub fn copy_feed(
        &mut self,
        count: usize,
        keep_mask: &[u64],
        subst: Option<&[u64]>,
    ) -> Result<CopyStage> {
        let Some(p) = self.pending.as_mut() else {
            return Err(Error::NoCopyReady);
        };
        if p.stage != CopyStage::Copying {
            return Err(Error::AuditFailed("feed after frontier completed".into()));
        }
        let live_len = self.sectors[p.target].len();
        assert!(p.consumed() + count <= live_len, "feed past live end");
        Self::feed_into(&self.sectors, p, count, keep_mask, subst);
        p.refresh_stage(live_len);
        Ok(p.stage)
    }

    fn feed_into(
        sectors: &[DynBitVec],
        p: &mut SectorCopy,
        count: usize,
        keep_mask: &[u64],
        subst: Option<&[u64]>,
    ) {
        let live = &sectors[p.target];
        let start = p.consumed();
        let live_words = live.extract_words(start, count);
        let mut kept_bits: Vec<u64> = Vec::with_capacity(count / 64 + 1);
        let mut kept = 0usize;
        let mut full_keep = true;
        for i in 0..count {
            if keep_mask[i / 64] >> (i % 64) & 1 == 1 {
                let bit = match subst {
                    Some(sv) => sv[kept / 64] >> (kept % 64) & 1 == 1,
                    None => live_words[i / 64] >> (i % 64) & 1 == 1,
                };
                if kept % 64 == 0 {
                    kept_bits.push(0);
                }
                if bit {
                    *kept_bits.last_mut().unwrap() |= 1 << (kept % 64);
                }
                kept += 1;
            } else {
                full_keep = false;
            }
        }
        if !full_keep || subst.is_some() {
            p.modified = true;
        }
        let base = p.copy.len();
        let mut done = 0usize;
        while done < kept {
            let w = (kept - done).min(64);
            p.copy
                .insert_bits(base + done, bits::get_bits(&kept_bits, done, w), w);
            done += w;
        }
        let kbase = p.keep.len();
        let mut done = 0usize;
        while done < count {
            let w = (count - done).min(64);
            p.keep
                .insert_bits(kbase + done, bits::get_bits(keep_mask, done, w), w);
            done += w;
        }
        p.u_d.push_run(false, count);
        p.u.push_run(false, count);
    }

    /// Swaps the finished copy in as the live sector.
    pub fn replace_sector(&mut self) -> Result<()> {
        let Some(p) = &self.pending else {
            return Err(Error::NoCopyReady);
        };
        if p.stage != CopyStage::Done {
            return Err(Error::NoCopyReady);
        }
        let p = self.pending.take().unwrap();
        self.sectors[p.target] = p.copy;
        Ok(())
    }

    pub fn abort_copy(&mut self) {
        self.pending = None;
    }

    // === sector geometry ===

    /// Splits sector `s` into two halves in place.
    pub fn split_sector(&mut self, s: usize) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::CopyPending(self.pending.as_ref().unwrap().target));
        }
        let sec = &self.sectors[s];
        let n = sec.len();
        let half = n / 2;
        let mut left = DynBitVec::new();
        let mut right = DynBitVec::new();
        if half > 0 {
            left.append_words(&sec.extract_words(0, half), half);
        }
        if n - half > 0 {
            right.append_words(&sec.extract_words(half, n - half), n - half);
        }
        self.sectors.splice(s..s + 1, [left, right]);
        Ok(())
    }

    /// Merges sectors `s` and `s + 1`.
    pub fn merge_sectors(&mut self, s: usize) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::CopyPending(self.pending.as_ref().unwrap().target));
        }
        assert!(s + 1 < self.sectors.len());
        let right = self.sectors.remove(s + 1);
        let n = right.len();
        if n > 0 {
            let words = right.extract_words(0, n);
            self.sectors[s].append_words(&words, n);
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.sectors.iter().flat_map(|s| s.iter())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sectors.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::AuditFailed(format!("sector {i}: {e}")))?;
        }
        if let Some(p) = &self.pending {
            let live_len = self.sectors[p.target].len();
            if p.u.len() != p.u_d.len() || p.keep.len() != p.u_d.len() {
                return Err(Error::AuditFailed("copy log lengths diverge".into()));
            }
            if p.t.len() != p.u.count_ones() {
                return Err(Error::AuditFailed("type log out of sync".into()));
            }
            if p.b_n.len() != p.t.count_ones() {
                return Err(Error::AuditFailed("value log out of sync".into()));
            }
            match p.stage {
                CopyStage::Copying => {
                    if p.consumed() > live_len {
                        return Err(Error::AuditFailed("frontier past live end".into()));
                    }
                }
                CopyStage::Synchronizing | CopyStage::Done => {
                    if p.consumed() != live_len {
                        return Err(Error::AuditFailed("frontier lost live alignment".into()));
                    }
                }
            }
            if p.stage == CopyStage::Done {
                if p.pending() != 0 {
                    return Err(Error::AuditFailed("done with pending updates".into()));
                }
                if !p.modified && !p.copy.iter().eq(self.sectors[p.target].iter()) {
                    return Err(Error::AuditFailed("finished copy differs from live".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(sv: &mut SectoredBitVec, bits: &[bool]) {
        for (i, &b) in bits.iter().enumerate() {
            sv.insert(i, b);
        }
    }

    fn as_bools(sv: &SectoredBitVec) -> Vec<bool> {
        sv.iter().collect()
    }

    fn lcg(state: &mut u64) -> u64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        *state >> 11
    }

    #[test]
    fn global_queries_span_sectors() {
        let bits: Vec<bool> = (0..5000).map(|i| i % 3 == 0).collect();
        let v = DynBitVec::from_bools(bits.iter().copied());
        let sv = SectoredBitVec::from_bitvec(&v, 7);
        assert_eq!(sv.sector_count(), 7);
        assert_eq!(sv.len(), 5000);
        let mut ones = 0usize;
        for (i, &b) in bits.iter().enumerate() {
            assert_eq!(sv.get(i), b);
            assert_eq!(sv.rank1(i), ones);
            if b {
                ones += 1;
                assert_eq!(sv.select1(ones), Some(i));
            }
        }
        assert_eq!(sv.select1(ones + 1), None);
        sv.validate().unwrap();
    }

    #[test]
    fn quiet_copy_roundtrip() {
        let bits: Vec<bool> = (0..900).map(|i| i % 5 == 2).collect();
        let mut sv = SectoredBitVec::with_empty_sectors(3);
        fill(&mut sv, &bits);
        let before = as_bools(&sv);
        sv.copy_begin(1).unwrap();
        while sv.copy_step(2).unwrap() != CopyStage::Done {}
        sv.validate().unwrap();
        sv.replace_sector().unwrap();
        assert_eq!(as_bools(&sv), before);
        sv.validate().unwrap();
    }

    #[test]
    fn copy_with_interleaved_updates_matches_reference() {
        let mut state = 42u64;
        let mut sv = SectoredBitVec::with_empty_sectors(4);
        let mut reference: Vec<bool> = Vec::new();
        for i in 0..2000 {
            let b = lcg(&mut state) & 1 == 1;
            sv.insert(i, b);
            reference.insert(i, b);
        }
        for target in 0..4 {
            sv.copy_begin(target).unwrap();
            let mut guard = 0;
            loop {
                // Interleave random updates with tiny copy steps.
                for _ in 0..3 {
                    let r = lcg(&mut state);
                    if r % 3 == 0 && !reference.is_empty() {
                        let pos = lcg(&mut state) as usize % reference.len();
                        reference.remove(pos);
                        sv.remove(pos);
                    } else if r % 3 == 1 && !reference.is_empty() {
                        let pos = lcg(&mut state) as usize % reference.len();
                        let b = lcg(&mut state) & 1 == 1;
                        reference[pos] = b;
                        sv.set(pos, b);
                    } else {
                        let pos = lcg(&mut state) as usize % (reference.len() + 1);
                        let b = lcg(&mut state) & 1 == 1;
                        reference.insert(pos, b);
                        sv.insert(pos, b);
                    }
                }
                sv.validate().unwrap();
                if sv.copy_step(1).unwrap() == CopyStage::Done {
                    break;
                }
                guard += 1;
                assert!(guard < 100_000, "copy never finished");
            }
            // A few more updates while Done: both sides must track.
            for _ in 0..25 {
                let pos = lcg(&mut state) as usize % (reference.len() + 1);
                let b = lcg(&mut state) & 1 == 1;
                reference.insert(pos, b);
                sv.insert(pos, b);
                if !reference.is_empty() {
                    let pos = lcg(&mut state) as usize % reference.len();
                    reference.remove(pos);
                    sv.remove(pos);
                }
            }
            sv.validate().unwrap();
            sv.replace_sector().unwrap();
            assert_eq!(as_bools(&sv), reference, "after replacing sector {target}");
            sv.validate().unwrap();
        }
    }

    #[test]
    fn modified_copy_drops_and_substitutes() {
        // Purge-style: drop every 0-bit; the copy should be the 1-bits only.
        let bits: Vec<bool> = (0..640).map(|i| i % 4 != 1).collect();
        let mut sv = SectoredBitVec::with_empty_sectors(2);
        fill(&mut sv, &bits);
        sv.copy_begin(0).unwrap();
        let live_len = sv.sector_len(0);
        let mut fed = 0usize;
        while fed < live_len {
            let step = 100.min(live_len - fed);
            let keep = sv.extract_words(fed, step); // keep exactly the 1-bits
            sv.copy_feed(step, &keep, None).unwrap();
            fed += step;
        }
        while sv.copy_step(8).unwrap() != CopyStage::Done {}
        let expect_ones = sv.sector_ones(0);
        sv.replace_sector().unwrap();
        assert_eq!(sv.sector_len(0), expect_ones);
        assert_eq!(sv.sector_ones(0), expect_ones);
        sv.validate().unwrap();

        // Migrate-style: same length, flipped window.
        let mut sv = SectoredBitVec::with_empty_sectors(1);
        fill(&mut sv, &vec![false; 256]);
        sv.copy_begin(0).unwrap();
        let keep = vec![!0u64; 4];
        let subst = vec![!0u64; 4];
        sv.copy_feed(256, &keep, Some(&subst)).unwrap();
        while sv.copy_step(8).unwrap() != CopyStage::Done {}
        sv.replace_sector().unwrap();
        assert_eq!(sv.count_ones(), 256);
    }

    #[test]
    fn modified_copy_with_interleaved_updates() {
        // Drop all 0-bits while updates add and remove elements mid-feed.
        let mut state = 7u64;
        let mut sv = SectoredBitVec::with_empty_sectors(1);
        let init: Vec<bool> = (0..1200).map(|i| i % 3 != 0).collect();
        fill(&mut sv, &init);
        let mut reference = init.clone();
        // The modification drops exactly the 0-bits known at feed time;
        // track which reference elements those are by position identity.
        let mut live: Vec<(bool, bool)> = reference.iter().map(|&b| (b, b)).collect();
        // (value, kept) pairs: fed content keeps exactly its 1-bits, inserts
        // behind the frontier are always kept, inserts ahead get fed later
        // and so keep only 1-bits too.
        sv.copy_begin(0).unwrap();
        loop {
            let fed = sv.copy_consumed().unwrap();
            if fed >= sv.sector_len(0) {
                break;
            }
            let step = 64.min(sv.sector_len(0) - fed);
            let keep = sv.extract_words(fed, step);
            sv.copy_feed(step, &keep, None).unwrap();
            for _ in 0..2 {
                let r = lcg(&mut state);
                if r % 2 == 0 && !live.is_empty() {
                    let pos = lcg(&mut state) as usize % live.len();
                    live.remove(pos);
                    sv.remove(pos);
                } else {
                    let pos = lcg(&mut state) as usize % (live.len() + 1);
                    let b = lcg(&mut state) & 1 == 1;
                    let behind = pos < sv.copy_consumed().unwrap();
                    live.insert(pos, (b, behind || b));
                    sv.insert(pos, b);
                }
                sv.validate().unwrap();
            }
        }
        while sv.copy_step(4).unwrap() != CopyStage::Done {}
        sv.replace_sector().unwrap();
        let expect: Vec<bool> = live.iter().filter(|e| e.1).map(|e| e.0).collect();
        assert_eq!(as_bools(&sv), expect);
        reference.clear(); // silence unused warning path
        assert!(reference.is_empty());
    }

    #[test]
    fn protocol_errors() {
        let mut sv = SectoredBitVec::with_empty_sectors(2);
        fill(&mut sv, &[true, false, true, true]);
        assert!(matches!(sv.replace_sector(), Err(Error::NoCopyReady)));
        sv.copy_begin(0).unwrap();
        assert!(matches!(sv.copy_begin(1), Err(Error::CopyPending(0))));
        assert!(matches!(sv.replace_sector(), Err(Error::NoCopyReady)));
        sv.abort_copy();
        sv.copy_begin(1).unwrap();
        while sv.copy_step(4).unwrap() != CopyStage::Done {}
        sv.replace_sector().unwrap();
        sv.validate().unwrap();
    }

    #[test]
    fn split_and_merge_preserve_content() {
        let bits: Vec<bool> = (0..2048).map(|i| i % 7 < 3).collect();
        let v = DynBitVec::from_bools(bits.iter().copied());
        let mut sv = SectoredBitVec::from_bitvec(&v, 2);
        sv.split_sector(0).unwrap();
        assert_eq!(sv.sector_count(), 3);
        let first_two = sv.sector_len(0) + sv.sector_len(1);
        assert!(sv.sector_len(0).abs_diff(sv.sector_len(1)) <= 1);
        assert_eq!(first_two, 1024);
        assert_eq!(as_bools(&sv), bits);
        sv.merge_sectors(1).unwrap();
        assert_eq!(sv.sector_count(), 2);
        assert_eq!(as_bools(&sv), bits);
        sv.validate().unwrap();
    }
}
