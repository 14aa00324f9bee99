//! Background maintenance of the compressed sequence.
//!
//! Two phases run as a cycle, one part at a time, interleaved with updates:
//!
//! - **Migrate**: staged symbols of a part are folded into a rebuilt coded
//!   section. A copy of the location marks is fed behind a frontier (staged
//!   bits substituted to "section"), the new section is built from the
//!   gathered symbols, and a fresh staging store keeps only elements
//!   inserted while the walk ran. Sample entries of moved elements are
//!   kept so lookups stay consistent; every `r`-th moved occurrence stays
//!   sampled for good, the rest get a drop flag and are unsampled lazily
//!   afterwards.
//! - **Purge**: a part is rewritten without its dead elements. Live marks,
//!   location marks and sample marks are protocol copies keyed on liveness
//!   (sample marks substituted with a fresh every-`r`-th sampling); the
//!   per-symbol occurrence structures, the sample store and its flag rows
//!   are rebuilt by hand in walk order and swapped in wholesale.
//!
//! Edits behind a frontier are folded into the in-flight copies (the bit
//! protocol logs them; hand-built copies are patched through position
//! maps), edits ahead are picked up when the walk reaches them. Each phase
//! gets a per-update operation budget sized so it finishes well before the
//! staging store or the dead count could double again.

use crate::bitvec::{CopyStage, DynBitVec};
use crate::dstr::ChunkedString;
use crate::error::Result;
use crate::ops_count;
use crate::sseq::StaticSeqBuilder;

use super::swords::{PackedWords, SpoilBook};
use super::{packing_params, CompressedSeq};

/// Coarse maintenance state, for progress reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Idle,
    Migrate,
    Purge,
}

/// Elements consumed per walk micro-action; at most 64 so the per-batch
/// masks fit one word.
const WALK_BATCH: usize = 8;
/// Builder work units per micro-action.
const BUILD_QUANTUM: u64 = 64;
/// Protocol-copy replay quantum per micro-action.
const COPY_QUANTUM: usize = 4;
/// Static symbols prefetched per decode call during walks.
const PREFETCH: usize = 256;

pub(crate) struct MaintState {
    phase: Phase,
    budget: u64,
}

impl MaintState {
    pub(crate) fn idle() -> Self {
        MaintState {
            phase: Phase::Idle,
            budget: 64,
        }
    }

    pub(crate) fn kind(&self) -> PhaseKind {
        match self.phase {
            Phase::Idle => PhaseKind::Idle,
            Phase::Migrate(_) => PhaseKind::Migrate,
            Phase::Purge(_) => PhaseKind::Purge,
        }
    }
}

enum Phase {
    Idle,
    Migrate(Box<MigState>),
    Purge(Box<PurState>),
}

struct MigState {
    sec: usize,
    active: bool,
    building: bool,
    builder: Option<StaticSeqBuilder>,
    /// Part-position space: 1 = inserted while this part was being walked.
    new_marks: DynBitVec,
    /// Replacement staging store: elements that stay staged.
    s0_new: ChunkedString,
    /// Physical staging index -> already placed in `s0_new`.
    s0_map: DynBitVec,
    gathered: Vec<u32>,
    gath_cnt: Vec<u32>,
    /// Per-symbol moved-occurrence counters; every `r`-th stays sampled.
    moved_cnt: Vec<u32>,
    stat_seen: usize,
    stat_buf: Vec<u32>,
    stat_buf_start: usize,
}

struct PurState {
    sec: usize,
    active: bool,
    building: bool,
    builder: Option<StaticSeqBuilder>,
    gathered: Vec<u32>,
    gath_cnt: Vec<u32>,
    /// Replacement sample store, in walk order.
    s_new: ChunkedString,
    /// Replacement sample source / drop flag rows, aligned with `s_new`.
    b_new: DynBitVec,
    p_new: DynBitVec,
    /// One bit per processed part position: 1 = contributed a sample entry.
    sflag: DynBitVec,
    /// Per symbol: replacement occurrence encoding and live marks.
    w_new: Vec<DynBitVec>,
    d_new: Vec<DynBitVec>,
    /// Per symbol, one bit per processed occurrence: 1 = kept.
    w_map: Vec<DynBitVec>,
    /// Per symbol: fresh sampling phase; `u64::MAX` = not yet computed.
    samp_phase: Vec<u64>,
    stat_seen: usize,
    stat_buf: Vec<u32>,
    stat_buf_start: usize,
}

/// Staging/dead threshold that arms the maintenance cycle.
fn threshold(cs: &CompressedSeq) -> usize {
    (cs.live / (4 * cs.r)).max(8)
}

/// Per-update budget for a phase expected to cost `est` operations: the
/// phase must complete in about half the updates it takes to hit the
/// trigger threshold again.
fn phase_budget(cs: &CompressedSeq, est: u64) -> u64 {
    if let Some(b) = cs.cfg.maint_budget_override {
        return b.max(1);
    }
    let alloc = (cs.live / (4 * cs.r)).max(16) as u64;
    est * 2 / alloc + 64
}

pub(crate) fn after_update(cs: &mut CompressedSeq) {
    let budget = cs
        .cfg
        .maint_budget_override
        .unwrap_or(cs.maint.budget)
        .max(1);
    if !matches!(cs.maint.phase, Phase::Idle) {
        step(cs, budget).expect("maintenance step");
        return;
    }
    if cs.staged_count() >= threshold(cs) || cs.ghost_count() >= threshold(cs) {
        start_migrate(cs);
        step(cs, budget).expect("maintenance step");
    } else {
        drain_pending(cs, 2);
    }
}

fn start_migrate(cs: &mut CompressedSeq) {
    let mut est = 0u64;
    for s in 0..cs.r {
        if !cs.staging[s].is_empty() {
            est += 48 * cs.m_live.sector_len(s) as u64 + 1024;
        }
        let zeros = cs.m_live.sector_len(s) - cs.m_live.sector_ones(s);
        if zeros > 0 {
            est += 48 * cs.m_live.sector_len(s) as u64 + 64 * cs.sigma as u64 + 1024;
        }
    }
    cs.maint.budget = phase_budget(cs, est);
    cs.maint.phase = Phase::Migrate(Box::new(MigState {
        sec: 0,
        active: false,
        building: false,
        builder: None,
        new_marks: DynBitVec::new(),
        s0_new: ChunkedString::new(cs.sigma, &cs.cfg),
        s0_map: DynBitVec::new(),
        gathered: Vec::new(),
        gath_cnt: Vec::new(),
        moved_cnt: Vec::new(),
        stat_seen: 0,
        stat_buf: Vec::new(),
        stat_buf_start: 0,
    }));
}

fn start_purge(cs: &mut CompressedSeq) {
    let any = (0..cs.r).any(|s| cs.m_live.sector_len(s) != cs.m_live.sector_ones(s));
    if !any {
        return;
    }
    cs.maint.phase = Phase::Purge(Box::new(PurState {
        sec: 0,
        active: false,
        building: false,
        builder: None,
        gathered: Vec::new(),
        gath_cnt: Vec::new(),
        s_new: ChunkedString::new(cs.sigma, &cs.cfg),
        b_new: DynBitVec::new(),
        p_new: DynBitVec::new(),
        sflag: DynBitVec::new(),
        w_new: Vec::new(),
        d_new: Vec::new(),
        w_map: Vec::new(),
        samp_phase: Vec::new(),
        stat_seen: 0,
        stat_buf: Vec::new(),
        stat_buf_start: 0,
    }));
}

/// Runs maintenance for roughly `budget` basic operations. At least one
/// micro-action runs per call, so progress is guaranteed at any budget.
pub(crate) fn step(cs: &mut CompressedSeq, budget: u64) -> Result<PhaseKind> {
    let start = ops_count::get();
    drain_pending(cs, 2);
    while !matches!(cs.maint.phase, Phase::Idle) {
        micro(cs)?;
        if ops_count::get().wrapping_sub(start) >= budget {
            break;
        }
    }
    Ok(cs.maint.kind())
}

/// One atomic micro-action of the active phase.
fn micro(cs: &mut CompressedSeq) -> Result<()> {
    let mut ph = std::mem::replace(&mut cs.maint.phase, Phase::Idle);
    let phase_done = match &mut ph {
        Phase::Idle => true,
        Phase::Migrate(st) => migrate_micro(cs, st)?,
        Phase::Purge(st) => purge_micro(cs, st)?,
    };
    if !phase_done {
        cs.maint.phase = ph;
        return Ok(());
    }
    if let Phase::Migrate(_) = ph {
        start_purge(cs);
    }
    Ok(())
}

/// Forces maintenance and deferred unsampling to completion.
pub(crate) fn quiesce(cs: &mut CompressedSeq) -> Result<()> {
    loop {
        while !matches!(cs.maint.phase, Phase::Idle) {
            step(cs, u64::MAX / 2)?;
        }
        while cs.pend_drop.count_ones() > 0 {
            drain_pending(cs, 64);
        }
        if cs.staged_count() == 0 && cs.ghost_count() == 0 {
            break;
        }
        start_migrate(cs);
    }
    for s in 0..cs.r {
        cs.staging[s].quiesce();
        cs.samples[s].quiesce();
    }
    Ok(())
}

// === migrate ===

fn migrate_micro(cs: &mut CompressedSeq, st: &mut MigState) -> Result<bool> {
    if !st.active {
        while st.sec < cs.r && cs.staging[st.sec].is_empty() {
            st.sec += 1;
        }
        if st.sec >= cs.r {
            return Ok(true);
        }
        begin_migrate_section(cs, st)?;
        return Ok(false);
    }
    if !st.building {
        walk_migrate_batch(cs, st)?;
        return Ok(false);
    }
    let mut all_done = true;
    for v in [&mut cs.r_loc, &mut cs.samp_src, &mut cs.pend_drop] {
        if v.copy_stage() != Some(CopyStage::Done) && v.copy_step(COPY_QUANTUM)? != CopyStage::Done
        {
            all_done = false;
        }
    }
    let b = st.builder.as_mut().expect("builder present");
    if !b.is_done() {
        b.step(BUILD_QUANTUM);
        return Ok(false);
    }
    if !all_done {
        return Ok(false);
    }
    swap_migrate(cs, st)?;
    st.sec += 1;
    st.active = false;
    st.building = false;
    Ok(st.sec >= cs.r)
}

fn begin_migrate_section(cs: &mut CompressedSeq, st: &mut MigState) -> Result<()> {
    let sec = st.sec;
    cs.r_loc.copy_begin(sec)?;
    cs.samp_src.copy_begin(sec)?;
    cs.pend_drop.copy_begin(sec)?;
    st.new_marks = DynBitVec::zeros(cs.m_live.sector_len(sec));
    st.s0_map = DynBitVec::zeros(cs.staging[sec].len());
    st.s0_new = ChunkedString::new(cs.sigma, &cs.cfg);
    st.gathered = Vec::with_capacity(cs.m_live.sector_len(sec));
    st.gath_cnt = vec![0u32; cs.sigma];
    st.moved_cnt = vec![0u32; cs.sigma];
    st.stat_seen = 0;
    st.stat_buf.clear();
    st.stat_buf_start = 0;
    st.builder = None;
    st.building = false;
    st.active = true;
    Ok(())
}

fn walk_migrate_batch(cs: &mut CompressedSeq, st: &mut MigState) -> Result<()> {
    let sec = st.sec;
    let live_len = cs.r_loc.sector_len(sec);
    let consumed = cs.r_loc.copy_consumed().expect("active copy");
    if consumed >= live_len {
        st.builder = Some(StaticSeqBuilder::new(&st.gathered, cs.sigma, &cs.cfg)?);
        st.building = true;
        return Ok(());
    }
    let batch = WALK_BATCH.min(live_len - consumed);
    let consumed_b = cs.samp_src.copy_consumed().expect("active copy");
    // Final values for every slot: the feeds below substitute fully, so
    // unchanged slots carry their current live value.
    let mut r_word = 0u64;
    let mut b_word = 0u64;
    let mut p_word = 0u64;
    let mut b_cnt = 0usize;

    {
        let r_sec = cs.r_loc.sector_ref(sec);
        let e_sec = cs.samp_pos.sector_ref(sec);
        let b_sec = cs.samp_src.sector_ref(sec);
        let p_sec = cs.pend_drop.sector_ref(sec);
        for j in 0..batch {
            ops_count::bump(2);
            let local = consumed + j;
            let r_bit = r_sec.get(local);
            let e_bit = e_sec.get(local);
            if r_bit {
                // Section element, dead or alive: carried as-is.
                r_word |= 1 << j;
                if st.stat_seen >= st.stat_buf_start + st.stat_buf.len()
                    || st.stat_seen < st.stat_buf_start
                {
                    let size = cs.sections[sec].len();
                    let take = PREFETCH.min(size - st.stat_seen);
                    st.stat_buf = cs.sections[sec].extract(st.stat_seen, take)?;
                    st.stat_buf_start = st.stat_seen;
                }
                let sym = st.stat_buf[st.stat_seen - st.stat_buf_start];
                st.stat_seen += 1;
                st.gathered.push(sym);
                st.gath_cnt[sym as usize] += 1;
                if e_bit {
                    // Sample flags keep their current values.
                    if b_sec.get(consumed_b + b_cnt) {
                        b_word |= 1 << b_cnt;
                    }
                    if p_sec.get(consumed_b + b_cnt) {
                        p_word |= 1 << b_cnt;
                    }
                    b_cnt += 1;
                }
            } else {
                debug_assert!(e_bit, "staged elements are always sampled");
                let s0_idx = r_sec.rank0(local);
                if st.new_marks.get(local) {
                    // Inserted during this walk: stays staged, flags stay
                    // zero. Behind-frontier inserts were already placed in
                    // the new store; this one was ahead, so place it now.
                    if !st.s0_map.get(s0_idx) {
                        let sym = cs.staging[sec].access(s0_idx)?;
                        let ci = st.s0_map.rank1(s0_idx);
                        st.s0_new.insert(ci, sym)?;
                        st.s0_map.set(s0_idx, true);
                    }
                    b_cnt += 1;
                } else {
                    // Old staged element: moves into the section.
                    let sym = cs.staging[sec].access(s0_idx)?;
                    st.gathered.push(sym);
                    st.gath_cnt[sym as usize] += 1;
                    r_word |= 1 << j; // location flips to "section"
                    b_word |= 1 << b_cnt; // sample source flips to "section"
                    let mv = st.moved_cnt[sym as usize];
                    st.moved_cnt[sym as usize] += 1;
                    if mv % cs.r as u32 != 0 {
                        p_word |= 1 << b_cnt; // excess sample: drop later
                    }
                    b_cnt += 1;
                }
            }
        }
    }
    let full = if batch >= 64 { !0u64 } else { (1u64 << batch) - 1 };
    cs.r_loc.copy_feed(batch, &[full], Some(&[r_word]))?;
    if b_cnt > 0 {
        let b_full = (1u64 << b_cnt) - 1;
        cs.samp_src.copy_feed(b_cnt, &[b_full], Some(&[b_word]))?;
        cs.pend_drop.copy_feed(b_cnt, &[b_full], Some(&[p_word]))?;
    }
    if consumed + batch >= live_len {
        st.builder = Some(StaticSeqBuilder::new(&st.gathered, cs.sigma, &cs.cfg)?);
        st.building = true;
    }
    Ok(())
}

fn swap_migrate(cs: &mut CompressedSeq, st: &mut MigState) -> Result<()> {
    let sec = st.sec;
    let new_stat = st.builder.take().expect("builder").finish()?;
    cs.r_loc.replace_sector()?;
    cs.samp_src.replace_sector()?;
    cs.pend_drop.replace_sector()?;
    cs.staging[sec] = std::mem::replace(&mut st.s0_new, ChunkedString::new(cs.sigma, &cs.cfg));
    let (bits, cap) = packing_params(cs.sigma, cs.n0);
    cs.s_w[sec] = PackedWords::from_symbols(&cs.staging[sec].symbols(), bits, cap);
    cs.sections[sec] = new_stat;
    cs.size_idx.set(sec, st.gathered.len() as u64);
    for a in 0..cs.sigma as u32 {
        let want = st.gath_cnt[a as usize] as u64;
        if cs.count_idx.get(a, sec) != want {
            cs.count_idx.set(a, sec, want);
        }
    }
    rebuild_book(cs, sec, &st.gathered);
    Ok(())
}

/// Rebuilds the deletion book of section `sec` from the live marks, using
/// `syms` (the section's physical symbols) for survivor chains.
pub(crate) fn rebuild_book(cs: &mut CompressedSeq, sec: usize, syms: &[u32]) {
    let ell = cs.sections[sec].ell().max(1);
    let (bits, cap) = packing_params(cs.sigma, cs.n0);
    let base_size = cs.sections[sec].len();
    let n_metas = (base_size + ell - 1) / ell;
    let mut book = SpoilBook::new(n_metas, ell, bits, cap);
    let m_sec = cs.m_live.sector_ref(sec);
    let r_sec = cs.r_loc.sector_ref(sec);
    let len = m_sec.len();
    if len > 0 && m_sec.count_zeros() > 0 {
        let words = m_sec.extract_words(0, len);
        let mut spoiled: Vec<usize> = Vec::new();
        for (wi, &w) in words.iter().enumerate() {
            ops_count::bump(1);
            let valid = (len - wi * 64).min(64);
            let mut z = !w;
            if valid < 64 {
                z &= (1u64 << valid) - 1;
            }
            while z != 0 {
                let b = z.trailing_zeros() as usize;
                z &= z - 1;
                let local = wi * 64 + b;
                // Every dead position is a section element.
                let s_loc = r_sec.rank1(local);
                let meta = s_loc / ell;
                if book.note_delete(meta) {
                    spoiled.push(meta);
                }
            }
        }
        spoiled.dedup();
        for meta in spoiled {
            let lo = meta * ell;
            let hi = (lo + ell).min(base_size);
            let mut live = Vec::new();
            for s_loc in lo..hi {
                ops_count::bump(1);
                let local = r_sec.select1(s_loc + 1).expect("section position");
                if m_sec.get(local) {
                    live.push(syms[s_loc]);
                }
            }
            book.set_chain(meta, &live);
        }
    }
    cs.spoil[sec] = book;
}

// === purge ===

fn purge_micro(cs: &mut CompressedSeq, st: &mut PurState) -> Result<bool> {
    if !st.active {
        while st.sec < cs.r && cs.m_live.sector_len(st.sec) == cs.m_live.sector_ones(st.sec) {
            st.sec += 1;
        }
        if st.sec >= cs.r {
            return Ok(true);
        }
        begin_purge_section(cs, st)?;
        return Ok(false);
    }
    if !st.building {
        walk_purge_batch(cs, st)?;
        return Ok(false);
    }
    let mut all_done = true;
    for v in [&mut cs.m_live, &mut cs.r_loc, &mut cs.samp_pos] {
        if v.copy_stage() != Some(CopyStage::Done) && v.copy_step(COPY_QUANTUM)? != CopyStage::Done
        {
            all_done = false;
        }
    }
    let b = st.builder.as_mut().expect("builder present");
    if !b.is_done() {
        b.step(BUILD_QUANTUM);
        return Ok(false);
    }
    if !all_done {
        return Ok(false);
    }
    swap_purge(cs, st)?;
    st.sec += 1;
    st.active = false;
    st.building = false;
    Ok(st.sec >= cs.r)
}

fn begin_purge_section(cs: &mut CompressedSeq, st: &mut PurState) -> Result<()> {
    let sec = st.sec;
    cs.m_live.copy_begin(sec)?;
    cs.r_loc.copy_begin(sec)?;
    cs.samp_pos.copy_begin(sec)?;
    st.gathered = Vec::with_capacity(cs.m_live.sector_ones(sec));
    st.gath_cnt = vec![0u32; cs.sigma];
    st.s_new = ChunkedString::new(cs.sigma, &cs.cfg);
    st.b_new = DynBitVec::new();
    st.p_new = DynBitVec::new();
    st.sflag = DynBitVec::new();
    st.w_new = (0..cs.sigma).map(|_| DynBitVec::new()).collect();
    st.d_new = (0..cs.sigma).map(|_| DynBitVec::new()).collect();
    st.w_map = (0..cs.sigma).map(|_| DynBitVec::new()).collect();
    st.samp_phase = vec![u64::MAX; cs.sigma];
    st.stat_seen = 0;
    st.stat_buf.clear();
    st.stat_buf_start = 0;
    st.builder = None;
    st.building = false;
    st.active = true;
    Ok(())
}

fn walk_purge_batch(cs: &mut CompressedSeq, st: &mut PurState) -> Result<()> {
    let sec = st.sec;
    let live_len = cs.m_live.sector_len(sec);
    let consumed = cs.m_live.copy_consumed().expect("active copy");
    if consumed >= live_len {
        st.builder = Some(StaticSeqBuilder::new(&st.gathered, cs.sigma, &cs.cfg)?);
        st.building = true;
        return Ok(());
    }
    let batch = WALK_BATCH.min(live_len - consumed);
    let mut keep = 0u64;
    let mut e_subst = 0u64;
    let mut kept = 0usize;

    {
        let m_sec = cs.m_live.sector_ref(sec);
        let r_sec = cs.r_loc.sector_ref(sec);
        for j in 0..batch {
            ops_count::bump(2);
            let local = consumed + j;
            let m_bit = m_sec.get(local);
            let r_bit = r_sec.get(local);
            let sym = if r_bit {
                if st.stat_seen >= st.stat_buf_start + st.stat_buf.len()
                    || st.stat_seen < st.stat_buf_start
                {
                    let size = cs.sections[sec].len();
                    let take = PREFETCH.min(size - st.stat_seen);
                    st.stat_buf = cs.sections[sec].extract(st.stat_seen, take)?;
                    st.stat_buf_start = st.stat_seen;
                }
                let s = st.stat_buf[st.stat_seen - st.stat_buf_start];
                st.stat_seen += 1;
                s
            } else {
                debug_assert!(m_bit, "staged elements cannot be dead here");
                cs.staging[sec].access(r_sec.rank0(local))?
            };
            let ai = sym as usize;
            if !m_bit {
                // Dead: dropped from every space.
                st.w_map[ai].push(false);
                st.sflag.push(false);
                continue;
            }
            keep |= 1 << j;
            if r_bit {
                st.gathered.push(sym);
                st.gath_cnt[ai] += 1;
            }
            if st.samp_phase[ai] == u64::MAX {
                let occ_start = cs.d_live[ai].sector_start(sec);
                st.samp_phase[ai] = cs.d_live[ai].rank1(occ_start) as u64;
            }
            let fresh = !r_bit || st.samp_phase[ai] % cs.r as u64 == 0;
            st.samp_phase[ai] += 1;
            if fresh {
                e_subst |= 1 << kept;
                let si = st.s_new.len();
                st.s_new.insert(si, sym)?;
                st.b_new.push(r_bit);
                st.p_new.push(false);
                st.w_new[ai].push(true);
            }
            st.sflag.push(fresh);
            st.w_new[ai].push(false);
            st.w_map[ai].push(true);
            st.d_new[ai].push(true);
            kept += 1;
        }
    }
    let keep_arr = [keep];
    cs.m_live.copy_feed(batch, &keep_arr, None)?;
    cs.r_loc.copy_feed(batch, &keep_arr, None)?;
    cs.samp_pos.copy_feed(batch, &keep_arr, Some(&[e_subst]))?;
    if consumed + batch >= live_len {
        st.builder = Some(StaticSeqBuilder::new(&st.gathered, cs.sigma, &cs.cfg)?);
        st.building = true;
    }
    Ok(())
}

fn swap_purge(cs: &mut CompressedSeq, st: &mut PurState) -> Result<()> {
    let sec = st.sec;
    let new_stat = st.builder.take().expect("builder").finish()?;
    cs.m_live.replace_sector()?;
    cs.r_loc.replace_sector()?;
    cs.samp_pos.replace_sector()?;
    for a in 0..cs.sigma {
        cs.d_live[a].replace_sector_with(sec, std::mem::take(&mut st.d_new[a]));
        cs.w_enc[a].replace_sector_with(sec, std::mem::take(&mut st.w_new[a]));
        ops_count::bump(1);
    }
    cs.samples[sec] = std::mem::replace(&mut st.s_new, ChunkedString::new(cs.sigma, &cs.cfg));
    cs.samp_src
        .replace_sector_with(sec, std::mem::take(&mut st.b_new));
    cs.pend_drop
        .replace_sector_with(sec, std::mem::take(&mut st.p_new));
    cs.sections[sec] = new_stat;
    cs.size_idx.set(sec, st.gathered.len() as u64);
    for a in 0..cs.sigma as u32 {
        let want = st.gath_cnt[a as usize] as u64;
        if cs.count_idx.get(a, sec) != want {
            cs.count_idx.set(a, sec, want);
        }
    }
    rebuild_book(cs, sec, &st.gathered);
    Ok(())
}

// === update notifications ===

/// True when the staged element at `(part, off)` was already consumed by an
/// active migration walk: it exists in the in-flight copies, so it must die
/// lazily and become a section ghost at the swap.
pub(crate) fn consumed_old_staged(cs: &CompressedSeq, part: usize, off: usize) -> bool {
    let Phase::Migrate(st) = &cs.maint.phase else {
        return false;
    };
    if !st.active || st.sec != part || st.new_marks.get(off) {
        return false;
    }
    off < cs.r_loc.copy_consumed().expect("active copy")
}

/// Folds a fresh insertion into any in-flight rebuild of its part. Runs
/// after the live structures were updated, so the copy-frontier counters
/// already include this element whenever it landed behind them.
pub(crate) fn note_insert(
    cs: &mut CompressedSeq,
    part: usize,
    off: usize,
    s0_local: usize,
    k_local: usize,
    a: u32,
    g: usize,
) {
    let mut ph = std::mem::replace(&mut cs.maint.phase, Phase::Idle);
    match &mut ph {
        Phase::Migrate(st) if st.active && st.sec == part => {
            st.new_marks.insert(off, true);
            let behind = off < cs.r_loc.copy_consumed().expect("active copy");
            st.s0_map.insert(s0_local, behind);
            if behind {
                let ci = st.s0_map.rank1(s0_local);
                st.s0_new.insert(ci, a).expect("staging copy insert");
                // The sample-row copies consume in sample order; an insert
                // right at their frontier is invisible to their logs, so
                // feed it through explicitly (the live rows hold zeros for
                // a staged element, which is also what the copy needs).
                for v in [&mut cs.samp_src, &mut cs.pend_drop] {
                    if v.copy_stage() == Some(CopyStage::Copying)
                        && v.copy_consumed() == Some(k_local)
                    {
                        v.copy_feed(1, &[1], None).expect("frontier feed");
                    }
                }
            }
        }
        Phase::Purge(st) if st.active && st.sec == part => {
            if off < cs.m_live.copy_consumed().expect("active copy") {
                // Behind the walk: patch the hand-built stores. Staged
                // elements are always sampled.
                let si = st.sflag.rank1(off);
                st.s_new.insert(si, a).expect("sample copy insert");
                st.b_new.insert(si, false);
                st.p_new.insert(si, false);
                st.sflag.insert(off, true);
                let ai = a as usize;
                let q = g - cs.d_live[ai].sector_start(part);
                let k = st.w_map[ai].rank1(q);
                let wpos = if k == 0 {
                    0
                } else {
                    st.w_new[ai].select0(k).expect("occurrence boundary") + 1
                };
                st.w_new[ai].insert(wpos, true);
                st.w_new[ai].insert(wpos + 1, false);
                st.w_map[ai].insert(q, true);
                st.d_new[ai].insert(k, true);
                if st.samp_phase[ai] != u64::MAX {
                    st.samp_phase[ai] += 1;
                }
            }
        }
        _ => {}
    }
    cs.maint.phase = ph;
}

/// Folds a physical removal of a staged element into any in-flight rebuild
/// of its part. Runs before the live structures are updated.
pub(crate) fn note_staged_delete(
    cs: &mut CompressedSeq,
    part: usize,
    off: usize,
    s0_local: usize,
    _k_local: usize,
    a: u32,
    g: usize,
) {
    let mut ph = std::mem::replace(&mut cs.maint.phase, Phase::Idle);
    match &mut ph {
        Phase::Migrate(st) if st.active && st.sec == part => {
            if st.s0_map.get(s0_local) {
                let ci = st.s0_map.rank1(s0_local);
                st.s0_new.delete(ci).expect("staging copy delete");
            }
            st.s0_map.remove(s0_local);
            st.new_marks.remove(off);
        }
        Phase::Purge(st) if st.active && st.sec == part => {
            if off < cs.m_live.copy_consumed().expect("active copy") {
                debug_assert!(st.sflag.get(off), "staged elements carry samples");
                let si = st.sflag.rank1(off);
                st.s_new.delete(si).expect("sample copy delete");
                st.b_new.remove(si);
                st.p_new.remove(si);
                st.sflag.remove(off);
                let ai = a as usize;
                let q = g - cs.d_live[ai].sector_start(part);
                debug_assert!(st.w_map[ai].get(q));
                let k = st.w_map[ai].rank1(q);
                let wpos = if k == 0 {
                    0
                } else {
                    st.w_new[ai].select0(k).expect("occurrence boundary") + 1
                };
                debug_assert!(st.w_new[ai].get(wpos));
                st.w_new[ai].remove(wpos);
                st.w_new[ai].remove(wpos);
                st.w_map[ai].remove(q);
                st.d_new[ai].remove(k);
                if st.samp_phase[ai] != u64::MAX && st.samp_phase[ai] > 0 {
                    st.samp_phase[ai] -= 1;
                }
            }
        }
        _ => {}
    }
    cs.maint.phase = ph;
}

/// Folds a lazy section-element death into an in-flight purge of its part.
/// Runs after the live structures were updated. Occurrences at or past the
/// walk frontier have no hand-built record yet; the walk itself sees their
/// dead mark.
pub(crate) fn note_static_ghost(cs: &mut CompressedSeq, part: usize, a: u32, g: usize) {
    let mut ph = std::mem::replace(&mut cs.maint.phase, Phase::Idle);
    if let Phase::Purge(st) = &mut ph {
        if st.active && st.sec == part {
            let ai = a as usize;
            let q = g - cs.d_live[ai].sector_start(part);
            if q < st.w_map[ai].len() && st.w_map[ai].get(q) {
                let k = st.w_map[ai].rank1(q);
                st.d_new[ai].set(k, false);
            }
        }
    }
    cs.maint.phase = ph;
}

/// Unsamples up to `k` drop-flagged sample entries, skipping any part whose
/// sample rows are being rebuilt (the rebuild resamples from scratch, which
/// retires those flags wholesale).
pub(crate) fn drain_pending(cs: &mut CompressedSeq, k: usize) {
    let skip = match &cs.maint.phase {
        Phase::Purge(st) if st.active => Some(st.sec),
        _ => None,
    };
    for _ in 0..k {
        let mut found = None;
        let mut samp_prefix = 0usize;
        for s in 0..cs.r {
            ops_count::bump(1);
            if Some(s) != skip && cs.pend_drop.sector_ones(s) > 0 {
                let k_local = cs
                    .pend_drop
                    .sector_ref(s)
                    .select1(1)
                    .expect("pending entry");
                found = Some((s, k_local, samp_prefix));
                break;
            }
            samp_prefix += cs.pend_drop.sector_len(s);
        }
        let Some((s, k_local, samp_prefix)) = found else {
            return;
        };
        let a = cs.samples[s].access(k_local).expect("sample symbol");
        let ai = a as usize;
        let p = cs
            .samp_pos
            .select1(samp_prefix + k_local + 1)
            .expect("sample position");
        debug_assert!(cs.r_loc.get(p), "only section samples carry drop flags");
        let g = cs.occ_before(a, p);
        let d_local = g - cs.d_live[ai].sector_start(s);
        let wpos = {
            let w_sec = cs.w_enc[ai].sector_ref(s);
            if d_local == 0 {
                0
            } else {
                w_sec.select0(d_local).expect("occurrence boundary") + 1
            }
        };
        debug_assert!(cs.w_enc[ai].sector_ref(s).get(wpos));
        cs.w_enc[ai].remove_in_sector(s, wpos);
        cs.samples[s].delete(k_local).expect("sample delete");
        cs.samp_src.remove_in_sector(s, k_local);
        cs.pend_drop.remove_in_sector(s, k_local);
        cs.samp_pos.set(p, false);
    }
}
