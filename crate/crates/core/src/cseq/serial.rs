//! Container serialization of the compressed sequence.
//!
//! Layout: a fixed header, then per part the five mark rows, the staging
//! and sample stores and the coded section, then per symbol the occurrence
//! rows, then a trailer magic. Derived indexes (section tallies, packed
//! staging words, deletion books) are rebuilt on load. Saving first drives
//! maintenance to a fixpoint so no in-flight copy state needs a
//! representation on disk.

use std::io::{Read, Write};

use crate::bitvec::{DynBitVec, SectoredBitVec};
use crate::config::CoreConfig;
use crate::dstr::ChunkedString;
use crate::error::{Error, Result};
use crate::sseq::StaticSeq;

use super::counts::{Fenwick, SectionCounts};
use super::maint::{self, MaintState};
use super::swords::{PackedWords, SpoilBook};
use super::{packing_params, CompressedSeq};

const MAGIC: &[u8; 4] = b"SDSQ";
const TRAILER: &[u8; 4] = b"QSDS";
const VERSION: u16 = 1;

/// Serialized size of one coded section in bits, via a counting sink.
pub(crate) fn static_bits(s: &StaticSeq) -> Result<u64> {
    struct CountSink(u64);
    impl Write for CountSink {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0 += buf.len() as u64;
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let mut c = CountSink(0);
    s.write_into(&mut c)?;
    Ok(c.0 * 8)
}

fn w_u16<W: Write>(w: &mut W, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn r_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn write_bv<W: Write>(w: &mut W, v: &DynBitVec) -> Result<()> {
    let mut buf = Vec::new();
    v.serialize(&mut buf);
    w_u64(w, buf.len() as u64)?;
    w.write_all(&buf)?;
    Ok(())
}

fn read_bv<R: Read>(r: &mut R) -> Result<DynBitVec> {
    let len = r_u64(r)? as usize;
    if len > (1usize << 34) {
        return Err(Error::Corrupt("bit row length out of bounds".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let (v, used) = DynBitVec::deserialize(&buf)?;
    if used != len {
        return Err(Error::Corrupt("bit row trailing bytes".into()));
    }
    Ok(v)
}

/// Writes the sequence. The caller must have brought maintenance to the
/// idle state first (no pending copies, no staged or dead elements needed —
/// any consistent idle state serializes).
pub(crate) fn save<W: Write>(cs: &CompressedSeq, w: &mut W) -> Result<()> {
    if cs.phase() != super::PhaseKind::Idle {
        return Err(Error::AuditFailed("save during active maintenance".into()));
    }
    w.write_all(MAGIC)?;
    w_u16(w, VERSION)?;
    w_u16(w, 0)?; // reserved flags
    w_u32(w, cs.sigma as u32)?;
    w_u32(w, cs.r as u32)?;
    w_u64(w, cs.n0 as u64)?;
    w_u64(w, cs.live as u64)?;
    for t in 0..cs.r {
        write_bv(w, cs.m_live.sector_ref(t))?;
        write_bv(w, cs.r_loc.sector_ref(t))?;
        write_bv(w, cs.samp_pos.sector_ref(t))?;
        write_bv(w, cs.samp_src.sector_ref(t))?;
        write_bv(w, cs.pend_drop.sector_ref(t))?;
        cs.staging[t].write_into(w)?;
        cs.samples[t].write_into(w)?;
        cs.sections[t].write_into(w)?;
    }
    for a in 0..cs.sigma {
        for t in 0..cs.r {
            write_bv(w, cs.d_live[a].sector_ref(t))?;
        }
        for t in 0..cs.r {
            write_bv(w, cs.w_enc[a].sector_ref(t))?;
        }
    }
    w.write_all(TRAILER)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn load<R: Read>(r: &mut R, cfg: &CoreConfig) -> Result<CompressedSeq> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = r_u16(r)?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}")));
    }
    let _flags = r_u16(r)?;
    let sigma = r_u32(r)? as usize;
    let parts = r_u32(r)? as usize;
    let n0 = r_u64(r)? as usize;
    let live = r_u64(r)? as usize;
    if sigma == 0 || parts < 2 || parts > 1 << 20 || sigma > 1 << 28 {
        return Err(Error::Corrupt("implausible header geometry".into()));
    }

    let mut m_secs = Vec::with_capacity(parts);
    let mut r_secs = Vec::with_capacity(parts);
    let mut e_secs = Vec::with_capacity(parts);
    let mut b_secs = Vec::with_capacity(parts);
    let mut p_secs = Vec::with_capacity(parts);
    let mut staging = Vec::with_capacity(parts);
    let mut samples = Vec::with_capacity(parts);
    let mut sections = Vec::with_capacity(parts);
    for _ in 0..parts {
        m_secs.push(read_bv(r)?);
        r_secs.push(read_bv(r)?);
        e_secs.push(read_bv(r)?);
        b_secs.push(read_bv(r)?);
        p_secs.push(read_bv(r)?);
        staging.push(ChunkedString::read_from(r, cfg)?);
        samples.push(ChunkedString::read_from(r, cfg)?);
        sections.push(StaticSeq::read_from(r)?);
    }
    let mut d_live = Vec::with_capacity(sigma);
    let mut w_enc = Vec::with_capacity(sigma);
    for _ in 0..sigma {
        let mut d = Vec::with_capacity(parts);
        for _ in 0..parts {
            d.push(read_bv(r)?);
        }
        d_live.push(SectoredBitVec::from_parts(d));
        let mut wv = Vec::with_capacity(parts);
        for _ in 0..parts {
            wv.push(read_bv(r)?);
        }
        w_enc.push(SectoredBitVec::from_parts(wv));
    }
    let mut trailer = [0u8; 4];
    r.read_exact(&mut trailer)?;
    if &trailer != TRAILER {
        return Err(Error::Corrupt("bad trailer".into()));
    }

    // Structural checks tying the rows together.
    let corrupt = |m: &str| Err(Error::Corrupt(m.into()));
    let live_marks: usize = m_secs.iter().map(|v| v.count_ones()).sum();
    if live_marks != live {
        return corrupt("live count disagrees with live marks");
    }
    for t in 0..parts {
        let plen = m_secs[t].len();
        if r_secs[t].len() != plen || e_secs[t].len() != plen {
            return corrupt("position rows differ in length");
        }
        if r_secs[t].count_zeros() != staging[t].len() {
            return corrupt("staging store length mismatch");
        }
        if r_secs[t].count_ones() != sections[t].len() {
            return corrupt("section length mismatch");
        }
        let k = e_secs[t].count_ones();
        if samples[t].len() != k || b_secs[t].len() != k || p_secs[t].len() != k {
            return corrupt("sample rows differ in length");
        }
    }
    let occ_total: usize = d_live.iter().map(|v| v.len()).sum();
    if occ_total != m_secs.iter().map(|v| v.len()).sum::<usize>() {
        return corrupt("occurrence rows do not cover all positions");
    }

    // Derived indexes.
    let unary = cfg.count_unary_override.unwrap_or_else(|| {
        let lg = crate::config::log2_ceil(n0.max(4)) as u64;
        (sigma as u64) * lg * lg * lg > n0 as u64
    });
    let mut count_idx = SectionCounts::new(sigma, parts, unary);
    let mut sizes = Vec::with_capacity(parts);
    for (t, sec) in sections.iter().enumerate() {
        sizes.push(sec.len() as u64);
        for a in 0..sigma {
            let c = sec.count(a as u32)? as u64;
            if c > 0 {
                count_idx.set(a as u32, t, c);
            }
        }
    }
    let (wbits, wcap) = packing_params(sigma, n0);
    let s_w: Vec<PackedWords> = staging
        .iter()
        .map(|c| PackedWords::from_symbols(&c.symbols(), wbits, wcap))
        .collect();
    let spoil: Vec<SpoilBook> = sections
        .iter()
        .map(|s| {
            let ell = s.ell();
            SpoilBook::new((s.len() + ell - 1) / ell.max(1), ell, wbits, wcap)
        })
        .collect();

    let mut cs = CompressedSeq {
        cfg: cfg.clone(),
        sigma,
        r: parts,
        n0: n0.max(64),
        live,
        m_live: SectoredBitVec::from_parts(m_secs),
        r_loc: SectoredBitVec::from_parts(r_secs),
        samp_pos: SectoredBitVec::from_parts(e_secs),
        samp_src: SectoredBitVec::from_parts(b_secs),
        pend_drop: SectoredBitVec::from_parts(p_secs),
        staging,
        samples,
        sections,
        d_live,
        w_enc,
        size_idx: Fenwick::from_values(&sizes),
        count_idx,
        s_w,
        spoil,
        maint: MaintState::idle(),
    };
    // Deletion books carry per-block survivor chains; rebuild them wherever
    // dead marks were serialized.
    for t in 0..cs.r {
        if cs.m_live.sector_ones(t) != cs.m_live.sector_len(t) {
            let syms = cs.sections[t].extract(0, cs.sections[t].len())?;
            maint::rebuild_book(&mut cs, t, &syms);
        }
    }
    Ok(cs)
}
