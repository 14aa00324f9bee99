//! Bulk extraction of a live range.
//!
//! Runs along physical positions in 64-bit windows of the live and location
//! marks. Section symbols stream through a decode buffer refilled in large
//! chunks, staged symbols come from the packed staging words, and dead
//! positions are consumed without being emitted. This keeps per-symbol cost
//! near the raw decode rate instead of paying a full positional lookup for
//! every element.

use crate::error::{Error, Result};
use crate::ops_count;

use super::CompressedSeq;

/// Section symbols decoded per refill.
const DECODE_CHUNK: usize = 256;

pub(crate) fn extract(cs: &CompressedSeq, i: usize, len: usize) -> Result<Vec<u32>> {
    if i.checked_add(len).map_or(true, |e| e > cs.live) {
        return Err(Error::OutOfRange {
            pos: i.saturating_add(len),
            len: cs.live,
        });
    }
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return Ok(out);
    }
    let p0 = cs.pos_of_live(i)?;
    let (first_part, first_off) = cs.part_of(p0);
    'parts: for part in first_part..cs.r {
        let plen = cs.m_live.sector_len(part);
        let mut local = if part == first_part { first_off } else { 0 };
        if local >= plen {
            continue;
        }
        let m_sec = cs.m_live.sector_ref(part);
        let r_sec = cs.r_loc.sector_ref(part);
        let mut s0 = r_sec.rank0(local);
        let mut stat = r_sec.rank1(local);
        let sec_len = cs.sections[part].len();
        let mut buf: Vec<u32> = Vec::new();
        let mut buf_start = 0usize;
        while local < plen {
            ops_count::bump(1);
            let w = (plen - local).min(64);
            let m_word = m_sec.get_bits_at(local, w);
            let r_word = r_sec.get_bits_at(local, w);
            for j in 0..w {
                let sym = if r_word >> j & 1 == 1 {
                    if stat >= buf_start + buf.len() {
                        let take = DECODE_CHUNK.min(sec_len - stat);
                        buf = cs.sections[part].extract(stat, take)?;
                        buf_start = stat;
                    }
                    let s = buf[stat - buf_start];
                    stat += 1;
                    s
                } else {
                    let s = cs.s_w[part].get(s0);
                    s0 += 1;
                    s
                };
                if m_word >> j & 1 == 1 {
                    out.push(sym);
                    if out.len() == len {
                        break 'parts;
                    }
                }
            }
            local += w;
        }
    }
    if out.len() != len {
        return Err(Error::AuditFailed(format!(
            "extraction produced {} of {} symbols",
            out.len(),
            len
        )));
    }
    Ok(out)
}
