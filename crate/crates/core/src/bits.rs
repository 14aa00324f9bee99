//! Word-level bit utilities shared by all layers.
//!
//! Select within a byte goes through a precomputed 256x8 table; everything
//! else uses hardware popcount and shifts. The table is built in a `const`
//! context and shared process-wide.

/// `SELECT_IN_BYTE[b][k]` is the 0-based index of the (k+1)-th set bit of the
/// byte `b`, or 8 when `b` has at most `k` set bits.
static SELECT_IN_BYTE: [[u8; 8]; 256] = build_select_table();

const fn build_select_table() -> [[u8; 8]; 256] {
    let mut table = [[8u8; 8]; 256];
    let mut b = 0usize;
    while b < 256 {
        let mut seen = 0usize;
        let mut bit = 0usize;
        while bit < 8 {
            if b & (1 << bit) != 0 {
                table[b][seen] = bit as u8;
                seen += 1;
            }
            bit += 1;
        }
        b += 1;
    }
    table
}

/// Position of the `k`-th (1-based) set bit of `w`. Requires `k >= 1` and
/// `w.count_ones() >= k`.
#[inline]
pub fn select_in_word(w: u64, k: u32) -> u32 {
    debug_assert!(k >= 1 && w.count_ones() >= k);
    let mut remaining = k;
    let mut shift = 0u32;
    loop {
        let byte = ((w >> shift) & 0xff) as usize;
        let ones = byte.count_ones();
        if ones >= remaining {
            return shift + SELECT_IN_BYTE[byte][(remaining - 1) as usize] as u32;
        }
        remaining -= ones;
        shift += 8;
    }
}

/// Position of the `k`-th (1-based) zero bit of `w` within its low `len` bits.
#[inline]
pub fn select_zero_in_word(w: u64, len: u32, k: u32) -> u32 {
    let masked = if len == 64 { !w } else { !w & ((1u64 << len) - 1) };
    select_in_word(masked, k)
}

/// Reads `width` bits (`width <= 64`) starting at absolute bit `pos` from a
/// packed little-endian word slice.
#[inline]
pub fn get_bits(words: &[u64], pos: usize, width: usize) -> u64 {
    debug_assert!(width <= 64);
    if width == 0 {
        return 0;
    }
    let word = pos / 64;
    let off = pos % 64;
    let lo = words[word] >> off;
    let taken = 64 - off;
    let val = if taken >= width {
        lo
    } else {
        lo | (words[word + 1] << taken)
    };
    if width == 64 {
        val
    } else {
        val & ((1u64 << width) - 1)
    }
}

/// Writes the low `width` bits of `val` at absolute bit `pos` in a packed
/// word slice. The destination bits must already be zero or get overwritten.
#[inline]
pub fn set_bits(words: &mut [u64], pos: usize, val: u64, width: usize) {
    debug_assert!(width <= 64);
    if width == 0 {
        return;
    }
    let val = if width == 64 {
        val
    } else {
        val & ((1u64 << width) - 1)
    };
    let word = pos / 64;
    let off = pos % 64;
    let mask = if width == 64 { !0u64 } else { (1u64 << width) - 1 };
    words[word] = (words[word] & !(mask << off)) | (val << off);
    let taken = 64 - off;
    if taken < width {
        let hi_width = width - taken;
        let hi_mask = (1u64 << hi_width) - 1;
        words[word + 1] = (words[word + 1] & !hi_mask) | (val >> taken);
    }
}

/// Growable packed bit buffer with fixed-position reads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    words: Vec<u64>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        BitBuf::default()
    }

    /// Rebuilds a buffer from serialized words; bits past `len` in the last
    /// word are cleared so equality and hashing stay canonical.
    pub fn from_raw(mut words: Vec<u64>, len: usize) -> Self {
        words.truncate((len + 63) / 64);
        words.resize((len + 63) / 64, 0);
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        BitBuf { words, len }
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitBuf {
            words: Vec::with_capacity(bits / 64 + 1),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bits(&mut self, val: u64, width: usize) {
        debug_assert!(width <= 64);
        let need = (self.len + width + 63) / 64;
        if self.words.len() < need {
            self.words.resize(need, 0);
        }
        set_bits(&mut self.words, self.len, val, width);
        self.len += width;
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.push_bits(bit as u64, 1);
    }

    pub fn get(&self, pos: usize) -> bool {
        debug_assert!(pos < self.len);
        self.words[pos / 64] >> (pos % 64) & 1 == 1
    }

    pub fn get_bits(&self, pos: usize, width: usize) -> u64 {
        debug_assert!(pos + width <= self.len);
        get_bits(&self.words, pos, width)
    }

    pub fn set_bits_at(&mut self, pos: usize, val: u64, width: usize) {
        debug_assert!(pos + width <= self.len);
        set_bits(&mut self.words, pos, val, width);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Serialized payload size in bits, counting whole words.
    pub fn serialized_bits(&self) -> usize {
        ((self.len + 63) / 64) * 64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_in_word_matches_scan() {
        let samples = [
            0x0000_0000_0000_0001u64,
            0x8000_0000_0000_0000,
            0xffff_ffff_ffff_ffff,
            0xaaaa_aaaa_aaaa_aaaa,
            0x0123_4567_89ab_cdef,
        ];
        for &w in &samples {
            let mut k = 0;
            for bit in 0..64 {
                if w >> bit & 1 == 1 {
                    k += 1;
                    assert_eq!(select_in_word(w, k), bit, "w={w:#x} k={k}");
                }
            }
        }
    }

    #[test]
    fn get_set_bits_roundtrip() {
        let mut words = vec![0u64; 4];
        set_bits(&mut words, 5, 0b1011, 4);
        set_bits(&mut words, 62, 0xff, 8);
        set_bits(&mut words, 120, u64::MAX, 64);
        assert_eq!(get_bits(&words, 5, 4), 0b1011);
        assert_eq!(get_bits(&words, 62, 8), 0xff);
        assert_eq!(get_bits(&words, 120, 64), u64::MAX);
        assert_eq!(get_bits(&words, 0, 5), 0);
    }

    #[test]
    fn bitbuf_push_and_read() {
        let mut buf = BitBuf::new();
        for i in 0..200u64 {
            buf.push_bits(i % 7, 3);
        }
        assert_eq!(buf.len(), 600);
        for i in 0..200u64 {
            assert_eq!(buf.get_bits(i as usize * 3, 3), i % 7);
        }
    }
}
