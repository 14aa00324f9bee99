//! Canonical prefix code over wide values with a reserved escape codeword.
//!
//! Codes are built from observed frequencies with a deterministic tie-break
//! (values ascending, internal nodes in creation order), so the same input
//! always yields the same table. The escape codeword participates with
//! weight 1; encoding a value absent from the table emits the escape and the
//! caller appends the raw value.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::bits::BitBuf;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct HuffCode {
    /// Values in canonical order (code lengths nondecreasing). The entry at
    /// `esc_slot` is the escape; its value field is unused and stored as 0.
    vals: Vec<u64>,
    lens: Vec<u8>,
    esc_slot: u32,
    max_len: u8,
    // Indexed by code length 1..=max_len.
    first_code: Vec<u64>,
    first_idx: Vec<u32>,
    cnt: Vec<u32>,
    enc: HashMap<u64, (u64, u8)>,
    esc_code: (u64, u8),
}

impl HuffCode {
    /// Builds the code for the given `(value, weight)` pairs. Values must be
    /// distinct; zero weights are treated as 1.
    pub fn build(freqs: &[(u64, u64)]) -> HuffCode {
        assert!(!freqs.is_empty());
        let mut items: Vec<(u64, u64)> = freqs.to_vec();
        items.sort_unstable_by_key(|&(v, _)| v);
        let m = items.len();
        let total = m + 1; // plus escape
        let mut weight: Vec<u64> = items.iter().map(|&(_, w)| w.max(1)).collect();
        weight.push(1); // escape
        let mut parent: Vec<u32> = vec![u32::MAX; total];
        let mut heap: BinaryHeap<Reverse<(u64, u32)>> = (0..total)
            .map(|i| Reverse((weight[i], i as u32)))
            .collect();
        while heap.len() >= 2 {
            let Reverse((w1, a)) = heap.pop().unwrap();
            let Reverse((w2, b)) = heap.pop().unwrap();
            let id = parent.len() as u32;
            parent.push(u32::MAX);
            parent[a as usize] = id;
            parent[b as usize] = id;
            heap.push(Reverse((w1 + w2, id)));
        }
        let mut lens: Vec<u8> = vec![0; total];
        for (i, len) in lens.iter_mut().enumerate() {
            let mut d = 0u8;
            let mut x = i as u32;
            while parent[x as usize] != u32::MAX {
                d += 1;
                x = parent[x as usize];
            }
            *len = d.max(1);
        }
        let mut order: Vec<u32> = (0..total as u32).collect();
        order.sort_by_key(|&i| (lens[i as usize], i));
        let vals_c: Vec<u64> = order
            .iter()
            .map(|&i| if i as usize == m { 0 } else { items[i as usize].0 })
            .collect();
        let lens_c: Vec<u8> = order.iter().map(|&i| lens[i as usize]).collect();
        let esc_slot = order.iter().position(|&i| i as usize == m).unwrap() as u32;
        HuffCode::from_parts(vals_c, lens_c, esc_slot).expect("canonical code construction")
    }

    /// Reassembles a code from its serialized parts, validating completeness.
    pub fn from_parts(vals: Vec<u64>, lens: Vec<u8>, esc_slot: u32) -> Result<HuffCode> {
        if vals.is_empty() || vals.len() != lens.len() || (esc_slot as usize) >= vals.len() {
            return Err(Error::Corrupt("malformed code table".into()));
        }
        let max_len = *lens.last().unwrap();
        if max_len == 0 || max_len > 63 {
            return Err(Error::Corrupt("code length out of range".into()));
        }
        let mut cnt = vec![0u32; max_len as usize + 1];
        let mut prev = 0u8;
        for &l in &lens {
            if l == 0 || l < prev || l > max_len {
                return Err(Error::Corrupt("code lengths not canonical".into()));
            }
            cnt[l as usize] += 1;
            prev = l;
        }
        let mut first_code = vec![0u64; max_len as usize + 1];
        let mut first_idx = vec![0u32; max_len as usize + 1];
        let mut code = 0u64;
        let mut idx = 0u32;
        for l in 1..=max_len as usize {
            first_code[l] = code;
            first_idx[l] = idx;
            code = code
                .checked_add(cnt[l] as u64)
                .ok_or_else(|| Error::Corrupt("code space overflow".into()))?;
            if code > 1u64 << l {
                return Err(Error::Corrupt("code space overflow".into()));
            }
            idx += cnt[l];
            code <<= 1;
        }
        if first_code[max_len as usize] + cnt[max_len as usize] as u64 != 1u64 << max_len {
            return Err(Error::Corrupt("prefix code is not complete".into()));
        }
        let mut enc = HashMap::with_capacity(vals.len());
        let mut esc_code = (0u64, 0u8);
        for (slot, (&v, &l)) in vals.iter().zip(lens.iter()).enumerate() {
            let c = first_code[l as usize] + (slot as u32 - first_idx[l as usize]) as u64;
            if slot as u32 == esc_slot {
                esc_code = (c, l);
            } else if enc.insert(v, (c, l)).is_some() {
                return Err(Error::Corrupt("duplicate value in code table".into()));
            }
        }
        Ok(HuffCode {
            vals,
            lens,
            esc_slot,
            max_len,
            first_code,
            first_idx,
            cnt,
            enc,
            esc_code,
        })
    }

    pub fn vals(&self) -> &[u64] {
        &self.vals
    }

    pub fn lens(&self) -> &[u8] {
        &self.lens
    }

    pub fn esc_slot(&self) -> u32 {
        self.esc_slot
    }

    pub fn entries(&self) -> usize {
        self.vals.len()
    }

    pub fn is_escape(&self, slot: u32) -> bool {
        slot == self.esc_slot
    }

    pub fn value(&self, slot: u32) -> u64 {
        self.vals[slot as usize]
    }

    /// Appends the code for `value`. Returns false when the escape code was
    /// written instead and the caller must append the raw value.
    pub fn encode_into(&self, buf: &mut BitBuf, value: u64) -> bool {
        match self.enc.get(&value) {
            Some(&(code, len)) => {
                push_code(buf, code, len);
                true
            }
            None => {
                push_code(buf, self.esc_code.0, self.esc_code.1);
                false
            }
        }
    }

    /// Reads one codeword through `next_bit` and returns its slot.
    pub fn decode_slot<F: FnMut() -> bool>(&self, mut next_bit: F) -> Result<u32> {
        let mut code = 0u64;
        for l in 1..=self.max_len as usize {
            code = (code << 1) | next_bit() as u64;
            let c = self.cnt[l] as u64;
            if c != 0 {
                let fc = self.first_code[l];
                if code >= fc && code < fc + c {
                    return Ok(self.first_idx[l] + (code - fc) as u32);
                }
            }
        }
        Err(Error::Corrupt("invalid codeword".into()))
    }
}

fn push_code(buf: &mut BitBuf, code: u64, len: u8) {
    for k in (0..len).rev() {
        buf.push_bit(code >> k & 1 == 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textgen::SplitMix64;

    fn roundtrip(values: &[u64]) {
        let mut freq: HashMap<u64, u64> = HashMap::new();
        for &v in values {
            *freq.entry(v).or_insert(0) += 1;
        }
        let pairs: Vec<(u64, u64)> = freq.into_iter().collect();
        let code = HuffCode::build(&pairs);
        let mut buf = BitBuf::new();
        for &v in values {
            assert!(code.encode_into(&mut buf, v));
        }
        let mut pos = 0usize;
        for &v in values {
            let slot = code
                .decode_slot(|| {
                    let b = buf.get(pos);
                    pos += 1;
                    b
                })
                .unwrap();
            assert!(!code.is_escape(slot));
            assert_eq!(code.value(slot), v);
        }
        assert_eq!(pos, buf.len());
    }

    #[test]
    fn skewed_and_uniform_streams() {
        let mut rng = SplitMix64::new(99);
        let skewed: Vec<u64> = (0..4000)
            .map(|_| {
                let r = rng.next_below(100);
                if r < 60 {
                    0
                } else if r < 85 {
                    1
                } else {
                    2 + rng.next_below(30)
                }
            })
            .collect();
        roundtrip(&skewed);
        let uniform: Vec<u64> = (0..2000).map(|_| rng.next_below(256)).collect();
        roundtrip(&uniform);
        roundtrip(&[7]);
        roundtrip(&[7, 7, 7, 7]);
    }

    #[test]
    fn escape_encodes_unknown_values() {
        let code = HuffCode::build(&[(10, 5), (11, 3)]);
        let mut buf = BitBuf::new();
        assert!(!code.encode_into(&mut buf, 999));
        buf.push_bits(999, 16);
        let mut pos = 0usize;
        let slot = code
            .decode_slot(|| {
                let b = buf.get(pos);
                pos += 1;
                b
            })
            .unwrap();
        assert!(code.is_escape(slot));
        assert_eq!(buf.get_bits(pos, 16), 999);
    }

    #[test]
    fn rebuild_from_parts_matches() {
        let code = HuffCode::build(&[(1, 10), (2, 1), (3, 1), (4, 7), (5, 2)]);
        let again =
            HuffCode::from_parts(code.vals().to_vec(), code.lens().to_vec(), code.esc_slot())
                .unwrap();
        assert_eq!(code.vals(), again.vals());
        assert_eq!(code.lens(), again.lens());
        let mut b1 = BitBuf::new();
        let mut b2 = BitBuf::new();
        for v in [1u64, 2, 3, 4, 5, 1, 4] {
            code.encode_into(&mut b1, v);
            again.encode_into(&mut b2, v);
        }
        assert_eq!(b1, b2);
    }

    #[test]
    fn from_parts_rejects_bad_tables() {
        // Incomplete code space.
        assert!(HuffCode::from_parts(vec![1, 2], vec![2, 2], 0).is_err());
        // Decreasing lengths.
        assert!(HuffCode::from_parts(vec![1, 2], vec![2, 1], 0).is_err());
        // Duplicate values.
        assert!(HuffCode::from_parts(vec![5, 5, 0], vec![1, 2, 2], 2).is_err());
        // Escape slot out of range.
        assert!(HuffCode::from_parts(vec![1, 2], vec![1, 1], 5).is_err());
        // Zero length.
        assert!(HuffCode::from_parts(vec![1], vec![0], 0).is_err());
    }

    #[test]
    fn kraft_equality_holds_for_built_codes() {
        let mut rng = SplitMix64::new(5);
        for trial in 0..20 {
            let m = 1 + rng.next_below(200) as usize;
            let pairs: Vec<(u64, u64)> = (0..m as u64)
                .map(|v| (v, 1 + rng.next_below(1000)))
                .collect();
            let code = HuffCode::build(&pairs);
            let total: f64 = code
                .lens()
                .iter()
                .map(|&l| (0.5f64).powi(l as i32))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "trial {trial}: kraft={total}");
        }
    }
}
