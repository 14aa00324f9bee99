use super::*;
use crate::entropy;
use crate::textgen::{markov2, uniform, SplitMix64};

/// Position-list oracle: rank by binary search, select by direct index.
struct Oracle {
    syms: Vec<u32>,
    pos: Vec<Vec<u32>>,
}

impl Oracle {
    fn new(syms: &[u32], universe: usize) -> Oracle {
        let mut pos = vec![Vec::new(); universe];
        for (i, &s) in syms.iter().enumerate() {
            pos[s as usize].push(i as u32);
        }
        Oracle {
            syms: syms.to_vec(),
            pos,
        }
    }

    fn rank(&self, a: u32, i: usize) -> usize {
        self.pos[a as usize].partition_point(|&p| (p as usize) < i)
    }

    fn select(&self, a: u32, j: usize) -> Option<usize> {
        self.pos[a as usize].get(j - 1).map(|&p| p as usize)
    }

    fn partial_rank(&self, i: usize) -> usize {
        self.rank(self.syms[i], i + 1)
    }
}

fn roundtrip(seq: &StaticSeq) -> StaticSeq {
    let mut bytes = Vec::new();
    seq.write_into(&mut bytes).unwrap();
    StaticSeq::read_from(&mut &bytes[..]).unwrap()
}

fn probe_against_oracle(seq: &StaticSeq, oracle: &Oracle, universe: usize, probes: usize, seed: u64) {
    let n = seq.len();
    let mut rng = SplitMix64::new(seed);
    for _ in 0..probes {
        let i = rng.next_below(n as u64 + 1) as usize;
        let a = rng.next_below(universe as u64) as u32;
        assert_eq!(seq.rank(a, i).unwrap(), oracle.rank(a, i), "rank({a},{i})");
        if i < n {
            assert_eq!(
                seq.access(i).unwrap(),
                oracle.syms[i],
                "access({i})"
            );
            assert_eq!(
                seq.partial_rank(i).unwrap(),
                oracle.partial_rank(i),
                "partial_rank({i})"
            );
        }
        let cnt = seq.count(a).unwrap();
        assert_eq!(cnt, oracle.pos[a as usize].len());
        if cnt > 0 {
            let j = rng.next_below(cnt as u64) as usize + 1;
            assert_eq!(
                seq.select(a, j).unwrap(),
                oracle.select(a, j).unwrap(),
                "select({a},{j})"
            );
        } else {
            assert!(seq.select(a, 1).is_err());
        }
    }
}

#[test]
fn degenerate_alphabets() {
    let cfg = CoreConfig::default();
    // Single-symbol alphabet.
    let seq = StaticSeq::build(&[0; 100], 1, &cfg).unwrap();
    assert_eq!(seq.len(), 100);
    assert_eq!(seq.sigma(), 1);
    for i in [0usize, 1, 50, 99] {
        assert_eq!(seq.access(i).unwrap(), 0);
        assert_eq!(seq.rank(0, i).unwrap(), i);
        assert_eq!(seq.partial_rank(i).unwrap(), i + 1);
    }
    assert_eq!(seq.select(0, 100).unwrap(), 99);
    assert_eq!(seq.extract(10, 5).unwrap(), vec![0; 5]);
    assert!(seq.access(100).is_err());
    assert!(seq.select(0, 101).is_err());
    let back = roundtrip(&seq);
    assert_eq!(back.len(), 100);
    assert_eq!(back.rank(0, 42).unwrap(), 42);
    seq.validate().unwrap();

    // Empty sequence, wide alphabet.
    let seq = StaticSeq::build(&[], 5, &cfg).unwrap();
    assert_eq!(seq.len(), 0);
    assert_eq!(seq.rank(3, 0).unwrap(), 0);
    assert!(seq.select(3, 1).is_err());
    assert!(seq.access(0).is_err());
    assert_eq!(seq.extract(0, 0).unwrap(), Vec::<u32>::new());
    let back = roundtrip(&seq);
    assert_eq!(back.len(), 0);
    seq.validate().unwrap();

    // Unused symbols and out-of-range symbols.
    let seq = StaticSeq::build(&[0, 0, 1], 5, &cfg).unwrap();
    assert_eq!(seq.rank(3, 3).unwrap(), 0);
    assert_eq!(seq.count(3).unwrap(), 0);
    assert!(seq.select(3, 1).is_err());
    assert!(seq.rank(7, 1).is_err());
    assert!(StaticSeq::build(&[5], 5, &cfg).is_err());
    seq.validate().unwrap();
}

#[test]
fn oracle_probes_wide_alphabet() {
    let cfg = CoreConfig::default();
    let n = 100_000;
    let universe = 300;
    let syms = uniform(n, universe, 0x5eed_0001);
    let seq = StaticSeq::build(&syms, universe, &cfg).unwrap();
    assert_eq!(seq.len(), n);
    let oracle = Oracle::new(&syms, universe);
    probe_against_oracle(&seq, &oracle, universe, 10_000, 0x5eed_0002);
    // Extraction windows.
    let mut rng = SplitMix64::new(0x5eed_0003);
    for _ in 0..200 {
        let i = rng.next_below(n as u64) as usize;
        let len = rng.next_below((n - i) as u64 + 1) as usize;
        assert_eq!(seq.extract(i, len).unwrap(), &syms[i..i + len]);
    }
    // Full round-trip through serialization, then spot checks.
    let back = roundtrip(&seq);
    probe_against_oracle(&back, &oracle, universe, 2_000, 0x5eed_0004);
}

#[test]
fn permutations_invert_on_every_block() {
    for (sigma, n, t_override) in [
        (8usize, 4096usize, None),
        (64, 8192, None),
        (300, 6000, None),
        (64, 4096, Some(4)),
        (50, 3000, Some(7)),
    ] {
        let cfg = CoreConfig {
            static_t_override: t_override,
            ..CoreConfig::default()
        };
        let syms = uniform(n, sigma, 0xb10c + sigma as u64);
        let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
        if let Some(t) = t_override {
            assert_eq!(seq.t(), t);
        }
        for b in 0..seq.block_count() {
            let bs = seq.block_size(b);
            let mut seen = vec![false; bs];
            for i in 0..bs {
                let p = seq.block_pi(b, i).unwrap();
                assert!(p < bs);
                assert!(!seen[p], "pi not injective in block {b}");
                seen[p] = true;
                assert_eq!(
                    seq.block_pi_inv(b, p).unwrap(),
                    i,
                    "pi_inv(pi({i})) block {b} sigma {sigma} t {:?}",
                    t_override
                );
            }
        }
    }
}

#[test]
fn partial_rank_matches_rank_everywhere() {
    for t_override in [None, Some(3)] {
        let cfg = CoreConfig {
            static_t_override: t_override,
            ..CoreConfig::default()
        };
        let n = 3000;
        let syms = uniform(n, 7, 0xdead);
        let seq = StaticSeq::build(&syms, 7, &cfg).unwrap();
        for i in 0..n {
            assert_eq!(
                seq.partial_rank(i).unwrap(),
                seq.rank(syms[i], i + 1).unwrap(),
                "i={i} t={:?}",
                t_override
            );
        }
    }
}

#[test]
fn sampled_machinery_answers_oracle_probes() {
    for t in [4usize, 7] {
        let cfg = CoreConfig {
            static_t_override: Some(t),
            ..CoreConfig::default()
        };
        let n = 8000;
        let universe = 50;
        let syms = uniform(n, universe, 0x7777 + t as u64);
        let seq = StaticSeq::build(&syms, universe, &cfg).unwrap();
        assert_eq!(seq.t(), t);
        let oracle = Oracle::new(&syms, universe);
        probe_against_oracle(&seq, &oracle, universe, 4_000, 0x8888 + t as u64);
        let back = roundtrip(&seq);
        assert_eq!(back.t(), t);
        probe_against_oracle(&back, &oracle, universe, 1_000, 0x9999 + t as u64);
        seq.validate().unwrap();
    }
}

#[test]
fn coded_stream_respects_entropy_bound() {
    // Contract: coded meta-symbol stream fits in m * (H0(metas) + 2) bits.
    let cfg = CoreConfig::default();
    for (n, sigma, seed) in [
        (50_000usize, 30usize, 1u64),
        (50_000, 4, 2),
        (20_000, 256, 3),
        (65_536, 16, 4),
    ] {
        let syms = uniform(n, sigma, seed);
        let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
        let st = seq.stats().unwrap();
        if st.meta_count == 0 {
            continue;
        }
        let metas: Vec<u64> = (0..st.meta_count)
            .map(|m| pack_meta_from(&syms, m, seq.ell(), log2_ceil(sigma)))
            .collect();
        let h0 = entropy::h0_u64(&metas);
        let bound = st.meta_count as f64 * (h0 + 2.0);
        assert!(
            (st.coded_meta_bits as f64) <= bound + 1.0,
            "n={n} sigma={sigma}: {} > {:.1}",
            st.coded_meta_bits,
            bound
        );
        seq.validate().unwrap();
    }
}

#[test]
fn markov_source_compresses_to_high_order_entropy() {
    // A second-order source must code close to its order-2 entropy: the
    // meta-symbol stream fits in n*H2 + (n/ell)*2*log2(sigma) + 2*(n/ell).
    let cfg = CoreConfig::default();
    let n = 1_000_000;
    let sigma = 16;
    let syms = markov2(n, sigma, 0xabcdef);
    let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
    let st = seq.stats().unwrap();
    let h2 = entropy::hk(&syms, 2);
    let ell = seq.ell() as f64;
    let bound = n as f64 * h2 + (n as f64 / ell) * (2.0 * (sigma as f64).log2() + 2.0);
    assert!(
        (st.coded_meta_bits as f64) <= bound,
        "coded {} bits, order-2 bound {:.0} (H2={h2:.3}, ell={ell})",
        st.coded_meta_bits,
        bound
    );
    // And the coded stream must genuinely compress below the plain
    // encoding. The achievable rate for width-3 meta-symbols is about
    // (h0 + h1 + h2) / 3 — only the last symbol of each meta sees full
    // order-2 context — which is ~3.2 bits here against 4 raw.
    assert!((st.coded_meta_bits as f64) < 0.85 * n as f64 * (sigma as f64).log2());
}

#[test]
fn alphabet_remap_translates_queries() {
    let cfg = CoreConfig::default();
    let universe = 500;
    let mut map = vec![false; universe];
    let mut mapped = Vec::new();
    let mut rng = SplitMix64::new(0x3a9);
    while mapped.len() < 40 {
        let u = rng.next_below(universe as u64) as usize;
        if !map[u] {
            map[u] = true;
            mapped.push(u as u32);
        }
    }
    let n = 30_000;
    let syms: Vec<u32> = (0..n)
        .map(|_| mapped[rng.next_below(40) as usize])
        .collect();
    let seq = StaticSeq::build_with_map(&syms, &map, &cfg).unwrap();
    assert_eq!(seq.sigma(), universe);
    assert_eq!(seq.effective_sigma(), 40);
    let oracle = Oracle::new(&syms, universe);
    probe_against_oracle(&seq, &oracle, universe, 5_000, 0x3aa);
    // Unmapped symbols: rank 0, count 0, select fails; outside universe errs.
    let unmapped = (0..universe as u32).find(|&u| !map[u as usize]).unwrap();
    assert_eq!(seq.rank(unmapped, n).unwrap(), 0);
    assert_eq!(seq.count(unmapped).unwrap(), 0);
    assert!(seq.select(unmapped, 1).is_err());
    assert!(seq.rank(universe as u32, 1).is_err());
    // Rejects a symbol not covered by the map.
    assert!(StaticSeq::build_with_map(&[unmapped], &map, &cfg).is_err());
    let back = roundtrip(&seq);
    assert_eq!(back.sigma(), universe);
    probe_against_oracle(&back, &oracle, universe, 1_000, 0x3ab);
    seq.validate().unwrap();
}

#[test]
fn incremental_build_matches_one_shot() {
    let cfg = CoreConfig::default();
    let n = 20_000;
    let sigma = 30;
    let syms = uniform(n, sigma, 0x1234);
    let one_shot = StaticSeq::build(&syms, sigma, &cfg).unwrap();
    let mut builder = StaticSeqBuilder::new(&syms, sigma, &cfg).unwrap();
    let mut steps = 0usize;
    while !builder.step(997) {
        steps += 1;
        assert!(steps < 10_000_000, "builder failed to make progress");
    }
    assert!(steps > 10, "budgeted build finished suspiciously fast");
    let incremental = builder.finish().unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    one_shot.write_into(&mut a).unwrap();
    incremental.write_into(&mut b).unwrap();
    assert_eq!(a, b, "incremental build must be byte-identical");
}

#[test]
fn binary_alphabet_agrees_with_bit_counts() {
    let cfg = CoreConfig::default();
    let n = 30_000;
    let syms = uniform(n, 2, 0xbeef);
    let seq = StaticSeq::build(&syms, 2, &cfg).unwrap();
    let mut ones = 0usize;
    for i in 0..n {
        assert_eq!(seq.rank(1, i).unwrap(), ones);
        assert_eq!(seq.rank(0, i).unwrap(), i - ones);
        if syms[i] == 1 {
            ones += 1;
            assert_eq!(seq.select(1, ones).unwrap(), i);
        }
    }
}

#[test]
fn extraction_windows_cover_boundaries() {
    let cfg = CoreConfig::default();
    let n = 10_007;
    let sigma = 30;
    let syms = uniform(n, sigma, 0xfeed);
    let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
    let ell = seq.ell();
    assert!(n % ell != 0, "want a non-empty raw tail for this test");
    let m_full = n / ell;
    let stride_pos = cfg.decode_stride * ell;
    let cases: &[(usize, usize)] = &[
        (0, 0),
        (0, n),
        (0, 1),
        (1, ell),
        (ell - 1, 2),
        (stride_pos - 1, 3),
        (stride_pos, 2 * ell),
        (m_full * ell - 1, n - (m_full * ell - 1)),
        (m_full * ell, n - m_full * ell),
        (n - 1, 1),
        (n, 0),
    ];
    for &(i, len) in cases {
        assert_eq!(
            seq.extract(i, len).unwrap(),
            &syms[i..i + len],
            "window ({i},{len})"
        );
    }
    assert!(seq.extract(n, 1).is_err());
    assert!(seq.extract(0, n + 1).is_err());
}

#[test]
fn serialization_rejects_corruption() {
    let cfg = CoreConfig::default();
    let n = 1024;
    let syms = uniform(n, 8, 0xc0de);
    let seq = StaticSeq::build(&syms, 8, &cfg).unwrap();
    assert_eq!(n % seq.ell(), 0, "layout assumption: no raw tail");
    let mut bytes = Vec::new();
    seq.write_into(&mut bytes).unwrap();

    // Bad magic.
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(StaticSeq::read_from(&mut &bad[..]).is_err());

    // Truncation at many prefixes.
    for cut in [4usize, 40, bytes.len() / 2, bytes.len() - 1] {
        assert!(StaticSeq::read_from(&mut &bytes[..cut]).is_err());
    }

    // Invalid codeword length in the code table. Layout: magic+version (5),
    // seven u64 parameters (56), map flag (1), tail count (8), code flag
    // (1), entry count (8), escape slot (8), then the length bytes.
    assert_eq!(bytes[70], 1, "code table flag expected here");
    let mut bad = bytes.clone();
    bad[87] = 0xff;
    assert!(StaticSeq::read_from(&mut &bad[..]).is_err());
}

#[test]
fn audit_catches_tampered_position_table() {
    let cfg = CoreConfig::default();
    let n = 5000;
    let sigma = 16;
    let syms = uniform(n, sigma, 0x7a77);
    let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
    let mut bytes = Vec::new();
    seq.write_into(&mut bytes).unwrap();
    // The position table is the final section; flip a bit in its first
    // payload word. Lengths all still check out, so the read succeeds.
    let w_pos = log2_ceil(sigma);
    let words = (n * w_pos + 63) / 64;
    let first_word_byte = bytes.len() - words * 8;
    bytes[first_word_byte] ^= 1;
    let tampered = StaticSeq::read_from(&mut &bytes[..]).unwrap();
    assert!(
        tampered.validate().is_err(),
        "audit must flag a corrupted position table"
    );
    // The untampered build passes the same audit.
    seq.validate().unwrap();
}

#[test]
fn serialized_size_stays_reasonable() {
    let cfg = CoreConfig::default();
    let n = 200_000;
    let sigma = 64;
    let syms = uniform(n, sigma, 0x5123);
    let seq = StaticSeq::build(&syms, sigma, &cfg).unwrap();
    let st = seq.stats().unwrap();
    let budget = 3.0 * n as f64 * (sigma as f64).log2() + 8.0 * 65_536.0;
    assert!(
        (st.total_bits as f64) < budget,
        "total {} bits exceeds {:.0}",
        st.total_bits,
        budget
    );
    assert!(st.coded_meta_bits > 0);
    assert!(st.block_bits > 0);
    assert!(st.perm_bits > 0);
}

#[test]
fn empty_build_probe() {
    let cfg = CoreConfig::default();
    let s = StaticSeq::build(&[], 64, &cfg).unwrap();
    assert_eq!(s.len(), 0);
    assert_eq!(s.rank(3, 0).unwrap(), 0);
    assert!(s.select(3, 1).is_err() || s.select(3, 1).unwrap() == usize::MAX);
    assert_eq!(s.extract(0, 0).unwrap(), Vec::<u32>::new());
    let mut buf = Vec::new();
    s.write_into(&mut buf).unwrap();
    let s2 = StaticSeq::read_from(&mut buf.as_slice()).unwrap();
    assert_eq!(s2.len(), 0);
    s.validate().unwrap();
}
