use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use sdseq::sseq::StaticSeq;
use sdseq::CoreConfig;

fn main() {
    let mut rng = StdRng::seed_from_u64(51);
    for n in [1000usize, 4000, 100_000] {
        let syms: Vec<u32> = (0..n)
            .map(|_| if rng.gen_bool(0.9) { 0 } else { rng.gen_range(1..16u32) })
            .collect();
        let s = StaticSeq::build(&syms, 16, &CoreConfig::default()).unwrap();
        let st = s.stats().unwrap();
        println!(
            "n={} ell={} t={} metas={} distinct={} coded={} table={} offsets={} block={} perm={} total={}",
            st.n, st.ell, st.t, st.meta_count, st.distinct_metas, st.coded_meta_bits,
            st.table_bits, st.offsets_bits, st.block_bits, st.perm_bits, st.total_bits
        );
    }
}
