//! Tuning parameters shared across layers.
//!
//! Every constant that affects structure shape lives here so tests can pin
//! them and exercise small geometries. Defaults are the production values.

/// Crate-wide tuning knobs.
#[derive(Debug, Clone)]
pub struct CoreConfig {
    /// Target leaf capacity of dynamic bit sequences, in bits. Leaves hold
    /// between `leaf_bits / 2` and `2 * leaf_bits` bits away from run-coded
    /// neighbors and sequence ends.
    pub leaf_bits: usize,
    /// Degree of the prefix-count index tree over list entries.
    pub prefix_degree: usize,
    /// Maximum entries per order-maintenance bucket before a bucket split.
    pub bucket_cap: usize,
    /// Basic operations granted per chunked-string update to the background
    /// chunk-splitting procedure.
    pub chunk_step_budget: usize,
    /// A chunk aborts with a diagnostic once it exceeds
    /// `chunk_hard_cap_factor * sigma * log2(n)` symbols.
    pub chunk_hard_cap_factor: usize,
    /// Subsequence count of the compressed sequence. `None` chooses
    /// `max(2, log2 n / log2 log2 n)` at build time.
    pub section_count: Option<usize>,
    /// Sampling rate override for the static in-block select machinery
    /// (`None` uses `clamp(log2 sigma / (log2 log2 sigma)^3, 1, 64)`).
    pub static_t_override: Option<usize>,
    /// Decode entry points are sampled every this many meta-symbols in the
    /// static sequence.
    pub decode_stride: usize,
    /// Overrides the per-update background maintenance budget of the
    /// compressed sequence (`None` derives it from the phase work estimate).
    pub maint_budget_override: Option<u64>,
    /// Context order used for compressibility reports.
    pub context_order: usize,
    /// Forces the per-section symbol-count index representation: `Some(true)`
    /// uses unary-coded rows, `Some(false)` plain prefix-sum trees, `None`
    /// picks unary rows when `sigma > n / log2(n)^3` at build time.
    pub count_unary_override: Option<bool>,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            leaf_bits: 4096,
            prefix_degree: 32,
            bucket_cap: 64,
            chunk_step_budget: 8,
            chunk_hard_cap_factor: 4,
            section_count: None,
            static_t_override: None,
            decode_stride: 64,
            maint_budget_override: None,
            context_order: 2,
            count_unary_override: None,
        }
    }
}

impl CoreConfig {
    /// Configuration with tiny geometry, used by tests to force frequent
    /// splits, relabels and rebuilds.
    pub fn small() -> Self {
        CoreConfig {
            leaf_bits: 64,
            prefix_degree: 4,
            bucket_cap: 8,
            ..CoreConfig::default()
        }
    }

    /// Default section count for a sequence of `n` live symbols.
    pub fn default_sections(n: usize) -> usize {
        let lg = (n.max(4) as f64).log2();
        (lg / lg.log2().max(1.0)).round().max(2.0) as usize
    }
}

/// Integer log2, rounded up, of `n.max(2)`.
pub fn log2_ceil(n: usize) -> usize {
    let n = n.max(2);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}
