//! `sdseq bench`: per-op latency percentiles, update-cost spread (basic
//! operation counter), extract-vs-access speedup, and rank-latency scaling
//! over growing n. Timing fields vary run to run; everything else is
//! deterministic for a fixed seed.

use crate::index::Index;
use crate::{report, EXIT_OK, EXIT_USAGE};
use anyhow::{bail, Context, Result};
use clap::Args;
use sdseq::bench::median_of;
use sdseq::cseq::CompressedSeq;
use sdseq::textgen::{english_like, markov2, uniform, SplitMix64};
use sdseq::{ops_count, CoreConfig};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Args)]
pub struct BenchArgs {
    /// Index file to benchmark (defaults to a synthetic source).
    pub index: Option<PathBuf>,
    /// Synthetic source: `uniform:n=N,sigma=S` | `english:n=N` |
    /// `markov2:n=N,sigma=S`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Mixed operations to run.
    #[arg(long, default_value_t = 10_000)]
    pub ops: u64,
    /// Op mix weights `insert:delete:rank:select:access:extract`.
    #[arg(long, default_value = "25:15:20:15:15:10")]
    pub mix: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Section count override for synthetic builds.
    #[arg(long)]
    pub r: Option<usize>,
    /// Timing runs; medians are reported.
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Also measure extracting this many symbols vs per-symbol access.
    #[arg(long)]
    pub extract_len: Option<usize>,
    /// Also print a rank-latency scaling table over growing n.
    #[arg(long)]
    pub scale: bool,
    /// Largest log2(n) row of the scaling table.
    #[arg(long, default_value_t = 22)]
    pub scale_max_log2: u32,
}

pub fn run(args: BenchArgs) -> Result<i32> {
    if args.index.is_some() && args.synthetic.is_some() {
        eprintln!("error: give an index file or --synthetic, not both");
        return Ok(EXIT_USAGE);
    }
    if args.runs == 0 {
        eprintln!("error: --runs must be at least 1");
        return Ok(EXIT_USAGE);
    }
    let (source, syms, sigma) = match (&args.index, &args.synthetic) {
        (Some(path), None) => {
            let idx = Index::load(path)?;
            let n = idx.seq.len();
            let syms = idx.seq.extract(0, n)?;
            (path.display().to_string(), syms, idx.seq.sigma())
        }
        (None, spec) => {
            let spec = spec
                .clone()
                .unwrap_or_else(|| "uniform:n=65536,sigma=64".to_string());
            let (syms, sigma) = synth(&spec, args.seed)?;
            (spec, syms, sigma)
        }
        _ => unreachable!(),
    };
    let cfg = CoreConfig {
        section_count: args.r,
        ..CoreConfig::default()
    };
    let mut seq = CompressedSeq::from_symbols(&syms, sigma, &cfg)?;
    let n0 = seq.len();

    println!("source={source}");
    println!("n={n0}");
    println!("sigma={sigma}");
    println!("parts={}", seq.parts());
    println!("seed={}", args.seed);
    println!("mix={}", args.mix);
    println!("ops={}", args.ops);

    if args.ops > 0 {
        mixed_ops(&mut seq, &args, n0, sigma)?;
    }
    if let Some(ell) = args.extract_len {
        extract_speedup(&mut seq, ell, args.runs)?;
    }
    if args.scale {
        scaling(&args)?;
    }
    Ok(EXIT_OK)
}

const OPS: [&str; 6] = ["insert", "delete", "rank", "select", "access", "extract"];

fn mixed_ops(
    seq: &mut CompressedSeq,
    args: &BenchArgs,
    n0: usize,
    sigma: usize,
) -> Result<()> {
    let weights = parse_mix(&args.mix)?;
    let total_w: u64 = weights.iter().sum();
    let mut rng = SplitMix64::new(args.seed);
    let mut lat: [Vec<u64>; 6] = Default::default();
    let mut upd_ops: Vec<u64> = Vec::new();
    let span = Instant::now();
    for _ in 0..args.ops {
        let n = seq.len();
        let mut pick = rng.next_below(total_w);
        let mut kind = 0usize;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                kind = i;
                break;
            }
            pick -= w;
        }
        // Hold n near its starting point so the workload stays comparable.
        if n == 0 || (kind == 1 && n < n0 / 2) {
            kind = 0;
        } else if kind == 0 && n > n0 * 2 {
            kind = 1;
        }
        let a = rng.next_below(sigma as u64) as u32;
        match kind {
            0 => {
                let i = rng.next_below(n as u64 + 1) as usize;
                let before = ops_count::get();
                let t = Instant::now();
                seq.insert(i, a)?;
                lat[0].push(t.elapsed().as_nanos() as u64);
                upd_ops.push(ops_count::get().wrapping_sub(before));
            }
            1 => {
                let i = rng.next_below(n as u64) as usize;
                let before = ops_count::get();
                let t = Instant::now();
                seq.delete(i)?;
                lat[1].push(t.elapsed().as_nanos() as u64);
                upd_ops.push(ops_count::get().wrapping_sub(before));
            }
            2 => {
                let i = rng.next_below(n as u64 + 1) as usize;
                let t = Instant::now();
                std::hint::black_box(seq.rank(a, i)?);
                lat[2].push(t.elapsed().as_nanos() as u64);
            }
            3 => {
                let c = seq.rank(a, n)?;
                if c == 0 {
                    continue;
                }
                let j = rng.next_below(c as u64) as usize + 1;
                let t = Instant::now();
                std::hint::black_box(seq.select(a, j)?);
                lat[3].push(t.elapsed().as_nanos() as u64);
            }
            4 => {
                let i = rng.next_below(n as u64) as usize;
                let t = Instant::now();
                std::hint::black_box(seq.access(i)?);
                lat[4].push(t.elapsed().as_nanos() as u64);
            }
            _ => {
                let len = (rng.next_below(64) as usize + 1).min(n);
                let i = rng.next_below((n - len) as u64 + 1) as usize;
                let t = Instant::now();
                std::hint::black_box(seq.extract(i, len)?);
                lat[5].push(t.elapsed().as_nanos() as u64);
            }
        }
    }
    let elapsed = span.elapsed();
    let done: usize = lat.iter().map(|v| v.len()).sum();
    println!("elapsed_ms={}", elapsed.as_millis());
    if elapsed.as_secs_f64() > 0.0 {
        println!(
            "throughput_ops_per_s={:.0}",
            done as f64 / elapsed.as_secs_f64()
        );
    }
    if !upd_ops.is_empty() {
        upd_ops.sort_unstable();
        let max = *upd_ops.last().unwrap();
        let med = upd_ops[upd_ops.len() / 2];
        println!("update_ops_median={med}");
        println!("update_ops_max={max}");
        if med > 0 {
            println!("update_ops_ratio={:.2}", max as f64 / med as f64);
        }
    }
    let mut rows = Vec::new();
    for (i, name) in OPS.iter().enumerate() {
        if lat[i].is_empty() {
            continue;
        }
        lat[i].sort_unstable();
        rows.push(vec![
            name.to_string(),
            lat[i].len().to_string(),
            report::percentile(&lat[i], 50.0).to_string(),
            report::percentile(&lat[i], 90.0).to_string(),
            report::percentile(&lat[i], 99.0).to_string(),
            lat[i].last().unwrap().to_string(),
        ]);
    }
    print!(
        "{}",
        report::table(
            &["op", "count", "p50_ns", "p90_ns", "p99_ns", "max_ns"],
            &rows
        )
    );
    Ok(())
}

fn extract_speedup(seq: &mut CompressedSeq, ell: usize, runs: usize) -> Result<()> {
    seq.quiesce()?;
    let n = seq.len();
    if ell == 0 || ell > n {
        bail!("--extract-len {ell} out of range (n={n})");
    }
    let start = (n - ell) / 2;
    let bulk = median_of(runs, || seq.extract(start, ell).expect("extract"));
    let single = median_of(runs, || {
        let mut acc = 0u64;
        for i in start..start + ell {
            acc = acc.wrapping_add(seq.access(i).expect("access") as u64);
        }
        acc
    });
    println!("extract_len={ell}");
    println!("extract_ns={}", bulk.as_nanos());
    println!("access_ns={}", single.as_nanos());
    if bulk.as_nanos() > 0 {
        println!(
            "extract_speedup={:.2}",
            single.as_nanos() as f64 / bulk.as_nanos() as f64
        );
    }
    Ok(())
}

fn scaling(args: &BenchArgs) -> Result<()> {
    let sigma = 64usize;
    let queries = 2000usize;
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    let mut ln = 16u32;
    while ln <= args.scale_max_log2 {
        let n = 1usize << ln;
        let syms = uniform(n, sigma, args.seed ^ ln as u64);
        let cfg = CoreConfig {
            section_count: args.r,
            ..CoreConfig::default()
        };
        let seq = CompressedSeq::from_symbols(&syms, sigma, &cfg)?;
        let mut qrng = SplitMix64::new(args.seed.wrapping_add(ln as u64));
        let qs: Vec<(u32, usize)> = (0..queries)
            .map(|_| {
                (
                    qrng.next_below(sigma as u64) as u32,
                    qrng.next_below(n as u64 + 1) as usize,
                )
            })
            .collect();
        let d = median_of(args.runs, || {
            let mut acc = 0usize;
            for &(a, i) in &qs {
                acc = acc.wrapping_add(seq.rank(a, i).expect("rank"));
            }
            acc
        });
        let ns = d.as_nanos() as f64 / queries as f64;
        println!("scale_rank_ns_{n}={ns:.1}");
        let ratio = prev.map(|p| ns / p);
        prev = Some(ns);
        rows.push(vec![
            n.to_string(),
            format!("{ns:.1}"),
            ratio.map_or("-".to_string(), |r| format!("{r:.2}")),
        ]);
        ln += 2;
    }
    print!(
        "{}",
        report::table(&["n", "rank_ns", "ratio_vs_prev"], &rows)
    );
    Ok(())
}

fn parse_mix(s: &str) -> Result<[u64; 6]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 6 {
        bail!("--mix takes six ':'-separated weights (insert:delete:rank:select:access:extract)");
    }
    let mut w = [0u64; 6];
    for (i, p) in parts.iter().enumerate() {
        w[i] = p
            .parse()
            .with_context(|| format!("bad mix weight '{p}'"))?;
    }
    if w.iter().sum::<u64>() == 0 {
        bail!("--mix weights sum to zero");
    }
    Ok(w)
}

/// Parses a synthetic-source spec into symbols and alphabet size.
pub fn synth(spec: &str, seed: u64) -> Result<(Vec<u32>, usize)> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut n = 65536usize;
    let mut sigma = 64usize;
    let mut saw_sigma = false;
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("bad synthetic parameter '{kv}' (want key=value)");
        };
        match k {
            "n" => n = v.parse().with_context(|| format!("bad n '{v}'"))?,
            "sigma" => {
                sigma = v.parse().with_context(|| format!("bad sigma '{v}'"))?;
                saw_sigma = true;
            }
            other => bail!("unknown synthetic parameter '{other}'"),
        }
    }
    match kind {
        "uniform" => Ok((uniform(n, sigma, seed), sigma)),
        "english" => {
            if saw_sigma {
                bail!("english source derives its own alphabet");
            }
            let (syms, s) = english_like(n, seed);
            Ok((syms, s))
        }
        "markov2" => {
            if !saw_sigma {
                sigma = 16;
            }
            Ok((markov2(n, sigma, seed), sigma))
        }
        other => bail!("unknown synthetic source '{other}'"),
    }
}
