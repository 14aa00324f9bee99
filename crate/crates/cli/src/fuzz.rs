//! `sdseq fuzz`: drive a seeded random op stream through the compressed
//! sequence and a naive array oracle in parallel, comparing every result and
//! periodically the full content. On divergence the op list is greedily
//! minimized and written out as a replayable script.

use crate::script::{parse_script, Op, SymbolSyntax};
use crate::{EXIT_DATA, EXIT_DIVERGENCE, EXIT_OK};
use anyhow::{Context, Result};
use clap::Args;
use sdseq::cseq::CompressedSeq;
use sdseq::naive::NaiveSeq;
use sdseq::textgen::SplitMix64;
use sdseq::CoreConfig;
use std::path::PathBuf;

#[derive(Args)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random operations after the initial fill.
    #[arg(long, default_value_t = 2000)]
    pub ops: u64,
    #[arg(long, default_value_t = 8)]
    pub sigma: u32,
    /// Section count override.
    #[arg(long)]
    pub r: Option<usize>,
    /// Initial fill length.
    #[arg(long, default_value_t = 64)]
    pub init: usize,
    /// Path for the minimized reproduction script.
    #[arg(long, default_value = "fuzz-repro.txt")]
    pub repro_out: PathBuf,
    /// Replay a reproduction script instead of generating operations.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Corrupt the compared answer of the op with this index (harness test).
    #[arg(long, hide = true)]
    pub inject_fault: Option<u64>,
}

pub fn run(args: FuzzArgs) -> Result<i32> {
    if let Some(path) = &args.replay {
        let src = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let (sigma, r) = replay_header(&src).unwrap_or((args.sigma, args.r));
        let ops: Vec<Op> = match parse_script(&src, &SymbolSyntax::Numeric(sigma)) {
            Ok(v) => v.into_iter().map(|(_, op)| op).collect(),
            Err(msg) => {
                eprintln!("{}: {msg}", path.display());
                return Ok(EXIT_DATA);
            }
        };
        return match run_ops(&ops, sigma, r, args.inject_fault)? {
            Verdict::Pass { final_n } => {
                println!("ok ops={} sigma={sigma} final_n={final_n}", ops.len());
                Ok(EXIT_OK)
            }
            Verdict::Diverged { at, detail } => {
                println!("divergence at op {at}: {detail}");
                Ok(EXIT_DIVERGENCE)
            }
        };
    }

    let ops = generate(&args);
    match run_ops(&ops, args.sigma, args.r, args.inject_fault)? {
        Verdict::Pass { final_n } => {
            println!(
                "ok ops={} seed={} sigma={} final_n={final_n}",
                ops.len(),
                args.seed,
                args.sigma
            );
            Ok(EXIT_OK)
        }
        Verdict::Diverged { at, detail } => {
            println!("divergence at op {at}: {detail}");
            let minimized = minimize(&ops[..=at], &args)?;
            let script = render(&minimized, args.sigma, args.r);
            std::fs::write(&args.repro_out, script)
                .with_context(|| format!("writing {}", args.repro_out.display()))?;
            println!("minimized to {} ops", minimized.len());
            println!("repro={}", args.repro_out.display());
            Ok(EXIT_DIVERGENCE)
        }
    }
}

fn generate(args: &FuzzArgs) -> Vec<Op> {
    let mut rng = SplitMix64::new(args.seed);
    let mut ops = Vec::with_capacity(args.init + args.ops as usize);
    let mut n = 0u64;
    for _ in 0..args.init {
        ops.push(Op::Insert {
            pos: rng.next_below(n + 1) + 1,
            sym: rng.next_below(args.sigma as u64) as u32,
        });
        n += 1;
    }
    for _ in 0..args.ops {
        let sym = rng.next_below(args.sigma as u64) as u32;
        let kind = rng.next_below(100);
        let op = if n == 0 || kind < 25 {
            n += 1;
            Op::Insert {
                pos: rng.next_below(n) + 1,
                sym,
            }
        } else if kind < 45 {
            let pos = rng.next_below(n) + 1;
            n -= 1;
            Op::Delete { pos }
        } else if kind < 65 {
            Op::Rank {
                sym,
                pos: rng.next_below(n) + 1,
            }
        } else if kind < 80 {
            // Occurrence counts are state-dependent; clamping happens at
            // execution time, so any k up to n is fair game.
            Op::Select {
                sym,
                k: rng.next_below(n) + 1,
            }
        } else if kind < 95 {
            Op::Access {
                pos: rng.next_below(n) + 1,
            }
        } else {
            let len = rng.next_below(n.min(48) + 1);
            Op::Extract {
                pos: rng.next_below(n - len + 1) + 1,
                len,
            }
        };
        ops.push(op);
    }
    ops
}

enum Verdict {
    Pass { final_n: usize },
    Diverged { at: usize, detail: String },
}

/// Executes `ops` against both implementations. Any result mismatch —
/// including one side erroring where the other succeeds — is a divergence;
/// content is fully compared every 8 ops and at the end.
fn run_ops(
    ops: &[Op],
    sigma: u32,
    r: Option<usize>,
    fault: Option<u64>,
) -> Result<Verdict> {
    let cfg = CoreConfig {
        section_count: r,
        ..CoreConfig::default()
    };
    let mut cs = CompressedSeq::from_symbols(&[], sigma as usize, &cfg)?;
    let mut naive = NaiveSeq::new(sigma as usize);
    for (i, op) in ops.iter().enumerate() {
        let twist = fault == Some(i as u64);
        let fail = |detail: String| {
            let detail = if twist {
                format!("{detail} (injected fault)")
            } else {
                detail
            };
            Ok(Verdict::Diverged { at: i, detail })
        };
        match *op {
            Op::Insert { pos, sym } => {
                let a = cs.insert(pos as usize - 1, sym).is_ok();
                let b = naive.insert(pos as usize - 1, sym).is_ok();
                if a != b || (twist && a) {
                    return fail(format!("I {pos} {sym}: ok {a} vs {b}"));
                }
            }
            Op::Delete { pos } => {
                let a = cs.delete(pos as usize - 1).ok();
                let b = naive.delete(pos as usize - 1).ok();
                if a != b || (twist && a.is_some()) {
                    return fail(format!("D {pos}: {a:?} vs {b:?}"));
                }
            }
            Op::Rank { sym, pos } => {
                let a = cs.rank(sym, pos as usize).ok();
                let a = if twist { a.map(|v| v + 1) } else { a };
                let b = naive.rank(sym, pos as usize).ok();
                if a != b {
                    return fail(format!("R {sym} {pos}: {a:?} vs {b:?}"));
                }
            }
            Op::Select { sym, k } => {
                let a = cs.select(sym, k as usize).ok();
                let a = if twist { a.map(|v| v + 1) } else { a };
                let b = naive.select(sym, k as usize).ok();
                if a != b {
                    return fail(format!("S {sym} {k}: {a:?} vs {b:?}"));
                }
            }
            Op::Access { pos } => {
                let a = cs.access(pos as usize - 1).ok();
                let a = if twist { a.map(|v| v + 1) } else { a };
                let b = naive.access(pos as usize - 1).ok();
                if a != b {
                    return fail(format!("A {pos}: {a:?} vs {b:?}"));
                }
            }
            Op::Extract { pos, len } => {
                let mut a = cs.extract(pos as usize - 1, len as usize).ok();
                if twist {
                    if let Some(v) = a.as_mut() {
                        v.push(0);
                    }
                }
                let b = naive.extract(pos as usize - 1, len as usize).ok();
                if a != b {
                    return fail(format!("X {pos} {len}: {a:?} vs {b:?}"));
                }
            }
        }
        if cs.len() != naive.len() {
            return fail(format!("length {} vs {}", cs.len(), naive.len()));
        }
        if i % 8 == 7 {
            let a = cs.extract(0, cs.len())?;
            if a != naive.symbols() {
                return fail("content mismatch".to_string());
            }
        }
    }
    let a = cs.extract(0, cs.len())?;
    if a != naive.symbols() {
        return Ok(Verdict::Diverged {
            at: ops.len().saturating_sub(1),
            detail: "final content mismatch".to_string(),
        });
    }
    cs.validate()?;
    Ok(Verdict::Pass { final_n: cs.len() })
}

/// Greedy one-op-at-a-time removal; keeps any op whose removal makes the
/// divergence disappear.
fn minimize(ops: &[Op], args: &FuzzArgs) -> Result<Vec<Op>> {
    let diverges = |cand: &[Op]| -> Result<bool> {
        Ok(matches!(
            run_ops(cand, args.sigma, args.r, args.inject_fault)?,
            Verdict::Diverged { .. }
        ))
    };
    let mut cur: Vec<Op> = ops.to_vec();
    loop {
        let mut shrunk = false;
        let mut idx = cur.len();
        while idx > 0 {
            idx -= 1;
            let mut cand = cur.clone();
            cand.remove(idx);
            if diverges(&cand)? {
                cur = cand;
                shrunk = true;
            }
        }
        if !shrunk {
            break;
        }
    }
    Ok(cur)
}

fn render(ops: &[Op], sigma: u32, r: Option<usize>) -> String {
    let mut s = String::new();
    s.push_str("# fuzz reproduction script (numeric symbols)\n");
    s.push_str(&format!("# sigma={sigma}\n"));
    match r {
        Some(r) => s.push_str(&format!("# r={r}\n")),
        None => s.push_str("# r=auto\n"),
    }
    for op in ops {
        let line = match *op {
            Op::Insert { pos, sym } => format!("I {pos} {sym}"),
            Op::Delete { pos } => format!("D {pos}"),
            Op::Rank { sym, pos } => format!("R {sym} {pos}"),
            Op::Select { sym, k } => format!("S {sym} {k}"),
            Op::Access { pos } => format!("A {pos}"),
            Op::Extract { pos, len } => format!("X {pos} {len}"),
        };
        s.push_str(&line);
        s.push('\n');
    }
    s
}

fn replay_header(src: &str) -> Option<(u32, Option<usize>)> {
    let mut sigma = None;
    let mut r = None;
    for line in src.lines().take(8) {
        let line = line.trim();
        if let Some(v) = line.strip_prefix("# sigma=") {
            sigma = v.parse().ok();
        } else if let Some(v) = line.strip_prefix("# r=") {
            r = if v == "auto" {
                Some(None)
            } else {
                v.parse().ok().map(Some)
            };
        }
    }
    Some((sigma?, r.flatten()))
}
