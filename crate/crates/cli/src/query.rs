//! `sdseq query`: run an edit/query script against an index.

use crate::index::{Index, SymbolModel};
use crate::script::{parse_script, render_byte, Op, SymbolSyntax};
use crate::{EXIT_DATA, EXIT_OK};
use anyhow::{Context, Result};
use clap::Args;
use sdseq::cseq::CompressedSeq;
use std::io::{Read, Write};
use std::path::PathBuf;

#[derive(Args)]
pub struct QueryArgs {
    /// Index file.
    pub index: PathBuf,
    /// Script file, or `-` for standard input.
    pub script: PathBuf,
    /// Write mutations back to the index file on successful completion.
    #[arg(long)]
    pub save: bool,
    /// Continue after out-of-range operations instead of aborting.
    #[arg(long)]
    pub keep_going: bool,
}

pub fn run(args: QueryArgs) -> Result<i32> {
    let mut idx = Index::load(&args.index)?;
    let src = if args.script.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading script from stdin")?;
        s
    } else {
        std::fs::read_to_string(&args.script)
            .with_context(|| format!("reading {}", args.script.display()))?
    };
    let ops = match parse_script(&src, &SymbolSyntax::Model(&idx.model)) {
        Ok(ops) => ops,
        Err(msg) => {
            eprintln!("{}: {msg}", args.script.display());
            return Ok(EXIT_DATA);
        }
    };

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut mutated = false;
    for (line, op) in ops {
        match exec(&mut idx.seq, &idx.model, op) {
            Outcome::Print(s) => writeln!(out, "{s}")?,
            Outcome::Mutated => mutated = true,
            Outcome::Fail(msg) => {
                writeln!(out, "error: line {line}: {msg}")?;
                if !args.keep_going {
                    out.flush()?;
                    return Ok(EXIT_DATA);
                }
            }
        }
    }
    out.flush()?;
    if args.save && mutated {
        idx.save(&args.index)?;
    }
    Ok(EXIT_OK)
}

enum Outcome {
    Print(String),
    Mutated,
    Fail(String),
}

fn exec(seq: &mut CompressedSeq, model: &SymbolModel, op: Op) -> Outcome {
    let n = seq.len() as u64;
    let oob = |pos: u64| Outcome::Fail(format!("position {pos} out of range (n={n})"));
    match op {
        Op::Insert { pos, sym } => {
            if pos > n + 1 {
                return oob(pos);
            }
            seq.insert((pos - 1) as usize, sym).expect("validated insert");
            Outcome::Mutated
        }
        Op::Delete { pos } => {
            if pos > n {
                return oob(pos);
            }
            seq.delete((pos - 1) as usize).expect("validated delete");
            Outcome::Mutated
        }
        Op::Rank { sym, pos } => {
            if pos > n {
                return oob(pos);
            }
            let c = seq.rank(sym, pos as usize).expect("validated rank");
            Outcome::Print(c.to_string())
        }
        Op::Select { sym, k } => {
            let c = seq.rank(sym, n as usize).expect("full rank");
            if k > c as u64 {
                return Outcome::Fail(format!(
                    "occurrence {k} out of range ({c} present)"
                ));
            }
            let p = seq.select(sym, k as usize).expect("validated select");
            Outcome::Print((p + 1).to_string())
        }
        Op::Access { pos } => {
            if pos > n || n == 0 {
                return oob(pos);
            }
            let a = seq.access((pos - 1) as usize).expect("validated access");
            Outcome::Print(render_sym(model, a))
        }
        Op::Extract { pos, len } => {
            if pos > n + 1 || pos - 1 + len > n {
                return Outcome::Fail(format!(
                    "range {pos}+{len} out of range (n={n})"
                ));
            }
            let part = seq
                .extract((pos - 1) as usize, len as usize)
                .expect("validated extract");
            let rendered: Vec<String> =
                part.iter().map(|&a| render_sym(model, a)).collect();
            let joined = match model {
                SymbolModel::Bytes { .. } => rendered.concat(),
                SymbolModel::Tokens { .. } => rendered.join(" "),
            };
            Outcome::Print(joined)
        }
    }
}

/// Renders one symbol in the index's model.
pub fn render_sym(model: &SymbolModel, a: u32) -> String {
    match model {
        SymbolModel::Bytes { map } => match map.get(a as usize) {
            Some(&b) => render_byte(b),
            None => format!("#{a}"),
        },
        SymbolModel::Tokens { toks } => match toks.get(a as usize) {
            Some(t) => t.clone(),
            None => format!("#{a}"),
        },
    }
}
