//! Edit/query script grammar shared by `query` and `fuzz` replays.
//!
//! One op per line, `#` starts a comment, blank lines are skipped. Positions
//! and occurrence numbers are 1-based at this boundary:
//!
//! ```text
//! I <pos> <sym>     insert <sym> before position <pos>   (pos in 1..=n+1)
//! D <pos>           delete position <pos>
//! R <sym> <pos>     occurrences of <sym> in positions 1..=<pos>
//! S <sym> <k>       position of the k-th occurrence of <sym>
//! A <pos>           symbol at <pos>
//! X <pos> <len>     <len> symbols starting at <pos>
//! ```
//!
//! Symbol literals depend on the index's symbol model. Byte model: a single
//! ASCII character stands for its byte, with escapes `\s` (space), `\t`,
//! `\n`, `\\`, and `\xNN` (hex) for the rest. Token model: the token text.
//! Replay scripts written by `fuzz` use bare decimal symbol numbers.

use crate::index::SymbolModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Insert { pos: u64, sym: u32 },
    Delete { pos: u64 },
    Rank { sym: u32, pos: u64 },
    Select { sym: u32, k: u64 },
    Access { pos: u64 },
    Extract { pos: u64, len: u64 },
}

/// How symbol tokens in a script are read.
pub enum SymbolSyntax<'a> {
    /// Through an index's symbol model (characters or tokens).
    Model(&'a SymbolModel),
    /// Bare decimal symbol numbers below the given alphabet size.
    Numeric(u32),
}

pub fn parse_script(
    src: &str,
    syms: &SymbolSyntax,
) -> Result<Vec<(usize, Op)>, String> {
    let mut ops = Vec::new();
    for (no, raw) in src.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let head = it.next().unwrap();
        let args: Vec<&str> = it.collect();
        let fail = |msg: String| Err(format!("line {line_no}: {msg}"));
        let op = match head {
            "I" | "D" | "A" | "X" | "R" | "S" => {
                let want = match head {
                    "D" | "A" => 1,
                    _ => 2,
                };
                if args.len() != want {
                    return fail(format!(
                        "op {head} takes {want} argument{}",
                        if want == 1 { "" } else { "s" }
                    ));
                }
                match head {
                    "I" => Op::Insert {
                        pos: parse_pos(args[0], line_no)?,
                        sym: parse_sym(args[1], syms, line_no)?,
                    },
                    "D" => Op::Delete {
                        pos: parse_pos(args[0], line_no)?,
                    },
                    "R" => Op::Rank {
                        sym: parse_sym(args[0], syms, line_no)?,
                        pos: parse_pos(args[1], line_no)?,
                    },
                    "S" => Op::Select {
                        sym: parse_sym(args[0], syms, line_no)?,
                        k: parse_pos(args[1], line_no)?,
                    },
                    "A" => Op::Access {
                        pos: parse_pos(args[0], line_no)?,
                    },
                    "X" => {
                        let len = args[1].parse::<u64>().map_err(|_| {
                            format!("line {line_no}: bad length '{}'", args[1])
                        })?;
                        Op::Extract {
                            pos: parse_pos(args[0], line_no)?,
                            len,
                        }
                    }
                    _ => unreachable!(),
                }
            }
            other => return fail(format!("unknown op '{other}'")),
        };
        ops.push((line_no, op));
    }
    Ok(ops)
}

fn parse_pos(tok: &str, line_no: usize) -> Result<u64, String> {
    match tok.parse::<u64>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!(
            "line {line_no}: positions are 1-based, got '{tok}'"
        )),
    }
}

fn parse_sym(
    tok: &str,
    syms: &SymbolSyntax,
    line_no: usize,
) -> Result<u32, String> {
    match syms {
        SymbolSyntax::Numeric(sigma) => match tok.parse::<u32>() {
            Ok(v) if v < *sigma => Ok(v),
            Ok(v) => Err(format!(
                "line {line_no}: symbol {v} out of range (sigma={sigma})"
            )),
            Err(_) => Err(format!("line {line_no}: bad symbol '{tok}'")),
        },
        SymbolSyntax::Model(SymbolModel::Tokens { .. }) => {
            let SymbolSyntax::Model(m) = syms else { unreachable!() };
            m.sym_of_token(tok).ok_or_else(|| {
                format!("line {line_no}: token '{tok}' not in index alphabet")
            })
        }
        SymbolSyntax::Model(m @ SymbolModel::Bytes { .. }) => {
            let b = parse_byte_literal(tok)
                .map_err(|msg| format!("line {line_no}: {msg}"))?;
            m.sym_of_byte(b).ok_or_else(|| {
                format!(
                    "line {line_no}: byte {} not in index alphabet",
                    render_byte(b)
                )
            })
        }
    }
}

/// Reads a byte-model symbol literal.
pub fn parse_byte_literal(tok: &str) -> Result<u8, String> {
    let b = tok.as_bytes();
    match b {
        [c] if c.is_ascii() => Ok(*c),
        [b'\\', b's'] => Ok(b' '),
        [b'\\', b't'] => Ok(b'\t'),
        [b'\\', b'n'] => Ok(b'\n'),
        [b'\\', b'\\'] => Ok(b'\\'),
        [b'\\', b'x', h1, h2] => {
            let hi = (*h1 as char).to_digit(16);
            let lo = (*h2 as char).to_digit(16);
            match (hi, lo) {
                (Some(h), Some(l)) => Ok((h * 16 + l) as u8),
                _ => Err(format!("bad symbol literal '{tok}'")),
            }
        }
        _ => Err(format!("bad symbol literal '{tok}'")),
    }
}

/// Renders a byte as a script symbol literal (inverse of
/// [`parse_byte_literal`]); also the output form for `A`/`X` results.
pub fn render_byte(b: u8) -> String {
    match b {
        b' ' => "\\s".to_string(),
        b'\t' => "\\t".to_string(),
        b'\n' => "\\n".to_string(),
        b'\\' => "\\\\".to_string(),
        0x21..=0x7e => (b as char).to_string(),
        _ => format!("\\x{b:02x}"),
    }
}
