//! `sdseq build`: read a file, map it to a dense alphabet, build the index,
//! report its space breakdown, and write the index file.

use crate::index::{Index, SymbolModel};
use crate::{report, EXIT_OK};
use anyhow::{bail, Context, Result};
use clap::Args;
use sdseq::cseq::CompressedSeq;
use std::path::PathBuf;

#[derive(Args)]
pub struct BuildArgs {
    /// Input text file.
    pub input: PathBuf,
    /// Alphabet size: `auto` uses the number of distinct input symbols.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    /// Section count (default derived from n).
    #[arg(long)]
    pub r: Option<usize>,
    /// Context order for the compressibility report.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Map whitespace-delimited tokens instead of bytes.
    #[arg(long)]
    pub tokenize: bool,
    /// Output index path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: BuildArgs) -> Result<i32> {
    let data = std::fs::read(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let (syms, model) = map_input(&data, args.tokenize)?;
    let distinct = model.mapped();
    let sigma = match args.sigma.as_str() {
        "auto" => distinct.max(1),
        s => {
            let n: usize = s
                .parse()
                .with_context(|| format!("--sigma takes 'auto' or a number, got '{s}'"))?;
            if n < distinct {
                bail!(
                    "symbol overflow: input has {distinct} distinct symbols, --sigma {n}"
                );
            }
            n.max(1)
        }
    };
    let cfg = Index::config(args.k, args.r);
    let seq = CompressedSeq::from_symbols(&syms, sigma, &cfg)
        .with_context(|| "building index".to_string())?;
    let built_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut idx = Index {
        seq,
        model,
        k: args.k,
        built_at,
    };
    let written = idx.save(&args.out)?;

    let rep = idx.seq.space_report()?;
    println!("input={}", args.input.display());
    println!("n={}", rep.n);
    println!("sigma={sigma}");
    println!("distinct={distinct}");
    println!("parts={}", idx.seq.parts());
    println!("k={}", rep.k);
    println!("h0={:.4}", rep.h0);
    println!("h{}={:.4}", rep.k, rep.hk);
    println!("bits_total={}", rep.bits_total);
    if rep.n > 0 {
        println!(
            "bits_per_symbol={:.4}",
            rep.bits_total as f64 / rep.n as f64
        );
    }
    println!("out={}", args.out.display());
    println!("bytes_written={written}");
    let rows: Vec<Vec<String>> = rep
        .breakdown
        .iter()
        .map(|(name, bits)| {
            let share = if rep.bits_total > 0 {
                *bits as f64 * 100.0 / rep.bits_total as f64
            } else {
                0.0
            };
            vec![
                name.to_string(),
                bits.to_string(),
                format!("{share:.1}"),
            ]
        })
        .collect();
    print!("{}", report::table(&["component", "bits", "%"], &rows));
    Ok(EXIT_OK)
}

/// Maps raw input to dense symbols plus the model that renders them back.
pub fn map_input(data: &[u8], tokenize: bool) -> Result<(Vec<u32>, SymbolModel)> {
    if tokenize {
        let text = std::str::from_utf8(data)
            .context("--tokenize input must be UTF-8")?;
        let mut toks: Vec<String> = Vec::new();
        let mut order: std::collections::HashMap<&str, u32> =
            std::collections::HashMap::new();
        let mut syms = Vec::new();
        for t in text.split_whitespace() {
            let id = match order.get(t) {
                Some(&id) => id,
                None => {
                    let id = toks.len() as u32;
                    order.insert(t, id);
                    toks.push(t.to_string());
                    id
                }
            };
            syms.push(id);
        }
        Ok((syms, SymbolModel::Tokens { toks }))
    } else {
        let mut present = [false; 256];
        for &b in data {
            present[b as usize] = true;
        }
        let map: Vec<u8> = (0..=255u8).filter(|&b| present[b as usize]).collect();
        let mut dense = [0u32; 256];
        for (i, &b) in map.iter().enumerate() {
            dense[b as usize] = i as u32;
        }
        let syms: Vec<u32> = data.iter().map(|&b| dense[b as usize]).collect();
        Ok((syms, SymbolModel::Bytes { map }))
    }
}
