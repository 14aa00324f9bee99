//! Index file envelope: a small metadata header (symbol model, context
//! order, build timestamp) wrapping the sequence container blob.

use anyhow::{bail, Context, Result};
use sdseq::cseq::CompressedSeq;
use sdseq::CoreConfig;
use std::io::Read;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SDSI";
const VERSION: u16 = 1;

/// How stored symbols map to user-visible text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolModel {
    /// Symbol = index into a sorted list of the distinct byte values that
    /// occurred in the input.
    Bytes { map: Vec<u8> },
    /// Symbol = index into the token list, in order of first appearance.
    Tokens { toks: Vec<String> },
}

impl SymbolModel {
    /// Number of symbols the model can render.
    pub fn mapped(&self) -> usize {
        match self {
            SymbolModel::Bytes { map } => map.len(),
            SymbolModel::Tokens { toks } => toks.len(),
        }
    }

    /// Symbol for a byte value, if the byte occurred at build time.
    pub fn sym_of_byte(&self, b: u8) -> Option<u32> {
        match self {
            SymbolModel::Bytes { map } => {
                map.binary_search(&b).ok().map(|i| i as u32)
            }
            SymbolModel::Tokens { .. } => None,
        }
    }

    /// Symbol for a token, if the token occurred at build time.
    pub fn sym_of_token(&self, t: &str) -> Option<u32> {
        match self {
            SymbolModel::Bytes { .. } => None,
            SymbolModel::Tokens { toks } => {
                toks.iter().position(|x| x == t).map(|i| i as u32)
            }
        }
    }
}

pub struct Index {
    pub seq: CompressedSeq,
    pub model: SymbolModel,
    pub k: usize,
    pub built_at: u64,
}

impl Index {
    pub fn config(k: usize, r: Option<usize>) -> CoreConfig {
        CoreConfig {
            context_order: k,
            section_count: r,
            ..CoreConfig::default()
        }
    }

    pub fn save(&mut self, path: &Path) -> Result<u64> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&0u16.to_le_bytes()); // reserved
        buf.extend_from_slice(&(self.k as u32).to_le_bytes());
        buf.extend_from_slice(&self.built_at.to_le_bytes());
        match &self.model {
            SymbolModel::Bytes { map } => {
                buf.push(0u8);
                buf.extend_from_slice(&(map.len() as u16).to_le_bytes());
                buf.extend_from_slice(map);
            }
            SymbolModel::Tokens { toks } => {
                buf.push(1u8);
                buf.extend_from_slice(&(toks.len() as u32).to_le_bytes());
                for t in toks {
                    buf.extend_from_slice(&(t.len() as u16).to_le_bytes());
                    buf.extend_from_slice(t.as_bytes());
                }
            }
        }
        self.seq
            .save(&mut buf)
            .with_context(|| "serializing sequence".to_string())?;
        std::fs::write(path, &buf)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(buf.len() as u64)
    }

    pub fn load(path: &Path) -> Result<Index> {
        let data = std::fs::read(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut r: &[u8] = &data;
        let mut head = [0u8; 4];
        r.read_exact(&mut head)
            .with_context(|| "index header truncated".to_string())?;
        if &head != MAGIC {
            bail!("{} is not an index file", path.display());
        }
        let ver = read_u16(&mut r)?;
        if ver != VERSION {
            bail!("unsupported index version {ver}");
        }
        let _flags = read_u16(&mut r)?;
        let k = read_u32(&mut r)? as usize;
        let built_at = read_u64(&mut r)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let model = match tag[0] {
            0 => {
                let cnt = read_u16(&mut r)? as usize;
                let mut map = vec![0u8; cnt];
                r.read_exact(&mut map)?;
                if !map.windows(2).all(|w| w[0] < w[1]) {
                    bail!("corrupt byte map in index header");
                }
                SymbolModel::Bytes { map }
            }
            1 => {
                let cnt = read_u32(&mut r)? as usize;
                if cnt > 1 << 28 {
                    bail!("corrupt token table in index header");
                }
                let mut toks = Vec::with_capacity(cnt);
                for _ in 0..cnt {
                    let len = read_u16(&mut r)? as usize;
                    let mut b = vec![0u8; len];
                    r.read_exact(&mut b)?;
                    toks.push(String::from_utf8(b).context("token not UTF-8")?);
                }
                SymbolModel::Tokens { toks }
            }
            t => bail!("unknown symbol model tag {t}"),
        };
        let cfg = Index::config(k, None);
        let seq = CompressedSeq::load(&mut r, &cfg)
            .with_context(|| format!("loading sequence from {}", path.display()))?;
        Ok(Index {
            seq,
            model,
            k,
            built_at,
        })
    }
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
