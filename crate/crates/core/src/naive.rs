//! Plain vector-backed reference sequence used as a test oracle.
//!
//! Every operation is implemented by direct scanning so behavior is obvious
//! by inspection. Tests compare the real structures against this
//! implementation; nothing here is performance-sensitive.

use crate::error::{Error, Result};

/// Reference implementation of a dynamic sequence over `[0, sigma)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveSeq {
    data: Vec<u32>,
    sigma: usize,
}

impl NaiveSeq {
    pub fn new(sigma: usize) -> Self {
        NaiveSeq {
            data: Vec::new(),
            sigma,
        }
    }

    pub fn from_symbols(symbols: &[u32], sigma: usize) -> Result<Self> {
        for &s in symbols {
            if s as usize >= sigma {
                return Err(Error::SymbolOutOfRange {
                    sym: s as u64,
                    sigma: sigma as u64,
                });
            }
        }
        Ok(NaiveSeq {
            data: symbols.to_vec(),
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn symbols(&self) -> &[u32] {
        &self.data
    }

    pub fn count(&self, a: u32) -> usize {
        self.data.iter().filter(|&&x| x == a).count()
    }

    pub fn access(&self, i: usize) -> Result<u32> {
        self.data.get(i).copied().ok_or(Error::OutOfRange {
            pos: i,
            len: self.data.len(),
        })
    }

    /// Occurrences of `a` in positions `[0, i)`.
    pub fn rank(&self, a: u32, i: usize) -> Result<usize> {
        if i > self.data.len() {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.data.len(),
            });
        }
        Ok(self.data[..i].iter().filter(|&&x| x == a).count())
    }

    /// Occurrences of `self[i]` in positions `[0, i]` (always at least 1).
    pub fn partial_rank(&self, i: usize) -> Result<usize> {
        let a = self.access(i)?;
        Ok(self.rank(a, i + 1).unwrap())
    }

    /// 0-based position of the `j`-th (1-based) occurrence of `a`.
    pub fn select(&self, a: u32, j: usize) -> Result<usize> {
        if j >= 1 {
            let mut seen = 0usize;
            for (pos, &x) in self.data.iter().enumerate() {
                if x == a {
                    seen += 1;
                    if seen == j {
                        return Ok(pos);
                    }
                }
            }
        }
        Err(Error::OccurrenceOutOfRange {
            occ: j,
            count: self.count(a),
        })
    }

    pub fn insert(&mut self, i: usize, a: u32) -> Result<()> {
        if a as usize >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        if i > self.data.len() {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.data.len(),
            });
        }
        self.data.insert(i, a);
        Ok(())
    }

    pub fn delete(&mut self, i: usize) -> Result<u32> {
        if i >= self.data.len() {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.data.len(),
            });
        }
        Ok(self.data.remove(i))
    }

    pub fn extract(&self, i: usize, len: usize) -> Result<Vec<u32>> {
        if i + len > self.data.len() {
            return Err(Error::OutOfRange {
                pos: i + len,
                len: self.data.len(),
            });
        }
        Ok(self.data[i..i + len].to_vec())
    }
}
