//! Small dynamic string over a colored list.
//!
//! Symbols are colors on an order-maintenance list; one positional index
//! covers the whole list and one per live symbol covers that symbol's
//! sublist. rank goes colored-predecessor then position-in-sublist;
//! select goes position-in-sublist then position-in-list. All operations
//! are logarithmic in the string length.

use crate::colored::ColoredList;
use crate::error::{Error, Result};
use crate::order::{Handle, PrefixIndex};

#[derive(Debug, Clone)]
pub struct ListString {
    cl: ColoredList,
    /// Positions of all entries, 1-based.
    d_l: PrefixIndex,
    /// Positions within each symbol's sublist; created on first use.
    d_la: Vec<Option<Box<PrefixIndex>>>,
    degree: usize,
}

impl ListString {
    pub fn new(sigma: usize, capacity_hint: usize, degree: usize) -> Self {
        ListString {
            cl: ColoredList::new(sigma, capacity_hint),
            d_l: PrefixIndex::new(degree),
            d_la: vec![None; sigma],
            degree,
        }
    }

    pub fn from_symbols(syms: &[u32], sigma: usize, capacity_hint: usize, degree: usize) -> Result<Self> {
        let mut ls = ListString::new(sigma, capacity_hint, degree);
        let mut last: Option<Handle> = None;
        let mut last_of: Vec<Option<Handle>> = vec![None; sigma];
        for &a in syms {
            if a as usize >= sigma {
                return Err(Error::SymbolOutOfRange {
                    sym: a as u64,
                    sigma: sigma as u64,
                });
            }
            let h = ls.cl.cp_insert(last, a)?;
            ls.d_l.insert_after(last, h)?;
            let degree = ls.degree;
            ls.d_la[a as usize]
                .get_or_insert_with(|| Box::new(PrefixIndex::new(degree)))
                .insert_after(last_of[a as usize], h)?;
            last = Some(h);
            last_of[a as usize] = Some(h);
        }
        Ok(ls)
    }

    pub fn len(&self) -> usize {
        self.cl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cl.is_empty()
    }

    pub fn sigma(&self) -> usize {
        self.cl.sigma()
    }

    pub fn count(&self, a: u32) -> usize {
        self.cl.count_color(a)
    }

    fn check_sym(&self, a: u32) -> Result<()> {
        if (a as usize) < self.sigma() {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma() as u64,
            })
        }
    }

    /// Symbol at position `i`.
    pub fn access(&self, i: usize) -> Result<u32> {
        let h = self.d_l.select(i + 1).map_err(|_| Error::OutOfRange {
            pos: i,
            len: self.len(),
        })?;
        self.cl.color(h)
    }

    /// Occurrences of `a` in positions `[0, i)`.
    pub fn rank(&self, a: u32, i: usize) -> Result<usize> {
        self.check_sym(a)?;
        if i > self.len() {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.len(),
            });
        }
        if i == 0 {
            return Ok(0);
        }
        let h = self.d_l.select(i)?;
        match self.cl.cp_pred(h, a)? {
            None => Ok(0),
            Some(p) => self.d_la[a as usize]
                .as_ref()
                .expect("predecessor of absent symbol")
                .rank(p),
        }
    }

    /// Position of the `j`-th occurrence of `a`, `j` counted from 1.
    pub fn select(&self, a: u32, j: usize) -> Result<usize> {
        self.check_sym(a)?;
        let cnt = self.count(a);
        if j == 0 || j > cnt {
            return Err(Error::OccurrenceOutOfRange { occ: j, count: cnt });
        }
        let h = self.d_la[a as usize].as_ref().unwrap().select(j)?;
        Ok(self.d_l.rank(h)? - 1)
    }

    pub fn insert(&mut self, i: usize, a: u32) -> Result<()> {
        self.check_sym(a)?;
        if i > self.len() {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.len(),
            });
        }
        let after = if i == 0 { None } else { Some(self.d_l.select(i)?) };
        let pred_a = match after {
            Some(x) => self.cl.cp_pred(x, a)?,
            None => None,
        };
        let h = self.cl.cp_insert(after, a)?;
        self.d_l.insert_after(after, h)?;
        let degree = self.degree;
        self.d_la[a as usize]
            .get_or_insert_with(|| Box::new(PrefixIndex::new(degree)))
            .insert_after(pred_a, h)?;
        Ok(())
    }

    /// Removes and returns the symbol at position `i`.
    pub fn delete(&mut self, i: usize) -> Result<u32> {
        let h = self.d_l.select(i + 1).map_err(|_| Error::OutOfRange {
            pos: i,
            len: self.len(),
        })?;
        let a = self.cl.color(h)?;
        self.d_l.delete(h)?;
        self.d_la[a as usize].as_mut().unwrap().delete(h)?;
        self.cl.cp_delete(h)?;
        Ok(a)
    }

    /// Symbols in order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.cl.iter().map(move |h| self.cl.color(h).unwrap())
    }

    pub fn validate(&self) -> Result<()> {
        self.cl.validate()?;
        self.d_l.validate()?;
        let fail = |m: String| Err(Error::AuditFailed(m));
        if self.d_l.len() != self.cl.len() {
            return fail("main index length drifted".into());
        }
        let in_list: Vec<Handle> = self.cl.iter().collect();
        let in_index: Vec<Handle> = self.d_l.iter().collect();
        if in_list != in_index {
            return fail("main index order drifted".into());
        }
        for a in 0..self.sigma() {
            let cnt = self.cl.count_color(a as u32);
            match &self.d_la[a] {
                None => {
                    if cnt != 0 {
                        return fail(format!("symbol {a} missing its index"));
                    }
                }
                Some(pi) => {
                    pi.validate()?;
                    if pi.len() != cnt {
                        return fail(format!("symbol {a} index length drifted"));
                    }
                    let want: Vec<Handle> = self.cl.iter_color(a as u32).collect();
                    let got: Vec<Handle> = pi.iter().collect();
                    if want != got {
                        return fail(format!("symbol {a} index order drifted"));
                    }
                }
            }
        }
        Ok(())
    }
}
