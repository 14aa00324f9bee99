//! Order-maintenance list with O(1) comparisons.
//!
//! Entries live in buckets; a bucket holds at most `bucket_cap` entries.
//! Every bucket carries a 64-bit tag, every entry a 64-bit tag local to its
//! bucket, and list order is the lexicographic order of (bucket tag, entry
//! tag). An insertion takes the midpoint of its neighbors' tags; when the
//! gap is exhausted the bucket is respaced, when a bucket overflows it is
//! split, and when bucket tags themselves run out all bucket tags are
//! relabeled evenly. Each relabeling halves local density, which is what
//! makes the scheme amortized O(1) per insertion.
//!
//! Handles are generation-checked slab indices: they survive relabeling and
//! become invalid exactly when their entry is deleted.

use crate::error::{Error, Result};
use std::cmp::Ordering;

const NONE: u32 = u32::MAX;

/// Stable reference to a list entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle {
    idx: u32,
    gen: u32,
}

impl Handle {
    /// Slot index; dense side tables may use it as an array key. Indices are
    /// reused after deletion, so pair any cached index with liveness checks.
    pub fn index(&self) -> usize {
        self.idx as usize
    }
}

#[derive(Debug, Clone)]
struct Entry<T> {
    prev: u32,
    next: u32,
    bucket: u32,
    tag: u64,
    gen: u32,
    alive: bool,
    payload: Option<T>,
}

#[derive(Debug, Clone)]
struct Bucket {
    prev: u32,
    next: u32,
    tag: u64,
    head: u32,
    count: u32,
    in_use: bool,
}

/// Doubly linked list with O(1) order comparison between handles.
#[derive(Debug, Clone)]
pub struct OrderedList<T> {
    entries: Vec<Entry<T>>,
    free_entries: Vec<u32>,
    buckets: Vec<Bucket>,
    free_buckets: Vec<u32>,
    first_bucket: u32,
    last_bucket: u32,
    len: usize,
    bucket_cap: usize,
}

impl<T> Default for OrderedList<T> {
    fn default() -> Self {
        OrderedList::new(64)
    }
}

impl<T> OrderedList<T> {
    pub fn new(bucket_cap: usize) -> Self {
        assert!(bucket_cap >= 2);
        OrderedList {
            entries: Vec::new(),
            free_entries: Vec::new(),
            buckets: Vec::new(),
            free_buckets: Vec::new(),
            first_bucket: NONE,
            last_bucket: NONE,
            len: 0,
            bucket_cap,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_valid(&self, h: Handle) -> bool {
        (h.idx as usize) < self.entries.len() && {
            let e = &self.entries[h.idx as usize];
            e.alive && e.gen == h.gen
        }
    }

    fn check(&self, h: Handle) -> Result<u32> {
        if self.is_valid(h) {
            Ok(h.idx)
        } else {
            Err(Error::InvalidHandle)
        }
    }

    fn handle_of(&self, idx: u32) -> Handle {
        Handle {
            idx,
            gen: self.entries[idx as usize].gen,
        }
    }

    /// First entry in list order.
    pub fn first(&self) -> Option<Handle> {
        if self.first_bucket == NONE {
            return None;
        }
        let b = &self.buckets[self.first_bucket as usize];
        Some(self.handle_of(b.head))
    }

    pub fn next(&self, h: Handle) -> Result<Option<Handle>> {
        let idx = self.check(h)?;
        let e = &self.entries[idx as usize];
        if e.next != NONE {
            return Ok(Some(self.handle_of(e.next)));
        }
        let mut b = self.buckets[e.bucket as usize].next;
        while b != NONE {
            let bk = &self.buckets[b as usize];
            if bk.count > 0 {
                return Ok(Some(self.handle_of(bk.head)));
            }
            b = bk.next;
        }
        Ok(None)
    }

    pub fn prev(&self, h: Handle) -> Result<Option<Handle>> {
        let idx = self.check(h)?;
        let e = &self.entries[idx as usize];
        if e.prev != NONE {
            return Ok(Some(self.handle_of(e.prev)));
        }
        let mut b = self.buckets[e.bucket as usize].prev;
        while b != NONE {
            let bk = &self.buckets[b as usize];
            if bk.count > 0 {
                let mut last = bk.head;
                while self.entries[last as usize].next != NONE {
                    last = self.entries[last as usize].next;
                }
                return Ok(Some(self.handle_of(last)));
            }
            b = bk.prev;
        }
        Ok(None)
    }

    pub fn payload(&self, h: Handle) -> Result<&T> {
        let idx = self.check(h)?;
        Ok(self.entries[idx as usize].payload.as_ref().unwrap())
    }

    pub fn payload_mut(&mut self, h: Handle) -> Result<&mut T> {
        let idx = self.check(h)?;
        Ok(self.entries[idx as usize].payload.as_mut().unwrap())
    }

    /// Order verdict for two live handles; an entry equals itself.
    pub fn compare(&self, h1: Handle, h2: Handle) -> Result<Ordering> {
        let a = self.check(h1)?;
        let b = self.check(h2)?;
        if a == b {
            return Ok(Ordering::Equal);
        }
        let ea = &self.entries[a as usize];
        let eb = &self.entries[b as usize];
        let ka = (self.buckets[ea.bucket as usize].tag, ea.tag);
        let kb = (self.buckets[eb.bucket as usize].tag, eb.tag);
        Ok(ka.cmp(&kb))
    }

    /// Inserts a new entry immediately after `after`, or at the front when
    /// `after` is `None`.
    pub fn insert_after(&mut self, after: Option<Handle>, payload: T) -> Result<Handle> {
        let after_idx = match after {
            Some(h) => Some(self.check(h)?),
            None => None,
        };
        let idx = self.alloc_entry(payload);
        match after_idx {
            None => self.link_front(idx),
            Some(p) => self.link_after(p, idx),
        }
        self.len += 1;
        Ok(self.handle_of(idx))
    }

    pub fn push_back(&mut self, payload: T) -> Handle {
        let last = self.last_handle();
        self.insert_after(last, payload).unwrap()
    }

    fn last_handle(&self) -> Option<Handle> {
        let mut b = self.last_bucket;
        while b != NONE {
            let bk = &self.buckets[b as usize];
            if bk.count > 0 {
                let mut last = bk.head;
                while self.entries[last as usize].next != NONE {
                    last = self.entries[last as usize].next;
                }
                return Some(self.handle_of(last));
            }
            b = bk.prev;
        }
        None
    }

    pub fn delete(&mut self, h: Handle) -> Result<T> {
        let idx = self.check(h)?;
        let (bucket, prev, next) = {
            let e = &self.entries[idx as usize];
            (e.bucket, e.prev, e.next)
        };
        if prev != NONE {
            self.entries[prev as usize].next = next;
        } else {
            self.buckets[bucket as usize].head = next;
        }
        if next != NONE {
            self.entries[next as usize].prev = prev;
        }
        self.buckets[bucket as usize].count -= 1;
        if self.buckets[bucket as usize].count == 0 {
            self.unlink_bucket(bucket);
        }
        let e = &mut self.entries[idx as usize];
        e.alive = false;
        e.gen = e.gen.wrapping_add(1);
        let payload = e.payload.take().unwrap();
        self.free_entries.push(idx);
        self.len -= 1;
        Ok(payload)
    }

    // === internal linking ===

    fn alloc_entry(&mut self, payload: T) -> u32 {
        if let Some(idx) = self.free_entries.pop() {
            let e = &mut self.entries[idx as usize];
            e.alive = true;
            e.payload = Some(payload);
            idx
        } else {
            self.entries.push(Entry {
                prev: NONE,
                next: NONE,
                bucket: NONE,
                tag: 0,
                gen: 0,
                alive: true,
                payload: Some(payload),
            });
            (self.entries.len() - 1) as u32
        }
    }

    fn alloc_bucket(&mut self) -> u32 {
        if let Some(b) = self.free_buckets.pop() {
            self.buckets[b as usize].in_use = true;
            b
        } else {
            self.buckets.push(Bucket {
                prev: NONE,
                next: NONE,
                tag: 0,
                head: NONE,
                count: 0,
                in_use: true,
            });
            (self.buckets.len() - 1) as u32
        }
    }

    fn unlink_bucket(&mut self, b: u32) {
        let (prev, next) = {
            let bk = &self.buckets[b as usize];
            (bk.prev, bk.next)
        };
        if prev != NONE {
            self.buckets[prev as usize].next = next;
        } else {
            self.first_bucket = next;
        }
        if next != NONE {
            self.buckets[next as usize].prev = prev;
        } else {
            self.last_bucket = prev;
        }
        let bk = &mut self.buckets[b as usize];
        bk.in_use = false;
        bk.head = NONE;
        self.free_buckets.push(b);
    }

    fn link_front(&mut self, idx: u32) {
        if self.first_bucket == NONE {
            let b = self.alloc_bucket();
            self.buckets[b as usize].tag = u64::MAX / 2;
            self.first_bucket = b;
            self.last_bucket = b;
        }
        let b = self.first_bucket;
        let head = self.buckets[b as usize].head;
        let e = &mut self.entries[idx as usize];
        e.bucket = b;
        e.prev = NONE;
        e.next = head;
        if head != NONE {
            self.entries[head as usize].prev = idx;
        }
        self.buckets[b as usize].head = idx;
        self.buckets[b as usize].count += 1;
        self.assign_tag(idx);
        self.maybe_split(b);
    }

    fn link_after(&mut self, p: u32, idx: u32) {
        let b = self.entries[p as usize].bucket;
        let next = self.entries[p as usize].next;
        {
            let e = &mut self.entries[idx as usize];
            e.bucket = b;
            e.prev = p;
            e.next = next;
        }
        self.entries[p as usize].next = idx;
        if next != NONE {
            self.entries[next as usize].prev = idx;
        }
        self.buckets[b as usize].count += 1;
        self.assign_tag(idx);
        self.maybe_split(b);
    }

    /// Gives `idx` a tag strictly between its neighbors, respacing the whole
    /// bucket when the local gap is exhausted.
    fn assign_tag(&mut self, idx: u32) {
        let (prev, next) = {
            let e = &self.entries[idx as usize];
            (e.prev, e.next)
        };
        let lo = if prev == NONE {
            0
        } else {
            self.entries[prev as usize].tag
        };
        let hi = if next == NONE {
            u64::MAX
        } else {
            self.entries[next as usize].tag
        };
        if hi - lo >= 2 {
            self.entries[idx as usize].tag = lo + (hi - lo) / 2;
        } else {
            self.respace_bucket(self.entries[idx as usize].bucket);
        }
    }

    fn respace_bucket(&mut self, b: u32) {
        let count = self.buckets[b as usize].count as u64;
        let step = u64::MAX / (count + 1);
        let mut cur = self.buckets[b as usize].head;
        let mut tag = step;
        while cur != NONE {
            self.entries[cur as usize].tag = tag;
            tag = tag.wrapping_add(step);
            cur = self.entries[cur as usize].next;
        }
    }

    fn maybe_split(&mut self, b: u32) {
        if (self.buckets[b as usize].count as usize) <= self.bucket_cap {
            return;
        }
        // Move the back half into a freshly tagged bucket after `b`.
        let count = self.buckets[b as usize].count;
        let keep = count / 2;
        let mut cur = self.buckets[b as usize].head;
        for _ in 1..keep {
            cur = self.entries[cur as usize].next;
        }
        let split_head = self.entries[cur as usize].next;
        self.entries[cur as usize].next = NONE;
        self.entries[split_head as usize].prev = NONE;

        let nb = self.alloc_bucket();
        let b_next = self.buckets[b as usize].next;
        {
            let nbk = &mut self.buckets[nb as usize];
            nbk.prev = b;
            nbk.next = b_next;
            nbk.head = split_head;
            nbk.count = count - keep;
        }
        self.buckets[b as usize].next = nb;
        self.buckets[b as usize].count = keep;
        if b_next != NONE {
            self.buckets[b_next as usize].prev = nb;
        } else {
            self.last_bucket = nb;
        }
        let mut cur = split_head;
        while cur != NONE {
            self.entries[cur as usize].bucket = nb;
            cur = self.entries[cur as usize].next;
        }
        self.respace_bucket(b);
        self.respace_bucket(nb);
        self.tag_new_bucket(nb);
    }

    fn tag_new_bucket(&mut self, nb: u32) {
        let prev = self.buckets[nb as usize].prev;
        let next = self.buckets[nb as usize].next;
        let lo = if prev == NONE {
            0
        } else {
            self.buckets[prev as usize].tag
        };
        let hi = if next == NONE {
            u64::MAX
        } else {
            self.buckets[next as usize].tag
        };
        if hi - lo >= 2 {
            self.buckets[nb as usize].tag = lo + (hi - lo) / 2;
        } else {
            self.relabel_buckets();
        }
    }

    /// Evenly redistributes all bucket tags; rare, O(#buckets).
    fn relabel_buckets(&mut self) {
        let mut ids = Vec::new();
        let mut b = self.first_bucket;
        while b != NONE {
            ids.push(b);
            b = self.buckets[b as usize].next;
        }
        let step = u64::MAX / (ids.len() as u64 + 1);
        let mut tag = step;
        for id in ids {
            self.buckets[id as usize].tag = tag;
            tag = tag.wrapping_add(step);
        }
    }

    /// Entries in list order.
    pub fn iter(&self) -> impl Iterator<Item = Handle> + '_ {
        let mut bucket = self.first_bucket;
        let mut entry = NONE;
        std::iter::from_fn(move || loop {
            if entry != NONE {
                let h = self.handle_of(entry);
                entry = self.entries[entry as usize].next;
                return Some(h);
            }
            if bucket == NONE {
                return None;
            }
            entry = self.buckets[bucket as usize].head;
            bucket = self.buckets[bucket as usize].next;
        })
    }

    /// One line per entry: handle id, (bucket tag, entry tag), payload.
    pub fn dump(&self, out: &mut impl std::io::Write) -> std::io::Result<()>
    where
        T: std::fmt::Debug,
    {
        for h in self.iter() {
            let e = &self.entries[h.idx as usize];
            writeln!(
                out,
                "{}\t({}, {})\t{:?}",
                h.idx,
                self.buckets[e.bucket as usize].tag,
                e.tag,
                e.payload.as_ref().unwrap()
            )?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::AuditFailed(m));
        let mut seen = 0usize;
        let mut last_key: Option<(u64, u64)> = None;
        let mut b = self.first_bucket;
        let mut last_b = NONE;
        while b != NONE {
            let bk = &self.buckets[b as usize];
            if !bk.in_use {
                return fail(format!("bucket {b} linked but free"));
            }
            if bk.prev != last_b {
                return fail(format!("bucket {b} back-link broken"));
            }
            if bk.count == 0 {
                return fail(format!("bucket {b} empty but linked"));
            }
            if bk.count as usize > self.bucket_cap {
                return fail(format!("bucket {b} over capacity"));
            }
            let mut cur = bk.head;
            let mut prev = NONE;
            let mut in_bucket = 0u32;
            while cur != NONE {
                let e = &self.entries[cur as usize];
                if !e.alive || e.bucket != b || e.prev != prev {
                    return fail(format!("entry {cur} linkage broken"));
                }
                let key = (bk.tag, e.tag);
                if let Some(lk) = last_key {
                    if key <= lk {
                        return fail(format!("tags not increasing at entry {cur}"));
                    }
                }
                last_key = Some(key);
                seen += 1;
                in_bucket += 1;
                prev = cur;
                cur = e.next;
            }
            if in_bucket != bk.count {
                return fail(format!("bucket {b} count mismatch"));
            }
            last_b = b;
            b = bk.next;
        }
        if last_b != self.last_bucket {
            return fail("last bucket pointer stale".into());
        }
        if seen != self.len {
            return fail(format!("length mismatch: walked {seen}, stored {}", self.len));
        }
        Ok(())
    }
}
