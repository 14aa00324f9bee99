//! Positional index over list entries.
//!
//! A B+-tree whose leaves hold entry handles in list order and whose
//! internal nodes hold per-subtree entry counts, giving logarithmic
//! `rank` and `select`. Positions are 1-based: the first entry has rank 1
//! and `select(1)` returns it, so an entry always precedes itself when
//! ranks are compared with `<=`.
//!
//! A dense slot-indexed map points from each handle to its leaf, so `rank`
//! starts at the leaf and climbs instead of searching from the root.

use super::list::Handle;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf(Vec<Handle>),
    Internal { children: Vec<u32>, counts: Vec<u32> },
}

#[derive(Debug, Clone)]
struct Node {
    parent: u32,
    in_use: bool,
    kind: NodeKind,
}

enum Taken {
    Entry(Handle),
    Child(u32, u32),
}

/// B+-tree mapping list entries to 1-based positions and back.
#[derive(Debug, Clone)]
pub struct PrefixIndex {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    len: usize,
    degree: usize,
    /// Handle slot index -> id of the leaf holding that handle.
    slots: Vec<u32>,
}

impl PrefixIndex {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 4, "degree must allow a split into legal halves");
        PrefixIndex {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NONE,
            len: 0,
            degree,
            slots: Vec::new(),
        }
    }

    /// Bottom-up bulk construction from entries already in list order.
    pub fn from_handles(degree: usize, handles: impl IntoIterator<Item = Handle>) -> Self {
        let mut pi = PrefixIndex::new(degree);
        let hs: Vec<Handle> = handles.into_iter().collect();
        if hs.is_empty() {
            return pi;
        }
        pi.len = hs.len();
        let mut level: Vec<(u32, u32)> = Vec::new();
        for group in even_chunks(hs.len(), degree) {
            let entries: Vec<Handle> = hs[group.clone()].to_vec();
            let count = entries.len() as u32;
            let id = pi.alloc(Node {
                parent: NONE,
                in_use: true,
                kind: NodeKind::Leaf(entries),
            });
            for &h in &hs[group] {
                pi.set_slot(h, id);
            }
            level.push((id, count));
        }
        while level.len() > 1 {
            let mut next: Vec<(u32, u32)> = Vec::new();
            for group in even_chunks(level.len(), degree) {
                let children: Vec<u32> = level[group.clone()].iter().map(|x| x.0).collect();
                let counts: Vec<u32> = level[group].iter().map(|x| x.1).collect();
                let total: u32 = counts.iter().sum();
                let id = pi.alloc(Node {
                    parent: NONE,
                    in_use: true,
                    kind: NodeKind::Internal { children: children.clone(), counts },
                });
                for c in children {
                    pi.nodes[c as usize].parent = id;
                }
                next.push((id, total));
            }
            level = next;
        }
        pi.root = level[0].0;
        pi
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, h: Handle) -> bool {
        self.slot_of(h)
            .and_then(|leaf| self.pos_in_leaf(leaf, h))
            .is_ok()
    }

    /// 1-based position of `h` in list order.
    pub fn rank(&self, h: Handle) -> Result<usize> {
        let leaf = self.slot_of(h)?;
        let mut r = self.pos_in_leaf(leaf, h)? + 1;
        let mut child = leaf;
        let mut parent = self.nodes[child as usize].parent;
        while parent != NONE {
            let idx = self.child_index(parent, child);
            if let NodeKind::Internal { counts, .. } = &self.nodes[parent as usize].kind {
                r += counts[..idx].iter().map(|&c| c as usize).sum::<usize>();
            }
            child = parent;
            parent = self.nodes[child as usize].parent;
        }
        Ok(r)
    }

    /// Entry at 1-based position `i`.
    pub fn select(&self, i: usize) -> Result<Handle> {
        if i == 0 || i > self.len {
            return Err(Error::OutOfRange {
                pos: i,
                len: self.len,
            });
        }
        let mut id = self.root;
        let mut rem = i - 1;
        loop {
            match &self.nodes[id as usize].kind {
                NodeKind::Leaf(entries) => return Ok(entries[rem]),
                NodeKind::Internal { children, counts } => {
                    let mut k = 0;
                    while rem >= counts[k] as usize {
                        rem -= counts[k] as usize;
                        k += 1;
                    }
                    id = children[k];
                }
            }
        }
    }

    /// Registers `h` immediately after `prev` (front when `None`).
    pub fn insert_after(&mut self, prev: Option<Handle>, h: Handle) -> Result<()> {
        match prev {
            None => {
                if self.root == NONE {
                    let leaf = self.alloc(Node {
                        parent: NONE,
                        in_use: true,
                        kind: NodeKind::Leaf(vec![h]),
                    });
                    self.root = leaf;
                    self.set_slot(h, leaf);
                    self.len = 1;
                    return Ok(());
                }
                let mut id = self.root;
                while let NodeKind::Internal { children, .. } = &self.nodes[id as usize].kind {
                    id = children[0];
                }
                self.insert_in_leaf(id, 0, h);
            }
            Some(p) => {
                let leaf = self.slot_of(p)?;
                let pos = self.pos_in_leaf(leaf, p)?;
                self.insert_in_leaf(leaf, pos + 1, h);
            }
        }
        Ok(())
    }

    pub fn delete(&mut self, h: Handle) -> Result<()> {
        let leaf = self.slot_of(h)?;
        let pos = self.pos_in_leaf(leaf, h)?;
        if let NodeKind::Leaf(entries) = &mut self.nodes[leaf as usize].kind {
            entries.remove(pos);
        }
        self.slots[h.index()] = NONE;
        self.len -= 1;
        self.bump_counts(leaf, -1);
        self.fix_underflow(leaf);
        Ok(())
    }

    /// Entries in list order.
    pub fn iter(&self) -> impl Iterator<Item = Handle> + '_ {
        let mut out = Vec::with_capacity(self.len);
        if self.root != NONE {
            let mut stack = vec![self.root];
            while let Some(id) = stack.pop() {
                match &self.nodes[id as usize].kind {
                    NodeKind::Leaf(entries) => out.extend(entries.iter().copied()),
                    NodeKind::Internal { children, .. } => {
                        stack.extend(children.iter().rev().copied())
                    }
                }
            }
        }
        out.into_iter()
    }

    // === internals ===

    fn alloc(&mut self, node: Node) -> u32 {
        if let Some(id) = self.free.pop() {
            self.nodes[id as usize] = node;
            id
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn free_node(&mut self, id: u32) {
        let n = &mut self.nodes[id as usize];
        n.in_use = false;
        n.parent = NONE;
        n.kind = NodeKind::Leaf(Vec::new());
        self.free.push(id);
    }

    fn set_slot(&mut self, h: Handle, leaf: u32) {
        let i = h.index();
        if i >= self.slots.len() {
            self.slots.resize(i + 1, NONE);
        }
        self.slots[i] = leaf;
    }

    fn slot_of(&self, h: Handle) -> Result<u32> {
        match self.slots.get(h.index()) {
            Some(&s) if s != NONE => Ok(s),
            _ => Err(Error::InvalidHandle),
        }
    }

    fn pos_in_leaf(&self, leaf: u32, h: Handle) -> Result<usize> {
        match &self.nodes[leaf as usize].kind {
            NodeKind::Leaf(v) => v.iter().position(|&x| x == h).ok_or(Error::InvalidHandle),
            _ => Err(Error::InvalidHandle),
        }
    }

    fn child_index(&self, parent: u32, child: u32) -> usize {
        match &self.nodes[parent as usize].kind {
            NodeKind::Internal { children, .. } => {
                children.iter().position(|&c| c == child).unwrap()
            }
            _ => unreachable!("leaf used as parent"),
        }
    }

    fn node_size(&self, id: u32) -> usize {
        match &self.nodes[id as usize].kind {
            NodeKind::Leaf(v) => v.len(),
            NodeKind::Internal { children, .. } => children.len(),
        }
    }

    fn subtree_count(&self, id: u32) -> u32 {
        match &self.nodes[id as usize].kind {
            NodeKind::Leaf(v) => v.len() as u32,
            NodeKind::Internal { counts, .. } => counts.iter().sum(),
        }
    }

    fn insert_in_leaf(&mut self, leaf: u32, pos: usize, h: Handle) {
        if let NodeKind::Leaf(entries) = &mut self.nodes[leaf as usize].kind {
            entries.insert(pos, h);
        }
        self.set_slot(h, leaf);
        self.len += 1;
        self.bump_counts(leaf, 1);
        if self.node_size(leaf) > self.degree {
            self.split(leaf);
        }
    }

    fn bump_counts(&mut self, mut child: u32, delta: i64) {
        let mut parent = self.nodes[child as usize].parent;
        while parent != NONE {
            let idx = self.child_index(parent, child);
            if let NodeKind::Internal { counts, .. } = &mut self.nodes[parent as usize].kind {
                counts[idx] = (counts[idx] as i64 + delta) as u32;
            }
            child = parent;
            parent = self.nodes[child as usize].parent;
        }
    }

    fn split(&mut self, id: u32) {
        let parent = self.nodes[id as usize].parent;
        let (new_kind, moved_total) = match &mut self.nodes[id as usize].kind {
            NodeKind::Leaf(entries) => {
                let keep = entries.len() / 2;
                let moved = entries.split_off(keep);
                let total = moved.len() as u32;
                (NodeKind::Leaf(moved), total)
            }
            NodeKind::Internal { children, counts } => {
                let keep = children.len() / 2;
                let mc = children.split_off(keep);
                let mk = counts.split_off(keep);
                let total = mk.iter().sum();
                (NodeKind::Internal { children: mc, counts: mk }, total)
            }
        };
        let new_id = self.alloc(Node {
            parent,
            in_use: true,
            kind: new_kind,
        });
        match &self.nodes[new_id as usize].kind {
            NodeKind::Leaf(v) => {
                for h in v.clone() {
                    self.set_slot(h, new_id);
                }
            }
            NodeKind::Internal { children, .. } => {
                for c in children.clone() {
                    self.nodes[c as usize].parent = new_id;
                }
            }
        }
        if parent == NONE {
            let kept_total = self.subtree_count(id);
            let root = self.alloc(Node {
                parent: NONE,
                in_use: true,
                kind: NodeKind::Internal {
                    children: vec![id, new_id],
                    counts: vec![kept_total, moved_total],
                },
            });
            self.nodes[id as usize].parent = root;
            self.nodes[new_id as usize].parent = root;
            self.root = root;
        } else {
            let idx = self.child_index(parent, id);
            if let NodeKind::Internal { children, counts } =
                &mut self.nodes[parent as usize].kind
            {
                counts[idx] -= moved_total;
                children.insert(idx + 1, new_id);
                counts.insert(idx + 1, moved_total);
            }
            if self.node_size(parent) > self.degree {
                self.split(parent);
            }
        }
    }

    fn fix_underflow(&mut self, id: u32) {
        let min = self.degree / 2;
        if self.node_size(id) >= min {
            return;
        }
        let parent = self.nodes[id as usize].parent;
        if parent == NONE {
            // The root may shrink below `min`; it only collapses when a
            // leaf root empties or an internal root drops to one child.
            match &self.nodes[id as usize].kind {
                NodeKind::Leaf(entries) => {
                    if entries.is_empty() {
                        self.free_node(id);
                        self.root = NONE;
                    }
                }
                NodeKind::Internal { children, .. } => {
                    if children.len() == 1 {
                        let child = children[0];
                        self.nodes[child as usize].parent = NONE;
                        self.root = child;
                        self.free_node(id);
                    }
                }
            }
            return;
        }
        let idx = self.child_index(parent, id);
        let (left, right) = match &self.nodes[parent as usize].kind {
            NodeKind::Internal { children, .. } => (
                if idx > 0 { Some(children[idx - 1]) } else { None },
                children.get(idx + 1).copied(),
            ),
            _ => unreachable!(),
        };
        if let Some(l) = left {
            if self.node_size(l) > min {
                self.shift_edge(l, id, parent, idx, true);
                return;
            }
        }
        if let Some(r) = right {
            if self.node_size(r) > min {
                self.shift_edge(r, id, parent, idx, false);
                return;
            }
        }
        // Both neighbors at minimum: merge never overflows the survivor.
        if let Some(l) = left {
            self.merge_into(l, id, parent, idx);
        } else if let Some(r) = right {
            self.merge_into(id, r, parent, idx + 1);
        }
        self.fix_underflow(parent);
    }

    /// Moves one edge unit from `from` into `to`; `from_left` says whether
    /// the donor sits left of `to` (donating its back) or right (its front).
    fn shift_edge(&mut self, from: u32, to: u32, parent: u32, to_idx: usize, from_left: bool) {
        let taken = match &mut self.nodes[from as usize].kind {
            NodeKind::Leaf(v) => {
                let h = if from_left { v.pop().unwrap() } else { v.remove(0) };
                Taken::Entry(h)
            }
            NodeKind::Internal { children, counts } => {
                let (c, ct) = if from_left {
                    (children.pop().unwrap(), counts.pop().unwrap())
                } else {
                    (children.remove(0), counts.remove(0))
                };
                Taken::Child(c, ct)
            }
        };
        let moved = match taken {
            Taken::Entry(h) => {
                if let NodeKind::Leaf(v) = &mut self.nodes[to as usize].kind {
                    if from_left {
                        v.insert(0, h);
                    } else {
                        v.push(h);
                    }
                }
                self.set_slot(h, to);
                1
            }
            Taken::Child(c, ct) => {
                if let NodeKind::Internal { children, counts } =
                    &mut self.nodes[to as usize].kind
                {
                    if from_left {
                        children.insert(0, c);
                        counts.insert(0, ct);
                    } else {
                        children.push(c);
                        counts.push(ct);
                    }
                }
                self.nodes[c as usize].parent = to;
                ct
            }
        };
        let from_idx = if from_left { to_idx - 1 } else { to_idx + 1 };
        if let NodeKind::Internal { counts, .. } = &mut self.nodes[parent as usize].kind {
            counts[from_idx] -= moved;
            counts[to_idx] += moved;
        }
    }

    /// Absorbs `r` into its left neighbor `l`; `r_idx` is r's child index.
    fn merge_into(&mut self, l: u32, r: u32, parent: u32, r_idx: usize) {
        let kind = std::mem::replace(&mut self.nodes[r as usize].kind, NodeKind::Leaf(Vec::new()));
        match kind {
            NodeKind::Leaf(entries) => {
                for &h in &entries {
                    self.set_slot(h, l);
                }
                if let NodeKind::Leaf(v) = &mut self.nodes[l as usize].kind {
                    v.extend(entries);
                }
            }
            NodeKind::Internal { children, counts } => {
                for &c in &children {
                    self.nodes[c as usize].parent = l;
                }
                if let NodeKind::Internal {
                    children: lc,
                    counts: lk,
                } = &mut self.nodes[l as usize].kind
                {
                    lc.extend(children);
                    lk.extend(counts);
                }
            }
        }
        if let NodeKind::Internal { children, counts } = &mut self.nodes[parent as usize].kind {
            let moved = counts.remove(r_idx);
            counts[r_idx - 1] += moved;
            children.remove(r_idx);
        }
        self.free_node(r);
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::AuditFailed(m));
        if self.root == NONE {
            if self.len != 0 {
                return fail("empty tree with nonzero length".into());
            }
            if self.slots.iter().any(|&s| s != NONE) {
                return fail("dangling slot in empty tree".into());
            }
            return Ok(());
        }
        let min = self.degree / 2;
        let mut leaf_depth = None;
        let mut total = 0usize;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            let node = &self.nodes[id as usize];
            if !node.in_use {
                return fail(format!("node {id} reachable but freed"));
            }
            let size = self.node_size(id);
            let is_root = id == self.root;
            if size > self.degree {
                return fail(format!("node {id} over degree"));
            }
            match &node.kind {
                NodeKind::Leaf(entries) => {
                    match leaf_depth {
                        None => leaf_depth = Some(depth),
                        Some(d) if d != depth => return fail("leaves at differing depths".into()),
                        _ => {}
                    }
                    if is_root {
                        if entries.is_empty() {
                            return fail("empty root leaf".into());
                        }
                    } else if size < min {
                        return fail(format!("leaf {id} underfull"));
                    }
                    total += entries.len();
                    for &h in entries {
                        if self.slots.get(h.index()).copied().unwrap_or(NONE) != id {
                            return fail(format!("slot map stale for slot {}", h.index()));
                        }
                    }
                }
                NodeKind::Internal { children, counts } => {
                    if children.len() != counts.len() {
                        return fail(format!("node {id} children/counts skew"));
                    }
                    if is_root {
                        if children.len() < 2 {
                            return fail("internal root with single child".into());
                        }
                    } else if size < min {
                        return fail(format!("node {id} underfull"));
                    }
                    for (&c, &ct) in children.iter().zip(counts) {
                        if self.nodes[c as usize].parent != id {
                            return fail(format!("child {c} parent pointer stale"));
                        }
                        if self.subtree_count(c) != ct {
                            return fail(format!("count for child {c} stale"));
                        }
                    }
                    for &c in children {
                        stack.push((c, depth + 1));
                    }
                }
            }
        }
        if total != self.len {
            return fail(format!("walked {total} entries, stored {}", self.len));
        }
        let mapped = self.slots.iter().filter(|&&s| s != NONE).count();
        if mapped != self.len {
            return fail(format!("{mapped} mapped slots for {} entries", self.len));
        }
        Ok(())
    }
}

/// Splits `0..n` into `ceil(n / degree)` contiguous near-equal ranges, so
/// every range length sits in `[degree/2, degree]` once `n >= degree/2`.
fn even_chunks(n: usize, degree: usize) -> Vec<std::ops::Range<usize>> {
    let k = n.div_ceil(degree);
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::list::OrderedList;
    use super::*;

    fn xorshift(state: &mut u64) -> u64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        *state
    }

    #[test]
    fn single_entry_has_rank_one() {
        let mut ol = OrderedList::new(8);
        let h = ol.insert_after(None, ()).unwrap();
        let mut pi = PrefixIndex::new(8);
        pi.insert_after(None, h).unwrap();
        assert_eq!(pi.rank(h).unwrap(), 1);
        assert_eq!(pi.select(1).unwrap(), h);
        assert!(pi.select(2).is_err());
        assert!(pi.select(0).is_err());
    }

    #[test]
    fn insert_front_has_rank_one() {
        let mut ol = OrderedList::new(8);
        let mut pi = PrefixIndex::new(8);
        let a = ol.insert_after(None, ()).unwrap();
        pi.insert_after(None, a).unwrap();
        let b = ol.insert_after(None, ()).unwrap();
        pi.insert_after(None, b).unwrap();
        assert_eq!(pi.rank(b).unwrap(), 1);
        assert_eq!(pi.rank(a).unwrap(), 2);
    }

    #[test]
    fn random_inserts_match_shadow() {
        let mut ol = OrderedList::new(16);
        let mut pi = PrefixIndex::new(8);
        let mut shadow: Vec<Handle> = Vec::new();
        let mut state = 0x1234_5678_9abc_def1u64;
        for _ in 0..1000 {
            let pos = xorshift(&mut state) as usize % (shadow.len() + 1);
            let prev = if pos == 0 { None } else { Some(shadow[pos - 1]) };
            let h = ol.insert_after(prev, ()).unwrap();
            pi.insert_after(prev, h).unwrap();
            shadow.insert(pos, h);
        }
        pi.validate().unwrap();
        for (i, &h) in shadow.iter().enumerate() {
            assert_eq!(pi.rank(h).unwrap(), i + 1);
            assert_eq!(pi.select(i + 1).unwrap(), h);
        }
    }

    #[test]
    fn deleting_predecessor_shifts_rank() {
        let mut ol = OrderedList::new(8);
        let mut pi = PrefixIndex::new(4);
        let mut hs = Vec::new();
        let mut prev = None;
        for _ in 0..20 {
            let h = ol.insert_after(prev, ()).unwrap();
            pi.insert_after(prev, h).unwrap();
            hs.push(h);
            prev = Some(h);
        }
        assert_eq!(pi.rank(hs[10]).unwrap(), 11);
        pi.delete(hs[4]).unwrap();
        ol.delete(hs[4]).unwrap();
        assert_eq!(pi.rank(hs[10]).unwrap(), 10);
        assert!(pi.rank(hs[4]).is_err());
        pi.validate().unwrap();
    }

    #[test]
    fn rank_select_roundtrip() {
        let mut ol = OrderedList::new(16);
        let mut pi = PrefixIndex::new(6);
        let mut prev = None;
        for _ in 0..500 {
            let h = ol.insert_after(prev, ()).unwrap();
            pi.insert_after(prev, h).unwrap();
            prev = Some(h);
        }
        for i in 1..=500 {
            assert_eq!(pi.rank(pi.select(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn replay_mixed_ops_against_shadow() {
        let mut ol = OrderedList::new(16);
        let mut pi = PrefixIndex::new(8);
        let mut shadow: Vec<Handle> = Vec::new();
        let mut state = 0xfeed_beefu64;
        for step in 0..10_000 {
            if shadow.is_empty() || xorshift(&mut state) % 3 != 0 {
                let pos = xorshift(&mut state) as usize % (shadow.len() + 1);
                let prev = if pos == 0 { None } else { Some(shadow[pos - 1]) };
                let h = ol.insert_after(prev, ()).unwrap();
                pi.insert_after(prev, h).unwrap();
                shadow.insert(pos, h);
            } else {
                let pos = xorshift(&mut state) as usize % shadow.len();
                let h = shadow.remove(pos);
                pi.delete(h).unwrap();
                ol.delete(h).unwrap();
            }
            if step % 2500 == 0 {
                pi.validate().unwrap();
            }
        }
        pi.validate().unwrap();
        assert_eq!(pi.len(), shadow.len());
        let walked: Vec<Handle> = pi.iter().collect();
        assert_eq!(walked, shadow);
        for (i, &h) in shadow.iter().enumerate().step_by(7) {
            assert_eq!(pi.rank(h).unwrap(), i + 1);
        }
    }

    #[test]
    fn bulk_build_matches_incremental() {
        let mut ol = OrderedList::new(16);
        let mut prev = None;
        let mut hs = Vec::new();
        for _ in 0..777 {
            let h = ol.insert_after(prev, ()).unwrap();
            hs.push(h);
            prev = Some(h);
        }
        let pi = PrefixIndex::from_handles(8, hs.iter().copied());
        pi.validate().unwrap();
        assert_eq!(pi.len(), 777);
        for (i, &h) in hs.iter().enumerate() {
            assert_eq!(pi.rank(h).unwrap(), i + 1);
            assert_eq!(pi.select(i + 1).unwrap(), h);
        }
        // Tiny builds stay legal too.
        for n in [1usize, 2, 3, 7, 8, 9] {
            let pi = PrefixIndex::from_handles(8, hs[..n].iter().copied());
            pi.validate().unwrap();
            assert_eq!(pi.len(), n);
        }
    }
}
