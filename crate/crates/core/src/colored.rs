//! Colored predecessor on a dynamic list.
//!
//! Every entry of an order-maintenance list carries a color in `0..sigma`;
//! `cp_pred(h, a)` returns the rightmost entry of color `a` at or before
//! `h`. An entry precedes itself, so `cp_pred(h, color(h)) == h`.
//!
//! Realization: entries of one color form consecutive blocks of roughly
//! `cap = log^2(capacity hint)` entries stored as sorted handle vectors.
//! The first entry of each block is that block's head; heads of all colors,
//! interleaved in list order, are the leaves of a weight-balanced binary
//! tree. Each tree node records, per color occurring below it, the leftmost
//! and rightmost head of that color, plus overall extremes for routing. A
//! query descends to the rightmost head at or before `h`, climbs until a
//! left sibling subtree contains the color, jumps to that subtree's
//! rightmost head of the color, and finishes with a binary search inside
//! the head's block. Color ranges are maintained exactly on every update;
//! the tree is rebuilt per-subtree on weight imbalance and wholesale after
//! enough deletions.

use crate::error::{Error, Result};
use crate::order::{Handle, OrderedList};
use std::cmp::Ordering;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct EntryData {
    color: u32,
    block: u32,
}

#[derive(Debug, Clone)]
struct Block {
    color: u32,
    /// Member entries in list order; `entries[0]` is the head.
    entries: Vec<Handle>,
    prev: u32,
    next: u32,
    leaf: u32,
    in_use: bool,
}

#[derive(Debug, Clone, Copy)]
struct ColRange {
    color: u32,
    min: Handle,
    max: Handle,
}

#[derive(Debug, Clone)]
struct TlNode {
    parent: u32,
    left: u32,
    right: u32,
    /// Leaves below this node; 1 for a leaf.
    size: u32,
    min_head: Handle,
    max_head: Handle,
    /// Sorted by color; a leaf holds exactly its own color.
    col: Vec<ColRange>,
    /// Leaf only: the block whose head this leaf represents.
    block: u32,
    in_use: bool,
}

#[derive(Debug, Clone, Default)]
struct TlTree {
    nodes: Vec<TlNode>,
    free: Vec<u32>,
    root: u32,
    deletions: usize,
}

/// Dynamic list with colored entries and colored predecessor queries.
#[derive(Debug, Clone)]
pub struct ColoredList {
    base: OrderedList<EntryData>,
    sigma: usize,
    blocks: Vec<Block>,
    free_blocks: Vec<u32>,
    first_block: Vec<u32>,
    color_counts: Vec<usize>,
    cap: usize,
    tree: TlTree,
}

impl ColoredList {
    /// `capacity_hint` freezes the block-size target: blocks hold about
    /// `log^2(hint)` entries for the life of the structure.
    pub fn new(sigma: usize, capacity_hint: usize) -> Self {
        let l = crate::config::log2_ceil(capacity_hint.max(2));
        ColoredList::with_block_cap(sigma, (l * l).max(4))
    }

    pub fn with_block_cap(sigma: usize, cap: usize) -> Self {
        assert!(sigma >= 1 && cap >= 4);
        ColoredList {
            base: OrderedList::default(),
            sigma,
            blocks: Vec::new(),
            free_blocks: Vec::new(),
            first_block: vec![NONE; sigma],
            color_counts: vec![0; sigma],
            cap,
            tree: TlTree {
                root: NONE,
                ..TlTree::default()
            },
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn block_cap(&self) -> usize {
        self.cap
    }

    pub fn count_color(&self, a: u32) -> usize {
        self.color_counts[a as usize]
    }

    pub fn color(&self, h: Handle) -> Result<u32> {
        Ok(self.base.payload(h)?.color)
    }

    pub fn first(&self) -> Option<Handle> {
        self.base.first()
    }

    pub fn next(&self, h: Handle) -> Result<Option<Handle>> {
        self.base.next(h)
    }

    pub fn prev(&self, h: Handle) -> Result<Option<Handle>> {
        self.base.prev(h)
    }

    pub fn is_valid(&self, h: Handle) -> bool {
        self.base.is_valid(h)
    }

    pub fn compare(&self, a: Handle, b: Handle) -> Result<Ordering> {
        self.base.compare(a, b)
    }

    /// Entries in list order.
    pub fn iter(&self) -> impl Iterator<Item = Handle> + '_ {
        self.base.iter()
    }

    /// Entries of color `a` in list order.
    pub fn iter_color(&self, a: u32) -> impl Iterator<Item = Handle> + '_ {
        let mut block = self.first_block[a as usize];
        let mut pos = 0usize;
        std::iter::from_fn(move || loop {
            if block == NONE {
                return None;
            }
            let b = &self.blocks[block as usize];
            if pos < b.entries.len() {
                pos += 1;
                return Some(b.entries[pos - 1]);
            }
            block = b.next;
            pos = 0;
        })
    }

    fn cmp(&self, a: Handle, b: Handle) -> Ordering {
        self.base.compare(a, b).expect("stale handle inside color structure")
    }

    /// Index of the rightmost entry of `b` at or before `h`, if any.
    fn block_pred_pos(&self, b: u32, h: Handle) -> Option<usize> {
        let es = &self.blocks[b as usize].entries;
        if self.cmp(es[0], h) == Ordering::Greater {
            return None;
        }
        let mut lo = 0;
        let mut hi = es.len();
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if self.cmp(es[mid], h) == Ordering::Greater {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(lo)
    }

    /// Rightmost entry of color `a` at or before `h`; an entry counts as
    /// preceding itself.
    pub fn cp_pred(&self, h: Handle, a: u32) -> Result<Option<Handle>> {
        if a as usize >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        let e = self.base.payload(h)?;
        if e.color == a {
            return Ok(Some(h));
        }
        let Some(leaf) = self.tl_search_pred(h) else {
            return Ok(None);
        };
        let Some(head) = self.tl_pred_color(leaf, a) else {
            return Ok(None);
        };
        let b = self.base.payload(head)?.block;
        let pos = self
            .block_pred_pos(b, h)
            .expect("found head does not precede query");
        Ok(Some(self.blocks[b as usize].entries[pos]))
    }

    /// Inserts a new entry of color `a` right after `after` (front when
    /// `None`) and returns its handle.
    pub fn cp_insert(&mut self, after: Option<Handle>, a: u32) -> Result<Handle> {
        if a as usize >= self.sigma {
            return Err(Error::SymbolOutOfRange {
                sym: a as u64,
                sigma: self.sigma as u64,
            });
        }
        let pred_a = match after {
            Some(x) => self.cp_pred(x, a)?,
            None => None,
        };
        let h = self.base.insert_after(after, EntryData { color: a, block: NONE })?;
        self.color_counts[a as usize] += 1;
        match pred_a {
            Some(p) => {
                let b = self.base.payload(p)?.block;
                let pos = self
                    .block_pred_pos(b, p)
                    .expect("member entry missing from its block");
                self.blocks[b as usize].entries.insert(pos + 1, h);
                self.base.payload_mut(h)?.block = b;
                self.maybe_split(b);
            }
            None => {
                let fb = self.first_block[a as usize];
                if fb == NONE {
                    let b = self.alloc_block(Block {
                        color: a,
                        entries: vec![h],
                        prev: NONE,
                        next: NONE,
                        leaf: NONE,
                        in_use: true,
                    });
                    self.first_block[a as usize] = b;
                    self.base.payload_mut(h)?.block = b;
                    let leaf = self.tl_insert(b, h);
                    self.blocks[b as usize].leaf = leaf;
                } else {
                    // New first entry of the color: the block head moves.
                    self.blocks[fb as usize].entries.insert(0, h);
                    self.base.payload_mut(h)?.block = fb;
                    self.rekey_leaf(fb);
                    self.maybe_split(fb);
                }
            }
        }
        Ok(h)
    }

    pub fn cp_delete(&mut self, h: Handle) -> Result<()> {
        let e = self.base.payload(h)?.clone();
        let b = e.block;
        let pos = self
            .block_pred_pos(b, h)
            .expect("member entry missing from its block");
        debug_assert_eq!(self.blocks[b as usize].entries[pos], h);
        self.blocks[b as usize].entries.remove(pos);
        self.color_counts[e.color as usize] -= 1;
        if self.blocks[b as usize].entries.is_empty() {
            self.drop_block(b);
        } else {
            if pos == 0 {
                self.rekey_leaf(b);
            }
            self.maybe_refill(b);
        }
        self.base.delete(h)?;
        Ok(())
    }

    // === block maintenance ===

    fn alloc_block(&mut self, blk: Block) -> u32 {
        if let Some(id) = self.free_blocks.pop() {
            self.blocks[id as usize] = blk;
            id
        } else {
            self.blocks.push(blk);
            (self.blocks.len() - 1) as u32
        }
    }

    fn drop_block(&mut self, b: u32) {
        let (color, prev, next, leaf) = {
            let blk = &self.blocks[b as usize];
            (blk.color, blk.prev, blk.next, blk.leaf)
        };
        self.tl_delete(leaf);
        if prev != NONE {
            self.blocks[prev as usize].next = next;
        } else {
            self.first_block[color as usize] = next;
        }
        if next != NONE {
            self.blocks[next as usize].prev = prev;
        }
        let blk = &mut self.blocks[b as usize];
        blk.in_use = false;
        blk.entries = Vec::new();
        self.free_blocks.push(b);
    }

    /// Re-anchors a block's tree leaf after its head entry changed.
    fn rekey_leaf(&mut self, b: u32) {
        let leaf = self.blocks[b as usize].leaf;
        self.tl_delete(leaf);
        let head = self.blocks[b as usize].entries[0];
        let leaf = self.tl_insert(b, head);
        self.blocks[b as usize].leaf = leaf;
    }

    fn maybe_split(&mut self, b: u32) {
        if self.blocks[b as usize].entries.len() <= 2 * self.cap {
            return;
        }
        let half = self.blocks[b as usize].entries.len() / 2;
        let moved = self.blocks[b as usize].entries.split_off(half);
        let (color, next) = {
            let blk = &self.blocks[b as usize];
            (blk.color, blk.next)
        };
        let nb = self.alloc_block(Block {
            color,
            entries: moved,
            prev: b,
            next,
            leaf: NONE,
            in_use: true,
        });
        self.blocks[b as usize].next = nb;
        if next != NONE {
            self.blocks[next as usize].prev = nb;
        }
        let members: Vec<Handle> = self.blocks[nb as usize].entries.clone();
        for m in members {
            self.base.payload_mut(m).unwrap().block = nb;
        }
        let head = self.blocks[nb as usize].entries[0];
        let leaf = self.tl_insert(nb, head);
        self.blocks[nb as usize].leaf = leaf;
    }

    fn maybe_refill(&mut self, mut b: u32) {
        loop {
            let blk = &self.blocks[b as usize];
            let lonely = blk.prev == NONE && blk.next == NONE;
            if lonely || blk.entries.len() >= self.cap / 2 {
                return;
            }
            let (l, r) = if blk.next != NONE {
                (b, blk.next)
            } else {
                (blk.prev, b)
            };
            let ln = self.blocks[l as usize].entries.len();
            let rn = self.blocks[r as usize].entries.len();
            if ln + rn <= 2 * self.cap {
                // Merge the right block into the left; left head survives.
                let moved = std::mem::take(&mut self.blocks[r as usize].entries);
                for &m in &moved {
                    self.base.payload_mut(m).unwrap().block = l;
                }
                self.blocks[l as usize].entries.extend(moved);
                self.drop_block(r);
                b = l;
            } else {
                // Equalize; the right block's head changes either way.
                let k = (ln.abs_diff(rn)) / 2;
                if ln > rn {
                    let at = ln - k;
                    let moved = self.blocks[l as usize].entries.split_off(at);
                    for &m in &moved {
                        self.base.payload_mut(m).unwrap().block = r;
                    }
                    let old = std::mem::take(&mut self.blocks[r as usize].entries);
                    let mut es = moved;
                    es.extend(old);
                    self.blocks[r as usize].entries = es;
                } else {
                    let mut moved: Vec<Handle> =
                        self.blocks[r as usize].entries.drain(..k).collect();
                    for &m in &moved {
                        self.base.payload_mut(m).unwrap().block = l;
                    }
                    self.blocks[l as usize].entries.append(&mut moved);
                }
                self.rekey_leaf(r);
                return;
            }
        }
    }

    // === head tree ===

    fn node(&self, id: u32) -> &TlNode {
        &self.tree.nodes[id as usize]
    }

    fn alloc_node(&mut self, n: TlNode) -> u32 {
        if let Some(id) = self.tree.free.pop() {
            self.tree.nodes[id as usize] = n;
            id
        } else {
            self.tree.nodes.push(n);
            (self.tree.nodes.len() - 1) as u32
        }
    }

    fn free_tl_node(&mut self, id: u32) {
        self.tree.nodes[id as usize].in_use = false;
        self.tree.nodes[id as usize].col = Vec::new();
        self.tree.free.push(id);
    }

    fn col_get(&self, id: u32, a: u32) -> Option<ColRange> {
        let col = &self.node(id).col;
        col.binary_search_by_key(&a, |c| c.color)
            .ok()
            .map(|i| col[i])
    }

    /// Recomputes size, extremes, and the entry for `a` from the children.
    fn pull_color(&mut self, u: u32, a: u32) {
        let (l, r) = (self.node(u).left, self.node(u).right);
        let entry = match (self.col_get(l, a), self.col_get(r, a)) {
            (Some(x), Some(y)) => Some(ColRange {
                color: a,
                min: x.min,
                max: y.max,
            }),
            (Some(x), None) => Some(x),
            (None, Some(y)) => Some(y),
            (None, None) => None,
        };
        let size = self.node(l).size + self.node(r).size;
        let min_head = self.node(l).min_head;
        let max_head = self.node(r).max_head;
        let n = &mut self.tree.nodes[u as usize];
        n.size = size;
        n.min_head = min_head;
        n.max_head = max_head;
        match (n.col.binary_search_by_key(&a, |c| c.color), entry) {
            (Ok(i), Some(e)) => n.col[i] = e,
            (Ok(i), None) => {
                n.col.remove(i);
            }
            (Err(i), Some(e)) => n.col.insert(i, e),
            (Err(_), None) => {}
        }
    }

    /// Full recompute from children, merging complete color sets.
    fn pull_all(&mut self, u: u32) {
        let (l, r) = (self.node(u).left, self.node(u).right);
        let mut col = Vec::with_capacity(self.node(l).col.len() + self.node(r).col.len());
        let (lc, rc) = (&self.node(l).col, &self.node(r).col);
        let (mut i, mut j) = (0, 0);
        while i < lc.len() || j < rc.len() {
            if j == rc.len() || (i < lc.len() && lc[i].color < rc[j].color) {
                col.push(lc[i]);
                i += 1;
            } else if i == lc.len() || rc[j].color < lc[i].color {
                col.push(rc[j]);
                j += 1;
            } else {
                col.push(ColRange {
                    color: lc[i].color,
                    min: lc[i].min,
                    max: rc[j].max,
                });
                i += 1;
                j += 1;
            }
        }
        let size = self.node(l).size + self.node(r).size;
        let min_head = self.node(l).min_head;
        let max_head = self.node(r).max_head;
        let n = &mut self.tree.nodes[u as usize];
        n.size = size;
        n.min_head = min_head;
        n.max_head = max_head;
        n.col = col;
    }

    /// Rightmost leaf whose head is at or before `h`.
    fn tl_search_pred(&self, h: Handle) -> Option<u32> {
        let root = self.tree.root;
        if root == NONE || self.cmp(self.node(root).min_head, h) == Ordering::Greater {
            return None;
        }
        let mut cur = root;
        while self.node(cur).block == NONE {
            let r = self.node(cur).right;
            if self.cmp(self.node(r).min_head, h) != Ordering::Greater {
                cur = r;
            } else {
                cur = self.node(cur).left;
            }
        }
        Some(cur)
    }

    /// Rightmost head of color `a` at or before `leaf` (inclusive).
    fn tl_pred_color(&self, leaf: u32, a: u32) -> Option<Handle> {
        if self.blocks[self.node(leaf).block as usize].color == a {
            return Some(self.node(leaf).min_head);
        }
        let mut cur = leaf;
        loop {
            let p = self.node(cur).parent;
            if p == NONE {
                return None;
            }
            if self.node(p).right == cur {
                if let Some(e) = self.col_get(self.node(p).left, a) {
                    return Some(e.max);
                }
            }
            cur = p;
        }
    }

    fn tl_insert(&mut self, block: u32, head: Handle) -> u32 {
        let color = self.blocks[block as usize].color;
        let leaf = self.alloc_node(TlNode {
            parent: NONE,
            left: NONE,
            right: NONE,
            size: 1,
            min_head: head,
            max_head: head,
            col: vec![ColRange {
                color,
                min: head,
                max: head,
            }],
            block,
            in_use: true,
        });
        if self.tree.root == NONE {
            self.tree.root = leaf;
            return leaf;
        }
        // Descend to the neighbor leaf, then hang both under a fresh node.
        let mut cur = self.tree.root;
        while self.node(cur).block == NONE {
            let r = self.node(cur).right;
            if self.cmp(self.node(r).min_head, head) != Ordering::Greater {
                cur = r;
            } else {
                cur = self.node(cur).left;
            }
        }
        let before = self.cmp(head, self.node(cur).min_head) == Ordering::Less;
        let (lc, rc) = if before { (leaf, cur) } else { (cur, leaf) };
        let g = self.node(cur).parent;
        let u = self.alloc_node(TlNode {
            parent: g,
            left: lc,
            right: rc,
            size: 2,
            min_head: head,
            max_head: head,
            col: Vec::new(),
            block: NONE,
            in_use: true,
        });
        self.tree.nodes[lc as usize].parent = u;
        self.tree.nodes[rc as usize].parent = u;
        if g == NONE {
            self.tree.root = u;
        } else if self.node(g).left == cur {
            self.tree.nodes[g as usize].left = u;
        } else {
            self.tree.nodes[g as usize].right = u;
        }
        self.pull_all(u);
        let mut path = vec![u];
        let mut w = g;
        while w != NONE {
            self.pull_color(w, color);
            path.push(w);
            w = self.node(w).parent;
        }
        // Weight balance: rebuild the highest node whose child dominates.
        for &v in path.iter().rev() {
            let n = self.node(v);
            let big = self.node(n.left).size.max(self.node(n.right).size) as u64;
            if 10 * big > 7 * n.size as u64 && n.size > 4 {
                self.tl_rebuild(v);
                break;
            }
        }
        leaf
    }

    fn tl_delete(&mut self, leaf: u32) {
        let color = self.blocks[self.node(leaf).block as usize].color;
        let p = self.node(leaf).parent;
        if p == NONE {
            self.tree.root = NONE;
            self.free_tl_node(leaf);
            return;
        }
        let sib = if self.node(p).left == leaf {
            self.node(p).right
        } else {
            self.node(p).left
        };
        let g = self.node(p).parent;
        self.tree.nodes[sib as usize].parent = g;
        if g == NONE {
            self.tree.root = sib;
        } else if self.node(g).left == p {
            self.tree.nodes[g as usize].left = sib;
        } else {
            self.tree.nodes[g as usize].right = sib;
        }
        self.free_tl_node(leaf);
        self.free_tl_node(p);
        let mut w = g;
        while w != NONE {
            self.pull_color(w, color);
            w = self.node(w).parent;
        }
        self.tree.deletions += 1;
        let total = self.node(self.tree.root).size as usize;
        if self.tree.deletions > total / 2 + 8 {
            self.tl_rebuild(self.tree.root);
            self.tree.deletions = 0;
        }
    }

    fn tl_rebuild(&mut self, u: u32) {
        let parent = self.node(u).parent;
        let was_left = parent != NONE && self.node(parent).left == u;
        let mut leaves = Vec::with_capacity(self.node(u).size as usize);
        // Depth-first right-to-left so popping yields leaves left-to-right.
        let mut stack = vec![u];
        while let Some(id) = stack.pop() {
            if self.node(id).block != NONE {
                leaves.push(id);
            } else {
                stack.push(self.node(id).right);
                stack.push(self.node(id).left);
                self.free_tl_node(id);
            }
        }
        let root = self.build_balanced(&leaves);
        self.tree.nodes[root as usize].parent = parent;
        if parent == NONE {
            self.tree.root = root;
        } else if was_left {
            self.tree.nodes[parent as usize].left = root;
        } else {
            self.tree.nodes[parent as usize].right = root;
        }
    }

    fn build_balanced(&mut self, leaves: &[u32]) -> u32 {
        if leaves.len() == 1 {
            return leaves[0];
        }
        let mid = leaves.len() / 2;
        let l = self.build_balanced(&leaves[..mid]);
        let r = self.build_balanced(&leaves[mid..]);
        let head = self.node(l).min_head;
        let u = self.alloc_node(TlNode {
            parent: NONE,
            left: l,
            right: r,
            size: 0,
            min_head: head,
            max_head: head,
            col: Vec::new(),
            block: NONE,
            in_use: true,
        });
        self.tree.nodes[l as usize].parent = u;
        self.tree.nodes[r as usize].parent = u;
        self.pull_all(u);
        u
    }

    // === audit ===

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let fail = |m: String| Err(Error::AuditFailed(m));
        let mut total = 0usize;
        let mut live_blocks = 0usize;
        for a in 0..self.sigma {
            let mut count = 0usize;
            let mut blocks_of_color = Vec::new();
            let mut b = self.first_block[a];
            let mut prev = NONE;
            let mut last: Option<Handle> = None;
            while b != NONE {
                let blk = &self.blocks[b as usize];
                if !blk.in_use || blk.color != a as u32 || blk.prev != prev {
                    return fail(format!("block {b} chain broken for color {a}"));
                }
                if blk.entries.is_empty() {
                    return fail(format!("block {b} empty"));
                }
                for &e in &blk.entries {
                    let d = self
                        .base
                        .payload(e)
                        .map_err(|_| Error::AuditFailed(format!("dead entry in block {b}")))?;
                    if d.color != a as u32 || d.block != b {
                        return fail(format!("entry misfiled in block {b}"));
                    }
                    if let Some(p) = last {
                        if self.cmp(p, e) != Ordering::Less {
                            return fail(format!("color {a} order broken at block {b}"));
                        }
                    }
                    last = Some(e);
                    count += 1;
                }
                let leaf = blk.leaf;
                let ln = self.node(leaf);
                if !ln.in_use || ln.block != b || ln.min_head != blk.entries[0] {
                    return fail(format!("leaf link broken for block {b}"));
                }
                blocks_of_color.push(blk.entries.len());
                live_blocks += 1;
                prev = b;
                b = blk.next;
            }
            if count != self.color_counts[a] {
                return fail(format!("color {a} count drifted"));
            }
            total += count;
            if blocks_of_color.len() > 1 {
                for (i, &sz) in blocks_of_color.iter().enumerate() {
                    if sz < self.cap / 2 || sz > 2 * self.cap {
                        return fail(format!("color {a} block {i} size {sz} out of bounds"));
                    }
                }
            } else if let Some(&sz) = blocks_of_color.first() {
                if sz > 2 * self.cap {
                    return fail(format!("color {a} sole block size {sz} over cap"));
                }
            }
        }
        if total != self.base.len() {
            return fail(format!("entry total {total} != base {}", self.base.len()));
        }
        // Tree walk: recompute every node from scratch.
        if self.tree.root == NONE {
            if live_blocks != 0 {
                return fail("tree empty with live blocks".into());
            }
            return Ok(());
        }
        let mut leaves_seen = 0usize;
        let mut last_head: Option<Handle> = None;
        self.check_node(self.tree.root, NONE, &mut leaves_seen, &mut last_head)?;
        if leaves_seen != live_blocks {
            return fail(format!("tree has {leaves_seen} leaves, {live_blocks} blocks"));
        }
        Ok(())
    }

    fn check_node(
        &self,
        id: u32,
        parent: u32,
        leaves: &mut usize,
        last_head: &mut Option<Handle>,
    ) -> Result<()> {
        let fail = |m: String| Err(Error::AuditFailed(m));
        let n = self.node(id);
        if !n.in_use || n.parent != parent {
            return fail(format!("tree node {id} linkage broken"));
        }
        if n.block != NONE {
            if n.size != 1 || n.min_head != n.max_head || n.col.len() != 1 {
                return fail(format!("leaf {id} malformed"));
            }
            if let Some(p) = *last_head {
                if self.cmp(p, n.min_head) != Ordering::Less {
                    return fail(format!("leaf {id} out of order"));
                }
            }
            *last_head = Some(n.min_head);
            *leaves += 1;
            return Ok(());
        }
        self.check_node(n.left, id, leaves, last_head)?;
        self.check_node(n.right, id, leaves, last_head)?;
        let (l, r) = (self.node(n.left), self.node(n.right));
        if n.size != l.size + r.size || n.min_head != l.min_head || n.max_head != r.max_head {
            return fail(format!("node {id} summary stale"));
        }
        // Recompute the color set by merging children.
        let mut want: Vec<ColRange> = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < l.col.len() || j < r.col.len() {
            if j == r.col.len() || (i < l.col.len() && l.col[i].color < r.col[j].color) {
                want.push(l.col[i]);
                i += 1;
            } else if i == l.col.len() || r.col[j].color < l.col[i].color {
                want.push(r.col[j]);
                j += 1;
            } else {
                want.push(ColRange {
                    color: l.col[i].color,
                    min: l.col[i].min,
                    max: r.col[j].max,
                });
                i += 1;
                j += 1;
            }
        }
        let same = n.col.len() == want.len()
            && n.col
                .iter()
                .zip(&want)
                .all(|(x, y)| x.color == y.color && x.min == y.min && x.max == y.max);
        if !same {
            return fail(format!("node {id} color set stale"));
        }
        Ok(())
    }
}

// === tests ===

#[cfg(test)]
mod tests {
    use super::*;

    fn xorshift(state: &mut u64) -> u64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        *state
    }

    /// Shadow oracle: entries in order with colors; pred by left scan.
    fn oracle_pred(shadow: &[(Handle, u32)], at: usize, a: u32) -> Option<Handle> {
        shadow[..=at]
            .iter()
            .rev()
            .find(|&&(_, c)| c == a)
            .map(|&(h, _)| h)
    }

    #[test]
    fn self_preceding_convention() {
        let mut cl = ColoredList::with_block_cap(16, 4);
        let h = cl.cp_insert(None, 5).unwrap();
        assert_eq!(cl.cp_pred(h, 5).unwrap(), Some(h));
        assert_eq!(cl.cp_pred(h, 3).unwrap(), None);
        cl.validate().unwrap();
    }

    #[test]
    fn adjacent_same_color() {
        let mut cl = ColoredList::with_block_cap(4, 4);
        let a = cl.cp_insert(None, 2).unwrap();
        let b = cl.cp_insert(Some(a), 2).unwrap();
        assert_eq!(cl.cp_pred(b, 2).unwrap(), Some(b));
        let c = cl.cp_insert(Some(b), 1).unwrap();
        assert_eq!(cl.cp_pred(c, 2).unwrap(), Some(b));
        cl.cp_delete(b).unwrap();
        assert_eq!(cl.cp_pred(c, 2).unwrap(), Some(a));
        cl.validate().unwrap();
    }

    #[test]
    fn four_entry_example() {
        // Colors: a=0, b=1, c=2 over the list <a, b, a, c>.
        let mut cl = ColoredList::with_block_cap(3, 4);
        let e1 = cl.cp_insert(None, 0).unwrap();
        let e2 = cl.cp_insert(Some(e1), 1).unwrap();
        let e3 = cl.cp_insert(Some(e2), 0).unwrap();
        let e4 = cl.cp_insert(Some(e3), 2).unwrap();
        assert_eq!(cl.cp_pred(e4, 0).unwrap(), Some(e3));
        assert_eq!(cl.cp_pred(e1, 2).unwrap(), None);
        assert_eq!(cl.cp_pred(e3, 1).unwrap(), Some(e2));
    }

    #[test]
    fn delete_middle_of_run() {
        let mut cl = ColoredList::with_block_cap(2, 4);
        let a = cl.cp_insert(None, 1).unwrap();
        let b = cl.cp_insert(Some(a), 1).unwrap();
        let c = cl.cp_insert(Some(b), 1).unwrap();
        let probe = cl.cp_insert(Some(c), 0).unwrap();
        cl.cp_delete(b).unwrap();
        assert_eq!(cl.cp_pred(probe, 1).unwrap(), Some(c));
        cl.cp_delete(c).unwrap();
        assert_eq!(cl.cp_pred(probe, 1).unwrap(), Some(a));
        cl.cp_delete(a).unwrap();
        assert_eq!(cl.cp_pred(probe, 1).unwrap(), None);
        cl.validate().unwrap();
    }

    #[test]
    fn delete_sole_entry() {
        let mut cl = ColoredList::with_block_cap(8, 4);
        let h = cl.cp_insert(None, 3).unwrap();
        let probe = cl.cp_insert(Some(h), 0).unwrap();
        cl.cp_delete(h).unwrap();
        assert_eq!(cl.cp_pred(probe, 3).unwrap(), None);
        assert!(cl.cp_pred(h, 3).is_err());
        cl.validate().unwrap();
    }

    #[test]
    fn random_inserts_match_left_scan() {
        let sigma = 16u32;
        let mut cl = ColoredList::with_block_cap(sigma as usize, 8);
        let mut shadow: Vec<(Handle, u32)> = Vec::new();
        let mut state = 0x5eed_0001u64;
        for step in 0..10_000 {
            let pos = xorshift(&mut state) as usize % (shadow.len() + 1);
            let color = (xorshift(&mut state) % sigma as u64) as u32;
            let after = if pos == 0 { None } else { Some(shadow[pos - 1].0) };
            let h = cl.cp_insert(after, color).unwrap();
            shadow.insert(pos, (h, color));
            if step % 100 == 99 {
                for _ in 0..10 {
                    let i = xorshift(&mut state) as usize % shadow.len();
                    let a = (xorshift(&mut state) % sigma as u64) as u32;
                    assert_eq!(
                        cl.cp_pred(shadow[i].0, a).unwrap(),
                        oracle_pred(&shadow, i, a),
                        "probe at {i} color {a} after {step} ops"
                    );
                }
            }
            if step % 2500 == 0 {
                cl.validate().unwrap();
            }
        }
        cl.validate().unwrap();
    }

    #[test]
    fn churn_across_alphabet_sizes() {
        for &sigma in &[2usize, 256, 10_000] {
            let mut cl = ColoredList::with_block_cap(sigma, 16);
            let mut shadow: Vec<(Handle, u32)> = Vec::new();
            let mut state = 0x1000 + sigma as u64;
            for _ in 0..30_000 {
                if shadow.is_empty() || xorshift(&mut state) % 4 != 0 {
                    let pos = xorshift(&mut state) as usize % (shadow.len() + 1);
                    let color = (xorshift(&mut state) % sigma as u64) as u32;
                    let after = if pos == 0 { None } else { Some(shadow[pos - 1].0) };
                    let h = cl.cp_insert(after, color).unwrap();
                    shadow.insert(pos, (h, color));
                } else {
                    let pos = xorshift(&mut state) as usize % shadow.len();
                    let (h, _) = shadow.remove(pos);
                    cl.cp_delete(h).unwrap();
                }
            }
            cl.validate().unwrap();
            // Batch probes against a positions-per-color oracle.
            let mut per_color: Vec<Vec<usize>> = vec![Vec::new(); sigma];
            for (i, &(_, c)) in shadow.iter().enumerate() {
                per_color[c as usize].push(i);
            }
            for _ in 0..3000 {
                let i = xorshift(&mut state) as usize % shadow.len();
                let a = (xorshift(&mut state) % sigma as u64) as u32;
                let want = per_color[a as usize]
                    .partition_point(|&p| p <= i)
                    .checked_sub(1)
                    .map(|k| shadow[per_color[a as usize][k]].0);
                assert_eq!(cl.cp_pred(shadow[i].0, a).unwrap(), want);
            }
        }
    }

    #[test]
    fn color_iteration_and_counts() {
        let mut cl = ColoredList::with_block_cap(4, 4);
        let mut shadow: Vec<(Handle, u32)> = Vec::new();
        let mut state = 42u64;
        for _ in 0..2000 {
            let pos = xorshift(&mut state) as usize % (shadow.len() + 1);
            let color = (xorshift(&mut state) % 4) as u32;
            let after = if pos == 0 { None } else { Some(shadow[pos - 1].0) };
            let h = cl.cp_insert(after, color).unwrap();
            shadow.insert(pos, (h, color));
        }
        for a in 0..4u32 {
            let want: Vec<Handle> = shadow
                .iter()
                .filter(|&&(_, c)| c == a)
                .map(|&(h, _)| h)
                .collect();
            assert_eq!(cl.count_color(a), want.len());
            let got: Vec<Handle> = cl.iter_color(a).collect();
            assert_eq!(got, want);
        }
        let all: Vec<Handle> = cl.iter().collect();
        let want: Vec<Handle> = shadow.iter().map(|&(h, _)| h).collect();
        assert_eq!(all, want);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cl = ColoredList::with_block_cap(4, 4);
        assert!(matches!(
            cl.cp_insert(None, 4),
            Err(Error::SymbolOutOfRange { .. })
        ));
        let h = cl.cp_insert(None, 0).unwrap();
        assert!(matches!(
            cl.cp_pred(h, 9),
            Err(Error::SymbolOutOfRange { .. })
        ));
        cl.cp_delete(h).unwrap();
        assert!(matches!(cl.cp_delete(h), Err(Error::InvalidHandle)));
    }
}
