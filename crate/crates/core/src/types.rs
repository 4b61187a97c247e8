//! Types of finite copies: skeletons, strong isomorphism, and the type
//! enumeration whose size is the big Ramsey degree.
//!
//! A skeleton is a planar tree over the leaves `l0 < ... < l{m-1}` whose
//! internal nodes have arity at least two and carry a strict level order
//! extending the ancestor relation. Only diagonal copies are typed: distinct
//! meets sit at distinct levels, and several branches splitting at one node
//! make one internal node of higher arity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::classes::{sorted_names, ClassSpec};
use crate::error::{Error, Result};
use crate::flim::LimitChain;
use crate::structures::{Adjacency, RelStruct};
use crate::tmax::{induced_structure, meet_len, Copy};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Child {
    Leaf(usize),
    /// An internal node, by rank.
    Node(usize),
}

/// A type representative. `internals[r]` lists the children of the internal
/// node of rank `r`; rank 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Skeleton {
    leaves: usize,
    internals: Vec<Vec<Child>>,
}

impl Skeleton {
    /// The skeleton of a single branch.
    pub fn leaf() -> Self {
        Skeleton {
            leaves: 1,
            internals: Vec::new(),
        }
    }

    /// Checks every invariant: one root, arity at least two, ranks extending
    /// the ancestor relation, leaves read left to right in order.
    pub fn new(leaves: usize, internals: Vec<Vec<Child>>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::invalid(format!("malformed skeleton: {msg}")));
        if leaves == 0 {
            return bad("no leaves");
        }
        if leaves == 1 {
            return if internals.is_empty() { Ok(Skeleton::leaf()) } else { bad("a single leaf has no internal nodes") };
        }
        if internals.is_empty() {
            return bad("no root");
        }
        let mut parent = vec![None; internals.len()];
        for (r, children) in internals.iter().enumerate() {
            if children.len() < 2 {
                return bad("internal node of arity below two");
            }
            for c in children {
                if let Child::Node(q) = *c {
                    if q >= internals.len() || q <= r {
                        return bad("a child must rank after its parent");
                    }
                    if parent[q].replace(r).is_some() {
                        return bad("internal node with two parents");
                    }
                }
            }
        }
        if parent.iter().skip(1).any(Option::is_none) {
            return bad("disconnected internal node");
        }
        let s = Skeleton { leaves, internals };
        let order = s.leaf_order(0);
        if order != (0..leaves).collect::<Vec<_>>() {
            return bad("leaves out of order");
        }
        Ok(s)
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn internals(&self) -> &[Vec<Child>] {
        &self.internals
    }

    pub fn internal_count(&self) -> usize {
        self.internals.len()
    }

    fn leaf_order(&self, rank: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for c in &self.internals[rank] {
            match *c {
                Child::Leaf(i) => out.push(i),
                Child::Node(q) => out.extend(self.leaf_order(q)),
            }
        }
        out
    }

    /// The leaf interval `[lo, hi)` below a child.
    pub fn span(&self, child: &Child) -> (usize, usize) {
        match *child {
            Child::Leaf(i) => (i, i + 1),
            Child::Node(q) => {
                let first = self.span(&self.internals[q][0]);
                let last = self.span(self.internals[q].last().expect("arity >= 2"));
                (first.0, last.1)
            }
        }
    }

    /// Parent rank of each internal node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.internals.len()];
        for (r, children) in self.internals.iter().enumerate() {
            for c in children {
                if let Child::Node(q) = *c {
                    parent[q] = Some(r);
                }
            }
        }
        parent
    }

    fn render(&self, child: &Child, out: &mut String) {
        match *child {
            Child::Leaf(i) => {
                out.push('l');
                out.push_str(&i.to_string());
            }
            Child::Node(r) => {
                out.push('(');
                out.push_str(&r.to_string());
                out.push(':');
                for c in &self.internals[r] {
                    out.push(' ');
                    self.render(c, out);
                }
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if self.internals.is_empty() {
            out.push_str("l0");
        } else {
            self.render(&Child::Node(0), &mut out);
        }
        f.write_str(&out)
    }
}

impl Serialize for Skeleton {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl FromStr for Skeleton {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            at: 0,
            internals: Vec::new(),
            leaves: 0,
        };
        p.skip_ws();
        let top = p.skel()?;
        p.skip_ws();
        if p.at != p.src.len() {
            return Err(p.error("trailing input"));
        }
        match top {
            Child::Leaf(0) => Skeleton::new(1, Vec::new()),
            Child::Leaf(_) => Err(p.error("a lone leaf must be l0")),
            Child::Node(_) => {
                let mut internals = vec![Vec::new(); p.internals.len()];
                for (rank, children) in p.internals {
                    if rank >= internals.len() || !internals[rank].is_empty() {
                        return Err(Error::invalid(format!("skeleton ranks must be 0..k-1 without repeats: {s}")));
                    }
                    internals[rank] = children;
                }
                Skeleton::new(p.leaves, internals)
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    at: usize,
    internals: Vec<(usize, Vec<Child>)>,
    leaves: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::invalid(format!(
            "bad skeleton at byte {}: {msg} in {:?}",
            self.at,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.at).is_some_and(|b| b.is_ascii_whitespace()) {
            self.at += 1;
        }
    }

    fn number(&mut self) -> Result<usize> {
        let start = self.at;
        while self.src.get(self.at).is_some_and(u8::is_ascii_digit) {
            self.at += 1;
        }
        std::str::from_utf8(&self.src[start..self.at])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.error("expected a number"))
    }

    fn skel(&mut self) -> Result<Child> {
        match self.src.get(self.at) {
            Some(b'l') => {
                self.at += 1;
                let i = self.number()?;
                self.leaves += 1;
                Ok(Child::Leaf(i))
            }
            Some(b'(') => {
                self.at += 1;
                self.skip_ws();
                let rank = self.number()?;
                self.skip_ws();
                if self.src.get(self.at) != Some(&b':') {
                    return Err(self.error("expected ':'"));
                }
                self.at += 1;
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    if self.src.get(self.at) == Some(&b')') {
                        self.at += 1;
                        break;
                    }
                    children.push(self.skel()?);
                }
                self.internals.push((rank, children));
                Ok(Child::Node(rank))
            }
            _ => Err(self.error("expected 'l' or '('")),
        }
    }
}

/// A planar tree without level order.
#[derive(Clone, Debug)]
enum Shape {
    Leaf(usize),
    Node(Vec<Shape>),
}

/// All planar trees over leaves `[lo, hi)` whose nodes pass `accept`, which
/// sees the child intervals of a node.
fn shapes(lo: usize, hi: usize, accept: &dyn Fn(&[(usize, usize)]) -> bool) -> Vec<Shape> {
    if hi - lo == 1 {
        return vec![Shape::Leaf(lo)];
    }
    let gaps = hi - lo - 1;
    let mut out = Vec::new();
    // a nonzero mask over the gaps between consecutive leaves picks the cuts
    for mask in 1u64..(1u64 << gaps) {
        let mut blocks = Vec::new();
        let mut start = lo;
        for g in 0..gaps {
            if mask >> g & 1 == 1 {
                blocks.push((start, lo + g + 1));
                start = lo + g + 1;
            }
        }
        blocks.push((start, hi));
        if !accept(&blocks) {
            continue;
        }
        let mut partial: Vec<Vec<Shape>> = vec![Vec::new()];
        for &(a, b) in &blocks {
            let options = shapes(a, b, accept);
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut p = prefix.clone();
                        p.push(o.clone());
                        p
                    })
                })
                .collect();
        }
        out.extend(partial.into_iter().map(Shape::Node));
    }
    out
}

/// Every skeleton obtained from `shape` by a level order, i.e. by a linear
/// extension of its internal nodes.
fn level_orders(shape: &Shape, leaves: usize, out: &mut BTreeSet<Skeleton>) {
    // flatten internal nodes: children lists with internal ids, parent ids
    let mut children: Vec<Vec<Result<usize, usize>>> = Vec::new();
    fn flatten(s: &Shape, children: &mut Vec<Vec<Result<usize, usize>>>) -> Result<usize, usize> {
        match s {
            Shape::Leaf(i) => Err(*i),
            Shape::Node(kids) => {
                let id = children.len();
                children.push(Vec::new());
                let list = kids.iter().map(|k| flatten(k, children)).collect();
                children[id] = list;
                Ok(id)
            }
        }
    }
    if let Shape::Leaf(_) = shape {
        out.insert(Skeleton::leaf());
        return;
    }
    let _ = flatten(shape, &mut children);
    let k = children.len();
    let mut rank_of = vec![usize::MAX; k];
    let mut frontier = vec![0usize];

    fn extend(
        children: &[Vec<Result<usize, usize>>],
        frontier: &mut Vec<usize>,
        rank_of: &mut Vec<usize>,
        next: usize,
        leaves: usize,
        out: &mut BTreeSet<Skeleton>,
    ) {
        if frontier.is_empty() {
            let mut internals = vec![Vec::new(); children.len()];
            for (id, kids) in children.iter().enumerate() {
                internals[rank_of[id]] = kids
                    .iter()
                    .map(|c| match *c {
                        Err(leaf) => Child::Leaf(leaf),
                        Ok(q) => Child::Node(rank_of[q]),
                    })
                    .collect();
            }
            out.insert(Skeleton { leaves, internals });
            return;
        }
        for idx in 0..frontier.len() {
            let id = frontier.swap_remove(idx);
            rank_of[id] = next;
            let added: Vec<usize> = children[id].iter().filter_map(|c| c.ok()).collect();
            frontier.extend(&added);
            extend(children, frontier, rank_of, next + 1, leaves, out);
            frontier.truncate(frontier.len() - added.len());
            frontier.push(id);
            let last = frontier.len() - 1;
            frontier.swap(idx, last);
            rank_of[id] = usize::MAX;
        }
    }
    extend(&children, &mut frontier, &mut rank_of, 0, leaves, out);
}

/// All skeletons with `m` leaves, ordered by their encodings.
pub fn skeletons(m: usize) -> Result<Vec<Skeleton>> {
    collect(m, &|_| true)
}

fn collect(m: usize, accept: &dyn Fn(&[(usize, usize)]) -> bool) -> Result<Vec<Skeleton>> {
    if m == 0 {
        return Err(Error::invalid("skeletons need at least one leaf"));
    }
    if m > 64 {
        return Err(Error::invalid("too many leaves"));
    }
    let mut set = BTreeSet::new();
    for shape in shapes(0, m, accept) {
        level_orders(&shape, m, &mut set);
    }
    let mut out: Vec<Skeleton> = set.into_iter().collect();
    out.sort_by_cached_key(|s| s.to_string());
    Ok(out)
}

/// The skeleton of a diagonal copy: internal nodes are the distinct meets,
/// children are ordered lexicographically and ranks follow meet length.
pub fn type_of(c: &Copy) -> Result<Skeleton> {
    let m = c.len();
    if m == 1 {
        return Ok(Skeleton::leaf());
    }
    let h: Vec<usize> = c
        .nodes()
        .windows(2)
        .map(|w| meet_len(w[0].entries(), w[1].entries()))
        .collect();
    // (meet length, children as blocks) per internal node, discovered top-down
    let mut found: Vec<(usize, usize, Vec<(usize, usize)>)> = Vec::new();
    let mut stack = vec![(0usize, m)];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let level = *h[lo..hi - 1].iter().min().expect("two leaves");
        let mut blocks = Vec::new();
        let mut start = lo;
        for i in lo..hi - 1 {
            if h[i] == level {
                blocks.push((start, i + 1));
                start = i + 1;
            }
        }
        blocks.push((start, hi));
        stack.extend(blocks.iter().copied());
        found.push((level, lo, blocks));
    }
    found.sort_by_key(|&(level, lo, _)| (level, lo));
    for w in found.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::NonDiagonal {
                first: c.nodes()[w[0].1].restrict(w[0].0).to_string(),
                second: c.nodes()[w[1].1].restrict(w[1].0).to_string(),
                length: w[0].0,
            });
        }
    }
    // rank of the internal node owning a block, found by its leaf interval
    let rank_of_block = |a: usize, b: usize| -> Option<usize> {
        found.iter().position(|(_, lo, blocks)| *lo == a && blocks.last().is_some_and(|l| l.1 == b))
    };
    let internals = found
        .iter()
        .map(|(_, _, blocks)| {
            blocks
                .iter()
                .map(|&(a, b)| {
                    if b - a == 1 {
                        Child::Leaf(a)
                    } else {
                        Child::Node(rank_of_block(a, b).expect("every block of size >= 2 is a node"))
                    }
                })
                .collect()
        })
        .collect();
    Skeleton::new(m, internals)
}

/// A copy together with its type and induced structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedCopy {
    pub copy: Copy,
    pub skeleton: Skeleton,
    pub structure: RelStruct,
}

impl TypedCopy {
    pub fn new(chain: &LimitChain, copy: Copy) -> Result<Self> {
        let skeleton = type_of(&copy)?;
        let structure = induced_structure(chain, &copy)?;
        Ok(TypedCopy {
            copy,
            skeleton,
            structure,
        })
    }
}

/// Whether two diagonal copies are strongly isomorphic: equal induced
/// structures and equal skeletons.
pub fn strongly_isomorphic(chain: &LimitChain, c1: &Copy, c2: &Copy) -> Result<bool> {
    let (t1, t2) = (type_of(c1)?, type_of(c2)?);
    Ok(t1 == t2 && induced_structure(chain, c1)? == induced_structure(chain, c2)?)
}

/// Evidence for or against realizability of a skeleton.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// The structure each internal node's successors must carry, by rank.
    Realizable { children: Vec<RelStructView> },
    /// Leaves below two children of `rank` disagree on a relation.
    Undetermined {
        rank: usize,
        children: (usize, usize),
        symbol: String,
        witnesses: [(usize, usize); 2],
    },
    /// The successors of `rank` would carry a structure outside the class.
    NotInClass { rank: usize, structure: RelStructView },
}

/// JSON-friendly rendering of a small structure inside a certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelStructView(pub crate::structures::StructureJson);

impl From<&RelStruct> for RelStructView {
    fn from(s: &RelStruct) -> Self {
        RelStructView(s.into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Realizability {
    pub realizable: bool,
    pub certificate: Certificate,
}

/// Local test at one internal node whose children cover `blocks`: relations
/// between leaves under different children must not depend on the leaves, and
/// the resulting children structure must lie in the class. Returns the
/// children structure or the obstruction.
fn node_check(h: &Adjacency, names: &[String], class: &ClassSpec, blocks: &[(usize, usize)]) -> std::result::Result<Adjacency, NodeFailure> {
    let k = h.symbols;
    let mut children = Adjacency::new(blocks.len(), k);
    for (a, &(alo, ahi)) in blocks.iter().enumerate() {
        for (b, &(blo, bhi)) in blocks.iter().enumerate() {
            if a == b {
                continue;
            }
            for s in 0..k {
                let value = h.get(s, alo, blo);
                for u in alo..ahi {
                    for v in blo..bhi {
                        if h.get(s, u, v) != value {
                            return Err(NodeFailure::Undetermined {
                                children: (a.min(b), a.max(b)),
                                symbol: names[s].clone(),
                                witnesses: [(alo, blo), (u, v)],
                            });
                        }
                    }
                }
                children.set(s, a, b, value);
            }
        }
    }
    if class.violation_dense(&children).is_some() {
        return Err(NodeFailure::NotInClass(children));
    }
    Ok(children)
}

enum NodeFailure {
    Undetermined {
        children: (usize, usize),
        symbol: String,
        witnesses: [(usize, usize); 2],
    },
    NotInClass(Adjacency),
}

fn prepare(h: &RelStruct, class: &ClassSpec) -> Result<(Adjacency, Vec<String>)> {
    class.require(h)?;
    Ok((h.dense(), sorted_names(class.signature())))
}

/// Whether some copy of `h` has type `skel`: every internal node must see a
/// well-defined children structure, and that structure must be in the class.
pub fn check_realizable(skel: &Skeleton, h: &RelStruct, class: &ClassSpec) -> Result<Realizability> {
    if skel.leaves() != h.size() {
        return Err(Error::invalid(format!(
            "skeleton has {} leaves but the structure has {} points",
            skel.leaves(),
            h.size()
        )));
    }
    let (dense, names) = prepare(h, class)?;
    let mut children = Vec::new();
    for (rank, kids) in skel.internals().iter().enumerate() {
        let blocks: Vec<(usize, usize)> = kids.iter().map(|c| skel.span(c)).collect();
        match node_check(&dense, &names, class, &blocks) {
            Ok(adj) => children.push(RelStructView::from(&adj.to_struct(&names))),
            Err(NodeFailure::Undetermined {
                children,
                symbol,
                witnesses,
            }) => {
                return Ok(Realizability {
                    realizable: false,
                    certificate: Certificate::Undetermined {
                        rank,
                        children,
                        symbol,
                        witnesses,
                    },
                })
            }
            Err(NodeFailure::NotInClass(adj)) => {
                return Ok(Realizability {
                    realizable: false,
                    certificate: Certificate::NotInClass {
                        rank,
                        structure: RelStructView::from(&adj.to_struct(&names)),
                    },
                })
            }
        }
    }
    Ok(Realizability {
        realizable: true,
        certificate: Certificate::Realizable { children },
    })
}

/// The children structure an internal node of `skel` must carry, when the
/// relations of `h` determine one.
pub(crate) fn children_structure(skel: &Skeleton, rank: usize, h: &Adjacency) -> Option<Adjacency> {
    let blocks: Vec<(usize, usize)> = skel.internals()[rank].iter().map(|c| skel.span(c)).collect();
    let k = h.symbols;
    let mut out = Adjacency::new(blocks.len(), k);
    for (a, &(alo, ahi)) in blocks.iter().enumerate() {
        for (b, &(blo, bhi)) in blocks.iter().enumerate() {
            if a == b {
                continue;
            }
            for s in 0..k {
                let value = h.get(s, alo, blo);
                if (alo..ahi).any(|u| (blo..bhi).any(|v| h.get(s, u, v) != value)) {
                    return None;
                }
                out.set(s, a, b, value);
            }
        }
    }
    Some(out)
}

/// All types of copies of `h` in `F_max`, as skeletons in encoding order. The
/// length of the list is the big Ramsey degree `T(h, F_max)`.
pub fn enumerate_types(h: &RelStruct, class: &ClassSpec) -> Result<Vec<Skeleton>> {
    let (dense, names) = prepare(h, class)?;
    collect(h.size(), &|blocks| node_check(&dense, &names, class, blocks).is_ok())
}
