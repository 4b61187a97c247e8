//! Ground truth for the type enumeration: which types actually occur among
//! copies of a structure in a truncation of `T_max`, and explicit witnesses
//! for single skeletons.
//!
//! Two independent searches are provided. [`realized_types`] builds copies top
//! down, choosing at each level whether one block of branches splits and
//! where. [`sweep_types`] lists every embedding of the structure into the
//! whole level of `T_max` and types each copy it finds.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::sorted_names;
use crate::error::{Error, Result};
use crate::flim::LimitChain;
use crate::structures::{for_each_embedding, Adjacency, RelStruct};
use crate::tmax::{eval_dense, induced_structure, level_nodes, meet_len, Copy, Node};
use crate::types::{children_structure, enumerate_types, type_of, Skeleton};

/// Default cap on search-tree expansions in [`realized_types`].
pub const DEFAULT_BUDGET: u64 = 20_000_000;

/// Types found by an oracle, each with the first copy that exhibited it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Realized {
    pub types: Vec<Skeleton>,
    pub witnesses: BTreeMap<String, Copy>,
    pub non_diagonal_seen: u64,
}

impl Realized {
    fn from_map(found: BTreeMap<Skeleton, Copy>, non_diagonal_seen: u64) -> Self {
        let mut types: Vec<Skeleton> = found.keys().cloned().collect();
        types.sort_by_cached_key(ToString::to_string);
        Realized {
            types,
            witnesses: found.into_iter().map(|(s, c)| (s.to_string(), c)).collect(),
            non_diagonal_seen,
        }
    }
}

fn check_inputs(h: &RelStruct, chain: &LimitChain, depth: usize) -> Result<Adjacency> {
    if h.size() == 0 {
        return Err(Error::invalid("structure must have at least one point"));
    }
    chain.class().require(h)?;
    chain.require_depth(depth.saturating_sub(1))?;
    Ok(h.dense())
}

/// Verifies an oracle-built copy before it is reported.
fn certify(chain: &LimitChain, h: &RelStruct, copy: &Copy) -> Result<Skeleton> {
    let got = induced_structure(chain, copy)?;
    if &got != h {
        return Err(Error::invalid(format!("internal: witness induces {got}, expected {h}")));
    }
    type_of(copy)
}

/// All types of diagonal copies of `h` among the nodes of length `depth`.
///
/// The search descends level by level. At each level either no branch block
/// splits, or exactly one block splits into consecutive sub-blocks sent to
/// increasing successor indices; the relations between sub-blocks must match
/// the chain's structure at that level. At `depth` every block must be a
/// single branch.
pub fn realized_types(h: &RelStruct, chain: &LimitChain, depth: usize, budget: u64) -> Result<Realized> {
    let dense = check_inputs(h, chain, depth)?;
    let m = h.size();
    let mut search = Search {
        h: &dense,
        chain,
        depth,
        budget,
        spent: 0,
        entries: vec![Vec::with_capacity(depth); m],
        blocks: vec![(0, m)],
        found: BTreeMap::new(),
    };
    search.descend(0)?;
    let mut found = BTreeMap::new();
    for (_, copy) in search.found {
        let skel = certify(chain, h, &copy)?;
        found.entry(skel).or_insert(copy);
    }
    Ok(Realized::from_map(found, 0))
}

struct Search<'a> {
    h: &'a Adjacency,
    chain: &'a LimitChain,
    depth: usize,
    budget: u64,
    spent: u64,
    entries: Vec<Vec<usize>>,
    blocks: Vec<(usize, usize)>,
    /// Keyed by the consecutive meet lengths, which determine the type.
    found: BTreeMap<Vec<usize>, Copy>,
}

impl Search<'_> {
    fn descend(&mut self, level: usize) -> Result<()> {
        self.spent += 1;
        if self.spent > self.budget {
            return Err(Error::BudgetExceeded(format!(
                "meet search exceeded {} expansions",
                self.budget
            )));
        }
        let pending = self.blocks.iter().filter(|(a, b)| b - a >= 2).count();
        if pending == 0 {
            self.record();
            return Ok(());
        }
        if self.depth - level < pending {
            return Ok(());
        }
        self.push_all(|_| 0);
        self.descend(level + 1)?;
        self.pop_all();

        let level_adj = self.chain.dense_level(level);
        for bi in 0..self.blocks.len() {
            let (lo, hi) = self.blocks[bi];
            if hi - lo < 2 {
                continue;
            }
            let gaps = hi - lo - 1;
            for mask in 1u64..(1u64 << gaps) {
                let mut parts = Vec::new();
                let mut start = lo;
                for g in 0..gaps {
                    if mask >> g & 1 == 1 {
                        parts.push((start, lo + g + 1));
                        start = lo + g + 1;
                    }
                }
                parts.push((start, hi));
                if parts.len() > level + 1 {
                    continue;
                }
                let Some(wanted) = block_structure(self.h, &parts) else {
                    continue;
                };
                let mut image = None;
                for_each_embedding(&wanted, level_adj, |img| {
                    image = Some(img.to_vec());
                    false
                });
                let Some(image) = image else {
                    continue;
                };
                let entry_of = |leaf: usize| {
                    parts
                        .iter()
                        .position(|&(a, b)| a <= leaf && leaf < b)
                        .map_or(0, |p| image[p])
                };
                self.push_all(entry_of);
                let saved = std::mem::replace(&mut self.blocks, Vec::new());
                self.blocks = saved[..bi].iter().chain(&parts).chain(&saved[bi + 1..]).copied().collect();
                self.descend(level + 1)?;
                self.blocks = saved;
                self.pop_all();
            }
        }
        Ok(())
    }

    fn push_all(&mut self, entry_of: impl Fn(usize) -> usize) {
        for (leaf, e) in self.entries.iter_mut().enumerate() {
            e.push(entry_of(leaf));
        }
    }

    fn pop_all(&mut self) {
        for e in &mut self.entries {
            e.pop();
        }
    }

    fn record(&mut self) {
        let nodes: Vec<Node> = self
            .entries
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.resize(self.depth, 0);
                Node::new(e).expect("entries stay below their position")
            })
            .collect();
        let key: Vec<usize> = nodes.windows(2).map(|w| meet_len(w[0].entries(), w[1].entries())).collect();
        if !self.found.contains_key(&key) {
            let copy = Copy::new(nodes).expect("branches are distinct and ordered");
            self.found.insert(key, copy);
        }
    }
}

/// The structure the sub-blocks of a split must carry, if `h` determines one.
fn block_structure(h: &Adjacency, parts: &[(usize, usize)]) -> Option<Adjacency> {
    let mut out = Adjacency::new(parts.len(), h.symbols);
    for (a, &(alo, ahi)) in parts.iter().enumerate() {
        for (b, &(blo, bhi)) in parts.iter().enumerate() {
            if a == b {
                continue;
            }
            for s in 0..h.symbols {
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

/// Whether the raw sweep accepts a problem of this size.
pub fn sweep_feasible(points: usize, depth: usize) -> bool {
    match depth {
        0..=5 => points <= 5,
        6 => points <= 3,
        7 => points <= 2,
        _ => false,
    }
}

/// The raw sweep: every copy of `h` among all nodes of length `depth`, found
/// by embedding search against the full level, typed one by one.
/// Non-diagonal copies are counted and skipped.
pub fn sweep_types(h: &RelStruct, chain: &LimitChain, depth: usize) -> Result<Realized> {
    let dense = check_inputs(h, chain, depth)?;
    let m = h.size();
    if !sweep_feasible(m, depth) {
        return Err(Error::BudgetExceeded(format!(
            "raw sweep refuses {m} points at depth {depth}"
        )));
    }
    let nodes = level_nodes(depth);
    let n = nodes.len();
    let k = dense.symbols;
    let rows: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![false; k * n];
            for s in 0..k {
                for j in 0..n {
                    if i != j {
                        row[s * n + j] = eval_dense(chain, s, nodes[i].entries(), nodes[j].entries());
                    }
                }
            }
            row
        })
        .collect();
    let mut level = Adjacency::new(n, k);
    for (i, row) in rows.iter().enumerate() {
        for s in 0..k {
            for j in 0..n {
                if row[s * n + j] {
                    level.set(s, i, j, true);
                }
            }
        }
    }

    let classify = |image: &[usize], cache: &mut HashMap<Vec<usize>, Option<Skeleton>>| -> Option<Skeleton> {
        let key: Vec<usize> = image
            .windows(2)
            .map(|w| meet_len(nodes[w[0]].entries(), nodes[w[1]].entries()))
            .collect();
        cache
            .entry(key)
            .or_insert_with(|| {
                let copy = Copy::new(image.iter().map(|&i| nodes[i].clone()).collect()).expect("increasing image");
                type_of(&copy).ok()
            })
            .clone()
    };

    type Partial = (BTreeMap<Skeleton, Vec<usize>>, u64);
    let merge = |mut a: Partial, b: Partial| -> Partial {
        for (s, img) in b.0 {
            match a.0.entry(s) {
                Entry::Vacant(v) => {
                    v.insert(img);
                }
                Entry::Occupied(mut o) => {
                    if img < *o.get() {
                        o.insert(img);
                    }
                }
            }
        }
        (a.0, a.1 + b.1)
    };
    let (found, non_diagonal) = (0..n)
        .into_par_iter()
        .fold(
            || ((BTreeMap::new(), 0u64), HashMap::new()),
            |((mut found, mut nd), mut cache), first| {
                let mut image = vec![first];
                sweep_from(&dense, &level, &mut image, &mut |img: &[usize]| match classify(img, &mut cache) {
                    Some(s) => {
                        found.entry(s).or_insert_with(|| img.to_vec());
                    }
                    None => nd += 1,
                });
                ((found, nd), cache)
            },
        )
        .map(|(partial, _)| partial)
        .reduce(|| (BTreeMap::new(), 0), merge);

    let mut out = BTreeMap::new();
    for (skel, image) in found {
        let copy = Copy::new(image.iter().map(|&i| nodes[i].clone()).collect())?;
        let again = certify(chain, h, &copy)?;
        debug_assert_eq!(again, skel);
        out.insert(skel, copy);
    }
    Ok(Realized::from_map(out, non_diagonal))
}

/// Embedding search with the first image point fixed.
fn sweep_from(a: &Adjacency, b: &Adjacency, image: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    let next = image.len();
    if next == 1 && !a.pair_matches(0, 0, b, image[0], image[0]) {
        return;
    }
    if next == a.size {
        visit(image);
        return;
    }
    let start = image[next - 1] + 1;
    let end = b.size.saturating_sub(a.size - next - 1);
    for cand in start..end {
        if image.iter().enumerate().all(|(i, &img)| a.pair_matches(i, next, b, img, cand)) {
            image.push(cand);
            sweep_from(a, b, image, visit);
            image.pop();
        }
    }
}

/// A request to build one copy of `target` with a prescribed type.
#[derive(Clone, Debug)]
pub struct RealizationProblem<'a> {
    pub skeleton: Skeleton,
    pub target: RelStruct,
    pub chain: &'a LimitChain,
    /// Length of the branches in the witness.
    pub max_depth: usize,
}

/// Why a skeleton could not be realized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealizeFailure {
    /// Leaves below two children of this internal node relate differently.
    Undetermined { rank: usize },
    /// No level below `max_depth` contains the node's children structure.
    NoEmbedding { rank: usize, children: crate::structures::StructureJson },
    /// The children structure exists in the chain, but not late enough.
    InsufficientDepth { rank: usize, after_level: usize },
}

/// Builds a witness copy for `p.skeleton`. Internal nodes are placed in rank
/// order, each at the first level after its predecessor whose structure
/// admits the children structure; the lexicographically first embedding
/// picks the successors. Taking the earliest level never hurts a later rank,
/// so the search needs no backtracking.
pub fn realize(p: &RealizationProblem) -> Result<std::result::Result<Copy, RealizeFailure>> {
    let skel = &p.skeleton;
    let m = p.target.size();
    if skel.leaves() != m {
        return Err(Error::invalid(format!(
            "skeleton has {} leaves but the structure has {m} points",
            skel.leaves()
        )));
    }
    let chain = p.chain;
    chain.class().require(&p.target)?;
    chain.require_depth(p.max_depth.saturating_sub(1))?;
    let dense = p.target.dense();
    let names = sorted_names(chain.class().signature());

    let mut entries = vec![vec![0usize; p.max_depth]; m];
    let mut prev: Option<usize> = None;
    for (rank, kids) in skel.internals().iter().enumerate() {
        let Some(wanted) = children_structure(skel, rank, &dense) else {
            return Ok(Err(RealizeFailure::Undetermined { rank }));
        };
        let first = prev.map_or(0, |l| l + 1);
        let mut placed = None;
        for level in first..p.max_depth {
            let mut image = None;
            for_each_embedding(&wanted, chain.dense_level(level), |img| {
                image = Some(img.to_vec());
                false
            });
            if let Some(image) = image {
                placed = Some((level, image));
                break;
            }
        }
        let Some((level, image)) = placed else {
            let anywhere = (0..first.min(p.max_depth))
                .any(|l| crate::structures::embeds(&wanted, chain.dense_level(l)).is_some());
            return Ok(Err(if anywhere {
                RealizeFailure::InsufficientDepth {
                    rank,
                    after_level: first.saturating_sub(1),
                }
            } else {
                RealizeFailure::NoEmbedding {
                    rank,
                    children: (&wanted.to_struct(&names)).into(),
                }
            }));
        };
        for (c, child) in kids.iter().enumerate() {
            let (lo, hi) = skel.span(child);
            for leaf in &mut entries[lo..hi] {
                leaf[level] = image[c];
            }
        }
        prev = Some(level);
    }
    let copy = Copy::new(entries.into_iter().map(Node::new).collect::<Result<_>>()?)?;
    let got = certify(chain, &p.target, &copy)?;
    if &got != skel {
        return Err(Error::invalid(format!("internal: realized {got} instead of {skel}")));
    }
    Ok(Ok(copy))
}

/// Agreement between the enumeration and the oracles.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonReport {
    pub class: String,
    pub structure: crate::structures::StructureJson,
    pub depth: usize,
    pub enumerated: Vec<String>,
    pub realized: Vec<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub witnesses: BTreeMap<String, Copy>,
    pub failures: BTreeMap<String, RealizeFailure>,
    pub non_diagonal_seen: u64,
    /// Types found by the raw sweep, when it ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swept: Option<Vec<String>>,
}

impl ComparisonReport {
    pub fn agrees(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.swept.as_ref().is_none_or(|s| s == &self.realized)
    }
}

/// Compares [`enumerate_types`] with [`realized_types`] (and with the raw
/// sweep when `sweep` is set), attaching a [`realize`] witness or failure for
/// every enumerated skeleton.
pub fn cross_check(h: &RelStruct, chain: &LimitChain, depth: usize, budget: u64, sweep: bool) -> Result<ComparisonReport> {
    let class = chain.class();
    let enumerated = enumerate_types(h, class)?;
    let realized = realized_types(h, chain, depth, budget)?;
    let swept = if sweep { Some(sweep_types(h, chain, depth)?) } else { None };

    let names = |v: &[Skeleton]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
    let enumerated_names = names(&enumerated);
    let realized_names = names(&realized.types);
    let missing = enumerated_names.iter().filter(|s| !realized_names.contains(s)).cloned().collect();
    let extra: Vec<String> = realized_names.iter().filter(|s| !enumerated_names.contains(s)).cloned().collect();

    let mut witnesses = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for skel in &enumerated {
        let problem = RealizationProblem {
            skeleton: skel.clone(),
            target: h.clone(),
            chain,
            max_depth: depth,
        };
        match realize(&problem)? {
            Ok(copy) => {
                witnesses.insert(skel.to_string(), copy);
            }
            Err(f) => {
                failures.insert(skel.to_string(), f);
            }
        }
    }
    for s in &extra {
        witnesses.insert(s.clone(), realized.witnesses[s].clone());
    }
    Ok(ComparisonReport {
        class: class.name(),
        structure: h.into(),
        depth,
        enumerated: enumerated_names,
        realized: realized_names,
        missing,
        extra,
        witnesses,
        failures,
        non_diagonal_seen: swept.as_ref().map_or(0, |s| s.non_diagonal_seen),
        swept: swept.map(|s| names(&s.types)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassSpec;
    use crate::flim::build_chain;
    use crate::types::skeletons;

    fn names(r: &Realized) -> Vec<String> {
        r.types.iter().map(ToString::to_string).collect()
    }

    fn triangle() -> RelStruct {
        RelStruct::graph(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn path() -> RelStruct {
        RelStruct::graph(3, &[(0, 1), (1, 2)])
    }

    #[test]
    fn single_point_has_the_leaf_type() {
        let chain = build_chain(&ClassSpec::og(), 4);
        let p = RelStruct::graph(1, &[]);
        for depth in 0..=4 {
            assert_eq!(names(&realized_types(&p, &chain, depth, DEFAULT_BUDGET).unwrap()), vec!["l0"]);
        }
        assert_eq!(names(&sweep_types(&p, &chain, 3).unwrap()), vec!["l0"]);
    }

    #[test]
    fn triangle_and_path_at_depth_six() {
        let chain = build_chain(&ClassSpec::og(), 6);
        let tri = realized_types(&triangle(), &chain, 6, DEFAULT_BUDGET).unwrap();
        assert_eq!(tri.types, skeletons(3).unwrap());
        let p = realized_types(&path(), &chain, 6, DEFAULT_BUDGET).unwrap();
        assert_eq!(names(&p), vec!["(0: l0 l1 l2)"]);
        assert_eq!(sweep_types(&path(), &chain, 6).unwrap().types, p.types);
        assert_eq!(sweep_types(&triangle(), &chain, 6).unwrap().types, tri.types);
    }

    #[test]
    fn shallow_depth_misses_types() {
        let chain = build_chain(&ClassSpec::og(), 6);
        let r = cross_check(&triangle(), &chain, 2, DEFAULT_BUDGET, true).unwrap();
        assert!(!r.missing.is_empty());
        assert!(!r.agrees());
        assert_eq!(r.swept.as_ref(), Some(&r.realized));
    }

    #[test]
    fn depth_is_monotone() {
        let chain = build_chain(&ClassSpec::ot(), 6);
        let h = RelStruct::digraph(3, &[(0, 1), (1, 2), (0, 2)]);
        let mut prev: Vec<Skeleton> = Vec::new();
        for depth in 0..=6 {
            let now = realized_types(&h, &chain, depth, DEFAULT_BUDGET).unwrap().types;
            assert!(prev.iter().all(|s| now.contains(s)), "depth {depth}");
            prev = now;
        }
        assert_eq!(prev.len(), 3);
    }

    #[test]
    fn witnesses_round_trip() {
        let chain = build_chain(&ClassSpec::og(), 6);
        let r = realized_types(&triangle(), &chain, 6, DEFAULT_BUDGET).unwrap();
        for (name, copy) in &r.witnesses {
            assert_eq!(&type_of(copy).unwrap().to_string(), name);
            assert_eq!(induced_structure(&chain, copy).unwrap(), triangle());
        }
    }

    #[test]
    fn backtracking_agrees_with_sweep_on_small_members() {
        for class in [ClassSpec::og(), ClassSpec::oog(), ClassSpec::ot(), ClassSpec::opo(), ClassSpec::og_k(3).unwrap()] {
            let chain = build_chain(&class, 5);
            for size in 1..=3 {
                for h in class.members(size) {
                    let a = realized_types(&h, &chain, 5, DEFAULT_BUDGET).unwrap();
                    let b = sweep_types(&h, &chain, 5).unwrap();
                    assert_eq!(a.types, b.types, "{class} {h}");
                }
            }
        }
    }

    #[test]
    fn realize_examples() {
        let chain = build_chain(&ClassSpec::og(), 6);
        let one = RealizationProblem {
            skeleton: Skeleton::leaf(),
            target: RelStruct::graph(1, &[]),
            chain: &chain,
            max_depth: 5,
        };
        assert_eq!(realize(&one).unwrap().unwrap(), Copy::new(vec![Node::zeros(5)]).unwrap());

        let flat = RealizationProblem {
            skeleton: "(0: l0 l1 l2)".parse().unwrap(),
            target: triangle(),
            chain: &chain,
            max_depth: 6,
        };
        let copy = realize(&flat).unwrap().unwrap();
        let meet = copy.nodes()[0].entries().iter().zip(copy.nodes()[1].entries()).take_while(|(a, b)| a == b).count();
        let level = chain.level_structure(meet).unwrap();
        assert!(level.holds("R0", copy.nodes()[0].entries()[meet], copy.nodes()[2].entries()[meet]));

        let bad = RealizationProblem {
            skeleton: "(0: l0 (1: l1 l2))".parse().unwrap(),
            target: path(),
            chain: &chain,
            max_depth: 6,
        };
        assert_eq!(realize(&bad).unwrap(), Err(RealizeFailure::Undetermined { rank: 0 }));

        let shallow = RealizationProblem {
            skeleton: "(0: (1: l0 l1) l2)".parse().unwrap(),
            target: triangle(),
            chain: &chain,
            max_depth: 3,
        };
        assert!(matches!(realize(&shallow).unwrap(), Err(RealizeFailure::InsufficientDepth { rank: 1, .. })));

        let no_room = RealizationProblem {
            skeleton: "(0: l0 l1 l2)".parse().unwrap(),
            target: triangle(),
            chain: &chain,
            max_depth: 2,
        };
        assert!(matches!(realize(&no_room).unwrap(), Err(RealizeFailure::NoEmbedding { rank: 0, .. })));
    }

    #[test]
    fn budget_is_enforced() {
        let chain = build_chain(&ClassSpec::og(), 6);
        assert!(matches!(
            realized_types(&triangle(), &chain, 6, 10),
            Err(Error::BudgetExceeded(_))
        ));
        let four = RelStruct::graph(4, &[]);
        assert!(matches!(sweep_types(&four, &chain, 6), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn non_members_and_shallow_chains_are_rejected() {
        let chain = build_chain(&ClassSpec::og_k(3).unwrap(), 4);
        assert!(matches!(
            realized_types(&triangle(), &chain, 4, DEFAULT_BUDGET),
            Err(Error::NotInClass { .. })
        ));
        assert!(matches!(
            realized_types(&path(), &chain, 7, DEFAULT_BUDGET),
            Err(Error::ChainTooShallow { .. })
        ));
    }

    #[test]
    fn non_diagonal_copies_are_counted() {
        let chain = build_chain(&ClassSpec::og(), 5);
        let empty4 = RelStruct::graph(4, &[]);
        let r = sweep_types(&empty4, &chain, 5).unwrap();
        assert!(r.non_diagonal_seen > 0);
        assert_eq!(r.types, realized_types(&empty4, &chain, 5, DEFAULT_BUDGET).unwrap().types);
    }
}
