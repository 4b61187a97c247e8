//! Finite ordered binary relational structures.
//!
//! The universe of a structure of size `m` is always `0..m`, linearly ordered
//! by the natural order of the integers. Because of that, an order-preserving
//! bijection between two structures of the same size is unique, and
//! isomorphism reduces to comparing relation sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// A relation symbol with its declared properties.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default = "default_true")]
    pub irreflexive: bool,
}

fn default_true() -> bool {
    true
}

impl Symbol {
    pub fn new(name: impl Into<String>, symmetric: bool, irreflexive: bool) -> Self {
        Symbol {
            name: name.into(),
            symmetric,
            irreflexive,
        }
    }
}

/// An ordered binary relational signature `{<, R_0, ..., R_{k-1}}`; the order
/// symbol is implicit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    symbols: Vec<Symbol>,
}

impl Signature {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("a signature needs at least one relation symbol"));
        }
        let names: BTreeSet<&str> = symbols.iter().map(|s| s.name.as_str()).collect();
        if names.len() != symbols.len() {
            return Err(Error::invalid("duplicate relation symbol in signature"));
        }
        Ok(Signature { symbols })
    }

    /// One symmetric irreflexive symbol `R0`: ordered graphs.
    pub fn graph() -> Self {
        Signature {
            symbols: vec![Symbol::new("R0", true, true)],
        }
    }

    /// One irreflexive, not necessarily symmetric symbol `R0`.
    pub fn directed() -> Self {
        Signature {
            symbols: vec![Symbol::new("R0", false, true)],
        }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn names(&self) -> Vec<String> {
        self.symbols.iter().map(|s| s.name.clone()).collect()
    }

    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }

    /// The first relation symbol, `R_0`.
    pub fn first(&self) -> &Symbol {
        &self.symbols[0]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    fn sorted_names(&self) -> Vec<String> {
        let mut names = self.names();
        names.sort();
        names
    }
}

/// A way in which a structure fails to respect a signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownSymbol { symbol: String },
    MissingSymbol { symbol: String },
    OutOfRange { symbol: String, pair: (usize, usize) },
    Reflexive { symbol: String, point: usize },
    Asymmetric { symbol: String, pair: (usize, usize) },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownSymbol { symbol } => write!(f, "unknown symbol {symbol}"),
            Violation::MissingSymbol { symbol } => write!(f, "missing symbol {symbol}"),
            Violation::OutOfRange { symbol, pair } => {
                write!(f, "{symbol}{pair:?} has an index out of range")
            }
            Violation::Reflexive { symbol, point } => {
                write!(f, "{symbol}({point},{point}) under an irreflexive symbol")
            }
            Violation::Asymmetric { symbol, pair: (i, j) } => {
                write!(f, "{symbol}({i},{j}) without {symbol}({j},{i}) under a symmetric symbol")
            }
        }
    }
}

/// A finite structure on `0..size` with one ordered-pair set per symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelStruct {
    size: usize,
    relations: BTreeMap<String, BTreeSet<(usize, usize)>>,
}

impl RelStruct {
    /// An empty structure: `size` points and no related pairs.
    pub fn empty(size: usize, sig: &Signature) -> Self {
        RelStruct {
            size,
            relations: sig
                .symbols
                .iter()
                .map(|s| (s.name.clone(), BTreeSet::new()))
                .collect(),
        }
    }

    /// Builds a structure from explicit pairs. Pairs are taken as given: no
    /// symmetric closure, no range checking beyond what [`validate`] reports.
    pub fn from_pairs<'a, I>(size: usize, sig: &Signature, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, usize, usize)>,
    {
        let mut s = RelStruct::empty(size, sig);
        for (sym, i, j) in pairs {
            s.insert(sym, i, j)?;
        }
        Ok(s)
    }

    /// A structure over the graph signature with the given undirected edges.
    pub fn graph(size: usize, edges: &[(usize, usize)]) -> Self {
        let sig = Signature::graph();
        let mut s = RelStruct::empty(size, &sig);
        for &(i, j) in edges {
            s.relation_mut("R0").insert((i, j));
            s.relation_mut("R0").insert((j, i));
        }
        s
    }

    /// A structure over the directed signature with the given arcs.
    pub fn digraph(size: usize, arcs: &[(usize, usize)]) -> Self {
        let sig = Signature::directed();
        let mut s = RelStruct::empty(size, &sig);
        for &(i, j) in arcs {
            s.relation_mut("R0").insert((i, j));
        }
        s
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn relations(&self) -> &BTreeMap<String, BTreeSet<(usize, usize)>> {
        &self.relations
    }

    pub fn relation(&self, symbol: &str) -> Option<&BTreeSet<(usize, usize)>> {
        self.relations.get(symbol)
    }

    pub fn holds(&self, symbol: &str, i: usize, j: usize) -> bool {
        self.relations
            .get(symbol)
            .is_some_and(|r| r.contains(&(i, j)))
    }

    pub fn insert(&mut self, symbol: &str, i: usize, j: usize) -> Result<()> {
        match self.relations.get_mut(symbol) {
            Some(r) => {
                r.insert((i, j));
                Ok(())
            }
            None => Err(Error::invalid(format!("unknown relation symbol {symbol}"))),
        }
    }

    fn relation_mut(&mut self, symbol: &str) -> &mut BTreeSet<(usize, usize)> {
        self.relations.get_mut(symbol).expect("symbol present")
    }

    pub(crate) fn same_symbols(&self, other: &RelStruct) -> bool {
        self.relations.keys().eq(other.relations.keys())
    }

    pub(crate) fn check_symbols(&self, sig: &Signature) -> Result<()> {
        let expected = sig.sorted_names();
        if self.relations.keys().eq(expected.iter()) {
            Ok(())
        } else {
            Err(Error::SignatureMismatch {
                expected,
                found: self.relations.keys().cloned().collect(),
            })
        }
    }

    pub(crate) fn dense(&self) -> Adjacency {
        Adjacency::from_struct(self)
    }
}

impl fmt::Display for RelStruct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.size)?;
        for (sym, pairs) in &self.relations {
            write!(f, "; {sym}:")?;
            for (i, j) in pairs {
                write!(f, " {i}{j}")?;
            }
        }
        write!(f, "]")
    }
}

/// Dense relation lookup for hot loops. Symbols are indexed in the sorted
/// key order of the source structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Adjacency {
    pub(crate) size: usize,
    pub(crate) symbols: usize,
    bits: Vec<bool>,
}

impl Adjacency {
    pub(crate) fn new(size: usize, symbols: usize) -> Self {
        Adjacency {
            size,
            symbols,
            bits: vec![false; symbols * size * size],
        }
    }

    fn from_struct(s: &RelStruct) -> Self {
        let mut adj = Adjacency::new(s.size, s.relations.len());
        for (k, pairs) in s.relations.values().enumerate() {
            for &(i, j) in pairs {
                if i < s.size && j < s.size {
                    adj.set(k, i, j, true);
                }
            }
        }
        adj
    }

    #[inline]
    pub(crate) fn get(&self, sym: usize, i: usize, j: usize) -> bool {
        self.bits[(sym * self.size + i) * self.size + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, sym: usize, i: usize, j: usize, value: bool) {
        self.bits[(sym * self.size + i) * self.size + j] = value;
    }

    /// True if `(i, j)` relates exactly like `(k, l)` in `other`, in both
    /// directions and for every symbol.
    #[inline]
    pub(crate) fn pair_matches(&self, i: usize, j: usize, other: &Adjacency, k: usize, l: usize) -> bool {
        (0..self.symbols).all(|s| self.get(s, i, j) == other.get(s, k, l) && self.get(s, j, i) == other.get(s, l, k))
    }

    /// Converts back to a pair-set structure using `names` (sorted) as keys.
    pub(crate) fn to_struct(&self, names: &[String]) -> RelStruct {
        let mut relations = BTreeMap::new();
        for (k, name) in names.iter().enumerate() {
            let mut pairs = BTreeSet::new();
            for i in 0..self.size {
                for j in 0..self.size {
                    if self.get(k, i, j) {
                        pairs.insert((i, j));
                    }
                }
            }
            relations.insert(name.clone(), pairs);
        }
        RelStruct {
            size: self.size,
            relations,
        }
    }

    /// Induced substructure on `points`, re-indexed in the order given.
    pub(crate) fn restrict(&self, points: &[usize]) -> Adjacency {
        let mut out = Adjacency::new(points.len(), self.symbols);
        for s in 0..self.symbols {
            for (a, &i) in points.iter().enumerate() {
                for (b, &j) in points.iter().enumerate() {
                    if self.get(s, i, j) {
                        out.set(s, a, b, true);
                    }
                }
            }
        }
        out
    }
}

/// A strictly increasing, relation-preserving injection, stored as its image
/// tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Embedding(pub Vec<usize>);

impl Embedding {
    pub fn image(&self) -> &[usize] {
        &self.0
    }
}

/// Lists everything in `s` that contradicts the flags of `sig`.
pub fn validate(s: &RelStruct, sig: &Signature) -> Vec<Violation> {
    let mut out = Vec::new();
    for name in s.relations.keys() {
        if sig.symbol(name).is_none() {
            out.push(Violation::UnknownSymbol {
                symbol: name.clone(),
            });
        }
    }
    for symbol in &sig.symbols {
        let Some(pairs) = s.relations.get(&symbol.name) else {
            out.push(Violation::MissingSymbol {
                symbol: symbol.name.clone(),
            });
            continue;
        };
        for &(i, j) in pairs {
            if i >= s.size || j >= s.size {
                out.push(Violation::OutOfRange {
                    symbol: symbol.name.clone(),
                    pair: (i, j),
                });
                continue;
            }
            if symbol.irreflexive && i == j {
                out.push(Violation::Reflexive {
                    symbol: symbol.name.clone(),
                    point: i,
                });
            }
            if symbol.symmetric && !pairs.contains(&(j, i)) {
                out.push(Violation::Asymmetric {
                    symbol: symbol.name.clone(),
                    pair: (i, j),
                });
            }
        }
    }
    out
}

/// The substructure induced on `subset`, re-indexed onto `0..subset.len()`.
pub fn induced_substructure(s: &RelStruct, subset: &[usize]) -> Result<RelStruct> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= s.size) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: s.size,
        });
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("subset must be strictly increasing"));
    }
    let mut position = vec![usize::MAX; s.size];
    for (new, &old) in subset.iter().enumerate() {
        position[old] = new;
    }
    let relations = s
        .relations
        .iter()
        .map(|(name, pairs)| {
            let restricted = pairs
                .iter()
                .filter_map(|&(i, j)| {
                    let (a, b) = (*position.get(i)?, *position.get(j)?);
                    (a != usize::MAX && b != usize::MAX).then_some((a, b))
                })
                .collect();
            (name.clone(), restricted)
        })
        .collect();
    Ok(RelStruct {
        size: subset.len(),
        relations,
    })
}

/// All order-preserving induced embeddings of `a` into `b`, in lexicographic
/// order of their image tuples.
pub fn find_embeddings(a: &RelStruct, b: &RelStruct) -> Result<Vec<Embedding>> {
    if !a.same_symbols(b) {
        return Err(Error::SignatureMismatch {
            expected: b.relations.keys().cloned().collect(),
            found: a.relations.keys().cloned().collect(),
        });
    }
    let (da, db) = (a.dense(), b.dense());
    let mut out = Vec::new();
    for_each_embedding(&da, &db, |img| {
        out.push(Embedding(img.to_vec()));
        true
    });
    Ok(out)
}

/// Backtracking core shared by embedding search and the oracles. `visit`
/// returns `false` to stop the search early.
pub(crate) fn for_each_embedding<F>(a: &Adjacency, b: &Adjacency, mut visit: F)
where
    F: FnMut(&[usize]) -> bool,
{
    if a.size > b.size {
        return;
    }
    let mut image = Vec::with_capacity(a.size);
    extend(a, b, &mut image, &mut visit);
}

fn extend<F>(a: &Adjacency, b: &Adjacency, image: &mut Vec<usize>, visit: &mut F) -> bool
where
    F: FnMut(&[usize]) -> bool,
{
    let next = image.len();
    if next == a.size {
        return visit(image);
    }
    let start = image.last().map_or(0, |&x| x + 1);
    // leave room for the points still to place
    let end = b.size - (a.size - next - 1);
    for cand in start..end {
        if !a.pair_matches(next, next, b, cand, cand) {
            continue;
        }
        if image
            .iter()
            .enumerate()
            .all(|(i, &img)| a.pair_matches(i, next, b, img, cand))
        {
            image.push(cand);
            let keep_going = extend(a, b, image, visit);
            image.pop();
            if !keep_going {
                return false;
            }
        }
    }
    true
}

/// Whether some order-preserving embedding of `a` into `b` exists.
pub(crate) fn embeds(a: &Adjacency, b: &Adjacency) -> Option<Vec<usize>> {
    let mut found = None;
    for_each_embedding(a, b, |img| {
        found = Some(img.to_vec());
        false
    });
    found
}

/// Isomorphism of naturally ordered structures: the only candidate is the
/// identity, so this is equality of sizes and relation sets.
pub fn is_isomorphic(a: &RelStruct, b: &RelStruct) -> bool {
    a == b
}

/// Wire format of a structure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureJson {
    pub size: usize,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<[usize; 2]>>,
}

impl From<&RelStruct> for StructureJson {
    fn from(s: &RelStruct) -> Self {
        StructureJson {
            size: s.size,
            relations: s
                .relations
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|&(i, j)| [i, j]).collect()))
                .collect(),
        }
    }
}

/// Result of parsing a structure: the structure plus the pairs the parser
/// added when closing symmetric symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed {
    pub structure: RelStruct,
    pub symmetrized: Vec<(String, usize, usize)>,
}

impl StructureJson {
    /// Converts to a structure over `sig`. Symmetric symbols may list each
    /// edge once. Symbols missing from the input are taken as empty.
    pub fn into_struct(self, sig: &Signature) -> Result<Parsed> {
        let mut s = RelStruct::empty(self.size, sig);
        let mut symmetrized = Vec::new();
        for (name, pairs) in self.relations {
            let Some(symbol) = sig.symbol(&name) else {
                return Err(Error::invalid(format!("unknown relation symbol {name}")));
            };
            for [i, j] in pairs {
                if i >= self.size || j >= self.size {
                    return Err(Error::IndexOutOfRange {
                        index: i.max(j),
                        size: self.size,
                    });
                }
                s.relation_mut(&name).insert((i, j));
            }
            if symbol.symmetric {
                let missing: Vec<(usize, usize)> = s.relations[&name]
                    .iter()
                    .filter(|&&(i, j)| !s.relations[&name].contains(&(j, i)))
                    .map(|&(i, j)| (j, i))
                    .collect();
                for (i, j) in missing {
                    s.relation_mut(&name).insert((i, j));
                    symmetrized.push((name.clone(), i, j));
                }
            }
        }
        let violations = validate(&s, sig);
        if let Some(v) = violations.first() {
            return Err(Error::invalid(v.to_string()));
        }
        Ok(Parsed {
            structure: s,
            symmetrized,
        })
    }
}

/// Parses the structure JSON format against a signature.
pub fn parse_structure(value: &Value, sig: &Signature) -> Result<Parsed> {
    let raw: StructureJson = serde_json::from_value(value.clone())?;
    raw.into_struct(sig)
}

pub fn structure_to_json(s: &RelStruct) -> Value {
    serde_json::to_value(StructureJson::from(s)).expect("structure serializes")
}
