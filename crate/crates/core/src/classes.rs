//! Fraïssé-class descriptors: ordered graphs, ordered `k`-clique-free graphs,
//! ordered oriented graphs, ordered tournaments, partial orders with a linear
//! extension, and generic `Forb(F)` classes.
//!
//! Note that membership in a `Forb(F)` class ignores the linear order: the
//! forbidden structures live in the order-free reduct, so a forbidden
//! structure is looked for under arbitrary injections, unlike
//! [`find_embeddings`](crate::structures::find_embeddings) which only
//! considers increasing maps.

use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::structures::{
    parse_structure, structure_to_json, validate, Adjacency, RelStruct, Signature, Symbol, Violation,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ClassKind {
    Og,
    OgK(usize),
    Oog,
    Ot,
    Opo,
    Forb(Vec<RelStruct>),
}

/// A class of finite ordered structures over a fixed signature.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClassSpec {
    kind: ClassKind,
    signature: Signature,
    // (symmetric, irreflexive) per symbol, in sorted-name order
    flags: Vec<(bool, bool)>,
}

/// Why a structure is not in a class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassViolation {
    Signature { violation: Violation },
    Clique { points: Vec<usize> },
    Bidirectional { pair: (usize, usize) },
    NotTotal { pair: (usize, usize) },
    AgainstOrder { pair: (usize, usize) },
    NotTransitive { triple: (usize, usize, usize) },
    Forbidden { index: usize, map: Vec<usize> },
}

impl fmt::Display for ClassViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassViolation::Signature { violation } => write!(f, "{violation}"),
            ClassViolation::Clique { points } => write!(f, "clique on {points:?}"),
            ClassViolation::Bidirectional { pair: (i, j) } => {
                write!(f, "both ({i},{j}) and ({j},{i}) are related")
            }
            ClassViolation::NotTotal { pair: (i, j) } => write!(f, "no arc between {i} and {j}"),
            ClassViolation::AgainstOrder { pair: (i, j) } => {
                write!(f, "R({i},{j}) holds but {i} is not below {j}")
            }
            ClassViolation::NotTransitive { triple: (i, j, k) } => {
                write!(f, "R({i},{j}) and R({j},{k}) hold but R({i},{k}) does not")
            }
            ClassViolation::Forbidden { index, map } => {
                write!(f, "forbidden structure #{index} embeds via {map:?}")
            }
        }
    }
}

/// A one-point extension: the new point is inserted at position `rank` in the
/// linear order, and `links[i * k + s]` gives its relation to old point `i`
/// under symbol `s` (symbols in sorted-name order). For a symmetric symbol the
/// digit is 0 or 1; otherwise bit 0 is `R(new, i)` and bit 1 is `R(i, new)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ExtensionDescriptor {
    pub rank: usize,
    pub links: Vec<u8>,
}

impl ExtensionDescriptor {
    /// The extended structure, with the new point at index `rank`.
    pub fn apply(&self, s: &RelStruct, class: &ClassSpec) -> Result<RelStruct> {
        s.check_symbols(&class.signature)?;
        if self.rank > s.size() || self.links.len() != s.size() * class.flags.len() {
            return Err(Error::invalid("descriptor does not fit the structure"));
        }
        let names = sorted_names(&class.signature);
        Ok(apply_dense(&s.dense(), self.rank, &self.links, &class.flags).to_struct(&names))
    }

    /// Whether `new` relates to `old` under symbol `sym` in the direction
    /// `(new, old)` (`outgoing`) or `(old, new)`.
    pub fn relates(&self, flags: &[(bool, bool)], old: usize, sym: usize, outgoing: bool) -> bool {
        let digit = self.links[old * flags.len() + sym];
        if flags[sym].0 {
            digit == 1
        } else if outgoing {
            digit & 1 == 1
        } else {
            digit & 2 == 2
        }
    }
}

pub(crate) fn apply_dense(s: &Adjacency, rank: usize, links: &[u8], flags: &[(bool, bool)]) -> Adjacency {
    let n = s.size;
    let k = flags.len();
    let shift = |i: usize| if i < rank { i } else { i + 1 };
    let mut out = Adjacency::new(n + 1, k);
    for sym in 0..k {
        for i in 0..n {
            for j in 0..n {
                if s.get(sym, i, j) {
                    out.set(sym, shift(i), shift(j), true);
                }
            }
        }
        for i in 0..n {
            let digit = links[i * k + sym];
            let (out_arc, in_arc) = if flags[sym].0 {
                (digit == 1, digit == 1)
            } else {
                (digit & 1 == 1, digit & 2 == 2)
            };
            out.set(sym, rank, shift(i), out_arc);
            out.set(sym, shift(i), rank, in_arc);
        }
    }
    out
}

pub(crate) fn sorted_names(sig: &Signature) -> Vec<String> {
    let mut names = sig.names();
    names.sort();
    names
}

/// Number of digit values per symbol for extension configurations.
pub(crate) fn radices(flags: &[(bool, bool)]) -> Vec<u8> {
    flags.iter().map(|&(sym, _)| if sym { 2 } else { 4 }).collect()
}

/// Advances a mixed-radix counter whose last digit is least significant.
/// Returns `false` on wrap-around.
pub(crate) fn next_config(digits: &mut [u8], radix_of: impl Fn(usize) -> u8) -> bool {
    for pos in (0..digits.len()).rev() {
        digits[pos] += 1;
        if digits[pos] < radix_of(pos) {
            return true;
        }
        digits[pos] = 0;
    }
    false
}

impl ClassSpec {
    fn with(kind: ClassKind, signature: Signature) -> Result<Self> {
        let names = sorted_names(&signature);
        let mut flags = Vec::with_capacity(names.len());
        for name in &names {
            let s = signature.symbol(name).expect("name from signature");
            if !s.irreflexive {
                return Err(Error::invalid(format!(
                    "class signatures must be irreflexive; {name} is not"
                )));
            }
            flags.push((s.symmetric, s.irreflexive));
        }
        Ok(ClassSpec {
            kind,
            signature,
            flags,
        })
    }

    pub fn og() -> Self {
        ClassSpec::with(ClassKind::Og, Signature::graph()).expect("valid")
    }

    pub fn og_k(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("og_k needs k >= 3, got {k}")));
        }
        ClassSpec::with(ClassKind::OgK(k), Signature::graph())
    }

    pub fn oog() -> Self {
        ClassSpec::with(ClassKind::Oog, Signature::directed()).expect("valid")
    }

    pub fn ot() -> Self {
        ClassSpec::with(ClassKind::Ot, Signature::directed()).expect("valid")
    }

    pub fn opo() -> Self {
        ClassSpec::with(ClassKind::Opo, Signature::directed()).expect("valid")
    }

    /// `Forb(F)` over `signature`. Every forbidden structure must have at
    /// least two points and be irreducible.
    pub fn forb(forbidden: Vec<RelStruct>, signature: Signature) -> Result<Self> {
        for (idx, f) in forbidden.iter().enumerate() {
            f.check_symbols(&signature)?;
            if let Some(v) = validate(f, &signature).first() {
                return Err(Error::invalid(format!("forbidden structure #{idx}: {v}")));
            }
            if f.size() < 2 {
                return Err(Error::invalid(format!(
                    "forbidden structure #{idx} has fewer than two points"
                )));
            }
            for i in 0..f.size() {
                for j in i + 1..f.size() {
                    let linked = f.symbols().any(|s| f.holds(s, i, j) || f.holds(s, j, i));
                    if !linked {
                        return Err(Error::invalid(format!(
                            "forbidden structure #{idx} is not irreducible: {i} and {j} are unrelated"
                        )));
                    }
                }
            }
        }
        ClassSpec::with(ClassKind::Forb(forbidden), signature)
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub(crate) fn flags(&self) -> &[(bool, bool)] {
        &self.flags
    }

    /// Short name: `og`, `og_3`, `oog`, `ot`, `opo` or `forb`.
    pub fn name(&self) -> String {
        match &self.kind {
            ClassKind::Og => "og".into(),
            ClassKind::OgK(k) => format!("og_{k}"),
            ClassKind::Oog => "oog".into(),
            ClassKind::Ot => "ot".into(),
            ClassKind::Opo => "opo".into(),
            ClassKind::Forb(_) => "forb".into(),
        }
    }

    /// Whether the class has free amalgamation (every kind except `ot` and
    /// `opo`).
    pub fn is_free(&self) -> bool {
        !matches!(self.kind, ClassKind::Ot | ClassKind::Opo)
    }

    pub fn contains(&self, s: &RelStruct) -> Result<bool> {
        Ok(self.violation(s)?.is_none())
    }

    /// The first reason `s` fails membership, if any.
    pub fn violation(&self, s: &RelStruct) -> Result<Option<ClassViolation>> {
        s.check_symbols(&self.signature)?;
        if let Some(v) = validate(s, &self.signature).into_iter().next() {
            return Ok(Some(ClassViolation::Signature { violation: v }));
        }
        Ok(self.violation_dense(&s.dense()))
    }

    pub(crate) fn require(&self, s: &RelStruct) -> Result<()> {
        match self.violation(s)? {
            None => Ok(()),
            Some(violation) => Err(Error::NotInClass {
                class: self.name(),
                violation,
            }),
        }
    }

    /// Membership on a dense view whose symbols follow the sorted-name order.
    pub(crate) fn violation_dense(&self, a: &Adjacency) -> Option<ClassViolation> {
        let n = a.size;
        for (sym, &(symmetric, _)) in self.flags.iter().enumerate() {
            for i in 0..n {
                if a.get(sym, i, i) {
                    return Some(ClassViolation::Signature {
                        violation: Violation::Reflexive {
                            symbol: self.sym_name(sym),
                            point: i,
                        },
                    });
                }
                if symmetric {
                    for j in 0..n {
                        if a.get(sym, i, j) != a.get(sym, j, i) {
                            let pair = if a.get(sym, i, j) { (i, j) } else { (j, i) };
                            return Some(ClassViolation::Signature {
                                violation: Violation::Asymmetric {
                                    symbol: self.sym_name(sym),
                                    pair,
                                },
                            });
                        }
                    }
                }
            }
        }
        match &self.kind {
            ClassKind::Og => None,
            ClassKind::OgK(k) => find_clique(a, *k).map(|points| ClassViolation::Clique { points }),
            ClassKind::Oog | ClassKind::Ot => {
                for i in 0..n {
                    for j in i + 1..n {
                        let (fwd, back) = (a.get(0, i, j), a.get(0, j, i));
                        if fwd && back {
                            return Some(ClassViolation::Bidirectional { pair: (i, j) });
                        }
                        if matches!(self.kind, ClassKind::Ot) && !fwd && !back {
                            return Some(ClassViolation::NotTotal { pair: (i, j) });
                        }
                    }
                }
                None
            }
            ClassKind::Opo => {
                for i in 0..n {
                    for j in 0..i {
                        if a.get(0, i, j) {
                            return Some(ClassViolation::AgainstOrder { pair: (i, j) });
                        }
                    }
                }
                for i in 0..n {
                    for j in i + 1..n {
                        if !a.get(0, i, j) {
                            continue;
                        }
                        for k in j + 1..n {
                            if a.get(0, j, k) && !a.get(0, i, k) {
                                return Some(ClassViolation::NotTransitive { triple: (i, j, k) });
                            }
                        }
                    }
                }
                None
            }
            ClassKind::Forb(forbidden) => forbidden.iter().enumerate().find_map(|(index, f)| {
                unordered_embedding(&f.dense(), a).map(|map| ClassViolation::Forbidden { index, map })
            }),
        }
    }

    fn sym_name(&self, sym: usize) -> String {
        sorted_names(&self.signature)[sym].clone()
    }

    /// All members of the class on `size` points, in a fixed enumeration
    /// order (pairs `(i, j)` with `i < j` in lexicographic order, one digit per
    /// pair and symbol, last digit fastest).
    pub fn members(&self, size: usize) -> Vec<RelStruct> {
        let k = self.flags.len();
        let pairs: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (i + 1..size).map(move |j| (i, j)))
            .collect();
        let radix = radices(&self.flags);
        let names = sorted_names(&self.signature);
        let mut digits = vec![0u8; pairs.len() * k];
        let mut out = Vec::new();
        loop {
            let mut a = Adjacency::new(size, k);
            for (p, &(i, j)) in pairs.iter().enumerate() {
                for sym in 0..k {
                    let d = digits[p * k + sym];
                    if self.flags[sym].0 {
                        a.set(sym, i, j, d == 1);
                        a.set(sym, j, i, d == 1);
                    } else {
                        a.set(sym, i, j, d & 1 == 1);
                        a.set(sym, j, i, d & 2 == 2);
                    }
                }
            }
            if self.violation_dense(&a).is_none() {
                out.push(a.to_struct(&names));
            }
            if !next_config(&mut digits, |pos| radix[pos % k]) {
                break;
            }
        }
        out
    }

    /// Class JSON, as accepted by [`ClassSpec::from_json`].
    pub fn to_json(&self) -> Value {
        match &self.kind {
            ClassKind::Og => json!({"kind": "og"}),
            ClassKind::OgK(k) => json!({"kind": "og_k", "k": k}),
            ClassKind::Oog => json!({"kind": "oog"}),
            ClassKind::Ot => json!({"kind": "ot"}),
            ClassKind::Opo => json!({"kind": "opo"}),
            ClassKind::Forb(forbidden) => json!({
                "kind": "forb",
                "forbidden": forbidden.iter().map(structure_to_json).collect::<Vec<_>>(),
                "signature": self.signature.symbols(),
            }),
        }
    }

    /// Parses class JSON. A `forb` class may carry a `"signature"` list of
    /// `{"name", "symmetric", "irreflexive"}` objects; without one it is over
    /// the graph signature.
    pub fn from_json(value: &Value) -> Result<Self> {
        let kind = value
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid("class JSON needs a string \"kind\""))?;
        match kind {
            "og" => Ok(ClassSpec::og()),
            "og_k" => {
                let k = value
                    .get("k")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::invalid("og_k needs an integer \"k\""))?;
                ClassSpec::og_k(k as usize)
            }
            "oog" => Ok(ClassSpec::oog()),
            "ot" => Ok(ClassSpec::ot()),
            "opo" => Ok(ClassSpec::opo()),
            "forb" => {
                let signature = match value.get("signature") {
                    Some(v) => Signature::new(serde_json::from_value::<Vec<Symbol>>(v.clone())?)?,
                    None => Signature::graph(),
                };
                let list = value
                    .get("forbidden")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::invalid("forb needs a \"forbidden\" list"))?;
                let forbidden = list
                    .iter()
                    .map(|v| parse_structure(v, &signature).map(|p| p.structure))
                    .collect::<Result<Vec<_>>>()?;
                ClassSpec::forb(forbidden, signature)
            }
            other => Err(Error::invalid(format!("unknown class kind {other}"))),
        }
    }

    /// All one-point extensions of `s` that stay in the class, ordered by rank
    /// and then by configuration.
    pub fn one_point_extensions(&self, s: &RelStruct) -> Result<Vec<ExtensionDescriptor>> {
        self.require(s)?;
        Ok(self.extensions_dense(&s.dense()))
    }

    pub(crate) fn extensions_dense(&self, a: &Adjacency) -> Vec<ExtensionDescriptor> {
        let k = self.flags.len();
        let radix = radices(&self.flags);
        let mut out = Vec::new();
        for rank in 0..=a.size {
            let mut links = vec![0u8; a.size * k];
            loop {
                let ext = apply_dense(a, rank, &links, &self.flags);
                if self.violation_dense(&ext).is_none() {
                    out.push(ExtensionDescriptor {
                        rank,
                        links: links.clone(),
                    });
                }
                if !next_config(&mut links, |pos| radix[pos % k]) {
                    break;
                }
            }
        }
        out
    }
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn find_clique(a: &Adjacency, k: usize) -> Option<Vec<usize>> {
    fn grow(a: &Adjacency, k: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == k {
            return true;
        }
        let start = chosen.last().map_or(0, |&x| x + 1);
        for v in start..a.size {
            if chosen.iter().all(|&u| a.get(0, u, v)) {
                chosen.push(v);
                if grow(a, k, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let mut chosen = Vec::with_capacity(k);
    grow(a, k, &mut chosen).then_some(chosen)
}

/// An injection of `f` into `a` preserving every relation in both directions,
/// ignoring the linear order.
fn unordered_embedding(f: &Adjacency, a: &Adjacency) -> Option<Vec<usize>> {
    fn place(f: &Adjacency, a: &Adjacency, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let next = map.len();
        if next == f.size {
            return true;
        }
        for cand in 0..a.size {
            if used[cand] || !f.pair_matches(next, next, a, cand, cand) {
                continue;
            }
            if map
                .iter()
                .enumerate()
                .all(|(i, &img)| f.pair_matches(i, next, a, img, cand))
            {
                used[cand] = true;
                map.push(cand);
                if place(f, a, map, used) {
                    return true;
                }
                map.pop();
                used[cand] = false;
            }
        }
        false
    }
    if f.size > a.size {
        return None;
    }
    let mut map = Vec::with_capacity(f.size);
    let mut used = vec![false; a.size];
    place(f, a, &mut map, &mut used).then_some(map)
}
