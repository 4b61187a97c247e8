//! Deterministic initial segments of the Fraïssé limit of a class.
//!
//! Points are added one at a time. Each new point realizes the oldest
//! unsatisfied *demand*: a set of existing points (the base) together with a
//! one-point extension of the structure they induce. Demands are queued stage
//! by stage; stage `j` contributes every base set containing point `j`, by
//! size and then in colexicographic order, each with its extensions in
//! canonical order. Queue order, and the tie-breaking below, are the whole
//! source of canonicity: changing either changes [`GENERATOR_VERSION`].
//!
//! A demand fixes the new point's rank among the base and its relations to
//! the base. The remaining freedom (exact position among the other points and
//! relations to them) is spent greedily: among all choices that keep the
//! structure in the class, pick the one that adds the most ordered 2- and
//! 3-point substructures not yet present. Ties go to the class's default
//! realization (no extra relations for free classes, orientation along the
//! order for tournaments, transitive closure for partial orders), then to
//! the leftmost position.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classes::{radices, sorted_names, ClassSpec, ExtensionDescriptor};
use crate::error::{Error, Result};
use crate::structures::{parse_structure, structure_to_json, Adjacency, RelStruct};

/// Version tag of the demand schedule; part of the chain cache key.
pub const GENERATOR_VERSION: &str = "flim-greedy-v1";

/// Above this many candidate realizations only the default relations to
/// non-base points are tried.
const CANDIDATE_CAP: usize = 1 << 14;

/// A base set (enumeration indices, listed in the linear order) and an
/// extension of the substructure it induces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub stage: usize,
    pub base: Vec<usize>,
    pub rank: usize,
    pub links: Vec<u8>,
}

impl Demand {
    pub fn descriptor(&self) -> ExtensionDescriptor {
        ExtensionDescriptor {
            rank: self.rank,
            links: self.links.clone(),
        }
    }
}

/// One realization step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub point: usize,
    pub demand: Demand,
    /// Position of the new point in the linear order at the time it was added.
    pub position: usize,
    /// Demands popped as already satisfied before this one.
    pub skipped: usize,
    /// New small substructures contributed by this point.
    pub score: usize,
}

/// `structure` has universe `{0..n}` in enumeration order; `order[p]` is the
/// position of point `p` in the linear order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawLevel {
    pub structure: RelStruct,
    pub order: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LimitChain {
    class: ClassSpec,
    raw: Vec<RawLevel>,
    levels: Vec<RelStruct>,
    log: Vec<LogEntry>,
    dense: Vec<Adjacency>,
}

impl PartialEq for LimitChain {
    fn eq(&self, other: &Self) -> bool {
        self.class == other.class && self.raw == other.raw && self.levels == other.levels && self.log == other.log
    }
}

impl LimitChain {
    pub fn class(&self) -> &ClassSpec {
        &self.class
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn raw(&self) -> &[RawLevel] {
        &self.raw
    }

    pub fn levels(&self) -> &[RelStruct] {
        &self.levels
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub(crate) fn dense_level(&self, n: usize) -> &Adjacency {
        &self.dense[n]
    }

    /// The order-canonical level structure `levels[n]`, carried by the
    /// successors of every node of length `n`.
    pub fn level_structure(&self, n: usize) -> Result<&RelStruct> {
        self.levels.get(n).ok_or(Error::ChainTooShallow {
            needed: n,
            depth: self.depth(),
        })
    }

    pub(crate) fn require_depth(&self, n: usize) -> Result<()> {
        if n > self.depth() {
            Err(Error::ChainTooShallow {
                needed: n,
                depth: self.depth(),
            })
        } else {
            Ok(())
        }
    }

    /// The chain cut down to `depth`; identical to building with `depth`.
    pub fn truncated(&self, depth: usize) -> Result<LimitChain> {
        self.require_depth(depth)?;
        Ok(LimitChain {
            class: self.class.clone(),
            raw: self.raw[..=depth].to_vec(),
            levels: self.levels[..=depth].to_vec(),
            log: self.log.iter().filter(|e| e.point <= depth).cloned().collect(),
            dense: self.dense[..=depth].to_vec(),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "generator": GENERATOR_VERSION,
            "class": self.class.to_json(),
            "depth": self.depth(),
            "raw": self.raw.iter().map(|r| json!({
                "structure": structure_to_json(&r.structure),
                "order": r.order,
            })).collect::<Vec<_>>(),
            "levels": self.levels.iter().map(structure_to_json).collect::<Vec<_>>(),
            "log": self.log,
        })
    }

    pub fn from_json(value: &Value) -> Result<LimitChain> {
        let generator = value.get("generator").and_then(Value::as_str);
        if generator != Some(GENERATOR_VERSION) {
            return Err(Error::invalid(format!(
                "chain was written by generator {generator:?}, expected {GENERATOR_VERSION}"
            )));
        }
        let class = ClassSpec::from_json(value.get("class").unwrap_or(&Value::Null))?;
        let sig = class.signature().clone();
        let list = |key: &str| -> Result<Vec<Value>> {
            value
                .get(key)
                .and_then(Value::as_array)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("chain JSON lacks \"{key}\"")))
        };
        let raw = list("raw")?
            .iter()
            .map(|r| -> Result<RawLevel> {
                let structure = parse_structure(r.get("structure").unwrap_or(&Value::Null), &sig)?.structure;
                let order = serde_json::from_value(r.get("order").cloned().unwrap_or(Value::Null))?;
                Ok(RawLevel { structure, order })
            })
            .collect::<Result<Vec<_>>>()?;
        let levels = list("levels")?
            .iter()
            .map(|v| parse_structure(v, &sig).map(|p| p.structure))
            .collect::<Result<Vec<_>>>()?;
        let log = serde_json::from_value(Value::Array(list("log")?))?;
        if levels.is_empty() || levels.len() != raw.len() {
            return Err(Error::invalid("chain JSON has inconsistent level lists"));
        }
        let dense = levels.iter().map(RelStruct::dense).collect();
        Ok(LimitChain {
            class,
            raw,
            levels,
            log,
            dense,
        })
    }

    /// Demands created at stages `<= stage` that the chain never realized.
    pub fn unsatisfied_demands(&self, stage: usize) -> Vec<Demand> {
        let last = &self.raw[self.depth()];
        let state = State::from_raw(&self.class, last);
        let mut out = Vec::new();
        for j in 0..=stage.min(self.depth()) {
            let mut stream = Stream::new(j);
            while let Some(d) = stream.next(&state, &self.class) {
                if !state.satisfies(&d, &self.class) {
                    out.push(d);
                }
            }
        }
        out
    }
}

/// Builds the chain `Flim(K)_0, ..., Flim(K)_depth`.
pub fn build_chain(class: &ClassSpec, depth: usize) -> LimitChain {
    let mut state = State::new(class);
    let mut queue: VecDeque<Stream> = VecDeque::from([Stream::new(0)]);
    let mut log = Vec::with_capacity(depth);

    while state.size() <= depth {
        let mut skipped = 0;
        let demand = loop {
            let front = queue.front_mut().expect("the newest stage always has an unsatisfiable full-base demand");
            match front.next(&state, class) {
                Some(d) if state.satisfies(&d, class) => skipped += 1,
                Some(d) => break d,
                None => {
                    queue.pop_front();
                }
            }
        };
        let (position, score) = state.realize(&demand, class);
        log.push(LogEntry {
            point: state.size() - 1,
            demand,
            position,
            skipped,
            score,
        });
        queue.push_back(Stream::new(state.size() - 1));
    }

    let names = sorted_names(class.signature());
    let mut raw = Vec::with_capacity(depth + 1);
    let mut levels = Vec::with_capacity(depth + 1);
    let mut dense = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let points: Vec<usize> = (0..=n).collect();
        let sub = state.adj.restrict(&points);
        let order = relative_order(&state.pos[..=n]);
        let mut by_order = points.clone();
        by_order.sort_by_key(|&p| order[p]);
        let canonical = state.adj.restrict(&by_order);
        raw.push(RawLevel {
            structure: sub.to_struct(&names),
            order,
        });
        levels.push(canonical.to_struct(&names));
        dense.push(canonical);
    }
    LimitChain {
        class: class.clone(),
        raw,
        levels,
        log,
        dense,
    }
}

/// Loads the chain from `path` if it was built for the same class and
/// generator and is deep enough; otherwise builds it and writes the cache.
pub fn cached_chain(class: &ClassSpec, depth: usize, path: &Path) -> Result<LimitChain> {
    if let Ok(text) = fs::read_to_string(path) {
        if let Ok(value) = serde_json::from_str::<Value>(&text) {
            if let Ok(chain) = LimitChain::from_json(&value) {
                if chain.class() == class && chain.depth() >= depth {
                    return chain.truncated(depth);
                }
            }
        }
    }
    let chain = build_chain(class, depth);
    fs::write(path, serde_json::to_string(&chain.to_json())?)?;
    Ok(chain)
}

fn relative_order(pos: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pos.len()).collect();
    idx.sort_by_key(|&p| pos[p]);
    let mut order = vec![0; pos.len()];
    for (rank, p) in idx.into_iter().enumerate() {
        order[p] = rank;
    }
    order
}

/// Why [`universality_budget`] failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TooShort {
    pub witness: RelStruct,
    pub depth: usize,
}

/// Least `N` such that every member of the class with at most `s` points
/// order-embeds into `levels[N]`.
pub fn universality_budget(chain: &LimitChain, s: usize) -> Result<usize, TooShort> {
    let mut need = 0;
    for size in 1..=s {
        for member in chain.class().members(size) {
            let dm = member.dense();
            let first = (0..=chain.depth()).find(|&n| crate::structures::embeds(&dm, chain.dense_level(n)).is_some());
            match first {
                Some(n) => need = need.max(n),
                None => {
                    return Err(TooShort {
                        witness: member,
                        depth: chain.depth(),
                    })
                }
            }
        }
    }
    Ok(need)
}

/// Lazy stream of the demands created at one stage.
struct Stream {
    stage: usize,
    size: usize,
    combo: Option<Vec<usize>>,
    pending: VecDeque<Demand>,
}

impl Stream {
    fn new(stage: usize) -> Self {
        // stage 0 also owns the empty base
        let size = if stage == 0 { 0 } else { 1 };
        let mut s = Stream {
            stage,
            size,
            combo: None,
            pending: VecDeque::new(),
        };
        s.combo = s.first_combo();
        s
    }

    /// Base sets are `{stage} ∪ c` with `c` a `(size - 1)`-subset of
    /// `0..stage`; the empty base only at stage 0.
    fn first_combo(&self) -> Option<Vec<usize>> {
        if self.size == 0 {
            Some(vec![])
        } else if self.size - 1 <= self.stage {
            Some((0..self.size - 1).collect())
        } else {
            None
        }
    }

    fn next(&mut self, state: &State, class: &ClassSpec) -> Option<Demand> {
        loop {
            if let Some(d) = self.pending.pop_front() {
                return Some(d);
            }
            let combo = self.combo.take()?;
            let mut base: Vec<usize> = combo.clone();
            if self.size > 0 {
                base.push(self.stage);
            }
            self.advance(combo);
            base.sort_by_key(|&p| state.pos[p]);
            let sub = state.adj.restrict(&base);
            for d in class.extensions_dense(&sub) {
                self.pending.push_back(Demand {
                    stage: self.stage,
                    base: base.clone(),
                    rank: d.rank,
                    links: d.links,
                });
            }
        }
    }

    fn advance(&mut self, mut combo: Vec<usize>) {
        let universe = self.stage;
        if self.size == 0 {
            self.size = 1;
            self.combo = self.first_combo();
            return;
        }
        if colex_next(&mut combo, universe) {
            self.combo = Some(combo);
        } else {
            self.size += 1;
            self.combo = self.first_combo();
        }
    }
}

/// Colexicographic successor of a sorted combination drawn from `0..n`.
fn colex_next(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    for i in 0..r {
        let limit = if i + 1 < r { c[i + 1] } else { n };
        if c[i] + 1 < limit {
            c[i] += 1;
            for (j, slot) in c.iter_mut().enumerate().take(i) {
                *slot = j;
            }
            return true;
        }
    }
    false
}

/// The growing structure in enumeration order plus linear positions.
struct State {
    adj: Adjacency,
    pos: Vec<usize>,
    flags: Vec<(bool, bool)>,
    seen: HashSet<u64>,
}

impl State {
    fn new(class: &ClassSpec) -> Self {
        let flags = class.flags().to_vec();
        let mut s = State {
            adj: Adjacency::new(1, flags.len()),
            pos: vec![0],
            flags,
            seen: HashSet::new(),
        };
        s.seen.insert(small_code(&s.adj, &[0]).expect("one point"));
        s
    }

    fn from_raw(class: &ClassSpec, raw: &RawLevel) -> Self {
        State {
            adj: raw.structure.dense(),
            pos: raw.order.clone(),
            flags: class.flags().to_vec(),
            seen: HashSet::new(),
        }
    }

    fn size(&self) -> usize {
        self.pos.len()
    }

    fn link_digit(&self, a: usize, b: usize, sym: usize) -> u8 {
        // digit for new point `a` against old point `b`
        if self.flags[sym].0 {
            self.adj.get(sym, a, b) as u8
        } else {
            self.adj.get(sym, a, b) as u8 | (self.adj.get(sym, b, a) as u8) << 1
        }
    }

    fn satisfies(&self, d: &Demand, class: &ClassSpec) -> bool {
        let k = class.flags().len();
        (0..self.size()).any(|p| {
            if d.base.contains(&p) {
                return false;
            }
            let below = d.base.iter().filter(|&&b| self.pos[b] < self.pos[p]).count();
            below == d.rank
                && d.base
                    .iter()
                    .enumerate()
                    .all(|(i, &b)| (0..k).all(|s| self.link_digit(p, b, s) == d.links[i * k + s]))
        })
    }

    /// Default digit of the new point against a non-base point.
    fn default_digit(&self, class: &ClassSpec, d: &Demand, p: usize, new_pos: usize) -> u8 {
        use crate::classes::ClassKind;
        match class.kind() {
            ClassKind::Ot => {
                if self.pos[p] < new_pos {
                    2
                } else {
                    1
                }
            }
            ClassKind::Opo => {
                let k = self.flags.len();
                let mut digit = 0;
                for (i, &b) in d.base.iter().enumerate() {
                    let link = d.links[i * k];
                    // b below new, p at or below b
                    if link & 2 == 2 && self.adj.get(0, p, b) {
                        digit |= 2;
                    }
                    if link & 1 == 1 && self.adj.get(0, b, p) {
                        digit |= 1;
                    }
                }
                digit
            }
            _ => 0,
        }
    }

    /// Adds a point realizing `d`; returns its position and score.
    fn realize(&mut self, d: &Demand, class: &ClassSpec) -> (usize, usize) {
        let n = self.size();
        let k = self.flags.len();
        let base_pos: Vec<usize> = d.base.iter().map(|&b| self.pos[b]).collect();
        let lo = if d.rank == 0 { 0 } else { base_pos[d.rank - 1] + 1 };
        let hi = if d.rank == base_pos.len() { n } else { base_pos[d.rank] };
        let others: Vec<usize> = (0..n).filter(|p| !d.base.contains(p)).collect();
        let radix = radices(&self.flags);
        let per_position: usize = (0..others.len() * k)
            .try_fold(1usize, |acc, i| acc.checked_mul(radix[i % k] as usize))
            .unwrap_or(usize::MAX);
        let exhaustive = per_position.saturating_mul(hi - lo + 1) <= CANDIDATE_CAP;

        let mut best: Option<(Key, Adjacency, usize)> = None;
        for new_pos in lo..=hi {
            let default: Vec<u8> = others
                .iter()
                .flat_map(|&p| {
                    let dd = self.default_digit(class, d, p, new_pos);
                    // only R0-like single-symbol classes have non-zero defaults
                    (0..k).map(move |s| if s == 0 { dd } else { 0 })
                })
                .collect();
            let mut digits = if exhaustive { vec![0u8; others.len() * k] } else { default.clone() };
            loop {
                let adj = self.extended(d, &others, &digits, k);
                let mut pos = self.pos.clone();
                for q in pos.iter_mut() {
                    if *q >= new_pos {
                        *q += 1;
                    }
                }
                pos.push(new_pos);
                let canonical = canonical(&adj, &pos);
                if class.violation_dense(&canonical).is_none() {
                    let score = self.score(&adj, &pos, n);
                    let key = Key {
                        neg_score: usize::MAX - score,
                        non_default: digits != default,
                        new_pos,
                        digits: digits.clone(),
                    };
                    if best.as_ref().is_none_or(|(b, _, _)| key < *b) {
                        best = Some((key, adj, score));
                    }
                }
                if !exhaustive || !crate::classes::next_config(&mut digits, |i| radix[i % k]) {
                    break;
                }
            }
        }
        let (key, adj, score) = best.expect("the default realization always stays in the class");
        for q in self.pos.iter_mut() {
            if *q >= key.new_pos {
                *q += 1;
            }
        }
        self.pos.push(key.new_pos);
        self.adj = adj;
        self.record_codes(n);
        (key.new_pos, score)
    }

    fn extended(&self, d: &Demand, others: &[usize], digits: &[u8], k: usize) -> Adjacency {
        let n = self.size();
        let mut adj = Adjacency::new(n + 1, k);
        for s in 0..k {
            for i in 0..n {
                for j in 0..n {
                    if self.adj.get(s, i, j) {
                        adj.set(s, i, j, true);
                    }
                }
            }
        }
        let mut put = |p: usize, digit: u8, s: usize| {
            let (out, inn) = if self.flags[s].0 {
                (digit == 1, digit == 1)
            } else {
                (digit & 1 == 1, digit & 2 == 2)
            };
            adj.set(s, n, p, out);
            adj.set(s, p, n, inn);
        };
        for (i, &b) in d.base.iter().enumerate() {
            for s in 0..k {
                put(b, d.links[i * k + s], s);
            }
        }
        for (i, &p) in others.iter().enumerate() {
            for s in 0..k {
                put(p, digits[i * k + s], s);
            }
        }
        adj
    }

    fn score(&self, adj: &Adjacency, pos: &[usize], new: usize) -> usize {
        let mut fresh = HashSet::new();
        for a in 0..new {
            if let Some(c) = small_code_ordered(adj, pos, &[a, new]) {
                if !self.seen.contains(&c) {
                    fresh.insert(c);
                }
            }
            for b in a + 1..new {
                if let Some(c) = small_code_ordered(adj, pos, &[a, b, new]) {
                    if !self.seen.contains(&c) {
                        fresh.insert(c);
                    }
                }
            }
        }
        fresh.len()
    }

    fn record_codes(&mut self, new: usize) {
        for a in 0..new {
            if let Some(c) = small_code_ordered(&self.adj, &self.pos, &[a, new]) {
                self.seen.insert(c);
            }
            for b in a + 1..new {
                if let Some(c) = small_code_ordered(&self.adj, &self.pos, &[a, b, new]) {
                    self.seen.insert(c);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    neg_score: usize,
    non_default: bool,
    new_pos: usize,
    digits: Vec<u8>,
}

fn canonical(adj: &Adjacency, pos: &[usize]) -> Adjacency {
    let mut by_order: Vec<usize> = (0..pos.len()).collect();
    by_order.sort_by_key(|&p| pos[p]);
    adj.restrict(&by_order)
}

fn small_code_ordered(adj: &Adjacency, pos: &[usize], points: &[usize]) -> Option<u64> {
    let mut pts = points.to_vec();
    pts.sort_by_key(|&p| pos[p]);
    small_code(adj, &pts)
}

/// Bit code of the ordered substructure on `points` (already in order), or
/// `None` when it does not fit in 64 bits.
fn small_code(adj: &Adjacency, points: &[usize]) -> Option<u64> {
    let m = points.len();
    let bits = m * m * adj.symbols;
    if bits + 2 > 64 {
        return None;
    }
    let mut code: u64 = m as u64;
    let mut shift = 2;
    for s in 0..adj.symbols {
        for &i in points {
            for &j in points {
                if adj.get(s, i, j) {
                    code |= 1 << shift;
                }
                shift += 1;
            }
        }
    }
    Some(code)
}
