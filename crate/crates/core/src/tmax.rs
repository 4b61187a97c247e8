//! The coding tree `T_max` and the relations it induces on its branches.
//!
//! A node of length `n` has the `n + 1` successors `t⌢⟨0⟩, ..., t⌢⟨n⟩`,
//! ordered lexicographically and carrying a copy of the chain's level
//! structure `levels[n]` via the unique order isomorphism. Two branches are
//! related exactly as their successors just past the meet are related there.
//! Branches are represented by equal-length finite truncations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flim::LimitChain;
use crate::structures::{Adjacency, RelStruct};

/// A node of `T_max`: a sequence with `entries[i] <= i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Node(Vec<usize>);

impl Node {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.iter().enumerate().any(|(i, &e)| e > i) {
            return Err(Error::InvalidNode(format!("{:?}", entries)));
        }
        Ok(Node(entries))
    }

    pub fn root() -> Self {
        Node(Vec::new())
    }

    /// The all-zero node of length `len`.
    pub fn zeros(len: usize) -> Self {
        Node(vec![0; len])
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The initial segment of length `len`.
    pub fn restrict(&self, len: usize) -> Node {
        Node(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Node) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Appends `entry`, which must be at most the current length.
    pub fn child(&self, entry: usize) -> Result<Node> {
        if entry > self.len() {
            return Err(Error::InvalidNode(format!("{self} + {entry}")));
        }
        let mut v = self.0.clone();
        v.push(entry);
        Ok(Node(v))
    }
}

impl TryFrom<Vec<usize>> for Node {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Node::new(v)
    }
}

impl From<Node> for Vec<usize> {
    fn from(n: Node) -> Self {
        n.0
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ">")
    }
}

impl FromStr for Node {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| Error::invalid(format!("node must look like <0,1,2>: {s}")))?;
        if inner.trim().is_empty() {
            return Ok(Node::root());
        }
        let entries = inner
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad node entry {x:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Node::new(entries)
    }
}

/// The `|t| + 1` successors of `t`, in lexicographic order.
pub fn successors(t: &Node) -> Vec<Node> {
    (0..=t.len())
        .map(|e| {
            let mut v = t.0.clone();
            v.push(e);
            Node(v)
        })
        .collect()
}

/// `|T_max(n)| = n!`; `None` when it overflows.
pub fn level_count(n: usize) -> Option<u128> {
    (1..=n as u128).try_fold(1u128, |acc, i| acc.checked_mul(i))
}

/// Every node of length `n`, in lexicographic order.
pub fn level_nodes(n: usize) -> Vec<Node> {
    let mut level = vec![Node::root()];
    for _ in 0..n {
        level = level.iter().flat_map(successors).collect();
    }
    level
}

/// Length of the longest common initial segment of two distinct nodes.
pub(crate) fn meet_len(x: &[usize], y: &[usize]) -> usize {
    x.iter().zip(y).take_while(|(a, b)| a == b).count()
}

/// `x ∩ y`, the longest common initial segment.
pub fn meet(x: &Node, y: &Node) -> Result<Node> {
    if x == y {
        return Err(Error::invalid("meet of a node with itself"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("meet of nodes of different lengths"));
    }
    Ok(x.restrict(meet_len(&x.0, &y.0)))
}

/// A finite set of equal-length nodes, strictly increasing in lexicographic
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Copy {
    nodes: Vec<Node>,
}

impl Copy {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("a copy needs at least one node"));
        }
        let len = nodes[0].len();
        if nodes.iter().any(|n| n.len() != len) {
            return Err(Error::invalid("all nodes of a copy must have the same length"));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("nodes of a copy must be strictly increasing"));
        }
        Ok(Copy { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Common length of the nodes.
    pub fn height(&self) -> usize {
        self.nodes[0].len()
    }

    /// Drops the nodes at the given positions.
    pub fn without(&self, drop: &[usize]) -> Result<Copy> {
        Copy::new(
            self.nodes
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, n)| n.clone())
                .collect(),
        )
    }

    /// Every node extended by zeros to length `len`.
    pub fn extended(&self, len: usize) -> Result<Copy> {
        if len < self.height() {
            return Err(Error::invalid("cannot extend a copy to a shorter length"));
        }
        Copy::new(
            self.nodes
                .iter()
                .map(|n| {
                    let mut v = n.0.clone();
                    v.resize(len, 0);
                    Node(v)
                })
                .collect(),
        )
    }
}

/// `∆(F)`, the longest pairwise meet, and the crown `F^∨`: every node cut to
/// length `∆ + 1`.
pub fn delta_and_crown(c: &Copy) -> Result<(usize, Vec<Node>)> {
    if c.len() < 2 {
        return Err(Error::invalid("delta needs at least two nodes"));
    }
    // lexicographic order puts the deepest meets between neighbours
    let delta = c
        .nodes
        .windows(2)
        .map(|w| meet_len(&w[0].0, &w[1].0))
        .max()
        .expect("two nodes");
    if c.height() <= delta {
        return Err(Error::invalid("nodes are too short for a crown"));
    }
    Ok((delta, c.nodes.iter().map(|n| n.restrict(delta + 1)).collect()))
}

/// Whether `R(x, y)` holds in `F_max` for the symbol `symbol`.
pub fn eval_relation(chain: &LimitChain, symbol: &str, x: &Node, y: &Node) -> Result<bool> {
    if x == y || x.len() != y.len() {
        return Err(Error::invalid("relations are evaluated on distinct nodes of equal length"));
    }
    let n = meet_len(&x.0, &y.0);
    chain.require_depth(n)?;
    Ok(chain.level_structure(n)?.holds(symbol, x.0[n], y.0[n]))
}

/// Dense relation lookup between two distinct equal-length branches.
#[inline]
pub(crate) fn eval_dense(chain: &LimitChain, sym: usize, x: &[usize], y: &[usize]) -> bool {
    let n = meet_len(x, y);
    chain.dense_level(n).get(sym, x[n], y[n])
}

/// The substructure of `F_max` induced on the nodes of `c`.
pub fn induced_structure(chain: &LimitChain, c: &Copy) -> Result<RelStruct> {
    let m = c.len();
    for w in c.nodes.windows(2) {
        chain.require_depth(meet_len(&w[0].0, &w[1].0))?;
    }
    let names: Vec<String> = chain.levels()[0].symbols().map(String::from).collect();
    let mut adj = Adjacency::new(m, names.len());
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for s in 0..names.len() {
                if eval_dense(chain, s, &c.nodes[i].0, &c.nodes[j].0) {
                    adj.set(s, i, j, true);
                }
            }
        }
    }
    Ok(adj.to_struct(&names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassSpec;
    use crate::flim::build_chain;
    use crate::structures::induced_substructure;
    use proptest::prelude::*;

    fn node(v: &[usize]) -> Node {
        Node::new(v.to_vec()).unwrap()
    }

    #[test]
    fn successor_examples() {
        assert_eq!(successors(&Node::root()), vec![node(&[0])]);
        assert_eq!(successors(&node(&[0, 1])), vec![node(&[0, 1, 0]), node(&[0, 1, 1]), node(&[0, 1, 2])]);
        assert!(Node::new(vec![1]).is_err());
        assert!(node(&[0]).child(2).is_err());
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_count(0), Some(1));
        assert_eq!(level_count(4), Some(24));
        for n in 0..=7 {
            assert_eq!(level_nodes(n).len() as u128, level_count(n).unwrap());
        }
        assert_eq!(level_nodes(7).len(), 5040);
        assert_eq!(level_count(40), None);
    }

    #[test]
    fn meet_examples() {
        assert_eq!(meet(&node(&[0, 1, 2]), &node(&[0, 1, 0])).unwrap(), node(&[0, 1]));
        assert_eq!(meet(&node(&[0, 0]), &node(&[0, 1])).unwrap(), node(&[0]));
        assert_eq!(meet(&node(&[0, 0, 0, 0]), &node(&[0, 1, 0, 0])).unwrap().len(), 1);
        assert!(meet(&node(&[0, 1]), &node(&[0, 1])).is_err());
    }

    #[test]
    fn crown_examples() {
        let c = Copy::new(vec![node(&[0, 0, 0, 0]), node(&[0, 1, 0, 0]), node(&[0, 1, 1, 1])]).unwrap();
        let (delta, crown) = delta_and_crown(&c).unwrap();
        assert_eq!(delta, 2);
        assert_eq!(crown, vec![node(&[0, 0, 0]), node(&[0, 1, 0]), node(&[0, 1, 1])]);

        let two = Copy::new(vec![node(&[0, 0, 0]), node(&[0, 1, 2])]).unwrap();
        assert_eq!(delta_and_crown(&two).unwrap(), (1, vec![node(&[0, 0]), node(&[0, 1])]));
        let one = Copy::new(vec![node(&[0])]).unwrap();
        assert!(delta_and_crown(&one).is_err());
    }

    #[test]
    fn node_text_form() {
        let n: Node = "<0,1,2>".parse().unwrap();
        assert_eq!(n, node(&[0, 1, 2]));
        assert_eq!(n.to_string(), "<0,1,2>");
        assert_eq!("<>".parse::<Node>().unwrap(), Node::root());
        assert!("<0,2>".parse::<Node>().is_err());
        assert!("0,1".parse::<Node>().is_err());
    }

    #[test]
    fn copy_validation() {
        assert!(Copy::new(vec![node(&[0, 1]), node(&[0, 0])]).is_err());
        assert!(Copy::new(vec![node(&[0, 1]), node(&[0])]).is_err());
        assert!(Copy::new(vec![node(&[0, 1]), node(&[0, 1])]).is_err());
        let c: Copy = serde_json::from_str(r#"{"nodes":[[0,0],[0,1]]}"#).unwrap();
        assert_eq!(c.len(), 2);
        assert!(serde_json::from_str::<Copy>(r#"{"nodes":[[1]]}"#).is_err());
    }

    #[test]
    fn relations_follow_the_level_structure() {
        let chain = build_chain(&ClassSpec::og(), 6);
        let l1 = chain.level_structure(1).unwrap();
        let x = node(&[0, 0, 0]);
        let y = node(&[0, 1, 0]);
        assert_eq!(eval_relation(&chain, "R0", &x, &y).unwrap(), l1.holds("R0", 0, 1));
        let c = Copy::new(vec![x, y]).unwrap();
        let s = induced_structure(&chain, &c).unwrap();
        assert_eq!(s.holds("R0", 0, 1), l1.holds("R0", 0, 1));
        let single = Copy::new(vec![node(&[0, 1])]).unwrap();
        assert_eq!(induced_structure(&chain, &single).unwrap().size(), 1);
    }

    #[test]
    fn shallow_chain_is_reported() {
        let chain = build_chain(&ClassSpec::og(), 1);
        let x = node(&[0, 1, 2, 0]);
        let y = node(&[0, 1, 2, 1]);
        assert!(matches!(
            eval_relation(&chain, "R0", &x, &y),
            Err(Error::ChainTooShallow { needed: 3, depth: 1 })
        ));
    }

    #[test]
    fn tournaments_are_total_on_branches() {
        let chain = build_chain(&ClassSpec::ot(), 5);
        let nodes = level_nodes(5);
        for (i, x) in nodes.iter().enumerate().step_by(7) {
            for y in nodes.iter().skip(i + 1).step_by(5) {
                let a = eval_relation(&chain, "R0", x, y).unwrap();
                let b = eval_relation(&chain, "R0", y, x).unwrap();
                assert!(a ^ b);
            }
        }
    }

    #[test]
    fn copies_splitting_at_one_node_read_that_level() {
        for class in [ClassSpec::og_k(3).unwrap(), ClassSpec::ot(), ClassSpec::opo(), ClassSpec::oog()] {
            let chain = build_chain(&class, 7);
            for t in level_nodes(5).iter().step_by(11) {
                let n = t.len();
                for pick in [vec![0, 1, 2], vec![0, 2, 4], vec![1, 3, 4, 5], vec![0, 1, 2, 3, 4, 5]] {
                    let copy = Copy::new(pick.iter().map(|&e| t.child(e).unwrap()).collect()).unwrap().extended(7).unwrap();
                    let s = induced_structure(&chain, &copy).unwrap();
                    let level = chain.level_structure(n).unwrap();
                    assert_eq!(s, induced_substructure(level, &pick).unwrap(), "{class}: {copy:?}");
                    assert!(class.contains(&s).unwrap());
                }
            }
        }
    }

    fn arb_node(len: usize) -> impl Strategy<Value = Node> {
        (0..len).map(|i| 0..=i).collect::<Vec<_>>().prop_map(|v| Node::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn successors_count(t in (0usize..9).prop_flat_map(arb_node)) {
            let succ = successors(&t);
            prop_assert_eq!(succ.len(), t.len() + 1);
            prop_assert!(succ.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(succ.iter().all(|s| t.is_prefix_of(s) && Node::new(s.entries().to_vec()).is_ok()));
        }

        #[test]
        fn relation_depends_only_on_meet_data(
            x in arb_node(6), y in arb_node(6), prefix in arb_node(6), tail in arb_node(6)
        ) {
            prop_assume!(x != y);
            let chain = build_chain(&ClassSpec::ot(), 6);
            let n = meet_len(x.entries(), y.entries());
            // same meet length and split entries, different prefix and tail
            let rebuild = |z: &Node| {
                let mut v: Vec<usize> = prefix.entries()[..n].to_vec();
                v.push(z.entries()[n]);
                v.extend_from_slice(&tail.entries()[n + 1..]);
                Node::new(v).unwrap()
            };
            let (x2, y2) = (rebuild(&x), rebuild(&y));
            prop_assert_eq!(
                eval_relation(&chain, "R0", &x, &y).unwrap(),
                eval_relation(&chain, "R0", &x2, &y2).unwrap()
            );
        }

        #[test]
        fn dropping_a_branch_commutes_with_restriction(
            picks in proptest::collection::btree_set(0usize..120, 2..6), drop in 0usize..6
        ) {
            let chain = build_chain(&ClassSpec::og(), 5);
            let nodes = level_nodes(5);
            let copy = Copy::new(picks.iter().map(|&i| nodes[i].clone()).collect()).unwrap();
            let drop = drop % copy.len();
            let keep: Vec<usize> = (0..copy.len()).filter(|&i| i != drop).collect();
            let full = induced_structure(&chain, &copy).unwrap();
            let smaller = induced_structure(&chain, &copy.without(&[drop]).unwrap()).unwrap();
            prop_assert_eq!(induced_substructure(&full, &keep).unwrap(), smaller);
        }
    }
}
