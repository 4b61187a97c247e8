//! Gadgets: extensions `H̄` of a structure `H` every copy of which splits at
//! a single node of the coding tree.
//!
//! Vertex `v_i` of a gadget is point `i` of the extended structure.

use serde::Serialize;

use crate::classes::{ClassKind, ClassSpec};
use crate::error::{Error, Result};
use crate::flim::LimitChain;
use crate::oracle::{sweep_feasible, sweep_types};
use crate::structures::{induced_substructure, RelStruct, StructureJson};
use crate::types::enumerate_types;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Free,
    Ot,
    Opo,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Free => "free",
            Flavor::Ot => "ot",
            Flavor::Opo => "opo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    pub base: RelStruct,
    pub extended: RelStruct,
    /// Where the points of `base` sit inside `extended`.
    pub host: Vec<usize>,
    pub flavor: Flavor,
    /// Set when the construction has nothing to add (ordered partial orders
    /// on one point).
    pub trivial: bool,
}

/// Gadget JSON: the extended structure plus `host` and `flavor`.
#[derive(Serialize)]
pub struct GadgetJson {
    #[serde(flatten)]
    pub extended: StructureJson,
    pub host: Vec<usize>,
    pub flavor: Flavor,
    pub trivial: bool,
}

impl From<&Gadget> for GadgetJson {
    fn from(g: &Gadget) -> Self {
        GadgetJson {
            extended: (&g.extended).into(),
            host: g.host.clone(),
            flavor: g.flavor,
            trivial: g.trivial,
        }
    }
}

/// Copies the relations of `h` onto the points `host` of `out`.
fn place(h: &RelStruct, host: &[usize], out: &mut RelStruct) -> Result<()> {
    for (name, pairs) in h.relations() {
        for &(i, j) in pairs {
            out.insert(name, host[i], host[j])?;
        }
    }
    Ok(())
}

/// The gadget for a free amalgamation class: `H` on the odd vertices, an
/// `R0` chain `v0, v2, ..., v2m` on the even ones, nothing else. A directed
/// `R0` gets only the forward pairs. The result is checked against the class,
/// and a violation is reported rather than assumed away.
pub fn build_gadget_free(h: &RelStruct, class: &ClassSpec) -> Result<Gadget> {
    if !class.is_free() {
        return Err(Error::invalid(format!("class {class} is not a free amalgamation class")));
    }
    class.require(h)?;
    let m = h.size();
    let host: Vec<usize> = (0..m).map(|i| 2 * i + 1).collect();
    let mut extended = RelStruct::empty(2 * m + 1, class.signature());
    place(h, &host, &mut extended)?;
    let r0 = class.signature().first();
    for i in (0..2 * m).step_by(2) {
        extended.insert(&r0.name, i, i + 2)?;
        if r0.symmetric {
            extended.insert(&r0.name, i + 2, i)?;
        }
    }
    if let Some(violation) = class.violation(&extended)? {
        return Err(Error::NotInClass {
            class: class.name(),
            violation,
        });
    }
    Ok(Gadget {
        base: h.clone(),
        extended,
        host,
        flavor: Flavor::Free,
        trivial: false,
    })
}

/// The gadget for ordered tournaments on `2m + 1` vertices with `H` on the
/// odd ones. Even vertices point forward to the next even vertex and back to
/// every other earlier one; an odd vertex points to earlier even vertices
/// and receives arrows from later ones.
pub fn build_gadget_ot(h: &RelStruct) -> Result<Gadget> {
    let class = ClassSpec::ot();
    class.require(h)?;
    let m = h.size();
    let size = 2 * m + 1;
    let host: Vec<usize> = (0..m).map(|i| 2 * i + 1).collect();
    let mut extended = RelStruct::empty(size, class.signature());
    place(h, &host, &mut extended)?;
    for i in 0..size {
        for j in i + 1..size {
            match (i % 2 == 0, j % 2 == 0) {
                (true, true) if j == i + 2 => extended.insert("R0", i, j)?,
                (true, true) => extended.insert("R0", j, i)?,
                (true, false) => extended.insert("R0", j, i)?,
                (false, true) => extended.insert("R0", j, i)?,
                (false, false) => {}
            }
        }
    }
    class.require(&extended)?;
    Ok(Gadget {
        base: h.clone(),
        extended,
        host,
        flavor: Flavor::Ot,
        trivial: false,
    })
}

/// The gadget for ordered partial orders: `2m + 3` vertices with `H` on
/// `v2, v4, ..., v2m`, scaffold relations `v0 < v3`, `v(2m-1) < v(2m+2)` and
/// `vi < v(i+4)` for odd `i <= 2m - 3`, closed under transitivity. A single
/// point is its own gadget.
pub fn build_gadget_opo(h: &RelStruct) -> Result<Gadget> {
    let class = ClassSpec::opo();
    class.require(h)?;
    let m = h.size();
    if m <= 1 {
        return Ok(Gadget {
            base: h.clone(),
            extended: h.clone(),
            host: (0..m).collect(),
            flavor: Flavor::Opo,
            trivial: true,
        });
    }
    let size = 2 * m + 3;
    let host: Vec<usize> = (0..m).map(|i| 2 * i + 2).collect();
    let mut less = vec![vec![false; size]; size];
    for &(i, j) in h.relation("R0").into_iter().flatten() {
        less[host[i]][host[j]] = true;
    }
    less[0][3] = true;
    less[2 * m - 1][2 * m + 2] = true;
    for i in (1..=2 * m - 3).step_by(2) {
        less[i][i + 4] = true;
    }
    for k in 0..size {
        for i in 0..size {
            for j in 0..size {
                if less[i][k] && less[k][j] {
                    less[i][j] = true;
                }
            }
        }
    }
    let mut extended = RelStruct::empty(size, class.signature());
    for (i, row) in less.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r {
                extended.insert("R0", i, j)?;
            }
        }
    }
    class.require(&extended)?;
    Ok(Gadget {
        base: h.clone(),
        extended,
        host,
        flavor: Flavor::Opo,
        trivial: false,
    })
}

/// Picks the construction matching the class.
pub fn build_gadget(h: &RelStruct, class: &ClassSpec) -> Result<Gadget> {
    match class.kind() {
        ClassKind::Ot => build_gadget_ot(h),
        ClassKind::Opo => build_gadget_opo(h),
        _ => build_gadget_free(h, class),
    }
}

/// Raw-sweep confirmation over an actual truncation of the coding tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepCheck {
    pub depth: usize,
    pub types: Vec<String>,
    pub non_diagonal_seen: u64,
    pub single_splitting: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub flavor: Flavor,
    pub size: usize,
    pub in_class: bool,
    pub host_ok: bool,
    pub types: Vec<String>,
    /// Every enumerated type has exactly one internal node.
    pub single_splitting: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepCheck>,
    /// Why the sweep was skipped, when it was requested but not run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_skipped: Option<String>,
    pub passed: bool,
}

/// Checks a gadget: membership, the host copy, and that every type of the
/// extended structure has a single splitting node. With a chain and a
/// positive `depth` small enough for the raw sweep, also confirms the
/// property on every copy at that depth.
pub fn verify_gadget(g: &Gadget, class: &ClassSpec, chain: Option<&LimitChain>, depth: usize) -> Result<VerificationReport> {
    let size = g.extended.size();
    let in_class = class.contains(&g.extended)?;
    let host_ok = induced_substructure(&g.extended, &g.host)? == g.base;
    let types = if in_class { enumerate_types(&g.extended, class)? } else { Vec::new() };
    let single_splitting = in_class && types.iter().all(|s| s.internal_count() == 1.min(size - 1));
    let mut sweep = None;
    let mut sweep_skipped = None;
    if depth > 0 && in_class {
        match chain {
            None => sweep_skipped = Some("no chain supplied".to_string()),
            Some(_) if !sweep_feasible(size, depth) => {
                sweep_skipped = Some(format!("raw sweep infeasible for {size} points at depth {depth}"))
            }
            Some(chain) => {
                let r = sweep_types(&g.extended, chain, depth)?;
                let single = r.non_diagonal_seen == 0 && r.types.iter().all(|s| s.internal_count() == 1.min(size - 1));
                sweep = Some(SweepCheck {
                    depth,
                    types: r.types.iter().map(ToString::to_string).collect(),
                    non_diagonal_seen: r.non_diagonal_seen,
                    single_splitting: single,
                });
            }
        }
    }
    let passed = in_class && host_ok && single_splitting && sweep.as_ref().is_none_or(|s| s.single_splitting);
    Ok(VerificationReport {
        flavor: g.flavor,
        size,
        in_class,
        host_ok,
        types: types.iter().map(ToString::to_string).collect(),
        single_splitting,
        sweep,
        sweep_skipped,
        passed,
    })
}
