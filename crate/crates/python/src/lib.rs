//! Python bindings. Structures, classes and reports cross the boundary as
//! plain dicts and lists in the same JSON shapes the command line uses.

use bigramsey_core as core;
use bigramsey_core::oracle::{sweep_feasible, DEFAULT_BUDGET};
use bigramsey_core::structures::{parse_structure, structure_to_json};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;
use serde_json::Value;

create_exception!(bigramsey, ClassViolationError, PyValueError);
create_exception!(bigramsey, BudgetExceededError, PyRuntimeError);

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::NotInClass { .. } => ClassViolationError::new_err(e.to_string()),
        core::Error::BudgetExceeded(_) => BudgetExceededError::new_err(e.to_string()),
        core::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Accepts a JSON string or any object `json.dumps` understands.
fn value_of(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = if let Ok(s) = obj.cast::<PyString>() {
        s.to_str()?.to_owned()
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn copy_of(nodes: Vec<Vec<usize>>) -> PyResult<core::Copy> {
    let nodes = nodes.into_iter().map(core::Node::new).collect::<core::Result<Vec<_>>>().map_err(err)?;
    core::Copy::new(nodes).map_err(err)
}

fn skeleton_of(text: &str) -> PyResult<core::Skeleton> {
    text.parse().map_err(err)
}

/// A hereditary class of ordered structures: og, og_<k>, oog, ot, opo, or a
/// class description dict.
#[pyclass(name = "Class", module = "bigramsey", frozen)]
struct Class(core::ClassSpec);

#[pymethods]
impl Class {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        if let Ok(s) = spec.cast::<PyString>() {
            let s = s.to_str()?;
            if !s.trim_start().starts_with('{') {
                return core::cli::parse_class(s).map(Class).map_err(err);
            }
        }
        core::ClassSpec::from_json(&value_of(spec)?).map(Class).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }

    /// Parses a structure dict against this class's signature and checks
    /// membership.
    fn structure(&self, obj: &Bound<'_, PyAny>) -> PyResult<Structure> {
        let parsed = parse_structure(&value_of(obj)?, self.0.signature()).map_err(err)?;
        if let Some(violation) = self.0.violation(&parsed.structure).map_err(err)? {
            return Err(ClassViolationError::new_err(format!("not a member of class {}: {violation}", self.0)));
        }
        Ok(Structure(parsed.structure))
    }

    fn contains(&self, h: &Structure) -> PyResult<bool> {
        self.0.contains(&h.0).map_err(err)
    }

    /// All members on `size` points.
    fn members(&self, size: usize) -> Vec<Structure> {
        self.0.members(size).into_iter().map(Structure).collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.to_json())
    }

    fn __repr__(&self) -> String {
        format!("Class({:?})", self.0.name())
    }
}

/// A finite ordered structure.
#[pyclass(name = "Structure", module = "bigramsey", frozen, eq)]
#[derive(PartialEq)]
struct Structure(core::RelStruct);

#[pymethods]
impl Structure {
    #[getter]
    fn size(&self) -> usize {
        self.0.size()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &structure_to_json(&self.0))
    }

    fn is_isomorphic(&self, other: &Structure) -> bool {
        core::is_isomorphic(&self.0, &other.0)
    }

    /// Order-preserving embeddings of `self` into `other`, as index lists.
    fn embeddings(&self, other: &Structure) -> PyResult<Vec<Vec<usize>>> {
        let found = core::find_embeddings(&self.0, &other.0).map_err(err)?;
        Ok(found.into_iter().map(|e| e.0).collect())
    }

    fn __len__(&self) -> usize {
        self.0.size()
    }

    fn __repr__(&self) -> String {
        format!("Structure({})", self.0)
    }
}

/// A limit chain built greedily up to `depth`.
#[pyclass(name = "Chain", module = "bigramsey", frozen)]
struct Chain(core::LimitChain);

#[pymethods]
impl Chain {
    #[new]
    fn new(class: &Class, depth: usize) -> Self {
        Chain(core::build_chain(&class.0, depth))
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    /// The structure at level `n`, on `n + 1` points.
    fn level(&self, n: usize) -> PyResult<Structure> {
        self.0.level_structure(n).cloned().map(Structure).map_err(err)
    }

    /// Smallest level into which every member on `s` points embeds.
    fn universality_budget(&self, s: usize) -> PyResult<usize> {
        core::universality_budget(&self.0, s).map_err(|t| PyValueError::new_err(format!("{t:?}")))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.to_json())
    }

    fn __repr__(&self) -> String {
        format!("Chain({}, depth={})", self.0.class(), self.0.depth())
    }
}

/// A structure extended so that every copy of the host splits at one node.
#[pyclass(name = "Gadget", module = "bigramsey", frozen)]
struct Gadget(core::Gadget);

#[pymethods]
impl Gadget {
    #[getter]
    fn base(&self) -> Structure {
        Structure(self.0.base.clone())
    }

    #[getter]
    fn extended(&self) -> Structure {
        Structure(self.0.extended.clone())
    }

    #[getter]
    fn host(&self) -> Vec<usize> {
        self.0.host.clone()
    }

    #[getter]
    fn flavor(&self) -> &'static str {
        self.0.flavor.name()
    }

    #[getter]
    fn trivial(&self) -> bool {
        self.0.trivial
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &core::gadgets::GadgetJson::from(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("Gadget({}, {} -> {} points)", self.0.flavor.name(), self.0.base.size(), self.0.extended.size())
    }
}

/// Embedding types of `h` in the class, as skeleton strings.
#[pyfunction]
fn enumerate_types(h: &Structure, class: &Class) -> PyResult<Vec<String>> {
    let types = core::enumerate_types(&h.0, &class.0).map_err(err)?;
    Ok(types.iter().map(ToString::to_string).collect())
}

/// Every skeleton on `m` leaves.
#[pyfunction]
fn skeletons(m: usize) -> PyResult<Vec<String>> {
    Ok(core::skeletons(m).map_err(err)?.iter().map(ToString::to_string).collect())
}

/// Skeleton of a diagonal copy given as equal-length node lists.
#[pyfunction]
fn type_of(nodes: Vec<Vec<usize>>) -> PyResult<String> {
    Ok(core::type_of(&copy_of(nodes)?).map_err(err)?.to_string())
}

#[pyfunction]
fn delta_and_crown(nodes: Vec<Vec<usize>>) -> PyResult<(usize, Vec<Vec<usize>>)> {
    let (delta, crown) = core::delta_and_crown(&copy_of(nodes)?).map_err(err)?;
    Ok((delta, crown.into_iter().map(Vec::from).collect()))
}

/// Realizability certificate for one skeleton.
#[pyfunction]
fn check_realizable<'py>(py: Python<'py>, skeleton: &str, h: &Structure, class: &Class) -> PyResult<Bound<'py, PyAny>> {
    let report = core::check_realizable(&skeleton_of(skeleton)?, &h.0, &class.0).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn build_gadget(h: &Structure, class: &Class) -> PyResult<Gadget> {
    core::build_gadget(&h.0, &class.0).map(Gadget).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (gadget, class, chain=None, depth=0))]
fn verify_gadget<'py>(
    py: Python<'py>,
    gadget: &Gadget,
    class: &Class,
    chain: Option<&Chain>,
    depth: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let report = core::verify_gadget(&gadget.0, &class.0, chain.map(|c| &c.0), depth).map_err(err)?;
    to_py(py, &report)
}

/// Compares the enumerated types with those realized in the chain. The raw
/// sweep runs when `sweep` is true, or by default when it is cheap enough.
#[pyfunction]
#[pyo3(signature = (h, chain, depth, budget=DEFAULT_BUDGET, sweep=None))]
fn cross_check<'py>(
    py: Python<'py>,
    h: &Structure,
    chain: &Chain,
    depth: usize,
    budget: u64,
    sweep: Option<bool>,
) -> PyResult<Bound<'py, PyAny>> {
    let sweep = sweep.unwrap_or_else(|| sweep_feasible(h.0.size(), depth));
    let report = py.detach(|| core::cross_check(&h.0, &chain.0, depth, budget, sweep)).map_err(err)?;
    to_py(py, &report)
}

/// Builds a copy of `h` with the given type. Returns `{"copy": [...]}` or
/// the failure as a dict with a `kind` key.
#[pyfunction]
fn realize<'py>(py: Python<'py>, skeleton: &str, h: &Structure, chain: &Chain, max_depth: usize) -> PyResult<Bound<'py, PyAny>> {
    let problem = core::RealizationProblem {
        skeleton: skeleton_of(skeleton)?,
        target: h.0.clone(),
        chain: &chain.0,
        max_depth,
    };
    match core::realize(&problem).map_err(err)? {
        Ok(copy) => to_py(py, &serde_json::json!({ "copy": copy.nodes() })),
        Err(failure) => to_py(py, &failure),
    }
}

#[pymodule]
fn bigramsey(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Class>()?;
    m.add_class::<Structure>()?;
    m.add_class::<Chain>()?;
    m.add_class::<Gadget>()?;
    m.add("ClassViolationError", m.py().get_type::<ClassViolationError>())?;
    m.add("BudgetExceededError", m.py().get_type::<BudgetExceededError>())?;
    m.add("DEFAULT_BUDGET", DEFAULT_BUDGET)?;
    m.add_function(wrap_pyfunction!(enumerate_types, m)?)?;
    m.add_function(wrap_pyfunction!(skeletons, m)?)?;
    m.add_function(wrap_pyfunction!(type_of, m)?)?;
    m.add_function(wrap_pyfunction!(delta_and_crown, m)?)?;
    m.add_function(wrap_pyfunction!(check_realizable, m)?)?;
    m.add_function(wrap_pyfunction!(build_gadget, m)?)?;
    m.add_function(wrap_pyfunction!(verify_gadget, m)?)?;
    m.add_function(wrap_pyfunction!(cross_check, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    Ok(())
}
