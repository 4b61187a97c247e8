//! Big Ramsey degrees of binary free amalgamation classes, ordered
//! tournaments and ordered partial orders, computed as counts of types of
//! copies in the coding tree of a limit chain.

pub mod classes;
pub mod cli;
pub mod dot;
pub mod error;
pub mod flim;
pub mod gadgets;
pub mod oracle;
pub mod structures;
pub mod tmax;
pub mod types;

pub use classes::{ClassKind, ClassSpec, ClassViolation, ExtensionDescriptor};
pub use error::{Error, Result};
pub use flim::{build_chain, cached_chain, universality_budget, LimitChain};
pub use structures::{find_embeddings, induced_substructure, is_isomorphic, Embedding, RelStruct, Signature, Symbol};
pub use tmax::{delta_and_crown, eval_relation, induced_structure, level_count, level_nodes, meet, successors, Copy, Node};
pub use types::{check_realizable, enumerate_types, skeletons, strongly_isomorphic, type_of, Skeleton, TypedCopy};
pub use gadgets::{build_gadget, build_gadget_free, build_gadget_opo, build_gadget_ot, verify_gadget, Flavor, Gadget, VerificationReport};
pub use oracle::{cross_check, realize, realized_types, sweep_types, ComparisonReport, RealizationProblem, RealizeFailure};
