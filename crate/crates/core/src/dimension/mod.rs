//! Tree dimension and the dimension-bounded program transformation.

mod interpretation;
mod kdim;
mod trace;

pub use interpretation::{entry, lift, map_trace, restrict_interpretation, Interpretation};
pub use kdim::{false_pred, kdim, ProvenanceMap};
pub use trace::{tree_dimension, TraceTree};
