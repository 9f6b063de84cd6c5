//! Global layer: pivot mapping of objects into an m-dimensional vector space
//! and an R-tree over the mapped vectors whose leaves are partitions.

mod pivot;
mod region;
mod tree;

pub use pivot::{map_object, select_pivots_fft, MappedVector, PivotSet};
pub use region::{map_query_region, QueryBox, PRUNE_SLACK};
pub use tree::{GlobalTree, Mbr, Node, NodeKind, Partition, PruneTrace, TreeUpdate, DEFAULT_FANOUT};
