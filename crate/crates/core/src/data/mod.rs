//! Interaction ingestion, filtering, temporal splitting and demographic partitions.

mod filter;
mod graph;
mod ingest;
mod partition;
mod split;
pub mod synthetic;

pub use filter::{k_core_filter, k_core_filter_two_sided};
pub use graph::{build_adjacency, Edge, IdMap, InteractionGraph, SparseAdjacency};
pub use ingest::{
    ingest, ingest_attributes, ingest_attributes_str, ingest_str, AttributeRecord,
    AttributeTable, Ingested, Interaction, Schema,
};
pub use partition::{label_advantage, partition_users, GroupId, GroupPartition};
pub(crate) use split::round_half_up;
pub use split::{
    export_split, import_split, index_maps, split_sizes, temporal_split, DatasetSplit,
    SplitRatios, TrainValid,
};
