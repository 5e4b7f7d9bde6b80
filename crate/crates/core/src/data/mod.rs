//! Dataset loading and synthetic fixtures.

mod edges;
mod synth;
mod tabular;

pub use edges::{load_edge_list, write_edge_list, write_labels, EdgeListOptions, GraphDataset};
pub use synth::{synth_directed_graph, synth_two_block, GraphKind};
pub use tabular::{load_csv, TabularDataset, Targets, Task};
