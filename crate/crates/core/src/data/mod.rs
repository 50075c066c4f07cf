//! Dataset generation, ingestion, labeling and sampling.

mod csv_io;
mod kmeans;
mod split;
mod synthetic;

pub use csv_io::{load_csv, ratings_to_matrix, write_dataset_csv, LabelColumn, RawTable};
pub use kmeans::{kmeans_label, kmeans_label_with, KMeansConfig, KMeansModel};
pub use split::{partition_indices, sample_split, split_indices, SplitIndices, SplitSpec};
pub use synthetic::{generate_synthetic, relabel_family, relabel_transactions, synthetic_family};
