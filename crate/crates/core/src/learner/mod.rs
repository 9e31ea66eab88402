//! Learning a sketch: weighted k-means centers, the sketching matrix and
//! row-wise mapping with block-wise error compensation.

mod config;
pub mod kmeans;
mod params;
mod row;
mod sketching;

pub use config::SketchConfig;
pub use kmeans::{weighted_kmeans, weighted_kmeans_traced, weighted_objective, Assignment, KMeansInit, KMeansOptions};
pub use params::{compression_ratio, count_trainable_params, llama2_7b_shapes, LLAMA2_7B_PARAMS};
pub use row::{
    learn_to_sketch_row, output_error, rtn_sketch_row, sketch_matrix, sketch_matrix_with_threads, RowSketch,
};
pub use sketching::{build_sketching_matrix, rtn, SketchingMatrix};
