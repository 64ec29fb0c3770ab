//! Pseudo-3D point clouds, frame rectification, Chamfer distances and the
//! RBF graph adjacency built on them.

mod adjacency;
mod chamfer;
mod cloud;
mod icp;

pub use adjacency::{
    median, multiscale_adjacency, nearest_rank, rbf_adjacency, rbf_bandwidth, sparsity,
    AdjacencyMatrix, DEFAULT_PERCENTILE, DEFAULT_SPARSITY_EPS,
};
pub use chamfer::{chamfer, pairwise_chamfer, DistanceMatrix};
pub use cloud::{backproject, BoxRect, Point3, PointCloud};
pub(crate) use cloud::{axis_coord, frame_max, normalized_depth};
pub use icp::{
    apply_transform, fit_similarity, icp_align, rotation_angle_between, IcpFlag, Registration,
    SimilarityTransform,
};
