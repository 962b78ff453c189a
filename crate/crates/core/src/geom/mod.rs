//! Geometric types and kernels.

mod aabb;
mod bvh;
mod cloud;
mod kdtree;
mod mesh;
mod point;
mod ray;
mod sampling;
mod voxel;

pub use aabb::{compute_aabb, Aabb};
pub use bvh::{build_bvh, Bvh, BvhNode, NodeKind, LEAF_SIZE};
pub use cloud::{Organ, PointCloud};
pub use kdtree::KdTree;
pub use mesh::{TriangleMesh, MIN_TRIANGLE_AREA};
pub use point::Point3;
pub use ray::{intersect_ray_triangle, Ray};
pub use sampling::{fps_sample, fps_seed_lowest, knn, knn_points, Neighbors};
pub use voxel::{voxel_volume, VoxelGrid, VOXEL_SNAP};
