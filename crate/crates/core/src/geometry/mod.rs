//! Geometric primitives: vectors, triangle meshes, yawed boxes, ray casting and overlap tests.

mod bvh;
pub mod intersect;
pub mod mesh;
pub mod obb;
pub mod polygon;
pub mod raycast;
pub mod vec3;

pub use intersect::{meshes_intersect, meshes_penetrate, CONTACT_TOL};
pub use mesh::TriangleMesh;
pub use obb::{footprint_iom, interval_iom, normalize_yaw, obb_min_distance, polygon_iom, Obb};
pub use polygon::ConvexPolygon;
pub use raycast::{raycast_all, raycast_first, Hit, HitList, Ray};
pub use vec3::{Aabb, Vec3};
