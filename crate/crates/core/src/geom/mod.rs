//! Geometry and randomness primitives on the unit sphere.

mod coords;
mod sphere;

pub use coords::{
    box_bounds, jacobian_box_mean, spherical_coords_map, stereographic, stereographic_inverse,
};
pub use sphere::{
    apply_random_rotation, rotate_all, sample_haar_orthogonal, sample_uniform_sphere,
    OrthogonalFrame, UnitVector,
};

pub(crate) use sphere::uniform_unit;
