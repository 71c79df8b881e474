//! Adaptive hierarchical sparse grids on a box: construction, hierarchization,
//! interpolation, quadrature and surplus-driven refinement.

mod basis;
mod domain;
mod grid;

pub use basis::{
    basis_integral, basis_value, children, coordinate, is_valid, nodes_on_level, parent, NodeId,
    MAX_LEVEL,
};
pub use domain::Domain;
pub use grid::{regular_point_count, HierarchicalGrid};
