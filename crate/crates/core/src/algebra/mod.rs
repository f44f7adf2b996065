//! Angular-momentum machinery: coefficients, coupled bases, collective
//! operators and recoupling transforms.

pub mod basis;
pub mod cg;
pub mod operator;
pub mod overlap;
pub mod system;

pub use basis::{couple_chain, couple_chain_capped, CoupledBasis, CoupledState, DEFAULT_DIMENSION_CAP};
pub use cg::clebsch_gordan;
pub use operator::{
    collective_ladder, difference_raising, ladder_dense, ladder_elements, product_jz, product_ladder, total_lowering,
    BasisRef, Direction, SparseOperator,
};
pub use overlap::{map_populations, overlap_transform};
pub use system::{Block, BlockSystem, Membership, Scheme};
