//! Numerical convex integration.

// `!(a > b)` is used on purpose so that NaN fails the comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod convex;
pub mod corrugation;
pub mod demos;
pub mod diff;
pub mod domain;
pub mod error;
pub mod export;
pub mod hprinciple;
pub mod jetspace;
pub mod linalg;
pub mod loops;
pub mod quadrature;
pub mod reparam;
pub mod scalar;
pub mod smooth;
pub mod verify;

pub use error::{Error, Result};
pub use f64s::*;
pub use scalar::Real;

/// Double-precision instantiations of the main generic types.
pub mod f64s {
    pub type Matrix = crate::linalg::Matrix<f64>;
    pub type OneJet = crate::jetspace::OneJet<f64>;
    pub type JetSection = crate::jetspace::JetSection<f64>;
    pub type FamilyOfSections = crate::jetspace::FamilyOfSections<f64>;
    pub type Relation = crate::jetspace::Relation<f64>;
    pub type DualPair = crate::jetspace::DualPair<f64>;
    pub type AffineBasis = crate::convex::AffineBasis<f64>;
    pub type Loop = crate::loops::Loop<f64>;
    pub type SurroundingFamily = crate::loops::SurroundingFamily<f64>;
    pub type CircleReparam = crate::reparam::CircleReparam<f64>;
    pub type Landscape = crate::hprinciple::Landscape<f64>;
    pub type Homotopy = crate::hprinciple::Homotopy<f64>;
    pub type Domain = crate::domain::Domain<f64>;
    pub type Mesh = crate::export::Mesh<f64>;
}
