//! Heights maps and extremal quasiconformal maps on flat models.
//!
//! The crate evaluates the ratio functional `L = sup max(||f# phi|| / ||phi||, ...)`
//! of the heights map on models where every quantity has a closed form:
//!
//! - [`torus`]: marked flat tori, where `L` equals the dilatation of the
//!   affine representative and the extremal map is recovered as a stretch;
//! - [`cylinder`]: chains of flat cylinders, finite or generated, where `L`
//!   may fail to be attained;
//! - [`dirichlet`]: the discrete Dirichlet principle on torus grids;
//! - [`variational`]: constant-Beltrami paths and the defect functional `A(t)`.
//!
//! Torus, grid and path engines are generic over [`Real`] (`f32`, `f64`); the
//! cylinder engine is generic over [`ChainScalar`] (`f64`, [`BigRational`]).

pub mod acceptance;
pub mod cylinder;
pub mod dirichlet;
pub mod error;
pub mod flat;
pub mod io;
pub mod random;
pub mod scalar;
pub mod torus;
pub mod variational;

pub use num_complex::Complex;
pub use num_rational::BigRational;

pub use error::{Error, Result};
pub use flat::{parse_marked_map, CurveClass, LinearFoliation, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
pub use scalar::{ChainScalar, Real};

pub type UpperHalfPointF64 = UpperHalfPoint<f64>;
pub type TorusQuadDiffF64 = TorusQuadDiff<f64>;
pub type MarkedTorusMapF64 = MarkedTorusMap<f64>;
pub type GridOneFormF64 = dirichlet::GridOneForm<f64>;
pub type BeltramiPathF64 = variational::BeltramiPath<f64>;

pub type RationalChain = cylinder::CylinderChain<BigRational>;
pub type RationalChainMap = cylinder::ChainMap<BigRational>;
pub type RationalDifferential = cylinder::ConeDifferential<BigRational>;
pub type FloatChain = cylinder::CylinderChain<f64>;
pub type FloatChainMap = cylinder::ChainMap<f64>;
