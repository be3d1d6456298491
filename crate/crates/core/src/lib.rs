//! Exact computation of p-canonical bases of Hecke algebras of
//! crystallographic Coxeter systems.

pub mod coxeter;
pub mod error;
pub mod hecke;
pub mod lightleaves;
pub mod localize;
pub mod nilhecke;
pub mod pcanon;
pub mod polyring;

pub use coxeter::{build_system, CoxeterSystem, DecoratedSubexpr, Decoration, Gen, Side, SystemConfig, WElem};
pub use error::{Error, Result};
pub use hecke::{Hecke, HeckeElt, KLExpansion, LaurentPoly};
pub use polyring::{LinearForm, Poly, RatFn};
pub use nilhecke::{NilHecke, NilHeckeElt};
