//! Exact quadratic lattices over Z_p and its unramified extensions:
//! fixed-precision ring arithmetic, multivariate Hensel lifting, Jordan
//! splittings with basis witnesses, certified primitive-representation and
//! isometry decisions, and bounded verification of primitive universality.

pub mod error;
pub mod ring;

pub mod mat;
pub use error::{Error, Result};
pub use ring::{Elt, Ring};
