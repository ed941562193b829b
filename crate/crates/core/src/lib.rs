pub mod balance;
pub mod cli;
pub mod bounds;
pub mod comparison;
pub mod dsl;
pub mod error;
pub mod exec;
pub mod jet;
pub mod mc;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod roots;
pub mod sum;
pub mod symmetrization;

pub use error::{Error, Result};
pub use jet::Jet;
pub use radial::{Radial, RadialFunction};
