pub mod cli;
pub mod error;
pub mod floquet;
pub mod fock;
pub mod linalg;
pub mod loss;
pub mod oracle;
pub mod ode;
pub mod quadrature;
pub mod reservoir;
pub mod superop;
pub mod validate;
pub mod wei_norman;

pub use error::{Error, Result};
