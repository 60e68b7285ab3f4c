pub mod a2rc;
pub mod array;
pub mod control;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod session;

pub use array::{Angle, ArrayModel};
pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector};
