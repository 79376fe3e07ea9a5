pub mod bases;
pub mod error;
pub mod experiments;
pub mod gf;
pub mod io;
pub mod linalg;
pub mod sdp;
pub mod states;
pub mod tomography;
pub mod witness;

pub use error::{Error, Result};
