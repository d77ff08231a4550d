//! Numerical building blocks shared by the physics modules.

pub mod quad;
pub mod rng;
pub mod special;
