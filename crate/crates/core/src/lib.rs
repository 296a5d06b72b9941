pub mod linalg;
pub mod ocp;
pub mod sampling;
pub mod symexpr;
pub mod poisson;
pub mod noether;
pub mod kk;
pub mod verify;
pub mod cli;
