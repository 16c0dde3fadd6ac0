pub mod linalg;
pub mod problems;
pub mod noise;
pub mod merit;
pub mod steps;
pub mod stepsize;
pub mod driver;
pub mod harness;
pub mod verify;
pub mod fixtures;
