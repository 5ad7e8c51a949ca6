pub mod basis;
pub mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod models;
pub mod mra;
pub mod quadrature;
pub mod solver;
pub mod stochastic;
