//! Grid-based reference solutions.

pub mod eigen;
pub mod splitop;

pub use eigen::{solve_tise, solve_tise_with, EigenResult};
pub use splitop::{
    split_operator_propagate, Axis, GridOutcome, GridWavefunction, Potential, SplitOpConfig, SplitOperator,
};
