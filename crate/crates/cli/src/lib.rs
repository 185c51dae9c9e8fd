//! Experiment driver for `relconc`: CSV-producing subcommands and the
//! numbered acceptance checks.

pub mod checks;
pub mod commands;
pub mod csv;
pub mod parse;

pub use commands::{
    cmd_concavity_curve, cmd_converge, cmd_lowrank_demo, cmd_prox_trap, cmd_regress, cmd_trap,
};
