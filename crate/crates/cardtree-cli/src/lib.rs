//! Library half of the CLI: the benchmark harness and the command
//! implementations, kept importable so integration tests can drive them
//! in-process.

pub mod bench;
pub mod commands;

/// Exit code for a command error: 2 for input problems, 3 for zero-mass or
/// infeasible models, 4 for optimizer divergence, 5 for resource limits.
pub fn exit_code(err: &cardtree::Error) -> i32 {
    use cardtree::Error::*;
    match err {
        ZeroMass { .. } | Infeasible { .. } | InfeasibleInit(_) | MilZeroMass => 3,
        Divergence { .. } => 4,
        TooLarge(_) => 5,
        _ => 2,
    }
}
