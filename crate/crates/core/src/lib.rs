//! Structural quantification of multipartite entanglement.
//!
//! For a test operator `L` and a partition of the subsystems into parties,
//! `g_r` is the largest expectation of `L` over pure states that are sums of
//! `r` products across the parties. Any state with `Tr[rho L] > g_r` has
//! multipartite Schmidt number above `r` for that partition.

pub mod channels;
pub mod error;
pub mod partition;
pub mod scenarios;
pub mod schmidt;
pub mod sqe;
pub mod tensor;
pub mod witness;

pub use channels::{amplitude_loss, white_noise, GhzCoefficients, KrausChannel};
pub use error::{Result, SqeError};
pub use partition::{enumerate_partitions, Partition};
pub use sqe::{g_r_max, GrEstimate, Method, SolverOptions, SqeSolution};
pub use tensor::{CMatrix, CVector, DensityOperator, HermitianOperator, PureState, SystemShape, C64};
pub use witness::{certify, make_witness, GRTable, GrEntry, SqeReport};
