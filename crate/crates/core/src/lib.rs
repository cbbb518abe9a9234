//! LUT-based mixed-precision GEMM for ternary and low-bit integer weights.
//!
//! * [`pathgen`] compiles the LUT construction program offline.
//! * [`weightcodec`] packs ternary weights five to a byte and splits integer weights into bit planes.
//! * [`lutkernel`] executes the LUT GEMM bit-exactly next to a naive oracle.
//! * [`costmodel`] gives closed-form addition counts for the competing LUT strategies.
//! * [`archsim`] is a cycle-level model of the accelerator with a tiling sweep.
//! * [`cli`] wires the above into the `ternlut` binary.

pub mod archsim;
pub mod cli;
pub mod costmodel;
pub mod lutkernel;
pub mod matrix;
pub mod pathgen;
pub mod weightcodec;

pub use matrix::Matrix;
