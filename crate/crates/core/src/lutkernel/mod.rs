//! Functional LUT GEMM engine.
//!
//! Each output column is processed chunk by chunk: the activation chunk is expanded into a
//! table by replaying the build path, then every weight row queries it with its packed byte.
//! The results are exact and are checked against a plain integer GEMM.

mod gemm;
mod lut;
mod tensor_io;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::pathgen::PathError;
use crate::weightcodec::CodecError;

pub use gemm::{
    mpgemm_bitserial, mpgemm_bitserial_with, mpgemm_ternary, mpgemm_ternary_with, naive_gemm, naive_gemm_with,
    Census, Construction, GemmResult, KernelOptions, NaiveResult,
};
pub use lut::{construct_lut, construct_lut_with, query, Lut, LutPrecision};
pub use tensor_io::{decode_tensor, encode_tensor, Tensor, TensorDtype, TENSOR_MAGIC};

pub type OutputMatrix = Matrix<i32>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("shape mismatch: {left:?} times {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("LUT address {address} out of range (stored entries: {stored})")]
    BadAddress { address: u8, stored: usize },
    #[error("path does not match weights: {0}")]
    ConfigMismatch(String),
    #[error("activation {value} does not fit in {bits} signed bits")]
    ActivationRange { value: i32, bits: u32 },
    #[error("activation width must be in 1..=16, got {0}")]
    ActivationBits(u32),
    #[error("accumulator needs {needed} bits, more than 32")]
    AccumulatorOverflow { needed: u32 },
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Signed integer activations, K rows by N columns, each value within `bits` signed bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationMatrix {
    matrix: Matrix<i32>,
    bits: u32,
}

impl ActivationMatrix {
    pub fn new(matrix: Matrix<i32>, bits: u32) -> Result<Self, KernelError> {
        if !(1..=16).contains(&bits) {
            return Err(KernelError::ActivationBits(bits));
        }
        let lo = -(1i32 << (bits - 1));
        let hi = (1i32 << (bits - 1)) - 1;
        if let Some(&value) = matrix.data().iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(KernelError::ActivationRange { value, bits });
        }
        Ok(Self { matrix, bits })
    }

    /// 8-bit activations.
    pub fn int8(matrix: Matrix<i32>) -> Result<Self, KernelError> {
        Self::new(matrix, 8)
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn matrix(&self) -> &Matrix<i32> {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_range() {
        assert!(ActivationMatrix::int8(Matrix::from_vec(1, 2, vec![-128, 127]).unwrap()).is_ok());
        assert_eq!(
            ActivationMatrix::int8(Matrix::from_vec(1, 1, vec![128]).unwrap()).unwrap_err(),
            KernelError::ActivationRange { value: 128, bits: 8 }
        );
        assert!(ActivationMatrix::new(Matrix::zeros(1, 1), 0).is_err());
        assert!(ActivationMatrix::new(Matrix::zeros(1, 1), 17).is_err());
    }
}
