use serde::{Deserialize, Serialize};

use super::CodecError;
use super::ternary::TernaryMatrix;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneEncoding {
    /// Plane i weighs 2^i.
    Unsigned,
    /// Plane i weighs 2^i except the top plane, which weighs -2^(b-1).
    TwosComplement,
    /// Two planes for ternary weights: the +1 positions and the -1 positions.
    SignSplit,
}

/// Binary decomposition of an integer weight matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitPlaneSet {
    pub encoding: PlaneEncoding,
    pub planes: Vec<Matrix<i8>>,
    /// Signed multiplier applied to each plane's partial product.
    pub plane_weights: Vec<i32>,
}

impl BitPlaneSet {
    pub fn bits(&self) -> usize {
        self.planes.len()
    }

    pub fn rows(&self) -> usize {
        self.planes[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.planes[0].cols()
    }

    /// Σ plane_weight_i · plane_i.
    pub fn reconstruct(&self) -> Matrix<i32> {
        let mut out = Matrix::<i32>::zeros(self.rows(), self.cols());
        for (plane, &weight) in self.planes.iter().zip(&self.plane_weights) {
            for r in 0..self.rows() {
                for c in 0..self.cols() {
                    let v = *out.get(r, c) + weight * *plane.get(r, c) as i32;
                    out.set(r, c, v);
                }
            }
        }
        out
    }
}

/// Splits `w` into `bits` binary planes, unsigned or two's complement.
pub fn decompose_bitplanes(w: &Matrix<i32>, bits: usize, signed: bool) -> Result<BitPlaneSet, CodecError> {
    if bits == 0 || bits > 16 {
        return Err(CodecError::Shape(format!("bit width {bits} outside 1..=16")));
    }
    let (lo, hi) = if signed {
        (-(1i32 << (bits - 1)), (1i32 << (bits - 1)) - 1)
    } else {
        (0, (1i32 << bits) - 1)
    };
    if let Some(pos) = w.data().iter().position(|v| !(lo..=hi).contains(v)) {
        return Err(CodecError::Overflow {
            value: w.data()[pos],
            bits,
            signed,
        });
    }
    let mask = (1i64 << bits) - 1;
    let planes = (0..bits)
        .map(|i| w.map(|v| (((v as i64) & mask) >> i & 1) as i8))
        .collect();
    let plane_weights = (0..bits)
        .map(|i| {
            if signed && i == bits - 1 {
                -(1i32 << i)
            } else {
                1i32 << i
            }
        })
        .collect();
    Ok(BitPlaneSet {
        encoding: if signed {
            PlaneEncoding::TwosComplement
        } else {
            PlaneEncoding::Unsigned
        },
        planes,
        plane_weights,
    })
}

/// Ternary weights as a positive and a negative binary pass: `y = P·x − N·x`.
pub fn decompose_sign_split(w: &TernaryMatrix) -> BitPlaneSet {
    let m = w.as_matrix();
    BitPlaneSet {
        encoding: PlaneEncoding::SignSplit,
        planes: vec![m.map(|v| (v == 1) as i8), m.map(|v| (v == -1) as i8)],
        plane_weights: vec![1, -1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unsigned_two_bit() {
        let w = Matrix::from_vec(1, 2, vec![2, 1]).unwrap();
        let p = decompose_bitplanes(&w, 2, false).unwrap();
        assert_eq!(p.planes[0].data(), &[0, 1]);
        assert_eq!(p.planes[1].data(), &[1, 0]);
        assert_eq!(p.reconstruct(), w);
    }

    #[test]
    fn twos_complement_minus_two() {
        let w = Matrix::from_vec(1, 1, vec![-2]).unwrap();
        let p = decompose_bitplanes(&w, 2, true).unwrap();
        assert_eq!(p.planes[0].data(), &[0]);
        assert_eq!(p.planes[1].data(), &[1]);
        assert_eq!(p.plane_weights, vec![1, -2]);
        assert_eq!(p.reconstruct(), w);
    }

    #[test]
    fn sign_split_ternary() {
        let w = TernaryMatrix::new(Matrix::from_vec(1, 3, vec![1, -1, 0]).unwrap()).unwrap();
        let p = decompose_sign_split(&w);
        assert_eq!(p.planes[0].data(), &[1, 0, 0]);
        assert_eq!(p.planes[1].data(), &[0, 1, 0]);
        assert_eq!(p.reconstruct(), w.as_matrix().map(i32::from));
    }

    #[test]
    fn overflow_rejected() {
        let w = Matrix::from_vec(1, 1, vec![4]).unwrap();
        assert!(matches!(
            decompose_bitplanes(&w, 2, false),
            Err(CodecError::Overflow { value: 4, .. })
        ));
        let w = Matrix::from_vec(1, 1, vec![2]).unwrap();
        assert!(decompose_bitplanes(&w, 2, true).is_err());
        let w = Matrix::from_vec(1, 1, vec![-1]).unwrap();
        assert!(decompose_bitplanes(&w, 3, false).is_err());
    }

    proptest! {
        #[test]
        fn reconstruction_is_exact(bits in 1usize..=8, signed: bool, seed in proptest::collection::vec(any::<i32>(), 12)) {
            let (lo, hi) = if signed { (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1) } else { (0, (1i64 << bits) - 1) };
            let span = hi - lo + 1;
            let data: Vec<i32> = seed.iter().map(|&s| (lo + (s as i64).rem_euclid(span)) as i32).collect();
            let w = Matrix::from_vec(3, 4, data).unwrap();
            let p = decompose_bitplanes(&w, bits, signed).unwrap();
            prop_assert_eq!(p.bits(), bits);
            for plane in &p.planes {
                prop_assert!(plane.data().iter().all(|&v| v == 0 || v == 1));
            }
            prop_assert_eq!(p.reconstruct(), w);
        }
    }
}
