use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::matrix::Matrix;

pub const TENSOR_MAGIC: &[u8; 4] = b"PLTT";
const HEADER_LEN: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorDtype {
    I8,
    I16,
    I32,
}

impl TensorDtype {
    pub fn code(self) -> u8 {
        match self {
            TensorDtype::I8 => 0,
            TensorDtype::I16 => 1,
            TensorDtype::I32 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TensorDtype::I8),
            1 => Some(TensorDtype::I16),
            2 => Some(TensorDtype::I32),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            TensorDtype::I8 => 1,
            TensorDtype::I16 => 2,
            TensorDtype::I32 => 4,
        }
    }

    fn range(self) -> (i64, i64) {
        match self {
            TensorDtype::I8 => (i8::MIN as i64, i8::MAX as i64),
            TensorDtype::I16 => (i16::MIN as i64, i16::MAX as i64),
            TensorDtype::I32 => (i32::MIN as i64, i32::MAX as i64),
        }
    }
}

/// Integer matrix with its on-disk element type. Values are held widened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor {
    pub dtype: TensorDtype,
    pub data: Matrix<i32>,
}

/// `PLTT` file: magic, dtype u8, rows u32, cols u32, then row-major little-endian values.
pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>, KernelError> {
    let (lo, hi) = t.dtype.range();
    if let Some(v) = t.data.data().iter().find(|&&v| !(lo..=hi).contains(&(v as i64))) {
        return Err(KernelError::Format(format!("value {v} does not fit {:?}", t.dtype)));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + t.data.data().len() * t.dtype.width());
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(t.dtype.code());
    out.extend_from_slice(&(t.data.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(t.data.cols() as u32).to_le_bytes());
    for &v in t.data.data() {
        match t.dtype {
            TensorDtype::I8 => out.push(v as i8 as u8),
            TensorDtype::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            TensorDtype::I32 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, KernelError> {
    if bytes.len() < HEADER_LEN {
        return Err(KernelError::Format("truncated header".into()));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(KernelError::Format("bad magic, expected PLTT".into()));
    }
    let dtype = TensorDtype::from_code(bytes[4])
        .ok_or_else(|| KernelError::Format(format!("unknown dtype {}", bytes[4])))?;
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.width()))
        .ok_or_else(|| KernelError::Format("dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(KernelError::Format(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(dtype.width())
        .map(|b| match dtype {
            TensorDtype::I8 => b[0] as i8 as i32,
            TensorDtype::I16 => i16::from_le_bytes([b[0], b[1]]) as i32,
            TensorDtype::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        })
        .collect();
    Ok(Tensor {
        dtype,
        data: Matrix::from_vec(rows, cols, data).expect("length checked"),
    })
}
