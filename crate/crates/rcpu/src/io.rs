//! Binary tensor file format.
//!
//! Layout: magic `RCPU`, format version u32, rows u64, cols u64, then
//! rows*cols IEEE-754 little-endian float64 values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const TENSOR_MAGIC: &[u8; 4] = b"RCPU";
pub const TENSOR_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Serializes a matrix to the tensor wire format.
pub fn tensor_to_bytes(m: &Matrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * 8);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses the tensor wire format, validating the header, the exact payload
/// length, and that every value is finite.
pub fn tensor_from_bytes(bytes: &[u8], origin: &Path) -> Result<Matrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(origin, "truncated header"));
    }
    if &bytes[0..4] != TENSOR_MAGIC {
        return Err(Error::format(origin, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TENSOR_VERSION {
        return Err(Error::format(
            origin,
            format!("unsupported format version {version}"),
        ));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(Error::format(origin, "zero dimension"));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::format(origin, "dimension overflow"))?;
    let expected = HEADER_LEN + count * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            origin,
            format!("payload length {} but expected {expected}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in bytes[HEADER_LEN..].chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(origin, "non-finite value in payload"));
        }
        data.push(v);
    }
    Matrix::from_vec(rows as usize, cols as usize, data)
}

pub fn write_tensor(path: impl AsRef<Path>, m: &Matrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor_to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Matrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    tensor_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn origin() -> PathBuf {
        PathBuf::from("<mem>")
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = Matrix::from_rows(&[&[1.5, -2.25, 1e-300], &[0.0, f64::MIN_POSITIVE, 3.0]])
            .unwrap();
        let bytes = tensor_to_bytes(&m);
        let back = tensor_from_bytes(&bytes, &origin()).unwrap();
        assert_eq!(m.shape(), back.shape());
        for (a, b) in m.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_magic_version_and_lengths() {
        let m = Matrix::<f64>::identity(2);
        let good = tensor_to_bytes(&m);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(tensor_from_bytes(&bad_magic, &origin()).is_err());

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(tensor_from_bytes(&bad_version, &origin()).is_err());

        let truncated = &good[..good.len() - 1];
        assert!(tensor_from_bytes(truncated, &origin()).is_err());

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(tensor_from_bytes(&trailing, &origin()).is_err());

        assert!(tensor_from_bytes(&good[..10], &origin()).is_err());
    }

    #[test]
    fn rejects_non_finite_payload() {
        let m = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        let bytes = tensor_to_bytes(&m);
        assert!(tensor_from_bytes(&bytes, &origin()).is_err());
    }

    #[test]
    fn rejects_dimension_overflow() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(TENSOR_MAGIC);
        bytes.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(tensor_from_bytes(&bytes, &origin()).is_err());
    }

    #[test]
    fn rejects_zero_dims() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(TENSOR_MAGIC);
        bytes.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        assert!(tensor_from_bytes(&bytes, &origin()).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.rcpu");
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        write_tensor(&path, &m).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(m, back);
        assert!(read_tensor(dir.path().join("missing.rcpu")).is_err());
    }
}
