//! Binary matrix containers and atomic file writes.
//!
//! Dense float payloads travel as raw little-endian f32, row-major, with a
//! JSON sidecar describing the shape and row identity. The sidecar lives at
//! `<path>.json` next to the binary file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error on {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: payload holds {actual} f32 values, sidecar says {expected}")]
    ShapeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
}

/// Row-major f32 matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct F32Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl F32Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        F32Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != rows * cols * 4 {
            return None;
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Some(F32Matrix { rows, cols, data })
    }
}

/// Writes bytes through a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(err)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(bytes).map_err(err)?;
        f.sync_all().map_err(err)?;
    }
    fs::rename(&tmp, path).map_err(err)
}

/// Serializes `sidecar` as pretty JSON at `<path>.json` and the matrix as raw
/// f32 at `path`, both atomically.
pub fn write_f32_matrix<S: Serialize>(
    path: &Path,
    matrix: &F32Matrix,
    sidecar: &S,
) -> Result<(), IoError> {
    let sidecar_path = sidecar_path(path);
    let json = serde_json::to_vec_pretty(sidecar).map_err(|source| IoError::Json {
        path: sidecar_path.clone(),
        source,
    })?;
    write_atomic(path, &matrix.to_bytes())?;
    write_atomic(&sidecar_path, &json)
}

/// Reads the binary payload at `path` and the sidecar at `<path>.json`.
/// `dims` extracts (rows, cols) from the deserialized sidecar so the payload
/// length can be checked.
pub fn read_f32_matrix<S: DeserializeOwned>(
    path: &Path,
    dims: impl Fn(&S) -> (usize, usize),
) -> Result<(F32Matrix, S), IoError> {
    let sidecar_path = sidecar_path(path);
    let sidecar_bytes = fs::read(&sidecar_path).map_err(|source| IoError::File {
        path: sidecar_path.clone(),
        source,
    })?;
    let sidecar: S =
        serde_json::from_slice(&sidecar_bytes).map_err(|source| IoError::Json {
            path: sidecar_path.clone(),
            source,
        })?;
    let (rows, cols) = dims(&sidecar);
    let bytes = fs::read(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let matrix =
        F32Matrix::from_bytes(rows, cols, &bytes).ok_or_else(|| IoError::ShapeMismatch {
            path: path.to_path_buf(),
            expected: rows * cols,
            actual: bytes.len() / 4,
        })?;
    Ok((matrix, sidecar))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize)]
    struct Side {
        rows: usize,
        cols: usize,
        row_index: Vec<String>,
    }

    #[test]
    fn roundtrip_matrix_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.f32");
        let m = F32Matrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, -2.5, 0.0, 4.25, 1e-8, -7.0],
        };
        let side = Side {
            rows: 2,
            cols: 3,
            row_index: vec!["a".into(), "b".into()],
        };
        write_f32_matrix(&path, &m, &side).unwrap();
        let (m2, side2): (F32Matrix, Side) =
            read_f32_matrix(&path, |s: &Side| (s.rows, s.cols)).unwrap();
        assert_eq!(m, m2);
        assert_eq!(side2.row_index, vec!["a", "b"]);
    }

    #[test]
    fn shape_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.f32");
        let m = F32Matrix::zeros(2, 2);
        let side = Side {
            rows: 3,
            cols: 3,
            row_index: vec![],
        };
        write_f32_matrix(&path, &m, &side).unwrap();
        let r: Result<(F32Matrix, Side), _> = read_f32_matrix(&path, |s: &Side| (s.rows, s.cols));
        assert!(matches!(r, Err(IoError::ShapeMismatch { .. })));
    }
}
